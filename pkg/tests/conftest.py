import pytest

from auctionsim import mechanisms


@pytest.fixture(autouse=True, scope="session")
def clamp_counter_stays_zero():
    # Reward normalization clamping means a utility escaped its contracted
    # bracket somewhere.  Tests that clamp on purpose reset the counter.
    mechanisms.reset_clamp_events()
    yield
    assert mechanisms.clamp_events == 0, (
        f"normalize_reward clamped {mechanisms.clamp_events} time(s) during the run"
    )
