"""Scenario schema: parsing, validation, seeds, environment sampling."""

import dataclasses

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

import auctionsim as a
from auctionsim import _rng
from auctionsim.scenario import (
    MechanismSpec,
    Scenario,
    ScenarioError,
    scenario_from_dict,
    sample_env_sequence,
    validate_scenario,
)


def minimal_config(**overrides):
    cfg = {
        "name": "toy",
        "queries": ["q"],
        "bidders": [{
            "copies": 2,
            "types": ["lo", "hi"],
            "type_dist": [0.5, 0.5],
            "values": [0.4, 1.0],
            "ctrs": 1.0,
        }],
        "bid_grid": [0.0, 0.5, 1.0],
        "mechanism": "second",
        "learner": {"algorithm": "hedge"},
        "horizon": 100,
        "runs": 2,
        "master_seed": 5,
    }
    cfg.update(overrides)
    return cfg


def test_minimal_config_loads():
    s = scenario_from_dict(minimal_config())
    validate_scenario(s)
    assert s.num_bidders == 2
    assert s.num_queries == 1
    assert s.num_bids == 3
    assert s.clause_space == (1,)
    assert s.num_actions == 3
    assert s.b_max == 1.0 and s.v_max == 1.0


def test_mechanism_string_forms():
    assert MechanismSpec.from_string("first").rule == "first"
    assert MechanismSpec.from_string("reserve:0.6") == MechanismSpec("reserve", 0.6)
    assert MechanismSpec.from_string("soft:0.65").floor == 0.65
    with pytest.raises(ScenarioError) as e:
        MechanismSpec.from_string("second:0.3")
    assert e.value.field == "mechanism"
    with pytest.raises(ScenarioError):
        MechanismSpec.from_string("soft")
    with pytest.raises(ScenarioError):
        MechanismSpec.from_string("vickrey")


def test_bid_grid_range_form():
    s = scenario_from_dict(minimal_config(bid_grid={"start": 0, "stop": 1, "count": 21}))
    assert len(s.bid_grid) == 21
    assert s.bid_grid[1] == 0.05  # rounded to exact decimals
    assert s.bid_grid[-1] == 1.0


def test_clause_space_forms():
    two_q = minimal_config(queries=["q1", "q2"],
                           bidders=[{
                               "copies": 2,
                               "types": ["t"],
                               "type_dist": [1.0],
                               "values": [[0.5, 0.5]],
                               "ctrs": 1.0,
                           }])
    s = scenario_from_dict({**two_q, "clause_space": "all"})
    assert s.clause_space == (0, 1, 2, 3)  # empty clause admissible
    s = scenario_from_dict({**two_q, "clause_space": "all_nonempty"})
    assert s.clause_space == (1, 2, 3)
    s = scenario_from_dict(two_q)  # default: the full clause only
    assert s.clause_space == (3,)
    s = scenario_from_dict({**two_q, "clause_space": [["q2"], ["q1", "q2"]]})
    assert s.clause_space == (2, 3)


def test_clause_eligibility_table():
    cfg = minimal_config(queries=["q1", "q2"],
                         bidders=[{
                             "copies": 2,
                             "types": ["t"],
                             "type_dist": [1.0],
                             "values": [[0.5, 0.5]],
                             "ctrs": 1.0,
                         }],
                         clause_space="all")
    s = scenario_from_dict(cfg)
    table = s.clause_eligibility()
    for c_idx, mask in enumerate(s.clause_space):
        for q in range(2):
            assert table[c_idx, q] == bool(mask >> q & 1)


def test_action_index_round_trip():
    cfg = minimal_config(queries=["q1", "q2"],
                         bidders=[{
                             "copies": 2,
                             "types": ["t"],
                             "type_dist": [1.0],
                             "values": [[0.5, 0.5]],
                             "ctrs": 1.0,
                         }],
                         clause_space="all_nonempty")
    s = scenario_from_dict(cfg)
    seen = set()
    for idx in range(s.num_actions):
        b, c = s.action(idx)
        assert s.action_index(b, c) == idx
        seen.add((b, c))
    assert len(seen) == s.num_bids * len(s.clause_space)


@pytest.mark.parametrize("mangle, field", [
    (lambda c: c.update(queries=[]), "queries"),
    (lambda c: c.update(bidders=[]), "bidders"),
    (lambda c: c["bidders"][0].update(type_dist=[0.7, 0.7]), "bidders[0].type_dist"),
    (lambda c: c["bidders"][0].update(values=[-0.1, 1.0]), "bidders[0].values"),
    (lambda c: c["bidders"][0].update(ctrs=1.5), "bidders[0].ctrs"),
    (lambda c: c.update(bid_grid=[0.5, 0.5]), "bid_grid"),
    (lambda c: c.update(bid_grid=[-0.1, 0.5]), "bid_grid"),
    (lambda c: c.update(horizon=0), "horizon"),
    (lambda c: c.update(mechanism="soft"), "mechanism"),
])
def test_validation_names_offending_field(mangle, field):
    cfg = minimal_config()
    mangle(cfg)
    with pytest.raises(ScenarioError) as e:
        validate_scenario(scenario_from_dict(cfg))
    assert e.value.field == field


def test_unnormalized_distribution_message():
    cfg = minimal_config()
    cfg["bidders"][0]["type_dist"] = [0.7, 0.7]
    with pytest.raises(ScenarioError, match="distribution not normalized"):
        validate_scenario(scenario_from_dict(cfg))


def test_duplicate_clause_rejected():
    cfg = minimal_config(clause_space=[["q"], ["q"]])
    with pytest.raises(ScenarioError) as e:
        validate_scenario(scenario_from_dict(cfg))
    assert e.value.field == "clause_space"


def test_learner_param_validation():
    cfg = minimal_config(learner={"algorithm": "hedge", "eta": -1})
    with pytest.raises(ScenarioError) as e:
        validate_scenario(scenario_from_dict(cfg))
    assert e.value.field == "learner.eta"
    cfg = minimal_config(learner={"algorithm": "qlearn"})
    with pytest.raises(ScenarioError) as e:
        validate_scenario(scenario_from_dict(cfg))
    assert e.value.field == "learner.algorithm"


def test_seed_derivation_matches_rng_module():
    s = scenario_from_dict(minimal_config(master_seed=101, runs=4))
    assert s.env_seed == _rng.env_seed_from_master(101)
    assert s.run_seeds == _rng.run_seeds_from_master(101, 4)
    # with_seeds rederives the same chain
    again = s.with_seeds(101)
    assert again.env_seed == s.env_seed
    assert again.run_seeds == s.run_seeds
    assert s.with_seeds(101, runs=2).run_seeds == s.run_seeds[:2]


def test_copies_expand_to_identical_bidders():
    s = scenario_from_dict(minimal_config())
    b0, b1 = s.bidders
    assert b0.types == b1.types
    assert np.array_equal(b0.values, b1.values)
    assert np.array_equal(b0.type_dist, b1.type_dist)


def test_window_properties():
    s = scenario_from_dict(minimal_config(horizon=400))
    assert s.window_length == 40
    assert s.window_start == 360
    half = dataclasses.replace(s, window_fraction=0.5)
    assert half.window_length == 200


def test_env_sequence_deterministic_and_in_range():
    s = scenario_from_dict(minimal_config(horizon=5000))
    env1 = sample_env_sequence(s)
    env2 = sample_env_sequence(s)
    assert np.array_equal(env1.queries, env2.queries)
    assert np.array_equal(env1.types, env2.types)
    assert env1.horizon == 5000
    assert env1.types.shape == (5000, 2)
    assert env1.queries.max() < s.num_queries
    for i, b in enumerate(s.bidders):
        assert env1.types[:, i].max() < len(b.types)


def test_env_type_frequencies_follow_distribution():
    cfg = minimal_config(horizon=40_000)
    cfg["bidders"][0]["type_dist"] = [0.2, 0.8]
    s = scenario_from_dict(cfg)
    env = sample_env_sequence(s)
    freq = (env.types[:, 0] == 1).mean()
    assert abs(freq - 0.8) < 0.02


def test_shipped_scenarios_all_load_and_validate():
    for name in a.bundled_scenarios():
        s = a.load_scenario(name)
        validate_scenario(s)


def test_textbook_scenario_shape():
    s = a.load_scenario("textbook_n2")
    assert s.num_bidders == 2
    assert len(s.bidders[0].types) == 21
    assert np.array_equal(s.bid_grid, np.round(np.linspace(0, 1, 21), 10))
    assert s.bidders[0].values[:, 0].tolist() == s.bid_grid.tolist()
    assert s.mechanism.rule == "second"
    assert s.horizon == 400_000


def test_yaml_file_round_trip(tmp_path):
    cfg = minimal_config()
    path = tmp_path / "toy.yaml"
    path.write_text(yaml.safe_dump(cfg))
    s = a.load_scenario(path)
    assert s.name == "toy"
    assert s.run_seeds == scenario_from_dict(cfg).run_seeds


@given(st.integers(0, 2**32), st.integers(1, 8))
def test_with_seeds_chain_property(master, runs):
    s = scenario_from_dict(minimal_config()).with_seeds(master, runs=runs)
    assert len(s.run_seeds) == runs
    assert len(set(s.run_seeds)) == runs
    assert s.env_seed not in s.run_seeds


def test_beta_scenarios_carry_exact_bracket_masses():
    # Bundled beta_AB files discretize Beta(A, B) onto five equal-width
    # brackets; the stored masses must equal the exact CDF increments.
    from fractions import Fraction

    from _oracles import beta_cdf_exact

    names = [n for n in a.bundled_scenarios() if n.startswith("beta_")]
    assert len(names) == 9
    for name in names:
        shape_a, shape_b = int(name[5]), int(name[6])
        s = a.load_scenario(name)
        edges = [Fraction(k, 5) for k in range(6)]
        cdf = [beta_cdf_exact(x, shape_a, shape_b) for x in edges]
        masses = [cdf[k + 1] - cdf[k] for k in range(5)]
        assert sum(masses) == 1
        assert [float(m) for m in masses] == s.bidders[0].type_dist.tolist(), name
        assert s.bidders[0].values[:, 0].tolist() == [0.2, 0.4, 0.6, 0.8, 1.0]
