"""Deterministic simulation of repeated ad auctions with learning bidders.

Bidder types place (bid, targeting clause) actions chosen by adversarial
bandit learners, an auction mechanism prices each period, and metrics
are read off a final measurement window.  On top of the simulator sit a
coarse-equilibrium certificate checker and a value-inference procedure
that recovers a value distribution from observed bids under a
hypothesized pricing rule.

Entry points: ``load_scenario`` / ``Scenario`` describe an experiment,
``run_batch`` and ``sweep`` execute it, ``coarse_bce_epsilon`` audits a
traced run, and ``ValueInference`` (or ``infer_values``) runs the
inference loop.  The ``auctionsim`` console script wraps these.
"""

from ._version import __version__
from .equilibrium import (DeviationGain, EmpiricalProfile, coarse_bce_epsilon,
                          expected_payoff, realized_regret)
from .inference import (InferenceConfig, InferenceResult, ShadingReport,
                        ValueInference, bracket_weights, flatten_monotone,
                        infer_values, mae, observed_percentiles,
                        shading_report, update_value)
from .learners import LearnerState, exp3ix_tuning, load_checkpoint, save_checkpoint
from .mechanisms import AuctionOutcome, normalize_reward, resolve_auction, reward
from .scenario import (BidderSpec, EnvSequence, LearnerSpec, MechanismSpec,
                       Scenario, ScenarioError, bundled_scenarios, load_scenario,
                       sample_env_sequence, validate_scenario)
from .simulator import (BatchResult, RunResult, Trace, modal_bids, run_batch,
                        run_simulation, sweep, sweep_mechanisms, type_mean_bids)

__all__ = [
    "__version__",
    "AuctionOutcome", "BatchResult", "BidderSpec", "DeviationGain",
    "EmpiricalProfile", "EnvSequence", "InferenceConfig", "InferenceResult",
    "LearnerSpec", "LearnerState", "MechanismSpec", "RunResult", "Scenario",
    "ScenarioError", "ShadingReport", "Trace", "ValueInference",
    "bracket_weights", "bundled_scenarios", "coarse_bce_epsilon",
    "exp3ix_tuning", "expected_payoff", "flatten_monotone", "infer_values",
    "load_checkpoint", "load_scenario", "mae", "modal_bids",
    "normalize_reward", "observed_percentiles", "realized_regret",
    "resolve_auction", "reward", "run_batch", "run_simulation",
    "sample_env_sequence", "save_checkpoint", "shading_report", "sweep",
    "sweep_mechanisms", "type_mean_bids", "update_value", "validate_scenario",
]
