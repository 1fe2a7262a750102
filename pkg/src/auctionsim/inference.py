"""Value inference by iterative percentile matching.

Given the bid distribution a learner produced under some pricing rule,
recover the value distribution that would generate it.  Seven percentile
levels anchor the distribution.  Start from inferred values equal to the
observed bids, simulate symmetric learners holding those values, compare
the bids they settle on against the observed ones, and nudge each value
by the shading the simulation exhibited: a type bidding b_p from value v
shades by sigma = b_p / v, so the value consistent with the observed bid
is b_o / sigma, and the update moves a fraction alpha toward it.  Stop
early once predicted bids sit within half a grid step of observed, and
report the iteration whose predicted bids were closest.

Every simulation inside one inference call reuses a single environment
sequence and run-seed set, so the procedure is deterministic and
iterations differ only through the value tables.

``ValueInference`` wraps the procedure in an estimator (scikit-learn
conventions: constructor stores hyperparameters untouched, ``fit``
learns attributes with trailing underscores and returns self).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .scenario import (BidderSpec, LearnerSpec, MechanismSpec, Scenario,
                       sample_env_sequence)
from . import _rng, simulator

DEFAULT_PERCENTILES = (10, 25, 40, 50, 60, 75, 90)
VALUE_GUARD = 1e-6


def mae(vector_a, vector_b) -> float:
    a = np.asarray(vector_a, dtype=np.float64)
    b = np.asarray(vector_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def observed_percentiles(bid_samples, percentile_list=DEFAULT_PERCENTILES) -> np.ndarray:
    """Nearest-rank empirical quantiles: sorted[ceil(p/100 * n)] (1-based)."""
    samples = np.sort(np.asarray(bid_samples, dtype=np.float64).ravel())
    n = len(samples)
    if n == 0:
        raise ValueError("empty bid sample set")
    out = np.empty(len(percentile_list))
    for k, p in enumerate(percentile_list):
        r = p * n / 100.0
        rank = int(round(r)) if abs(r - round(r)) < 1e-9 else math.ceil(r)
        out[k] = samples[min(max(rank, 1), n) - 1]
    return out


def bracket_weights(percentile_list=DEFAULT_PERCENTILES) -> np.ndarray:
    """Probability mass per percentile level.

    Each level owns the bracket reaching midway to its neighbors; the
    end levels stop at their own position, so no mass is invented
    outside [first, last].  Widths are renormalized to sum to one.  For
    the default seven levels this gives (3, 6, 5, 4, 5, 6, 3)/32.
    """
    p = np.asarray(percentile_list, dtype=np.float64)
    if len(p) < 2 or np.any(np.diff(p) <= 0) or p[0] <= 0 or p[-1] >= 100:
        raise ValueError("percentiles must be strictly increasing within (0, 100)")
    mids = (p[:-1] + p[1:]) / 2.0
    lo = np.concatenate([[p[0]], mids])
    hi = np.concatenate([mids, [p[-1]]])
    widths = hi - lo
    return widths / widths.sum()


def update_value(v: float, b_observed: float, b_predicted: float, alpha: float) -> float:
    """One percentile update; sigma guard substitutes 1 near zero."""
    if v < VALUE_GUARD or b_predicted < VALUE_GUARD:
        sigma = 1.0
    else:
        sigma = b_predicted / v
    return v + alpha * (b_observed / sigma - v)


def flatten_monotone(values) -> np.ndarray:
    return np.maximum.accumulate(np.asarray(values, dtype=np.float64))


@dataclass
class InferenceConfig:
    percentiles: tuple = DEFAULT_PERCENTILES
    alpha: float = 0.2
    max_iterations: int = 100
    runs_per_iteration: int = 10
    horizon: int = 200_000
    num_bidders: int = 2
    grid_step: float = 0.1
    headroom: float = 1.34
    master_seed: int = 1


@dataclass
class InferenceIteration:
    index: int
    inferred_values: np.ndarray
    predicted_bids: np.ndarray    # (K,) mean over runs
    predicted_by_run: np.ndarray  # (R, K)
    mae: float


@dataclass
class InferenceResult:
    percentiles: tuple
    observed_bids: np.ndarray
    history: list[InferenceIteration] = field(default_factory=list)
    best_iteration: int = 0

    @property
    def best(self) -> InferenceIteration:
        return self.history[self.best_iteration]

    @property
    def values(self) -> np.ndarray:
        return self.best.inferred_values

    @property
    def predicted_bids(self) -> np.ndarray:
        return self.best.predicted_bids

    @property
    def mae(self) -> float:
        return self.best.mae


def build_inference_scenario(
    values: np.ndarray,
    bid_grid: np.ndarray,
    mechanism: MechanismSpec,
    config: InferenceConfig,
) -> Scenario:
    """Symmetric single-query scenario with one type per percentile."""
    k = len(values)
    weights = bracket_weights(config.percentiles)
    bidder = BidderSpec(
        types=tuple(f"p{int(p)}" for p in config.percentiles),
        type_dist=weights,
        values=np.asarray(values, dtype=np.float64).reshape(k, 1),
        ctrs=np.ones((k, 1)),
    )
    return Scenario(
        name="inference",
        queries=("q",),
        query_dist=np.array([1.0]),
        bidders=tuple(bidder for _ in range(config.num_bidders)),
        bid_grid=bid_grid,
        clause_space=(1,),
        mechanism=mechanism,
        learner=LearnerSpec(algorithm="hedge"),
        horizon=config.horizon,
        env_seed=int(_rng.env_seed_from_master(config.master_seed)),
        run_seeds=tuple(int(s) for s in
                        _rng.run_seeds_from_master(config.master_seed,
                                                   config.runs_per_iteration)),
    )


def inference_bid_grid(observed_bids: np.ndarray, config: InferenceConfig) -> np.ndarray:
    """Step-width grid from zero to ceil(headroom * max observed bid).

    The headroom leaves room above the observed bids so unshaded values
    remain expressible as bids during the matching loop.
    """
    top = math.ceil(float(np.max(observed_bids)) * config.headroom)
    top = max(top, 1)
    count = int(round(top / config.grid_step)) + 1
    return np.round(np.linspace(0.0, top, count), 10)


def _type_mean_bids(batch: simulator.BatchResult) -> tuple[np.ndarray, np.ndarray]:
    """Per-run and pooled mean window bid per type, over all bidders."""
    grid = batch.scenario.bid_grid
    per_run = []
    for r in batch.runs:
        counts = r.bid_histogram.sum(axis=(0, 2)).astype(np.float64)
        totals = counts.sum(axis=1)
        per_run.append(np.where(totals > 0, counts @ grid / np.maximum(totals, 1.0), 0.0))
    per_run = np.array(per_run)
    return per_run, per_run.mean(axis=0)


def infer_values(
    observed_bids,
    hypothesized_mechanism: MechanismSpec,
    config: InferenceConfig | None = None,
    threads: int | None = None,
) -> InferenceResult:
    """Run the percentile-matching loop against one pricing hypothesis."""
    config = config or InferenceConfig()
    observed = np.asarray(observed_bids, dtype=np.float64).copy()
    if len(observed) != len(config.percentiles):
        raise ValueError("observed bids and percentile list differ in length")
    if np.any(np.diff(observed) < 0):
        warnings.warn("observed bids not nondecreasing; flattening", stacklevel=2)
        observed = flatten_monotone(observed)
    if np.any(observed < 0):
        raise ValueError("observed bids must be nonnegative")

    grid = inference_bid_grid(observed, config)
    values = observed.copy()
    result = InferenceResult(tuple(config.percentiles), observed)
    scenario = build_inference_scenario(values, grid, hypothesized_mechanism, config)
    env = sample_env_sequence(scenario)
    stop_gap = config.grid_step / 2.0

    for it in range(config.max_iterations):
        scenario = build_inference_scenario(values, grid, hypothesized_mechanism, config)
        batch = simulator.run_batch(scenario, env=env, threads=threads)
        by_run, predicted = _type_mean_bids(batch)
        result.history.append(InferenceIteration(
            it, values.copy(), predicted, by_run, mae(observed, predicted)))
        if np.max(np.abs(observed - predicted)) < stop_gap:
            break
        values = flatten_monotone([
            update_value(values[k], observed[k], predicted[k], config.alpha)
            for k in range(len(values))
        ])

    result.best_iteration = int(np.argmin([h.mae for h in result.history]))
    return result


@dataclass
class ShadingReport:
    percentiles: tuple
    values: np.ndarray
    predicted_bids: np.ndarray
    shading: np.ndarray        # per percentile, 1 - b/v
    mean_shading: float
    ci_low: float
    ci_high: float


def shading_report(
    inferred_values,
    predicted_bids,
    percentiles=DEFAULT_PERCENTILES,
) -> ShadingReport:
    """Shading 1 - b/v per percentile with a 95% normal CI across runs.

    ``predicted_bids`` may be (runs, K) for a real CI or (K,) for a
    degenerate one.  Values under the guard contribute zero shading.
    """
    v = np.asarray(inferred_values, dtype=np.float64)
    b = np.atleast_2d(np.asarray(predicted_bids, dtype=np.float64))
    if b.shape[1] != len(v):
        raise ValueError("predicted bids and values differ in length")
    safe_v = np.where(v < VALUE_GUARD, 1.0, v)
    per_run = np.where(v >= VALUE_GUARD, 1.0 - b / safe_v, 0.0)
    run_means = per_run.mean(axis=1)
    mean = float(run_means.mean())
    half = 1.96 * float(run_means.std(ddof=0)) / math.sqrt(len(run_means))
    pooled = per_run.mean(axis=0)
    return ShadingReport(tuple(percentiles), v, b.mean(axis=0), pooled,
                         mean, mean - half, mean + half)


class ValueInference(BaseEstimator):
    """Estimator wrapper: fit on raw bid samples, read off values_.

    Hyperparameters are stored as given (scikit-learn convention); all
    learned state carries a trailing underscore after ``fit``.
    """

    def __init__(self, mechanism="second", percentiles=DEFAULT_PERCENTILES,
                 alpha=0.2, max_iterations=100, runs_per_iteration=10,
                 horizon=200_000, num_bidders=2, grid_step=0.1,
                 headroom=1.34, master_seed=1):
        self.mechanism = mechanism
        self.percentiles = percentiles
        self.alpha = alpha
        self.max_iterations = max_iterations
        self.runs_per_iteration = runs_per_iteration
        self.horizon = horizon
        self.num_bidders = num_bidders
        self.grid_step = grid_step
        self.headroom = headroom
        self.master_seed = master_seed

    def _config(self) -> InferenceConfig:
        return InferenceConfig(
            percentiles=tuple(self.percentiles), alpha=self.alpha,
            max_iterations=self.max_iterations,
            runs_per_iteration=self.runs_per_iteration, horizon=self.horizon,
            num_bidders=self.num_bidders, grid_step=self.grid_step,
            headroom=self.headroom, master_seed=self.master_seed)

    def _mechanism_spec(self) -> MechanismSpec:
        m = self.mechanism
        return m if isinstance(m, MechanismSpec) else MechanismSpec.from_string(m)

    def fit(self, X, y=None):
        """X: raw bid samples (1D) or precomputed per-percentile bids."""
        X = np.asarray(X, dtype=np.float64).ravel()
        if len(X) == len(self.percentiles) and np.all(np.diff(X) >= 0):
            observed = X
        else:
            observed = observed_percentiles(X, self.percentiles)
        self.observed_bids_ = observed
        result = infer_values(observed, self._mechanism_spec(), self._config())
        self.result_ = result
        self.values_ = result.values
        self.predicted_bids_ = result.predicted_bids
        self.best_iteration_ = result.best_iteration
        self.n_iter_ = len(result.history)
        self.mae_ = result.mae
        return self

    def shading(self) -> ShadingReport:
        best = self.result_.best
        return shading_report(self.values_, best.predicted_by_run, self.percentiles)
