"""Run simulations: single runs, batches over seeds, mechanism sweeps.

``run_simulation`` drives the compiled kernel.  ``reference_run` is the
same simulation written against the pure-python mechanisms/learners
modules; it exists so tests can assert the two routes agree bitwise on
small horizons, and doubles as readable documentation of the kernel's
semantics.  Both consume identical counter-based random streams, so
equal seeds mean equal trajectories, to the last bit, on any horizon.

Metrics come from the final measurement window only (default: the last
10% of periods): mean revenue is the window average of
CTR(recorded winner) * price, zero when unsold, and the bid histogram
counts window actions per (bidder, type, clause, bid).  Changing the
window changes metrics, never trajectories.

``realized_clicks=True`` swaps the expected-revenue convention for a
Bernoulli click draw per sold window period (revenue = price on click,
else 0).  Click draws come from their own counter stream, seeded by
derive_seed(run_seed, 0) and indexed by window position, so turning the
flag on cannot perturb trajectories or any other draw.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel, _rng, learners, mechanisms
from .learners import LearnerState
from .scenario import (EnvSequence, MechanismSpec, Scenario,
                       sample_env_sequence, validate_scenario)

THREADS_ENV_VAR = "AUCTIONSIM_THREADS"

_RULE_CODES = {"first": _kernel.RULE_FIRST, "second": _kernel.RULE_SECOND,
               "reserve": _kernel.RULE_RESERVE, "soft": _kernel.RULE_SOFT}
_ALGO_CODES = {"hedge": _kernel.ALGO_HEDGE, "exp3ix": _kernel.ALGO_EXP3IX}


@dataclass
class Trace:
    """Per-period window recordings (types come from the env sequence)."""

    start_period: int
    queries: np.ndarray   # int64 (W,)
    types: np.ndarray     # int64 (W, N)
    actions: np.ndarray   # int32 (W, N)
    winner: np.ndarray    # int32 (W,)  recorded winner, -1 when unsold
    price: np.ndarray     # float64 (W,)


@dataclass
class RunResult:
    run_seed: int
    mean_revenue: float
    bid_histogram: np.ndarray   # int64 (N, maxT, nc, nb), window counts
    state: LearnerState
    trace: Trace | None = None


@dataclass
class BatchResult:
    scenario: Scenario
    runs: list[RunResult]

    @property
    def revenues(self) -> np.ndarray:
        return np.array([r.mean_revenue for r in self.runs])

    @property
    def mean_revenue(self) -> float:
        return float(self.revenues.mean())

    @property
    def std_revenue(self) -> float:
        # population (divide-by-n) convention across runs
        return float(self.revenues.std(ddof=0))

    def pooled_histogram(self) -> np.ndarray:
        out = np.zeros_like(self.runs[0].bid_histogram)
        for r in self.runs:
            out += r.bid_histogram
        return out


@dataclass
class _Compiled:
    values: np.ndarray
    ctrs: np.ndarray
    elig: np.ndarray
    n_types: np.ndarray
    rule: int
    floor: float
    divide_by_n: bool
    bid_space: bool
    algo: int
    eta: float
    gamma: float
    normalize: bool
    v_max: float
    b_max: float


def _compile(s: Scenario) -> _Compiled:
    n, mt, q = s.num_bidders, s.max_types, s.num_queries
    values = np.zeros((n, mt, q))
    ctrs = np.zeros((n, mt, q))
    n_types = np.zeros(n, dtype=np.int64)
    for i, b in enumerate(s.bidders):
        k = len(b.types)
        n_types[i] = k
        values[i, :k] = b.values
        ctrs[i, :k] = b.ctrs
    eta, gamma = learners.resolve_learner_params(
        s.learner.algorithm, s.learner.eta, s.learner.gamma, s.num_actions, s.horizon)
    return _Compiled(
        values=values,
        ctrs=ctrs,
        elig=s.clause_eligibility(),
        n_types=n_types,
        rule=_RULE_CODES[s.mechanism.rule],
        floor=s.mechanism.floor,
        divide_by_n=s.mechanism.tie_policy == "divide_by_n",
        bid_space=s.mechanism.price_space == "bid",
        algo=_ALGO_CODES[s.learner.algorithm],
        eta=eta,
        gamma=gamma,
        normalize=s.learner.normalize_rewards or s.learner.algorithm == "exp3ix",
        v_max=s.v_max,
        b_max=s.b_max,
    )


def _trace_buffers(s: Scenario, record: bool):
    w = s.window_length if record else 0
    return (np.zeros((w, s.num_bidders), dtype=np.int32),
            np.zeros(w, dtype=np.int32),
            np.zeros(w, dtype=np.float64))


def _realized_click_revenue(c: _Compiled, trace: Trace, run_seed: int) -> float:
    click_seed = _rng.derive_seed(np.uint64(run_seed), 0)
    w = len(trace.price)
    u = _rng.uniforms(click_seed, np.arange(w, dtype=np.uint64))
    total = 0.0
    for t in range(w):
        win = trace.winner[t]
        if win < 0:
            continue
        ctr = c.ctrs[win, trace.types[t, win], trace.queries[t]]
        if u[t] < ctr:
            total += trace.price[t]
    return total / w


def run_simulation(
    scenario: Scenario,
    run_seed: int | None = None,
    env: EnvSequence | None = None,
    record_trace: bool = False,
    resume: LearnerState | None = None,
    realized_clicks: bool = False,
) -> RunResult:
    """Simulate one run; equal inputs give bitwise-equal results.

    ``resume`` continues a run from a checkpoint taken at or before the
    start of the measurement window (later checkpoints would truncate
    window metrics, so they are rejected).
    """
    validate_scenario(scenario)
    if run_seed is None:
        run_seed = scenario.run_seeds[0]
    if env is None:
        env = sample_env_sequence(scenario)
    if env.horizon != scenario.horizon:
        raise ValueError("environment sequence length != scenario horizon")
    record_internal = record_trace or realized_clicks
    c = _compile(scenario)

    if resume is not None:
        if resume.period > scenario.window_start:
            raise ValueError("checkpoint lies inside the measurement window")
        if resume.algorithm != scenario.learner.algorithm:
            raise ValueError("checkpoint algorithm does not match scenario")
        tables = resume.tables.copy()
        start = resume.period
    else:
        tables = np.zeros((scenario.num_bidders, scenario.max_types, scenario.num_actions))
        start = 0

    hist = np.zeros((scenario.num_bidders, scenario.max_types,
                     len(scenario.clause_space), scenario.num_bids), dtype=np.int64)
    t_actions, t_winner, t_price = _trace_buffers(scenario, record_internal)

    rev_sum = _kernel.simulate(
        env.queries, env.types, c.values, c.ctrs, c.elig, scenario.bid_grid,
        c.rule, c.floor, c.divide_by_n, c.bid_space,
        c.algo, c.eta, c.gamma, c.normalize, c.v_max, c.b_max,
        scenario.window_start, np.uint64(run_seed), tables, start,
        hist, t_actions, t_winner, t_price,
    )

    ws = scenario.window_start
    trace = None
    if record_internal:
        trace = Trace(ws, env.queries[ws:].copy(), env.types[ws:].copy(),
                      t_actions, t_winner, t_price)
    mean_rev = rev_sum / scenario.window_length
    if realized_clicks:
        mean_rev = _realized_click_revenue(c, trace, run_seed)
    if not record_trace:
        trace = None
    state = LearnerState(scenario.learner.algorithm, c.eta, c.gamma, tables,
                         c.n_types, scenario.horizon, run_seed)
    return RunResult(run_seed, mean_rev, hist, state, trace)


def _thread_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    env_val = os.environ.get(THREADS_ENV_VAR, "").strip()
    if env_val:
        return max(1, int(env_val))
    return min(os.cpu_count() or 1, 8)


def run_batch(
    scenario: Scenario,
    num_runs: int | None = None,
    env: EnvSequence | None = None,
    record_trace: bool = False,
    threads: int | None = None,
    realized_clicks: bool = False,
) -> BatchResult:
    """All runs of the scenario against one shared environment sequence.

    ``num_runs`` takes a prefix of the scenario's run seeds; asking for
    more seeds than the scenario carries is an error (derive a wider set
    with ``Scenario.with_seeds``).
    """
    validate_scenario(scenario)
    if env is None:
        env = sample_env_sequence(scenario)
    seeds = scenario.run_seeds
    if num_runs is not None:
        if num_runs < 1 or num_runs > len(seeds):
            raise ValueError(f"num_runs must be within 1..{len(seeds)}")
        seeds = seeds[:num_runs]
    n_threads = _thread_count(threads)

    def one(seed):
        return run_simulation(scenario, seed, env, record_trace,
                              realized_clicks=realized_clicks)

    if n_threads == 1 or len(seeds) == 1:
        runs = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            runs = list(pool.map(one, seeds))
    return BatchResult(scenario, runs)


def sweep_mechanisms(
    scenario: Scenario,
    mechanism_specs,
    env: EnvSequence | None = None,
    threads: int | None = None,
) -> list[BatchResult]:
    """Batch per mechanism variant, sharing env sequence and run seeds.

    Shared draws mean variant rows differ only through the mechanism, so
    equivalent mechanisms (e.g. reserve 0 and soft 0) produce identical
    rows by construction.
    """
    if env is None:
        env = sample_env_sequence(scenario)
    return [run_batch(scenario.with_mechanism(m), env=env, threads=threads)
            for m in mechanism_specs]


_SWEEP_RULES = {"soft_floor": "soft", "hard_reserve": "reserve"}


def sweep(
    scenario: Scenario,
    parameter: str,
    value_list,
    env: EnvSequence | None = None,
    threads: int | None = None,
) -> list[BatchResult]:
    """Floor sweep: one batch per floor value for the chosen rule."""
    if parameter not in _SWEEP_RULES:
        raise ValueError(f"unknown sweep parameter {parameter!r}; "
                         f"expected one of {sorted(_SWEEP_RULES)}")
    base = scenario.mechanism
    mechs = [MechanismSpec(rule=_SWEEP_RULES[parameter], floor=round(float(v), 10),
                           tie_policy=base.tie_policy, price_space=base.price_space)
             for v in value_list]
    return sweep_mechanisms(scenario, mechs, env, threads)


def type_mean_bids(result: RunResult, scenario: Scenario) -> np.ndarray:
    """Mean window bid per type, pooled across bidders; NaN if unseen."""
    counts = result.bid_histogram.sum(axis=(0, 2)).astype(np.float64)  # (maxT, nb)
    totals = counts.sum(axis=1)
    weighted = counts @ scenario.bid_grid
    with np.errstate(invalid="ignore"):
        return np.where(totals > 0, weighted / np.maximum(totals, 1.0), np.nan)


def modal_bids(batch: BatchResult, bidder: int) -> np.ndarray:
    """Most frequent window bid per type for one bidder, over all runs."""
    counts = batch.pooled_histogram()[bidder].sum(axis=1)  # (maxT, nb)
    return batch.scenario.bid_grid[np.argmax(counts, axis=1)]


# ---------------------------------------------------------------------------
# pure-python reference (small horizons; parity oracle for the kernel)


def reference_run(
    scenario: Scenario,
    run_seed: int | None = None,
    env: EnvSequence | None = None,
    record_trace: bool = False,
) -> RunResult:
    """Kernel-equivalent simulation via mechanisms.py + learners.py.

    Accumulation orders (softmax sums, inverse-CDF scans) deliberately
    mirror the kernel so results match bitwise.
    """
    validate_scenario(scenario)
    if run_seed is None:
        run_seed = scenario.run_seeds[0]
    if env is None:
        env = sample_env_sequence(scenario)
    s = scenario
    c = _compile(s)
    seed_u = np.uint64(run_seed)
    n, nb = s.num_bidders, s.num_bids
    A = s.num_actions
    mech = s.mechanism
    hedge = s.learner.algorithm == "hedge"
    ws, W = s.window_start, s.window_length

    tables = np.zeros((n, s.max_types, A))
    hist = np.zeros((n, s.max_types, len(s.clause_space), nb), dtype=np.int64)
    t_actions, t_winner, t_price = _trace_buffers(s, record_trace)
    elig_table = s.clause_eligibility()
    rev_sum = 0.0

    for t in range(s.horizon):
        q = int(env.queries[t])
        taus = env.types[t]
        base = np.uint64(t) * np.uint64(n + 1)

        chosen = np.empty(n, dtype=np.int64)
        pch = np.empty(n)
        bids = np.empty(n)
        ctr_t = np.empty(n)
        eligible = np.empty(n, dtype=np.bool_)
        for i in range(n):
            row = tables[i, taus[i]]
            # scalar libm exp, as in the kernel; vector np.exp can be off
            # by an ulp on some inputs
            if hedge:
                m = row.max()
                exps = np.array([math.exp((v - m) / c.eta) for v in row])
            else:
                m = row.min()
                exps = np.array([math.exp((v - m) * -c.eta) for v in row])
            ssum = 0.0
            for p in exps:
                ssum += p
            u = float(_rng.uniforms(seed_u, base + np.uint64(i))) * ssum
            ch = A - 1
            acc = 0.0
            for a in range(A):
                acc += exps[a]
                if u < acc:
                    ch = a
                    break
            chosen[i] = ch
            pch[i] = exps[ch] / ssum
            b_idx, c_idx = s.action(ch)
            bids[i] = s.bid_grid[b_idx]
            ctr_t[i] = c.ctrs[i, taus[i], q]
            eligible[i] = elig_table[c_idx, q]

        tie_u = float(_rng.uniforms(seed_u, base + np.uint64(n)))
        outcome = mechanisms.resolve_auction(bids, ctr_t, eligible, mech, tie_u)

        if t >= ws:
            if outcome.sold:
                rev_sum += c.ctrs[outcome.recorded_winner, taus[outcome.recorded_winner], q] \
                    * outcome.price_per_click
            for i in range(n):
                b_idx, c_idx = s.action(int(chosen[i]))
                hist[i, taus[i], c_idx, b_idx] += 1
            if record_trace:
                t_actions[t - ws] = chosen
                t_winner[t - ws] = outcome.recorded_winner if outcome.sold else -1
                t_price[t - ws] = outcome.price_per_click if outcome.sold else 0.0

        if hedge:
            for i in range(n):
                cf = mechanisms.counterfactual_rewards(
                    s, q, taus, chosen, i, normalize=c.normalize)
                learners.hedge_update(tables[i, taus[i]], cf,
                                      normalized=c.normalize)
        else:
            for i in range(n):
                eu = mechanisms.reward(outcome, i, c.values[i, taus[i], q],
                                       ctr_t[i], mech, n)
                r = mechanisms.normalize_reward(eu, c.v_max, c.b_max)
                learners.exp3ix_update(tables[i, taus[i]], int(chosen[i]),
                                       float(pch[i]), r, c.gamma)

    trace = None
    if record_trace:
        trace = Trace(ws, env.queries[ws:].copy(), env.types[ws:].copy(),
                      t_actions, t_winner, t_price)
    state = LearnerState(s.learner.algorithm, c.eta, c.gamma, tables,
                         c.n_types, s.horizon, run_seed)
    return RunResult(run_seed, rev_sum / W, hist, state, trace)
