"""Empirical play distributions and epsilon-coarse-BCE certificates.

A window trace induces an empirical distribution over (type vector,
action vector) profiles.  The checker asks, for every bidder and every
type she was observed with, whether any single fixed (bid, clause)
deviation would have raised her expected payoff against that
distribution.  Payoffs are evaluated in exact expectation: summed over
the query distribution, with a tie won with probability 1/|tied set|
(the realized simulator may split tie rewards differently; certificates
use the exact chance so sampling noise never enters).  The scalar
certificate is eps = max(0, largest deviation gain); per-row gains stay
raw, so a strictly unimprovable profile shows negative gains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mechanisms import counterfactual_rewards, resolve_auction
from .scenario import Scenario


@dataclass(frozen=True)
class EmpiricalProfile:
    """Deduplicated profile samples; weights sum to one."""

    types: np.ndarray     # int64 (M, N)
    actions: np.ndarray   # int64 (M, N)
    weights: np.ndarray   # float64 (M,)

    @property
    def num_bidders(self) -> int:
        return self.types.shape[1]

    @classmethod
    def from_samples(cls, types: np.ndarray, actions: np.ndarray) -> "EmpiricalProfile":
        rows = np.concatenate([np.asarray(types, dtype=np.int64),
                               np.asarray(actions, dtype=np.int64)], axis=1)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        n = types.shape[1]
        return cls(uniq[:, :n], uniq[:, n:], counts / counts.sum())

    @classmethod
    def from_traces(cls, traces) -> "EmpiricalProfile":
        types = np.concatenate([t.types for t in traces], axis=0)
        actions = np.concatenate([t.actions for t in traces], axis=0)
        return cls.from_samples(types, actions)

    @classmethod
    def from_batch(cls, batch) -> "EmpiricalProfile":
        traces = [r.trace for r in batch.runs]
        if any(t is None for t in traces):
            raise ValueError("batch was run without record_trace")
        return cls.from_traces(traces)


@dataclass(frozen=True)
class DeviationGain:
    """Best fixed deviation for one (bidder, type); gain may be negative."""

    bidder: int
    type_index: int
    bid_index: int
    clause_index: int
    gain: float


def expected_payoff(
    scenario: Scenario,
    types_row: np.ndarray,
    actions_row: np.ndarray,
    bidder: int,
) -> float:
    """Sum over queries of F_Q(q) * (ctr * (value - price)) / |tied|."""
    s = scenario
    elig_table = s.clause_eligibility()
    n = s.num_bidders
    bids = np.empty(n)
    clause_idx = np.empty(n, dtype=np.int64)
    for j in range(n):
        b_idx, c_idx = s.action(int(actions_row[j]))
        bids[j] = s.bid_grid[b_idx]
        clause_idx[j] = c_idx
    total = 0.0
    for q in range(s.num_queries):
        fq = s.query_dist[q]
        if fq == 0.0:
            continue
        ctrs = np.array([s.bidders[j].ctrs[types_row[j], q] for j in range(n)])
        eligible = elig_table[clause_idx, q]
        outcome = resolve_auction(bids, ctrs, eligible, s.mechanism)
        if outcome.sold and bidder in outcome.winners:
            value = s.bidders[bidder].values[types_row[bidder], q]
            eu = ctrs[bidder] * (value - outcome.price_per_click)
            total += fq * eu / len(outcome.winners)
    return float(total)


def coarse_bce_epsilon(
    profile: EmpiricalProfile,
    scenario: Scenario,
    max_actions: int = 4096,
) -> tuple[float, list[DeviationGain]]:
    """Certificate eps plus the best deviation per observed (bidder, type).

    eps = max(0, max gain); a profile is an eps'-coarse BCE for any
    eps' >= eps.  Types never observed in the profile are skipped and
    reported through a warning; their rows are absent from the output.
    """
    s = scenario
    if len(profile.weights) == 0:
        raise ValueError("empty profile")
    if s.num_actions > max_actions:
        raise ValueError(
            f"action space size {s.num_actions} exceeds max_actions={max_actions}")
    unseen: list[tuple[int, int]] = []
    rows: list[DeviationGain] = []
    best_gain = 0.0
    for i in range(s.num_bidders):
        for tau in range(len(s.bidders[i].types)):
            mask = profile.types[:, i] == tau
            if not mask.any():
                unseen.append((i, tau))
                continue
            w = profile.weights[mask]
            w = w / w.sum()
            sub_types = profile.types[mask]
            sub_actions = profile.actions[mask]

            realized = 0.0
            for k in range(len(w)):
                realized += w[k] * expected_payoff(s, sub_types[k], sub_actions[k], i)

            # opponents' play is all that matters under a fixed deviation
            opp = np.concatenate([sub_types, np.delete(sub_actions, i, axis=1)], axis=1)
            uniq, inverse = np.unique(opp, axis=0, return_inverse=True)
            opp_w = np.zeros(len(uniq))
            np.add.at(opp_w, inverse, w)
            first = np.zeros(len(uniq), dtype=np.int64)
            first[inverse[::-1]] = np.arange(len(w) - 1, -1, -1)

            best = None
            for a in range(s.num_actions):
                dev = 0.0
                for k in range(len(uniq)):
                    row_actions = sub_actions[first[k]].copy()
                    row_actions[i] = a
                    dev += opp_w[k] * expected_payoff(s, sub_types[first[k]], row_actions, i)
                gain = dev - realized
                if best is None or gain > best[0]:
                    best = (gain, a)
            gain, a = best
            b_idx, c_idx = s.action(a)
            rows.append(DeviationGain(i, tau, b_idx, c_idx, float(gain)))
            if gain > best_gain:
                best_gain = float(gain)
    if unseen:
        warnings.warn(f"types never realized in profile, excluded: {unseen}",
                      stacklevel=2)
    return best_gain, rows


def realized_regret(trace, scenario: Scenario, bidder: int, type_index: int) -> float:
    """External regret of the traced play for one (bidder, type).

    Best fixed action in hindsight minus realized, from raw
    counterfactual expected utilities, scaled to a 1000-period basis.
    Adaptive play can beat every fixed action, so small negative values
    are legitimate.
    """
    if trace is None:
        raise ValueError("trace recording disabled")
    totals = np.zeros(scenario.num_actions)
    realized = 0.0
    n_rows = 0
    for t in range(len(trace.queries)):
        if trace.types[t, bidder] != type_index:
            continue
        cf = counterfactual_rewards(scenario, int(trace.queries[t]), trace.types[t],
                                    trace.actions[t], bidder, normalize=False)
        totals += cf
        realized += cf[trace.actions[t, bidder]]
        n_rows += 1
    if n_rows == 0:
        return 0.0
    return float((totals.max() - realized) / n_rows * 1000.0)
