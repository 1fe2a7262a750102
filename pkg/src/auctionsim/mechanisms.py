"""Auction resolution and reward semantics (reference implementation).

One impression, one winner.  Each bidder submits a per-click bid and a
targeting clause; a bidder is eligible when the clause contains the
realized query.  Eligible bidders are ranked by score = bid * CTR, ties
broken toward lower bidder index for pricing.  Prices are per click.

Pricing rules, written for the bid price space (``price_space="bid"``:
rank by score, price from the per-click bids of the two top-ranked
eligible bidders b1, b2):

    first        p = b1
    second       p = b2 (0 if no competitor)
    reserve r    unsold if b1 < r, else p = max(b2, r)
    soft s       p = b2 if b2 >= s; p = s if b1 >= s > b2; p = b1 if s > b1

``price_space="score"`` replaces b2 by (runner-up score / winner CTR),
the generalized-second-price quotient.  Both spaces coincide when CTRs
are equal.  In either space the price is capped at b1 so the outcome
invariant price <= winner's bid survives heterogeneous-CTR orderings
(cap inactive for equal CTRs).

Zero-score eligible bidders (bid 0 or CTR 0) can win only when every
eligible score is 0; the whole eligible set then ties at price 0.  The
reserve gate (b1 < r -> unsold) is checked before that special case.

Ties: the full surplus CTR * (value - price) is divided by the number of
bidders N (``tie_policy="divide_by_n"``) or by the tie-set size
(``"divide_by_tied"``).  The recorded winner -- the bidder whose CTR
multiplies price in revenue -- is drawn uniformly among the tied set with
the run RNG; rewards and prices never depend on that draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import MechanismSpec, Scenario


@dataclass(frozen=True)
class AuctionOutcome:
    sold: bool
    winners: tuple[int, ...]      # tie set, ascending index; empty if unsold
    recorded_winner: int          # -1 if unsold
    price_per_click: float
    scores: tuple[float, ...]


# Incremented when normalize_reward receives a utility outside its
# contracted bracket.  Correct mechanics never clamp, so any test run
# must end with this still at zero.
clamp_events = 0


def reset_clamp_events() -> None:
    global clamp_events
    clamp_events = 0


def normalize_reward(eu: float, v_max: float, b_max: float) -> float:
    """Map expected utility from [-b_max, v_max] onto [0, 1]."""
    r = (eu + b_max) / (v_max + b_max)
    if r < 0.0 or r > 1.0:
        global clamp_events
        clamp_events += 1
        r = 0.0 if r < 0.0 else 1.0
    return r


def resolve_auction(
    bids: np.ndarray,
    ctrs: np.ndarray,
    eligible: np.ndarray,
    mech: MechanismSpec,
    tie_uniform: float | None = None,
) -> AuctionOutcome:
    """Resolve one impression.

    Parameters
    ----------
    bids, ctrs, eligible : per-bidder per-click bid, CTR for the realized
        (type, query), and clause eligibility for the realized query.
    tie_uniform : uniform [0,1) draw used only to pick the recorded
        winner under a tie; may be None in deterministic contexts, in
        which case the lowest-index tied bidder is recorded.
    """
    n = len(bids)
    scores = np.where(eligible, bids * ctrs, 0.0)
    elig_idx = [j for j in range(n) if eligible[j]]
    if not elig_idx:
        return AuctionOutcome(False, (), -1, 0.0, tuple(scores))

    s1 = max(scores[j] for j in elig_idx)
    tied = [j for j in elig_idx if scores[j] == s1]
    i1 = tied[0]
    b1 = float(bids[i1])

    if mech.rule == "reserve" and b1 < mech.floor:
        return AuctionOutcome(False, (), -1, 0.0, tuple(scores))

    if s1 == 0.0:
        tied = elig_idx  # every eligible score is 0
        price = 0.0
    else:
        # second element of the (score desc, index asc) ranking
        if len(tied) > 1:
            i2 = tied[1]
        else:
            rest = [j for j in elig_idx if j != i1]
            i2 = min(rest, key=lambda j: (-scores[j], j)) if rest else -1
        if i2 < 0:
            beta2 = 0.0
        elif mech.price_space == "bid":
            beta2 = float(bids[i2])
        else:
            beta2 = float(scores[i2]) / float(ctrs[i1])
        price = _rule_price(mech.rule, mech.floor, b1, beta2)

    if len(tied) == 1 or tie_uniform is None:
        recorded = tied[0]
    else:
        k = min(int(tie_uniform * len(tied)), len(tied) - 1)
        recorded = tied[k]
    return AuctionOutcome(True, tuple(tied), recorded, price, tuple(scores))


def _rule_price(rule: str, floor: float, b1: float, beta2: float) -> float:
    if rule == "first":
        p = b1
    elif rule == "second":
        p = beta2
    elif rule == "reserve":
        p = beta2 if beta2 > floor else floor
    elif rule == "soft":
        if beta2 >= floor:
            p = beta2
        elif b1 >= floor:
            p = floor
        else:
            p = b1
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return p if p < b1 else b1


def reward(
    outcome: AuctionOutcome,
    bidder: int,
    value: float,
    ctr: float,
    mech: MechanismSpec,
    num_bidders: int,
) -> float:
    """Expected utility of ``bidder`` under the resolved outcome."""
    if not outcome.sold or bidder not in outcome.winners:
        return 0.0
    if len(outcome.winners) == 1:
        den = 1.0
    elif mech.tie_policy == "divide_by_n":
        den = float(num_bidders)
    else:
        den = float(len(outcome.winners))
    eu = ctr * (value - outcome.price_per_click)
    return eu / den


def counterfactual_rewards(
    scenario: Scenario,
    query: int,
    types: np.ndarray,
    actions: np.ndarray,
    bidder: int,
    normalize: bool = True,
) -> np.ndarray:
    """Reward for every action of ``bidder``, opponents' actions fixed.

    Entry a is the (normalized) reward ``bidder`` would have received by
    playing action a this period while every opponent keeps its realized
    action.  Ineligible and losing entries are the normalization of zero
    utility.  The entry at the realized action equals the realized reward.
    """
    n = scenario.num_bidders
    nb = scenario.num_bids
    elig_table = scenario.clause_eligibility()
    v_max, b_max = scenario.v_max, scenario.b_max

    bids = np.empty(n)
    ctrs = np.empty(n)
    eligible = np.empty(n, dtype=np.bool_)
    for j in range(n):
        b_idx, c_idx = scenario.action(int(actions[j]))
        bids[j] = scenario.bid_grid[b_idx]
        ctrs[j] = scenario.bidders[j].ctrs[types[j], query]
        eligible[j] = elig_table[c_idx, query]

    value = float(scenario.bidders[bidder].values[types[bidder], query])
    ctr_b = float(scenario.bidders[bidder].ctrs[types[bidder], query])

    out = np.empty(scenario.num_actions)
    for a in range(scenario.num_actions):
        b_idx, c_idx = scenario.action(a)
        bids[bidder] = scenario.bid_grid[b_idx]
        eligible[bidder] = elig_table[c_idx, query]
        outcome = resolve_auction(bids, ctrs, eligible, scenario.mechanism)
        eu = reward(outcome, bidder, value, ctr_b, scenario.mechanism, n)
        out[a] = normalize_reward(eu, v_max, b_max) if normalize else eu
    return out
