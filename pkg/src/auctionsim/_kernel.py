"""Compiled simulation loop (numba).

Semantics duplicate mechanisms.py and learners.py; the duplication buys
roughly three orders of magnitude over per-period python, which the
paper-scale horizons need.  Parity is enforced bitwise by tests that
replay small runs through the pure-python reference, so keep the float
operation order aligned with the reference when editing either side:

    reward      eu = ctr * (value - price); eu = eu / den
    normalize   r = (eu + b_max) / (v_max + b_max)
    hedge       p ~ exp((w - max w) / eta)
    exp3ix      p ~ exp((l - min l) * -eta)

Random draws are splitmix64 outputs addressed by (seed, counter); see
_rng.py for the counter layout.  Nothing here keeps RNG state, which is
what makes resume-from-checkpoint and threaded batches exact.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RULE_FIRST = 0
RULE_SECOND = 1
RULE_RESERVE = 2
RULE_SOFT = 3

ALGO_HEDGE = 0
ALGO_EXP3IX = 1

_U64_1 = np.uint64(1)
_GOLDEN = np.uint64(0x9E3779B97F4A7B15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53_INV = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True, inline="always")
def _u01(seed, counter):
    z = seed + (counter + _U64_1) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * _U53_INV


@njit(cache=True, nogil=True, inline="always")
def _rule_price(rule, floor, b1, beta2):
    if rule == RULE_FIRST:
        p = b1
    elif rule == RULE_SECOND:
        p = beta2
    elif rule == RULE_RESERVE:
        p = beta2 if beta2 > floor else floor
    else:
        if beta2 >= floor:
            p = beta2
        elif b1 >= floor:
            p = floor
        else:
            p = b1
    return p if p < b1 else b1


@njit(cache=True, nogil=True)
def simulate(
    qs,              # int64 (T,)           realized query per period
    taus,            # int64 (T, N)         realized type per bidder
    values,          # float64 (N, maxT, Q) padded value tables
    ctrs,            # float64 (N, maxT, Q) padded CTR tables
    elig,            # bool (nc, Q)         clause contains query
    bid_grid,        # float64 (nb,)
    rule,            # int
    floor,           # float
    divide_by_n,     # bool  (else divide by tie-set size)
    bid_space,       # bool  (else generalized-second-price quotient)
    algo,            # int
    eta,             # float
    gamma,           # float
    normalize,       # bool  (hedge raw-EU switch; exp3ix always normalizes)
    v_max,           # float
    b_max,           # float
    window_start,    # int
    run_seed,        # uint64
    tables,          # float64 (N, maxT, A)  in/out learner tables
    start_period,    # int   resume point
    hist,            # int64 (N, maxT, nc, nb) in/out window action counts
    trace_actions,   # int32 (W, N) or (0, N)
    trace_winner,    # int32 (W,) or (0,)
    trace_price,     # float64 (W,) or (0,)
):
    T = qs.shape[0]
    N = taus.shape[1]
    nb = bid_grid.shape[0]
    nc = elig.shape[0]
    A = nc * nb
    record_trace = trace_winner.shape[0] > 0
    norm_den = v_max + b_max
    norm_zero = (0.0 + b_max) / norm_den

    probs = np.empty(A)
    chosen = np.empty(N, np.int64)
    pch = np.empty(N)
    bids = np.empty(N)
    sc = np.empty(N)
    el = np.empty(N, np.bool_)
    cl = np.empty(N, np.int64)
    n_u64 = np.uint64(N + 1)

    rev_sum = 0.0

    for t in range(start_period, T):
        q = qs[t]
        base = np.uint64(t) * n_u64

        # --- sample one action per bidder from its realized type's table
        for i in range(N):
            tau = taus[t, i]
            w = tables[i, tau]
            if algo == ALGO_HEDGE:
                m = w[0]
                for a in range(1, A):
                    if w[a] > m:
                        m = w[a]
                ssum = 0.0
                for a in range(A):
                    p = np.exp((w[a] - m) / eta)
                    probs[a] = p
                    ssum += p
            else:
                m = w[0]
                for a in range(1, A):
                    if w[a] < m:
                        m = w[a]
                ssum = 0.0
                for a in range(A):
                    p = np.exp((w[a] - m) * -eta)
                    probs[a] = p
                    ssum += p
            u = _u01(run_seed, base + np.uint64(i)) * ssum
            ch = A - 1
            acc = 0.0
            for a in range(A):
                acc += probs[a]
                if u < acc:
                    ch = a
                    break
            chosen[i] = ch
            pch[i] = probs[ch] / ssum
            c = ch // nb
            cl[i] = c
            b = bid_grid[ch % nb]
            bids[i] = b
            if elig[c, q]:
                el[i] = True
                sc[i] = b * ctrs[i, tau, q]
            else:
                el[i] = False
                sc[i] = 0.0

        # --- resolve: two-max scan over eligible, (score desc, index asc)
        n_el = 0
        s1 = -1.0
        i1 = -1
        s2 = -1.0
        i2 = -1
        for j in range(N):
            if el[j]:
                n_el += 1
                s = sc[j]
                if s > s1:
                    s2 = s1
                    i2 = i1
                    s1 = s
                    i1 = j
                elif s > s2:
                    s2 = s
                    i2 = j

        sold = False
        price = 0.0
        cnt_top = 0
        rec = -1
        if n_el > 0:
            b1 = bids[i1]
            if rule == RULE_RESERVE and b1 < floor:
                sold = False
            elif s1 == 0.0:
                sold = True
                price = 0.0
                cnt_top = n_el
            else:
                sold = True
                for j in range(N):
                    if el[j] and sc[j] == s1:
                        cnt_top += 1
                if i2 >= 0:
                    if bid_space:
                        beta2 = bids[i2]
                    else:
                        beta2 = sc[i2] / ctrs[i1, taus[t, i1], q]
                else:
                    beta2 = 0.0
                price = _rule_price(rule, floor, b1, beta2)
            if sold:
                if cnt_top == 1:
                    rec = i1
                else:
                    k = int(_u01(run_seed, base + np.uint64(N)) * cnt_top)
                    if k >= cnt_top:
                        k = cnt_top - 1
                    m_seen = 0
                    for j in range(N):
                        if el[j] and sc[j] == s1:
                            if m_seen == k:
                                rec = j
                                break
                            m_seen += 1

        if t >= window_start:
            if sold:
                rev_sum += ctrs[rec, taus[t, rec], q] * price
            for i in range(N):
                hist[i, taus[t, i], cl[i], chosen[i] % nb] += 1
            if record_trace:
                idx = t - window_start
                trace_winner[idx] = rec
                trace_price[idx] = price
                for i in range(N):
                    trace_actions[idx, i] = chosen[i]

        # --- learn
        if algo == ALGO_EXP3IX:
            for i in range(N):
                tau = taus[t, i]
                eu = 0.0
                if sold and el[i] and sc[i] == s1:
                    if cnt_top == 1:
                        den = 1.0
                    elif divide_by_n:
                        den = float(N)
                    else:
                        den = float(cnt_top)
                    eu = ctrs[i, tau, q] * (values[i, tau, q] - price)
                    eu = eu / den
                r = (eu + b_max) / norm_den
                tables[i, tau, chosen[i]] += (1.0 - r) / (pch[i] + gamma)
        else:
            for i in range(N):
                tau = taus[t, i]
                ctr_i = ctrs[i, tau, q]
                v_i = values[i, tau, q]

                # opponent summary excluding i, same ranking convention
                n_op = 0
                so1 = -1.0
                jo1 = -1
                so2 = -1.0
                jo2 = -1
                for j in range(N):
                    if j != i and el[j]:
                        n_op += 1
                        s = sc[j]
                        if s > so1:
                            so2 = so1
                            jo2 = jo1
                            so1 = s
                            jo1 = j
                        elif s > so2:
                            so2 = s
                            jo2 = j
                cnt_o1 = 0
                if n_op > 0:
                    for j in range(N):
                        if j != i and el[j] and sc[j] == so1:
                            cnt_o1 += 1
                    bo1 = bids[jo1]
                    ctr_o1 = ctrs[jo1, taus[t, jo1], q]
                    bo2 = bids[jo2] if jo2 >= 0 else 0.0
                else:
                    bo1 = 0.0
                    ctr_o1 = 0.0
                    bo2 = 0.0

                row = tables[i, tau]
                for c in range(nc):
                    abase = c * nb
                    if not elig[c, q]:
                        if normalize:
                            for k in range(nb):
                                row[abase + k] += norm_zero
                        # raw zero adds nothing
                        continue
                    for k in range(nb):
                        b = bid_grid[k]
                        s = b * ctr_i
                        eu = 0.0
                        if n_op == 0:
                            if rule == RULE_RESERVE and b < floor:
                                eu = 0.0
                            elif s == 0.0:
                                eu = ctr_i * (v_i - 0.0)
                                eu = eu / 1.0
                            else:
                                p = _rule_price(rule, floor, b, 0.0)
                                eu = ctr_i * (v_i - p)
                                eu = eu / 1.0
                        elif s < so1:
                            eu = 0.0
                        elif s > so1:
                            if rule == RULE_RESERVE and b < floor:
                                eu = 0.0
                            else:
                                beta2 = bo1 if bid_space else so1 / ctr_i
                                p = _rule_price(rule, floor, b, beta2)
                                eu = ctr_i * (v_i - p)
                                eu = eu / 1.0
                        else:  # tie at the top
                            if s == 0.0:
                                b1z = b if i < jo1 else bo1
                                if rule == RULE_RESERVE and b1z < floor:
                                    eu = 0.0
                                else:
                                    if divide_by_n:
                                        den = float(N)
                                    else:
                                        den = float(1 + n_op)
                                    eu = ctr_i * (v_i - 0.0)
                                    eu = eu / den
                            else:
                                cnt_t = 1 + cnt_o1
                                if i < jo1:
                                    b1t = b
                                    ctr1 = ctr_i
                                    b2t = bo1
                                else:
                                    b1t = bo1
                                    ctr1 = ctr_o1
                                    if cnt_o1 >= 2:
                                        b2t = b if i < jo2 else bo2
                                    else:
                                        b2t = b
                                if rule == RULE_RESERVE and b1t < floor:
                                    eu = 0.0
                                else:
                                    beta2 = b2t if bid_space else so1 / ctr1
                                    p = _rule_price(rule, floor, b1t, beta2)
                                    if divide_by_n:
                                        den = float(N)
                                    else:
                                        den = float(cnt_t)
                                    eu = ctr_i * (v_i - p)
                                    eu = eu / den
                        if normalize:
                            row[abase + k] += (eu + b_max) / norm_den
                        else:
                            row[abase + k] += eu

    return rev_sum
