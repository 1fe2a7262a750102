"""Adversarial-bandit learners: Hedge and EXP3-IX.

Each bidder keeps one table row per type; only the realized type's row is
touched in a period, so types learn independently on their own subsequence
of periods.

Hedge (full information): cumulative-reward weights w, action
probabilities p(a) proportional to exp(w(a) / eta).  Note the division:
eta = 0.02 is an effective learning rate of 50.  The per-period update
adds the whole counterfactual reward vector for the realized type.

EXP3-IX (bandit feedback): cumulative-loss table l, probabilities
proportional to exp(-eta * l(a)); only the chosen action's loss moves, by
(1 - r) / (p(chosen) + gamma).  The implicit-exploration gamma and eta
are tuned from the action count K and horizon T as

    gamma = sqrt(2 * ln(K + 1) / (K * T)),   eta = 2 * gamma.

Rewards are normalized onto [0, 1] via (eu + b_max) / (v_max + b_max)
before either update (Hedge can be switched to raw expected utility).
Both softmaxes subtract the extreme exponent before exponentiating, so a
common shift of the table cancels: bitwise when the shifted additions
are exact (dyadic shifts of dyadic entries), to rounding error otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CHECKPOINT_FORMAT = 1

HEDGE_DEFAULT_ETA = 0.02


def _softmax_exact(x: np.ndarray) -> np.ndarray:
    """exp and normalize with scalar libm ops, matching the kernel bitwise.

    numpy's vectorized exp may differ from libm by one ulp on a few
    percent of inputs, and its pairwise array sum groups additions
    differently than a running scalar sum; either would break bitwise
    agreement with the compiled kernel, so both are avoided here.
    """
    flat = x.reshape(-1, x.shape[-1])
    out = np.empty_like(flat)
    for r in range(flat.shape[0]):
        ssum = 0.0
        for k in range(flat.shape[1]):
            e = math.exp(flat[r, k])
            out[r, k] = e
            ssum += e
        for k in range(flat.shape[1]):
            out[r, k] /= ssum
    return out.reshape(x.shape)


def hedge_distribution(weights: np.ndarray, eta: float) -> np.ndarray:
    """Softmax of weights / eta along the last axis.

    Stabilized as exp((w - max w) / eta); the compiled kernel applies the
    identical elementwise operations, so the two routes agree bitwise.
    """
    w = np.asarray(weights, dtype=np.float64)
    return _softmax_exact((w - w.max(axis=-1, keepdims=True)) / eta)


def exp3ix_distribution(losses: np.ndarray, eta: float) -> np.ndarray:
    """Softmax of -eta * losses along the last axis.

    Stabilized as exp(-eta * (l - min l)), mirroring the compiled kernel.
    """
    l = np.asarray(losses, dtype=np.float64)
    return _softmax_exact((l - l.min(axis=-1, keepdims=True)) * (-eta))


def hedge_update(weights: np.ndarray, counterfactual: np.ndarray,
                 normalized: bool = True) -> None:
    """Add the realized type's counterfactual reward vector in place.

    ``normalized=False`` admits raw expected utilities (which may be
    negative); the default enforces the [0, 1] reward contract.
    """
    c = np.asarray(counterfactual, dtype=np.float64)
    if normalized and (c.min() < 0.0 or c.max() > 1.0):
        raise ValueError("counterfactual rewards outside [0, 1]")
    weights += counterfactual


def exp3ix_update(losses: np.ndarray, action: int, prob: float,
                  reward_norm: float, gamma: float) -> None:
    """Implicit-exploration loss update for the chosen action, in place."""
    if prob <= 0.0:
        raise ValueError("prob of chosen action must be positive")
    if not 0.0 <= reward_norm <= 1.0:
        raise ValueError("normalized reward outside [0, 1]")
    losses[action] += (1.0 - reward_norm) / (prob + gamma)


def exp3ix_tuning(num_actions: int, horizon: int) -> tuple[float, float]:
    """(eta, gamma) tuned for K actions over T periods."""
    if num_actions < 2:
        raise ValueError("need at least 2 actions")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    gamma = math.sqrt(2.0 * math.log(num_actions + 1) / (num_actions * horizon))
    return 2.0 * gamma, gamma


def resolve_learner_params(algorithm: str, eta: float | None, gamma: float | None,
                           num_actions: int, horizon: int) -> tuple[float, float]:
    """Fill unspecified eta/gamma with defaults (Hedge) or tuning (EXP3-IX)."""
    if algorithm == "hedge":
        return (HEDGE_DEFAULT_ETA if eta is None else eta), 0.0
    eta_t, gamma_t = exp3ix_tuning(num_actions, horizon)
    return (eta_t if eta is None else eta), (gamma_t if gamma is None else gamma)


@dataclass
class LearnerState:
    """Per-(bidder, type, action) tables plus the hyperparameters.

    ``tables`` is float64 (num_bidders, max_types, num_actions); rows past
    a bidder's type count are unused padding.  Hedge rows hold cumulative
    rewards, EXP3-IX rows cumulative losses.
    """

    algorithm: str
    eta: float
    gamma: float
    tables: np.ndarray
    n_types: np.ndarray       # int64 (num_bidders,)
    period: int               # periods already simulated
    run_seed: int

    def distribution(self, bidder: int, type_index: int) -> np.ndarray:
        row = self.tables[bidder, type_index]
        if self.algorithm == "hedge":
            return hedge_distribution(row, self.eta)
        return exp3ix_distribution(row, self.eta)


def save_checkpoint(state: LearnerState, path) -> None:
    np.savez(
        path,
        format=np.int64(CHECKPOINT_FORMAT),
        algorithm=np.bytes_(state.algorithm.encode()),
        eta=np.float64(state.eta),
        gamma=np.float64(state.gamma),
        tables=state.tables,
        n_types=state.n_types,
        period=np.int64(state.period),
        run_seed=np.uint64(state.run_seed),
    )


def load_checkpoint(path) -> LearnerState:
    with np.load(path) as data:
        fmt = int(data["format"])
        if fmt != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {fmt}")
        return LearnerState(
            algorithm=bytes(data["algorithm"]).decode(),
            eta=float(data["eta"]),
            gamma=float(data["gamma"]),
            tables=np.array(data["tables"]),
            n_types=np.array(data["n_types"]),
            period=int(data["period"]),
            run_seed=int(data["run_seed"]),
        )
