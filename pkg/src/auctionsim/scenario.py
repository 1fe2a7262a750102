"""Scenario definitions, validation, and the shared environment sequence.

A scenario fixes everything about an experiment except the learners'
sampled actions: bidders with type spaces, value and CTR tables, the bid
grid, the targeting-clause space, the pricing mechanism, the learning
algorithm, and the horizon.  The environment sequence (realized query and
type per period) is drawn once from ``env_seed`` and shared by every run
of the scenario, so runs differ only through learner sampling.

Actions are indexed clause-major: action ``a`` means clause ``a // len(B)``
and bid ``B[a % len(B)]``.  Clauses are bitmasks over the query list.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import _rng

_RULES = ("first", "second", "reserve", "soft")
_TIE_POLICIES = ("divide_by_n", "divide_by_tied")
_PRICE_SPACES = ("bid", "score")
_ALGORITHMS = ("hedge", "exp3ix")

DIST_TOL = 1e-12


class ScenarioError(ValueError):
    """Invalid scenario configuration.

    ``field`` names the offending entry so CLI errors can point at it.
    """

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class MechanismSpec:
    rule: str = "second"
    floor: float = 0.0
    tie_policy: str = "divide_by_n"
    price_space: str = "bid"

    @staticmethod
    def from_string(text: str) -> "MechanismSpec":
        """Parse ``first | second | reserve:R | soft:S``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        if kind in ("first", "second"):
            if arg:
                raise ScenarioError("mechanism", f"{kind} takes no floor argument")
            return MechanismSpec(rule=kind)
        if kind in ("reserve", "soft"):
            if not arg:
                raise ScenarioError("mechanism", f"{kind} requires a floor, e.g. {kind}:0.5")
            try:
                floor = round(float(arg), 10)
            except ValueError:
                raise ScenarioError("mechanism", f"bad floor value {arg!r}") from None
            return MechanismSpec(rule=kind, floor=floor)
        raise ScenarioError("mechanism", f"unknown rule {kind!r}")

    def label(self) -> str:
        if self.rule in ("reserve", "soft"):
            return f"{self.rule}:{self.floor:g}"
        return self.rule


@dataclass(frozen=True)
class LearnerSpec:
    algorithm: str = "hedge"
    eta: float | None = None     # None -> 0.02 for hedge, tuned for exp3ix
    gamma: float | None = None   # exp3ix only; None -> tuned
    normalize_rewards: bool = True  # hedge only; exp3ix always normalizes


@dataclass
class BidderSpec:
    types: tuple[str, ...]
    type_dist: np.ndarray   # (T,)
    values: np.ndarray      # (T, Q)
    ctrs: np.ndarray        # (T, Q)


@dataclass
class Scenario:
    name: str
    queries: tuple[str, ...]
    query_dist: np.ndarray
    bidders: list[BidderSpec]
    bid_grid: np.ndarray
    clause_space: tuple[int, ...]   # bitmasks over queries, action-order
    mechanism: MechanismSpec
    learner: LearnerSpec
    horizon: int
    window_fraction: float = 0.1
    env_seed: int = 0
    run_seeds: tuple[int, ...] = (1,)

    @property
    def num_bidders(self) -> int:
        return len(self.bidders)

    @property
    def num_queries(self) -> int:
        return len(self.queries)

    @property
    def num_bids(self) -> int:
        return len(self.bid_grid)

    @property
    def num_actions(self) -> int:
        return len(self.clause_space) * len(self.bid_grid)

    @property
    def max_types(self) -> int:
        return max(len(b.types) for b in self.bidders)

    @property
    def v_max(self) -> float:
        return max(float(b.values.max()) for b in self.bidders)

    @property
    def b_max(self) -> float:
        return float(self.bid_grid[-1])

    @property
    def window_length(self) -> int:
        return max(1, int(round(self.horizon * self.window_fraction)))

    @property
    def window_start(self) -> int:
        return self.horizon - self.window_length

    def action(self, index: int) -> tuple[int, int]:
        """(bid_index, clause_index) for a flat action index."""
        return index % self.num_bids, index // self.num_bids

    def action_index(self, bid_index: int, clause_index: int) -> int:
        return clause_index * self.num_bids + bid_index

    def clause_eligibility(self) -> np.ndarray:
        """bool (num_clauses, num_queries): clause contains query."""
        nc, nq = len(self.clause_space), self.num_queries
        out = np.zeros((nc, nq), dtype=np.bool_)
        for ci, mask in enumerate(self.clause_space):
            for qi in range(nq):
                out[ci, qi] = bool(mask >> qi & 1)
        return out

    def with_mechanism(self, mechanism: MechanismSpec) -> "Scenario":
        return dataclasses.replace(self, mechanism=mechanism)

    def with_learner(self, learner: LearnerSpec) -> "Scenario":
        return dataclasses.replace(self, learner=learner)

    def with_horizon(self, horizon: int) -> "Scenario":
        return dataclasses.replace(self, horizon=horizon)

    def with_seeds(self, master_seed: int, runs: int | None = None) -> "Scenario":
        n = len(self.run_seeds) if runs is None else runs
        return dataclasses.replace(
            self,
            env_seed=int(_rng.env_seed_from_master(master_seed)),
            run_seeds=tuple(int(s) for s in _rng.run_seeds_from_master(master_seed, n)),
        )


@dataclass(frozen=True)
class EnvSequence:
    """Realized (query, type vector) per period, shared across runs."""

    queries: np.ndarray  # int64 (T,)
    types: np.ndarray    # int64 (T, N)

    @property
    def horizon(self) -> int:
        return len(self.queries)


def _check_dist(name: str, dist: np.ndarray) -> None:
    if dist.ndim != 1 or len(dist) == 0:
        raise ScenarioError(name, "distribution must be a non-empty vector")
    if np.any(dist < 0):
        raise ScenarioError(name, "distribution has negative entries")
    total = float(dist.sum())
    if abs(total - 1.0) > DIST_TOL:
        raise ScenarioError(name, f"distribution not normalized (sum={total!r})")


def validate_scenario(s: Scenario) -> None:
    """Raise ScenarioError on the first violated invariant."""
    if s.num_bidders < 1:
        raise ScenarioError("bidders", "need at least one bidder")
    if s.num_queries < 1:
        raise ScenarioError("queries", "need at least one query")
    if len(s.query_dist) != s.num_queries:
        raise ScenarioError("query_dist", f"length {len(s.query_dist)} != {s.num_queries} queries")
    _check_dist("query_dist", s.query_dist)

    for i, b in enumerate(s.bidders):
        tag = f"bidders[{i}]"
        if len(b.types) == 0:
            raise ScenarioError(f"{tag}.types", "empty type space")
        if len(b.type_dist) != len(b.types):
            raise ScenarioError(f"{tag}.type_dist", "length mismatch with types")
        _check_dist(f"{tag}.type_dist", b.type_dist)
        if b.values.shape != (len(b.types), s.num_queries):
            raise ScenarioError(f"{tag}.values", f"shape {b.values.shape} != (types, queries)")
        if b.ctrs.shape != (len(b.types), s.num_queries):
            raise ScenarioError(f"{tag}.ctrs", f"shape {b.ctrs.shape} != (types, queries)")
        if np.any(b.values < 0):
            raise ScenarioError(f"{tag}.values", "negative value entry")
        if np.any((b.ctrs < 0) | (b.ctrs > 1)):
            raise ScenarioError(f"{tag}.ctrs", "ctr out of range [0, 1]")

    if len(s.bid_grid) == 0:
        raise ScenarioError("bid_grid", "empty bid grid")
    if s.bid_grid[0] < 0:
        raise ScenarioError("bid_grid", "first bid must be >= 0")
    if np.any(np.diff(s.bid_grid) <= 0):
        raise ScenarioError("bid_grid", "bid grid not strictly increasing")

    if len(s.clause_space) == 0:
        raise ScenarioError("clause_space", "empty clause space")
    full = (1 << s.num_queries) - 1
    for mask in s.clause_space:
        if not 0 <= mask <= full:
            raise ScenarioError("clause_space", f"clause mask {mask} out of range")
    if len(set(s.clause_space)) != len(s.clause_space):
        raise ScenarioError("clause_space", "duplicate clause")

    if s.mechanism.rule not in _RULES:
        raise ScenarioError("mechanism.rule", f"unknown rule {s.mechanism.rule!r}")
    if s.mechanism.tie_policy not in _TIE_POLICIES:
        raise ScenarioError("mechanism.tie_policy", f"unknown policy {s.mechanism.tie_policy!r}")
    if s.mechanism.price_space not in _PRICE_SPACES:
        raise ScenarioError("mechanism.price_space", f"unknown space {s.mechanism.price_space!r}")
    if s.mechanism.rule in ("reserve", "soft") and s.mechanism.floor < 0:
        raise ScenarioError("mechanism.floor", "floor must be >= 0")

    if s.learner.algorithm not in _ALGORITHMS:
        raise ScenarioError("learner.algorithm", f"unknown algorithm {s.learner.algorithm!r}")
    if s.learner.eta is not None and s.learner.eta <= 0:
        raise ScenarioError("learner.eta", "eta must be positive")
    if s.learner.gamma is not None and s.learner.gamma <= 0:
        raise ScenarioError("learner.gamma", "gamma must be positive")

    if s.horizon < 1:
        raise ScenarioError("horizon", "horizon must be >= 1")
    if not 0 < s.window_fraction <= 1:
        raise ScenarioError("window_fraction", "must lie in (0, 1]")
    if len(s.run_seeds) == 0:
        raise ScenarioError("run_seeds", "need at least one run seed")


def _inverse_cdf(dist: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(dist)
    idx = np.searchsorted(cum, u, side="right")
    # cumsum roundoff can leave cum[-1] slightly below 1
    return np.minimum(idx, len(dist) - 1).astype(np.int64)


def sample_env_sequence(s: Scenario) -> EnvSequence:
    """Draw the shared (query, types) sequence from ``env_seed``.

    Period t consumes counters t*(N+1) for the query and t*(N+1)+1+i for
    bidder i's type, all under the environment seed.
    """
    T, N = s.horizon, s.num_bidders
    base = np.arange(T, dtype=np.uint64) * np.uint64(N + 1)
    qs = _inverse_cdf(s.query_dist, _rng.uniforms(s.env_seed, base))
    taus = np.empty((T, N), dtype=np.int64)
    for i, b in enumerate(s.bidders):
        u = _rng.uniforms(s.env_seed, base + np.uint64(1 + i))
        taus[:, i] = _inverse_cdf(b.type_dist, u)
    return EnvSequence(queries=qs, types=taus)


# ---------------------------------------------------------------------------
# configuration files


def _round_grid(values) -> np.ndarray:
    # round to 10 decimals so grid points equal parsed decimal literals
    return np.round(np.asarray(values, dtype=np.float64), 10)


def _parse_bid_grid(node) -> np.ndarray:
    if isinstance(node, dict):
        try:
            start, stop, count = node["start"], node["stop"], int(node["count"])
        except KeyError as e:
            raise ScenarioError("bid_grid", f"missing key {e.args[0]!r}") from None
        if count < 1:
            raise ScenarioError("bid_grid", "count must be >= 1")
        return _round_grid(np.linspace(float(start), float(stop), count))
    return _round_grid(node)


def _parse_clause_space(node, queries: tuple[str, ...]) -> tuple[int, ...]:
    if node == "full_only" or node is None:
        return ((1 << len(queries)) - 1,)
    if node == "all":
        # every subset, empty clause included, in ascending mask order
        return tuple(range(1 << len(queries)))
    if node == "all_nonempty":
        return tuple(range(1, 1 << len(queries)))
    masks = []
    for clause in node:
        mask = 0
        for qid in clause:
            try:
                mask |= 1 << queries.index(qid)
            except ValueError:
                raise ScenarioError("clause_space", f"unknown query id {qid!r}") from None
        masks.append(mask)
    return tuple(masks)


def _parse_dist(node, n: int, name: str) -> np.ndarray:
    if node == "uniform" or node is None:
        return np.full(n, 1.0 / n)
    arr = np.asarray(node, dtype=np.float64)
    if arr.ndim != 1 or len(arr) != n:
        raise ScenarioError(name, f"expected {n} probabilities")
    return arr


def _parse_table(node, n_types: int, n_queries: int, name: str) -> np.ndarray:
    if isinstance(node, (int, float)):
        return np.full((n_types, n_queries), float(node))
    arr = np.asarray(node, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (n_types, n_queries):
        raise ScenarioError(name, f"shape {arr.shape} != ({n_types}, {n_queries})")
    return arr


def scenario_from_dict(cfg: dict, name: str = "scenario") -> Scenario:
    name = str(cfg.get("name", name))
    queries = tuple(str(q) for q in cfg.get("queries", ["q0"]))
    if not queries:
        raise ScenarioError("queries", "need at least one query")
    query_dist = _parse_dist(cfg.get("query_dist"), len(queries), "query_dist")

    bidders: list[BidderSpec] = []
    for bi, node in enumerate(cfg.get("bidders", [])):
        copies = int(node.get("copies", 1))
        types = tuple(str(t) for t in node["types"])
        type_dist = _parse_dist(node.get("type_dist"), len(types), f"bidders[{bi}].type_dist")
        values = _parse_table(node["values"], len(types), len(queries), f"bidders[{bi}].values")
        ctrs = _parse_table(node.get("ctrs", 1.0), len(types), len(queries), f"bidders[{bi}].ctrs")
        for _ in range(copies):
            bidders.append(BidderSpec(types=types, type_dist=type_dist.copy(),
                                      values=values.copy(), ctrs=ctrs.copy()))

    mech_node = cfg.get("mechanism", {})
    if isinstance(mech_node, str):
        mechanism = MechanismSpec.from_string(mech_node)
    else:
        mechanism = MechanismSpec(
            rule=str(mech_node.get("rule", "second")),
            floor=round(float(mech_node.get("floor", 0.0)), 10),
            tie_policy=str(mech_node.get("tie_policy", "divide_by_n")),
            price_space=str(mech_node.get("price_space", "bid")),
        )

    learner_node = cfg.get("learner", {})
    eta = learner_node.get("eta")
    gamma = learner_node.get("gamma")
    learner = LearnerSpec(
        algorithm=str(learner_node.get("algorithm", "hedge")),
        eta=None if eta in (None, "auto") else float(eta),
        gamma=None if gamma in (None, "auto") else float(gamma),
        normalize_rewards=bool(learner_node.get("normalize_rewards", True)),
    )

    horizon = int(cfg.get("horizon", 100_000))
    runs = int(cfg.get("runs", 1))
    master_seed = int(cfg.get("master_seed", 0))
    env_seed = cfg.get("env_seed")
    env_seed = int(_rng.env_seed_from_master(master_seed)) if env_seed is None else int(env_seed)
    run_seeds = cfg.get("run_seeds")
    if run_seeds is None:
        run_seeds = tuple(int(r) for r in _rng.run_seeds_from_master(master_seed, runs))
    else:
        run_seeds = tuple(int(r) for r in run_seeds)

    scenario = Scenario(
        name=name,
        queries=queries,
        query_dist=query_dist,
        bidders=bidders,
        bid_grid=_parse_bid_grid(cfg.get("bid_grid", {"start": 0.0, "stop": 1.0, "count": 21})),
        clause_space=_parse_clause_space(cfg.get("clause_space"), queries),
        mechanism=mechanism,
        learner=learner,
        horizon=horizon,
        window_fraction=float(cfg.get("window_fraction", 0.1)),
        env_seed=env_seed,
        run_seeds=run_seeds,
    )
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file (YAML tree of key/value pairs).

    ``path`` may also name a bundled example scenario, e.g. ``textbook_n2``.
    """
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenario_path(p.stem)
        if bundled is None:
            raise FileNotFoundError(f"scenario file not found: {path}")
        p = bundled
    with open(p, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ScenarioError("scenario", "file does not contain a mapping")
    return scenario_from_dict(cfg, name=p.stem)


def bundled_scenario_path(name: str) -> Path | None:
    root = resources.files("auctionsim").joinpath("scenarios")
    candidate = root.joinpath(f"{name}.yaml")
    if candidate.is_file():
        return Path(str(candidate))
    return None


def bundled_scenarios() -> list[str]:
    root = resources.files("auctionsim").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))
