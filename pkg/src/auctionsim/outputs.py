"""CSV and metadata persistence.

Column names and order are part of the public contract; downstream
tooling reads these files by header name.  Writers are deterministic:
rows come out in a fixed sort order, floats are formatted with repr
(shortest round-trip form), and line endings are LF, so rerunning an
experiment with the same seeds reproduces every output byte for byte.
Timestamps and hostnames are deliberately absent for the same reason.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numba
import numpy as np

from ._version import __version__

REVENUES_HEADER = ["scenario_id", "mechanism", "floor", "run_seed", "mean_revenue"]
BIDS_HEADER = ["scenario_id", "run_seed", "bidder", "type", "clause_mask", "bid", "count"]
SWEEP_HEADER = ["scenario_id", "mechanism", "floor", "mean_revenue", "std_revenue", "num_runs"]
BCE_HEADER = ["bidder", "type", "best_deviation_bid", "best_deviation_clause", "gain"]
INFERENCE_HEADER = ["iteration", "percentile", "observed_bid", "predicted_bid",
                    "inferred_value", "mae"]
SHADING_HEADER = ["percentile", "value", "predicted_bid", "shading"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_revenues(path, scenario_id: str, batches) -> None:
    """One row per run, batches in given order then seed order."""
    rows = []
    for batch in batches:
        m = batch.scenario.mechanism
        for run in batch.runs:
            rows.append([scenario_id, m.rule, m.floor, run.run_seed, run.mean_revenue])
    write_csv(path, REVENUES_HEADER, rows)


def write_bids(path, scenario_id: str, batch) -> None:
    """Nonzero window bid counts per (run, bidder, type, clause, bid)."""
    s = batch.scenario
    rows = []
    for run in batch.runs:
        hist = run.bid_histogram
        for i in range(s.num_bidders):
            for tau in range(len(s.bidders[i].types)):
                for ci, mask in enumerate(s.clause_space):
                    for bi in range(s.num_bids):
                        n = int(hist[i, tau, ci, bi])
                        if n:
                            rows.append([scenario_id, run.run_seed, i,
                                         s.bidders[i].types[tau], mask,
                                         float(s.bid_grid[bi]), n])
    write_csv(path, BIDS_HEADER, rows)


def write_sweep(path, scenario_id: str, batches) -> None:
    rows = []
    for batch in batches:
        m = batch.scenario.mechanism
        rows.append([scenario_id, m.rule, m.floor, batch.mean_revenue,
                     batch.std_revenue, len(batch.runs)])
    write_csv(path, SWEEP_HEADER, rows)


def write_bce(path, scenario, gains) -> None:
    rows = []
    for g in gains:
        rows.append([g.bidder, scenario.bidders[g.bidder].types[g.type_index],
                     float(scenario.bid_grid[g.bid_index]),
                     scenario.clause_space[g.clause_index], g.gain])
    write_csv(path, BCE_HEADER, rows)


def write_inference(path, result) -> None:
    rows = []
    for h in result.history:
        for k, p in enumerate(result.percentiles):
            rows.append([h.index, p, float(result.observed_bids[k]),
                         float(h.predicted_bids[k]), float(h.inferred_values[k]),
                         h.mae])
    write_csv(path, INFERENCE_HEADER, rows)


def write_shading(path, report) -> None:
    rows = []
    for k, p in enumerate(report.percentiles):
        rows.append([p, float(report.values[k]), float(report.predicted_bids[k]),
                     float(report.shading[k])])
    write_csv(path, SHADING_HEADER, rows)


def trace_header(num_bidders: int) -> list[str]:
    return (["period", "run_seed", "query", "winner", "price"]
            + [f"type_{i}" for i in range(num_bidders)]
            + [f"action_{i}" for i in range(num_bidders)])


def write_trace(path, batch) -> None:
    """Window periods for every traced run, run-major then period order."""
    s = batch.scenario
    rows = []
    for run in batch.runs:
        tr = run.trace
        if tr is None:
            raise ValueError("run has no trace; pass record_trace=True")
        for t in range(len(tr.queries)):
            rows.append([tr.start_period + t, run.run_seed,
                         s.queries[tr.queries[t]], int(tr.winner[t]),
                         float(tr.price[t])]
                        + [int(x) for x in tr.types[t]]
                        + [int(x) for x in tr.actions[t]])
    write_csv(path, trace_header(s.num_bidders), rows)


def scenario_metadata(scenario) -> dict:
    s = scenario
    return {
        "scenario": s.name,
        "queries": list(s.queries),
        "num_bidders": s.num_bidders,
        "bid_grid": [float(b) for b in s.bid_grid],
        "clause_space": [int(m) for m in s.clause_space],
        "mechanism": {"rule": s.mechanism.rule, "floor": s.mechanism.floor,
                      "tie_policy": s.mechanism.tie_policy,
                      "price_space": s.mechanism.price_space},
        "learner": {"algorithm": s.learner.algorithm, "eta": s.learner.eta,
                    "gamma": s.learner.gamma,
                    "normalize_rewards": s.learner.normalize_rewards},
        "horizon": s.horizon,
        "window_fraction": s.window_fraction,
        "env_seed": int(s.env_seed),
        "run_seeds": [int(x) for x in s.run_seeds],
    }


def write_metadata(path, scenario=None, extra: dict | None = None) -> None:
    meta = {
        "package": "auctionsim",
        "version": __version__,
        "versions": {"numpy": np.__version__, "numba": numba.__version__},
    }
    if scenario is not None:
        meta.update(scenario_metadata(scenario))
    if extra:
        meta.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2))
        fh.write("\n")
