"""Command-line front end.

Subcommands: run (revenues.csv, bids.csv), sweep (sweep.csv), infer
(inference.csv, shading.csv), bce (bce.csv).  Every command writes a
metadata.json sidecar naming the seeds, hyperparameters, and format
version, and prints summary numbers recomputable from the CSVs.

Exit codes: 0 success, 1 validation failure (the message names the
offending field or flag), 2 I/O failure.  Thread count comes from the
AUCTIONSIM_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import equilibrium, inference, outputs, simulator
from .scenario import (MechanismSpec, ScenarioError, load_scenario,
                       sample_env_sequence)

FORMAT_VERSION = 1


@dataclass
class ExperimentManifest:
    command: str
    out_dir: Path
    scenario_path: str | None = None
    master_seed: int | None = None
    params: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def metadata_extra(self) -> dict:
        extra = {"format_version": self.format_version, "command": self.command}
        if self.master_seed is not None:
            extra["master_seed"] = self.master_seed
        extra.update(self.params)
        return extra


def _load_scenario(manifest: ExperimentManifest):
    scenario = load_scenario(manifest.scenario_path)
    runs = manifest.params.get("runs")
    if manifest.master_seed is not None:
        scenario = scenario.with_seeds(manifest.master_seed, runs)
    elif runs is not None:
        if runs > len(scenario.run_seeds):
            raise ScenarioError(
                "runs", f"scenario carries {len(scenario.run_seeds)} run seeds; "
                "pass --seed to derive more")
        scenario = dataclasses.replace(scenario, run_seeds=scenario.run_seeds[:runs])
    return scenario


def _parse_mechanism(text: str) -> MechanismSpec:
    try:
        return MechanismSpec.from_string(text)
    except ValueError as e:
        raise ScenarioError("mechanism", str(e)) from e


def cmd_run(manifest: ExperimentManifest) -> int:
    scenario = _load_scenario(manifest)
    mech = manifest.params.get("mechanism")
    if mech:
        scenario = scenario.with_mechanism(_parse_mechanism(mech))
    trace = manifest.params.get("trace", False)
    batch = simulator.run_batch(scenario, record_trace=trace)

    out = manifest.out_dir
    outputs.write_revenues(out / "revenues.csv", scenario.name, [batch])
    outputs.write_bids(out / "bids.csv", scenario.name, batch)
    if trace:
        outputs.write_trace(out / "trace.csv", batch)
    outputs.write_metadata(out / "metadata.json", scenario, manifest.metadata_extra())
    m = scenario.mechanism
    print(f"{scenario.name} {m.label()}: mean revenue {batch.mean_revenue!r} "
          f"over {len(batch.runs)} runs")
    return 0


def cmd_sweep(manifest: ExperimentManifest) -> int:
    scenario = _load_scenario(manifest)
    values = manifest.params["sweep_values"]
    kinds = manifest.params.get("mechanisms") or ["soft", "reserve"]
    kind_map = {"soft": "soft_floor", "reserve": "hard_reserve"}
    for kind in kinds:
        if kind not in kind_map:
            raise ScenarioError(
                "mechanism", f"sweep takes a rule kind (soft|reserve), got {kind!r}; "
                "floors come from --sweep-values")
    env = sample_env_sequence(scenario)
    batches = []
    for kind in kinds:
        batches.extend(simulator.sweep(scenario, kind_map[kind], values, env=env))

    out = manifest.out_dir
    outputs.write_sweep(out / "sweep.csv", scenario.name, batches)
    outputs.write_metadata(out / "metadata.json", scenario, manifest.metadata_extra())
    for b in batches:
        m = b.scenario.mechanism
        print(f"{scenario.name} {m.label()}: mean revenue {b.mean_revenue!r} "
              f"(std {b.std_revenue!r})")
    return 0


def _read_observed_bids(path: str) -> tuple[np.ndarray, bool]:
    """CSV of (percentile, observed_bid) with header, or one sample per line.

    Returns the values plus whether they are already a percentile vector
    (a headered file is authoritative; bare samples are raw draws).
    """
    text = Path(path).read_text().strip()
    if not text:
        raise ScenarioError("observed bids", "empty input file")
    lines = text.splitlines()
    first = lines[0].split(",")
    if "percentile" in [c.strip().lower() for c in first]:
        rows = outputs.read_rows(path)
        if not rows:
            raise ScenarioError("observed bids", "empty input file")
        rows.sort(key=lambda r: float(r["percentile"]))
        return np.array([float(r["observed_bid"]) for r in rows]), True
    try:
        return np.array([float(ln.split(",")[-1]) for ln in lines]), False
    except ValueError as e:
        raise ScenarioError("observed bids", f"unparseable input: {e}") from e


def cmd_infer(manifest: ExperimentManifest) -> int:
    samples, from_percentiles = _read_observed_bids(manifest.params["in_path"])
    mech = _parse_mechanism(manifest.params.get("mechanism") or "second")
    config = inference.InferenceConfig(
        alpha=manifest.params.get("alpha") or 0.2,
        max_iterations=manifest.params.get("iterations") or 100,
        runs_per_iteration=manifest.params.get("runs") or 10,
        master_seed=manifest.master_seed if manifest.master_seed is not None else 1,
    )
    if from_percentiles:
        if len(samples) != len(config.percentiles):
            raise ScenarioError(
                "observed bids", f"expected {len(config.percentiles)} percentile "
                f"rows, got {len(samples)}")
        observed = samples  # infer_values flattens disorder itself
    elif len(samples) == len(config.percentiles) and np.all(np.diff(samples) >= 0):
        observed = samples
    else:
        observed = inference.observed_percentiles(samples, config.percentiles)
    result = inference.infer_values(observed, mech, config)
    report = inference.shading_report(result.values, result.best.predicted_by_run,
                                      config.percentiles)

    out = manifest.out_dir
    outputs.write_inference(out / "inference.csv", result)
    outputs.write_shading(out / "shading.csv", report)
    outputs.write_metadata(out / "metadata.json", None, {
        **manifest.metadata_extra(),
        "mechanism": mech.label(),
        "percentiles": list(config.percentiles),
        "observed_bids": [float(x) for x in observed],
        "horizon": config.horizon,
        "num_bidders": config.num_bidders,
    })
    print(f"best iteration {result.best_iteration}: bid mae {result.mae!r}")
    print(f"mean shading {report.mean_shading!r} "
          f"[{report.ci_low!r}, {report.ci_high!r}]")
    return 0


def cmd_bce(manifest: ExperimentManifest) -> int:
    scenario = _load_scenario(manifest)
    run_dir = Path(manifest.params["run_dir"])
    trace_path = run_dir / "trace.csv"
    if not trace_path.exists():
        raise ScenarioError("trace", f"no trace.csv in {run_dir}; "
                            "run with --trace first")
    rows = outputs.read_rows(trace_path)
    if not rows:
        raise ScenarioError("trace", "trace.csv has no rows")
    n = scenario.num_bidders
    types = np.array([[int(r[f"type_{i}"]) for i in range(n)] for r in rows])
    actions = np.array([[int(r[f"action_{i}"]) for i in range(n)] for r in rows])
    profile = equilibrium.EmpiricalProfile.from_samples(types, actions)
    eps, gains = equilibrium.coarse_bce_epsilon(profile, scenario)

    out = manifest.out_dir
    outputs.write_bce(out / "bce.csv", scenario, gains)
    outputs.write_metadata(out / "metadata.json", scenario, manifest.metadata_extra())
    for g in gains:
        print(f"bidder {g.bidder} type {scenario.bidders[g.bidder].types[g.type_index]}: "
              f"gain {g.gain!r} at bid {float(scenario.bid_grid[g.bid_index])!r} "
              f"clause {scenario.clause_space[g.clause_index]}")
    print(f"epsilon {eps!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auctionsim",
        description="Repeated ad-auction simulation with learning bidders.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("--scenario", required=True,
                           help="scenario YAML path or bundled scenario name")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed; re-derives env and run seeds")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--runs", type=int, default=None)

    p = sub.add_parser("run", help="simulate one scenario, write revenues and bids")
    common(p)
    p.add_argument("--mechanism", default=None,
                   help="override pricing rule: first|second|reserve:R|soft:S")
    p.add_argument("--trace", action="store_true",
                   help="also write the window trace (trace.csv)")

    p = sub.add_parser("sweep", help="revenue vs floor value, per rule kind")
    common(p)
    p.add_argument("--sweep-values", required=True,
                   help="comma-separated floor values, e.g. 0,0.2,0.4")
    p.add_argument("--mechanism", action="append", dest="mechanisms",
                   help="rule kind soft|reserve (repeatable; default both)")

    p = sub.add_parser("infer", help="recover values from an observed bid file")
    common(p, scenario_required=False)
    p.add_argument("--in", dest="in_path", required=True,
                   help="CSV of (percentile, observed_bid) or one sample per line")
    p.add_argument("--mechanism", default="second",
                   help="hypothesized pricing rule")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)

    p = sub.add_parser("bce", help="deviation-gain certificate from a traced run")
    common(p, scenario_required=True)
    p.add_argument("--run-dir", dest="run_dir", required=True,
                   help="directory holding trace.csv from a traced run")
    return parser


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "infer": cmd_infer, "bce": cmd_bce}


def _manifest_from_args(args: argparse.Namespace) -> ExperimentManifest:
    params = {}
    for key in ("runs", "mechanism", "mechanisms", "trace", "alpha",
                "iterations", "in_path", "run_dir"):
        val = getattr(args, key, None)
        if val is not None and val is not False:
            params[key] = val
    if getattr(args, "sweep_values", None) is not None:
        try:
            params["sweep_values"] = [float(v) for v in args.sweep_values.split(",")]
        except ValueError as e:
            raise ScenarioError("sweep-values", f"expected comma-separated floats: {e}")
    return ExperimentManifest(
        command=args.command,
        out_dir=Path(args.out),
        scenario_path=getattr(args, "scenario", None),
        master_seed=args.seed,
        params=params,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = _manifest_from_args(args)
        return _COMMANDS[args.command](manifest)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except yaml.YAMLError as e:
        print(f"error: scenario: invalid YAML ({e})", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
