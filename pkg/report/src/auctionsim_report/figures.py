"""Figure builders over the simulator's CSV schemas.

Every number drawn here is a CSV cell.  The one aggregation performed is
summing histogram counts across runs and bidders within a facet, which
is the same measure at coarser grain; means and stdevs are only ever
read from columns the simulator wrote.  Rendering is deterministic:
fixed style, fixed SVG id salt, no timestamps in the output metadata.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

plt.rcParams["svg.hashsalt"] = "auctionsim-report"
plt.rcParams["figure.dpi"] = 100

BIDS_COLUMNS = ("scenario_id", "run_seed", "bidder", "type", "clause_mask",
                "bid", "count")
SWEEP_COLUMNS = ("scenario_id", "mechanism", "floor", "mean_revenue",
                 "std_revenue", "num_runs")
INFERENCE_COLUMNS = ("iteration", "percentile", "observed_bid",
                     "predicted_bid", "inferred_value", "mae")
SHADING_COLUMNS = ("percentile", "value", "predicted_bid", "shading")

KIND_COLUMNS = {
    "bid_histogram": BIDS_COLUMNS,
    "floor_curve": SWEEP_COLUMNS,
    "inference_trace": INFERENCE_COLUMNS,
    "shading_grid": SHADING_COLUMNS,
}
KIND_FACETS = {
    "bid_histogram": ("type", "clause_mask"),
    "floor_curve": ("mechanism",),
    "inference_trace": ("source",),
    "shading_grid": ("source",),
}
KINDS = tuple(KIND_COLUMNS)


class ReportError(Exception):
    """Input did not match the contract (schema, emptiness, file kind)."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    out_path: Path
    facets: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ReportError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {sorted(KINDS)}")
        if self.facets is None:
            object.__setattr__(self, "facets", KIND_FACETS[self.kind])


def load_rows(path, required) -> list[dict]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        try:
            header = reader.fieldnames
            if header is None:
                raise ReportError(f"no data: {path}")
            for col in required:
                if col not in header:
                    raise ReportError(f"missing column {col!r} in {path}")
            rows = list(reader)
        except (UnicodeDecodeError, csv.Error) as exc:
            raise ReportError(f"not readable as csv: {path} ({exc})") from exc
    if not rows:
        raise ReportError(f"no data: {path}")
    return rows


def _grid(fig_count: int):
    cols = min(3, fig_count)
    rows = (fig_count + cols - 1) // cols
    return rows, cols


def _bar_width(positions) -> float:
    xs = sorted(set(positions))
    if len(xs) < 2:
        return 0.05
    return 0.8 * min(b - a for a, b in zip(xs, xs[1:]))


def bid_histogram_figure(rows_per_file):
    # facet on (type, clause); counts summed over runs and bidders
    sums: dict[tuple, dict[float, float]] = {}
    scenario = None
    for rows in rows_per_file:
        for r in rows:
            scenario = scenario or r["scenario_id"]
            facet = sums.setdefault((r["type"], r["clause_mask"]), {})
            bid = float(r["bid"])
            facet[bid] = facet.get(bid, 0.0) + float(r["count"])
    nrows, ncols = _grid(len(sums))
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             figsize=(3.4 * ncols, 2.8 * nrows))
    flat = [ax for row in axes for ax in row]
    for ax, ((type_name, clause), counts) in zip(flat, sums.items()):
        bids = sorted(counts)
        ax.bar(bids, [counts[b] for b in bids], width=_bar_width(bids))
        ax.set_title(f"type {type_name}, clause {clause}", fontsize=9)
        ax.set_xlabel("bid")
        ax.set_ylabel("count")
    for ax in flat[len(sums):]:
        fig.delaxes(ax)
    if scenario:
        fig.suptitle(scenario)
    fig.tight_layout()
    return fig


def floor_curve_figure(rows_per_file):
    series: dict[str, list[tuple[float, float, float]]] = {}
    for rows in rows_per_file:
        for r in rows:
            series.setdefault(r["mechanism"], []).append(
                (float(r["floor"]), float(r["mean_revenue"]),
                 float(r["std_revenue"])))
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for name, points in series.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        sd = [p[2] for p in points]
        ax.plot(xs, ys, marker="o", label=name)
        ax.fill_between(xs, [y - s for y, s in zip(ys, sd)],
                        [y + s for y, s in zip(ys, sd)], alpha=0.2)
    ax.set_xlabel("floor")
    ax.set_ylabel("mean revenue")
    ax.legend()
    fig.tight_layout()
    return fig


def _first_row_per_iteration(rows):
    seen: dict[str, dict] = {}
    for r in rows:
        seen.setdefault(r["iteration"], r)
    return list(seen.values())


def inference_trace_figure(rows_per_file, labels):
    n = len(rows_per_file)
    fig, axes = plt.subplots(n, 2, squeeze=False, figsize=(9.0, 3.2 * n))
    for (ax_mae, ax_fit), rows, label in zip(axes, rows_per_file, labels):
        per_iter = _first_row_per_iteration(rows)
        ax_mae.plot([float(r["iteration"]) for r in per_iter],
                    [float(r["mae"]) for r in per_iter], marker="o")
        ax_mae.set_xlabel("iteration")
        ax_mae.set_ylabel("bid mae")
        ax_mae.set_title(f"{label}: convergence", fontsize=9)

        last = per_iter[-1]["iteration"]
        final = [r for r in rows if r["iteration"] == last]
        pct = [float(r["percentile"]) for r in final]
        for column, style in (("observed_bid", "o-"), ("predicted_bid", "s--"),
                              ("inferred_value", "^:")):
            ax_fit.plot(pct, [float(r[column]) for r in final], style,
                        label=column)
        ax_fit.set_xlabel("percentile")
        ax_fit.set_title(f"{label}: final iteration {last}", fontsize=9)
        ax_fit.legend(fontsize=8)
    fig.tight_layout()
    return fig


def shading_grid_figure(rows_per_file, labels):
    nrows, ncols = _grid(len(rows_per_file))
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             figsize=(3.8 * ncols, 3.0 * nrows))
    flat = [ax for row in axes for ax in row]
    for ax, rows, label in zip(flat, rows_per_file, labels):
        pct = [float(r["percentile"]) for r in rows]
        ax.bar(pct, [float(r["shading"]) for r in rows],
               width=_bar_width(pct))
        ax.axhline(0.0, linewidth=0.8)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("percentile")
        ax.set_ylabel("shading")
    for ax in flat[len(rows_per_file):]:
        fig.delaxes(ax)
    fig.tight_layout()
    return fig


def build_figure(spec: FigureSpec):
    required = KIND_COLUMNS[spec.kind]
    rows_per_file = [load_rows(p, required) for p in spec.inputs]
    labels = [Path(p).stem for p in spec.inputs]
    if spec.kind == "bid_histogram":
        return bid_histogram_figure(rows_per_file)
    if spec.kind == "floor_curve":
        return floor_curve_figure(rows_per_file)
    if spec.kind == "inference_trace":
        return inference_trace_figure(rows_per_file, labels)
    return shading_grid_figure(rows_per_file, labels)


def render(spec: FigureSpec) -> Path:
    """Write the figure to spec.out_path (.png or .svg); one image per spec."""
    suffix = Path(spec.out_path).suffix.lower()
    if suffix not in (".png", ".svg"):
        raise ReportError(f"output must be .png or .svg, got {spec.out_path}")
    fig = build_figure(spec)
    try:
        if suffix == ".png":
            fig.savefig(spec.out_path, format="png",
                        metadata={"Software": "auctionsim-report"})
        else:
            # Date: None strips the only volatile field the SVG writer emits
            fig.savefig(spec.out_path, format="svg",
                        metadata={"Date": None})
    finally:
        plt.close(fig)
    return Path(spec.out_path)
