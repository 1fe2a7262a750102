"""Regenerate the bundled scenario files.

Run from the repository root:

    python3 tools/gen_scenarios.py

Edit this generator, not the YAML files; a header comment in each file
says the same.  Masses for the Beta-distributed value scenarios are
computed exactly (integer-parameter regularized incomplete Beta via the
binomial expansion, in rational arithmetic) before conversion to float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

import yaml

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "auctionsim" / "scenarios"

HEADER = "# generated by tools/gen_scenarios.py; edit the generator, not this file\n"

# percentile-bracket masses for levels (10, 25, 40, 50, 60, 75, 90):
# each level owns the span midway to its neighbors, renormalized
PERCENTILE_WEIGHTS = [0.09375, 0.1875, 0.15625, 0.125, 0.15625, 0.1875, 0.09375]

TABLE_VALUE_DISTRIBUTIONS = {
    "uniform": [0.250, 0.625, 1.000, 1.250, 1.500, 1.875, 2.250],
    "right_skewed": [0.194, 0.357, 0.543, 0.700, 0.902, 1.374, 2.522],
    "left_skewed": [0.278, 1.426, 1.900, 2.100, 2.257, 2.443, 2.606],
}

BETA_PARAMS = [(4, 1), (3, 1), (3, 2), (2, 2), (3, 3), (4, 4), (2, 3), (1, 3), (1, 4)]


def beta_cdf(x: Fraction, a: int, b: int) -> Fraction:
    """Regularized incomplete Beta for integer a, b >= 1 (binomial form)."""
    n = a + b - 1
    return sum(
        Fraction(math.comb(n, j)) * x**j * (1 - x) ** (n - j)
        for j in range(a, n + 1)
    )


def beta_bracket_masses(a: int, b: int, points: int = 5) -> list[float]:
    """Mass per support point: CDF increment over its equal-width bracket."""
    edges = [Fraction(k, points) for k in range(points + 1)]
    cdf = [beta_cdf(x, a, b) for x in edges]
    return [float(cdf[k + 1] - cdf[k]) for k in range(points)]


def grid_values(start: float, step: float, count: int) -> list[float]:
    return [round(start + k * step, 10) for k in range(count)]


def textbook_n2() -> dict:
    values = grid_values(0.0, 0.05, 21)
    return {
        "name": "textbook_n2",
        "queries": ["q"],
        "bidders": [{
            "copies": 2,
            "types": [f"{v:.2f}" for v in values],
            "type_dist": "uniform",
            "values": values,
            "ctrs": 1.0,
        }],
        "bid_grid": {"start": 0.0, "stop": 1.0, "count": 21},
        "clause_space": "full_only",
        "mechanism": "second",
        "learner": {"algorithm": "hedge"},
        "horizon": 400_000,
        "runs": 10,
        "master_seed": 101,
    }


def multi_query_targeting() -> dict:
    return {
        "name": "multi_query_targeting",
        "queries": ["q1", "q2"],
        "query_dist": "uniform",
        "bidders": [{
            "copies": 3,
            "types": ["t1", "t2", "t3"],
            "type_dist": "uniform",
            "values": [[0.5, 0.25], [0.25, 1.0], [0.25, 1.0]],
            "ctrs": [[0.3, 0.1], [0.1, 0.1], [0.1, 0.2]],
        }],
        "bid_grid": {"start": 0.0, "stop": 1.0, "count": 21},
        # all subsets of {q1, q2}; the empty clause lets a type abstain
        "clause_space": "all",
        # CTRs differ across queries, so rank by score and price in score
        # space (generalized second price); floors stay in per-click units
        "mechanism": {"rule": "second", "price_space": "score"},
        "learner": {"algorithm": "hedge"},
        "horizon": 400_000,
        "runs": 10,
        "master_seed": 202,
    }


def _floor_sweep(name: str, regular_dist, master_seed: int) -> dict:
    regular_values = [0.2, 0.4, 0.6, 0.8, 1.0]
    return {
        "name": name,
        "queries": ["q"],
        "bidders": [
            {
                "copies": 2,
                "types": [f"{v:.1f}" for v in regular_values],
                "type_dist": regular_dist,
                "values": regular_values,
                "ctrs": 1.0,
            },
            {
                # strong bidder appears with probability 0.5; absence is a
                # type with zero value and zero click-through rate
                "copies": 2,
                "types": ["present", "absent"],
                "type_dist": [0.5, 0.5],
                "values": [2.0, 0.0],
                "ctrs": [1.0, 0.0],
            },
        ],
        "bid_grid": {"start": 0.0, "stop": 2.0, "count": 41},
        "clause_space": "full_only",
        "mechanism": "second",
        "learner": {"algorithm": "hedge"},
        "horizon": 500_000,
        "runs": 5,
        "master_seed": master_seed,
    }


def floor_sweep_uniform() -> dict:
    return _floor_sweep("floor_sweep_uniform", "uniform", 303)


def beta_scenario(a: int, b: int, master_seed: int) -> dict:
    return _floor_sweep(f"beta_{a}{b}", beta_bracket_masses(a, b), master_seed)


def value_distribution_scenario(label: str, values: list[float], master_seed: int) -> dict:
    return {
        "name": f"values_{label}",
        "queries": ["q"],
        "bidders": [{
            "copies": 2,
            "types": [f"p{p}" for p in (10, 25, 40, 50, 60, 75, 90)],
            "type_dist": PERCENTILE_WEIGHTS,
            "values": values,
            "ctrs": 1.0,
        }],
        "bid_grid": {"start": 0.0, "stop": 3.0, "count": 31},
        "clause_space": "full_only",
        "mechanism": "second",
        "learner": {"algorithm": "hedge"},
        "horizon": 200_000,
        "runs": 10,
        "master_seed": master_seed,
    }


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    scenarios = [textbook_n2(), multi_query_targeting(), floor_sweep_uniform()]
    scenarios += [beta_scenario(a, b, 400 + 10 * a + b) for a, b in BETA_PARAMS]
    scenarios += [
        value_distribution_scenario(label, values, seed)
        for seed, (label, values) in enumerate(TABLE_VALUE_DISTRIBUTIONS.items(), start=501)
    ]
    for cfg in scenarios:
        path = OUT_DIR / f"{cfg['name']}.yaml"
        text = HEADER + yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)
        path.write_text(text)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
