"""CSV schemas, formatting, and byte-level reproducibility."""

import json

import numpy as np
import pytest

from auctionsim import equilibrium as eq
from auctionsim import outputs, simulator
from auctionsim.scenario import scenario_from_dict


def small_scenario(**overrides):
    cfg = {
        "name": "out-toy",
        "queries": ["q1", "q2"],
        "query_dist": [0.5, 0.5],
        "bidders": [{
            "copies": 2,
            "types": ["lo", "hi"],
            "type_dist": [0.5, 0.5],
            "values": [[0.4, 0.4], [1.0, 1.0]],
            "ctrs": 1.0,
        }],
        "bid_grid": [0.0, 0.5, 1.0],
        "mechanism": "second",
        "learner": {"algorithm": "hedge"},
        "horizon": 600,
        "runs": 2,
        "master_seed": 31,
    }
    cfg.update(overrides)
    return scenario_from_dict(cfg)


# ------------------------------------------------------------ schemas


def test_revenues_schema(tmp_path):
    s = small_scenario()
    batch = simulator.run_batch(s)
    path = tmp_path / "revenues.csv"
    outputs.write_revenues(path, "out-toy", [batch])
    rows = outputs.read_rows(path)
    assert list(rows[0].keys()) == outputs.REVENUES_HEADER
    assert len(rows) == 2
    assert [int(r["run_seed"]) for r in rows] == list(s.run_seeds)
    for row, run in zip(rows, batch.runs):
        assert row["scenario_id"] == "out-toy"
        assert row["mechanism"] == "second"
        assert float(row["floor"]) == 0.0
        assert float(row["mean_revenue"]) == run.mean_revenue  # repr round trip


def test_bids_schema_counts_cover_window(tmp_path):
    s = small_scenario()
    batch = simulator.run_batch(s)
    path = tmp_path / "bids.csv"
    outputs.write_bids(path, "out-toy", batch)
    rows = outputs.read_rows(path)
    assert list(rows[0].keys()) == outputs.BIDS_HEADER
    assert all(int(r["count"]) > 0 for r in rows)  # zero rows omitted
    total = sum(int(r["count"]) for r in rows)
    assert total == len(batch.runs) * s.window_length * s.num_bidders
    assert {r["type"] for r in rows} <= {"lo", "hi"}
    assert {float(r["bid"]) for r in rows} <= set(s.bid_grid)


def test_sweep_schema(tmp_path):
    s = small_scenario()
    batches = simulator.sweep(s, "soft_floor", [0.0, 0.5])
    path = tmp_path / "sweep.csv"
    outputs.write_sweep(path, "out-toy", batches)
    rows = outputs.read_rows(path)
    assert list(rows[0].keys()) == outputs.SWEEP_HEADER
    assert [r["mechanism"] for r in rows] == ["soft", "soft"]
    assert [float(r["floor"]) for r in rows] == [0.0, 0.5]
    assert all(int(r["num_runs"]) == 2 for r in rows)
    for row, batch in zip(rows, batches):
        assert float(row["mean_revenue"]) == batch.mean_revenue
        assert float(row["std_revenue"]) == batch.std_revenue


def test_bce_schema(tmp_path):
    s = small_scenario()
    batch = simulator.run_batch(s, record_trace=True)
    profile = eq.EmpiricalProfile.from_batch(batch)
    _, gains = eq.coarse_bce_epsilon(profile, s)
    path = tmp_path / "bce.csv"
    outputs.write_bce(path, s, gains)
    rows = outputs.read_rows(path)
    assert list(rows[0].keys()) == outputs.BCE_HEADER
    assert len(rows) == len(gains)
    for row, g in zip(rows, gains):
        assert int(row["bidder"]) == g.bidder
        assert row["type"] == s.bidders[g.bidder].types[g.type_index]
        assert float(row["gain"]) == g.gain


def test_trace_schema(tmp_path):
    s = small_scenario()
    batch = simulator.run_batch(s, record_trace=True)
    path = tmp_path / "trace.csv"
    outputs.write_trace(path, batch)
    rows = outputs.read_rows(path)
    assert list(rows[0].keys()) == outputs.trace_header(s.num_bidders)
    assert len(rows) == len(batch.runs) * s.window_length
    assert int(rows[0]["period"]) == s.window_start
    assert rows[0]["query"] in s.queries
    untraced = simulator.run_batch(s)
    with pytest.raises(ValueError, match="record_trace"):
        outputs.write_trace(tmp_path / "t2.csv", untraced)


def test_float_formatting_round_trips():
    assert outputs._fmt(0.1) == "0.1"
    assert outputs._fmt(1 / 3) == repr(1 / 3)
    assert outputs._fmt(np.float64(2.0)) == "2.0"
    assert outputs._fmt(np.int64(7)) == "7"
    assert outputs._fmt(True) == "true"
    assert outputs._fmt("soft") == "soft"


def test_csv_uses_lf_line_endings(tmp_path):
    path = tmp_path / "x.csv"
    outputs.write_csv(path, ["a", "b"], [[1, 2], [3, 4]])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw == b"a,b\n1,2\n3,4\n"


# ------------------------------------------------- byte reproducibility


def test_rerun_writes_identical_bytes(tmp_path):
    s = small_scenario()
    paths = []
    for tag in ("one", "two"):
        batch = simulator.run_batch(s, record_trace=True)
        base = tmp_path / tag
        outputs.write_revenues(base / "revenues.csv", s.name, [batch])
        outputs.write_bids(base / "bids.csv", s.name, batch)
        outputs.write_trace(base / "trace.csv", batch)
        outputs.write_metadata(base / "metadata.json", s)
        paths.append(base)
    for name in ("revenues.csv", "bids.csv", "trace.csv", "metadata.json"):
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes(), name


def test_inference_and_shading_outputs_reproduce(tmp_path):
    from auctionsim import inference as inf
    from auctionsim.scenario import MechanismSpec
    observed = [0.2, 0.6, 1.0, 1.2, 1.5, 1.9, 2.2]
    cfg = inf.InferenceConfig(max_iterations=1, runs_per_iteration=2,
                              horizon=20_000)
    blobs = []
    for tag in ("one", "two"):
        result = inf.infer_values(observed, MechanismSpec("second"), cfg)
        rep = inf.shading_report(result.values, result.best.predicted_by_run)
        p1 = tmp_path / f"{tag}-inference.csv"
        p2 = tmp_path / f"{tag}-shading.csv"
        outputs.write_inference(p1, result)
        outputs.write_shading(p2, rep)
        blobs.append((p1.read_bytes(), p2.read_bytes()))
    assert blobs[0] == blobs[1]
    rows = outputs.read_rows(tmp_path / "one-inference.csv")
    assert list(rows[0].keys()) == outputs.INFERENCE_HEADER
    rows = outputs.read_rows(tmp_path / "one-shading.csv")
    assert list(rows[0].keys()) == outputs.SHADING_HEADER
    assert [int(r["percentile"]) for r in rows] == list(inf.DEFAULT_PERCENTILES)


# ---------------------------------------------------------- metadata


def test_metadata_contents_and_stability(tmp_path):
    s = small_scenario()
    path = tmp_path / "meta.json"
    outputs.write_metadata(path, s, extra={"note": "x"})
    meta = json.loads(path.read_text())
    assert meta["scenario"] == "out-toy"
    assert meta["mechanism"]["rule"] == "second"
    assert meta["run_seeds"] == list(s.run_seeds)
    assert meta["note"] == "x"
    # nothing volatile: no timestamps, hostnames, or paths
    blob = path.read_text().lower()
    for banned in ("time", "date", "host", "cwd", "path"):
        assert banned not in blob
