"""Command-line interface: exit codes, file outputs, printed numbers."""

import shutil
import subprocess

import numpy as np
import pytest
import yaml

from auctionsim import _rng, outputs
from auctionsim.cli import main


TOY = {
    "name": "cli-toy",
    "queries": ["q"],
    "bidders": [{
        "copies": 2,
        "types": ["lo", "hi"],
        "type_dist": [0.5, 0.5],
        "values": [0.4, 1.0],
        "ctrs": 1.0,
    }],
    "bid_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
    "mechanism": "second",
    "learner": {"algorithm": "hedge"},
    "horizon": 2000,
    "runs": 2,
    "master_seed": 19,
}


@pytest.fixture
def toy_yaml(tmp_path):
    path = tmp_path / "toy.yaml"
    path.write_text(yaml.safe_dump(TOY))
    return str(path)


# --------------------------------------------------------------- run


def test_run_writes_outputs_and_prints_recomputable_mean(toy_yaml, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", toy_yaml, "--out", str(out)]) == 0
    rows = outputs.read_rows(out / "revenues.csv")
    assert len(rows) == 2
    mean = float(np.mean([float(r["mean_revenue"]) for r in rows]))
    printed = capsys.readouterr().out
    assert f"mean revenue {mean!r}" in printed
    assert (out / "bids.csv").exists()
    assert (out / "metadata.json").exists()
    assert not (out / "trace.csv").exists()


def test_run_trace_flag_writes_trace(toy_yaml, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", toy_yaml, "--out", str(out), "--trace"]) == 0
    rows = outputs.read_rows(out / "trace.csv")
    assert len(rows) == 2 * 200  # runs x window


def test_run_mechanism_override(toy_yaml, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", toy_yaml, "--out", str(out),
                 "--mechanism", "soft:0.4"]) == 0
    rows = outputs.read_rows(out / "revenues.csv")
    assert all(r["mechanism"] == "soft" and float(r["floor"]) == 0.4 for r in rows)


def test_run_seed_rederives_run_seeds(toy_yaml, tmp_path):
    import json
    out = tmp_path / "out"
    assert main(["run", "--scenario", toy_yaml, "--out", str(out),
                 "--seed", "7", "--runs", "3"]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["run_seeds"] == [int(s) for s in _rng.run_seeds_from_master(7, 3)]
    assert meta["env_seed"] == int(_rng.env_seed_from_master(7))
    assert len(outputs.read_rows(out / "revenues.csv")) == 3


def test_run_reruns_byte_identically(toy_yaml, tmp_path):
    for tag in ("a", "b"):
        assert main(["run", "--scenario", toy_yaml,
                     "--out", str(tmp_path / tag), "--trace"]) == 0
    for name in ("revenues.csv", "bids.csv", "trace.csv", "metadata.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_run_more_runs_than_seeds_needs_seed_flag(toy_yaml, tmp_path, capsys):
    code = main(["run", "--scenario", toy_yaml, "--out", str(tmp_path / "o"),
                 "--runs", "5"])
    assert code == 1
    assert "--seed" in capsys.readouterr().err


# ------------------------------------------------------- exit codes


def test_invalid_distribution_exits_one(tmp_path, capsys):
    bad = dict(TOY, bidders=[dict(TOY["bidders"][0], type_dist=[0.7, 0.7])])
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(bad))
    code = main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "type_dist" in err
    assert "not normalized" in err


def test_unparseable_yaml_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("name: [unclosed\n")
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "invalid YAML" in capsys.readouterr().err


def test_missing_scenario_exits_two(tmp_path, capsys):
    code = main(["run", "--scenario", str(tmp_path / "nope.yaml"),
                 "--out", str(tmp_path / "o")])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_unwritable_output_exits_two(toy_yaml, tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("a regular file\n")
    code = main(["run", "--scenario", toy_yaml,
                 "--out", str(blocker / "sub")])  # path through a file
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


# -------------------------------------------------------------- sweep


def test_sweep_writes_both_rule_kinds(toy_yaml, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sweep", "--scenario", toy_yaml, "--out", str(out),
                 "--sweep-values", "0,0.4"]) == 0
    rows = outputs.read_rows(out / "sweep.csv")
    assert [(r["mechanism"], float(r["floor"])) for r in rows] == [
        ("soft", 0.0), ("soft", 0.4), ("reserve", 0.0), ("reserve", 0.4)]
    # zero floor: soft and reserve coincide run for run
    assert rows[0]["mean_revenue"] == rows[2]["mean_revenue"]
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_sweep_single_kind(toy_yaml, tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--scenario", toy_yaml, "--out", str(out),
                 "--sweep-values", "0.2", "--mechanism", "soft"]) == 0
    rows = outputs.read_rows(out / "sweep.csv")
    assert [r["mechanism"] for r in rows] == ["soft"]


def test_sweep_rejects_bad_values(toy_yaml, tmp_path, capsys):
    code = main(["sweep", "--scenario", toy_yaml, "--out", str(tmp_path / "o"),
                 "--sweep-values", "0.2,x"])
    assert code == 1
    assert "sweep-values" in capsys.readouterr().err


def test_sweep_rejects_unknown_rule_kind(toy_yaml, tmp_path, capsys):
    code = main(["sweep", "--scenario", toy_yaml, "--out", str(tmp_path / "o"),
                 "--sweep-values", "0.2", "--mechanism", "soft:0.3"])
    assert code == 1
    assert "rule kind" in capsys.readouterr().err


# -------------------------------------------------------------- infer


def write_percentile_csv(path, bids):
    lines = ["percentile,observed_bid"]
    for p, b in zip((10, 25, 40, 50, 60, 75, 90), bids):
        lines.append(f"{p},{b}")
    path.write_text("\n".join(lines) + "\n")


def test_infer_round_trip_on_truthful_bids(tmp_path, capsys):
    bids_file = tmp_path / "observed.csv"
    write_percentile_csv(bids_file, [0.2, 0.6, 1.0, 1.2, 1.5, 1.9, 2.2])
    out = tmp_path / "out"
    assert main(["infer", "--in", str(bids_file), "--out", str(out),
                 "--mechanism", "second", "--iterations", "2", "--runs", "2"]) == 0
    printed = capsys.readouterr().out
    mae = float(printed.split("bid mae ")[1].splitlines()[0])
    assert mae < 0.05
    shading_rows = outputs.read_rows(out / "shading.csv")
    assert len(shading_rows) == 7
    inferred = [float(r["value"]) for r in shading_rows]
    assert inferred == sorted(inferred)
    assert (out / "inference.csv").exists()


def test_infer_accepts_raw_samples(tmp_path):
    rng = np.random.default_rng(2)
    samples = rng.uniform(0.1, 1.0, size=400)
    sample_file = tmp_path / "samples.txt"
    sample_file.write_text("\n".join(repr(float(x)) for x in samples) + "\n")
    out = tmp_path / "out"
    assert main(["infer", "--in", str(sample_file), "--out", str(out),
                 "--iterations", "1", "--runs", "2"]) == 0
    rows = outputs.read_rows(out / "inference.csv")
    assert len(rows) == 7  # one iteration x seven percentiles


def test_infer_flattens_unordered_percentiles(tmp_path):
    bids_file = tmp_path / "observed.csv"
    write_percentile_csv(bids_file, [0.4, 0.3, 0.6, 0.8, 1.0, 1.2, 1.4])
    with pytest.warns(UserWarning, match="flattening"):
        code = main(["infer", "--in", str(bids_file), "--out", str(tmp_path / "o"),
                     "--iterations", "1", "--runs", "2"])
    assert code == 0


def test_infer_percentile_file_with_wrong_row_count(tmp_path, capsys):
    path = tmp_path / "short.csv"
    path.write_text("percentile,observed_bid\n50,0.5\n")
    code = main(["infer", "--in", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "percentile rows" in capsys.readouterr().err


def test_infer_empty_input_exits_one(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code = main(["infer", "--in", str(empty), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "empty input" in capsys.readouterr().err


def test_infer_garbage_input_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("zero point five\n")
    code = main(["infer", "--in", str(bad), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "unparseable" in capsys.readouterr().err


# ---------------------------------------------------------------- bce


def test_bce_from_traced_run(toy_yaml, tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert main(["run", "--scenario", toy_yaml, "--out", str(run_dir),
                 "--trace"]) == 0
    capsys.readouterr()
    out = tmp_path / "bce"
    assert main(["bce", "--scenario", toy_yaml, "--run-dir", str(run_dir),
                 "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    eps = float(printed.strip().splitlines()[-1].split("epsilon ")[1])
    assert eps >= 0.0
    rows = outputs.read_rows(out / "bce.csv")
    assert len(rows) == 4  # two bidders x two types, all observed at T=2000
    assert {r["type"] for r in rows} == {"lo", "hi"}


def test_bce_without_trace_exits_one(toy_yaml, tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert main(["run", "--scenario", toy_yaml, "--out", str(run_dir)]) == 0
    capsys.readouterr()
    code = main(["bce", "--scenario", toy_yaml, "--run-dir", str(run_dir),
                 "--out", str(tmp_path / "o")])
    assert code == 1
    assert "no trace.csv" in capsys.readouterr().err


# ------------------------------------------------------ entry point


def test_console_script_end_to_end(toy_yaml, tmp_path):
    exe = shutil.which("auctionsim")
    assert exe, "console script not installed"
    proc = subprocess.run(
        [exe, "run", "--scenario", toy_yaml, "--out", str(tmp_path / "out"),
         "--runs", "1"],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "mean revenue" in proc.stdout
    assert (tmp_path / "out" / "revenues.csv").exists()
