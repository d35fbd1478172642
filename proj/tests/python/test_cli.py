import os
import subprocess

import pytest

import etsbm

CLI = os.environ.get("ETSBM_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="ETSBM_CLI not set")


def run(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        r = run("simulate", "--scenario", "C", "--difficulty", "easy", "--nodes", 100, "--seed", 1,
                "--out", tmp_path / f"{name}.txt", "--truth", tmp_path / f"{name}.truth")
        assert r.returncode == 0, r.stderr
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert (tmp_path / "a.truth").read_bytes() == (tmp_path / "b.truth").read_bytes()


def test_usage_errors(tmp_path):
    r = run("simulate", "--scenario", "X", "--out", tmp_path / "x.txt")
    assert r.returncode == 1
    assert "Usage" in r.stderr
    assert run("frobnicate").returncode == 1
    data = tmp_path / "d.txt"
    run("simulate", "--scenario", "A", "--nodes", 20, "--out", data)
    assert run("fit", "--data", data, "--q", 0, "--out", tmp_path / "f.json").returncode == 1
    assert run("select", "--data", tmp_path / "missing.txt").returncode == 2
    r = run("benchmark", "--models", "etsbm,nope", "--replicates", 1)
    assert r.returncode == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# shared settings\nscenario = A\nnodes = 25\n")
    out = tmp_path / "d.txt"
    assert run("simulate", "--config", cfg, "--nodes", 15, "--out", out).returncode == 0
    assert out.read_text().startswith("M 15 ")
    cfg.write_text("unknown-key = 3\n")
    assert run("simulate", "--config", cfg, "--out", out).returncode == 1


def test_fit_separates_models_on_scenario_b(tmp_path):
    data, truth = tmp_path / "b.txt", tmp_path / "b.truth"
    assert run("simulate", "--scenario", "B", "--nodes", 100, "--seed", 5, "--out", data,
               "--truth", truth).returncode == 0
    scores = {}
    for model in ("sbm", "etsbm"):
        out = tmp_path / f"{model}.json"
        r = run("fit", "--data", data, "--q", 2, "--k", 3, "--model", model, "--truth", truth,
                "--seed", 2, "--out", out)
        assert r.returncode == 0, r.stderr
        line = next(l for l in r.stdout.splitlines() if l.startswith("node_ari"))
        scores[model] = float(line.split()[1])
    assert scores["sbm"] < 0.1
    assert scores["etsbm"] >= 0.9

    dot = tmp_path / "meta.dot"
    r = run("export-metagraph", "--fit", tmp_path / "etsbm.json", "--data", data, "--out", dot)
    assert r.returncode == 0, r.stderr
    assert dot.read_text().startswith("digraph meta {")
    assert (tmp_path / "meta.csv").exists()
    assert len((tmp_path / "meta.topics.txt").read_text().splitlines()) == 3


def test_select_single_q(tmp_path):
    data = tmp_path / "a.txt"
    run("simulate", "--scenario", "A", "--nodes", 30, "--out", data)
    report = tmp_path / "sel.csv"
    r = run("select", "--data", data, "--q-range", "3:3", "--restarts", 2, "--hidden", 16,
            "--max-iter", 10, "--etm-min-steps", 50, "--etm-restarts", 1, "--out", report)
    assert r.returncode == 0, r.stderr
    text = report.read_text()
    assert text.startswith("# chosen_q=3\n")
    assert len(text.strip().splitlines()) == 2 + 2


def test_benchmark_single_replicate_has_zero_sd():
    r = run("benchmark", "--scenario", "A", "--difficulty", "easy", "--nodes", 30, "--replicates", 1,
            "--models", "sbm", "--max-iter", 20)
    assert r.returncode == 0, r.stderr
    row = r.stdout.strip().splitlines()[-1].split()
    assert row[:3] == ["A", "easy", "sbm"]
    assert row[5].endswith("±0.00")


def test_check_and_negative_control():
    ok = run("check")
    assert ok.returncode == 0
    assert "tolerance" in ok.stdout
    bad = run("check", "--corrupt")
    assert bad.returncode == 2
    assert "FAIL" in bad.stdout
