import json
import subprocess
import sys

import pytest

from superpoint import probmodel
from superpoint.cli import build_parser, _config, main
from superpoint.config import PRESETS, WORKERS_ENV, RunConfig
from superpoint.sea import CandidateList, ReportEntry, SEArray, WindowReport
from superpoint.trace import (
    PlantedHost,
    PlantSpec,
    WindowConfig,
    normalize_direction,
    read_trace,
    slice_partition,
)

SMALL = ["--theta", "64", "--v", "1024", "--g-prime", "256", "--slice-seconds", "10",
         "--k", "2", "--z", "4", "--seed", "5"]


@pytest.fixture(scope="module")
def trace_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    spec = PlantSpec(
        planted=[PlantedHost(300, period=2), PlantedHost(90), PlantedHost(40, start=2)],
        n_a_hosts=300, n_b_hosts=20000, pairs_per_slice=3000, pool_cap=32,
        slice_seconds=10, n_slices=5, seed=3,
    )
    (d / "spec.json").write_text(spec.to_json())
    assert main(["generate", str(d / "spec.json"), str(d / "trace.bin")]) == 0
    return d / "trace.bin"


def run_detect(trace, out, *extra):
    assert main(["detect", str(trace), str(out), *SMALL, *extra]) == 0
    return out.read_text()


def test_detect_writes_one_report_per_window(trace_file, tmp_path):
    lines = run_detect(trace_file, tmp_path / "r.jsonl").splitlines()
    assert len(lines) == 4  # 5 slices, k=2
    reps = [json.loads(x) for x in lines]
    assert [r["window"] for r in reps] == [{"t": t, "k": 2} for t in range(4)]
    assert all(r["schema"] == "superpoint.window-report/1" for r in reps)
    assert any(e["super"] for r in reps for e in r["entries"])


def test_detect_matches_api_replay(trace_file, tmp_path):
    cli_lines = run_detect(trace_file, tmp_path / "r.jsonl").splitlines()
    cfg = RunConfig(theta=64, v=1024, g_prime=256, slice_seconds=10, k=2, z=4, seed=5)
    sea = SEArray(u=4, v=1024, g=8, g_prime=256, z=4, k=2, theta=64, seed=5)
    csip = CandidateList()
    pairs = normalize_direction(read_trace(trace_file), cfg.a_network)
    replay = []
    for s, sl in slice_partition(pairs, WindowConfig(10, 2, 4)):
        for a, b in zip(sl.aip.tolist(), sl.bip.tolist()):
            sea.scan_ip_pair(csip, a, b)
        if s >= 1:
            replay.append(sea.report_window(csip, t=s - 1).to_json())
        csip = sea.slide(csip)
    # per-pair and batch scanning agree up to SI-collision tie-breaks; v=1024 keeps
    # four-row collisions between this trace's candidates out of reach
    assert replay == cli_lines


def test_discrete_preset(trace_file, tmp_path):
    out = tmp_path / "d.jsonl"
    assert main(["detect", str(trace_file), str(out), "--preset", "discrete",
                 "--slice-seconds", "10", "--theta", "64", "--v", "1024"]) == 0
    reps = [json.loads(x) for x in out.read_text().splitlines()]
    assert [r["window"]["t"] for r in reps] == list(range(5))
    assert all(r["window"]["k"] == 1 for r in reps)


def test_empty_trace(tmp_path):
    (tmp_path / "e.csv").write_text("")
    assert main(["detect", str(tmp_path / "e.csv"), str(tmp_path / "r.jsonl")]) == 0
    assert (tmp_path / "r.jsonl").read_text() == ""


def test_workers_and_env_give_identical_reports(trace_file, tmp_path, monkeypatch):
    one = run_detect(trace_file, tmp_path / "1.jsonl", "--workers", "1")
    four = run_detect(trace_file, tmp_path / "4.jsonl", "--workers", "4")
    monkeypatch.setenv(WORKERS_ENV, "3")
    env = run_detect(trace_file, tmp_path / "e.jsonl")
    assert one == four == env


def test_env_worker_override_is_read(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "6")
    args = build_parser().parse_args(["detect", "t", "r"])
    assert _config(args).workers == 6
    args = build_parser().parse_args(["detect", "t", "r", "--workers", "2"])
    assert _config(args).workers == 2


def test_timings_sidecar(trace_file, tmp_path):
    run_detect(trace_file, tmp_path / "r.jsonl", "--timings", str(tmp_path / "t.csv"))
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "window_t,c_u,c_e,candidates" and len(rows) == 5


def test_oracle_then_evaluate(trace_file, tmp_path, capsys):
    run_detect(trace_file, tmp_path / "r.jsonl")
    assert main(["oracle", str(trace_file), str(tmp_path / "truth.csv"), *SMALL]) == 0
    truth = (tmp_path / "truth.csv").read_text().splitlines()
    assert truth == sorted(truth, key=lambda x: (int(x.split(",")[0]), x))
    assert all(int(x.split(",")[2]) >= 64 for x in truth)
    assert main(["evaluate", str(tmp_path / "r.jsonl"), str(tmp_path / "truth.csv"),
                 "--theta", "64", "--csv", str(tmp_path / "m.csv")]) == 0
    assert "mean" in capsys.readouterr().out
    assert (tmp_path / "m.csv").read_text().startswith("window_t,n,n_detected")


def test_oracle_pair_guard(trace_file, tmp_path):
    assert main(["oracle", str(trace_file), str(tmp_path / "t.csv"), *SMALL,
                 "--oracle-pair-limit", "10"]) == 2


A, B, C, D, E = "10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4", "10.0.0.5"


def _entry(host, est, sup=True):
    from superpoint.addr import ip_to_int

    return ReportEntry(ip_to_int(host), est, 100, sup)


def _write(tmp_path, reports, truth):
    r, t = tmp_path / "r.jsonl", tmp_path / "t.csv"
    r.write_text("".join(rep.to_json() + "\n" for rep in reports))
    t.write_text("".join(f"{w},{h},{c}\n" for w, h, c in truth))
    return str(r), str(t)


def test_evaluate_identical_is_zero(tmp_path):
    reps = [WindowReport(0, 1, [_entry(A, 2000.0), _entry(B, 1500.0)])]
    r, t = _write(tmp_path, reps, [(0, A, 2000), (0, B, 1500)])
    assert main(["evaluate", r, t, "--csv", str(tmp_path / "m.csv")]) == 0
    row = (tmp_path / "m.csv").read_text().splitlines()[1].split(",")
    assert row == ["0", "2", "2", "0", "0", "0.000000", "0.000000", "0.000000", "0.000000"]


def test_evaluate_three_window_fixture(tmp_path):
    # window 0: truth {A,B,C}, detected {A,B}        -> fpr 0,   fnr 1/3
    # window 1: truth {A},     detected {A,D}        -> fpr 1,   fnr 0
    # window 2: truth {A,B} (E=900 < theta), det {A,B,E} -> fpr 1/2, fnr 0
    reps = [
        WindowReport(0, 1, [_entry(A, 2100.0), _entry(B, 1500.0), _entry(C, 800.0, False)]),
        WindowReport(1, 1, [_entry(A, 1200.0), _entry(D, 1100.0)]),
        WindowReport(2, 1, [_entry(A, 1800.0), _entry(B, 1900.0), _entry(E, 1030.0)]),
    ]
    truth = [(0, A, 2000), (0, B, 1500), (0, C, 1100), (1, A, 1200),
             (2, A, 2000), (2, B, 2000), (2, E, 900)]
    r, t = _write(tmp_path, reps, truth)
    assert main(["evaluate", r, t, "--csv", str(tmp_path / "m.csv")]) == 0
    rows = [x.split(",") for x in (tmp_path / "m.csv").read_text().splitlines()[1:]]
    got = {x[0]: [float(v) for v in x[5:]] for x in rows}
    assert got["0"][:3] == pytest.approx([0, 1 / 3, 1 / 3], abs=1e-6)
    assert got["1"][:3] == pytest.approx([1, 0, 1], abs=1e-6)
    assert got["2"][:3] == pytest.approx([0.5, 0, 0.5], abs=1e-6)
    assert got["mean"][:3] == pytest.approx([0.5, 1 / 9, 11 / 18], abs=1e-6)
    # window 0 errors: A 0.05, B 0, C 800 vs 1100 -> 3/11; median 0.05
    assert got["0"][3] == pytest.approx(0.05, abs=1e-6)
    assert got["2"][3] == pytest.approx(0.075, abs=1e-6)


def test_evaluate_missing_window(tmp_path, capsys):
    reps = [WindowReport(0, 1, [_entry(A, 2000.0)])]
    r, t = _write(tmp_path, reps, [(0, A, 2000), (1, A, 2000)])
    assert main(["evaluate", r, t]) == 3
    assert "unmatched window" in capsys.readouterr().err


def test_evaluate_bad_files(tmp_path):
    (tmp_path / "r.jsonl").write_text("{not json\n")
    (tmp_path / "t.csv").write_text("0,10.0.0.1,5\n")
    assert main(["evaluate", str(tmp_path / "r.jsonl"), str(tmp_path / "t.csv")]) == 3
    assert main(["evaluate", str(tmp_path / "missing"), str(tmp_path / "t.csv")]) == 3


def test_prob_table(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["prob", "--n-min", "1024", "--n-max", "2048", "--step", "1024", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,detection_probability"
    n, p = lines[2].split(",")
    assert int(n) == 2048
    assert float(p) == pytest.approx(probmodel.pr_weight_at_least(2048, 8, 7, 3), rel=1e-11)


def test_bench(trace_file, capsys):
    assert main(["bench", str(trace_file), *SMALL]) == 0
    captured = capsys.readouterr()
    result = json.loads(captured.out)
    assert result["pairs"] > 0 and result["slices"] == 5
    for key in ("pairs_per_second", "mean_c_u", "mean_c_e"):
        assert result[key] > 0
    assert "pairs/sec" in captured.err


@pytest.mark.parametrize("flags", [
    ["--k", "2", "--z", "1"],
    ["--v", "1000"],
    ["--z", "20"],
    ["--a-network", "10.0.0.0/40"],
    ["--workers", "0"],
])
def test_config_errors_exit_2(trace_file, tmp_path, flags):
    assert main(["detect", str(trace_file), str(tmp_path / "r"), *flags]) == 2


def test_config_file_and_errors(trace_file, tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "sliding", "k": 2, "z": 4, "theta": 64, "v": 1024}))
    args = build_parser().parse_args(["detect", "t", "r", "--config", str(cfg), "--k", "3"])
    c = _config(args)
    assert (c.k, c.z, c.slice_seconds, c.theta) == (3, 4, PRESETS["sliding"]["slice_seconds"], 64)
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["detect", str(trace_file), str(tmp_path / "r"), "--config", str(cfg)]) == 2
    cfg.write_text("{")
    assert main(["detect", str(trace_file), str(tmp_path / "r"), "--config", str(cfg)]) == 2
    monkeypatch.setenv(WORKERS_ENV, "many")
    assert main(["detect", str(trace_file), str(tmp_path / "r")]) == 2


def test_input_errors_exit_3(tmp_path):
    assert main(["detect", str(tmp_path / "nope.bin"), str(tmp_path / "r")]) == 3
    (tmp_path / "bad.csv").write_text("1,10.0.0.1,8.8.8.8\n0,10.0.0.1,8.8.8.8\n")
    assert main(["detect", str(tmp_path / "bad.csv"), str(tmp_path / "r")]) == 3


def test_generate_bad_spec(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps({"planted": [{"cardinality": 10**7}], "n_b_hosts": 100,
                                                 "pool_cap": 10}))
    assert main(["generate", str(tmp_path / "s.json"), str(tmp_path / "o.bin")]) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "superpoint", "prob", "--n-min", "128",
                          "--n-max", "128"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("n,detection_probability\n128,")
