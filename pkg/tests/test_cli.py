import csv
import subprocess
import sys

import pytest

from armalign import cli
from armalign.cli import EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main
from armalign.jacobian import SolverDivergedError
from armalign.metrics import TIMING_COLUMNS
from armalign.session import read_session


def read_csv(path, drop=()):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    rows = list(csv.DictReader(lines[1:]))
    return [{k: v for k, v in r.items() if not any(k.startswith(d) for d in drop)} for r in rows]


def test_poses_deterministic(tmp_path):
    a, b = tmp_path / "a.avtr", tmp_path / "b.avtr"
    assert main(["poses", "--out", str(a)]) == EXIT_OK
    assert main(["poses", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rate, frames = read_session(a)
    assert len(frames) == 12


def test_therapy_frame_count(tmp_path):
    p = tmp_path / "t.avtr"
    assert main(["therapy", "--out", str(p)]) == EXIT_OK
    rate, frames = read_session(p)
    assert rate == 100.0 and len(frames) == 2001


def test_run_catalog_onia_is_exact(tmp_path, capsys):
    f = tmp_path / "f.csv"
    assert main(["run", "--solver", "onia", "--input", "catalog", "--frames-csv", str(f), "--no-overlay"]) == EXIT_OK
    rows = read_csv(f)
    assert len(rows) == 24
    assert all(float(r["dx_e"]) < 1e-9 and float(r["dx_w"]) < 1e-9 for r in rows)
    assert "onia" in capsys.readouterr().out


def test_run_all_on_short_therapy(tmp_path):
    t = tmp_path / "t.avtr"
    main(["therapy", "--duration", "1", "--out", str(t)])
    s = tmp_path / "s.csv"
    assert main(["run", "--input", str(t), "--summary-csv", str(s), "--overlay-stride", "25"]) == EXIT_OK
    rows = read_csv(s)
    assert [r["solver"] for r in rows] == ["onia", "jacobian", "fabrik"]
    times = {r["solver"]: float(r["solve_time_us_median"]) for r in rows}
    assert times["onia"] == min(times.values())
    assert all(r["n"] == "202" for r in rows)


def test_csv_outputs_identical_across_runs(tmp_path):
    outs = []
    for k in range(2):
        f, s = tmp_path / f"f{k}.csv", tmp_path / f"s{k}.csv"
        assert main(["run", "--input", "catalog", "--frames-csv", str(f), "--summary-csv", str(s),
                     "--width", "128", "--height", "128"]) == EXIT_OK
        outs.append((read_csv(f, TIMING_COLUMNS), read_csv(s, TIMING_COLUMNS)))
    assert outs[0] == outs[1]
    assert len(outs[0][0]) == 72


def test_missing_input_file(tmp_path, capsys):
    missing = tmp_path / "nope.avtr"
    assert main(["run", "--input", str(missing)]) == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_missing_config_and_bad_values(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "c.cfg"), "poses", "--out", str(tmp_path / "p")]) == EXIT_USAGE
    assert "config file not found" in capsys.readouterr().err
    assert main(["run", "--solver", "bogus"]) == EXIT_USAGE
    assert main(["run", "--set", "onia.nothing=1"]) == EXIT_USAGE
    assert main(["run", "--set", "novalue"]) == EXIT_USAGE


def test_divergence_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverDivergedError("non-finite DLS step")
    monkeypatch.setattr(cli, "replay", boom)
    assert main(["run", "--solver", "jacobian"]) == EXIT_DIVERGED
    assert "diverged" in capsys.readouterr().err


def test_overrides_reach_config(monkeypatch, tmp_path):
    seen = {}

    def fake(frames, names, cfg, opts):
        seen.update(cfg.values, stride=opts.overlay_stride, overlay=opts.overlay)
        return []
    monkeypatch.setattr(cli, "replay", fake)
    monkeypatch.setattr(cli, "_print_summary", lambda recs: None)
    c = tmp_path / "c.cfg"
    c.write_text("onia.alpha_e = 0.1\nfabrik.n_init = 3\n")
    assert main(["--config", str(c), "run", "--alpha-e", "0.9", "--lambda", "0.5", "--set", "render.near=0.2",
                 "--no-overlay", "--overlay-stride", "4"]) == EXIT_OK
    assert seen["onia.alpha_e"] == 0.9 and seen["jacobian.lambda"] == 0.5
    assert seen["fabrik.n_init"] == 3 and seen["render.near"] == 0.2
    assert seen["stride"] == 4 and seen["overlay"] is False


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


def test_module_entry_point(tmp_path):
    p = tmp_path / "p.avtr"
    r = subprocess.run([sys.executable, "-m", "armalign", "poses", "--out", str(p)], capture_output=True)
    assert r.returncode == 0 and p.exists()
    r = subprocess.run([sys.executable, "-m", "armalign", "--version"], capture_output=True, text=True)
    assert r.stdout.startswith("armalign ")


def test_serve_and_subscribe_commands(tmp_path):
    out = tmp_path / "got.avtr"
    srv = subprocess.Popen([sys.executable, "-m", "armalign", "serve", "--session", "catalog", "--rate", "200",
                            "--bind", "127.0.0.1:0", "--wait-for", "1"], stderr=subprocess.PIPE, text=True)
    try:
        line = srv.stderr.readline()
        addr = line.split(" on ")[1].split(" at ")[0]
        assert main(["subscribe", "--addr", addr, "--out", str(out)]) == EXIT_OK
    finally:
        srv.wait(10)
    ref = tmp_path / "ref.avtr"
    main(["poses", "--out", str(ref)])
    # same frames; only the header rate differs
    assert out.read_text().splitlines()[1:] == ref.read_text().splitlines()[1:]
