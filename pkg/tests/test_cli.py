import csv
import json
import os

import pytest

from inls.cli import main

QUINTIC = """
[problem]
d = 1
b = 0
sigma = {sigma}
lambda = -1

[grid]
n = 1024
r_max = 8

[initial]
kind = gaussian
amplitude = {amp}

[simulation]
dt = {dt}
t_end = {t_end}

[output]
directory = out
ledger = out/ledger.json
"""


def write(tmp_path, text=None, name="run.ini", **kw):
    params = dict(sigma=4, amp=0.8, dt="1e-3", t_end=0.05)
    params.update(kw)
    path = tmp_path / name
    path.write_text((text or QUINTIC).format(**params))
    return str(path)


def run(*argv):
    return main(list(argv))


def test_invalid_sigma_exits_2(tmp_path):
    assert run("exponents", "--config", write(tmp_path, sigma=-1)) == 2


def test_zero_dt_exits_2(tmp_path):
    assert run("simulate", "--config", write(tmp_path, dt=0)) == 2


def test_missing_config_exits_2(tmp_path):
    assert run("exponents", "--config", str(tmp_path / "nope.ini")) == 2


def test_classify_without_ledger_exits_5(tmp_path):
    assert run("classify", "--config", write(tmp_path)) == 5


def test_energy_critical_ground_state_exits_3(tmp_path):
    text = QUINTIC.replace("d = 1", "d = 3").replace("b = 0", "b = 1")
    assert run("groundstate", "--config", write(tmp_path, text, sigma=2)) == 3


def test_collapse_exits_10(tmp_path):
    # the collapsing core needs h = 1/256 to reach the gradient trip
    text = QUINTIC.replace("n = 1024", "n = 2048")
    cfg = write(tmp_path, text, amp=1.6, t_end=2)
    assert run("simulate", "--config", cfg) == 10
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["termination"] == "blowup_detected"
    assert summary["t_star_estimate"] < 1


def test_groundstate_then_classify(tmp_path):
    cfg = write(tmp_path, amp=0.5)
    assert run("groundstate", "--config", cfg) == 0
    assert run("classify", "--config", cfg) == 0
    verdict = json.loads((tmp_path / "out" / "verdict.json").read_text())
    assert verdict["outcome"] == "GlobalExistence"
    assert verdict["theorem"] == "1.6" and verdict["item"] == 3


def test_exponents_and_pairs_outputs(tmp_path):
    text = QUINTIC.replace("b = 0", "b = 1/2").replace("d = 1", "d = 3") + "\n[pairs]\ns = 1\n"
    cfg = write(tmp_path, text, sigma=2)
    assert run("exponents", "--config", cfg) == 0
    assert run("pairs", "--config", cfg) == 0
    rep = json.loads((tmp_path / "out" / "exponents.json").read_text())
    assert rep["regime"] == "Intercritical"
    assert "theta" in json.loads((tmp_path / "out" / "pairs.json").read_text())["selection"]


def test_outputs_are_deterministic(tmp_path):
    cfg = write(tmp_path, amp=0.9)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run("simulate", "--config", cfg, "--out", str(d)) == 0
        outs.append({f: (d / f).read_bytes() for f in sorted(os.listdir(d)) if f != "metadata.json"})
    assert outs[0] == outs[1]
    assert {"summary.json", "trace.csv"} <= set(outs[0])


SWEEP = QUINTIC + """
[sweep]
amplitudes = {amps}
sigmas = {sigmas}
solve_ground_states = true
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sweep_isolates_bad_rows(tmp_path):
    cfg = write(tmp_path, SWEEP, amps="0.5 0.9 1.2 1.5 1.8", sigmas="-1 3 4 5 6")
    assert run("sweep", "--config", cfg, "--workers", "1") == 0
    rows = read_rows(tmp_path / "out" / "sweep.csv")
    assert rows[0] == ["index", "amplitude", "sigma", "outcome", "theorem", "item", "termination", "error"]
    body = rows[1:]
    assert len(body) == 25
    bad = [r for r in body if r[7]]
    assert len(bad) == 5 and all(r[2] == "-1" and r[7].startswith("exit 2") for r in bad)
    assert all(r[3] for r in body if not r[7])
    # at fixed σ the verdict only moves from global, through uncovered, to blow-up as A grows
    rank = {"GlobalExistence": 0, "NotCovered": 1, "BlowupFinite": 2, "BlowupFiniteOrInfinite": 2}
    for sigma in ("3", "4", "5", "6"):
        seq = [rank[r[3]] for r in body if r[2] == sigma]
        assert len(seq) == 5 and seq == sorted(seq)


def test_empty_sweep_writes_header_only(tmp_path):
    cfg = write(tmp_path, SWEEP, amps="", sigmas="4")
    assert run("sweep", "--config", cfg) == 0
    assert len(read_rows(tmp_path / "out" / "sweep.csv")) == 1


def test_unknown_command_is_rejected(tmp_path):
    with pytest.raises(SystemExit):
        run("frobnicate", "--config", write(tmp_path))


def test_constants_writes_bubble_entry(tmp_path):
    text = QUINTIC.replace("d = 1", "d = 3").replace("b = 0", "b = 1").replace("r_max = 8", "r_max = 64")
    cfg = write(tmp_path, text, sigma=2)
    assert run("constants", "--config", cfg) == 0
    ledger = json.loads((tmp_path / "out" / "ledger.json").read_text())
    entry = ledger["3,1,2"]["aubin_talenti"]
    assert entry["energy_W"] / entry["kinetic_W"] == pytest.approx(0.25, rel=1e-10)


def test_snapshots_round_trip_through_initial_file(tmp_path):
    from inls.radial import load_snapshot
    text = QUINTIC + "snapshots = true\n"
    text = text.replace("t_end = {t_end}", "t_end = {t_end}\nsnapshot_stride = 10")
    cfg = write(tmp_path, text, amp=0.7)
    assert run("simulate", "--config", cfg) == 0
    snaps = sorted((tmp_path / "out" / "snapshots").iterdir())
    assert len(snaps) == 5
    last = load_snapshot(snaps[-1])
    follow = QUINTIC.replace("kind = gaussian", f"kind = file\npath = {snaps[-1]}")
    cfg2 = write(tmp_path, follow, name="resume.ini", t_end=0.01)
    assert run("simulate", "--config", cfg2, "--out", str(tmp_path / "resume")) == 0
    assert last.grid.n == 1024
