import numpy as np
import pytest

from varhilbert import cli, fields, grid


def _strip_timestamp(text: str) -> str:
    return "\n".join(l for l in text.splitlines() if not l.startswith("# timestamp"))


def test_transform_zero_grid(tmp_path):
    z = grid.GridFunction.zeros(64)
    src = tmp_path / "zero.grid"
    dst = tmp_path / "out.grid"
    grid.write_grid(z, src)
    rc = cli.main(["transform", str(src), "--k0", "3", "--field", "constant:c=0", "--out", str(dst)])
    assert rc == 0
    out = grid.read_grid(dst)
    assert np.max(np.abs(out.samples)) == 0.0


def test_transform_requires_out(tmp_path):
    src = tmp_path / "f.grid"
    grid.write_grid(grid.GridFunction.zeros(64), src)
    assert cli.main(["transform", str(src), "--k0", "3"]) == 2


def test_missing_file_is_io_error(tmp_path):
    assert cli.main(["transform", str(tmp_path / "nope.grid"), "--out", "x"]) == 3


def test_bad_magic_is_io_error(tmp_path):
    bad = tmp_path / "bad.grid"
    bad.write_bytes(b"NOPE" + b"\x00" * 64)
    assert cli.main(["transform", str(bad), "--out", str(tmp_path / "o")]) == 3


def test_unknown_field_builder(tmp_path):
    rc = cli.main(["weak-l2", "--n", "32", "--k", "2", "--trials", "1", "--field", "bogus:a=1"])
    assert rc == 2


def test_weak_l2_row_accounting(tmp_path):
    out = tmp_path / "wl.csv"
    rc = cli.main([
        "weak-l2", "--n", "64", "--k", "2,3", "--trials", "4", "--seed", "7",
        "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert data[0].split(",")[:3] == ["k", "trial", "weak_ratio"]
    assert len(data) - 1 == 8  # two annuli times four trials
    summary = (tmp_path / "wl.csv.summary").read_text().splitlines()
    sdata = [l for l in summary if not l.startswith("#")]
    assert len(sdata) - 1 == 2


def test_determinism_modulo_timestamp(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    argv = ["weak-l2", "--n", "64", "--k", "2", "--trials", "3", "--seed", "11"]
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert _strip_timestamp(a.read_text()) == _strip_timestamp(b.read_text())


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n=64\nk=2\ntrials=2\nseed=3\n")
    out1 = tmp_path / "c1.csv"
    rc = cli.main(["--config", str(cfg), "weak-l2", "--out", str(out1)])
    assert rc == 0
    data = [l for l in out1.read_text().splitlines() if not l.startswith("#")]
    assert len(data) - 1 == 2
    out2 = tmp_path / "c2.csv"
    rc = cli.main(["--config", str(cfg), "weak-l2", "--trials", "1", "--out", str(out2)])
    assert rc == 0
    data = [l for l in out2.read_text().splitlines() if not l.startswith("#")]
    assert len(data) - 1 == 1


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense line\n")
    assert cli.main(["--config", str(cfg), "weak-l2", "--n", "32"]) == 2


def test_lp_rejects_small_p_for_general_fields():
    rc = cli.main([
        "lp", "--n", "64", "--k", "2", "--trials", "1", "--p", "1.5",
        "--field", "sinusoidal:a=0.009,freq=1",
    ])
    assert rc == 2


def test_lp_allows_small_p_for_one_variable(tmp_path):
    out = tmp_path / "lp.csv"
    rc = cli.main([
        "lp", "--n", "64", "--k", "2", "--trials", "2", "--p", "1.5,3",
        "--field", "onevar:a=0.009,freq=1", "--seed", "2", "--out", str(out),
    ])
    assert rc == 0
    data = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert "lp_ratio_p1.5" in data[0]


def test_reconstruction_scan(tmp_path):
    out = tmp_path / "rec.csv"
    rc = cli.main(["reconstruction", "--n", "64", "--k0", "3", "--out", str(out)])
    assert rc == 0
    data = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    errs = [float(l.split(",")[1]) for l in data[1:]]
    assert errs[-1] <= 1e-3


def test_trees_csv(tmp_path):
    out = tmp_path / "tr.csv"
    rc = cli.main(["trees", "--n", "64", "--k0", "2", "--seed", "5", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert "C_size=" in lines[0] and "C_dense=" in lines[0]
    data = [l for l in lines if not l.startswith("#")]
    assert data[0].split(",") == ["tree", "delta", "sigma", "top_area", "members", "bilinear", "ratio"]
    assert len(data) > 1


def test_linedensity_csv(tmp_path):
    out = tmp_path / "ld.csv"
    rc = cli.main([
        "linedensity", "--n", "64", "--k0", "3",
        "--field", "checkerboard:period=16,inside=-0.0625,outside=1",
        "--out", str(out),
    ])
    assert rc == 0
    head = out.read_text().splitlines()[0]
    assert "row_flagged=1" in head and "drift_ok=0" in head


def test_field_file_input(tmp_path):
    fld = fields.sinusoidal(64, 0.009, 1)
    fpath = tmp_path / "u.field"
    fields.write_field(fld, fpath)
    src = tmp_path / "f.grid"
    grid.write_grid(grid.GridFunction.zeros(64), src)
    dst = tmp_path / "o.grid"
    rc = cli.main([
        "transform", str(src), "--k0", "3", "--field-file", str(fpath), "--out", str(dst),
    ])
    assert rc == 0
