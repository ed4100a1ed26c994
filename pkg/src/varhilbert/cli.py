"""Experiment orchestration and CSV emission; the process entry point.

Subcommands: ``selftest``, ``transform``, ``weak-l2``, ``lp``,
``reconstruction``, ``trees``, ``linedensity``. Configuration comes from
an optional key=value file plus flags, flags winning. Every CSV starts
with a comment line recording the configuration, seed and version, and a
separate timestamp comment line; with a fixed seed the remaining bytes
are reproducible run to run.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 self-test failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, fields, grid, tiles, transforms, trees

_CONFIG_KEYS = {
    "n", "k0", "r", "field", "field_file", "trials", "seed", "p", "shifts",
    "order_constant", "out", "threads", "k", "input", "eps0",
}


class ConfigError(Exception):
    pass


def _parse_field_spec(spec: str, n: int) -> fields.VectorField:
    """Builder name plus parameters: ``constant:c=0``,
    ``sinusoidal:a=0.009,freq=1``, ``shear:a=0.5``,
    ``onevar:a=0.01,freq=1``, ``checkerboard:period=16,inside=0,outside=1``."""
    name, _, rest = spec.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ConfigError(f"malformed field parameter {item!r}")
            kv[key] = float(val)
    if name == "constant":
        return fields.constant(n, kv.get("c", 0.0))
    if name == "sinusoidal":
        return fields.sinusoidal(n, kv.get("a", 0.009), int(kv.get("freq", 1)))
    if name == "shear":
        return fields.shear(n, kv.get("a", 0.5))
    if name == "onevar":
        x = np.arange(n) / n
        prof = kv.get("a", 0.01) * np.sin(2 * np.pi * kv.get("freq", 1.0) * x)
        return fields.one_variable(prof)
    if name == "checkerboard":
        period = int(kv.get("period", 16))
        u = np.full((n, n), kv.get("outside", 1.0))
        u[::period, :] = kv.get("inside", 0.0)
        return fields.raw_field(u)
    raise ConfigError(f"unknown field builder {name!r}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONFIG_KEYS:
            raise ConfigError(f"bad config line {line!r}")
        out[key] = val.strip()
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path, header: list[str], rows: list[dict], meta: str) -> None:
    lines = [f"# varhilbert {__version__} {meta}"]
    lines.append(f"# timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S')}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varhilbert", description=__doc__)
    ap.add_argument("--config", help="key=value configuration file; flags override")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--n", type=int)
        p.add_argument("--k0", type=int)
        p.add_argument("--r", type=float)
        p.add_argument("--field")
        p.add_argument("--field-file", dest="field_file")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--p")
        p.add_argument("--shifts")
        p.add_argument("--order-constant", dest="order_constant", type=float)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        return p

    add("selftest", help="run the fast property suites")
    tp = add("transform", help="apply the variational transform after an annulus projection")
    tp.add_argument("input", help="input grid file")
    wp = add("weak-l2", help="weak-(2,inf)/L2 ratio experiment across annuli")
    wp.add_argument("--k", help="comma-separated annulus indices")
    lp = add("lp", help="L^p ratio experiment")
    lp.add_argument("--k", help="comma-separated annulus indices")
    add("reconstruction", help="translation-average reconstruction scan")
    add("trees", help="tree selection, counting bounds and tree-form ratios")
    add("linedensity", help="per-row occupancy diagnostic of the exceptional set")
    return ap


def _merged(args, config: dict, key: str, cast, default):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return cast(config[key])
    return default


def _get_field(args, config, n) -> fields.VectorField:
    ff = _merged(args, config, "field_file", str, None)
    if ff is not None:
        fld = fields.from_file(ff)
        if fld.n != n:
            raise ConfigError(f"field file has n={fld.n}, expected {n}")
        return fld
    spec = _merged(args, config, "field", str, "sinusoidal:a=0.009,freq=1")
    return _parse_field_spec(spec, n)


def _cmd_selftest(args, config) -> int:
    from .selftest import run_selftest

    failures = run_selftest()
    if failures:
        for name, msg in failures:
            print(f"FAIL {name}: {msg}")
        return 4
    print("selftest: all suites green")
    return 0


def _cmd_transform(args, config) -> int:
    f = grid.read_grid(args.input)
    n = f.n
    k0 = _merged(args, config, "k0", int, 4)
    r = _merged(args, config, "r", float, 2.5)
    if r <= 2.0:
        print(f"warning: variation exponent r={r} <= 2 is outside the bounded range", file=sys.stderr)
    fld = _get_field(args, config, n)
    mask = grid.littlewood_paley(k0, n)
    pf = grid.apply_multiplier(f, mask)
    lo, hi = transforms.effective_scale_range(k0, n)
    vf = transforms.variational_transform(pf, fld, r, lo, hi)
    out = _merged(args, config, "out", str, None)
    if out is None:
        raise ConfigError("transform needs --out for the result grid")
    grid.write_grid(vf.as_grid(), out)
    return 0


def _ratio_rows(args, config, p_values):
    n = _merged(args, config, "n", int, 256)
    r = _merged(args, config, "r", float, 2.5)
    trials = _merged(args, config, "trials", int, 20)
    seed = _merged(args, config, "seed", int, 0)
    kspec = _merged(args, config, "k", str, "3,4,5,6")
    ks = [int(s) for s in kspec.split(",")]
    fld = _get_field(args, config, n)
    rows, summaries = [], []
    for k in ks:
        rep = transforms.bound_ratio_experiment(
            fld, k, trials, p_values=p_values, r=r, seed=seed + k, n=n
        )
        rows.extend(rep.rows)
        summaries.append({"k": k, **{f"median_{key}": v for key, v in rep.medians.items()}})
    return n, r, trials, seed, ks, fld, rows, summaries


def _cmd_weak_l2(args, config) -> int:
    pspec = _merged(args, config, "p", str, "2.5,3,4")
    p_values = tuple(float(s) for s in pspec.split(","))
    n, r, trials, seed, ks, fld, rows, summaries = _ratio_rows(args, config, p_values)
    header = ["k", "trial", "weak_ratio"] + [f"lp_ratio_p{p}" for p in p_values]
    out = _merged(args, config, "out", str, None)
    meta = f"subcommand=weak-l2 n={n} r={r} trials={trials} seed={seed} k={ks}"
    _write_csv(out, header, rows, meta)
    spath = None if out is None else str(out) + ".summary"
    _write_csv(
        spath,
        ["k", "median_weak_ratio"] + [f"median_lp_ratio_p{p}" for p in p_values],
        summaries,
        meta + " summary",
    )
    return 0


def _cmd_lp(args, config) -> int:
    n = _merged(args, config, "n", int, 256)
    fld = _get_field(args, config, n)
    pspec = _merged(args, config, "p", str, "2.5,3,4")
    p_values = tuple(float(s) for s in pspec.split(","))
    if any(p <= 2.0 for p in p_values) and not fld.one_variable:
        raise ConfigError("p <= 2 ratios are only meaningful for one-variable fields")
    n, r, trials, seed, ks, fld, rows, summaries = _ratio_rows(args, config, p_values)
    header = ["k", "trial", "weak_ratio"] + [f"lp_ratio_p{p}" for p in p_values]
    out = _merged(args, config, "out", str, None)
    meta = f"subcommand=lp n={n} r={r} trials={trials} seed={seed} k={ks}"
    _write_csv(out, header, rows, meta)
    return 0


def _cmd_reconstruction(args, config) -> int:
    n = _merged(args, config, "n", int, 256)
    k0 = _merged(args, config, "k0", int, 4)
    seed = _merged(args, config, "seed", int, 0)
    shifts_spec = _merged(args, config, "shifts", str, None)
    full = n >> k0
    shift_list = (
        [int(s) for s in shifts_spec.split(",")] if shifts_spec else [full // 4, full // 2, full]
    )
    rng = np.random.default_rng(seed)
    f = transforms.random_annulus_function(n, k0, rng)
    om = min(tiles.slope_intervals(k0, k0), key=lambda o: abs(o.center))
    direct = grid.apply_multiplier(f, tiles.wavelet_profile(om, k0, n).mask)
    dnorm = float(np.linalg.norm(direct.samples))
    rows = []
    for s in shift_list:
        rec = tiles.reconstruct(f, om, s)
        err = float(np.linalg.norm(rec.samples - direct.samples)) / dnorm
        rows.append({"shifts": s, "rel_l2_error": err})
    out = _merged(args, config, "out", str, None)
    _write_csv(out, ["shifts", "rel_l2_error"],
               rows, f"subcommand=reconstruction n={n} k0={k0} seed={seed} omega_index={om.index}")
    return 0


def _cmd_trees(args, config) -> int:
    n = _merged(args, config, "n", int, 128)
    k0 = _merged(args, config, "k0", int, 3)
    r = _merged(args, config, "r", float, 2.5)
    seed = _merged(args, config, "seed", int, 0)
    order_c = _merged(args, config, "order_constant", float, 10.0)
    fld = _get_field(args, config, n)
    rng = np.random.default_rng(seed)
    f = transforms.random_annulus_function(n, k0, rng)
    lo, hi = transforms.effective_scale_range(k0, n)
    vf = transforms.variational_transform(f, fld, r, lo, hi, method="spectral")
    lam = float(np.quantile(vf.values, 0.95))
    E = vf.values > lam
    ts = tiles.TileSet(k0, n)
    fams = trees.select_trees(ts.tiles, f, E, fld, order_constant=order_c)
    rows = []
    for i, t in enumerate(fams.trees):
        form = trees.tree_bilinear_form(t, f, E, fld, r)
        rows.append(
            {
                "tree": i,
                "delta": t.delta,
                "sigma": t.sigma,
                "top_area": t.top_area,
                "members": len(t.members),
                "bilinear": form["value"],
                "ratio": form["ratio"],
            }
        )
    out = _merged(args, config, "out", str, None)
    meta = (
        f"subcommand=trees n={n} k0={k0} r={r} seed={seed} order_constant={order_c} "
        f"C_size={fams.c_size:.17g} C_dense={fams.c_dense:.17g} E_measure={fams.e_measure:.17g}"
    )
    _write_csv(out, ["tree", "delta", "sigma", "top_area", "members", "bilinear", "ratio"], rows, meta)
    return 0


def _cmd_linedensity(args, config) -> int:
    n = _merged(args, config, "n", int, 128)
    k0 = _merged(args, config, "k0", int, 3)
    fld = _get_field(args, config, n)
    om = min(tiles.slope_intervals(k0, 0), key=lambda o: abs(o.center))
    top = tiles.Tile(om, 0, (1 << k0) // 2)
    E = np.ones((n, n), dtype=bool)
    d = trees.density(top, E, fld)
    tree = trees.Tree(top=top, members=(top,), delta=max(d, 1e-30), sigma=1.0,
                      max_dense_bar=d, size_measured=0.0)
    rep = trees.line_density_diagnostic(tree, E, fld)
    rows = [
        {
            "shell": c["shell"],
            "rows": c["rows"],
            "cols": c["cols"],
            "area_frac": c["area_frac"],
            "row_max": c["row_max"],
            "row_mean": c["row_mean"],
            "area_ok": int(c["area_ok"]),
            "row_ok": int(c["row_ok"]),
        }
        for c in rep.cells
    ]
    out = _merged(args, config, "out", str, None)
    meta = (
        f"subcommand=linedensity n={n} k0={k0} delta={rep.delta:.17g} "
        f"drift_ok={int(rep.drift_ok)} row_flagged={int(rep.row_flagged)} "
        f"area_flagged={int(rep.area_flagged)}"
    )
    _write_csv(out, ["shell", "rows", "cols", "area_frac", "row_max", "row_mean", "area_ok", "row_ok"], rows, meta)
    return 0


_COMMANDS = {
    "selftest": _cmd_selftest,
    "transform": _cmd_transform,
    "weak-l2": _cmd_weak_l2,
    "lp": _cmd_lp,
    "reconstruction": _cmd_reconstruction,
    "trees": _cmd_trees,
    "linedensity": _cmd_linedensity,
}


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        config = _load_config(args.config)
        threads = _merged(args, config, "threads", int, None)
        if threads is not None:
            import numba

            numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, grid.GridFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
