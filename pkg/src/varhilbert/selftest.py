"""Fast in-process property checks behind the ``selftest`` subcommand.

A trimmed version of the pytest suite that runs in well under a minute:
each check returns silently or raises, and the runner collects failures.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from . import bumps, fields, grid, tiles, transforms, trees, varnorm


def _check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def check_bumps():
    t = np.linspace(1e-3, 10.0, 10001)
    v = bumps.eval_psi(0, t)
    _check(np.all(v[(t >= 1.25) & (t <= 1.75)] == 1.0), "plateau broken")
    _check(np.all(v[(t < 0.5) | (t > 2.5)] == 0.0), "support broken")
    tt = np.geomspace(1e-3, 1e3, 200)
    _check(np.max(np.abs(bumps.psi_partition_check(tt, 30) - 1.0)) <= 1e-10, "partition of unity")
    deltas = [bumps.delta_value(5, l) for l in (0, 2, 5)]
    _check(max(abs(d - deltas[0]) for d in deltas) <= 1e-8, "delta depends on l")
    xs = np.linspace(-1, 1, 101)
    _check(np.max(np.abs(bumps.gamma_l(xs, 2, 4) - deltas[0])) <= 1e-8, "gamma not constant")


def check_varnorm():
    rng = np.random.default_rng(123)
    for _ in range(100):
        seq = rng.standard_normal(int(rng.integers(2, 11)))
        r = float(rng.choice([2.1, 2.5, 3.0]))
        a = varnorm.variation_norm(seq, r).value
        b = varnorm.brute_force_variation(seq, r)
        _check(abs(a - b) <= 1e-12, f"DP vs brute force: {a} vs {b}")
        co = varnorm.linearize(seq, r)
        if co.size:
            rp = r / (r - 1.0)
            _check(abs(np.sum(np.abs(co) ** rp) - 1.0) <= 1e-10, "dual normalization")


def check_grid():
    rng = np.random.default_rng(5)
    n = 64
    f = grid.GridFunction(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    par = abs(grid.lp_norm(f, 2.0) ** 2 - float(np.sum(np.abs(f.spectrum) ** 2)))
    _check(par <= 1e-10 * grid.lp_norm(f, 2.0) ** 2, "Parseval")
    # weak norm equals the brute-force sup over all thresholds
    g = np.abs(f.samples).ravel()
    brute = max(lam * np.sqrt((g > lam).sum() / n**2) for lam in g * (1 - 1e-12))
    _check(abs(grid.weak_l2_norm(f) - brute) <= 1e-10, "weak norm")
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "f.grid")
        grid.write_grid(f, path)
        g2 = grid.read_grid(path)
        _check(np.array_equal(g2.samples, f.samples), "grid io roundtrip")


def check_fields():
    fld = fields.sinusoidal(64, 0.5, 1)
    _check(fld.amplitude <= fields.AMPLITUDE_BOUND + 1e-15, "amplitude bound")
    again, scale = fields.normalize(fld)
    _check(scale == 1.0 and np.array_equal(again.u, fld.u), "normalize not idempotent")


def check_transforms():
    n = 64
    for l in (0, 2):
        kern = transforms.directional_kernel(l, n)
        t, w = kern.quadrature(8)
        _check(abs(np.sum(w)) <= 1e-8, f"kernel mean zero at l={l}")
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x)
    f = grid.GridFunction(np.exp(2j * np.pi * (6 * X1 + 2 * X2)))
    fld = fields.constant(n, 0.0)
    H = transforms.directional_piece(f, fld, 2)
    expected = bumps.eval_psi(2, 6.0)
    _check(np.max(np.abs(H.samples - expected * f.samples)) <= 1e-6, "multiplier check")


def check_tiles():
    n, k0 = 64, 2
    om = tiles.slope_intervals(k0, 1)[3]
    t = tiles.Tile(om, 1, 2)
    phi = tiles.tile_wavelet(t, n)
    _check(abs(grid.lp_norm(phi, 2.0) - 1.0) <= 1e-10, "wavelet norm")
    _check(abs(tiles.coefficient(phi, t) - 1.0) <= 1e-10, "self coefficient")
    rng = np.random.default_rng(2)
    f = transforms.random_annulus_function(n, k0, rng)
    direct = grid.apply_multiplier(f, tiles.wavelet_profile(om, k0, n).mask)
    rec = tiles.reconstruct(f, om, n >> k0)
    err = np.linalg.norm(rec.samples - direct.samples) / np.linalg.norm(direct.samples)
    _check(err <= 1e-10, f"reconstruction error {err}")


def check_trees():
    n, k0 = 64, 2
    rng = np.random.default_rng(9)
    f = transforms.random_annulus_function(n, k0, rng)
    fld = fields.sinusoidal(n, 0.009, 1)
    E = np.abs(f.samples) > np.quantile(np.abs(f.samples), 0.9)
    ts = tiles.TileSet(k0, n)
    fams = trees.select_trees(ts.tiles, f, E, fld)
    _check(sum(len(t.members) for t in fams.trees) == len(ts.tiles), "partition")
    for t in fams.trees:
        _check(t.max_dense_bar <= 2 * t.delta + 1e-12, "density sandwich")
        _check(t.size_measured <= 2 * t.sigma + 1e-12, "size sandwich")
    s = ts.tiles[10]
    _check(trees.tile_order(s, s, 1.0), "order not reflexive")


_SUITES = [
    ("bumps", check_bumps),
    ("varnorm", check_varnorm),
    ("grid", check_grid),
    ("fields", check_fields),
    ("transforms", check_transforms),
    ("tiles", check_tiles),
    ("trees", check_trees),
]


def run_selftest() -> list[tuple[str, str]]:
    failures = []
    for name, fn in _SUITES:
        try:
            fn()
            print(f"ok {name}")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures.append((name, str(exc)))
    return failures
