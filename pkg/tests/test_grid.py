import numpy as np
import pytest

from varhilbert import grid
from varhilbert.bumps import eval_psi


def _random_grid(rng, n):
    return grid.GridFunction(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


@pytest.mark.parametrize("n", [64, 128, 256])
def test_parseval(rng, n):
    f = _random_grid(rng, n)
    space = grid.lp_norm(f, 2.0) ** 2
    freq = float(np.sum(np.abs(f.spectrum) ** 2))
    assert abs(space - freq) <= 1e-10 * space


def test_fft_roundtrip(rng):
    f = _random_grid(rng, 64)
    back = grid.GridFunction.from_spectrum(f.spectrum)
    rel = np.linalg.norm(back.samples - f.samples) / np.linalg.norm(f.samples)
    assert rel <= 1e-12


def test_multiplier_identity_and_zero(rng):
    f = _random_grid(rng, 64)
    ident = grid.FrequencyMask(64, np.ones((64, 64)))
    zero = grid.FrequencyMask(64, np.zeros((64, 64)))
    assert np.allclose(grid.apply_multiplier(f, ident).samples, f.samples, atol=1e-12)
    assert np.max(np.abs(grid.apply_multiplier(f, zero).samples)) == 0.0


def test_multiplier_composition_commutes(rng):
    f = _random_grid(rng, 64)
    m1 = grid.littlewood_paley(2, 64)
    m2 = grid.cone_project(64)
    a = grid.apply_multiplier(grid.apply_multiplier(f, m1), m2)
    b = grid.apply_multiplier(f, m1 * m2)
    assert np.max(np.abs(a.samples - b.samples)) <= 1e-12 * np.max(np.abs(f.samples))


def test_plateau_mask_idempotent(rng):
    n = 64
    mask = grid.cone_project(n)  # sharp 0/1 mask
    f = grid.apply_multiplier(_random_grid(rng, n), mask)
    again = grid.apply_multiplier(f, mask)
    assert np.max(np.abs(again.samples - f.samples)) <= 1e-12


def test_multiplier_size_mismatch(rng):
    f = _random_grid(rng, 64)
    with pytest.raises(ValueError):
        grid.apply_multiplier(f, grid.littlewood_paley(2, 128))


def test_littlewood_paley_examples():
    n = 128
    k = 3
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x)
    # |m| = 12 has 2^-3 * 12 = 1.5 on the plateau
    f = grid.GridFunction(np.exp(2j * np.pi * (12 * X1)))
    out = grid.apply_multiplier(f, grid.littlewood_paley(k, n))
    assert np.max(np.abs(out.samples - f.samples)) <= 1e-12
    const = grid.GridFunction(np.full((n, n), 1.0 + 0j))
    out = grid.apply_multiplier(const, grid.littlewood_paley(k, n))
    assert np.max(np.abs(out.samples)) == 0.0
    # |m| = 21 is outside 2^k * 5/2 = 20
    f = grid.GridFunction(np.exp(2j * np.pi * (21 * X1)))
    out = grid.apply_multiplier(f, grid.littlewood_paley(k, n))
    assert np.max(np.abs(out.samples)) <= 1e-14


def test_littlewood_paley_overflow():
    with pytest.raises(ValueError):
        grid.littlewood_paley(6, 256)
    clipped = grid.littlewood_paley(6, 256, allow_clip=True)
    assert clipped.values.max() == 1.0


def test_adjacent_annuli_disjointness():
    n = 256
    a = grid.littlewood_paley(3, n)
    b = grid.littlewood_paley(5, n)
    assert np.max(a.values * b.values) == 0.0


def test_cone_examples():
    n = 64
    cone = grid.cone_project(n)
    m1, m2 = grid.freq_grids(n)
    vals = cone.values
    assert vals[(m2 == 5) & (m1 == 0)] == 1.0
    assert vals[(m2 == 0) & (m1 == 5)] == 0.0
    comp = grid.cone_project_complement(n)
    assert np.array_equal(vals + comp.values, np.ones((n, n)))


def test_lp_norm_constant():
    f = grid.GridFunction(np.full((32, 32), -2.0 + 0j))
    for p in (1.0, 2.0, 3.5):
        assert grid.lp_norm(f, p) == pytest.approx(2.0)


def test_weak_norm_indicator():
    n = 64
    s = np.zeros((n, n), dtype=complex)
    s[:8, :8] = 3.0  # measure 64/n^2 region at level 3
    f = grid.GridFunction(s)
    assert grid.weak_l2_norm(f) == pytest.approx(3.0 * np.sqrt(64.0 / n**2))


def test_weak_norm_below_l2(rng):
    f = _random_grid(rng, 64)
    assert grid.weak_l2_norm(f) <= grid.lp_norm(f, 2.0) + 1e-14


def test_weak_norm_equals_threshold_scan(rng):
    f = _random_grid(rng, 32)
    g = np.abs(f.samples).ravel()
    h2 = 1.0 / 32**2
    brute = max(lam * np.sqrt(np.sum(g > lam) * h2) for lam in g * (1 - 1e-12))
    assert grid.weak_l2_norm(f) == pytest.approx(brute, rel=1e-10)


def test_sample_off_grid_nodes_and_midpoints(rng):
    f = _random_grid(rng, 32)
    assert grid.sample_off_grid(f, (3 / 32, 5 / 32)) == pytest.approx(f.samples[5, 3])
    mid = grid.sample_off_grid(f, (3.5 / 32, 5 / 32))
    assert mid == pytest.approx((f.samples[5, 3] + f.samples[5, 4]) / 2)


def test_sample_off_grid_affine_exact():
    n = 32
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x)
    f = grid.GridFunction(2.0 * X1 + 3.0 * X2 + 0j)
    pts1 = np.array([0.11, 0.37, 0.53])
    pts2 = np.array([0.21, 0.42, 0.66])
    vals = grid.sample_off_grid(f, (pts1, pts2))
    assert np.allclose(vals, 2.0 * pts1 + 3.0 * pts2, atol=1e-12)


def test_grid_io_roundtrip(tmp_path, rng):
    f = _random_grid(rng, 64)
    path = tmp_path / "f.grid"
    grid.write_grid(f, path)
    g = grid.read_grid(path)
    assert np.array_equal(g.samples, f.samples)


def test_grid_io_errors(tmp_path, rng):
    f = _random_grid(rng, 32)
    path = tmp_path / "f.grid"
    grid.write_grid(f, path)
    raw = path.read_bytes()
    bad = tmp_path / "bad.grid"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(grid.GridFormatError):
        grid.read_grid(bad)
    trunc = tmp_path / "trunc.grid"
    trunc.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(grid.GridFormatError):
        grid.read_grid(trunc)
    import struct

    odd = tmp_path / "odd.grid"
    odd.write_bytes(b"GF01" + struct.pack("<I", 33) + raw[8:])
    with pytest.raises(grid.GridFormatError):
        grid.read_grid(odd)


def test_samples_immutable(rng):
    f = _random_grid(rng, 32)
    with pytest.raises(ValueError):
        f.samples[0, 0] = 1.0


def test_littlewood_matches_bump():
    n, k = 128, 2
    mask = grid.littlewood_paley(k, n)
    m1, m2 = grid.freq_grids(n)
    expected = eval_psi(k, np.hypot(m1, m2))
    assert np.array_equal(mask.values, expected)
