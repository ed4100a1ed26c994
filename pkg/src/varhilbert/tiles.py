"""Time-frequency tiles: slope intervals, wavelets and the model operator.

A tile couples a slope interval omega (a dyadic subinterval of [-2, 2] of
width 2^(l-k0)) with a sheared spatial rectangle of length 2^-l and
height 2^-k0 whose long side has slope -c(omega). For each omega the
tiles form a brick lattice that partitions the torus exactly. Each tile
carries an L2-normalized wavelet whose frequency support lies in the
multiplier m_omega, and the translation average of the wavelet frame
reproduces convolution with m_omega.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .bumps import eval_m_omega
from .fields import VectorField
from .grid import FrequencyMask, GridFunction, apply_multiplier, freq_grids
from .transforms import directional_piece
from .varnorm import jump_positions_batch, variation_batch

__all__ = [
    "SlopeInterval",
    "Tile",
    "Wavelet",
    "slope_intervals",
    "enumerate_tiles",
    "TileSet",
    "wavelet_profile",
    "tile_wavelet",
    "coefficient",
    "coefficients_for_omega",
    "reconstruct",
    "transformed_wavelet",
    "straightened_wavelet",
    "model_operator",
]


@dataclass(frozen=True)
class SlopeInterval:
    """Dyadic slope interval of width 2^(l-k0) inside [-2, 2].

    The right half center ``c_right`` is the modulation center of the
    angular bump; the full center is the (negated) slope of the tiles.
    """

    k0: int
    l: int
    index: int

    def __post_init__(self):
        if not 0 <= self.l <= self.k0:
            raise ValueError(f"scale l={self.l} outside [0, k0={self.k0}]")
        if not 0 <= self.index < self.count(self.k0, self.l):
            raise ValueError(f"interval index {self.index} out of range")

    @staticmethod
    def count(k0: int, l: int) -> int:
        return 1 << (k0 - l + 2)

    @property
    def width(self) -> float:
        return 2.0 ** (self.l - self.k0)

    @property
    def lo(self) -> float:
        return -2.0 + self.index * self.width

    @property
    def hi(self) -> float:
        return self.lo + self.width

    @property
    def center(self) -> float:
        return self.lo + 0.5 * self.width

    @property
    def c_right(self) -> float:
        return self.lo + 0.75 * self.width

    @property
    def c_left(self) -> float:
        return self.lo + 0.25 * self.width

    def doubled(self) -> tuple[float, float]:
        """The concentric double 2*omega."""
        return self.center - self.width, self.center + self.width


def slope_intervals(k0: int, l: int) -> tuple[SlopeInterval, ...]:
    return tuple(SlopeInterval(k0, l, i) for i in range(SlopeInterval.count(k0, l)))


@dataclass(frozen=True)
class Tile:
    """Sheared rectangle of the brick lattice of its slope interval.

    Within the x1 column [col 2^-l, (col+1) 2^-l) the tile is
    {x: x2 + c(omega) (x1 - x1_lo) in [row 2^-k0, (row+1) 2^-k0)}, taken
    mod 1; the long side has slope -c(omega) exactly.
    """

    omega: SlopeInterval
    col: int
    row: int

    @property
    def k0(self) -> int:
        return self.omega.k0

    @property
    def l(self) -> int:
        return self.omega.l

    @property
    def length(self) -> float:
        return 2.0**-self.l

    @property
    def width(self) -> float:
        return 2.0**-self.k0

    @property
    def area(self) -> float:
        return 2.0 ** -(self.k0 + self.l)

    @property
    def slope(self) -> float:
        return -self.omega.center

    @property
    def x1_lo(self) -> float:
        return self.col * self.length

    @property
    def center(self) -> tuple[float, float]:
        x1c = (self.col + 0.5) * self.length
        x2c = (self.row + 0.5) * self.width + self.slope * 0.5 * self.length
        return x1c, x2c % 1.0

    @property
    def pi1(self) -> tuple[float, float]:
        """Horizontal-axis projection (x1 interval)."""
        return self.x1_lo, self.x1_lo + self.length

    @property
    def pi2(self) -> tuple[float, float]:
        """Vertical-axis projection (x2 interval, before wrap)."""
        tau_lo = self.row * self.width
        tau_hi = tau_lo + self.width
        drop = self.slope * self.length
        return tau_lo + min(0.0, drop), tau_hi + max(0.0, drop)

    def corners(self) -> np.ndarray:
        """Four corner points just inside the tile, shape (4, 2), mod 1.

        The inset keeps the far corners of full-length tiles from wrapping
        onto the next brick column, whose shear ladder is offset.
        """
        shrink = 1.0 - 1e-9
        pts = []
        for dx in (0.0, self.length * shrink):
            for dt in (0.0, self.width * shrink):
                tau = self.row * self.width + dt
                pts.append(((self.x1_lo + dx) % 1.0, (tau + self.slope * dx) % 1.0))
        return np.array(pts)

    def contains(self, x1, x2) -> np.ndarray:
        """Pointwise membership on the torus (vectorized)."""
        x1 = np.asarray(x1, dtype=float) % 1.0
        x2 = np.asarray(x2, dtype=float)
        d1 = (x1 - self.x1_lo) % 1.0
        in1 = d1 < self.length - 1e-12
        tau = (x2 + self.omega.center * d1 - self.row * self.width) % 1.0
        in2 = tau < self.width - 1e-12
        return in1 & in2


def enumerate_tiles(k0: int, l: int, n: int) -> dict[SlopeInterval, list[Tile]]:
    """Brick lattice per slope interval: 2^l columns of 2^k0 sheared rows,
    2^(k0+l) tiles of area 2^-(k0+l) each, partitioning the torus.

    Requires 2^-k0 >= 4/n so the tiles (and the lattice centers) are
    resolvable on the grid.
    """
    if n < (1 << (k0 + 2)):
        raise ValueError(f"resolution violation: need n >= 2^(k0+2) = {1 << (k0 + 2)}")
    out: dict[SlopeInterval, list[Tile]] = {}
    for om in slope_intervals(k0, l):
        out[om] = [Tile(om, c, r) for c in range(1 << l) for r in range(1 << k0)]
    return out


@dataclass(frozen=True)
class Wavelet:
    """Reference profile of one slope interval on an n x n grid.

    ``spectrum_profile`` holds the Fourier coefficients of phi_omega,
    the nonnegative square root of the tile multiplier scaled so every
    translated tile wavelet sqrt(|s|) phi_omega(. - c(s)) has unit L2
    norm on the grid. ``mass`` is |s| * sum(m_omega) on the grid, the
    constant separating the unit-norm convention from the reproducing
    identity; the translation average compensates by it.
    """

    omega: SlopeInterval
    n: int
    mask: FrequencyMask
    spectrum_profile: np.ndarray
    mass: float

    @property
    def profile(self) -> GridFunction:
        return GridFunction.from_spectrum(self.spectrum_profile)

    def support_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """(i2, i1) index arrays of the nonzero multiplier frequencies."""
        return np.nonzero(self.mask.values > 0.0)


@functools.lru_cache(maxsize=512)
def _wavelet_cached(k0: int, l: int, index: int, n: int) -> Wavelet:
    om = SlopeInterval(k0, l, index)
    m1, m2 = freq_grids(n)
    vals = eval_m_omega(m1.astype(float), m2.astype(float), om, k0)
    total = float(np.sum(vals))
    if total <= 0.0:
        raise ValueError(f"multiplier of {om} has no on-grid support at n={n}")
    area = 2.0 ** -(k0 + l)
    mass = area * total
    # unit norm: |s| * c^2 * sum(m) = 1
    c = 1.0 / math.sqrt(mass)
    prof = c * np.sqrt(vals)
    prof.setflags(write=False)
    return Wavelet(om, n, FrequencyMask(n, vals), prof, mass)


def wavelet_profile(omega: SlopeInterval, k0: int, n: int) -> Wavelet:
    if omega.k0 != k0:
        raise ValueError("omega was built for a different k0")
    return _wavelet_cached(k0, omega.l, omega.index, n)


def tile_wavelet(tile: Tile, n: int) -> GridFunction:
    """phi_s = sqrt(|s|) phi_omega(. - c(s)), realized spectrally."""
    wav = wavelet_profile(tile.omega, tile.k0, n)
    m1, m2 = freq_grids(n)
    x1c, x2c = tile.center
    phase = np.exp(-2j * np.pi * (m1 * x1c + m2 * x2c))
    return GridFunction.from_spectrum(math.sqrt(tile.area) * wav.spectrum_profile * phase)


def coefficient(f: GridFunction, tile: Tile) -> complex:
    """<f, phi_s> as the discrete inner product h^2 sum f conj(phi_s)."""
    wav = wavelet_profile(tile.omega, tile.k0, f.n)
    m1, m2 = freq_grids(f.n)
    x1c, x2c = tile.center
    phase = np.exp(2j * np.pi * (m1 * x1c + m2 * x2c))
    return complex(np.sum(f.spectrum * math.sqrt(tile.area) * wav.spectrum_profile * phase))


def coefficients_for_omega(f: GridFunction, omega: SlopeInterval, tiles: list[Tile]) -> np.ndarray:
    """<f, phi_s> for every tile of one slope interval in a single inverse
    transform; the lattice centers sit on grid nodes whenever the tiles
    are resolvable."""
    wav = wavelet_profile(omega, omega.k0, f.n)
    n = f.n
    area = 2.0 ** -(omega.k0 + omega.l)
    cross = np.fft.ifft2(f.spectrum * math.sqrt(area) * wav.spectrum_profile) * (n * n)
    out = np.empty(len(tiles), dtype=complex)
    for i, t in enumerate(tiles):
        x1c, x2c = t.center
        j1 = int(round(x1c * n)) % n
        j2 = int(round(x2c * n)) % n
        if abs(x1c * n - round(x1c * n)) > 1e-9 or abs(x2c * n - round(x2c * n)) > 1e-9:
            out[i] = coefficient(f, t)
        else:
            out[i] = cross[j2, j1]
    return out


def reconstruct(f: GridFunction, omega: SlopeInterval, shifts: int) -> GridFunction:
    """Translation average of the wavelet frame of one slope interval.

    Averages sum_s <f, phi_s(p + .)> phi_s(p + x) over shifts^2 offsets p
    inside one lattice cell and scales by the wavelet mass; converges to
    apply_multiplier(f, m_omega) as ``shifts`` grows, exactly once the
    offsets resolve every lattice-frequency difference.
    """
    if shifts < 1:
        raise ValueError("need at least one shift sample per axis")
    n = f.n
    k0, l = omega.k0, omega.l
    wav = wavelet_profile(omega, k0, n)
    area = 2.0 ** -(k0 + l)
    i2s, i1s = wav.support_indices()
    m1, m2 = freq_grids(n)
    m1s = m1[i2s, i1s].astype(float)
    m2s = m2[i2s, i1s].astype(float)
    g = f.spectrum[i2s, i1s] * math.sqrt(area) * wav.spectrum_profile[i2s, i1s]
    w2 = math.sqrt(area) * wav.spectrum_profile[i2s, i1s]
    # the lattice centers factor: x1c = (col + 1/2) 2^-l, x2c = (row + 1/2)
    # 2^-k0 + slope 2^-l / 2, so both coefficient extraction and synthesis
    # split into per-axis phase matrices
    ncol, nrow = 1 << l, 1 << k0
    x1c = (np.arange(ncol) + 0.5) * 2.0**-l
    x2c = (np.arange(nrow) + 0.5) * 2.0**-k0 - omega.center * 2.0**-l / 2.0
    acc = np.zeros(m1s.size, dtype=complex)
    cell1 = 2.0**-l / shifts
    cell2 = 2.0**-k0 / shifts
    for a in range(shifts):
        e1 = np.exp(2j * np.pi * np.outer(m1s, x1c - a * cell1))
        for b in range(shifts):
            e2 = np.exp(2j * np.pi * np.outer(m2s, x2c - b * cell2))
            # coeffs[col,row] = sum_m g(m) e1[m,col] e2[m,row]
            coeffs = np.einsum("mc,mr->cr", e1 * g[:, None], e2)
            # back-projection: sum_{col,row} coeffs conj(e1) conj(e2)
            d = coeffs @ np.conj(e2).T  # (ncol, m)
            acc += w2 * np.einsum("mc,cm->m", np.conj(e1), d)
    spec = np.zeros((n, n), dtype=complex)
    spec[i2s, i1s] = acc * wav.mass / (shifts * shifts)
    return GridFunction.from_spectrum(spec)


def transformed_wavelet(tile: Tile, fld: VectorField) -> GridFunction:
    """phi_s pushed through the directional piece of its own scale."""
    return directional_piece(tile_wavelet(tile, fld.n), fld, tile.l)


def straightened_wavelet(tile: Tile, n: int) -> GridFunction:
    """Same integral taken along the fixed direction (1, 0): the
    transformed wavelet of the horizontal field."""
    from .fields import constant

    return directional_piece(tile_wavelet(tile, n), constant(n, 0.0), tile.l)


class TileSet:
    """All tiles of every scale 0..k0 for one (k0, n), with caches."""

    def __init__(self, k0: int, n: int, levels=None):
        if n < (1 << (k0 + 2)):
            raise ValueError(f"resolution violation: need n >= 2^(k0+2) = {1 << (k0 + 2)}")
        self.k0 = k0
        self.n = n
        self.levels = tuple(range(k0 + 1)) if levels is None else tuple(levels)
        self.by_omega: dict[SlopeInterval, list[Tile]] = {}
        for l in self.levels:
            self.by_omega.update(enumerate_tiles(k0, l, n))
        self.tiles = [t for ts in self.by_omega.values() for t in ts]

    def wavelet(self, omega: SlopeInterval) -> Wavelet:
        return wavelet_profile(omega, self.k0, self.n)

    def coefficients(self, f: GridFunction) -> np.ndarray:
        """Coefficient array aligned with ``self.tiles``."""
        out = np.empty(len(self.tiles), dtype=complex)
        pos = 0
        for om, ts in self.by_omega.items():
            out[pos : pos + len(ts)] = coefficients_for_omega(f, om, ts)
            pos += len(ts)
        return out

    def dump_coefficients(self, f: GridFunction, path) -> None:
        """Audit dump: one line ``l omega_index cx cy coeff_re coeff_im``."""
        coeffs = self.coefficients(f)
        with open(path, "w") as fh:
            for t, c in zip(self.tiles, coeffs):
                cx, cy = t.center
                fh.write(
                    f"{t.l} {t.omega.index} {cx:.17g} {cy:.17g} {c.real:.17g} {c.imag:.17g}\n"
                )


def model_operator(
    f: GridFunction, fld: VectorField, r: float, tile_set: TileSet | list[Tile]
) -> GridFunction:
    """Linearized tile sum: groups tiles by length, pushes the per-scale
    aggregated wavelet sums through the directional pieces, linearizes the
    partial-sum sequence at every point and evaluates
    sum_s <f, phi_s> a_s phi_s^H. By construction this equals the
    pointwise r-variation of the partial sums; the equality is asserted
    internally.
    """
    tiles = tile_set.tiles if isinstance(tile_set, TileSet) else list(tile_set)
    if not tiles:
        return GridFunction.zeros(fld.n)
    n = fld.n
    by_scale: dict[int, dict[SlopeInterval, list[Tile]]] = {}
    for t in tiles:
        by_scale.setdefault(t.l, {}).setdefault(t.omega, []).append(t)
    scales = sorted(by_scale)
    pieces = []
    for l in scales:
        spec = np.zeros((n, n), dtype=complex)
        m1, m2 = freq_grids(n)
        for om, ts in by_scale[l].items():
            wav = wavelet_profile(om, om.k0, n)
            coeffs = coefficients_for_omega(f, om, ts)
            comb = np.zeros((n, n), dtype=complex)
            aligned = True
            for t, c in zip(ts, coeffs):
                x1c, x2c = t.center
                if abs(x1c * n - round(x1c * n)) > 1e-9 or abs(x2c * n - round(x2c * n)) > 1e-9:
                    aligned = False
                    break
                comb[int(round(x2c * n)) % n, int(round(x1c * n)) % n] += c
            if aligned:
                # fft2(comb) is exactly sum_s coeff_s e^{-2 pi i m.c(s)}
                spec += math.sqrt(ts[0].area) * wav.spectrum_profile * np.fft.fft2(comb)
            else:
                for t, c in zip(ts, coeffs):
                    x1c, x2c = t.center
                    phase = np.exp(-2j * np.pi * (m1 * x1c + m2 * x2c))
                    spec += c * math.sqrt(t.area) * wav.spectrum_profile * phase
        g = GridFunction.from_spectrum(spec)
        pieces.append(directional_piece(g, fld, l).samples)
    # partial sums with the empty leading sum, then pointwise linearization
    seq = np.zeros((n, n, len(pieces) + 1), dtype=complex)
    acc = np.zeros((n, n), dtype=complex)
    for j, p in enumerate(pieces):
        acc = acc + p
        seq[:, :, j + 1] = acc
    values, pred, end = variation_batch(seq, r)
    jumps, counts = jump_positions_batch(pred, end)
    linsum = _linearized_sum(seq, values, jumps, counts, r)
    dev = float(np.max(np.abs(linsum - values)))
    if dev > 1e-10 * max(1.0, float(np.max(values))):
        raise AssertionError(f"linearized sum drifted from the variation by {dev}")
    return GridFunction(values.astype(complex))


def _linearized_sum(seq, values, jumps, counts, r):
    """sum_i a_i * (S[k_{i+1}] - S[k_i]) with the dual coefficients of the
    maximizing jumps; equals the variation wherever it is positive."""
    n1, n2, L = seq.shape
    out = np.zeros((n1, n2))
    maxjumps = int(counts.max(initial=0))
    V = np.where(values > 0, values, 1.0)
    for i in range(maxjumps - 1):
        has = counts > i + 1
        if not np.any(has):
            break
        k_i = np.where(has, jumps[:, :, i], 0).astype(np.int64)
        k_n = np.where(has, jumps[:, :, i + 1], 0).astype(np.int64)
        s_i = np.take_along_axis(seq, k_i[:, :, None], axis=2)[:, :, 0]
        s_n = np.take_along_axis(seq, k_n[:, :, None], axis=2)[:, :, 0]
        delta = s_n - s_i
        mag = np.abs(delta)
        a = np.where(mag > 0, mag ** (r - 1.0), 0.0) / V ** (r - 1.0)
        out += np.where(has, a * mag, 0.0)
    return out
