"""Discrete periodic function spaces and the spectral engine.

Functions live on the unit torus sampled on an n x n grid (n a power of
two, spacing h = 1/n), stored row-major with row index = x2 and column
index = x1. Fourier coefficients are indexed by integer frequencies in
[-n/2, n/2) and normalized so that f(x) = sum_m fhat(m) e^{2 pi i m.x};
with that convention Parseval reads h^2 sum |f|^2 = sum |fhat|^2.

Reductions over samples use numpy's pairwise summation in a fixed order,
which keeps every norm and inner product reproducible across runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .bumps import eval_psi

__all__ = [
    "GridFunction",
    "FrequencyMask",
    "GridFormatError",
    "freq_axis",
    "freq_grids",
    "apply_multiplier",
    "littlewood_paley",
    "cone_project",
    "cone_project_complement",
    "lp_norm",
    "weak_l2_norm",
    "sample_off_grid",
    "read_grid",
    "write_grid",
]

_GRID_MAGIC = b"GF01"


class GridFormatError(Exception):
    """Raised for malformed grid/field files."""


def _check_power_of_two(n: int):
    if n < 2 or n & (n - 1) != 0:
        raise ValueError(f"grid side must be a power of two >= 2, got {n}")


def freq_axis(n: int) -> np.ndarray:
    """Integer frequencies in FFT order: 0, 1, ..., n/2-1, -n/2, ..., -1."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


def freq_grids(n: int):
    """(M1, M2) integer frequency grids in FFT layout, axis 0 = m2, axis 1 = m1."""
    m = freq_axis(n)
    m2, m1 = np.meshgrid(m, m, indexing="ij")
    return m1, m2


class GridFunction:
    """Complex samples on the n x n periodic grid, immutable after creation.

    ``samples[j2, j1]`` is the value at (x1, x2) = (j1 h, j2 h). The
    Fourier coefficient array (same shape, FFT frequency order, axis 0 =
    m2) is computed lazily and cached.
    """

    __slots__ = ("n", "samples", "_spectrum")

    def __init__(self, samples: np.ndarray, spectrum: np.ndarray | None = None):
        samples = np.ascontiguousarray(samples, dtype=np.complex128)
        if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
            raise ValueError(f"expected a square 2-D array, got shape {samples.shape}")
        _check_power_of_two(samples.shape[0])
        samples.setflags(write=False)
        self.n = samples.shape[0]
        self.samples = samples
        self._spectrum = spectrum

    @classmethod
    def from_spectrum(cls, spectrum: np.ndarray) -> "GridFunction":
        spectrum = np.ascontiguousarray(spectrum, dtype=np.complex128)
        n = spectrum.shape[0]
        samples = np.fft.ifft2(spectrum) * (n * n)
        spectrum.setflags(write=False)
        return cls(samples, spectrum=spectrum)

    @classmethod
    def zeros(cls, n: int) -> "GridFunction":
        return cls(np.zeros((n, n), dtype=np.complex128))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def spectrum(self) -> np.ndarray:
        """Fourier coefficients fhat(m) = h^2 sum_x f(x) e^{-2 pi i m.x}."""
        if self._spectrum is None:
            spec = np.fft.fft2(self.samples) / (self.n * self.n)
            spec.setflags(write=False)
            self._spectrum = spec
        return self._spectrum

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.samples - other.samples)

    def __mul__(self, scalar: complex) -> "GridFunction":
        return GridFunction(self.samples * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FrequencyMask:
    """Real multiplier values on the integer frequency lattice.

    ``values`` is in FFT layout matching GridFunction.spectrum (axis 0 =
    m2, axis 1 = m1). Masks built from the bump system take values in
    [0, 1].
    """

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.n, self.n):
            raise ValueError("mask shape does not match n")

    def __mul__(self, other: "FrequencyMask") -> "FrequencyMask":
        if self.n != other.n:
            raise ValueError("mask size mismatch")
        return FrequencyMask(self.n, self.values * other.values)


def apply_multiplier(f: GridFunction, mask: FrequencyMask) -> GridFunction:
    """Inverse transform of mask * fhat; linear in f."""
    if f.n != mask.n:
        raise ValueError(f"size mismatch: f has n={f.n}, mask has n={mask.n}")
    return GridFunction.from_spectrum(f.spectrum * mask.values)


def littlewood_paley(k: int, n: int, allow_clip: bool = False) -> FrequencyMask:
    """Radial annulus mask psi0(2**-k |m|), selecting |m| ~ 2**k.

    The annulus fits the discrete spectrum when 2**k * 5/2 < n/2;
    otherwise the mask would be clipped at the Nyquist edge, which is
    rejected unless ``allow_clip`` is set (ratio experiments opt in).
    """
    _check_power_of_two(n)
    if 2.0**k * 2.5 >= n / 2 and not allow_clip:
        raise ValueError(
            f"annulus overflow: 2**{k} * 5/2 = {2.0**k * 2.5} does not fit below "
            f"Nyquist {n // 2}; pass allow_clip=True to accept a clipped annulus"
        )
    m1, m2 = freq_grids(n)
    radius = np.hypot(m1.astype(float), m2.astype(float))
    return FrequencyMask(n, eval_psi(k, radius))


def cone_project(n: int, aperture: float = np.pi / 10.0) -> FrequencyMask:
    """Sharp 0/1 mask of the two-ended cone around the vertical frequency
    axis: keeps (m1, m2) with |m1/m2| <= tan(aperture), m2 != 0."""
    if not 0.0 < aperture < np.pi / 4.0:
        raise ValueError(f"aperture must lie in (0, pi/4), got {aperture}")
    m1, m2 = freq_grids(n)
    keep = (m2 != 0) & (np.abs(m1) <= np.tan(aperture) * np.abs(m2))
    return FrequencyMask(n, keep.astype(np.float64))


def cone_project_complement(n: int, aperture: float = np.pi / 10.0) -> FrequencyMask:
    """Complement of ``cone_project``; the two masks sum to the identity."""
    cone = cone_project(n, aperture)
    return FrequencyMask(n, 1.0 - cone.values)


def lp_norm(f: GridFunction, p: float) -> float:
    """(h^2 sum |f|^p)^(1/p) for p >= 1."""
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    h2 = f.h * f.h
    return float((h2 * np.sum(np.abs(f.samples) ** p)) ** (1.0 / p))


def weak_l2_norm(f: GridFunction) -> float:
    """Exact sup_t t |{|f| > t}|^(1/2) on the finite grid.

    With samples sorted g_1 >= g_2 >= ... the supremum is attained just
    below some g_i where the superlevel set has measure i h^2, so the
    norm equals max_i g_i (i h^2)^(1/2).
    """
    g = np.sort(np.abs(f.samples).ravel())[::-1]
    meas = (np.arange(1, g.size + 1)) * (f.h * f.h)
    return float(np.max(g * np.sqrt(meas)))


def sample_off_grid(f: GridFunction, x) -> np.ndarray:
    """Bilinear interpolation with periodic wrap.

    ``x`` is a point (x1, x2) or a pair of equal-shape coordinate arrays.
    Exact at grid nodes and on affine functions between them.
    """
    x1 = np.asarray(x[0], dtype=float)
    x2 = np.asarray(x[1], dtype=float)
    n = f.n
    p1 = x1 * n
    p2 = x2 * n
    i1 = np.floor(p1).astype(np.int64)
    i2 = np.floor(p2).astype(np.int64)
    f1 = p1 - i1
    f2 = p2 - i2
    i1 %= n
    i2 %= n
    j1 = (i1 + 1) % n
    j2 = (i2 + 1) % n
    s = f.samples
    val = (
        s[i2, i1] * (1 - f1) * (1 - f2)
        + s[i2, j1] * f1 * (1 - f2)
        + s[j2, i1] * (1 - f1) * f2
        + s[j2, j1] * f1 * f2
    )
    return val


def write_grid(f: GridFunction, path) -> None:
    """Binary grid format: magic ``GF01``, uint32 little-endian n, then
    n^2 complex samples as interleaved float64 little-endian (re, im)
    pairs, row-major with row index = x2."""
    with open(path, "wb") as fh:
        fh.write(_GRID_MAGIC)
        fh.write(struct.pack("<I", f.n))
        fh.write(np.ascontiguousarray(f.samples, dtype="<c16").tobytes())


def read_grid(path) -> GridFunction:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _GRID_MAGIC:
            raise GridFormatError(f"bad magic {magic!r}, expected {_GRID_MAGIC!r}")
        raw = fh.read(4)
        if len(raw) != 4:
            raise GridFormatError("truncated header")
        (n,) = struct.unpack("<I", raw)
        if n < 2 or n & (n - 1) != 0:
            raise GridFormatError(f"grid side {n} is not a power of two")
        payload = fh.read(16 * n * n)
        if len(payload) != 16 * n * n:
            raise GridFormatError(
                f"truncated payload: expected {16 * n * n} bytes, got {len(payload)}"
            )
        samples = np.frombuffer(payload, dtype="<c16").reshape(n, n)
    return GridFunction(samples.astype(np.complex128))
