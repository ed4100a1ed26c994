"""Planar vector fields v(x) = (1, u(x)) given by sampled slope functions.

A field is stored as the slope u on the n x n torus grid together with
its measured discrete Lipschitz constant. ``normalize`` rescales the
amplitude so that ||u||_inf <= 1e-2 and the discrete gradient stays
below 2, after which the truncation scale of the variational transform
is 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .grid import GridFormatError

__all__ = [
    "VectorField",
    "lipschitz_constant",
    "normalize",
    "constant",
    "sinusoidal",
    "shear",
    "one_variable",
    "from_file",
    "write_field",
    "AMPLITUDE_BOUND",
    "GRADIENT_BOUND",
]

_FIELD_MAGIC = b"VF01"

AMPLITUDE_BOUND = 1e-2
GRADIENT_BOUND = 2.0


@dataclass(frozen=True)
class VectorField:
    """Sampled slope u with layout u[j2, j1] = u(j1 h, j2 h).

    ``one_variable`` marks fields whose slope depends on x1 only (every
    column of the sample array constant along axis 0).
    """

    n: int
    u: np.ndarray
    lip: float
    one_variable: bool = False

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        if u.shape != (self.n, self.n):
            raise ValueError(f"slope array shape {u.shape} does not match n={self.n}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.u)))


def lipschitz_constant(u: np.ndarray) -> float:
    """Max over adjacent grid pairs of |u(p) - u(q)| / h, both axes.

    Wrap-around pairs are excluded so that sawtooth-wrapped shears report
    their interior slope rather than the seam jump.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    h = 1.0 / n
    d1 = np.abs(np.diff(u, axis=1)).max(initial=0.0)
    d2 = np.abs(np.diff(u, axis=0)).max(initial=0.0)
    return float(max(d1, d2) / h)


def _build(u: np.ndarray, one_variable: bool) -> VectorField:
    u = np.asarray(u, dtype=float)
    return VectorField(n=u.shape[0], u=u, lip=lipschitz_constant(u), one_variable=one_variable)


def normalize(field: VectorField) -> tuple[VectorField, float]:
    """Rescale the slope amplitude until ||u||_inf <= 1e-2 and the
    discrete gradient bound <= 2 both hold.

    Returns the normalized field and the divisor applied, so experiment
    output can be restated in original units. Idempotent; a field
    already inside the bounds comes back unchanged with scale 1.
    """
    if not np.all(np.isfinite(field.u)):
        raise ValueError("slope samples must be finite")
    scale = max(1.0, field.amplitude / AMPLITUDE_BOUND, field.lip / GRADIENT_BOUND)
    if scale == 1.0:
        return field, 1.0
    u = field.u / scale
    return replace(field, u=u, lip=lipschitz_constant(u)), float(scale)


def constant(n: int, c: float) -> VectorField:
    """Constant slope field, normalized. c = 0 gives the horizontal field."""
    field = _build(np.full((n, n), float(c)), one_variable=True)
    return normalize(field)[0]


def sinusoidal(n: int, a: float, freq: int = 1) -> VectorField:
    """Genuinely two-variable smooth slope a sin(2 pi q x1) cos(2 pi q x2),
    normalized."""
    x = np.arange(n) / n
    u = a * np.outer(np.cos(2 * np.pi * freq * x), np.sin(2 * np.pi * freq * x))
    return normalize(_build(u, one_variable=False))[0]


def shear(n: int, a: float) -> VectorField:
    """Slope a * x1, wrapped as a sawtooth across the torus seam; normalized."""
    x = np.arange(n) / n
    u = np.tile(a * x, (n, 1))
    return normalize(_build(u, one_variable=True))[0]


def one_variable(profile: np.ndarray) -> VectorField:
    """Field u(x1, x2) = profile(x1), normalized. ``profile`` has length n."""
    profile = np.asarray(profile, dtype=float)
    n = profile.size
    u = np.tile(profile, (n, 1))
    return normalize(_build(u, one_variable=True))[0]


def write_field(field: VectorField, path) -> None:
    """Binary field format: magic ``VF01``, uint32 little-endian n, then
    n^2 float64 little-endian slope values, row-major with row = x2."""
    with open(path, "wb") as fh:
        fh.write(_FIELD_MAGIC)
        fh.write(struct.pack("<I", field.n))
        fh.write(np.ascontiguousarray(field.u, dtype="<f8").tobytes())


def from_file(path) -> VectorField:
    """Read a slope file and return the normalized field."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _FIELD_MAGIC:
            raise GridFormatError(f"bad magic {magic!r}, expected {_FIELD_MAGIC!r}")
        raw = fh.read(4)
        if len(raw) != 4:
            raise GridFormatError("truncated header")
        (n,) = struct.unpack("<I", raw)
        if n < 2 or n & (n - 1) != 0:
            raise GridFormatError(f"grid side {n} is not a power of two")
        payload = fh.read(8 * n * n)
        if len(payload) != 8 * n * n:
            raise GridFormatError(
                f"truncated payload: expected {8 * n * n} bytes, got {len(payload)}"
            )
        u = np.frombuffer(payload, dtype="<f8").reshape(n, n).astype(float)
    one_var = bool(np.all(u == u[0:1, :]))
    return normalize(_build(u, one_variable=one_var))[0]


def raw_field(u: np.ndarray, one_variable: bool = False) -> VectorField:
    """Field straight from samples, skipping normalization. Used to plant
    deliberately irregular slopes in diagnostics."""
    return _build(u, one_variable=one_variable)
