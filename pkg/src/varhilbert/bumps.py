"""Smooth cutoffs and scalar multiplier profiles.

Everything downstream (Littlewood-Paley masks, directional kernels, tile
multipliers, wavelets) is built from the bumps defined here:

* ``psi0``: nonnegative bump supported in [1/2, 5/2] with ``psi0 == 1`` on
  [5/4, 7/4], chosen as ``eta(t) - eta(2t)`` for a smooth step ``eta`` so
  that ``sum_l psi0(2**-l * t) == 1`` for every t > 0 by telescoping.
* ``beta``: even bump, 1 on [-1, 1], 0 off [-2, 2].
* ``beta_tilde``: bump supported in [1/2, 5/2], 1 on [1, 2].
* slope-interval profiles ``beta_omega`` and their sums ``beta_l``, the
  window average ``gamma_l`` and its constant value ``delta``.

All evaluators are pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "SmoothStep",
    "BumpSystem",
    "DEFAULT_BUMPS",
    "eval_psi",
    "psi_partition_check",
    "eval_beta",
    "eval_beta_tilde",
    "eval_beta_omega",
    "eval_beta_l",
    "gamma_l",
    "delta_value",
    "eval_m_omega",
    "eval_m_lt",
    "eval_m_l",
]


def _transition(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing on (0,1).

    Evaluated as 1/(1 + exp(1/x - 1/(1-x))), which is exp(-1/x) /
    (exp(-1/x) + exp(-1/(1-x))) rearranged to avoid underflow ratios.
    """
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        xm = x[mid]
        g = np.clip(1.0 / xm - 1.0 / (1.0 - xm), -700.0, 700.0)
        out[mid] = 1.0 / (1.0 + np.exp(g))
    return out


@dataclass(frozen=True)
class SmoothStep:
    """Smooth nonincreasing step: 1 on (-inf, a], 0 on [b, inf).

    Requires 0 < a < b <= 2a so that t -> step(t) - step(2t) has its
    plateau and support in the dyadic position used by the scale partition.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b <= 2.0 * self.a):
            raise ValueError(f"need 0 < a < b <= 2a, got a={self.a}, b={self.b}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 - _transition((t - self.a) / (self.b - self.a))


# ramp of the scale bump: plateau edge 7/4, support edge 5/2
_ETA = SmoothStep(7.0 / 4.0, 5.0 / 2.0)
# |x|-profile of beta: 1 up to 1, 0 beyond 2
_BETA_STEP = SmoothStep(1.0, 2.0)
# rising/falling edges of beta_tilde
_BT_UP = SmoothStep(0.5, 1.0)
_BT_DOWN = SmoothStep(2.0, 2.5)


def eval_psi(l: int, t):
    """psi_l(t) = psi0(2**-l t); vanishes unless 2**-l t is in [1/2, 5/2]."""
    s = np.ldexp(np.asarray(t, dtype=float), -l)
    return _ETA(s) - _ETA(2.0 * s)


def psi_partition_check(t, L: int):
    """Partial sum of psi_l(t) over l = -L..L; telescopes to
    eta(2**-L t) - eta(2**(L+1) t), hence equals 1 once the window covers
    both transition zones. Rejects t <= 0."""
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr <= 0.0):
        raise ValueError("partition of unity is only claimed for t > 0")
    total = np.zeros_like(tarr)
    for l in range(-L, L + 1):
        total = total + eval_psi(l, tarr)
    return total if total.ndim else float(total)


def eval_beta(x):
    """Even bump: 1 on [-1, 1], 0 for |x| >= 2."""
    return _BETA_STEP(np.abs(np.asarray(x, dtype=float)))


def eval_beta_tilde(x):
    """Bump supported in [1/2, 5/2] with value 1 on [1, 2]."""
    x = np.asarray(x, dtype=float)
    return (1.0 - _BT_UP(x)) * _BT_DOWN(x)


def eval_beta_omega(x, omega, k0: int):
    """beta((x - c) / w) where c is the center of the right half of omega
    and w = 2**(l - k0) is the interval width.

    ``omega`` only needs attributes ``l`` and ``c_right`` (the slope
    interval type from the tiles module provides them).
    """
    w = 2.0 ** (omega.l - k0)
    return eval_beta((np.asarray(x, dtype=float) - omega.c_right) / w)


def _right_half_centers(l: int, k0: int):
    w = 2.0 ** (l - k0)
    count = int(round(4.0 / w))
    return -2.0 + (np.arange(count) + 0.75) * w, w


def eval_beta_l(x, l: int, k0: int, periodic: bool = False):
    """Sum of beta_omega over the slope intervals of scale l.

    With ``periodic=False`` the sum runs over intervals contained in
    [-2, 2] only. With ``periodic=True`` the center lattice is extended
    over all of R, which makes the sum exactly w-periodic; the two agree
    away from a 2w-neighbourhood of +-2.
    """
    x = np.asarray(x, dtype=float)
    w = 2.0 ** (l - k0)
    if periodic:
        # nearest lattice center and its neighbours cover the support
        base = np.round((x + 2.0 - 0.75 * w) / w)
        total = np.zeros_like(x)
        for off in (-2, -1, 0, 1, 2):
            c = -2.0 + (base + off + 0.75) * w
            total = total + eval_beta((x - c) / w)
        return total
    centers, w = _right_half_centers(l, k0)
    total = np.zeros_like(x)
    for c in centers:
        total = total + eval_beta((x - c) / w)
    return total


def gamma_l(x, l: int, k0: int):
    """Average of beta_l over the window [x-1, x+1], halved.

    Uses the periodized center lattice, under which the window covers an
    integer number of periods and the average is the same constant for
    every x, l and k0.
    """
    x = np.asarray(x, dtype=float)
    w = 2.0 ** (l - k0)
    panels = int(round(2.0 / w))
    nodes, wts = np.polynomial.legendre.leggauss(24)
    out = np.zeros_like(x)
    for xi, wi in zip(nodes, wts):
        for j in range(panels):
            t = -1.0 + (j + 0.5 * (xi + 1.0)) * w
            out = out + 0.5 * (w / 2.0) * wi * eval_beta_l(x + t, l, k0, periodic=True)
    return out if out.ndim else float(out)


@functools.lru_cache(maxsize=None)
def delta_value(k0: int, l: int) -> float:
    """Constant value of gamma_l on [-1, 1], computed once by adaptive
    quadrature (relative tolerance 1e-10) and cached per (k0, l)."""
    if not 0 <= l <= k0:
        raise ValueError(f"scale l={l} outside [0, k0={k0}]")
    val, _ = quad(
        lambda t: eval_beta_l(np.array([t]), l, k0, periodic=True)[0],
        -1.0,
        1.0,
        epsrel=1e-10,
        epsabs=0.0,
        limit=400,
    )
    return 0.5 * val


def eval_m_omega(xi, eta_freq, omega, k0: int):
    """Tile multiplier beta_tilde(2**-k0 eta) * beta_omega(xi / eta).

    Zero when eta vanishes (beta_tilde keeps eta away from 0 anyway).
    """
    xi = np.asarray(xi, dtype=float)
    eta_freq = np.asarray(eta_freq, dtype=float)
    radial = eval_beta_tilde(np.ldexp(eta_freq, -k0))
    safe = np.where(eta_freq != 0.0, eta_freq, 1.0)
    angular = eval_beta_omega(xi / safe, omega, k0)
    out = np.where(eta_freq != 0.0, radial * angular, 0.0)
    return out if out.ndim else float(out)


def eval_m_lt(xi, eta_freq, l: int, t: float, k0: int):
    """Scale multiplier beta_tilde(2**-k0 eta) * beta_l(t + xi / eta)."""
    xi = np.asarray(xi, dtype=float)
    eta_freq = np.asarray(eta_freq, dtype=float)
    radial = eval_beta_tilde(np.ldexp(eta_freq, -k0))
    safe = np.where(eta_freq != 0.0, eta_freq, 1.0)
    angular = eval_beta_l(t + xi / safe, l, k0)
    out = np.where(eta_freq != 0.0, radial * angular, 0.0)
    return out if out.ndim else float(out)


def eval_m_l(xi, eta_freq, l: int, k0: int):
    """Averaged multiplier beta_tilde(2**-k0 eta) * gamma_l(xi / eta).

    gamma_l is the constant delta_value(k0, l) under the periodized
    lattice, so the angular factor drops out.
    """
    xi = np.asarray(xi, dtype=float)
    eta_freq = np.asarray(eta_freq, dtype=float)
    radial = eval_beta_tilde(np.ldexp(eta_freq, -k0))
    out = radial * delta_value(k0, l)
    out = np.where(eta_freq != 0.0, out, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BumpSystem:
    """The concrete bump family used throughout.

    ``delta`` is the constant value of gamma_l on [-1, 1]; it equals
    the total mass of beta (3 for this symmetric ramp) independently of
    (k0, l).
    """

    eta: SmoothStep = _ETA
    delta: float = 3.0

    def psi0(self, t):
        return eval_psi(0, t)

    def beta(self, x):
        return eval_beta(x)

    def beta_tilde(self, x):
        return eval_beta_tilde(x)


DEFAULT_BUMPS = BumpSystem()
