"""Exact r-variation of finite sequences.

The r-variation of a sequence is the supremum over increasing index
subsequences k_1 < ... < k_N of (sum_i |a_{k_{i+1}} - a_{k_i}|^r)^(1/r).
An O(n^2) dynamic program computes it exactly for r >= 1 together with a
maximizing jump sequence; a 2^n enumeration serves as an independent
oracle, and ``linearize`` produces the Hoelder-dual coefficients that
recover the variation as a linear functional of the jump increments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "VariationResult",
    "variation_norm",
    "brute_force_variation",
    "linearize",
    "variation_batch",
    "jump_positions_batch",
]


@dataclass(frozen=True)
class VariationResult:
    """Variation value together with a maximizing jump index sequence.

    ``value ** r == sum_i |a[jumps[i+1]] - a[jumps[i]]| ** r`` and the
    jump indices are strictly increasing within the input range. For a
    sequence with no nonzero increment, ``jumps`` is empty.
    """

    value: float
    jumps: tuple[int, ...]
    r: float


def _as_complex(seq) -> np.ndarray:
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a nonempty 1-D sequence")
    return arr.astype(complex)


def variation_norm(seq, r: float) -> VariationResult:
    """Exact r-variation by dynamic programming.

    best(j) = max over subsequences ending at j of the accumulated
    r-th power sum; ties are broken toward the smallest predecessor so the
    recovered jump sequence is reproducible run to run.
    """
    a = _as_complex(seq)
    if not r > 1.0:
        raise ValueError(f"variation exponent must be > 1, got r={r}")
    n = a.size
    best = np.zeros(n)
    pred = np.full(n, -1, dtype=int)
    for j in range(1, n):
        # candidate scores from every earlier endpoint; strict > keeps the
        # earliest maximizer, which also keeps single-jump paths when tied
        for i in range(j):
            cand = best[i] + np.abs(a[j] - a[i]) ** r
            if cand > best[j] + 1e-18 * max(1.0, cand):
                best[j] = cand
                pred[j] = i
    end = int(np.argmax(best))
    value = best[end] ** (1.0 / r) if best[end] > 0.0 else 0.0
    jumps: list[int] = []
    if best[end] > 0.0:
        k = end
        while k >= 0:
            jumps.append(k)
            k = pred[k]
        jumps.reverse()
    return VariationResult(value=float(value), jumps=tuple(jumps), r=float(r))


def brute_force_variation(seq, r: float) -> float:
    """Enumerate every subsequence of length >= 2 and return the maximal
    r-variation. Only for n <= 20."""
    a = _as_complex(seq)
    if not r > 1.0:
        raise ValueError(f"variation exponent must be > 1, got r={r}")
    n = a.size
    if n > 20:
        raise ValueError(f"brute force enumeration limited to n <= 20, got {n}")
    best = 0.0
    for mask in range(1, 1 << n):
        if mask & (mask - 1) == 0:
            continue  # single element, no pair
        idx = [i for i in range(n) if mask >> i & 1]
        diffs = np.abs(np.diff(a[idx]))
        best = max(best, float(np.sum(diffs**r)))
    return best ** (1.0 / r) if best > 0.0 else 0.0


def linearize(seq, r: float) -> np.ndarray:
    """Dual coefficients of the maximizing jumps.

    With increments D_i = a[k_{i+1}] - a[k_i] along the maximizing jump
    sequence and V the variation value, returns
    ``c_i = |D_i|**(r-1) * conj(D_i)/|D_i| / V**(r-1)`` so that
    sum_i c_i D_i = V and sum_i |c_i|**r' = 1 with 1/r + 1/r' = 1.
    Returns an empty array when V = 0.
    """
    a = _as_complex(seq)
    res = variation_norm(a, r)
    if res.value == 0.0:
        return np.zeros(0, dtype=complex)
    idx = np.asarray(res.jumps)
    deltas = a[idx[1:]] - a[idx[:-1]]
    mags = np.abs(deltas)
    phases = np.conj(deltas) / np.where(mags > 0, mags, 1.0)
    return (mags ** (r - 1.0)) * phases / res.value ** (r - 1.0)


def variation_batch(series: np.ndarray, r: float):
    """Vectorized r-variation of many sequences at once.

    ``series`` has shape (..., L); the variation runs along the last
    axis. Returns ``(values, pred, end)`` where ``values`` is the
    variation, ``pred`` the predecessor table of the dynamic program
    (shape (..., L), -1 terminates a chain) and ``end`` the argmax
    endpoint, from which maximizing jump sequences can be reconstructed.
    """
    if not r > 1.0:
        raise ValueError(f"variation exponent must be > 1, got r={r}")
    arr = np.asarray(series)
    L = arr.shape[-1]
    lead = arr.shape[:-1]
    best = np.zeros(lead + (L,))
    pred = np.full(lead + (L,), -1, dtype=np.int8)
    for j in range(1, L):
        for i in range(j):
            cand = best[..., i] + np.abs(arr[..., j] - arr[..., i]) ** r
            better = cand > best[..., j] + 1e-18
            if np.any(better):
                best[..., j] = np.where(better, cand, best[..., j])
                pred[..., j] = np.where(better, np.int8(i), pred[..., j])
    end = np.argmax(best, axis=-1)
    values = np.take_along_axis(best, end[..., None], axis=-1)[..., 0] ** (1.0 / r)
    values = np.where(np.take_along_axis(best, end[..., None], axis=-1)[..., 0] > 0, values, 0.0)
    return values, pred, end.astype(np.int8)


def jump_positions_batch(pred: np.ndarray, end: np.ndarray):
    """Jump index sequences from a ``variation_batch`` table.

    Returns ``(jumps, count)`` where ``jumps`` has shape (..., L) with the
    strictly increasing maximizing indices in its leading entries (padded
    with -1) and ``count`` is the chain length. A chain of length < 2
    means the variation vanished.
    """
    L = pred.shape[-1]
    lead = pred.shape[:-1]
    flatpred = pred.reshape(-1, L)
    M = flatpred.shape[0]
    cur = end.reshape(-1).astype(np.int64).copy()
    rows = np.arange(M)
    rev = np.full((M, L), -1, dtype=np.int8)
    count = np.zeros(M, dtype=np.int64)
    alive = np.ones(M, dtype=bool)
    for _ in range(L):
        idx = rows[alive]
        if idx.size == 0:
            break
        rev[idx, count[alive]] = cur[alive].astype(np.int8)
        count[alive] += 1
        prev = flatpred[idx, cur[alive]].astype(np.int64)
        go = prev >= 0
        nxt = np.zeros(M, dtype=bool)
        nxt[idx[go]] = True
        cur[idx[go]] = prev[go]
        alive = nxt
    jumps = np.full((M, L), -1, dtype=np.int8)
    for p in range(L):
        has = count > p
        jumps[has, p] = rev[has, count[has] - 1 - p]
    return jumps.reshape(lead + (L,)), count.reshape(lead)
