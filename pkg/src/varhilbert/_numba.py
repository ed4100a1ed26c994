"""Compiled inner loops for the directional quadrature.

Kept separate so the rest of the package stays importable and testable
without waiting for compilation; everything here is dumb arithmetic over
preassembled arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["line_quadrature"]


@njit(cache=True, fastmath=True)
def line_quadrature(fine, ut, idx1, tvals, wre, wim, s1, s2, out):
    """Accumulate sum_t w(t) * f(x - v(x) t) over every grid point.

    fine : (N1, N2) complex samples of f, axis 0 = x1 at spacing 1/N1,
           axis 1 = x2 at spacing 1/N2 (upsampled copies of the grid)
    ut   : (n, n) slope samples TRANSPOSED, ut[j1, j2] = u at (j1 h, j2 h)
    idx1 : integer x1 offsets of the quadrature nodes on the fine axis
           (t = idx1/N1 exactly, so x1 - t lands on fine rows)
    tvals: the node values t, wre/wim: complex quadrature weights
    s1   : N1 // n, s2: N2 // n
    out  : (n, n) complex output, row index = x2

    Loop order keeps one fine row in cache per quadrature node and walks
    it forward with x2, which the prefetcher likes.
    """
    N1, N2 = fine.shape
    n = ut.shape[0]
    nt = idx1.shape[0]
    accr = np.empty(n)
    acci = np.empty(n)
    for j1 in range(n):
        b1 = j1 * s1
        for j2 in range(n):
            accr[j2] = 0.0
            acci[j2] = 0.0
        for it in range(nt):
            i1 = (b1 - idx1[it]) % N1
            row = fine[i1]
            tN2 = tvals[it] * N2
            wr = wre[it]
            wi = wim[it]
            for j2 in range(n):
                p2 = j2 * s2 - ut[j1, j2] * tN2
                fl = np.floor(p2)
                fr = p2 - fl
                i2 = int(fl) % N2
                i2b = i2 + 1
                if i2b == N2:
                    i2b = 0
                v0 = row[i2]
                v1 = row[i2b]
                vr = v0.real + fr * (v1.real - v0.real)
                vi = v0.imag + fr * (v1.imag - v0.imag)
                accr[j2] += wr * vr - wi * vi
                acci[j2] += wr * vi + wi * vr
        for j2 in range(n):
            out[j2, j1] = complex(accr[j2], acci[j2])
