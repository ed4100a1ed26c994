"""Variation-norm directional Hilbert transforms on the discrete torus.

Numerical toolkit for directional singular integrals along planar Lipschitz
vector fields: smooth frequency cutoffs, exact r-variation of finite
sequences, a spectral grid engine, directional quadrature operators, a
time-frequency tile/wavelet layer, and the tree-selection combinatorics,
together with an experiment harness that measures the weak-type and L^p
behaviour of the composed operators.
"""

__version__ = "0.1.0"

from . import bumps, fields, grid, tiles, transforms, trees, varnorm  # noqa: F401
