"""Tile order, trees, density/size stopping time and line diagnostics.

Tiles are partially ordered by "spatially inside a dilate, frequency
interval containing": s1 <= s2 when the rectangle of s1 lies in the
C-dilate of the rectangle of s2 and omega(s2) is a subinterval of
omega(s1). A tree is everything below a chosen top among the remaining
stock. The selection loop alternates a density sweep and a size sweep at
geometrically decreasing thresholds, so each extracted tree carries a
dyadic (delta, sigma) label with the usual sandwich: member densities
stay below 2 delta and measured sizes below 2 sigma.

The line-density diagnostic partitions the plane around a horizontal-top
tree into cells, measures how the exceptional set fills individual
horizontal rows of each cell against its area-level density, and checks
the slope drift bound that Lipschitz regularity imposes along vertical
segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bumps import eval_psi
from .fields import GRADIENT_BOUND, VectorField
from .grid import GridFunction, freq_grids
from .tiles import SlopeInterval, Tile, wavelet_profile
from .varnorm import jump_positions_batch, variation_batch

__all__ = [
    "Tree",
    "TreeFamilies",
    "tile_order",
    "E_set",
    "chi_weights",
    "density",
    "size_of_collection",
    "select_trees",
    "tree_bilinear_form",
    "line_density_diagnostic",
    "LineDensityReport",
]

_EPS = 1e-12
# cap on the shell amplification 2^(100 k) to keep the arithmetic finite;
# anything beyond is vacuously satisfied at desk scale
_SHELL_CAP = 2.0**60


def _wrap(x):
    """Nearest representative on the torus, in [-1/2, 1/2)."""
    return np.asarray(x) - np.round(np.asarray(x))


def tile_order(s1: Tile, s2: Tile, C: float = 10.0) -> bool:
    """s1 <= s2: rectangle of s1 inside the C-dilate of s2's rectangle and
    omega(s2) contained in omega(s1)."""
    if not (s2.omega.lo >= s1.omega.lo - _EPS and s2.omega.hi <= s1.omega.hi + _EPS):
        return False
    x1c2, x2c2 = s2.center
    corners = s1.corners()
    d1 = _wrap(corners[:, 0] - x1c2)
    center_line = x2c2 + s2.slope * d1
    d2 = _wrap(corners[:, 1] - center_line)
    return bool(
        np.all(np.abs(d1) <= C * s2.length / 2 + _EPS)
        and np.all(np.abs(d2) <= C * s2.width / 2 + _EPS)
    )


def E_set(target, E: np.ndarray, fld: VectorField) -> np.ndarray:
    """Points of E whose slope lies in the concentric double of the
    target's frequency interval.

    ``target`` is a tile, a slope interval, or a raw (lo, hi) interval
    which is used as is (no doubling).
    """
    if isinstance(target, Tile):
        lo, hi = target.omega.doubled()
    elif isinstance(target, SlopeInterval):
        lo, hi = target.doubled()
    else:
        lo, hi = target
    return E & (fld.u >= lo) & (fld.u <= hi)


def chi_weights(tile: Tile, n: int) -> np.ndarray:
    """Mass-one concentration weight adapted to the tile frame.

    chi(x) = 1/(1+|x|^100) evaluated in sheared tile coordinates, with
    the x1-periodized images that matter for long tiles, then normalized
    to unit discrete mass so densities stay in [0, 1] exactly.
    """
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x)  # row = x2
    x1c, x2c = tile.center
    total = np.zeros((n, n))
    d1_base = _wrap(X1 - x1c)
    for a in (-1.0, 0.0, 1.0):
        d1 = d1_base + a
        d2 = _wrap(X2 - (x2c + tile.slope * d1))
        rho = np.hypot(d1 / tile.length, d2 / tile.width)
        total += 1.0 / (1.0 + rho**100)
    mass = total.sum() / (n * n)
    return total / (mass * n * n)


def density(tile: Tile, E: np.ndarray, fld: VectorField) -> float:
    """Weighted mass of E_s under the tile-adapted concentration weight."""
    w = chi_weights(tile, fld.n)
    return float(np.sum(w[E_set(tile, E, fld)]))


@dataclass(frozen=True)
class Tree:
    """A top tile with every member below it, plus its selection labels.

    ``t1`` collects the members whose right frequency half misses the
    top's interval (the lacunary part); ``t2`` is the complement, which
    includes members sharing the top's interval.
    """

    top: Tile
    members: tuple[Tile, ...]
    delta: float
    sigma: float
    max_dense_bar: float
    size_measured: float

    @property
    def t1(self) -> tuple[Tile, ...]:
        return tuple(
            s for s in self.members if self.top.omega.hi <= s.omega.center + _EPS
        )

    @property
    def t2(self) -> tuple[Tile, ...]:
        t1set = set(self.t1)
        return tuple(s for s in self.members if s not in t1set)

    @property
    def top_area(self) -> float:
        return self.top.area


@dataclass
class TreeFamilies:
    """Result of the stopping-time selection: all trees, the counting
    constants per dyadic (delta, sigma) family, and the inputs' sizes."""

    trees: list[Tree]
    order_constant: float
    e_measure: float
    c_size: float
    c_dense: float
    families: dict = dc_field(default_factory=dict)


class _Selection:
    """Precomputed geometry over one tile list."""

    def __init__(self, tiles: list[Tile], f: GridFunction, E: np.ndarray, fld: VectorField, C: float):
        from .tiles import coefficients_for_omega

        self.tiles = tiles
        self.C = C
        m = len(tiles)
        self.area = np.array([t.area for t in tiles])
        self.om_lo = np.array([t.omega.lo for t in tiles])
        self.om_hi = np.array([t.omega.hi for t in tiles])
        self.om_c = np.array([t.omega.center for t in tiles])
        self.x1c = np.array([t.center[0] for t in tiles])
        self.x2c = np.array([t.center[1] for t in tiles])
        self.length = np.array([t.length for t in tiles])
        self.width = np.array([t.width for t in tiles])
        self.slope = np.array([t.slope for t in tiles])
        # coefficients, batched per slope interval
        by_om: dict[SlopeInterval, list[int]] = {}
        for i, t in enumerate(tiles):
            by_om.setdefault(t.omega, []).append(i)
        self.coeff = np.zeros(m, dtype=complex)
        for om, idxs in by_om.items():
            self.coeff[idxs] = coefficients_for_omega(f, om, [tiles[i] for i in idxs])
        self.coeff2 = np.abs(self.coeff) ** 2
        self.dense = np.array([density(t, E, fld) for t in tiles])
        self.order = self._order_matrix()
        # one-tree membership: member i under top j needs omega(top)
        # inside the left half of omega(i)
        self.onecond = self.order & (self.om_hi[None, :] <= self.om_c[:, None] + _EPS)
        np.fill_diagonal(self.onecond, False)

    def _order_matrix(self) -> np.ndarray:
        m = len(self.tiles)
        corners = np.stack([t.corners() for t in self.tiles])  # (m, 4, 2)
        out = np.zeros((m, m), dtype=bool)
        for j in range(m):
            freq = (self.om_lo[j] >= self.om_lo - _EPS) & (self.om_hi[j] <= self.om_hi + _EPS)
            d1 = _wrap(corners[:, :, 0] - self.x1c[j])
            d2 = _wrap(corners[:, :, 1] - (self.x2c[j] + self.slope[j] * d1))
            sp = np.all(np.abs(d1) <= self.C * self.length[j] / 2 + _EPS, axis=1) & np.all(
                np.abs(d2) <= self.C * self.width[j] / 2 + _EPS, axis=1
            )
            out[:, j] = freq & sp
        return out

    def dense_bar(self, stock: np.ndarray) -> np.ndarray:
        """sup of dense over tiles above each tile, within the stock."""
        d = np.where(stock, self.dense, 0.0)
        return np.max(np.where(self.order & stock[None, :], d[None, :], 0.0), axis=1)

    def anchored_size_sq(self, stock: np.ndarray) -> np.ndarray:
        """Per candidate top: coefficient mass of its maximal one-tree
        (own coefficient included), divided by the top area."""
        w = np.where(stock, self.coeff2, 0.0)
        mass = (w[:, None] * (self.onecond & stock[None, :])).sum(axis=0)
        mass = mass + np.where(stock, self.coeff2, 0.0)
        return np.where(stock, mass / self.area, 0.0)

    def tie_key(self, i: int):
        return (self.om_c[i], self.area[i], self.x1c[i], self.x2c[i])


def size_of_collection(tiles: list[Tile], f: GridFunction, fld: VectorField, C: float = 10.0) -> float:
    """Largest anchored one-tree coefficient mass per unit top area."""
    if not tiles:
        return 0.0
    sel = _Selection(tiles, f, np.zeros((fld.n, fld.n), dtype=bool), fld, C)
    stock = np.ones(len(tiles), dtype=bool)
    return float(np.sqrt(np.max(sel.anchored_size_sq(stock))))


def _dyadic_ceil(x: float) -> float:
    if x <= 0.0:
        return 2.0**-80
    return 2.0 ** math.ceil(math.log2(x) - 1e-12)


def select_trees(
    tiles: list[Tile],
    f: GridFunction,
    E: np.ndarray,
    fld: VectorField,
    order_constant: float = 10.0,
) -> TreeFamilies:
    """Stopping-time partition of the tiles into labeled trees.

    Rounds run over halving thresholds (delta, sigma). Each round first
    extracts trees anchored at density-heavy tiles (dense >= delta,
    coarsest first), then greedily extracts trees whose anchored one-tree
    size reaches sigma, tops ordered by frequency position then area.
    Every tile lands in exactly one tree. Families keyed by the label pair
    report sum of top areas and the implied counting constants.
    """
    sel = _Selection(tiles, f, E, fld, order_constant)
    m = len(tiles)
    stock = np.ones(m, dtype=bool)
    sigma = _dyadic_ceil(float(np.sqrt(np.max(sel.anchored_size_sq(stock)))) if m else 0.0)
    delta = _dyadic_ceil(float(np.max(sel.dense)) if m else 0.0)
    floor_s = sigma * 2.0**-60
    floor_d = delta * 2.0**-60
    trees: list[Tree] = []

    def extract(top_idx: int) -> Tree:
        members_mask = stock & sel.order[:, top_idx]
        idxs = np.nonzero(members_mask)[0]
        db = sel.dense_bar(stock)
        tree = Tree(
            top=sel.tiles[top_idx],
            members=tuple(sel.tiles[i] for i in idxs),
            delta=delta,
            sigma=sigma,
            max_dense_bar=float(np.max(db[idxs])) if idxs.size else 0.0,
            size_measured=_measured_size(sel, members_mask, top_idx),
        )
        stock[idxs] = False
        return tree

    while stock.any():
        # density sweep
        while True:
            cand = np.nonzero(stock & (sel.dense >= delta))[0]
            if cand.size == 0:
                break
            top = min(cand, key=lambda i: (-sel.area[i],) + sel.tie_key(i))
            trees.append(extract(int(top)))
        # size sweep
        while stock.any():
            sq = sel.anchored_size_sq(stock)
            cand = np.nonzero(stock & (sq >= sigma * sigma))[0]
            if cand.size == 0:
                break
            top = min(cand, key=sel.tie_key)
            trees.append(extract(int(top)))
        if sigma <= floor_s and delta <= floor_d:
            # leftovers: zero-mass tiles; anchor at coarsest remaining
            while stock.any():
                rest = np.nonzero(stock)[0]
                top = min(rest, key=lambda i: (-sel.area[i],) + sel.tie_key(i))
                trees.append(extract(int(top)))
            break
        sigma /= 2.0
        delta /= 2.0

    e_measure = float(E.sum()) / (fld.n * fld.n)
    families: dict = {}
    for t in trees:
        fam = families.setdefault((t.delta, t.sigma), {"top_area": 0.0, "count": 0})
        fam["top_area"] += t.top_area
        fam["count"] += 1
    c_size = 0.0
    c_dense = 0.0
    for (d, s), fam in families.items():
        c_size = max(c_size, s * s * fam["top_area"])
        if e_measure > 0:
            c_dense = max(c_dense, d * fam["top_area"] / e_measure)
    return TreeFamilies(
        trees=trees,
        order_constant=order_constant,
        e_measure=e_measure,
        c_size=c_size,
        c_dense=c_dense,
        families=families,
    )


def _measured_size(sel: _Selection, members_mask: np.ndarray, top_idx: int) -> float:
    """Size of the extracted tree as its own collection."""
    if not members_mask.any():
        return 0.0
    sq = sel.anchored_size_sq(members_mask)
    return float(np.sqrt(np.max(np.where(members_mask, sq, 0.0))))


# ---------------------------------------------------------------------------
# tree bilinear form


@dataclass(frozen=True)
class _PhaseTables:
    n: int
    table: np.ndarray  # exp(2 pi i a b / n), (n, n)


_phase_cache: dict[int, np.ndarray] = {}


def _phase_table(n: int) -> np.ndarray:
    if n not in _phase_cache:
        a = np.arange(n)
        _phase_cache[n] = np.exp(2j * np.pi * np.outer(a, a) / n)
    return _phase_cache[n]


def _tree_scale_data(tree: Tree, f: GridFunction):
    """Per scale of the tree: its unique slope interval, support indices,
    member coefficients and centers."""
    from .tiles import coefficient

    n = f.n
    by_scale: dict[int, list[Tile]] = {}
    for s in tree.members:
        by_scale.setdefault(s.l, []).append(s)
    out = []
    for l in sorted(by_scale):
        members = by_scale[l]
        omegas = {s.omega for s in members}
        for om in sorted(omegas, key=lambda o: o.index):
            ts = [s for s in members if s.omega == om]
            wav = wavelet_profile(om, om.k0, n)
            i2s, i1s = wav.support_indices()
            m1g, m2g = freq_grids(n)
            coeffs = np.array([coefficient(f, s) for s in ts])
            out.append(
                {
                    "l": l,
                    "omega": om,
                    "tiles": ts,
                    "coeffs": coeffs,
                    "m1": m1g[i2s, i1s].astype(float),
                    "m2": m2g[i2s, i1s].astype(float),
                    "prof": wav.spectrum_profile[i2s, i1s],
                }
            )
    return out


def tree_bilinear_form(
    tree: Tree, f: GridFunction, E: np.ndarray, fld: VectorField, r: float
) -> dict:
    """sum over members of |<f, phi_s> <a_s phi_s^H, 1_E>| with the
    linearizing coefficients a_s taken pointwise from the maximizing jumps
    of the tree's own scale-partial sums on E.

    The transformed wavelets are realized through the exact directional
    multiplier psi_l(m1 + u(x) m2); the quadrature path agrees with it to
    its stated tolerance and is far too slow per tile. Returns the value,
    the reference product sigma * delta * |top|, and their ratio.
    """
    n = f.n
    pts = np.nonzero(E)
    npts = pts[0].size
    data = _tree_scale_data(tree, f)
    if npts == 0 or not data:
        return {"value": 0.0, "reference": tree.sigma * tree.delta * tree.top_area, "ratio": 0.0}
    u_p = fld.u[pts]
    j2_p, j1_p = pts
    ph = _phase_table(n)
    scales = sorted({d["l"] for d in data})
    # forward sums of the aggregated member wavelets at the masked points
    fwd = {l: np.zeros(npts, dtype=complex) for l in scales}
    for d in data:
        l = d["l"]
        ghat = np.zeros(d["m1"].size, dtype=complex)
        area = d["tiles"][0].area
        for s, c in zip(d["tiles"], d["coeffs"]):
            x1c, x2c = s.center
            ghat += c * math.sqrt(area) * d["prof"] * np.exp(
                -2j * np.pi * (d["m1"] * x1c + d["m2"] * x2c)
            )
        fwd[l] += _masked_multiplier_forward(ghat, d["m1"], d["m2"], l, u_p, j1_p, j2_p, ph)
    # partial sums with a leading empty sum, pointwise linearization
    L = len(scales)
    seq = np.zeros((npts, L + 1), dtype=complex)
    acc = np.zeros(npts, dtype=complex)
    for q, l in enumerate(scales):
        acc = acc + fwd[l]
        seq[:, q + 1] = acc
    values, pred, end = variation_batch(seq, r)
    jumps, counts = jump_positions_batch(pred, end)
    a_coeff = _dual_coeff_per_position(seq, values, jumps, counts, r)  # (npts, L+1)
    # adjoint weights per scale, then per-tile inner products
    total = 0.0
    h2 = 1.0 / (n * n)
    for d in data:
        l = d["l"]
        q = scales.index(l) + 1
        a_l = a_coeff[:, q]
        if not np.any(a_l):
            continue
        w = _masked_multiplier_adjoint(a_l * h2, d["m1"], d["m2"], l, u_p, j1_p, j2_p, ph)
        area = d["tiles"][0].area
        for s, c in zip(d["tiles"], d["coeffs"]):
            x1c, x2c = s.center
            phis = math.sqrt(area) * d["prof"] * np.exp(
                -2j * np.pi * (d["m1"] * x1c + d["m2"] * x2c)
            )
            total += abs(c) * abs(np.sum(phis * w))
    reference = tree.sigma * tree.delta * tree.top_area
    return {
        "value": float(total),
        "reference": float(reference),
        "ratio": float(total / reference) if reference > 0 else float("inf"),
    }


def _masked_multiplier_forward(ghat, m1, m2, l, u_p, j1_p, j2_p, ph):
    n = ph.shape[0]
    out = np.zeros(u_p.size, dtype=complex)
    chunk = 256
    for lo in range(0, m1.size, chunk):
        sl = slice(lo, min(lo + chunk, m1.size))
        mult = eval_psi(l, m1[sl][None, :] + u_p[:, None] * m2[sl][None, :])
        phases = ph[np.mod(m1[sl].astype(int), n)][:, j1_p].T * ph[np.mod(m2[sl].astype(int), n)][:, j2_p].T
        out += np.einsum("pm,pm->p", mult * phases, np.broadcast_to(ghat[sl], mult.shape))
    return out


def _masked_multiplier_adjoint(v_p, m1, m2, l, u_p, j1_p, j2_p, ph):
    n = ph.shape[0]
    out = np.zeros(m1.size, dtype=complex)
    chunk = 256
    for lo in range(0, m1.size, chunk):
        sl = slice(lo, min(lo + chunk, m1.size))
        mult = eval_psi(l, m1[sl][None, :] + u_p[:, None] * m2[sl][None, :])
        phases = ph[np.mod(m1[sl].astype(int), n)][:, j1_p].T * ph[np.mod(m2[sl].astype(int), n)][:, j2_p].T
        out[sl] = (mult * phases * v_p[:, None]).sum(axis=0)
    return out


def _dual_coeff_per_position(seq, values, jumps, counts, r):
    """Spread the dual jump coefficients onto sequence positions: position
    q gets a_i when jumps[i] < q <= jumps[i+1]."""
    npts, L = seq.shape
    out = np.zeros((npts, L), dtype=complex)
    V = np.where(values > 0, values, 1.0)
    maxj = int(counts.max(initial=0))
    for i in range(maxj - 1):
        has = counts > i + 1
        if not np.any(has):
            break
        k_i = np.where(has, jumps[:, i], 0).astype(np.int64)
        k_n = np.where(has, jumps[:, i + 1], 0).astype(np.int64)
        s_i = np.take_along_axis(seq, k_i[:, None], axis=1)[:, 0]
        s_n = np.take_along_axis(seq, k_n[:, None], axis=1)[:, 0]
        delta = s_n - s_i
        mag = np.abs(delta)
        phase = np.conj(delta) / np.where(mag > 0, mag, 1.0)
        a = np.where(mag > 0, mag ** (r - 1.0), 0.0) * phase / V ** (r - 1.0)
        pos = np.arange(L)[None, :]
        inblock = has[:, None] & (pos > k_i[:, None]) & (pos <= k_n[:, None])
        out = np.where(inblock, a[:, None], out)
    return out


# ---------------------------------------------------------------------------
# line-density diagnostic


@dataclass
class LineDensityReport:
    """Per-cell occupancy of the exceptional set against the density label.

    ``cells`` rows carry the shell index, cell size, the area fraction of
    E_P in the cell, the worst and mean per-row fractions, and the margin
    log2(fraction / (shell * delta)). A cell is row-flagged when its worst
    row exceeds 8 * shell * delta while vertical drift of the slope would
    forbid that for a Lipschitz field; ``drift_ok`` reports the discrete
    drift bound itself.
    """

    delta: float
    cells: list[dict]
    drift_ok: bool
    row_flagged: bool
    area_flagged: bool
    unwitnessed: int


def _dyadic_j1(tree: Tree, n: int) -> list[tuple[float, float]]:
    """Maximal dyadic x1-intervals whose concentric triple contains no
    member tile."""
    lens = [s.length for s in tree.members]
    if not lens:
        return [(0.0, 1.0)]
    out: list[tuple[float, float]] = []

    def contains_tile(lo: float, width: float) -> bool:
        if 3.0 * width >= 1.0 - _EPS:
            return True
        cj = lo + width / 2
        for s in tree.members:
            c_s = s.x1_lo + s.length / 2
            if abs(float(_wrap(c_s - cj))) <= (3.0 * width - s.length) / 2 + _EPS:
                return True
        return False

    def recurse(lo: float, width: float):
        if not contains_tile(lo, width):
            out.append((lo, width))
            return
        if width * n <= 1.0 + _EPS:
            out.append((lo, width))  # grid floor; cannot subdivide further
            return
        recurse(lo, width / 2)
        recurse(lo + width / 2, width / 2)

    recurse(0.0, 1.0)
    return out


def _interval_dist(a_lo, a_hi, b_lo, b_hi):
    """Distance of two x2 intervals on the torus."""
    c = (a_lo + a_hi) / 2 - (b_lo + b_hi) / 2
    gap = abs(float(_wrap(c))) - (a_hi - a_lo) / 2 - (b_hi - b_lo) / 2
    return max(0.0, gap)


def line_density_diagnostic(
    tree: Tree,
    E: np.ndarray,
    fld: VectorField,
    max_shell: int = 6,
    order_constant: float = 10.0,
) -> LineDensityReport:
    """Cell-by-cell row occupancy of the exceptional set of a
    horizontal-top tree.

    The plane splits into maximal dyadic columns free of member tiles
    crossed with strips a third of the top's height. Each cell is placed
    in a shell by its vertical distance from the top, a minimal-area
    witness tile nearby fixes the slope interval, and E_P is the part of
    E whose slope lies in the doubled witness interval. Lipschitz fields
    fill rows no worse than cells; a row whose occupancy exceeds
    8 * 2^(100 k) * delta is flagged. The discrete drift bound
    |u(x0, y) - u(x0, y0)| <= 2 |y - y0| is verified per cell column.
    """
    top = tree.top
    if abs(top.omega.center) > top.omega.width / 2 + _EPS:
        raise ValueError("the diagnostic needs a horizontal top; rotate the tree first")
    n = fld.n
    delta = tree.delta if tree.delta > 0 else max(tree.max_dense_bar, 1e-30)
    pi2_top = top.pi2
    top_height = pi2_top[1] - pi2_top[0]
    strip_h = top_height / 3.0
    nstrips = int(math.ceil(1.0 / strip_h - 1e-9))
    j1_cells = _dyadic_j1(tree, n)
    x = np.arange(n) / n
    cells = []
    unwitnessed = 0
    drift_ok = True
    row_flagged = False
    area_flagged = False
    for lo, width in j1_cells:
        cols = np.nonzero((x >= lo - _EPS) & (x < lo + width - _EPS))[0]
        if cols.size == 0:
            continue
        for sidx in range(nstrips):
            s_lo = sidx * strip_h
            s_hi = min((sidx + 1) * strip_h, 1.0)
            rows = np.nonzero((x >= s_lo - _EPS) & (x < s_hi - _EPS))[0]
            if rows.size == 0:
                continue
            dist = _interval_dist(s_lo, s_hi, pi2_top[0], pi2_top[1]) / top_height
            shell = 0 if dist <= 1.0 else int(math.ceil(math.log2(dist)))
            if shell > max_shell:
                continue
            witness = _witness_tile(tree, lo, width, s_lo, s_hi, shell, order_constant)
            sub_u = fld.u[np.ix_(rows, cols)]
            # drift bound along each column of the cell
            if rows.size > 1:
                step = np.max(np.abs(np.diff(sub_u, axis=0)))
                if step > GRADIENT_BOUND / n * (1.0 + 1e-9):
                    drift_ok = False
            if witness is None:
                unwitnessed += 1
                continue
            dlo, dhi = witness.omega.doubled()
            ep = E[np.ix_(rows, cols)] & (sub_u >= dlo) & (sub_u <= dhi)
            area_frac = float(ep.mean())
            row_frac = ep.mean(axis=1)
            shell_amp = min(2.0 ** (100.0 * shell), _SHELL_CAP)
            bound = 8.0 * shell_amp * delta
            cell = {
                "shell": shell,
                "rows": int(rows.size),
                "cols": int(cols.size),
                "area_frac": area_frac,
                "row_max": float(row_frac.max()),
                "row_mean": float(row_frac.mean()),
                "witness_area": witness.area,
                "area_ok": area_frac <= bound,
                "row_ok": float(row_frac.max()) <= bound,
            }
            if not cell["area_ok"]:
                area_flagged = True
            if not cell["row_ok"]:
                row_flagged = True
            cells.append(cell)
    return LineDensityReport(
        delta=delta,
        cells=cells,
        drift_ok=drift_ok,
        row_flagged=row_flagged,
        area_flagged=area_flagged,
        unwitnessed=unwitnessed,
    )


def _witness_tile(tree: Tree, lo, width, s_lo, s_hi, shell, C):
    """Minimal-area member whose x1 side sits inside the tripled parent
    column and whose height is within the dilated shell distance."""
    parent_w = min(1.0, 2.0 * width)
    parent_lo = lo - (parent_w - width) / 2
    best = None
    amp = C * 2.0**shell
    for s in tree.members:
        c_s = s.x1_lo + s.length / 2
        cj = parent_lo + parent_w / 2
        if 3.0 * parent_w < 1.0 and abs(float(_wrap(c_s - cj))) > (3.0 * parent_w - s.length) / 2 + _EPS:
            continue
        p2 = s.pi2
        if _interval_dist(s_lo, s_hi, p2[0], p2[1]) > amp * max(s_hi - s_lo, p2[1] - p2[0]):
            continue
        if best is None or s.area < best.area - _EPS or (
            abs(s.area - best.area) <= _EPS
            and (s.omega.center, s.center) < (best.omega.center, best.center)
        ):
            best = s
    return best
