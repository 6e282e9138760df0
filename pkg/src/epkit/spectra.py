"""Parameter-plane cartography of exceptional structures.

A scan evaluates a catalog model over a rectangular grid, eigendecomposes
every cell in bulk, and stores per-cell summaries: the full spectrum, the
minimal pairwise eigenvalue gap, the maximal pairwise right-eigenvector
overlap, and a signed coalescence indicator.

The indicator is the real part of prod_{i<j} (lambda_i - lambda_j)^2, the
product of all squared eigenvalue gaps.  For generators that preserve
Hermiticity the spectrum is closed under conjugation, the product is real,
and it changes sign exactly where a conjugate pair collides on the real
axis, i.e. on a second-order exceptional line.  That sign change is what
makes marching-squares contouring and bisection refinement robust; the raw
gap field is non-negative and would only graze zero.  Eigenvector overlap
is used as a confirmation filter on refined vertices, never for contouring.

Threaded scans split the grid into fixed row blocks; results are written
into index-keyed arrays, so the output is byte-identical for any worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ResolutionTooLarge
from .models import ModelSpec, get_model, resolve_params

MAX_CELLS = 10**7
# Fixed split, independent of the worker count (determinism): small blocks
# balance well across workers and keep the per-block batches cache-sized.
CHUNK_ROWS = 4

# Refinement contract for reported candidates and line vertices: the pair
# gap at a refined point must fall below GAP_TOL_FACTOR * (1 + ||L||_F).
# The factor sits a few times above sqrt(machine eps): a quantity vanishing
# quadratically across a branch line cannot be resolved below ~sqrt(eps)
# times the matrix scale, and the measured floor on the detuned-generator
# lines is 1e-8 .. 4e-8 relative.
GAP_TOL_FACTOR = 5e-8
OVERLAP_MIN = 1.0 - 1e-5
# Order estimation counts eigenvalues inside a window that widens with the
# multiplicity being tested (cube root of the pair window for a third
# member), since square-root vs cube-root noise scaling makes any fixed
# window order-dependent.
ORDER_TOL_FACTOR = 10.0


@dataclass(frozen=True)
class AxisSpec:
    name: str
    lo: float
    hi: float
    res: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("axis bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"axis '{self.name}': need lo < hi")
        if self.res < 2:
            raise ValueError(f"axis '{self.name}': resolution must be >= 2")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.res)


@dataclass(frozen=True)
class PlaneSpec:
    """Two named axes plus fixed values for the remaining model parameters."""

    x: AxisSpec
    y: AxisSpec
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.res * self.y.res > MAX_CELLS:
            raise ResolutionTooLarge(
                f"{self.x.res} x {self.y.res} exceeds {MAX_CELLS} cells"
            )


@dataclass(frozen=True)
class EPCandidate:
    """A refined coalescence point with estimated order."""

    location: tuple[float, float]
    order: int
    eigenvalue: complex
    residual: float  # min gap at the refined location
    kind: str  # "point" or "on_line"


@dataclass
class ExceptionalMap:
    """Grid summaries plus traced exceptional lines and refined points."""

    model: str
    plane: PlaneSpec
    xs: np.ndarray
    ys: np.ndarray
    eigenvalues: np.ndarray  # (nx, ny, dim)
    min_gap: np.ndarray  # (nx, ny)
    max_overlap: np.ndarray  # (nx, ny)
    indicator: np.ndarray  # (nx, ny) signed gap product
    lines: list = field(default_factory=list)  # list of (k, 2) vertex arrays
    points: list = field(default_factory=list)  # list of EPCandidate


def _cell_params(model: ModelSpec, plane: PlaneSpec, x, y) -> dict:
    values = dict(resolve_params(model, plane.fixed))
    xy = resolve_params(model, {plane.x.name: x, plane.y.name: y})
    values.update(xy)
    return values


def evaluate_cells(model: ModelSpec, plane: PlaneSpec, x, y):
    """Spectra and summaries for broadcastable coordinate arrays."""
    mats = model.matrix(**_cell_params(model, plane, x, y))
    vals, vecs = linalg.eig_batch(mats)
    d = model.dim
    diag = np.eye(d, dtype=bool)
    diff = vals[..., :, None] - vals[..., None, :]
    adiff = np.abs(diff)
    adiff[..., diag] = np.inf
    min_gap = adiff.min(axis=(-2, -1))
    gram = np.abs(np.einsum("...ij,...ik->...jk", vecs.conj(), vecs))
    gram[..., diag] = 0.0
    max_overlap = gram.max(axis=(-2, -1))
    prod = np.ones(vals.shape[:-1], dtype=complex)
    for i in range(d):
        for j in range(i + 1, d):
            prod = prod * diff[..., i, j] ** 2
    return vals, min_gap, max_overlap, prod.real


def scan_grid(plane: PlaneSpec, model_name: str, threads: int = 1) -> ExceptionalMap:
    """Per-cell spectral summary over the plane; deterministic assembly."""
    model = get_model(model_name)
    _cell_params(model, plane, plane.x.lo, plane.y.lo)  # validate names early
    xs, ys = plane.x.values(), plane.y.values()
    nx, ny = xs.size, ys.size
    d = model.dim
    eigenvalues = np.empty((nx, ny, d), dtype=complex)
    min_gap = np.empty((nx, ny))
    max_overlap = np.empty((nx, ny))
    indicator = np.empty((nx, ny))

    def do_block(i0: int) -> None:
        i1 = min(i0 + CHUNK_ROWS, nx)
        gx = xs[i0:i1][:, None]
        gy = ys[None, :]
        vals, gap, ov, ind = evaluate_cells(model, plane, gx, gy)
        eigenvalues[i0:i1] = vals
        min_gap[i0:i1] = gap
        max_overlap[i0:i1] = ov
        indicator[i0:i1] = ind

    blocks = range(0, nx, CHUNK_ROWS)
    if threads <= 1:
        for i0 in blocks:
            do_block(i0)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(do_block, blocks))

    return ExceptionalMap(
        model=model_name,
        plane=plane,
        xs=xs,
        ys=ys,
        eigenvalues=eigenvalues,
        min_gap=min_gap,
        max_overlap=max_overlap,
        indicator=indicator,
    )


def quasi_steady_index(d: linalg.SpectralDecomposition) -> int:
    """Index of the eigenvalue with maximal real part (ties: smaller |Im|)."""
    order = sorted(
        range(d.dim),
        key=lambda i: (-d.eigenvalues[i].real, abs(d.eigenvalues[i].imag)),
    )
    return order[0]


# -- refinement ---------------------------------------------------------------


def _min_gap_at(model: ModelSpec, plane: PlaneSpec, x: float, y: float) -> float:
    _, gap, _, _ = evaluate_cells(model, plane, np.asarray(x), np.asarray(y))
    return float(gap)


def _indicator_at(model: ModelSpec, plane: PlaneSpec, x: float, y: float) -> float:
    _, _, _, ind = evaluate_cells(model, plane, np.asarray(x), np.asarray(y))
    return float(ind)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, lo: float, hi: float, iters: int):
    """Golden-section minimizer on [lo, hi]; returns the midpoint argmin."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def refine_gap_minimum(
    model: ModelSpec,
    plane: PlaneSpec,
    x0: float,
    y0: float,
    dx: float,
    dy: float,
    iters: int = 80,
):
    """Line-search descent of the min-gap field around (x0, y0).

    The gap vanishes like the square root of the distance to an exceptional
    line, so each line search must run essentially to float resolution
    (0.618^80 of the bracket) to land on the zero set; shallow searches
    stall at gap levels orders of magnitude above the attainable floor.
    Coordinate sweeps catch valleys crossing either axis; a final search
    along the local gap gradient handles valleys nearly parallel to an
    axis.  Returns the best point evaluated.
    """

    def gap(u, v):
        return _min_gap_at(model, plane, u, v)

    x, y = float(x0), float(y0)
    best = (gap(x, y), x, y)
    bx, by = dx, dy
    for _ in range(3):
        x = _golden_min(lambda u: gap(u, y), x - bx, x + bx, iters)
        y = _golden_min(lambda v: gap(x, v), y - by, y + by, iters)
        g = gap(x, y)
        if g < best[0]:
            best = (g, x, y)
        bx *= 0.3
        by *= 0.3

    # Gradient-direction pass from the incumbent.
    _, x, y = best
    hx, hy = 1e-6 * dx, 1e-6 * dy
    gx = (gap(x + hx, y) - gap(x - hx, y)) / (2 * hx)
    gy = (gap(x, y + hy) - gap(x, y - hy)) / (2 * hy)
    norm = math.hypot(gx * dx, gy * dy)
    if norm > 0:
        ux, uy = gx * dx * dx / norm, gy * dy * dy / norm
        t = _golden_min(
            lambda s: gap(x + s * ux, y + s * uy), -1.0, 1.0, iters
        )
        cand = (gap(x + t * ux, y + t * uy), x + t * ux, y + t * uy)
        if cand[0] < best[0]:
            best = cand
    return best[1], best[2]




def detect_ep(
    model_name: str,
    plane: PlaneSpec,
    cell_xy: tuple[float, float],
    cell_size: tuple[float, float],
    iters: int = 80,
    kind: str = "point",
):
    """Refine a grid neighborhood to an exceptional-point candidate.

    Returns None when the refined location does not satisfy the gap and
    coalescence criteria.  The order is the size of the eigenvalue cluster
    at the refined location, counted inside a window that widens with the
    cluster multiplicity (see below).  For order >= 3 the location is
    accurate to roughly the seeding cell: in double precision a triple root
    cannot be pinned tighter through the eigenvalue cluster alone.
    """
    model = get_model(model_name)
    x, y = refine_gap_minimum(
        model, plane, cell_xy[0], cell_xy[1], cell_size[0], cell_size[1], iters
    )
    mats = model.matrix(**_cell_params(model, plane, x, y))
    fro = float(np.linalg.norm(mats))
    dec = linalg.eig(mats)
    gap_tol = GAP_TOL_FACTOR * (1.0 + fro)
    pairs = [
        (abs(dec.eigenvalues[i] - dec.eigenvalues[j]), i, j)
        for i in range(dec.dim)
        for j in range(i + 1, dec.dim)
    ]
    gmin, bi, bj = min(pairs)
    if gmin >= gap_tol:
        return None
    if linalg.coalescence_measure(dec, bi, bj) <= OVERLAP_MIN:
        return None
    order, value, near_miss = _estimate_order(dec.eigenvalues, bi, bj)

    # The landing point of the gap search sits somewhere on the line; when
    # a third eigenvalue is nearby (a higher-order endpoint), walk along the
    # line to the cluster-spread minimum to pin the point itself.  At an
    # order-3 point the attainable pair gap is cube-root limited, so the
    # walked point is gated on eps^(1/3) rather than the pair tolerance.
    if order >= 3 or near_miss:
        wx, wy = _spread_walk(model, plane, x, y, cell_size, 3)
        wdec = linalg.eig(model.matrix(**_cell_params(model, plane, wx, wy)))
        wpairs = [
            (abs(wdec.eigenvalues[i] - wdec.eigenvalues[j]), i, j)
            for i in range(wdec.dim)
            for j in range(i + 1, wdec.dim)
        ]
        wmin, wi, wj = min(wpairs)
        worder, wvalue, _ = _estimate_order(wdec.eigenvalues, wi, wj)
        gate3 = max(gap_tol, 50.0 * (1.0 + fro) * float(np.finfo(float).eps) ** (1 / 3))
        if (
            worder >= max(order, 3)
            and wmin < gate3
            and linalg.coalescence_measure(wdec, wi, wj) > OVERLAP_MIN
        ):
            x, y, gmin, order, value = wx, wy, wmin, worder, wvalue

    return EPCandidate(
        location=(x, y),
        order=int(order),
        eigenvalue=complex(value),
        residual=float(gmin),
        kind=kind,
    )


# Ratio threshold for cluster membership: an eigenvalue joins the cluster
# when it sits at most this fraction of the distance to the next spectator
# eigenvalue.  Scale-free, so it works for generators of any norm.
ORDER_RATIO = 0.1
# Fallback absolute window when no spectator remains, in units of the
# spectral diameter; cube-root of eps reflects triple-root resolution.
ORDER_ABS = 50.0 * float(np.finfo(float).eps) ** (1.0 / 3.0)


def _estimate_order(values: np.ndarray, bi: int, bj: int):
    """Order of the coalescing cluster containing the pair (bi, bj).

    Membership is decided by a distance-ratio test against the next
    remaining eigenvalue, falling back to an absolute window (relative to
    the spectral diameter) when no spectator is left.  Returns
    (order, cluster mean, near_miss) where near_miss flags a third
    eigenvalue close enough that a higher-order point may be nearby.
    """
    n = values.size
    diam = max(
        (abs(values[i] - values[j]) for i in range(n) for j in range(i + 1, n)),
        default=0.0,
    )
    cluster = [bi, bj]
    near_miss = False
    while len(cluster) < n:
        mean = np.mean(values[cluster])
        rest = sorted(
            (abs(values[k] - mean), k) for k in range(n) if k not in cluster
        )
        d, k = rest[0]
        nxt = rest[1][0] if len(rest) > 1 else None
        if nxt is not None:
            if d <= ORDER_RATIO * nxt:
                cluster.append(k)
                continue
            near_miss = near_miss or (len(cluster) == 2 and d <= 3 * ORDER_RATIO * nxt)
        elif d <= ORDER_ABS * diam:
            cluster.append(k)
            continue
        break
    mean = complex(np.mean(values[cluster]))
    return len(cluster), mean, near_miss


def _cluster_spread(model, plane, x, y, order: int) -> float:
    """Diameter of the tightest ``order``-sized eigenvalue cluster."""
    mats = model.matrix(**_cell_params(model, plane, x, y))
    vals = linalg.eig_batch(mats[None, ...])[0][0]
    best = np.inf
    for i in range(vals.size):
        dists = np.sort(np.abs(vals - vals[i]))
        if dists.size >= order:
            best = min(best, float(dists[order - 1]))
    return best


def _spread_walk(model, plane, x, y, cell_size, order: int):
    """Slide along an exceptional line to the cluster-spread minimum.

    The pair gap vanishes identically on the line, so the endpoint of the
    line (where a further eigenvalue joins) is located by minimizing the
    ``order``-cluster diameter along the curve.  The curve is followed by a
    nested search: the outer golden section moves along one axis, the inner
    one re-projects onto the line along the other.  Both axis assignments
    are tried; whichever reaches the smaller spread wins (the line's local
    orientation is unknown, and the indicator gradient is pure noise on the
    line itself).
    """
    dx, dy = cell_size

    def walk(along_x: bool):
        def on_line(u):
            if along_x:
                v = _golden_min(
                    lambda w: _min_gap_at(model, plane, u, w),
                    y - 2 * dy,
                    y + 2 * dy,
                    80,
                )
                return u, v
            v = _golden_min(
                lambda w: _min_gap_at(model, plane, w, u),
                x - 2 * dx,
                x + 2 * dx,
                80,
            )
            return v, u

        def spread(u):
            px, py = on_line(u)
            return _cluster_spread(model, plane, px, py, order)

        if along_x:
            u_best = _golden_min(spread, x - 2 * dx, x + 2 * dx, 36)
        else:
            u_best = _golden_min(spread, y - 2 * dy, y + 2 * dy, 36)
        px, py = on_line(u_best)
        return _cluster_spread(model, plane, px, py, order), px, py

    _, px, py = min(walk(True), walk(False))
    return px, py


# -- marching squares ---------------------------------------------------------


def _edge_zero(model, plane, p0, p1, f0, f1, iters=60):
    """Locate the coalescence on the segment p0-p1.

    Bisection on the indicator sign narrows to the rounding-noise band of
    the gap product; a short golden-section polish of the gap itself then
    picks the attainable minimum inside that band.
    """
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    a, b = 0.0, 1.0
    fa = f0

    def at(t):
        return p0 + t * (p1 - p0)

    for _ in range(iters):
        m = 0.5 * (a + b)
        pm = at(m)
        fm = _indicator_at(model, plane, pm[0], pm[1])
        if fm == 0.0:
            a = b = m
            break
        if (fa < 0) != (fm < 0):
            b = m
        else:
            a, fa = m, fm
    # Near-tangent crossings leave a wide band where the indicator sign is
    # rounding noise, so the gap polish needs a generous bracket around the
    # bisection landing point.
    t0 = 0.5 * (a + b)
    lo, hi = max(0.0, t0 - 0.02), min(1.0, t0 + 0.02)
    t_best = _golden_min(
        lambda t: _min_gap_at(model, plane, *at(t)), lo, hi, 90
    )
    g_best = _min_gap_at(model, plane, *at(t_best))
    if g_best < _min_gap_at(model, plane, *at(t0)):
        t0 = t_best
    return at(t0)


def _vertex_passes(model, plane, x, y):
    """Contract check at a refined vertex; also reports the 3-cluster spread."""
    mats = model.matrix(**_cell_params(model, plane, x, y))
    fro = float(np.linalg.norm(mats))
    dec = linalg.eig(mats)
    pairs = [
        (abs(dec.eigenvalues[i] - dec.eigenvalues[j]), i, j)
        for i in range(dec.dim)
        for j in range(i + 1, dec.dim)
    ]
    gmin, bi, bj = min(pairs)
    ok = gmin < GAP_TOL_FACTOR * (1.0 + fro) and (
        linalg.coalescence_measure(dec, bi, bj) > OVERLAP_MIN
    )
    spread3 = np.inf
    if dec.dim >= 3:
        vals = dec.eigenvalues
        for i in range(vals.size):
            dists = np.sort(np.abs(vals - vals[i]))
            spread3 = min(spread3, float(dists[2]))
    return ok, gmin, spread3, fro


def trace_lines(emap: ExceptionalMap, refine: bool = True) -> ExceptionalMap:
    """Extract exceptional lines from the signed indicator field.

    Marching squares on the node grid produces segments per cell; segments
    sharing a grid edge are chained into polylines.  Every vertex is then
    refined by bisection along its grid edge and kept only if it satisfies
    the gap + coalescence contract.  Open polyline endpoints are refined
    into higher-order candidates where a third eigenvalue joins the cluster.
    """
    model = get_model(emap.model)
    plane = emap.plane
    xs, ys, ind = emap.xs, emap.ys, emap.indicator
    nx, ny = xs.size, ys.size

    # Crossing on each grid edge, keyed by (i, j, axis); axis 0 joins
    # (i,j)-(i+1,j), axis 1 joins (i,j)-(i,j+1).
    crossings: dict[tuple, np.ndarray] = {}

    def edge_key(i, j, axis):
        return (i, j, axis)

    def edge_crossing(i, j, axis):
        key = edge_key(i, j, axis)
        if key in crossings:
            return key
        if axis == 0:
            p0, p1 = (xs[i], ys[j]), (xs[i + 1], ys[j])
            f0, f1 = ind[i, j], ind[i + 1, j]
        else:
            p0, p1 = (xs[i], ys[j]), (xs[i], ys[j + 1])
            f0, f1 = ind[i, j], ind[i, j + 1]
        if refine:
            pt = _edge_zero(model, plane, p0, p1, f0, f1)
        else:
            t = f0 / (f0 - f1)
            pt = np.asarray(p0) + np.clip(t, 0.0, 1.0) * (np.asarray(p1) - np.asarray(p0))
        crossings[key] = pt
        return key

    # Segments as pairs of edge keys.
    segments = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = [
                (ind[i, j] < 0, (i, j)),
                (ind[i + 1, j] < 0, (i + 1, j)),
                (ind[i + 1, j + 1] < 0, (i + 1, j + 1)),
                (ind[i, j + 1] < 0, (i, j + 1)),
            ]
            code = sum(b << k for k, (b, _) in enumerate(corners))
            if code in (0, 15):
                continue
            # Edges of the cell in marching-squares order: bottom, right,
            # top, left (as (i, j, axis) keys).
            bottom = edge_key(i, j, 0)
            right = edge_key(i + 1, j, 1)
            top = edge_key(i, j + 1, 0)
            left = edge_key(i, j, 1)
            table = {
                1: [(left, bottom)],
                2: [(bottom, right)],
                3: [(left, right)],
                4: [(right, top)],
                5: None,  # saddle
                6: [(bottom, top)],
                7: [(left, top)],
                8: [(top, left)],
                9: [(bottom, top)],
                10: None,  # saddle
                11: [(right, top)],
                12: [(left, right)],
                13: [(right, bottom)],
                14: [(left, bottom)],
            }
            entry = table[code]
            if entry is None:
                # Saddle: the cell-center sample decides which negative
                # corners connect.
                center = 0.25 * (
                    ind[i, j] + ind[i + 1, j] + ind[i + 1, j + 1] + ind[i, j + 1]
                )
                neg_diag_bl_tr = code == 5
                if (center < 0) == neg_diag_bl_tr:
                    entry = [(bottom, right), (top, left)]
                else:
                    entry = [(left, bottom), (right, top)]
            for ka, kb in entry:
                ia, ja, aa = ka
                ib, jb, ab = kb
                ea = edge_crossing(ia, ja, aa)
                eb = edge_crossing(ib, jb, ab)
                segments.append((ea, eb))

    polylines = _chain_segments(segments, crossings)

    # Vertex validation: drop vertices that fail the coalescence contract,
    # splitting polylines where gaps appear.  The 3-cluster spread recorded
    # per surviving vertex seeds the higher-order point search below.
    kept_lines = []
    kept_spreads = []
    for line in polylines:
        run, spreads = [], []
        for pt in line:
            if refine:
                ok, _, s3, _ = _vertex_passes(model, plane, pt[0], pt[1])
            else:
                ok, s3 = True, np.inf
            if ok:
                run.append(pt)
                spreads.append(s3)
            else:
                if len(run) >= 2:
                    kept_lines.append(np.array(run))
                    kept_spreads.append(np.array(spreads))
                run, spreads = [], []
        if len(run) >= 2:
            kept_lines.append(np.array(run))
            kept_spreads.append(np.array(spreads))

    oriented = []
    for line, spread in zip(kept_lines, kept_spreads):
        if not _is_ascending(line):
            line, spread = line[::-1], spread[::-1]
        oriented.append((line, spread))
    oriented.sort(key=lambda t: (t[0][0, 0], t[0][0, 1]))
    kept_lines = [t[0] for t in oriented]
    kept_spreads = [t[1] for t in oriented]
    emap.lines = kept_lines

    # Higher-order candidates: a line runs THROUGH a higher-order point
    # (the contour does not stop there), so seeds are local minima of the
    # 3-cluster spread along each line, plus open endpoints.
    cell = (xs[1] - xs[0], ys[1] - ys[0])
    seeds = []
    for line, spread in zip(kept_lines, kept_spreads):
        n = len(line)
        for k in range(n):
            if n >= 3 and spread[k] <= spread[max(0, k - 1) : k + 2].min():
                seeds.append(tuple(line[k]))
        for end in (line[0], line[-1]):
            seeds.append(tuple(end))

    points = []
    seen = []
    for seed in seeds:
        if any(
            math.hypot(seed[0] - p[0], seed[1] - p[1]) < 2.0 * max(cell) for p in seen
        ):
            continue
        cand = detect_ep(emap.model, plane, seed, cell)
        if cand is not None and cand.order >= 3:
            if any(
                math.hypot(cand.location[0] - p[0], cand.location[1] - p[1])
                < 2.0 * max(cell)
                for p in seen
            ):
                continue
            points.append(cand)
            seen.append(cand.location)
    points.sort(key=lambda c: c.location)
    emap.points = points
    return emap


def _is_ascending(vertices: np.ndarray) -> bool:
    first = (vertices[0, 0], vertices[0, 1])
    last = (vertices[-1, 0], vertices[-1, 1])
    return first <= last


def _chain_segments(segments, crossings):
    """Join segments sharing edge keys into ordered vertex polylines."""
    from collections import defaultdict

    adj = defaultdict(list)
    for a, b in segments:
        adj[a].append(b)
        adj[b].append(a)
    visited = set()
    lines = []

    def walk(start, nxt):
        chain = [start, nxt]
        visited.add(frozenset((start, nxt)))
        cur = nxt
        while True:
            options = [k for k in adj[cur] if frozenset((cur, k)) not in visited]
            if not options:
                break
            cur = options[0]
            visited.add(frozenset((chain[-1], cur)))
            chain.append(cur)
        return chain

    # Start from degree-1 nodes (open curves), then sweep leftover loops.
    keys = sorted(adj.keys())
    for k in keys:
        if len(adj[k]) == 1:
            nb = adj[k][0]
            if frozenset((k, nb)) not in visited:
                lines.append(walk(k, nb))
    for k in keys:
        for nb in adj[k]:
            if frozenset((k, nb)) not in visited:
                lines.append(walk(k, nb))
    return [[crossings[k] for k in chain] for chain in lines]


def _orient(vertices: np.ndarray) -> np.ndarray:
    """Normalize vertex order: ascending x, then y, between the endpoints."""
    first, last = (vertices[0, 0], vertices[0, 1]), (vertices[-1, 0], vertices[-1, 1])
    return vertices if first <= last else vertices[::-1]
