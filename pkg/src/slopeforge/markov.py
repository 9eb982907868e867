"""Markov structure: invariant point sets, refinements, transition data.

A map is Markov for a finite point set P when P contains the domain
endpoints, every one-sided image of a P point is again in P, and the
map is strictly monotone or constant (and continuous) on each interval
cut out by P.  The induced 0/1 transition matrix has contiguous rows,
which the structure exploits: rows are stored as half-open cell-index
ranges and matrix-vector products run on prefix sums.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .errors import (
    BudgetExceeded,
    FormatError,
    NonConvergence,
    PreconditionError,
)
from .numeric import mp_context
from .pwmap import LEFT, RIGHT, PwaMap, laps, locate_leq

MP_MATRIX_CAP = 600          # above this the Perron solver switches to float64
DENSE_MATRIX_CAP = 4096      # guard for materializing list-of-lists matrices


# ---------------------------------------------------------------------------
# cell analysis
# ---------------------------------------------------------------------------

def _analyze_cell(f: PwaMap, lo: Fraction, hi: Fraction):
    """(direction, y_lo, y_hi) of f on [lo, hi], or a violation string.

    direction is +1/-1/0; y_lo <= y_hi are the endpoints of the image.
    The cell must be continuous and strictly monotone or constant.
    """
    i0 = f.segment_index(lo, RIGHT)
    i1 = f.segment_index(hi, LEFT)
    sign = None
    for i in range(i0, i1 + 1):
        s = f.segments[i].slope
        d = (s > 0) - (s < 0)
        if sign is None:
            sign = d
        elif d != sign:
            return f"not strictly-monotone-or-constant on [{lo}, {hi}]"
        if i > i0:
            node = f.nodes[i]
            if node.y_left != node.y_right:
                return f"discontinuity at {node.x} inside [{lo}, {hi}]"
    y0 = f.eval(lo, RIGHT)
    y1 = f.eval(hi, LEFT)
    if sign == 0 and y0 != y1:
        return f"inconsistent plateau on [{lo}, {hi}]"
    if sign != 0 and y0 == y1:
        return f"not strictly-monotone-or-constant on [{lo}, {hi}]"
    return (sign, min(y0, y1), max(y0, y1))


@dataclass(frozen=True)
class MarkovCheck:
    ok: bool
    reason: Optional[str] = None
    witness: Optional[object] = None

    def __bool__(self):
        return self.ok


def is_markov(f: PwaMap, points: Sequence[Fraction]) -> MarkovCheck:
    """Check the Markov conditions for the point set, with a witness.

    Conditions, in order: P sorted within the domain and containing the
    endpoints; every available one-sided image of a P point lies in P;
    the map is strictly monotone or constant, and continuous, on every
    cell of the induced partition.
    """
    a, b = f.domain
    pts = [Fraction(p) for p in points]
    if sorted(set(pts)) != pts:
        return MarkovCheck(False, "points not sorted/distinct", tuple(pts))
    if not pts or pts[0] != a or pts[-1] != b:
        return MarkovCheck(False, "endpoints missing from P", (a, b))
    pset = set(pts)
    for p in pts:
        for side in (LEFT, RIGHT):
            if (side == LEFT and p == a) or (side == RIGHT and p == b):
                continue
            y = f.eval(p, side)
            if y not in pset:
                return MarkovCheck(
                    False, "image of a P point escapes P", (p, y)
                )
    for i in range(len(pts) - 1):
        res = _analyze_cell(f, pts[i], pts[i + 1])
        if isinstance(res, str):
            return MarkovCheck(False, res, (pts[i], pts[i + 1]))
    return MarkovCheck(True)


# ---------------------------------------------------------------------------
# Perron data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerronResult:
    beta: object                 # mpf or float
    v: tuple                     # nonnegative, sums to 1
    residual: float              # max |Mv - beta v|
    iterations: int
    method: str                  # "power" | "scc"
    warning: Optional[str] = None


def _rows_from_matrix(M) -> list:
    """Normalize a matrix argument to per-row column index lists.

    Accepts a dense 0/1 list-of-lists or a list of half-open (lo, hi)
    cover ranges (the native form for interval Markov structures).
    """
    rows = []
    if not M:
        raise PreconditionError("empty matrix")
    if isinstance(M[0], tuple):
        for lo, hi in M:
            rows.append(("range", lo, hi))
        return rows
    n = len(M)
    for r in M:
        if len(r) != n:
            raise PreconditionError("matrix is not square")
        cols = [j for j, e in enumerate(r) if e == 1]
        if any(e not in (0, 1) for e in r):
            raise PreconditionError("matrix entries must be 0 or 1")
        rows.append(("cols", cols, None))
    return rows


def _matvec(rows, x, zero):
    """(M x) using prefix sums for range rows."""
    n = len(rows)
    prefix = [zero] * (n + 1)
    acc = zero
    for i, xi in enumerate(x):
        acc = acc + xi
        prefix[i + 1] = acc
    out = []
    for kind, p, q in rows:
        if kind == "range":
            out.append(prefix[q] - prefix[p])
        else:
            s = zero
            for j in p:
                s = s + x[j]
            out.append(s)
    return out


def _row_iter(rows, i):
    kind, p, q = rows[i]
    if kind == "range":
        return range(p, q)
    return p


def perron(M, tol: float = 1e-12, numeric: str = "auto",
           max_iterations: int = 50000) -> PerronResult:
    """Spectral radius and nonnegative right eigenvector of a 0/1 matrix.

    Power iteration on M + I (the shift defeats periodic structure);
    when the iteration stalls, falls back to solving the strongly
    connected components and back-substituting a nonnegative extension.
    """
    rows = _rows_from_matrix(M)
    n = len(rows)
    for kind, p, q in rows:
        if kind == "range" and not (0 <= p <= q <= n):
            raise PreconditionError("cover range out of bounds")
        if kind == "cols" and any(j >= n for j in p):
            raise PreconditionError("matrix is not square")
    use_float = numeric == "float" or (numeric == "auto" and n > MP_MATRIX_CAP)
    if use_float:
        ctx = None
        one, zero = 1.0, 0.0
        conv = 1e-14
    else:
        ctx = mp_context()
        one, zero = ctx.mpf(1), ctx.mpf(0)
        conv = float(ctx.mpf(2) ** (10 - ctx.prec))

    result = _power_iteration(rows, n, one, zero, conv, tol, max_iterations)
    if result is None:
        result = _scc_solve(rows, n, one, zero, conv, tol, max_iterations)
        if result is None:
            raise NonConvergence(
                "Perron iteration stalled and the component fallback "
                "did not produce a valid eigenpair"
            )
        beta, v, residual, iters, method = result
    else:
        beta, v, residual, iters, method = result
    if residual > tol * max(float(beta), 1.0):
        raise NonConvergence(
            f"Perron residual {residual:.3e} above tol*beta"
        )
    warning = None
    if beta <= 1:
        warning = "spectral radius <= 1: no positive entropy"
    return PerronResult(beta, tuple(v), residual, iters, method=method,
                        warning=warning)


def _power_iteration(rows, n, one, zero, conv, tol, max_iterations):
    x = [one / n for _ in range(n)]
    lam_old = None
    for it in range(1, max_iterations + 1):
        mx = _matvec(rows, x, zero)
        y = [mx[i] + x[i] for i in range(n)]
        num = zero
        den = zero
        for i in range(n):
            num = num + x[i] * y[i]
            den = den + x[i] * x[i]
        lam = num / den
        resid = max(abs(y[i] - lam * x[i]) for i in range(n))
        total = zero
        for yi in y:
            total = total + yi
        if total == 0:
            return (zero, [one / n for _ in range(n)], 0.0, it, "power")
        x = [yi / total for yi in y]
        if float(resid) <= conv * float(lam):
            beta = lam - 1
            v, residual = _normalize_eigenpair(rows, x, beta, zero)
            return (beta, v, residual, it, "power")
        lam_old = lam
    # maybe the loose tolerance is still met
    mx = _matvec(rows, x, zero)
    lam = lam_old if lam_old is not None else one
    beta = lam - 1
    v, residual = _normalize_eigenpair(rows, x, beta, zero)
    if residual <= tol * max(float(beta), 1.0):
        return (beta, v, residual, max_iterations, "power")
    return None


def _normalize_eigenpair(rows, x, beta, zero):
    total = zero
    for xi in x:
        total = total + xi
    v = [xi / total for xi in x]
    mv = _matvec(rows, v, zero)
    residual = max(float(abs(mv[i] - beta * v[i])) for i in range(len(v)))
    return v, residual


# -- strongly connected component machinery ---------------------------------

def strongly_connected_components(rows, n) -> list:
    """Iterative Tarjan; components in reverse topological order."""
    index = [0] * n
    low = [0] * n
    on_stack = [False] * n
    assigned = [False] * n
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = [1]
    for root in range(n):
        if index[root]:
            continue
        work = [(root, iter(_row_iter(rows, root)))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if not index[w]:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(_row_iter(rows, w))))
                    advanced = True
                    break
                elif on_stack[w]:
                    if index[w] < low[v]:
                        low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    assigned[w] = True
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


@dataclass(frozen=True)
class MixingReport:
    irreducible: bool
    primitive: bool


def is_mixing_matrix(M) -> MixingReport:
    """Irreducibility (strong connectivity) and primitivity of a 0/1 matrix.

    Primitivity is irreducibility plus gcd 1 of cycle lengths, computed
    from BFS level differences along edges.
    """
    rows = _rows_from_matrix(M)
    n = len(rows)
    comps = strongly_connected_components(rows, n)
    if len(comps) != 1:
        return MixingReport(False, False)
    if n == 1:
        has_loop = 0 in list(_row_iter(rows, 0))
        return MixingReport(has_loop, has_loop)
    dist = [-1] * n
    dist[0] = 0
    queue = [0]
    while queue:
        u = queue.pop()
        for w in _row_iter(rows, u):
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    g = 0
    for u in range(n):
        for w in _row_iter(rows, u):
            g = math.gcd(g, dist[u] + 1 - dist[w])
    return MixingReport(True, g == 1)


def _scc_solve(rows, n, one, zero, conv, tol, max_iterations):
    """Nonnegative eigenpair for the spectral radius via components.

    Solves each strongly connected component, supports the eigenvector
    on a dominant component no other dominant component can reach, and
    back-substitutes (beta I - M)x = inflow upward through the
    condensation.
    """
    comps = strongly_connected_components(rows, n)
    comp_of = [0] * n
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    # spectral radius per component (restricted power iteration)
    radii = []
    for comp in comps:
        sub = {v: k for k, v in enumerate(comp)}
        subrows = []
        for v in comp:
            cols = [sub[w] for w in _row_iter(rows, v) if w in sub]
            subrows.append(("cols", cols, None))
        m = len(comp)
        if m == 1 and not subrows[0][1]:
            radii.append(zero)
            continue
        res = _power_iteration(subrows, m, one, zero, conv, tol,
                               max_iterations)
        if res is None:
            return None
        radii.append(res[0])
    beta = max(radii)
    eps = max(float(beta), 1.0) * 1e-9
    basic = [i for i, r in enumerate(radii) if float(beta - r) <= eps]
    # reachability between components (comps are in reverse topological
    # order: edges go from later-listed components to earlier-listed)
    reach = [set([ci]) for ci in range(len(comps))]
    for ci, comp in enumerate(comps):
        for v in comp:
            for w in _row_iter(rows, v):
                cj = comp_of[w]
                if cj != ci:
                    reach[ci] |= reach[cj]
    target = None
    for ci in basic:
        if not any(ci in reach[cj] and cj != ci for cj in basic):
            target = ci
            break
    if target is None:
        return None
    x = [zero] * n
    comp = comps[target]
    sub = {v: k for k, v in enumerate(comp)}
    subrows = []
    for v in comp:
        cols = [sub[w] for w in _row_iter(rows, v) if w in sub]
        subrows.append(("cols", cols, None))
    res = _power_iteration(subrows, len(comp), one, zero, conv, tol,
                           max_iterations)
    if res is None:
        return None
    for v, k in sub.items():
        x[v] = res[1][k]
    # components that reach the target, processed in topological order
    upstream = [ci for ci in range(len(comps))
                if ci != target and target in reach[ci]]
    for ci in sorted(upstream):  # reverse topological list: sorted order
        comp = comps[ci]
        inflow = []
        for v in comp:
            s = zero
            for w in _row_iter(rows, v):
                if comp_of[w] != ci:
                    s = s + x[w]
            inflow.append(s)
        # Neumann iteration for (beta I - M_comp) y = inflow
        sub = {v: k for k, v in enumerate(comp)}
        local = [[sub[w] for w in _row_iter(rows, v) if w in sub]
                 for v in comp]
        y = [zero] * len(comp)
        for _ in range(max_iterations):
            ny = []
            for k in range(len(comp)):
                s = inflow[k]
                for j in local[k]:
                    s = s + y[j]
                ny.append(s / beta)
            delta = max(abs(ny[k] - y[k]) for k in range(len(comp)))
            y = ny
            if float(delta) <= conv * max(float(beta), 1.0):
                break
        for v, k in sub.items():
            x[v] = y[k]
    v, residual = _normalize_eigenpair(rows, x, beta, zero)
    if residual > tol * max(float(beta), 1.0):
        return None
    return (beta, v, residual, 0, "scc")


# ---------------------------------------------------------------------------
# transition matrices
# ---------------------------------------------------------------------------

def transition_matrix(f: PwaMap, cells: Sequence[Tuple[Fraction, Fraction]]):
    """Dense 0/1 matrix: row A has 1s exactly on cells covered by f(A).

    Constant cells give zero rows.  Cells must each be monotone or
    constant and continuous for f.
    """
    if len(cells) > DENSE_MATRIX_CAP:
        raise BudgetExceeded(
            f"dense transition matrix capped at {DENSE_MATRIX_CAP} cells"
        )
    infos = []
    for lo, hi in cells:
        res = _analyze_cell(f, Fraction(lo), Fraction(hi))
        if isinstance(res, str):
            raise PreconditionError(res)
        infos.append(res)
    out = []
    for sign, ylo, yhi in infos:
        if sign == 0:
            out.append([0] * len(cells))
            continue
        row = []
        for blo, bhi in cells:
            row.append(1 if ylo <= blo and bhi <= yhi else 0)
        out.append(row)
    return out


def parse_matrix(text: str):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 2 or head[0] != "matrix":
        raise FormatError(f"bad matrix header: {lines[0]!r}")
    try:
        n = int(head[1])
    except ValueError:
        raise FormatError(f"bad matrix size: {head[1]!r}")
    if len(lines) != n + 1:
        raise FormatError(f"expected {n} rows, found {len(lines) - 1}")
    out = []
    for ln in lines[1:]:
        row = ln.split()
        if len(row) != n or any(e not in ("0", "1") for e in row):
            raise FormatError(f"bad matrix row: {ln!r}")
        out.append([int(e) for e in row])
    return out


def serialize_matrix(M) -> str:
    lines = [f"matrix {len(M)}"]
    for row in M:
        lines.append(" ".join(str(e) for e in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the validated structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkovStructure:
    map: PwaMap
    points: tuple                # P, sorted Fractions
    directions: tuple            # +1/-1/0 per cell
    covers: tuple                # half-open (lo, hi) cell ranges; (j, j) for constant
    perron: PerronResult
    numeric: str                 # "mp" | "float"

    @property
    def beta(self):
        return self.perron.beta

    @property
    def v(self):
        return self.perron.v

    @property
    def cell_count(self) -> int:
        return len(self.points) - 1

    @property
    def cells(self) -> list:
        return [(self.points[i], self.points[i + 1])
                for i in range(self.cell_count)]

    @property
    def matrix(self):
        """Dense 0/1 matrix (guarded; structures can be large)."""
        k = self.cell_count
        if k > DENSE_MATRIX_CAP:
            raise BudgetExceeded("structure too large for a dense matrix")
        out = [[0] * k for _ in range(k)]
        for i, (lo, hi) in enumerate(self.covers):
            for j in range(lo, hi):
                out[i][j] = 1
        return out

    def prefix_sums(self):
        """V[0..K] with V[i] = sum of v over the first i cells."""
        zero = self.v[0] * 0
        out = [zero]
        acc = zero
        for x in self.v:
            acc = acc + x
            out.append(acc)
        return out


def structure_from_points(f: PwaMap, points: Sequence[Fraction],
                          tol: float = 1e-12,
                          numeric: str = "auto") -> MarkovStructure:
    """Validate P and assemble the full structure (matrix + Perron pair)."""
    check = is_markov(f, points)
    if not check:
        raise PreconditionError(
            f"not Markov for the given points: {check.reason} at {check.witness}"
        )
    pts = [Fraction(p) for p in points]
    directions = []
    covers = []
    for i in range(len(pts) - 1):
        sign, ylo, yhi = _analyze_cell(f, pts[i], pts[i + 1])
        directions.append(sign)
        if sign == 0:
            covers.append((i, i))
            continue
        lo = bisect.bisect_left(pts, ylo)
        hi = bisect.bisect_left(pts, yhi)
        if pts[lo] != ylo or pts[hi] != yhi:
            raise PreconditionError(
                f"cell image endpoint not in P: [{ylo}, {yhi}]"
            )
        covers.append((lo, hi))
    n = len(pts) - 1
    mode = numeric
    if numeric == "auto":
        mode = "float" if n > MP_MATRIX_CAP else "mp"
    pr = perron(covers, tol=tol, numeric=mode)
    return MarkovStructure(f, tuple(pts), tuple(directions), tuple(covers),
                           pr, mode)


def markov_closure(f: PwaMap, max_points: int = 4096,
                   tol: float = 1e-12,
                   numeric: str = "auto",
                   extra_seeds: Sequence[Fraction] = ()) -> MarkovStructure:
    """Close the lap-endpoint set under exact one-sided images.

    Raises BudgetExceeded when the orbit does not close within
    max_points: the map is (effectively) not Markov and the caller
    should use the approximation pipeline.  extra_seeds join the
    initial set (e.g. the cut points of a flattened graph).
    """
    a, b = f.domain
    pts = {a, b}
    for s in extra_seeds:
        pts.add(Fraction(s))
    for lap in laps(f):
        pts.add(lap.lo)
        pts.add(lap.hi)
    frontier = list(pts)
    while frontier:
        if len(pts) > max_points:
            raise BudgetExceeded(
                f"Markov closure exceeded {max_points} points"
            )
        p = frontier.pop()
        for side in (LEFT, RIGHT):
            if (side == LEFT and p == a) or (side == RIGHT and p == b):
                continue
            y = f.eval(p, side)
            if y not in pts:
                pts.add(y)
                frontier.append(y)
    return structure_from_points(f, sorted(pts), tol=tol, numeric=numeric)


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Refinement:
    """The n-fold pullback partition of a Markov structure.

    points is P_n exactly; per cell, image_elem is the base-cell index
    of the n-step image (or -1 when that image is a single point) and
    orient is the monotonicity sign of the n-step restriction.
    """

    depth: int
    points: tuple
    image_elem: tuple
    orient: tuple

    @property
    def cells(self) -> list:
        return [(self.points[i], self.points[i + 1])
                for i in range(len(self.points) - 1)]

    @property
    def nonsingleton_count(self) -> int:
        return sum(1 for e in self.image_elem if e >= 0)


def _preimage_sweep(f: PwaMap, pts_sorted) -> set:
    """Isolated f-preimages of a sorted point list, segment by segment."""
    out = set()
    for seg in f.segments:
        s = seg.slope
        if s == 0:
            continue
        lo, hi = (seg.y0, seg.y1) if seg.y0 <= seg.y1 else (seg.y1, seg.y0)
        i = bisect.bisect_left(pts_sorted, lo)
        while i < len(pts_sorted) and pts_sorted[i] <= hi:
            out.add(seg.x0 + (pts_sorted[i] - seg.y0) / s)
            i += 1
    return out


def _refinement_step(f: PwaMap, pts, image, orient, max_points: int):
    """One pullback level: P' = P u f^{-1}(P) with image re-tracking."""
    new_pts = set(pts) | _preimage_sweep(f, pts)
    if len(new_pts) > max_points:
        raise BudgetExceeded(f"refinement exceeded {max_points} points")
    new_sorted = sorted(new_pts)
    ptsf = [float(p) for p in pts]
    seg_x = [seg.x0 for seg in f.segments]
    seg_xf = [float(x) for x in seg_x]
    seg_y = [seg.y0 for seg in f.segments]
    seg_s = [seg.slope for seg in f.segments]
    nodes = f.nodes
    new_image = []
    new_orient = []
    for i in range(len(new_sorted) - 1):
        u, w = new_sorted[i], new_sorted[i + 1]
        k = locate_leq(seg_x, seg_xf, u)
        if k >= len(seg_s):
            k = len(seg_s) - 1
        y0 = seg_y[k] + seg_s[k] * (u - seg_x[k])
        kk = locate_leq(seg_x, seg_xf, w)
        if kk > 0 and seg_x[kk] == w:
            kk -= 1
        if kk >= len(seg_s):
            kk = len(seg_s) - 1
        y1 = nodes[kk + 1].y_left if nodes[kk + 1].x == w else (
            seg_y[kk] + seg_s[kk] * (w - seg_x[kk]))
        if y0 == y1:
            new_image.append(-1)
            new_orient.append(0)
            continue
        lo, hi = (y0, y1) if y0 <= y1 else (y1, y0)
        j = locate_leq(pts, ptsf, lo)
        if not (pts[j] <= lo and hi <= pts[j + 1]):
            raise PreconditionError(
                "refinement cell image crosses the previous level"
            )
        if image[j] < 0:
            new_image.append(-1)
            new_orient.append(0)
        else:
            new_image.append(image[j])
            sgn = 1 if y1 > y0 else -1
            new_orient.append(sgn * orient[j])
    return new_sorted, new_image, new_orient


def _refinement_seed(s: MarkovStructure):
    pts = list(s.points)
    image = list(range(s.cell_count))
    orient = [1] * s.cell_count
    return pts, image, orient


def refine(s: MarkovStructure, n: int, max_points: int = 2_000_000) -> Refinement:
    """Exact A_n / P_n with image tracking; P_{k+1} = P_k u f^{-1}(P_k)."""
    if n < 0:
        raise PreconditionError("refinement depth must be >= 0")
    pts, image, orient = _refinement_seed(s)
    for _ in range(n):
        pts, image, orient = _refinement_step(s.map, pts, image, orient,
                                              max_points)
    return Refinement(n, tuple(pts), tuple(image), tuple(orient))
