"""Markov approximation and the normalization pipeline.

A strictly piecewise monotone map is approximated within 1/n by a
Markov map: collect the lap-endpoint orbits up to a shadowing depth,
fill with a grid finer than delta, and snap every image value down to
the nearest point of the set.  Running the factor construction along a
schedule of such approximants and stopping when successive factor maps
agree on a common grid is the computable stand-in for the compactness
argument that extracts the limiting semiconjugacy.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .entropy import entropy_lapcount
from .errors import (
    BudgetExceeded,
    NonConvergence,
    PreconditionError,
    VerificationError,
)
from .markov import MarkovStructure, markov_closure, structure_from_points
from .numeric import format_decimal, generic_log
from .pwmap import (
    LEFT,
    RIGHT,
    Node,
    PwaMap,
    iterate,
    laps,
    orbit_one_sided,
    sup_dist,
)
from .semiconjugacy import ConstantSlopeMap, PsiTable, build_constant_slope, build_psi

DEFAULT_SCHEDULE = (2, 4, 8, 16, 32)
DEFAULT_SHADOW_DEPTH = 8
DEFAULT_GRID = 4096


@dataclass(frozen=True)
class ApproxConfig:
    n: int
    delta: Fraction
    points: tuple
    shadow_depth: int
    distance: Fraction           # exact sup distance to the source map


def markov_approx(f: PwaMap, n: int,
                  shadow_depth: Optional[int] = None,
                  max_points: int = 500_000) -> Tuple[PwaMap, ApproxConfig]:
    """Markov map within 1/n of f, affine between the points of P.

    P contains the lap-endpoint orbits of f^k for k up to shadow_depth
    (so iterate endpoints shadow exactly to that depth) plus a uniform
    grid finer than delta = min(1/(2 n L), 1/(4n)), L the top slope.
    Image values snap down to P; at jump points the snap applies to
    each one-sided limit separately.
    """
    if n < 1:
        raise PreconditionError("approximation index must be >= 1")
    if f.has_plateau:
        raise PreconditionError(
            "map has a constant lap; reduce to a strictly monotone "
            "factor first"
        )
    if shadow_depth is None:
        shadow_depth = min(n, DEFAULT_SHADOW_DEPTH)
    shadow_depth = min(shadow_depth, n)
    a, b = f.domain
    top_slope = max(abs(seg.slope) for seg in f.segments)
    delta = min(
        Fraction(1, 2 * n) / top_slope if top_slope > 1 else Fraction(1, 2 * n),
        Fraction(1, 4 * n),
    )
    pts = {a, b}
    if shadow_depth >= 1:
        fk = iterate(f, shadow_depth)
        seeds = {a, b}
        for lap in laps(fk):
            seeds.add(lap.lo)
            seeds.add(lap.hi)
        for q in seeds:
            for p, _ in orbit_one_sided(f, q, RIGHT if q < b else LEFT,
                                        shadow_depth):
                pts.add(p)
            for p, _ in orbit_one_sided(f, q, LEFT if q > a else RIGHT,
                                        shadow_depth):
                pts.add(p)
    width = b - a
    grid_n = 1
    while grid_n * delta <= width:  # power-of-two grid: dyadic-friendly
        grid_n *= 2
    for k in range(grid_n + 1):
        pts.add(a + width * Fraction(k, grid_n))
    if len(pts) > max_points:
        raise PreconditionError(
            f"approximation needs {len(pts)} points (> {max_points})"
        )
    P = sorted(pts)

    def snap(y: Fraction) -> Fraction:
        return P[bisect.bisect_right(P, y) - 1]

    nodes = []
    for p in P:
        yl = None if p == a else snap(f.eval(p, LEFT))
        yr = None if p == b else snap(f.eval(p, RIGHT))
        nodes.append(Node(p, yl, yr))
    g = PwaMap(nodes)
    dist = sup_dist(f, g)
    if dist * n >= 1:
        raise VerificationError(
            f"approximation construction missed its bound: dist={dist}"
        )
    return g, ApproxConfig(n, delta, tuple(P), shadow_depth, dist)


@dataclass(frozen=True)
class ShadowReport:
    ok: bool
    depth: int
    witness: Optional[object] = None

    def __bool__(self):
        return self.ok


def _monotone_continuous_between(g: PwaMap, lo: Fraction, hi: Fraction):
    """True when g is monotone and continuous on [lo, hi]."""
    if lo == hi:
        return True
    i0 = g.segment_index(lo, RIGHT)
    i1 = g.segment_index(hi, LEFT)
    sign = None
    for i in range(i0, i1 + 1):
        s = g.segments[i].slope
        d = (s > 0) - (s < 0)
        if d != 0:
            if sign is None:
                sign = d
            elif d != sign:
                return False
        if i > i0:
            node = g.nodes[i]
            if node.y_left != node.y_right:
                return False
    return True


def check_monotone_shadowing(f: PwaMap, g: PwaMap, k: int) -> ShadowReport:
    """Endpoint orbits of the laps of f^k shadow exactly under g, and g
    stays monotone and continuous on every visited hull, which makes
    g^k monotone and continuous on each lap of f^k.
    """
    a, b = f.domain
    fk = iterate(f, k)
    for lap in laps(fk):
        lo_orbit = orbit_one_sided(f, lap.lo, RIGHT if lap.lo < b else LEFT, k)
        hi_orbit = orbit_one_sided(f, lap.hi, LEFT if lap.hi > a else RIGHT, k)
        g_lo = orbit_one_sided(g, lap.lo, RIGHT if lap.lo < b else LEFT, k)
        g_hi = orbit_one_sided(g, lap.hi, LEFT if lap.hi > a else RIGHT, k)
        if [p for p, _ in lo_orbit] != [p for p, _ in g_lo]:
            return ShadowReport(False, k, ("orbit mismatch", lap.lo))
        if [p for p, _ in hi_orbit] != [p for p, _ in g_hi]:
            return ShadowReport(False, k, ("orbit mismatch", lap.hi))
        for i in range(k):
            u = lo_orbit[i][0]
            w = hi_orbit[i][0]
            if u > w:
                u, w = w, u
            if not _monotone_continuous_between(g, u, w):
                return ShadowReport(False, k, ("fold or jump in hull", (i, u, w)))
    return ShadowReport(True, k)


# ---------------------------------------------------------------------------
# residual verification
# ---------------------------------------------------------------------------

def _float_nodes(g: PwaMap):
    xs = [float(n.x) for n in g.nodes]
    yl = [None if n.y_left is None else float(n.y_left) for n in g.nodes]
    yr = [None if n.y_right is None else float(n.y_right) for n in g.nodes]
    return xs, yl, yr


def _eval_float(xs, yl, yr, z: float, side: str) -> float:
    z = min(max(z, xs[0]), xs[-1])
    i = bisect.bisect_right(xs, z) - 1
    if i >= len(xs) - 1:
        i = len(xs) - 2
    if xs[i] == z:
        y = yl[i] if side == LEFT else yr[i]
        if y is None:
            y = yr[i] if yl[i] is None else yl[i]
        return y
    x0, x1 = xs[i], xs[i + 1]
    y0, y1 = yr[i], yl[i + 1]
    return y0 + (y1 - y0) * (z - x0) / (x1 - x0)


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    grid_points: int
    slope_histogram: tuple       # ((|slope|, count), ...) sorted


def verify_semiconjugacy(f: PwaMap, g: PwaMap, psi: PsiTable,
                         grid_points: int = DEFAULT_GRID,
                         snap_to_table: bool = False) -> ResidualReport:
    """sup over the grid of |psi(f(x)) - g(psi(x))|, one-sided at jumps.

    The grid is equispaced plus every breakpoint of f; with
    snap_to_table the grid snaps to the psi table support, so detached
    tables are evaluated only where they are exact.
    """
    a, b = f.domain
    width = b - a
    grid = {n.x for n in f.nodes}
    for k in range(grid_points + 1):
        grid.add(a + width * Fraction(k, grid_points))
    if snap_to_table or psi.structure is None:
        snapped = set()
        txs = psi.xs
        for x in grid:
            i = bisect.bisect_left(txs, x)
            if i >= len(txs):
                i = len(txs) - 1
            snapped.add(txs[i])
            if i > 0:
                snapped.add(txs[i - 1])
        grid = snapped
    fast = psi.structure is not None
    gx, gyl, gyr = _float_nodes(g)
    continuous = f.is_continuous
    worst = 0.0
    for x in sorted(grid):
        zx = float(psi.eval(x, fast=True)) if fast else float(psi.eval(x))
        sides = (RIGHT,) if (continuous and x < b) else (LEFT, RIGHT)
        for side in sides:
            if (side == LEFT and x == a) or (side == RIGHT and x == b):
                continue
            y = f.eval(x, side)
            lhs = float(psi.eval(y, fast=True)) if fast else float(psi.eval(y))
            rhs = _eval_float(gx, gyl, gyr, zx, side)
            r = abs(lhs - rhs)
            if r > worst:
                worst = r
    hist = {}
    for seg in g.segments:
        key = round(abs(float(seg.slope)), 9)
        hist[key] = hist.get(key, 0) + 1
    return ResidualReport(worst, len(grid), tuple(sorted(hist.items())))


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineTrace:
    indices: tuple
    betas: tuple
    gap_rows: tuple              # per schedule row; None when no comparison
    psis: tuple
    final_psi: PsiTable
    final_g: ConstantSlopeMap
    final_structure: MarkovStructure
    gamma: float
    residual: ResidualReport
    entropy_trend: float
    entropy_gap: float
    converged: bool
    markov_exact: bool
    warnings: tuple = ()

    @property
    def cauchy_gaps(self) -> tuple:
        return tuple(g for g in self.gap_rows if g is not None)

    def to_tsv(self, sig: int = 15) -> str:
        lines = ["i\tbeta_i\tcauchy_gap\tresidual"]
        for k, i in enumerate(self.indices):
            gap = "" if self.gap_rows[k] is None else format_decimal(self.gap_rows[k], sig)
            res = ""
            if k == len(self.indices) - 1:
                res = format_decimal(self.residual.residual, sig)
            lines.append(f"{i}\t{format_decimal(self.betas[k], sig)}\t{gap}\t{res}")
        return "\n".join(lines) + "\n"


def normalize(f: PwaMap, target: float = 1e-4,
              schedule: Optional[Sequence[int]] = None,
              grid_points: int = DEFAULT_GRID,
              markov_budget: int = 512,
              entropy_depth: int = 14,
              entropy_node_budget: int = 4096,
              shadow_depth: Optional[int] = None,
              markov_seeds: Sequence[Fraction] = ()) -> PipelineTrace:
    """Semiconjugate f to a constant-slope map.

    Markov maps are handled exactly in one step.  Otherwise the
    approximation schedule runs until two successive factor maps differ
    by less than `target` on the common grid (4096 equispaced points
    plus the breakpoints of f); a schedule that ends above `target`
    returns a trace flagged non-converged.
    """
    ent = entropy_lapcount(f, depth=entropy_depth,
                           max_nodes=entropy_node_budget)
    if not ent.positive:
        raise PreconditionError("entropy estimate not positive")
    try:
        s = markov_closure(f, max_points=markov_budget,
                           extra_seeds=markov_seeds)
    except (BudgetExceeded, NonConvergence):
        s = None
    if s is not None and float(s.beta) > 1:
        psi = build_psi(s, min(target, 1e-6) / 8, max_table_points=4097)
        g = build_constant_slope(s, psi, provenance="markov-exact")
        res = verify_semiconjugacy(f, g.map, psi, grid_points=grid_points)
        gamma = float(s.beta)
        return PipelineTrace(
            indices=(0,),
            betas=(gamma,),
            gap_rows=(None,),
            psis=(psi,),
            final_psi=psi,
            final_g=g,
            final_structure=s,
            gamma=gamma,
            residual=res,
            entropy_trend=ent.trend,
            entropy_gap=abs(float(generic_log(s.beta)) - ent.trend),
            converged=True,
            markov_exact=True,
        )
    if schedule is None:
        schedule = DEFAULT_SCHEDULE
    a, b = f.domain
    width = b - a
    grid = sorted(
        {n.x for n in f.nodes}
        | {a + width * Fraction(k, grid_points) for k in range(grid_points + 1)}
    )
    indices, betas, gap_rows, psis = [], [], [], []
    warnings = []
    prev_vals = None
    last = None  # (structure, psi)
    converged = False
    for n in schedule:
        g_n, cfg = markov_approx(f, n, shadow_depth=shadow_depth)
        s_n = structure_from_points(g_n, cfg.points)
        indices.append(n)
        betas.append(float(s_n.beta))
        if float(s_n.beta) <= 1:
            warnings.append(f"step {n}: beta <= 1, factor map skipped")
            gap_rows.append(None)
            continue
        psi_n = build_psi(s_n, min(target, 1e-4) / 8,
                          max_table_points=4097)
        vals = [float(psi_n.eval(x, fast=True)) for x in grid]
        psis.append(psi_n)
        last = (s_n, psi_n)
        if prev_vals is not None:
            gap = max(abs(u - w) for u, w in zip(vals, prev_vals))
            gap_rows.append(gap)
            if gap < target:
                converged = True
                prev_vals = vals
                break
        else:
            gap_rows.append(None)
        prev_vals = vals
    if last is None:
        raise NonConvergence("no schedule step produced beta > 1")
    s_fin, psi_fin = last
    slope_tol = 1e-6 if s_fin.numeric == "float" else 1e-9
    g_fin = build_constant_slope(s_fin, psi_fin, slope_rel_tol=slope_tol,
                                 provenance=f"approx-{indices[-1]}")
    res = verify_semiconjugacy(f, g_fin.map, psi_fin, grid_points=grid_points)
    gamma = float(s_fin.beta)
    return PipelineTrace(
        indices=tuple(indices),
        betas=tuple(betas),
        gap_rows=tuple(gap_rows),
        psis=tuple(psis),
        final_psi=psi_fin,
        final_g=g_fin,
        final_structure=s_fin,
        gamma=gamma,
        residual=res,
        entropy_trend=ent.trend,
        entropy_gap=abs(float(generic_log(s_fin.beta)) - ent.trend),
        converged=converged,
        markov_exact=False,
        warnings=tuple(warnings),
    )
