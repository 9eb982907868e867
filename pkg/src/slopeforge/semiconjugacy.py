"""The increasing factor map psi and the constant-slope image map.

psi is defined on the n-th refinement points by cumulative sums of the
Perron eigenvector over refinement cells (weights v of the n-step image
cell, singleton-image cells omitted) and extends continuously to the
whole interval with modulus beta^-n.

Materializing a deep refinement is exponential in n, so a PsiTable
stores an exact table up to a budgeted depth and carries its structure
for on-demand evaluation: a point is evaluated by walking its exact
orbit and accumulating the eigenvector mass that its refinement cells
leave on each side, which certifies psi(x) to beta^-depth at O(depth)
rational operations.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from .errors import (
    BudgetExceeded,
    FormatError,
    PreconditionError,
    VerificationError,
)
from .markov import MarkovStructure, Refinement, refine
from .numeric import format_decimal, format_rational, parse_rational, rationalize
from .pwmap import LEFT, RIGHT, PwaMap, laps, locate_leq

COLLAPSE_TOL = 1e-12
DEFAULT_TABLE_POINTS = 16385
NODE_DIGITS = 40


@dataclass(frozen=True)
class PsiTable:
    """Sampled increasing factor map with a certified modulus.

    depth is the certification depth: evaluation (and interpolation
    between table entries finer than table_depth) is exact up to
    error_bound = beta^-depth.  xs/ys hold the exact values on the
    refinement points of table_depth; ys[0] = 0 and ys[-1] = 1 exactly.
    """

    depth: int
    table_depth: int
    xs: tuple
    ys: tuple
    beta: object
    error_bound: float
    collapse_intervals: tuple
    structure: Optional[MarkovStructure] = None

    def __post_init__(self):
        if self.structure is not None:
            s = self.structure
            V = s.prefix_sums()
            total = V[-1]
            object.__setattr__(self, "_pts", list(s.points))
            object.__setattr__(self, "_ptsf", [float(p) for p in s.points])
            object.__setattr__(self, "_V", [u / total for u in V])
            object.__setattr__(self, "_Vf", [float(u / total) for u in V])
            # raw affine data of the map for tight orbit stepping
            f = s.map
            object.__setattr__(self, "_seg_x", [seg.x0 for seg in f.segments])
            object.__setattr__(self, "_seg_xf", [float(seg.x0) for seg in f.segments])
            object.__setattr__(self, "_seg_y", [seg.y0 for seg in f.segments])
            object.__setattr__(self, "_seg_s", [seg.slope for seg in f.segments])
            # table data for the interpolated tail of the descent
            object.__setattr__(self, "_txs", list(self.xs))
            object.__setattr__(self, "_txsf", [float(x) for x in self.xs])
            object.__setattr__(self, "_tys", list(self.ys))
            object.__setattr__(self, "_tys_f", [float(y) for y in self.ys])
            gap = max(
                float(self.ys[i + 1] - self.ys[i])
                for i in range(len(self.ys) - 1)
            )
            object.__setattr__(self, "_tgap", gap)

    def eval(self, x, fast: bool = False) -> object:
        """psi(x) for any point of the domain.

        Structure-backed tables walk the exact orbit of x down to
        self.depth; `fast` accumulates the eigenvector mass in float64
        (the orbit itself stays exact).  Detached tables (loaded from
        TSV) fall back to monotone interpolation between table entries.
        """
        x = Fraction(x)
        if self.structure is not None:
            if fast:
                return self._descend(x, self._Vf, float(self.beta), 1.0)
            one = self._V[-1] / self._V[-1]
            return self._descend(x, self._V, self.beta, one)
        i = bisect.bisect_left(self.xs, x)
        if i < len(self.xs) and self.xs[i] == x:
            return self.ys[i]
        if i == 0 or i == len(self.xs):
            raise PreconditionError(f"x={x} outside the psi table domain")
        x0, x1 = self.xs[i - 1], self.xs[i]
        y0, y1 = self.ys[i - 1], self.ys[i]
        return y0 + (y1 - y0) * float((x - x0) / (x1 - x0))

    def _table_interp(self, x: Fraction, ys):
        txs = self._txs
        i = locate_leq(txs, self._txsf, x)
        if txs[i] == x:
            return ys[i]
        x0, x1 = txs[i], txs[i + 1]
        return ys[i] + (ys[i + 1] - ys[i]) * float((x - x0) / (x1 - x0))

    def _descend(self, x: Fraction, V, beta, scale):
        """Exact orbit descent with an interpolated tail.

        Loop invariant: psi(x0) = acc + scale * (mass of the current
        cell on the tracked side of x).  Once scale times the table's
        maximum increment is below the certified bound, that mass is
        read off the table (psi(x) - V[i] on the left relation,
        V[i+1] - psi(x) on the right), which keeps the total error
        within beta^-depth at a fraction of the steps.
        """
        pts = self._pts
        ptsf = self._ptsf
        covers = self.structure.covers
        dirs = self.structure.directions
        seg_x, seg_y, seg_s = self._seg_x, self._seg_y, self._seg_s
        seg_xf = self._seg_xf
        tys = self._tys_f if isinstance(scale, float) else self._tys
        tail = float(self.beta) ** (-self.depth)
        tgap = self._tgap
        if x <= pts[0]:
            return V[0]
        if x >= pts[-1]:
            return V[-1]
        i = locate_leq(pts, ptsf, x)
        if pts[i] == x:
            return V[i]
        acc = V[i]
        rel_left = True
        for _ in range(self.depth):
            if float(scale) * tgap <= tail:
                approx = self._table_interp(x, tys)
                if rel_left:
                    acc = acc + scale * (approx - V[i])
                else:
                    acc = acc + scale * (V[i + 1] - approx)
                return acc
            d = dirs[i]
            if d == 0:
                break
            lo, hi = covers[i]
            scale = scale / beta
            k = locate_leq(seg_x, seg_xf, x)
            y = seg_y[k] + seg_s[k] * (x - seg_x[k])
            j = locate_leq(pts, ptsf, y)
            hit = pts[j] == y
            if rel_left == (d > 0):
                acc = acc + scale * (V[j] - V[lo])
                if hit:
                    break
                rel_left = True
            else:
                if hit:
                    acc = acc + scale * (V[hi] - V[j])
                    break
                acc = acc + scale * (V[hi] - V[j + 1])
                rel_left = False
            x, i = y, j
        return acc

    def max_table_gap(self) -> float:
        return max(
            float(self.ys[i + 1] - self.ys[i]) for i in range(len(self.ys) - 1)
        )


def _prefix_values(s: MarkovStructure, r: Refinement) -> list:
    """Normalized cumulative eigenvector mass along the refinement cells."""
    v = s.v
    zero = v[0] * 0
    acc = zero
    out = [zero]
    for e in r.image_elem:
        if e >= 0:
            acc = acc + v[e]
        out.append(acc)
    total = out[-1]
    if float(total) == 0.0:
        raise PreconditionError("eigenvector mass vanished: no factor map")
    return [y / total for y in out]


def _collapse_from_table(xs, ys, tol: float) -> tuple:
    out = []
    i = 0
    while i < len(xs) - 1:
        j = i
        while j + 1 < len(xs) and float(ys[j + 1] - ys[i]) <= tol:
            j += 1
        if j > i:
            out.append((xs[i], xs[j]))
        i = max(j, i + 1)
    return tuple(out)


def psi_on_points(s: MarkovStructure, depth: int,
                  max_points: int = 2_000_000) -> PsiTable:
    """Exact psi on the full refinement point set P_depth."""
    r = refine(s, depth, max_points=max_points)
    ys = _prefix_values(s, r)
    collapse = _collapse_from_table(r.points, ys, COLLAPSE_TOL)
    return PsiTable(
        depth=depth,
        table_depth=depth,
        xs=r.points,
        ys=tuple(ys),
        beta=s.beta,
        error_bound=float(s.beta) ** (-depth),
        collapse_intervals=collapse,
        structure=s,
    )


def build_psi(s: MarkovStructure, target_err: float,
              max_table_points: int = DEFAULT_TABLE_POINTS,
              max_depth: int = 4096) -> PsiTable:
    """Choose the certification depth for target_err and build the table.

    The table materializes the deepest refinement that stays within
    max_table_points; deeper evaluation runs through the exact descent,
    so consumers see error <= target_err everywhere.
    """
    beta = s.beta
    if float(beta) <= 1:
        raise PreconditionError("the factor construction needs beta > 1")
    if target_err <= 0:
        raise PreconditionError("target_err must be positive")
    depth = 1
    power = 1 / beta
    while float(power) >= target_err:
        depth += 1
        power = power / beta
        if depth > max_depth:
            raise BudgetExceeded(
                f"target_err {target_err} needs depth > {max_depth}"
            )
    from .markov import _refinement_seed, _refinement_step

    f = s.map
    pts, image, orient = _refinement_seed(s)
    table_depth = 0
    while table_depth < depth:
        try:
            nxt = _refinement_step(f, pts, image, orient, max_table_points)
        except BudgetExceeded:
            break
        pts, image, orient = nxt
        table_depth += 1
    r = Refinement(table_depth, tuple(pts), tuple(image), tuple(orient))
    ys = _prefix_values(s, r)
    collapse = _collapse_from_table(r.points, ys, COLLAPSE_TOL)
    return PsiTable(
        depth=depth,
        table_depth=table_depth,
        xs=r.points,
        ys=tuple(ys),
        beta=beta,
        error_bound=float(beta) ** (-depth),
        collapse_intervals=collapse,
        structure=s,
    )


# ---------------------------------------------------------------------------
# the constant-slope image map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantSlopeMap:
    map: PwaMap
    slope: float
    provenance: str

    @property
    def max_slope_deviation(self) -> float:
        dev = 0.0
        for seg in self.map.segments:
            sl = abs(float(seg.slope))
            if sl == 0.0:
                continue
            dev = max(dev, abs(sl - self.slope) / self.slope)
        return dev


def build_constant_slope(s: MarkovStructure, psi: PsiTable,
                         slope_rel_tol: float = 1e-9,
                         provenance: str = "") -> ConstantSlopeMap:
    """Image map g on [0,1]: nodes at psi(P) valued psi(f(P +-)).

    Collapsed cells contribute no nodes (consecutive P points with equal
    psi merge into one node, taking the left limit from the leftmost and
    the right limit from the rightmost point of the group).
    """
    beta = s.beta
    if float(beta) <= 1:
        raise PreconditionError("constant-slope construction needs beta > 1")
    f = s.map
    a, b = f.domain
    pts = s.points
    # psi is exact on the structure points (table depth >= 0), so the
    # node-merge threshold is the collapse resolution, not the table error
    zs = [psi.eval(p) for p in pts]
    merge_tol = COLLAPSE_TOL
    groups = []
    i = 0
    while i < len(pts):
        j = i
        while j + 1 < len(pts) and float(zs[j + 1] - zs[i]) <= merge_tol:
            j += 1
        groups.append((i, j))
        i = j + 1
    triples = []
    for gi, (i, j) in enumerate(groups):
        # endpoint groups pin the exact endpoint values 0 and 1; the
        # group-internal spread is eigenvector residual only
        z = zs[j] if gi == len(groups) - 1 else zs[i]
        yl = None
        yr = None
        if gi > 0:
            yl = psi.eval(f.eval(pts[i], LEFT))
        if gi < len(groups) - 1:
            yr = psi.eval(f.eval(pts[j], RIGHT))
        triples.append((z, yl, yr))
    nodes = []
    for z, yl, yr in triples:
        nodes.append(
            (
                _unit_clamp(rationalize(z, NODE_DIGITS)),
                None if yl is None else _unit_clamp(rationalize(yl, NODE_DIGITS)),
                None if yr is None else _unit_clamp(rationalize(yr, NODE_DIGITS)),
            )
        )
    g = PwaMap.from_triples(nodes)
    cs = ConstantSlopeMap(g, float(beta), provenance)
    if cs.max_slope_deviation > slope_rel_tol:
        raise VerificationError(
            f"piece slopes deviate from beta by {cs.max_slope_deviation:.3e}; "
            "the psi table depth is insufficient"
        )
    return cs


def _unit_clamp(x: Fraction) -> Fraction:
    return min(max(x, Fraction(0)), Fraction(1))


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingCheckReport:
    max_residual: float
    samples: int
    tolerance: float


def check_scaling_identity(f: PwaMap, psi: PsiTable, beta, samples: int = 10000,
                seed: int = 0) -> ScalingCheckReport:
    """Sample |psi(f(y)) - psi(f(x))| = beta |psi(y) - psi(x)| on laps.

    Pairs are drawn with both points interior to one lap; the reported
    tolerance includes the table's certified evaluation error.
    """
    rng = random.Random(seed)
    lps = laps(f)
    denom = 2**24
    worst = 0.0
    bf = float(beta)
    for _ in range(samples):
        lap = lps[rng.randrange(len(lps))]
        width = lap.hi - lap.lo
        u = lap.lo + width * Fraction(rng.randrange(denom + 1), denom)
        w = lap.lo + width * Fraction(rng.randrange(denom + 1), denom)
        if u == w:
            continue
        hull_ok = lap.lo < min(u, w) and max(u, w) < lap.hi
        if not hull_ok:
            continue
        lhs = abs(psi.eval(f.eval(w), fast=True) - psi.eval(f.eval(u), fast=True))
        rhs = bf * abs(psi.eval(w, fast=True) - psi.eval(u, fast=True))
        worst = max(worst, abs(lhs - rhs))
    tol = 4 * psi.error_bound * max(1.0, bf)
    return ScalingCheckReport(worst, samples, tol)


@dataclass(frozen=True)
class CompatibilityReport:
    ok: bool
    witnesses: tuple

    def __bool__(self):
        return self.ok


def check_compatibility(f: PwaMap, psi: PsiTable,
                        tol: float = COLLAPSE_TOL) -> CompatibilityReport:
    """Laps collapsed by psi must have collapsed images."""
    res = max(tol, 2 * psi.error_bound)
    bad = []
    bf = 1.0 if psi.beta is None else float(psi.beta)
    fast = psi.structure is not None
    for lap in laps(f):
        span = float(psi.eval(lap.hi, fast=fast) - psi.eval(lap.lo, fast=fast))
        if span > res:
            continue
        u = f.eval(lap.lo, RIGHT)
        w = f.eval(lap.hi, LEFT)
        img_span = abs(float(psi.eval(w, fast=fast) - psi.eval(u, fast=fast)))
        if img_span > max(bf * res, 4 * psi.error_bound):
            bad.append((lap.lo, lap.hi))
    return CompatibilityReport(not bad, tuple(bad))


# ---------------------------------------------------------------------------
# TSV interchange
# ---------------------------------------------------------------------------

def psi_to_tsv(psi: PsiTable, sig: int = 15) -> str:
    lines = ["x\tpsi\tx_exact"]
    for x, y in zip(psi.xs, psi.ys):
        lines.append(
            f"{format_decimal(x, sig)}\t{format_decimal(y, sig)}\t{format_rational(x)}"
        )
    return "\n".join(lines) + "\n"


def psi_from_tsv(text: str) -> PsiTable:
    """Detached table (interpolation only; no structure attached)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("x\tpsi"):
        raise FormatError("bad psi TSV header")
    xs: List[Fraction] = []
    ys: List[float] = []
    for ln in lines[1:]:
        cols = ln.split("\t")
        if len(cols) < 2:
            raise FormatError(f"bad psi TSV row: {ln!r}")
        x = parse_rational(cols[2] if len(cols) > 2 else cols[0])
        xs.append(x)
        ys.append(float(cols[1]))
    if xs != sorted(xs):
        raise FormatError("psi TSV rows must be sorted by x")
    gap = max((ys[i + 1] - ys[i] for i in range(len(ys) - 1)), default=1.0)
    return PsiTable(
        depth=0,
        table_depth=0,
        xs=tuple(xs),
        ys=tuple(ys),
        beta=None,
        error_bound=gap,
        collapse_intervals=_collapse_from_table(xs, ys, COLLAPSE_TOL),
        structure=None,
    )
