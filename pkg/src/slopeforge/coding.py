"""Itinerary coding and the finite-depth quotient to strict monotonicity.

Points that share the lap code at every depth are identified; the
quotient collapses each equivalence interval and rescales the rest,
and the map factors through.  At finite depth d the computable
surrogate is: cut the interval at all preimages of lap endpoints up to
depth d-1, code each cell by the laps its iterated images visit, and
collapse (a) cells whose image degenerates to a point within d steps
and (b) maximal runs of adjacent cells with identical d-codes.
Collapse intervals shrink as d grows; deeper equivalences may stay
uncollapsed.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from .entropy import entropy_lapcount
from .errors import BudgetExceeded, PreconditionError
from .markov import _preimage_sweep
from .numeric import format_rational
from .pwmap import LEFT, RIGHT, PwaMap, laps


@dataclass(frozen=True)
class Itinerary:
    word: tuple                  # lap index per step
    ambiguous_at: tuple          # positions sitting on a shared lap endpoint


def _lap_location(lap_list, lap_los, p, prefer_left=True):
    """(lap index, ambiguous); shared endpoints take the left lap unless
    the right-lap convention is requested."""
    i = bisect.bisect_right(lap_los, p) - 1
    if i > 0 and lap_list[i].lo == p:
        return (i - 1 if prefer_left else i), True
    if i < 0:
        i = 0
    return i, False


def _step_point(f: PwaMap, p: Fraction, ambiguous: bool,
                prefer_left: bool = True) -> Fraction:
    """Orbit step matching the lap convention at ambiguous points."""
    a, b = f.domain
    if p > a and ((ambiguous and prefer_left) or p == b):
        return f.eval(p, LEFT)
    return f.eval(p, RIGHT)


def itinerary(f: PwaMap, x, n: int) -> Itinerary:
    """Code the first n orbit positions of x by lap membership.

    Ambiguous positions resolve to the left lap and the orbit continues
    with the left limit there, so the word is the limit of the words of
    nearby points approaching from the left.
    """
    a, b = f.domain
    p = Fraction(x)
    if not (a <= p <= b):
        raise PreconditionError(f"x={p} outside the domain")
    lap_list = laps(f)
    lap_los = [l.lo for l in lap_list]
    word = []
    amb = []
    for k in range(n):
        i, ambiguous = _lap_location(lap_list, lap_los, p)
        word.append(i)
        if ambiguous:
            amb.append(k)
        p = _step_point(f, p, ambiguous)
    return Itinerary(tuple(word), tuple(amb))


@dataclass(frozen=True)
class QuotientResult:
    collapse_intervals: tuple    # disjoint closed rational intervals
    psi0: PwaMap                 # increasing factor map onto [0,1]
    fhat: PwaMap                 # the factor map (see leak diagnostics)
    depth: int
    # A plateau whose value level has preimages spawns equivalence
    # classes at every depth; the depth-d quotient must leave the
    # classes past its horizon uncollapsed, which shows up as plateau
    # pieces of fhat below the quotient's resolution.  They shrink
    # geometrically with depth.
    leak_plateau_count: int = 0
    leak_plateau_length: Fraction = Fraction(0)

    def to_tsv(self) -> str:
        lines = ["lo\thi"]
        for lo, hi in self.collapse_intervals:
            lines.append(f"{format_rational(lo)}\t{format_rational(hi)}")
        return "\n".join(lines) + "\n"


def _cell_codes(f: PwaMap, pts, depth: int, lap_list, lap_los,
                prefer_left: bool = True):
    """Per cell: (code word, degenerate-within-depth flag, image interval).

    Image intervals are tracked exactly through one-sided endpoint
    values; the open image of a cell sits inside a single lap by
    construction of the cut set.
    """
    out = []
    nlaps = len(lap_list)
    for i in range(len(pts) - 1):
        lo, hi = pts[i], pts[i + 1]
        first_image = None
        degenerate = False
        word = []
        for _ in range(depth):
            if lo == hi:
                degenerate = True
                j, ambiguous = _lap_location(lap_list, lap_los, lo, prefer_left)
                word.append(j)
                lo = hi = _step_point(f, lo, ambiguous, prefer_left)
                if first_image is None:
                    first_image = (lo, hi)
                continue
            j = bisect.bisect_right(lap_los, lo) - 1
            if j < 0:
                j = 0
            if lap_list[j].hi <= lo and j + 1 < nlaps:
                j += 1
            word.append(j)
            y0 = f.eval(lo, RIGHT)
            y1 = f.eval(hi, LEFT)
            lo, hi = (y0, y1) if y0 <= y1 else (y1, y0)
            if first_image is None:
                first_image = (lo, hi)
        out.append((tuple(word), degenerate, first_image))
    return out


def psm_reduce(f: PwaMap, depth: int = 16,
               max_points: int = 500_000,
               prefer_left: bool = True) -> QuotientResult:
    """Collapse depth-d code classes and factor f through the quotient.

    prefer_left picks the resolution of shared-endpoint codes; both
    resolutions must produce the same quotient on well-posed inputs.
    """
    ent = entropy_lapcount(f, depth=min(depth, 10))
    if not ent.positive:
        raise PreconditionError(
            "entropy estimate not positive; quotient degenerates"
        )
    a, b = f.domain
    lap_list = laps(f)
    lap_los = [l.lo for l in lap_list]
    boundary = sorted({l.lo for l in lap_list} | {l.hi for l in lap_list})
    pts = set(boundary)
    cur = boundary
    for _ in range(depth - 1):
        new = _preimage_sweep(f, cur) - pts
        pts |= new
        if len(pts) > max_points:
            raise BudgetExceeded(
                f"coding partition exceeded {max_points} points"
            )
        cur = sorted(new)
        if not cur:
            break
    pts = sorted(pts)
    codes = _cell_codes(f, pts, depth, lap_list, lap_los, prefer_left)
    ncells = len(pts) - 1
    flagged = [False] * ncells
    i = 0
    while i < ncells:
        j = i
        while j + 1 < ncells and codes[j + 1][0] == codes[i][0]:
            j += 1
        if j > i or codes[i][1]:
            for k in range(i, j + 1):
                flagged[k] = True
        i = j + 1
    # backward closure: a cell whose one-step image lies inside a
    # collapsed interval is itself an equivalence interval (its points
    # share the first symbol and all deeper code symbols)
    while True:
        collapse = _flag_intervals(pts, codes, flagged)
        changed = False
        clos = [c[0] for c in collapse]
        for k in range(ncells):
            if flagged[k]:
                continue
            img = codes[k][2]
            if img is None:
                continue
            ylo, yhi = img
            ci = bisect.bisect_right(clos, ylo) - 1
            if ci >= 0 and collapse[ci][0] <= ylo and yhi <= collapse[ci][1]:
                flagged[k] = True
                changed = True
        if not changed:
            break
    collapse = _flag_intervals(pts, codes, flagged)
    total = sum(hi - lo for lo, hi in collapse)
    span = (b - a) - total
    if span <= 0:
        raise PreconditionError("quotient degenerates to a point at this depth")
    psi0 = _collapse_map(a, b, collapse, span)
    fhat = _factor_map(f, psi0, collapse)
    leaks = [seg for seg in fhat.segments if seg.slope == 0]
    leak_len = sum((seg.x1 - seg.x0 for seg in leaks), Fraction(0))
    return QuotientResult(tuple(collapse), psi0, fhat, depth,
                          len(leaks), leak_len)


def _flag_intervals(pts, codes, flagged):
    """Maximal runs of flagged cells with a common code, as intervals."""
    out = []
    ncells = len(flagged)
    i = 0
    while i < ncells:
        if not flagged[i]:
            i += 1
            continue
        j = i
        while (j + 1 < ncells and flagged[j + 1]
               and codes[j + 1][0] == codes[i][0]):
            j += 1
        out.append((pts[i], pts[j + 1]))
        i = j + 1
    return out


def _collapse_map(a, b, collapse, span):
    """Increasing map squashing the collapse intervals, scaled onto [0,1]."""
    scale = Fraction(1) / span
    xs = sorted({a, b} | {x for pair in collapse for x in pair})
    pairs = []
    acc = Fraction(0)
    prev = a
    for x in xs:
        seg = x - prev
        for lo, hi in collapse:
            ov = min(x, hi) - max(prev, lo)
            if ov > 0:
                seg -= ov
        acc += seg
        pairs.append((x, acc * scale))
        prev = x
    return PwaMap.from_pairs(pairs, selfmap=False)


def _factor_map(f: PwaMap, psi0: PwaMap, collapse):
    """psi0 o f o psi0^{-1} on representatives, as an exact map on [0,1].

    Breakpoints: the nodes of f, the collapse boundaries, and their
    f-preimages (where the image crosses a kink of psi0).
    """
    a, b = f.domain
    psi_nodes = sorted({n.x for n in psi0.nodes})
    cuts = {n.x for n in f.nodes} | {a, b} | set(psi_nodes)
    cuts |= _preimage_sweep(f, psi_nodes)
    zs = {}
    for x in sorted(cuts):
        z = psi0.eval(x)
        zs.setdefault(z, []).append(x)
    triples = []
    for z in sorted(zs):
        group = zs[z]
        xl, xr = group[0], group[-1]
        yl = psi0.eval(f.eval(xl, LEFT)) if xl > a else None
        yr = psi0.eval(f.eval(xr, RIGHT)) if xr < b else None
        triples.append((z, yl, yr))
    return PwaMap.from_triples(triples)
