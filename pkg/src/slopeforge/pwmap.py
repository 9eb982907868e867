"""Exact piecewise-affine interval maps with one-sided values.

A map is stored as a list of nodes (x, y_left, y_right) with strictly
increasing rational x; between consecutive nodes the map interpolates
affinely from the left node's right value to the right node's left
value.  A node with y_left != y_right encodes a jump discontinuity;
the map is deliberately two-valued there and every consumer in this
package works with one-sided limits.

All coordinates are `fractions.Fraction`, so iteration, lap counting
and sup-distance are exact.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import BudgetExceeded, FormatError, PreconditionError
from .numeric import format_rational, parse_rational

INCREASING = "increasing"
DECREASING = "decreasing"
CONSTANT = "constant"

LEFT = "left"
RIGHT = "right"

DEFAULT_NODE_BUDGET = 10**7


def locate_leq(pts, pts_float, x: Fraction) -> int:
    """Largest index j with pts[j] <= x, or -1.

    Bisects a float shadow of the sorted Fraction array (C-speed) and
    corrects the landing exactly; avoids O(log n) Fraction comparisons
    per lookup, which dominate profiles otherwise.
    """
    j = bisect.bisect_right(pts_float, float(x)) - 1
    n = len(pts)
    while j >= 0 and pts[j] > x:
        j -= 1
    while j + 1 < n and pts[j + 1] <= x:
        j += 1
    return j


@dataclass(frozen=True)
class Node:
    x: Fraction
    y_left: Optional[Fraction]
    y_right: Optional[Fraction]


@dataclass(frozen=True)
class Lap:
    """Maximal closed interval on which the map is continuous and monotone."""

    lo: Fraction
    hi: Fraction
    direction: str  # INCREASING | DECREASING | CONSTANT


@dataclass(frozen=True)
class Segment:
    """Open affine piece between two consecutive nodes."""

    x0: Fraction
    x1: Fraction
    y0: Fraction  # right value at x0
    y1: Fraction  # left value at x1
    slope: Fraction

    def value(self, x: Fraction) -> Fraction:
        return self.y0 + self.slope * (x - self.x0)

    @property
    def direction(self) -> str:
        if self.slope > 0:
            return INCREASING
        if self.slope < 0:
            return DECREASING
        return CONSTANT


class PwaMap:
    """Piecewise-affine map of a compact rational interval.

    By default values are confined to the domain (a self-map, the
    dynamical case); selfmap=False lifts that restriction for auxiliary
    objects such as factor maps and flattening charts.
    """

    __slots__ = ("nodes", "_xs", "_xsf", "_segments", "selfmap")

    def __init__(self, nodes: Sequence[Node], selfmap: bool = True):
        nodes = tuple(nodes)
        if len(nodes) < 2:
            raise FormatError("a map needs at least 2 nodes")
        xs = [n.x for n in nodes]
        for i in range(1, len(xs)):
            if xs[i] <= xs[i - 1]:
                raise FormatError(f"non-increasing x at node {i}: {xs[i]}")
        a, b = xs[0], xs[-1]
        if nodes[0].y_left is not None:
            raise FormatError("left endpoint must not carry a left value")
        if nodes[-1].y_right is not None:
            raise FormatError("right endpoint must not carry a right value")
        for i, n in enumerate(nodes):
            if 0 < i and n.y_left is None:
                raise FormatError(f"missing left value at interior node {i}")
            if i < len(nodes) - 1 and n.y_right is None:
                raise FormatError(f"missing right value at interior node {i}")
            if selfmap:
                for y in (n.y_left, n.y_right):
                    if y is not None and not (a <= y <= b):
                        raise FormatError(
                            f"value {y} at x={n.x} falls outside the domain [{a}, {b}]"
                        )
        object.__setattr__(self, "selfmap", selfmap)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_xsf", [float(x) for x in xs])
        segs = []
        for i in range(len(nodes) - 1):
            x0, x1 = nodes[i].x, nodes[i + 1].x
            y0, y1 = nodes[i].y_right, nodes[i + 1].y_left
            segs.append(Segment(x0, x1, y0, y1, (y1 - y0) / (x1 - x0)))
        object.__setattr__(self, "_segments", tuple(segs))

    def __setattr__(self, name, value):  # immutable value object
        raise AttributeError("PwaMap is immutable")

    def __eq__(self, other):
        return isinstance(other, PwaMap) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        a, b = self.domain
        return f"PwaMap([{a},{b}], {len(self.nodes)} nodes)"

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple], selfmap: bool = True) -> "PwaMap":
        """Continuous map through the given (x, y) breakpoints."""
        pts = [(Fraction(x), Fraction(y)) for x, y in pairs]
        nodes = []
        for i, (x, y) in enumerate(pts):
            yl = None if i == 0 else y
            yr = None if i == len(pts) - 1 else y
            nodes.append(Node(x, yl, yr))
        return cls(nodes, selfmap=selfmap)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple], selfmap: bool = True) -> "PwaMap":
        """Nodes given as (x, y_left-or-None, y_right-or-None)."""
        nodes = []
        for x, yl, yr in triples:
            nodes.append(
                Node(
                    Fraction(x),
                    None if yl is None else Fraction(yl),
                    None if yr is None else Fraction(yr),
                )
            )
        return cls(nodes, selfmap=selfmap)

    # -- basic queries -------------------------------------------------------

    @property
    def domain(self) -> tuple:
        return self._xs[0], self._xs[-1]

    @property
    def segments(self) -> tuple:
        return self._segments

    @property
    def is_continuous(self) -> bool:
        return all(
            n.y_left == n.y_right for n in self.nodes[1:-1]
        )

    @property
    def has_plateau(self) -> bool:
        return any(s.slope == 0 for s in self._segments)

    def node_index(self, x: Fraction) -> int:
        """Index of the node at x, or -1 when x is not a node."""
        i = locate_leq(self._xs, self._xsf, x)
        if i >= 0 and self._xs[i] == x:
            return i
        return -1

    def segment_index(self, x: Fraction, side: str) -> int:
        """Segment adjacent to x on the given side."""
        a, b = self.domain
        j = locate_leq(self._xs, self._xsf, x)
        if side == RIGHT:
            if x >= b:
                raise PreconditionError(f"no right side at x={x}")
            return j
        if x <= a:
            raise PreconditionError(f"no left side at x={x}")
        if self._xs[j] == x:
            return j - 1
        return j

    def eval(self, x: Fraction, side: Optional[str] = None) -> Fraction:
        """One-sided value of the map at x.

        With side=None the point must be a continuity point (interior of
        a segment, or a node with matching one-sided values).
        """
        x = Fraction(x)
        a, b = self.domain
        if not (a <= x <= b):
            raise PreconditionError(f"x={x} outside domain [{a}, {b}]")
        i = self.node_index(x)
        if side is None:
            if i >= 0:
                n = self.nodes[i]
                if n.y_left is None:
                    return n.y_right
                if n.y_right is None or n.y_left == n.y_right:
                    return n.y_left
                raise PreconditionError(
                    f"map is two-valued at x={x}; pass side='left' or 'right'"
                )
            seg = self._segments[self.segment_index(x, RIGHT)]
            return seg.value(x)
        if side not in (LEFT, RIGHT):
            raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
        if i >= 0:
            n = self.nodes[i]
            y = n.y_left if side == LEFT else n.y_right
            if y is None:
                raise PreconditionError(f"side {side!r} undefined at endpoint x={x}")
            return y
        seg = self._segments[self.segment_index(x, side)]
        return seg.value(x)

    def value_at(self, x: Fraction) -> Fraction:
        """Single-valued convention: right limit, left at the right endpoint."""
        i = self.node_index(x)
        if i >= 0:
            n = self.nodes[i]
            return n.y_right if n.y_right is not None else n.y_left
        return self.eval(x)

    def slope_side(self, x: Fraction, side: str) -> Fraction:
        return self._segments[self.segment_index(x, side)].slope

    def __call__(self, x):
        return self.eval(Fraction(x))


# -- laps ---------------------------------------------------------------


def laps(f: PwaMap) -> list:
    """Maximal intervals of simultaneous continuity and monotonicity.

    Runs of segments merge only when the direction matches exactly, so a
    plateau stays a single constant lap and the flanking monotone laps
    close at its endpoints.
    """
    out = []
    segs = f.segments
    start = segs[0].x0
    direction = segs[0].direction
    for i in range(1, len(segs)):
        node = f.nodes[i]
        continuous = node.y_left == node.y_right
        if continuous and segs[i].direction == direction:
            continue
        out.append(Lap(start, segs[i].x0, direction))
        start = segs[i].x0
        direction = segs[i].direction
    out.append(Lap(start, segs[-1].x1, direction))
    return out


def modality(f: PwaMap) -> int:
    """Number of laps minus one."""
    return len(laps(f)) - 1


# -- composition and iteration -------------------------------------------


def _outer_limit(outer: PwaMap, y: Fraction, approach_slope: Fraction, side: str) -> Fraction:
    """Limit of outer(inner(t)) as t tends to x from `side`.

    approach_slope is the slope of the inner map on that side of x; its
    sign decides from which side the inner values approach y.  A plateau
    (slope 0) takes the actual value of outer at y, right-preferring at
    jump points of outer.
    """
    if approach_slope == 0:
        return outer.value_at(y)
    if side == RIGHT:
        toward = RIGHT if approach_slope > 0 else LEFT
    else:
        toward = LEFT if approach_slope > 0 else RIGHT
    a, b = outer.domain
    if y == a and toward == LEFT:
        toward = RIGHT
    if y == b and toward == RIGHT:
        toward = LEFT
    return outer.eval(y, toward)


def compose(outer: PwaMap, inner: PwaMap, max_nodes: int = DEFAULT_NODE_BUDGET) -> PwaMap:
    """Exact composition outer(inner(x)) as a PwaMap."""
    if outer.domain != inner.domain:
        raise PreconditionError("composition requires a common domain")
    a, b = inner.domain
    breakpoints = set(x for x in inner._xs)
    outer_xs = outer._xs
    for seg in inner.segments:
        if seg.slope == 0:
            continue
        lo, hi = (seg.y0, seg.y1) if seg.slope > 0 else (seg.y1, seg.y0)
        i = bisect.bisect_right(outer_xs, lo)
        while i < len(outer_xs) and outer_xs[i] < hi:
            t = seg.x0 + (outer_xs[i] - seg.y0) / seg.slope
            breakpoints.add(t)
            i += 1
        if len(breakpoints) > max_nodes:
            raise BudgetExceeded(
                f"composition exceeds the node budget ({max_nodes}); "
                "raise the limit or lower the depth"
            )
    xs = sorted(breakpoints)
    nodes = []
    for x in xs:
        yl = yr = None
        if x > a:
            s = inner.slope_side(x, LEFT)
            yl = _outer_limit(outer, inner.eval(x, LEFT), s, LEFT)
        if x < b:
            s = inner.slope_side(x, RIGHT)
            yr = _outer_limit(outer, inner.eval(x, RIGHT), s, RIGHT)
        nodes.append(Node(x, yl, yr))
    return PwaMap(nodes)


def iterate(f: PwaMap, k: int, max_nodes: int = DEFAULT_NODE_BUDGET) -> PwaMap:
    """The k-th iterate of f as an exact PwaMap (k >= 1)."""
    if k < 1:
        raise PreconditionError("iterate needs k >= 1")
    g = f
    for _ in range(k - 1):
        g = compose(f, g, max_nodes=max_nodes)
    return g


def lap_count(f: PwaMap, n: int, max_nodes: int = DEFAULT_NODE_BUDGET) -> int:
    """Number of laps of the n-th iterate."""
    return len(laps(iterate(f, n, max_nodes=max_nodes)))


def lap_counts(f: PwaMap, upto: int, max_nodes: int = DEFAULT_NODE_BUDGET) -> list:
    """[c_1, ..., c_upto] computed with incremental composition."""
    out = []
    g = f
    for n in range(1, upto + 1):
        if n > 1:
            g = compose(f, g, max_nodes=max_nodes)
        out.append(len(laps(g)))
    return out


# -- metric ---------------------------------------------------------------


def sup_dist(f: PwaMap, g: PwaMap) -> Fraction:
    """Exact sup of |f - g| over the common domain.

    The difference is affine between breakpoints, so the sup is attained
    among the one-sided values at the union of the node sets.
    """
    if f.domain != g.domain:
        raise PreconditionError("sup_dist requires a common domain")
    a, b = f.domain
    xs = sorted(set(f._xs) | set(g._xs))
    best = Fraction(0)
    for x in xs:
        for side in (LEFT, RIGHT):
            if (side == LEFT and x == a) or (side == RIGHT and x == b):
                continue
            d = abs(f.eval(x, side) - g.eval(x, side))
            if d > best:
                best = d
    return best


# -- point preimages -------------------------------------------------------


def preimage_points(f: PwaMap, y: Fraction) -> list:
    """Isolated solutions of f(x) = y, segment by segment.

    Plateau segments at level y contribute nothing: the refinement
    machinery must not subdivide along constant pieces.
    """
    y = Fraction(y)
    hits = set()
    for seg in f.segments:
        if seg.slope == 0:
            continue
        lo, hi = (seg.y0, seg.y1) if seg.y0 <= seg.y1 else (seg.y1, seg.y0)
        if lo <= y <= hi:
            hits.add(seg.x0 + (y - seg.y0) / seg.slope)
    return sorted(hits)


# -- orbits -----------------------------------------------------------------


def orbit(f: PwaMap, x: Fraction, k: int) -> list:
    """[x, f(x), ..., f^k(x)] with the right-preferring value convention."""
    x = Fraction(x)
    out = [x]
    for _ in range(k):
        x = f.value_at(x)
        out.append(x)
    return out


def orbit_one_sided(f: PwaMap, x: Fraction, side: str, k: int) -> list:
    """Orbit of the one-sided germ (x, side): [(x0, s0), ..., (xk, sk)].

    The side flips through decreasing branches and survives increasing
    ones; a plateau lands exactly on its value and continues with the
    right-preferring convention.
    """
    a, b = f.domain
    cur, s = Fraction(x), side
    out = [(cur, s)]
    for _ in range(k):
        slope = f.slope_side(cur, s)
        y = f.eval(cur, s)
        if slope > 0:
            ns = s
        elif slope < 0:
            ns = LEFT if s == RIGHT else RIGHT
        else:
            ns = RIGHT
        if y == a:
            ns = RIGHT
        elif y == b:
            ns = LEFT
        cur, s = y, ns
        out.append((cur, s))
    return out


# -- PWA v1 text format ------------------------------------------------------


def parse_pwa(text: str) -> PwaMap:
    """Parse the PWA v1 text format.

    Line 1: ``pwa 1``; line 2: ``domain <a> <b>``; line 3: ``nodes <k>``;
    then k lines ``<x> <y_left|-> <y_right|->`` ordered by x, with
    rationals as ``p/q`` or integer/decimal literals.
    """
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 3:
        raise FormatError("truncated PWA document")
    if lines[0].split() != ["pwa", "1"]:
        raise FormatError(f"bad header: {lines[0]!r}")
    dom = lines[1].split()
    if len(dom) != 3 or dom[0] != "domain":
        raise FormatError(f"bad domain line: {lines[1]!r}")
    try:
        a, b = parse_rational(dom[1]), parse_rational(dom[2])
    except ValueError as exc:
        raise FormatError(str(exc))
    cnt = lines[2].split()
    if len(cnt) != 2 or cnt[0] != "nodes":
        raise FormatError(f"bad nodes line: {lines[2]!r}")
    try:
        k = int(cnt[1])
    except ValueError:
        raise FormatError(f"bad node count: {cnt[1]!r}")
    if k < 2:
        raise FormatError("fewer than 2 nodes")
    if len(lines) != 3 + k:
        raise FormatError(f"expected {k} node lines, found {len(lines) - 3}")
    nodes = []
    prev_x = None
    for ln in lines[3:]:
        fields = ln.split()
        if len(fields) != 3:
            raise FormatError(f"bad node line: {ln!r}")
        try:
            x = parse_rational(fields[0])
            yl = None if fields[1] == "-" else parse_rational(fields[1])
            yr = None if fields[2] == "-" else parse_rational(fields[2])
        except ValueError as exc:
            raise FormatError(str(exc))
        if prev_x is not None and x <= prev_x:
            raise FormatError(f"non-increasing x at {format_rational(x)}")
        prev_x = x
        nodes.append(Node(x, yl, yr))
    if nodes[0].x != a or nodes[-1].x != b:
        raise FormatError("first/last node must sit on the domain endpoints")
    return PwaMap(nodes)


def serialize_pwa(f: PwaMap) -> str:
    """Emit the PWA v1 text format (lowest-terms rationals, bit-exact)."""
    a, b = f.domain
    out = ["pwa 1", f"domain {format_rational(a)} {format_rational(b)}",
           f"nodes {len(f.nodes)}"]
    for n in f.nodes:
        yl = "-" if n.y_left is None else format_rational(n.y_left)
        yr = "-" if n.y_right is None else format_rational(n.y_right)
        out.append(f"{format_rational(n.x)} {yl} {yr}")
    return "\n".join(out) + "\n"
