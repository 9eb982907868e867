"""Bundled example maps used by the test-suite, docs and CLI demos."""

from __future__ import annotations

from fractions import Fraction as F

from .pwmap import PwaMap


def tent() -> PwaMap:
    """Full tent map, slope 2, entropy log 2."""
    return PwaMap.from_pairs([(0, 0), (F(1, 2), 1), (1, 0)])


def doubling() -> PwaMap:
    """x -> 2x mod 1 with a jump at 1/2."""
    return PwaMap.from_triples([(0, None, 0), (F(1, 2), 1, 0), (1, 1, None)])


def golden() -> PwaMap:
    """Two increasing-then-decreasing pieces with Fibonacci lap growth."""
    return PwaMap.from_triples(
        [(0, None, F(1, 2)), (F(1, 2), 1, 1), (1, 0, None)]
    )


def skew_tent(peak=F(5, 12)) -> PwaMap:
    """Tent with the turning point moved to `peak` (full height)."""
    return PwaMap.from_pairs([(0, 0), (F(peak), 1), (1, 0)])


def tent_slope(s) -> PwaMap:
    """Tent of slope s <= 2: peak value s/2 at x = 1/2."""
    s = F(s)
    return PwaMap.from_pairs([(0, 0), (F(1, 2), s / 2), (1, 0)])


def trapezoid() -> PwaMap:
    """Plateau at full height over [2/5, 3/5]; entropy log 2.

    Markov with a constant middle cell, so the Perron vector has a zero
    entry and the factor map collapses the plateau and its preimages.
    """
    return PwaMap.from_pairs([(0, 0), (F(2, 5), 1), (F(3, 5), 1), (1, 0)])


def flat_trapezoid() -> PwaMap:
    """Plateau [2/5, 3/5] at the map's maximum value 2/5.

    The plateau's level set has no preimages, so the depth-d coding
    quotient is already complete: the factor map is strictly piecewise
    monotone with the plateau as the only collapse interval.
    """
    return PwaMap.from_pairs(
        [(0, 0), (F(2, 5), F(2, 5)), (F(3, 5), F(2, 5)), (1, 0)]
    )


def low_trapezoid() -> PwaMap:
    """Plateau at height 4/5 over [2/5, 3/5]; lap growth is linear."""
    return PwaMap.from_pairs([(0, 0), (F(2, 5), F(4, 5)), (F(3, 5), F(4, 5)), (1, 0)])


def identity_map() -> PwaMap:
    return PwaMap.from_pairs([(0, 0), (1, 1)])


def core_tent32() -> PwaMap:
    """Slope-3/2 tent restricted to its core and rescaled to [0,1].

    Exact constant slope 3/2, transitive, not Markov (the turning orbit
    never closes).
    """
    return PwaMap.from_pairs([(0, F(1, 2)), (F(1, 3), 1), (1, 0)])


def tent75() -> PwaMap:
    """Tent of slope 7/5; non-Markov within any small closure budget."""
    return tent_slope(F(7, 5))


def bimodal_nonmarkov() -> PwaMap:
    """Three strictly monotone laps whose breakpoint orbits never close."""
    return PwaMap.from_pairs(
        [(0, F(1, 5)), (F(1, 3), F(9, 10)), (F(2, 3), F(1, 10)), (1, F(4, 5))]
    )


def golden_normal_form(digits: int = 40) -> PwaMap:
    """Rational rendering of the constant-slope form of the golden map.

    Node positions involve sqrt(5); they are rounded to `digits` decimal
    digits, so the piece slopes agree with the golden ratio to the same
    resolution.
    """
    from .numeric import mp_context, rationalize

    ctx = mp_context()
    v_a = (3 - ctx.sqrt(5)) / 2
    p = rationalize(v_a, digits)
    return PwaMap.from_pairs([(0, p), (p, 1), (1, 0)])


# -- graph fixtures (text format; see graphmap.parse_graph) -----------------

CIRCLE_DOUBLING = """\
graph
vertex v
edge e v v
action
path e e+ e+
nodes e 2
0 - 0
1 2 -
"""

TWO_EDGE_WRAP = """\
graph
vertex v1
vertex v2
edge e1 v1 v2
edge e2 v2 v1
action
path e1 e1+ e2+
nodes e1 2
0 - 0
1 2 -
path e2 e1+ e2+
nodes e2 2
0 - 0
1 2 -
"""

COLLAPSING_CIRCLE = """\
graph
vertex v1
vertex v2
edge e1 v1 v2
edge e2 v2 v1
action
path e1 e1+ e2+ e1+
nodes e1 2
0 - 0
1 3 -
path e2 e2+
nodes e2 2
0 - 0
1 1 -
"""

INTERVAL_TENT = """\
graph
vertex v1
vertex v2
edge e v1 v2
action
path e e+ e-
nodes e 2
0 - 0
1 2 -
"""
