"""Cross-module invariants from the design contracts."""

import math
import random
from fractions import Fraction as F

import pytest

from slopeforge import fixtures, numeric
from slopeforge.approximation import normalize, verify_semiconjugacy
from slopeforge.entropy import entropy_lapcount
from slopeforge.markov import markov_closure, perron, refine
from slopeforge.pwmap import (
    INCREASING,
    DECREASING,
    PwaMap,
    iterate,
    lap_counts,
    laps,
    parse_pwa,
    serialize_pwa,
    sup_dist,
)
from slopeforge.semiconjugacy import build_constant_slope, build_psi

MARKOV_FIXTURES = [fixtures.tent, fixtures.golden,
                   lambda: fixtures.skew_tent(F(5, 12)),
                   fixtures.trapezoid, fixtures.doubling]


def random_pwa(rng, max_nodes=6):
    """Random piecewise-affine self-map of [0,1], jumps allowed."""
    k = rng.randint(2, max_nodes)
    xs = sorted(rng.sample([F(i, 64) for i in range(1, 64)], k - 2))
    xs = [F(0)] + xs + [F(1)]
    triples = []
    for i, x in enumerate(xs):
        yl = None if i == 0 else F(rng.randint(0, 32), 32)
        yr = None if i == len(xs) - 1 else F(rng.randint(0, 32), 32)
        if 0 < i < len(xs) - 1 and rng.random() < 0.6:
            yr = yl  # mostly continuous nodes
        triples.append((x, yl, yr))
    return PwaMap.from_triples(triples)


def test_serializer_round_trip_random():
    rng = random.Random(99)
    for _ in range(60):
        f = random_pwa(rng)
        assert parse_pwa(serialize_pwa(f)) == f


def test_submultiplicativity_random():
    rng = random.Random(7)
    for _ in range(15):
        f = random_pwa(rng, max_nodes=4)
        cs = lap_counts(f, 6)
        c = {i + 1: v for i, v in enumerate(cs)}
        for m in range(1, 4):
            for n in range(1, 3):
                assert c[m + n] <= c[m] * c[n]


def test_refinement_cell_growth_tracks_beta():
    # (1/n) log |A_n| (non-singleton cells) approaches log beta from above
    for make in (fixtures.tent, fixtures.golden,
                 lambda: fixtures.skew_tent(F(5, 12))):
        s = markov_closure(make(), 100)
        target = math.log(float(s.beta))
        gaps = []
        for n in (6, 10, 14):
            count = refine(s, n).nonsingleton_count
            gaps.append(math.log(count) / n - target)
        assert all(g >= -1e-9 for g in gaps)
        assert gaps[-1] < 0.05
        assert gaps[0] >= gaps[-1] - 1e-12


def test_constant_slope_outputs_have_matching_entropy():
    for make in (fixtures.golden, lambda: fixtures.skew_tent(F(5, 12))):
        s = markov_closure(make(), 100)
        psi = build_psi(s, 1e-6)
        g = build_constant_slope(s, psi).map
        rep = entropy_lapcount(g, depth=12)
        assert abs(rep.trend - math.log(float(s.beta))) < 0.05


def test_iteration_scaling_estimates():
    for make in (fixtures.tent, fixtures.golden):
        f = make()
        base = entropy_lapcount(f, depth=12)
        for k in (2, 3):
            fk = iterate(f, k)
            repk = entropy_lapcount(fk, depth=12 // k)
            est_k = repk.lap_estimates[-1]
            est_1 = base.lap_estimates[(12 // k) * k - 1]
            assert abs(est_k - k * est_1) < 1e-12  # c_n(f^k) = c_{nk}(f)
            assert abs(est_k / k - math.log(float(markov_closure(f, 100).beta))) < 0.12


def test_psi_endpoint_normalization_and_residual_bound():
    for make in MARKOV_FIXTURES:
        s = markov_closure(make(), 200)
        if float(s.beta) <= 1:
            continue
        psi = build_psi(s, 1e-6)
        assert float(psi.ys[0]) == 0.0
        assert float(psi.ys[-1]) == 1.0
        # table increments stay within the refinement modulus
        assert psi.max_table_gap() <= float(s.beta) ** (-psi.table_depth) + 1e-12
        g = build_constant_slope(s, psi)
        rep = verify_semiconjugacy(s.map, g.map, psi, grid_points=2000)
        assert rep.residual <= float(s.beta) * psi.error_bound + 1e-9


def test_direction_preservation():
    for make in MARKOV_FIXTURES:
        s = markov_closure(make(), 200)
        if float(s.beta) <= 1:
            continue
        psi = build_psi(s, 1e-6)
        g = build_constant_slope(s, psi).map
        for lap in laps(s.map):
            zlo = float(psi.eval(lap.lo))
            zhi = float(psi.eval(lap.hi))
            if zhi - zlo <= 1e-9:
                continue  # collapsed lap
            glo = float(g.eval(numeric.rationalize(zlo + 1e-12, 15), "right"))
            ghi = float(g.eval(numeric.rationalize(zhi - 1e-12, 15), "left"))
            if lap.direction == INCREASING:
                assert ghi > glo
            elif lap.direction == DECREASING:
                assert ghi < glo


def test_slope_uniformity_on_fixtures():
    for make in MARKOV_FIXTURES:
        s = markov_closure(make(), 200)
        if float(s.beta) <= 1:
            continue
        psi = build_psi(s, 1e-6)
        cs = build_constant_slope(s, psi)
        assert cs.max_slope_deviation < 1e-9


def test_trapezoid_normal_form_is_tent():
    # collapsed cells contribute no nodes: the plateau family maps to
    # a genuine tent of slope 2
    s = markov_closure(fixtures.trapezoid(), 100)
    psi = build_psi(s, 1e-6)
    g = build_constant_slope(s, psi).map
    assert len(g.nodes) == 3
    assert float(sup_dist(g, fixtures.tent())) < 1e-30


def test_normalize_residual_contract():
    tr = normalize(fixtures.tent_slope(F(3, 2)), target=1e-2,
                   schedule=[2, 4, 8, 16, 32, 64], grid_points=512)
    assert tr.converged
    slack = tr.final_psi.error_bound + 1e-6
    assert tr.residual.residual <= 1e-2 * max(tr.gamma, 1.0) + slack


def test_equicontinuity_surrogate():
    target = 1e-2
    tr = normalize(fixtures.tent_slope(F(3, 2)), target=target,
                   schedule=[2, 4, 8, 16, 32, 64], grid_points=512)
    alpha = min(b for b in tr.betas if b > 1)
    k = math.ceil(math.log(2 / target) / math.log(alpha))
    grid = [F(i, 512) for i in range(513)]
    moduli = []
    for psi in tr.psis:
        vals = [float(psi.eval(x, fast=True)) for x in grid]
        moduli.append(max(abs(b - a) for a, b in zip(vals, vals[1:])))
    bound = 2 * alpha ** (-k) + 2 * tr.psis[-1].max_table_gap()
    assert moduli[-1] <= bound + 0.05
    assert moduli[-1] <= moduli[0] + 1e-12


def test_conjugacy_flag_soundness():
    from slopeforge.normalform import normal_form
    nf = normal_form(fixtures.skew_tent(F(5, 12)))
    assert nf.conjugacy
    assert nf.residual.residual < 1e-6
    assert all(nf.psi.ys[i + 1] > nf.psi.ys[i]
               for i in range(len(nf.psi.ys) - 1))


def test_precision_env_override(monkeypatch):
    monkeypatch.setenv("SLOPEFORGE_PRECISION", "192")
    assert numeric.precision_bits() == 192
    ctx = numeric.mp_context()
    assert ctx.prec == 192
    pr = perron([[0, 1], [1, 1]])
    import mpmath
    hi = mpmath.mp.clone()
    hi.prec = 192
    phi = (1 + hi.sqrt(5)) / 2
    assert abs(float(pr.beta - phi)) < 1e-40
    monkeypatch.setenv("SLOPEFORGE_PRECISION", "abc")
    with pytest.raises(ValueError):
        numeric.precision_bits()


def test_non_unit_domain_pipeline():
    # the whole pipeline is domain-agnostic; the normal form lands on [0,1]
    f = PwaMap.from_pairs([(0, 0), (F(1, 2), 2), (2, 0)])
    tr = normalize(f, target=1e-6)
    assert tr.markov_exact
    assert abs(tr.gamma - 2.0) < 1e-12
    assert tr.residual.residual < 1e-6
    from slopeforge.normalform import normal_form
    nf = normal_form(f)
    assert nf.conjugacy
    assert abs(float(nf.psi_eval(F(1, 2))) - 0.5) < 1e-12
    g = nf.g.map
    assert g.domain == (0, 1)
