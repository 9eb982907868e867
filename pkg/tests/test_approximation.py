from fractions import Fraction as F

import pytest

from slopeforge import fixtures
from slopeforge.approximation import (
    check_monotone_shadowing,
    markov_approx,
    normalize,
    verify_semiconjugacy,
)
from slopeforge.errors import PreconditionError
from slopeforge.markov import is_markov
from slopeforge.pwmap import PwaMap, sup_dist

PHI = (1 + 5**0.5) / 2
V_A = (3 - 5**0.5) / 2


def test_approx_tent_is_fixed():
    g, cfg = markov_approx(fixtures.tent(), 8)
    assert sup_dist(g, fixtures.tent()) == 0
    assert is_markov(g, cfg.points)


def test_approx_golden_is_fixed():
    g, cfg = markov_approx(fixtures.golden(), 6)
    assert sup_dist(g, fixtures.golden()) == 0


def test_approx_slope32_bound_and_markov():
    f = fixtures.tent_slope(F(3, 2))
    for n in (1, 2, 4, 8):
        g, cfg = markov_approx(f, n)
        assert cfg.distance < F(1, n)
        assert is_markov(g, cfg.points)


def test_approx_rejects_plateau():
    with pytest.raises(PreconditionError):
        markov_approx(fixtures.trapezoid(), 4)


def test_monotone_shadowing_small():
    f = fixtures.tent_slope(F(3, 2))
    for n in (2, 4, 8):
        g, _ = markov_approx(f, n)
        for k in range(1, min(n, 3) + 1):
            assert check_monotone_shadowing(f, g, k)


def test_normalize_skew_tent_exact_step():
    tr = normalize(fixtures.skew_tent(F(5, 12)), target=1e-6)
    assert tr.markov_exact and tr.converged
    assert abs(tr.gamma - 2.0) < 1e-12
    assert sup_dist(tr.final_g.map, fixtures.tent()) == 0
    assert abs(float(tr.final_psi.eval(F(5, 12))) - 0.5) < 1e-12
    assert tr.residual.residual < 1e-6


def test_normalize_golden_exact_step():
    tr = normalize(fixtures.golden(), target=1e-6)
    assert tr.markov_exact
    g = tr.final_g.map
    assert abs(float(g.nodes[1].x) - V_A) < 1e-9
    assert abs(abs(float(g.segments[0].slope)) - PHI) < 1e-9
    assert tr.residual.residual < 1e-6


def test_normalize_identity_rejected():
    with pytest.raises(PreconditionError):
        normalize(fixtures.identity_map())


def test_normalize_slope32_schedule():
    tr = normalize(fixtures.tent_slope(F(3, 2)), target=1e-2,
                   schedule=[2, 4, 8, 16, 32, 64], grid_points=512)
    assert not tr.markov_exact
    assert tr.converged
    assert tr.cauchy_gaps[-1] < 1e-2
    assert abs(tr.gamma - 1.5) < 0.01
    assert tr.betas[-1] > 1
    # the constant-slope output really has uniform slopes
    assert tr.final_g.max_slope_deviation < 1e-6
    # entropy semicontinuity surrogate: the growth rates home in on the
    # lap-count trend along the schedule
    import math
    gaps_to_trend = [abs(math.log(b) - tr.entropy_trend) for b in tr.betas]
    assert gaps_to_trend[-1] < 0.05
    assert gaps_to_trend[-1] <= gaps_to_trend[0] + 1e-12


def test_normalize_non_converged_flag():
    tr = normalize(fixtures.tent_slope(F(3, 2)), target=1e-9,
                   schedule=[2, 4], grid_points=256)
    assert not tr.converged
    assert len(tr.indices) == 2


def test_verify_identity_psi():
    tr = normalize(fixtures.tent(), target=1e-6)
    rep = verify_semiconjugacy(fixtures.tent(), fixtures.tent(), tr.final_psi,
                               grid_points=1000)
    assert rep.residual < 1e-12
    assert rep.slope_histogram == ((2.0, 2),)


def test_verify_detects_perturbation():
    tr = normalize(fixtures.skew_tent(F(5, 12)), target=1e-6)
    bad = PwaMap.from_pairs([(0, 0), (F(1, 2), F(99, 100)), (1, 0)])
    rep = verify_semiconjugacy(fixtures.skew_tent(F(5, 12)), bad, tr.final_psi,
                               grid_points=1000)
    assert rep.residual >= 0.004


def test_trace_tsv_layout():
    tr = normalize(fixtures.tent_slope(F(3, 2)), target=1e-1,
                   schedule=[2, 4, 8], grid_points=256)
    text = tr.to_tsv()
    lines = text.strip().splitlines()
    assert lines[0] == "i\tbeta_i\tcauchy_gap\tresidual"
    assert len(lines) == len(tr.indices) + 1
