from fractions import Fraction as F

import pytest

from slopeforge import fixtures
from slopeforge.coding import itinerary, psm_reduce
from slopeforge.entropy import entropy_lapcount
from slopeforge.errors import PreconditionError


def test_itinerary_tent_interior():
    it = itinerary(fixtures.tent(), F(1, 3), 4)
    assert it.word == (0, 1, 1, 1)
    assert it.ambiguous_at == ()


def test_itinerary_tent_turning_point():
    it = itinerary(fixtures.tent(), F(1, 2), 2)
    assert it.ambiguous_at == (0,)
    assert it.word[0] == 0  # left-lap convention


def test_itinerary_golden_endpoint_orbit():
    it = itinerary(fixtures.golden(), 0, 3)
    # orbit 0 -> 1/2 -> 1 under the left-limit continuation
    assert it.word == (0, 0, 1)
    assert it.ambiguous_at == (1,)


def test_itinerary_doubling_jump_point():
    it = itinerary(fixtures.doubling(), F(1, 2), 3)
    assert 0 in it.ambiguous_at
    # left continuation: f(1/2-) = 1, then f(1) = 1
    assert it.word == (0, 1, 1)


def test_reduce_tent_trivial():
    q = psm_reduce(fixtures.tent(), 8)
    assert q.collapse_intervals == ()
    assert q.psi0.nodes == fixtures.identity_map().nodes
    assert q.fhat == fixtures.tent()


def test_reduce_identity_rejected():
    with pytest.raises(PreconditionError):
        psm_reduce(fixtures.identity_map(), 8)


def test_reduce_trapezoid_collapse():
    q = psm_reduce(fixtures.trapezoid(), 8)
    assert (F(2, 5), F(3, 5)) in q.collapse_intervals
    assert (F(4, 25), F(6, 25)) in q.collapse_intervals
    assert (F(19, 25), F(21, 25)) in q.collapse_intervals
    # the plateau value has preimages at every depth, so the horizon
    # layer stays uncollapsed: the factor carries sub-resolution flats
    assert q.leak_plateau_count > 0


def test_reduce_flat_trapezoid_is_complete():
    q = psm_reduce(fixtures.flat_trapezoid(), 8)
    assert q.collapse_intervals == ((F(2, 5), F(3, 5)),)
    assert q.leak_plateau_count == 0
    assert not q.fhat.has_plateau


def test_reduce_trapezoid_factor_identity():
    q = psm_reduce(fixtures.trapezoid(), 8)
    f = fixtures.trapezoid()
    for k in range(0, 4097, 7):
        x = F(k, 4096)
        lhs = q.psi0.eval(f.eval(x, "right" if x < 1 else "left"))
        z = q.psi0.eval(x)
        rhs = q.fhat.eval(z, "right" if z < 1 else "left")
        assert abs(float(lhs - rhs)) <= 1e-9


def test_reduce_flat_trapezoid_entropy_preserved():
    f = fixtures.flat_trapezoid()
    q = psm_reduce(f, 8)
    ef = entropy_lapcount(f, depth=10)
    eh = entropy_lapcount(q.fhat, depth=10)
    assert abs(ef.lap_estimates[-1] - eh.lap_estimates[-1]) < 0.05


def test_reduce_collapse_classes_persist_with_depth():
    # certified classes stay collapsed as the depth grows; newly
    # visible preimage classes may join the family
    f = fixtures.trapezoid()
    prev = psm_reduce(f, 4)
    for d in (5, 6, 7, 8):
        cur = psm_reduce(f, d)
        for lo, hi in prev.collapse_intervals:
            assert any(clo <= lo and hi <= chi
                       for clo, chi in cur.collapse_intervals)
        prev = cur
    # on a complete quotient the family is stable in both directions
    a = psm_reduce(fixtures.flat_trapezoid(), 4).collapse_intervals
    b = psm_reduce(fixtures.flat_trapezoid(), 8).collapse_intervals
    assert a == b


def test_reduce_conventions_agree():
    for d in (4, 6, 8):
        left = psm_reduce(fixtures.trapezoid(), d, prefer_left=True)
        right = psm_reduce(fixtures.trapezoid(), d, prefer_left=False)
        assert left.collapse_intervals == right.collapse_intervals
        assert left.fhat == right.fhat


def test_reduce_low_trapezoid_runs():
    # true entropy is zero but the finite-depth estimate is positive
    q = psm_reduce(fixtures.low_trapezoid(), 6)
    assert (F(2, 5), F(3, 5)) in q.collapse_intervals


def test_reduce_tsv_export():
    q = psm_reduce(fixtures.trapezoid(), 6)
    text = q.to_tsv()
    assert text.splitlines()[0] == "lo\thi"
    assert "2/5\t3/5" in text
