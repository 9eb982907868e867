"""Constant-slope normal forms for continuous transitive maps.

The entry point takes a continuous map of positive entropy and returns
its constant-slope form together with the conjugating factor map.  A
constant-slope input is its own normal form (uniqueness: a conjugacy
between constant-slope maps must be the identity), so such inputs take
a fast path with the identity factor.  Transitivity itself is not
decidable from finite data; the result carries evidence instead: a
primitive transition matrix in the Markov case, a dense-orbit sample
heuristic otherwise.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .approximation import (
    PipelineTrace,
    ResidualReport,
    verify_semiconjugacy,
    normalize,
)
from .coding import psm_reduce
from .entropy import entropy_lapcount
from .errors import PreconditionError
from .markov import is_mixing_matrix
from .pwmap import PwaMap, modality, sup_dist
from .semiconjugacy import ConstantSlopeMap, PsiTable

SLOPE_DETECT_REL_TOL = 1e-9
EVIDENCE_PRIMITIVE = "matrix_primitive"
EVIDENCE_ORBIT = "dense_orbit_sample"
EVIDENCE_UNKNOWN = "unknown"


@dataclass(frozen=True)
class NormalForm:
    psi: PsiTable                  # factor map of the strictly monotone stage
    psi0: Optional[PwaMap]         # pre-quotient when the input had plateaus
    g: ConstantSlopeMap
    conjugacy: bool
    transitivity_evidence: str
    modality_in: int
    modality_out: int
    residual: ResidualReport
    trace: PipelineTrace
    constant_slope_input: bool = False

    def psi_eval(self, x):
        """The full factor map (including the plateau quotient stage)."""
        x = Fraction(x)
        if self.psi0 is not None:
            x = self.psi0.eval(x)
        return self.psi.eval(x)


def _uniform_slope(f: PwaMap, rel_tol: float):
    """The common |slope| when all pieces agree within rel_tol, else None."""
    mags = [abs(seg.slope) for seg in f.segments if seg.slope != 0]
    if not mags or f.has_plateau:
        return None
    top, bot = max(mags), min(mags)
    if float(top - bot) <= rel_tol * float(top):
        return top
    return None


def _identity_psi(f: PwaMap) -> PsiTable:
    """Affine rescale of the domain onto [0,1] as a detached exact table."""
    a, b = f.domain
    width = b - a
    xs = tuple(n.x for n in f.nodes)
    ys = tuple(float((x - a) / width) for x in xs)
    return PsiTable(
        depth=0,
        table_depth=0,
        xs=xs,
        ys=ys,
        beta=None,
        error_bound=0.0,
        collapse_intervals=(),
        structure=None,
    )


def _dense_orbit_evidence(f: PwaMap, samples: int = 4096,
                          bins: int = 64) -> str:
    a, b = f.domain
    width = float(b - a)
    x = float(a) + width * 0.6180339887498949
    xs = [float(n.x) for n in f.nodes]
    yl = [None if n.y_left is None else float(n.y_left) for n in f.nodes]
    yr = [None if n.y_right is None else float(n.y_right) for n in f.nodes]
    hit = [False] * bins
    for _ in range(samples):
        k = min(int((x - float(a)) / width * bins), bins - 1)
        hit[k] = True
        i = bisect.bisect_right(xs, x) - 1
        if i >= len(xs) - 1:
            i = len(xs) - 2
        if xs[i] == x:
            y = yr[i] if yr[i] is not None else yl[i]
        else:
            y = yr[i] + (yl[i + 1] - yr[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])
        x = min(max(y, float(a)), float(b))
    return EVIDENCE_ORBIT if all(hit) else EVIDENCE_UNKNOWN


def normal_form(f: PwaMap, target: float = 1e-6,
                schedule: Optional[Sequence[int]] = None,
                reduce_depth: int = 16,
                slope_rel_tol: float = SLOPE_DETECT_REL_TOL,
                grid_points: int = 4096,
                force_pipeline: bool = False) -> NormalForm:
    """Constant-slope form of a continuous map of positive entropy."""
    if not f.is_continuous:
        raise PreconditionError(
            "the normal-form operator is defined on continuous maps"
        )
    ent = entropy_lapcount(f, depth=10, max_nodes=4096)
    if not ent.positive:
        raise PreconditionError("entropy estimate not positive")

    slope = None if force_pipeline else _uniform_slope(f, slope_rel_tol)
    if slope is not None:
        psi = _identity_psi(f)
        g = ConstantSlopeMap(f, float(slope), provenance="constant-slope-input")
        residual = verify_semiconjugacy(f, f, psi, grid_points=grid_points)
        evidence = _markov_or_orbit_evidence(f)
        trace = _trivial_trace(psi, g, residual, ent)
        return NormalForm(
            psi=psi,
            psi0=None,
            g=g,
            conjugacy=True,
            transitivity_evidence=evidence,
            modality_in=modality(f),
            modality_out=modality(f),
            residual=residual,
            trace=trace,
            constant_slope_input=True,
        )

    psi0 = None
    work = f
    if f.has_plateau:
        q = psm_reduce(f, depth=reduce_depth)
        psi0 = q.psi0
        work = q.fhat
    trace = normalize(work, target=target, schedule=schedule,
                      grid_points=grid_points)
    psi = trace.final_psi
    g = trace.final_g
    strictly_increasing = all(
        psi.ys[i + 1] > psi.ys[i] for i in range(len(psi.ys) - 1)
    )
    conjugacy = (
        psi0 is None
        and strictly_increasing
        and not psi.collapse_intervals
        and trace.converged
    )
    if trace.markov_exact:
        mix = is_mixing_matrix(list(trace.final_structure.covers))
        evidence = EVIDENCE_PRIMITIVE if mix.primitive else _dense_orbit_evidence(f)
    else:
        evidence = _dense_orbit_evidence(f)
    return NormalForm(
        psi=psi,
        psi0=psi0,
        g=g,
        conjugacy=conjugacy,
        transitivity_evidence=evidence,
        modality_in=modality(f),
        modality_out=modality(g.map),
        residual=trace.residual,
        trace=trace,
    )


def _markov_or_orbit_evidence(f: PwaMap) -> str:
    from .errors import BudgetExceeded, NonConvergence
    from .markov import markov_closure

    try:
        s = markov_closure(f, max_points=512)
    except (BudgetExceeded, NonConvergence):
        return _dense_orbit_evidence(f)
    mix = is_mixing_matrix(list(s.covers))
    if mix.primitive:
        return EVIDENCE_PRIMITIVE
    return _dense_orbit_evidence(f)


def _trivial_trace(psi, g, residual, ent) -> PipelineTrace:
    import math

    gamma = g.slope
    return PipelineTrace(
        indices=(0,),
        betas=(gamma,),
        gap_rows=(None,),
        psis=(psi,),
        final_psi=psi,
        final_g=g,
        final_structure=None,
        gamma=gamma,
        residual=residual,
        entropy_trend=ent.trend,
        entropy_gap=abs(math.log(gamma) - ent.trend) if gamma > 0 else 0.0,
        converged=True,
        markov_exact=False,
    )


# ---------------------------------------------------------------------------
# the slope-gap lower bound
# ---------------------------------------------------------------------------

def slope_gap_bound(alpha, beta, modality_n: int):
    """(alpha - beta) / (2 n + 2) for constant slopes alpha > beta."""
    if modality_n < 1:
        raise PreconditionError("modality must be >= 1")
    if not alpha > beta:
        raise PreconditionError("the bound needs alpha > beta strictly")
    return (alpha - beta) / (2 * modality_n + 2)


@dataclass(frozen=True)
class GapCheck:
    holds: bool
    distance: Fraction
    bound: Fraction
    alpha: Fraction
    beta: Fraction
    modality: int


def check_gap_bound(f: PwaMap, g: PwaMap) -> GapCheck:
    """Verify sup-dist(f, g) >= (alpha - beta)/(2n + 2) exactly.

    Both maps must be continuous with exactly uniform |slope|; n is the
    modality of the steeper map f.
    """
    if f.domain != g.domain:
        raise PreconditionError("common domain required")
    for m, name in ((f, "f"), (g, "g")):
        if not m.is_continuous:
            raise PreconditionError(f"{name} is not continuous")
    sf = {abs(seg.slope) for seg in f.segments}
    sg = {abs(seg.slope) for seg in g.segments}
    if len(sf) != 1 or len(sg) != 1:
        raise PreconditionError("maps must have exactly constant slope")
    alpha, beta = sf.pop(), sg.pop()
    if not alpha > beta:
        raise PreconditionError("the bound needs alpha > beta strictly")
    n = modality(f)
    if n < 1:
        raise PreconditionError("modality must be >= 1")
    bound = slope_gap_bound(alpha, beta, n)
    dist = sup_dist(f, g)
    return GapCheck(dist >= bound, dist, bound, alpha, beta, n)
