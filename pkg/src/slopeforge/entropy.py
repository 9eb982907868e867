"""Topological entropy estimates from lap counts and spectral data.

The lap-count sequence gives (1/n) log c_n, decreasing to the entropy
by submultiplicativity; the Fekete minimum is the best upper bound the
sequence proves.  The headline estimate, and the value used for the
agreement check against the spectral side, is the trend log(c_N /
c_{N-1}): for maps with c_n ~ C beta^n it converges geometrically
while (1/n) log c_n carries a log(C)/n bias for a long time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import BudgetExceeded
from .markov import MarkovStructure, markov_closure
from .numeric import format_decimal, generic_log
from .pwmap import DEFAULT_NODE_BUDGET, PwaMap, compose, laps

DEFAULT_DEPTH = 12
AGREEMENT_GAP = 0.02


@dataclass(frozen=True)
class EntropyReport:
    lap_counts: tuple            # c_1 .. c_N (exact integers)
    lap_estimates: tuple         # (1/n) log c_n
    fekete: float                # min of lap_estimates (proved upper bound)
    trend: float                 # log(c_N / c_{N-1}); the headline h_est
    spectral: Optional[float] = None
    agreed: Optional[bool] = None
    gap: Optional[float] = None
    positive: bool = False
    truncated: bool = False
    note: Optional[str] = None

    @property
    def h_est(self) -> float:
        return self.trend

    def to_tsv(self, sig: int = 15) -> str:
        lines = ["n\tc_n\testimate"]
        for i, (c, est) in enumerate(zip(self.lap_counts, self.lap_estimates)):
            lines.append(f"{i + 1}\t{c}\t{format_decimal(est, sig)}")
        lines.append(f"trend\t\t{format_decimal(self.trend, sig)}")
        lines.append(f"fekete\t\t{format_decimal(self.fekete, sig)}")
        if self.spectral is not None:
            lines.append(f"spectral\t\t{format_decimal(self.spectral, sig)}")
            lines.append(f"agreed\t\t{'true' if self.agreed else 'false'}")
        if self.note:
            lines.append(f"note\t\t{self.note}")
        return "\n".join(lines) + "\n"


def entropy_lapcount(f: PwaMap, depth: int = DEFAULT_DEPTH,
                     max_nodes: int = DEFAULT_NODE_BUDGET) -> EntropyReport:
    """Exact c_1..c_depth and the derived estimates.

    On node-budget exhaustion the report is truncated and flagged
    rather than failing.
    """
    counts = []
    truncated = False
    g = f
    for n in range(1, depth + 1):
        try:
            if n > 1:
                g = compose(f, g, max_nodes=max_nodes)
        except BudgetExceeded:
            truncated = True
            break
        counts.append(len(laps(g)))
    if not counts:
        raise BudgetExceeded("node budget too small for a single iterate")
    estimates = tuple(math.log(c) / (i + 1) for i, c in enumerate(counts))
    if len(counts) >= 2:
        trend = math.log(counts[-1] / counts[-2])
    else:
        trend = estimates[0]
    positive = counts[-1] >= 2
    note = None if positive else "no positive entropy; normalization undefined"
    return EntropyReport(
        lap_counts=tuple(counts),
        lap_estimates=estimates,
        fekete=min(estimates),
        trend=trend,
        positive=positive,
        truncated=truncated,
        note=note,
    )


def entropy_spectral(s: MarkovStructure) -> float:
    """log of the spectral growth rate from the validated structure."""
    return float(generic_log(s.beta))


def entropy(f: PwaMap, depth: int = DEFAULT_DEPTH,
            markov_points: int = 512,
            max_nodes: int = DEFAULT_NODE_BUDGET,
            agreement_gap: float = AGREEMENT_GAP) -> EntropyReport:
    """Lap-count report, with the spectral value when a Markov set closes."""
    report = entropy_lapcount(f, depth=depth, max_nodes=max_nodes)
    try:
        s = markov_closure(f, max_points=markov_points)
    except BudgetExceeded:
        return report
    spectral = entropy_spectral(s)
    gap = abs(report.trend - spectral)
    return EntropyReport(
        lap_counts=report.lap_counts,
        lap_estimates=report.lap_estimates,
        fekete=report.fekete,
        trend=report.trend,
        spectral=spectral,
        agreed=gap < agreement_gap,
        gap=gap,
        positive=report.positive,
        truncated=report.truncated,
        note=report.note,
    )


def is_entropy_positive(f: PwaMap, depth: int = DEFAULT_DEPTH,
                        max_nodes: int = DEFAULT_NODE_BUDGET) -> bool:
    """Positive lap-count estimate: some iterate has more than one lap."""
    return entropy_lapcount(f, depth=depth, max_nodes=max_nodes).positive
