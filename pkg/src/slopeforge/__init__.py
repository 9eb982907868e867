"""Constant-slope normal forms for piecewise monotone interval and graph maps.

The package computes topological entropy of exact piecewise-affine
interval maps (lap counting and spectral data), builds the increasing
factor map onto a constant-slope model via Markov structures and their
refinements, approximates non-Markov maps within any 1/n, reduces maps
with plateaus to strictly monotone factors, and flattens piecewise
monotone graph maps into the same pipeline.
"""

from .approximation import (
    ApproxConfig,
    PipelineTrace,
    ResidualReport,
    check_monotone_shadowing,
    markov_approx,
    normalize,
    verify_semiconjugacy,
)
from .coding import Itinerary, QuotientResult, itinerary, psm_reduce
from .entropy import EntropyReport, entropy, entropy_lapcount, entropy_spectral
from .errors import (
    BudgetExceeded,
    FormatError,
    NonConvergence,
    PreconditionError,
    SlopeforgeError,
    VerificationError,
)
from .graphmap import (
    FlatteningChart,
    GraphMapSpec,
    GraphNormalForm,
    GraphSpec,
    flatten,
    normalize_graph,
    parse_graph,
)
from .markov import (
    MarkovStructure,
    MixingReport,
    PerronResult,
    Refinement,
    is_markov,
    is_mixing_matrix,
    markov_closure,
    parse_matrix,
    perron,
    refine,
    serialize_matrix,
    structure_from_points,
    transition_matrix,
)
from .normalform import (
    GapCheck,
    NormalForm,
    check_gap_bound,
    normal_form,
    slope_gap_bound,
)
from .pwmap import (
    Lap,
    Node,
    PwaMap,
    compose,
    iterate,
    lap_count,
    lap_counts,
    laps,
    modality,
    parse_pwa,
    preimage_points,
    serialize_pwa,
    sup_dist,
)
from .semiconjugacy import (
    ConstantSlopeMap,
    PsiTable,
    build_constant_slope,
    build_psi,
    check_compatibility,
    check_scaling_identity,
    psi_from_tsv,
    psi_on_points,
    psi_to_tsv,
)

__version__ = "0.1.0"
