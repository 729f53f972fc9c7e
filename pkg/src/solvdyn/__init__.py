"""Exact algebra and numerical dynamics on suspension solvmanifolds.

The package makes the algebraic side (fundamental-group automorphisms,
their affine models, finite-quotient classification) exact, certifies
partial hyperbolicity for linear and sampled systems, and provides the
numerical leaf-conjugacy pipeline (graph transforms, Fuller averaging,
section return maps, semiconjugacies) for perturbed suspension models.
"""

from .certify import (
    ObstructionVerdict, PHCertificate, RateBounds, SampledCocycle,
    certify_linear_t3, certify_model_sol, cone_certify, cs_torus_obstruction,
)
from .conjugacy import (
    CenterSystem, SectionMap, build_section_map, fuller_pc, height_progress,
    semiconjugacy_to_linear,
)
from .diagnostics import expansivity_scan, gps_check, strong_curve
from .errors import (
    ConeNotInvariantError, HomologyMismatchError, LeafFollowingError,
    NoContractionError, NonHyperbolicError, NotFoundError, SingularMatrixError,
    SolvdynError, ValidationError,
)
from .exact import (
    EigenFrame, commutant_generator, decompose, det_i_minus, eigen_frame, htop,
    is_hyperbolic, matrix_order_mod, smith_normal_form, solve_rational,
)
from .invariant import FoliationChart, GraphSection, graph_transform
from .perturbed import (
    LyapunovResult, PerturbedMap, TrigPerturbation, evaluate_map,
    lyapunov_exponents, sampled_cocycle_from_map,
)
from .pi1 import (
    AffineModel, AutomorphismData, FundamentalGroup, GroupElement, aut_apply,
    build_model, foliation_action, normalize_iterate, validate_automorphism,
)
from .quotients import (
    AffineTorusMap, HeisenbergElement, QuotientVerdict, classify_nil_double_cover,
    classify_t3_quotient, has_fixed_point, heis_example_map, heis_mul,
    in_lattice, induced_h1_block, lefschetz, tau_k,
)
from .solgeo import CoverPoint, ModelLeaf, SolFrame, flow, height

__version__ = "0.1.0"
SCHEMA = "solvdyn/1"
