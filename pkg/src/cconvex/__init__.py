"""Numerical toolkit for cost-convexity analysis.

Implements c-exponential maps and c-segments, the curvature tensor of a cost
function with its sign certification, synthetic quasi-convexity checks with
re-checkable violation certificates, c-transforms and c-convex envelopes,
c-chords and alternative c-convexity, and a constructive pipeline that turns
a quasi-convexity violation into a function that is alternative c-convex but
not c-convex.
"""

__version__ = "0.1.0"

from .chords import (ChordSolver, LiftedPoint, chord_eval, connect,
                     is_alternative_c_convex, segment_identity_check)
from .convexity import (CAffine, c_affine_eval, c_envelope, c_subdifferential,
                        c_transform, reverse_transform, section_analysis)
from .costs import (BilinearCost, ConstantEstimates, CostModel, LogCost, PowerCost,
                    QuadraticCost, SqrtCost, estimate_constants, eval_bundle,
                    make_cost, mtw_derivative_bundle)
from .counterexample import (CounterexampleParams, StructuredViolation,
                             build_phi_epsilon, find_violation, refine_violation,
                             run_pipeline, verify_counterexample)
from .domains import Ball, Box, DomainPair
from .geometry import (Cone, c_exp, c_exp_batch, c_segment, check_domain_c_convexity,
                       cone_radius, cone_toolkit, dual_coordinates, mu_theta)
from .gridfn import GridFunction
from .mtw import (MTWReport, ViolationCertificate, certify_mtw, check_loeper,
                  chord_equivalence_probe, estimate_qqconv, mtw_value)

__all__ = [
    "Ball", "BilinearCost", "Box", "CAffine", "ChordSolver", "Cone",
    "ConstantEstimates", "CostModel", "CounterexampleParams", "DomainPair",
    "GridFunction", "LiftedPoint", "LogCost", "MTWReport", "PowerCost",
    "QuadraticCost", "SqrtCost", "StructuredViolation", "ViolationCertificate",
    "build_phi_epsilon", "c_affine_eval", "c_envelope", "c_exp", "c_exp_batch",
    "c_segment", "c_subdifferential", "c_transform", "certify_mtw",
    "check_domain_c_convexity", "check_loeper", "chord_equivalence_probe",
    "chord_eval", "cone_radius", "cone_toolkit", "connect", "dual_coordinates",
    "estimate_constants", "estimate_qqconv", "eval_bundle", "find_violation",
    "is_alternative_c_convex", "make_cost", "mtw_derivative_bundle", "mtw_value",
    "mu_theta", "refine_violation", "reverse_transform", "run_pipeline",
    "section_analysis", "segment_identity_check", "verify_counterexample",
]
