"""Exact asymptotics of regularized adversarial training for linear binary
classification, with finite-dimensional Monte Carlo validation and
distribution-agnostic Rademacher complexity bounds."""

__version__ = "0.1.0"

from .config import (INF, ChannelSpec, ConjugateOverlaps, ErrorReport,
                     NormOrder, Overlaps, PriorSpec, ProblemConfig,
                     SpectralMeasure, dual_exponent, identity_measure,
                     lp_norm, validate_config)
from .channel import f_g, hat_update, margin_shift, z0
from .metrics import (e_bnd, e_gen, error_report, rad_bound_commuting,
                      rad_bound_commuting_witness, rad_bound_generic,
                      rad_bound_l2_maha, rad_bound_lp, teacher_margin)
from .prior_lp import f_w, nonhat_update_lp, zw
from .prior_maha import nonhat_update_maha, swfm_measure
from .scalar import moreau, moreau_grad, prox
from .scaling import fit_scaling_exponents, leading_order_errors
from .simulator import (compare_theory_simulation, empirical_overlaps,
                        finite_eps, generate_dataset, solve_rerm)
from .solver import (SolverSettings, phase_diagram, solve_fixed_point,
                     sweep_regularization_order, tune_lambda)

__all__ = [
    "INF", "ChannelSpec", "ConjugateOverlaps", "ErrorReport", "NormOrder",
    "Overlaps", "PriorSpec", "ProblemConfig", "SpectralMeasure",
    "dual_exponent", "identity_measure", "lp_norm", "validate_config",
    "f_g", "hat_update", "margin_shift", "z0",
    "e_bnd", "e_gen", "error_report", "rad_bound_commuting",
    "rad_bound_commuting_witness", "rad_bound_generic", "rad_bound_l2_maha",
    "rad_bound_lp", "teacher_margin",
    "f_w", "nonhat_update_lp", "zw", "nonhat_update_maha", "swfm_measure",
    "moreau", "moreau_grad", "prox",
    "fit_scaling_exponents", "leading_order_errors",
    "compare_theory_simulation", "empirical_overlaps", "finite_eps",
    "generate_dataset", "solve_rerm",
    "SolverSettings", "phase_diagram", "solve_fixed_point",
    "sweep_regularization_order", "tune_lambda",
]
