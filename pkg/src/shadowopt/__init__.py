"""Shadowing diagnostics for gradient descent and heavy-ball ODE models.

The package builds pseudo-orbits from ODE flows, measures their
one-step defects against the discrete optimizer maps, evaluates the
closed-form tracking bounds per curvature regime, and constructs the
shadow orbits that certify uniform closeness. A small CLI reproduces
the reference experiments at desk scale and writes CSV reports plus
figures.
"""

from .dynamics import (
    MapParams,
    Orbit,
    PhasePoint,
    choose_substeps,
    flow_quadratic_gd,
    flow_quadratic_hb,
    gd_map,
    gd_step,
    gd_vector_field,
    generate_orbit,
    hb_map,
    hb_step,
    hb_vector_field,
    rk4_flow,
    rk4_map,
    sample_flow_quadratic_gd,
    sample_flow_quadratic_hb,
    sgd_step,
)
from .landscape import (
    Dataset,
    Objective,
    QuadraticSpec,
    add_perturbation,
    generate_synthetic,
    load_dataset_csv,
    make_hosaki,
    make_quadratic,
    make_sigmoid_erm,
)
from .shadowing import (
    DefectReport,
    HBHyperbolicity,
    HyperbolicSplitting,
    Rates,
    ShadowReport,
    bound_convex_growth,
    bound_defect_gd,
    bound_defect_hb,
    bound_radius_sc,
    bound_step_perturbed,
    bound_step_saddle,
    bound_step_sc,
    bound_step_sgd,
    collect_rates,
    estimate_grad_bound,
    hb_hyperbolicity_check,
    hb_phase_matrix,
    hyperbolic_split,
    measure_defect,
    shadow_contraction,
    shadow_expansion,
    shadow_perturbed,
    shadow_saddle,
    shadow_sgd,
)

__version__ = "0.1.0"
