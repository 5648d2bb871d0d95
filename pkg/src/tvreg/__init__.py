"""Smoothed total-variation regularization on grid domains.

A numpy library plus ``tvreg`` CLI for linear inverse problems penalized by
the smoothed total variation, with closed-form regularization-parameter
rules tied to the discrepancy principle and a verification harness that
numerically checks the underlying inequalities and convergence behavior at
desk scale.
"""

from .fields import (
    Grid,
    DomainGeometry,
    ScalarField,
    VectorField,
    HolderParams,
    HolderCoefficient,
    geometry,
    gradient,
    divergence,
    grad_magnitude,
    tv,
    smoothed_tv,
    lp_norm,
    bv_norm,
    holder_coefficient,
    holder_norm,
    inner,
    l2_norm,
)
from .operators import (
    LinearOperator,
    Identity,
    GaussianBlur,
    DenseMatrix,
    OperatorNormEstimate,
    apply,
    adjoint_apply,
    operator_norm,
    adjoint_test,
    parse_operator,
)
from .solvers import (
    Objective,
    SolveOptions,
    SolveResult,
    LaggedConditionReport,
    objective_value,
    smoothed_tv_gradient,
    objective_gradient,
    optimality_residual,
    solve,
    solve_gradient_descent,
    solve_lagged_diffusivity,
    lagged_condition_check,
)
from .rules import (
    RuleInputs,
    AdmissibilityReport,
    K_of,
    lipschitz_L,
    alpha_rule1,
    alpha_rule2,
    alpha_rule3,
    tau_of,
    admissibility_check,
    fixed_point_alpha,
    morozov_bisection,
)
from .checks import (
    BregmanReport,
    bregman,
    QConvexityProbe,
    q_convexity_probe,
    strong_convexity_modulus,
    TheoremCheckReport,
    check_holder_vs_tv,
    check_grad_l1,
    check_grad_l2_sq,
    check_l1_embedding,
    check_successive_tv,
    check_lipschitz_successive_tv,
    morrey_ratio,
    morrey_exponent,
    corpus_checks,
    SweepExperiment,
    SweepResult,
    delta_sweep,
)
from .phantoms import (
    PhantomSpec,
    parse_phantom_spec,
    make_phantom,
    add_noise,
    standard_corpus,
)
from .rng import SplitMix64

__version__ = "0.1.0"
