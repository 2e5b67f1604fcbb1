"""recede: asymptotic cones, generalized asymptotic functions and recession
conditions for desk-scale optimization problems, with tilt-perturbation
stability experiments and empirical weak-sharpness certificates."""

from .asymptotics import AsymCfg, Estimate, asym_fn, q_asym_fn, sublevel_asym_fn, tilt_identity_check
from .conditions import (
    CheckCfg,
    CheckResult,
    alpha_robust_test,
    coercivity_probe,
    quasiconvexity_test,
    recession_check,
)
from .cones import ConeRep, asymptotic_cone, cone_contains, sample_cone_unit
from .infinity import InfNormalCone, InfSubdiff, normal_cone_at_infinity, son_cq_check, subdiff_at_infinity
from .models import (
    MINUS_INF,
    PLUS_INF,
    Options,
    ProblemSpec,
    catalog_function,
    eval_f,
    grad,
    load_problem,
    member,
    parse_problem,
    problem_from_dict,
    project,
    serialize_problem,
    tilt,
)
from .solver import SolverResult, dist_to_solset, solve
from .stability import (
    SharpnessCertificate,
    StabilityReport,
    perturb_grid,
    semicontinuity_diagnostics,
    weak_sharp_certify,
)

__version__ = "0.1.0"
