"""Box-constrained optimizers for adversarial perturbations.

Gradient, momentum, and momentum-adaptive step rules over an
L-infinity-ball-intersect-range feasible region, with built-in
differentiable oracles, attack-quality metrics, and a deterministic
experiment harness.
"""

__version__ = "0.1.0"

from .backend import backend_name
from .core import (
    AttackState,
    ConstantMomentum,
    ConstantStep,
    FeasibleBox,
    GeometricMomentum,
    HyperParams,
    InvSqrtStep,
    Oracle,
    Vector,
    as_vector,
    box_membership,
    default_hyperparams,
    schedule_value,
)
from .metrics import ald_inf, convergence_gap, rate_exponent, success_rate
from .optimizers import (
    METHODS,
    AttackMethod,
    AttackRunError,
    RunTrace,
    ada_wrap,
    make_method,
    run_attack,
    sign_as_matrix,
)
from .oracles import (
    ConcaveQuadratic,
    LinearModel,
    MlpModel,
    ModelOracle,
    SyntheticDataset,
    fd_gradient,
    train_model,
)
from .projection import clip_box, project_q

__all__ = [
    "__version__",
    "backend_name",
    "AttackState",
    "ConstantMomentum",
    "ConstantStep",
    "FeasibleBox",
    "GeometricMomentum",
    "HyperParams",
    "InvSqrtStep",
    "Oracle",
    "Vector",
    "as_vector",
    "box_membership",
    "default_hyperparams",
    "schedule_value",
    "ald_inf",
    "convergence_gap",
    "rate_exponent",
    "success_rate",
    "METHODS",
    "AttackMethod",
    "AttackRunError",
    "RunTrace",
    "ada_wrap",
    "make_method",
    "run_attack",
    "sign_as_matrix",
    "ConcaveQuadratic",
    "LinearModel",
    "MlpModel",
    "ModelOracle",
    "SyntheticDataset",
    "fd_gradient",
    "train_model",
    "clip_box",
    "project_q",
]
