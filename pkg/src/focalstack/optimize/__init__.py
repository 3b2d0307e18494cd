"""TV-regularized depth refinement and first-order solver benchmark."""

from focalstack.optimize.baselines import BASELINE_METHODS, baseline_solve
from focalstack.optimize.operators import (
    LinearOperatorHandle,
    TVSplitConstraint,
    divergence_op,
    gradient_op,
    linearize,
    operator_norm,
)
from focalstack.optimize.padmm import SolverState, padmm_solve
from focalstack.optimize.problem import (
    DenoiseProblem,
    IsotropicTV,
    L1Fidelity,
    L2Fidelity,
    PADMMConfig,
    SolverTrace,
    TraceRecord,
    TVDualBall,
    energy,
    prox,
    trace_metrics,
)

__all__ = [
    "BASELINE_METHODS",
    "DenoiseProblem",
    "IsotropicTV",
    "L1Fidelity",
    "L2Fidelity",
    "LinearOperatorHandle",
    "PADMMConfig",
    "SolverState",
    "SolverTrace",
    "TVDualBall",
    "TVSplitConstraint",
    "TraceRecord",
    "baseline_solve",
    "divergence_op",
    "energy",
    "gradient_op",
    "linearize",
    "operator_norm",
    "padmm_solve",
    "prox",
    "trace_metrics",
]
