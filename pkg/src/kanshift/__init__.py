"""Constraint-informed Kolmogorov-Arnold networks for time-shift governors.

The package has three layers: a small KAN library with hand-written
reverse-mode gradients (basis, edges, network, mlp, losses, optim, training),
a desk-scale constrained-rendezvous testbed (rendezvous), and the time-shift
governor built on both (governor).  The ``kanshift`` CLI ties them into a
generate / train / eval / simulate / report pipeline.
"""

__version__ = "0.1.0"

from .basis import KnotGrid, bspline_basis, silu
from .edges import EdgeFunction, edge_eval, edge_grad, KIND_BSPLINE, KIND_GRBF, KIND_RSWAF
from .network import (
    KanLayer,
    KanNetwork,
    ParameterTape,
    layer_forward,
    network_forward,
    network_backward,
    save_network,
    load_network,
)
from .mlp import MlpNetwork
from .losses import LossSpec, transform_output, regularizer, loss_plain, loss_log
from .optim import AdamWState, adamw_step
from .training import TrainConfig, train, train_mlp_baseline, evaluate_metrics
from .rendezvous import (
    RelativeState,
    Scenario,
    step_dynamics,
    reference_state,
    nominal_control,
    constraint_margin,
    rollout,
)
from .governor import (
    ShiftWindow,
    TsgSample,
    ScenarioFamily,
    tsg_exact,
    hybrid_step,
    run_governed_mission,
    generate_dataset,
)

__all__ = [
    "__version__",
    "KnotGrid",
    "bspline_basis",
    "silu",
    "EdgeFunction",
    "edge_eval",
    "edge_grad",
    "KIND_BSPLINE",
    "KIND_GRBF",
    "KIND_RSWAF",
    "KanLayer",
    "KanNetwork",
    "ParameterTape",
    "layer_forward",
    "network_forward",
    "network_backward",
    "save_network",
    "load_network",
    "MlpNetwork",
    "LossSpec",
    "transform_output",
    "regularizer",
    "loss_plain",
    "loss_log",
    "AdamWState",
    "adamw_step",
    "TrainConfig",
    "train",
    "train_mlp_baseline",
    "evaluate_metrics",
    "RelativeState",
    "Scenario",
    "step_dynamics",
    "reference_state",
    "nominal_control",
    "constraint_margin",
    "rollout",
    "ShiftWindow",
    "TsgSample",
    "ScenarioFamily",
    "tsg_exact",
    "hybrid_step",
    "run_governed_mission",
    "generate_dataset",
]
