"""Online and offline kernel regression with target shift and target correction."""

from ._core import (
    DimensionError,
    Error,
    InvalidArgument,
    IoError,
    Kernel,
    NumericalError,
    argmax_accuracy,
    corrected_targets,
    directional_mask,
    effective_targets,
    empirical_ntk_gram,
    equivalence_report,
    generate_task,
    init_weights,
    iterative_correction_run,
    minibatch_closed_form,
    mlp_forward,
    mlp_jacobian,
    mse,
    offline_predict,
    online_closed_form,
    run_experiment,
    sgd_run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
