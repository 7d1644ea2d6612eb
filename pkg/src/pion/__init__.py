"""Spectrum-preserving optimization toolkit.

The optimizer family updates weight matrices by left and right orthogonal
factors, keeping singular values fixed while rotating the row and column
subspaces.  The package also ships baseline optimizers, desk-scale test
problems with analytic gradients, and a deterministic experiment harness
with CSV output and a CLI front end.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DivergenceError,
    DomainError,
    NonFiniteError,
    ParseError,
    PionError,
    ShapeError,
    SingularMatrixError,
    StateError,
)
from .harness import (
    ComparisonTable,
    ProblemSpec,
    RunConfig,
    RunRecord,
    Schedule,
    SweepGrid,
    compare,
    config_parse,
    config_serialize,
    csv_write,
    lr_sweep,
    run,
)
from .manifold import (
    LiePair,
    SpectrumRef,
    bilateral_normalize,
    capture_spectrum,
    descent_pairing,
    is_first_order_stationary,
    lie_gradients,
    rms_alpha,
    rotation_angles,
    spectrum_drift,
    stationarity_measure,
)
from .optim import (
    BaselineConfig,
    FlopEstimate,
    ParamState,
    PionConfig,
    StepReport,
    adamw_step,
    apply_mup,
    baseline_init,
    flop_estimate,
    muon_lite_step,
    pion_init,
    pion_step,
    pion_step_lie,
    pion_step_raw,
    pion_step_transported,
    sgd_step,
)
from .problems import (
    Problem,
    finite_difference_grads,
    least_squares,
    mlp,
    procrustes,
)
from .rng import Rng

__version__ = "0.1.0"
