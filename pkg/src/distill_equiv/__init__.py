"""Gradient-level comparison of temperature-scaled distillation and logits matching."""

from .equivalence import (
    CANDIDATES,
    EquivalenceReport,
    SweepResult,
    Verdict,
    check_zero_sum,
    check_zero_sum_ce,
    equivalence_report,
    temperature_sweep,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    DimensionMismatchError,
    DivergenceError,
    InvalidInputError,
    KdDivergenceError,
)
from .gradients import FdConfig, check_gradient, fd_gradient, grad_ce, grad_kd_scaled, grad_lm, grad_lm_reg, limit_gradient
from .losses import MeanOffsets, ce_loss, ce_lower_bound, kd_loss, lm_loss, lm_reg_loss
from .network import (
    InitScheme,
    MlpModel,
    direct_logit_descent,
    init_model,
    logit_mean_statistics,
    train_compare,
)
from .numerics import log_sum_exp, mean, softmax

__version__ = "0.1.0"
