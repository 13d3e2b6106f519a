"""Desk-scale knowledge distillation with a dynamic temperature scheduler.

Tempered softmax losses with analytic gradients (compiled kernels with a
pure-numpy fallback), a family of temperature schedules including a
loss-reactive cosine one, from-scratch MLP training, synthetic data, an
experiment CLI, and independent verification oracles.
"""

from ._kernels import available_backends, backend_name
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .data import Dataset, load_csv, make_blobs, save_csv, split
from .distill import DistillConfig, MetricsRecord, distill, evaluate
from .model import (
    Model,
    SgdConfig,
    backward,
    forward,
    init_model,
    load_model,
    model_fingerprint,
    save_model,
    sgd_step,
    train_supervised,
)
from .numerics import (
    cross_entropy,
    cross_entropy_grad,
    kd_loss,
    kd_loss_grad,
    softmax_t,
)
from .scheduler import (
    CosineTemperature,
    DynamicTemperature,
    LinearDecay,
    ScheduleParams,
    StaticTemperature,
    adaptive_alpha,
    cosine_schedule,
    loss_divergence,
    make_scheduler,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CosineTemperature",
    "Dataset",
    "DistillConfig",
    "DynamicTemperature",
    "ExperimentConfig",
    "LinearDecay",
    "MetricsRecord",
    "Model",
    "ScheduleParams",
    "SgdConfig",
    "StaticTemperature",
    "__version__",
    "adaptive_alpha",
    "available_backends",
    "backend_name",
    "backward",
    "cosine_schedule",
    "cross_entropy",
    "cross_entropy_grad",
    "distill",
    "evaluate",
    "forward",
    "init_model",
    "kd_loss",
    "kd_loss_grad",
    "load_config",
    "load_csv",
    "load_model",
    "loss_divergence",
    "make_blobs",
    "make_scheduler",
    "model_fingerprint",
    "parse_config",
    "save_csv",
    "save_model",
    "sgd_step",
    "softmax_t",
    "split",
    "train_supervised",
]
