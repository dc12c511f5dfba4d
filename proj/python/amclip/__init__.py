"""Motion-aware video/text classifier ensemble (C++ core)."""

from ._amclip import (
    AmclipError,
    ConfigError,
    DataError,
    Model,
    NumericError,
    aggregate,
    average_precision,
    bce_loss,
    build_plans,
    compute_flow,
    evaluate,
    flow_to_image,
    generate_moving_shapes,
    synthetic_class_names,
    write_moving_shapes,
)

__all__ = [
    "AmclipError",
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "aggregate",
    "average_precision",
    "bce_loss",
    "build_plans",
    "compute_flow",
    "evaluate",
    "flow_to_image",
    "generate_moving_shapes",
    "synthetic_class_names",
    "write_moving_shapes",
]
