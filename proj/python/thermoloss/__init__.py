"""Thermal image losses, landmark utilities and evaluation metrics."""

from ._core import (
    Adapter,
    DimensionMismatch,
    InvalidArgument,
    NumericalError,
    ParseError,
    Profile,
    adapter_apply,
    gaussian_nll,
    patch_w_loss,
    region_reg,
    sinkhorn,
)

__all__ = [
    "Adapter",
    "DimensionMismatch",
    "InvalidArgument",
    "NumericalError",
    "ParseError",
    "Profile",
    "adapter_apply",
    "gaussian_nll",
    "patch_w_loss",
    "region_reg",
    "sinkhorn",
]
__version__ = "0.1.0"
