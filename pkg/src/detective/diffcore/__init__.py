"""Reverse-mode differentiation and the special functions it relies on."""

from .gradcheck import GradCheckResult, grad_check, grad_check_details
from . import special as _special
from .special import trigamma
from .tape import (
    Value,
    as_value,
    backward,
    clamp,
    concat,
    exp,
    log,
    matmul,
    mean,
    no_grad,
    record_relu_inputs,
    relu,
    reshape,
    slice_cols,
    vsum,
    zero_grad,
)
from . import tape as ops


def digamma(x):
    """Digamma of a float/ndarray, or the differentiable op when given a Value."""
    return ops.digamma(x) if isinstance(x, Value) else _special.digamma(x)


def lgamma(x):
    """Log-gamma of a float/ndarray, or the differentiable op when given a Value."""
    return ops.lgamma(x) if isinstance(x, Value) else _special.lgamma(x)

__all__ = [
    "GradCheckResult",
    "Value",
    "as_value",
    "backward",
    "clamp",
    "concat",
    "digamma",
    "exp",
    "grad_check",
    "grad_check_details",
    "lgamma",
    "log",
    "matmul",
    "mean",
    "no_grad",
    "ops",
    "record_relu_inputs",
    "relu",
    "reshape",
    "slice_cols",
    "trigamma",
    "vsum",
    "zero_grad",
]
