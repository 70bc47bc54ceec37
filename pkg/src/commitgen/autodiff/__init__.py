"""Minimal reverse-mode autodiff and optimisation substrate."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .ops import (
    add,
    concat,
    conv_2d,
    cross_entropy_with_logits,
    dropout,
    embedding_lookup,
    log_softmax_np,
    matmul,
    max_pool_2d,
    mean,
    mse,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)
from .params import ParamStore, rng_stream, xavier_uniform
from .tensor import (
    Tensor,
    as_tensor,
    default_dtype,
    detect_nonfinite,
    no_grad,
    set_default_dtype,
    using_dtype,
)

__all__ = [
    "GradCheckReport", "ParamStore", "Tensor", "add", "as_tensor", "concat", "conv_2d",
    "cross_entropy_with_logits", "default_dtype", "detect_nonfinite", "dropout",
    "embedding_lookup", "grad_check", "log_softmax_np", "matmul", "max_pool_2d", "mean",
    "mse", "mul", "no_grad", "relative_error", "relu", "reshape", "rng_stream",
    "set_default_dtype", "sigmoid", "slice_", "softmax", "sub", "sum_", "tanh",
    "transpose", "using_dtype", "xavier_uniform",
]
