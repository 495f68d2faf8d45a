"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from revsent.autodiff import ops
from revsent.autodiff.checkpoint import load_checkpoint, save_checkpoint
from revsent.autodiff.nn import Linear, Module, parameter
from revsent.autodiff.ops import (
    add, concat, conv1d, cross_entropy, dropout, embedding_lookup, exp, log, log_softmax,
    masked_softmax, matmul, max_over_time, mean, mse, mul, relu, reshape, sigmoid, softmax,
    stack, sub, tanh, where,
)
from revsent.autodiff.optim import Adam, AdamState, adam_step
from revsent.autodiff.tensor import (
    Tensor, backward, default_dtype, get_default_dtype, no_grad, set_default_dtype,
)

__all__ = [
    "Adam", "AdamState", "Linear", "Module", "Tensor", "adam_step", "add", "backward", "concat",
    "conv1d", "cross_entropy", "default_dtype", "dropout", "embedding_lookup", "exp",
    "get_default_dtype", "load_checkpoint", "log", "log_softmax", "masked_softmax", "matmul",
    "max_over_time", "mean", "mse", "mul", "no_grad", "ops", "parameter", "relu", "reshape",
    "save_checkpoint", "set_default_dtype", "sigmoid", "softmax", "stack", "sub", "tanh", "where",
]
