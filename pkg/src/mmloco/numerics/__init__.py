"""Minimal float64 tensor algebra with reverse-mode autodiff and Adam."""
from .checkpoint import load_parameters, save_parameters
from .gradcheck import finite_difference_check
from .nn import MLP, LayerNorm, Linear, Module, param
from .optim import AdamState, adam_step, clip_grad_norm
from .tensor import (NonFiniteError, ShapeError, Tape, Tensor, add, affine, as_tensor, backward, clip,
                     concat, div, elu, exp, layer_norm, log, matmul, max_, maximum, mean, minimum,
                     mul, neg, no_grad, relu, reshape, sigmoid, softplus, sqrt, square, sub, sum_,
                     take, tanh, transpose, var)

__all__ = [
    "Tensor", "Tape", "no_grad", "backward", "ShapeError", "NonFiniteError",
    "add", "affine", "sub", "mul", "div", "neg", "square", "sqrt", "exp", "log", "tanh", "sigmoid",
    "softplus", "elu", "relu", "clip", "minimum", "maximum", "matmul", "transpose", "reshape",
    "take", "concat", "sum_", "mean", "var", "max_", "layer_norm", "as_tensor",
    "AdamState", "adam_step", "clip_grad_norm", "finite_difference_check",
    "save_parameters", "load_parameters", "Module", "Linear", "LayerNorm", "MLP", "param",
]
