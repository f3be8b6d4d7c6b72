"""Small reverse-mode autodiff engine on numpy."""

from . import functional
from .gradcheck import analytic_gradients, grad_check, grad_check_report, relative_error
from .layers import BatchNorm1d, Conv1d, Dropout, Linear, MaxPool1d, Module, ReLU, Sequential
from .tensor import Parameter, Tape, Tensor, backward

__all__ = [
    "BatchNorm1d", "Conv1d", "Dropout", "Linear", "MaxPool1d", "Module", "Parameter", "ReLU",
    "Sequential", "Tape", "Tensor", "analytic_gradients", "backward", "functional", "grad_check",
    "grad_check_report", "relative_error",
]
