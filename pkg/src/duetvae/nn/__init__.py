from .autograd import Param, Tensor, no_grad
from .functional import (
    VaeLatent,
    conv_smooth,
    layer_norm,
    linear_forward,
    lstm_forward,
    mha_forward,
    positional_encoding,
    reparameterize,
)
from .gradcheck import check_gradients, finite_difference_gradient, relative_error
from .modules import LSTM, ConvSmooth, LayerNorm, Linear, Module, MultiHeadAttention

__all__ = [
    "Param",
    "Tensor",
    "no_grad",
    "VaeLatent",
    "conv_smooth",
    "layer_norm",
    "linear_forward",
    "lstm_forward",
    "mha_forward",
    "positional_encoding",
    "reparameterize",
    "check_gradients",
    "finite_difference_gradient",
    "relative_error",
    "LSTM",
    "ConvSmooth",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
]
