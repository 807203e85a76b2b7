"""Small reverse-mode autodiff and layer kit (float64, CPU)."""
from .autograd import (
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    avg_pool_2d,
    backward,
    concat,
    conv_2d,
    flatten,
    grad,
    matmul,
    mul,
    norm,
    relu,
    reshape,
    scale,
    sigmoid,
    sub,
    sum_of_squares,
    take,
    tanh,
    tensor_sum,
)
from .checkpoint import CheckpointError, load_tensors, save_tensors
from .layers import Conv2d, Linear, LSTMParams, lstm_cell, parameter, xavier_uniform
from .optim import Adam, AdamState, adam_step
