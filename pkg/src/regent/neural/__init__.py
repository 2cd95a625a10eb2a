"""Recurrent cells, their gradients, and their relation to DFAs."""

from .cells import (
    KINDS,
    BatchTrace,
    CellSpec,
    ForwardTrace,
    backward,
    forward,
    forward_batch,
    init_params,
    logits,
    loss_and_grads,
    match_budget,
    param_count,
    param_shapes,
)
from .model import Model, load_model, save_model
from .optim import rmsprop_step
from .theory import (
    FirstOrderFit,
    configure_unified,
    construct_2rnn,
    first_order_fit,
    mi_switch_property_check,
    second_order_residual,
)

__all__ = [
    "KINDS", "BatchTrace", "CellSpec", "FirstOrderFit", "ForwardTrace", "Model",
    "backward", "configure_unified", "construct_2rnn", "first_order_fit", "forward",
    "forward_batch", "init_params", "load_model", "logits", "loss_and_grads",
    "match_budget", "mi_switch_property_check", "param_count", "param_shapes",
    "rmsprop_step", "save_model", "second_order_residual",
]
