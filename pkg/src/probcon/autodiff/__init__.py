"""
Autodiff and Networks

Reverse-mode tape tensors, leaky-ReLU MLPs, the Adam optimizer and the
checkpoint format.
"""

from probcon.autodiff.checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from probcon.autodiff.functional import (
    l2_normalize,
    leaky_relu,
    log_vmf_norm_const,
    logsumexp,
    norm,
    sigmoid,
)
from probcon.autodiff.nn import Mlp, MlpSpec, init_params, mlp_forward
from probcon.autodiff.optim import Adam, AdamState, adam_step
from probcon.autodiff.tensor import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    clip,
    concat,
    div,
    dot,
    exp,
    index_select,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    reshape,
    scale,
    sqrt,
    stack,
    sub,
    tsum,
)

__all__ = [
    "Adam",
    "AdamState",
    "CHECKPOINT_VERSION",
    "Mlp",
    "MlpSpec",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "broadcast_to",
    "clip",
    "concat",
    "div",
    "dot",
    "exp",
    "index_select",
    "init_params",
    "l2_normalize",
    "leaky_relu",
    "load_checkpoint",
    "log",
    "log_vmf_norm_const",
    "logsumexp",
    "matmul",
    "mean",
    "mlp_forward",
    "mul",
    "neg",
    "no_grad",
    "norm",
    "reshape",
    "save_checkpoint",
    "scale",
    "sigmoid",
    "sqrt",
    "stack",
    "sub",
    "tsum",
]
