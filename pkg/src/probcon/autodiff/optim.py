"""
Adam Optimizer
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from probcon.autodiff.tensor import Tensor


@dataclass
class AdamState:
    """Step count and per-parameter moment buffers."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper: float) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **hyper,  # type: ignore[arg-type]
        )


def adam_step(
    state: AdamState,
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    lr: Optional[float] = None,
) -> AdamState:
    """Apply one bias-corrected Adam update in place.

    Parameters whose gradient is ``None`` are skipped entirely (their moments
    are left untouched), which is how frozen heads stay bit-identical.

    Args:
        state: Optimizer state, updated in place
        params: Parameters, updated in place
        grads: Gradients aligned with ``params``
        lr: Learning rate override for this step (schedules)

    Returns:
        The same ``state`` object
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameters, gradients and moment buffers must align")
    state.step += 1
    rate = state.lr if lr is None else lr
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise ValueError(f"gradient shape {grad.shape} does not match {param.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad * grad
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        param.data = param.data - rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


class Adam:
    """Adam over a fixed parameter list."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self, lr: Optional[float] = None) -> None:
        grads = [p.grad if p.requires_grad else None for p in self.params]
        adam_step(self.state, self.params, grads, lr=lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
