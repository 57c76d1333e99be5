"""
Nonlinear Tape Operations

Activation, normalization and log-space reductions used by the MLP heads and
the contrastive losses, plus the vMF log-normalizer as a differentiable op.
"""

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit
from scipy.special import logsumexp as np_logsumexp

from probcon.autodiff.tensor import Operand, Tensor, as_tensor, make_node
from probcon.special import log_vmf_norm_const as np_log_vmf_norm_const
from probcon.special import mean_resultant_length

LEAKY_SLOPE = 0.01
NORM_GUARD = 1e-12


def leaky_relu(a: Operand, slope: float = LEAKY_SLOPE) -> Tensor:
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return make_node(a.data * factor, (a,), lambda g: (g * factor,))


def sigmoid(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = expit(a.data)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),))


def logsumexp(a: Operand, axis: int = -1, keepdims: bool = False) -> Tensor:
    """ln sum exp along ``axis`` with the max-shift identity.

    ``logsumexp([1000, 1000])`` is ``1000 + ln 2``. Slices that are entirely
    ``-inf`` give ``-inf`` with a zero adjoint.
    """
    a = as_tensor(a)
    out = np_logsumexp(a.data, axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        g_full = g if keepdims else np.expand_dims(g, axis)
        finite = np.isfinite(out)
        weights = np.where(finite, np.exp(a.data - np.where(finite, out, 0.0)), 0.0)
        return (g_full * weights,)

    value = out if keepdims else np.squeeze(out, axis=axis)
    return make_node(value, (a,), backward)


def norm(a: Operand, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the adjoint at the origin is zero."""
    a = as_tensor(a)
    out = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        n = np.expand_dims(out, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, np.expand_dims(g, axis) * a.data / safe, 0.0),)

    return make_node(out, (a,), backward)


def l2_normalize(a: Operand, axis: int = -1) -> Tensor:
    """Project onto the unit sphere along ``axis``.

    Norms below 1e-12 are increased by 1e-12 before dividing. An exactly
    zero vector maps to the first basis vector with a zero adjoint, so a
    degenerate network still returns a deterministic unit direction.
    """
    a = as_tensor(a)
    n = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))
    guarded = np.where(n < NORM_GUARD, n + NORM_GUARD, n)
    out = a.data / guarded
    zero = n == 0.0
    if np.any(zero):
        basis = np.zeros(a.shape[axis])
        basis[0] = 1.0
        basis_shape = [1] * a.ndim
        basis_shape[axis] = a.shape[axis]
        out = np.where(zero, basis.reshape(basis_shape), out)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        # d(a/n')/da = I/n' - a a^T / (n'^2 n); at the normal branch n' = n
        coef = np.where(n > 0, 1.0 / (guarded * guarded * np.where(n > 0, n, 1.0)), 0.0)
        along = np.sum(a.data * g, axis=axis, keepdims=True)
        grad = g / guarded - a.data * along * coef
        return (np.where(zero, 0.0, grad),)

    return make_node(out, (a,), backward)


def log_vmf_norm_const(D: int, kappa: Operand) -> Tensor:
    """ln C_D(kappa) on the tape; its adjoint is -A_D(kappa)."""
    kappa = as_tensor(kappa)
    out = np.asarray(np_log_vmf_norm_const(D, kappa.data), dtype=np.float64)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (-g * np.asarray(mean_resultant_length(D, kappa.data)),)

    return make_node(out, (kappa,), backward)
