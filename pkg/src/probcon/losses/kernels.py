"""
Expected Likelihood Kernel

ln of the overlap integral of two vMF densities,

    ln int vMF(z; p) vMF(z; q) dz
        = ln C(kappa_p) + ln C(kappa_q) - ln C(|kappa_p mu_p + kappa_q mu_q|),

as a plain function on ``VmfParams`` and as a tape op on batched tensors.
"""

import numpy as np

from probcon.autodiff import Tensor, as_tensor, log_vmf_norm_const, norm, reshape
from probcon.special import log_vmf_norm_const as np_log_vmf_norm_const
from probcon.vmf import VmfParams


def el_vmf_log_kernel(p: VmfParams, q: VmfParams) -> float:
    """Log expected likelihood kernel of two vMF distributions.

    Raises:
        ValueError: On a dimension mismatch or a Dirac argument
    """
    if p.D != q.D:
        raise ValueError(f"dimension mismatch: {p.D} vs {q.D}")
    if p.is_dirac or q.is_dirac:
        raise ValueError("the expected likelihood kernel needs finite concentrations")
    combined = float(np.linalg.norm(p.kappa * p.mu + q.kappa * q.mu))
    return float(
        np_log_vmf_norm_const(p.D, p.kappa)
        + np_log_vmf_norm_const(q.D, q.kappa)
        - np_log_vmf_norm_const(p.D, combined)
    )


def el_vmf_log_kernel_tensor(
    mu_p: Tensor, kappa_p: Tensor, mu_q: Tensor, kappa_q: Tensor
) -> Tensor:
    """Batched tape version; ``mu`` shapes ``(..., D)`` broadcast, ``kappa`` shapes ``(...)``."""
    mu_p, mu_q = as_tensor(mu_p), as_tensor(mu_q)
    kappa_p, kappa_q = as_tensor(kappa_p), as_tensor(kappa_q)
    D = mu_p.shape[-1]
    if mu_q.shape[-1] != D:
        raise ValueError(f"dimension mismatch: {D} vs {mu_q.shape[-1]}")
    combined = reshape(kappa_p, (*kappa_p.shape, 1)) * mu_p + reshape(
        kappa_q, (*kappa_q.shape, 1)
    ) * mu_q
    return (
        log_vmf_norm_const(D, kappa_p)
        + log_vmf_norm_const(D, kappa_q)
        - log_vmf_norm_const(D, norm(combined))
    )
