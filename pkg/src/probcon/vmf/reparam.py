"""
Reparametrized vMF Sampling

Samples that stay connected to the autodiff tape. The sample is

    z = H(mu) (w, sqrt(1 - w^2) v),

with H(mu) the Householder reflection mapping e_1 onto mu. Gradients reach mu
exactly through H. The radial coordinate w depends on kappa through its CDF
level, F(w; kappa) = u, and is differentiated implicitly (see
``radial_kappa_derivative``). The tangent direction v carries no gradient.

The noise record returned with each draw can be replayed at other parameter
values: w is moved along its CDF level to the new kappa, so a replay at
kappa +- h gives common-random-number finite differences.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from probcon.autodiff import Tensor, as_tensor, concat, dot, reshape, sqrt
from probcon.autodiff.tensor import make_node
from probcon.vmf.distribution import HOUSEHOLDER_EPS, sample_radial, sample_tangent
from probcon.vmf.radial import radial_kappa_derivative, radial_transport


@dataclass(frozen=True)
class ReparamNoise:
    """Base randomness of K reparametrized draws for N posteriors.

    Attributes:
        w: Radial coordinates, shape ``(K, N)``
        kappa: Concentrations the radial coordinates were drawn at, ``(N,)``
        v: Unit tangent directions, shape ``(K, N, D - 1)``
    """

    w: np.ndarray
    kappa: np.ndarray
    v: np.ndarray

    @property
    def D(self) -> int:
        return int(self.v.shape[-1]) + 1

    @property
    def K(self) -> int:
        return int(self.w.shape[0])

    def radial_at(self, kappa: np.ndarray) -> np.ndarray:
        """Radial coordinates at the same CDF levels under ``kappa``."""
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), self.kappa.shape)
        if np.array_equal(kappa, self.kappa):
            return self.w
        return radial_transport(self.D, self.kappa[None, :], kappa[None, :], self.w)


def draw_reparam_noise(
    D: int, kappa: np.ndarray, K: int, rng: np.random.Generator
) -> ReparamNoise:
    """Draw K radial coordinates and tangent directions per posterior."""
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    if np.any(np.isinf(kappa)):
        raise ValueError("no reparametrization gradient exists for a Dirac posterior")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    w = sample_radial(D, np.tile(kappa, K), rng).reshape(K, kappa.size)
    v = sample_tangent(D, (K, kappa.size), rng)
    return ReparamNoise(w=w, kappa=kappa.copy(), v=v)


def _radial_node(kappa: Tensor, w: np.ndarray, D: int) -> Tensor:
    """w as a tape node of kappa with adjoint sum_K g * dw/dkappa."""

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        dw_dkappa = radial_kappa_derivative(D, np.broadcast_to(kappa.data, w.shape), w)
        return (np.sum(g * dw_dkappa, axis=0),)

    return make_node(w, (kappa,), backward)


def vmf_sample_reparam(
    mu: Tensor,
    kappa: Tensor,
    rng: Optional[np.random.Generator],
    K: int,
    noise: Optional[ReparamNoise] = None,
) -> Tuple[Tensor, ReparamNoise]:
    """Draw K tape-connected samples per posterior.

    Args:
        mu: Unit locations, shape ``(N, D)`` or ``(D,)``
        kappa: Finite concentrations, shape ``(N,)`` or scalar
        rng: Random stream (unused when ``noise`` is given)
        K: Number of samples per posterior
        noise: Replay these base draws instead of drawing new ones

    Returns:
        ``(samples, noise)`` with samples of shape ``(K, N, D)`` (or
        ``(K, D)`` for a single posterior)

    Raises:
        ValueError: For Dirac concentrations or mismatched noise
    """
    mu, kappa = as_tensor(mu), as_tensor(kappa)
    single = mu.ndim == 1
    if single:
        mu = reshape(mu, (1, mu.shape[0]))
        kappa = reshape(kappa, (1,))
    N, D = mu.shape
    if kappa.shape != (N,):
        raise ValueError(f"kappa shape {kappa.shape} does not match {N} locations")
    if np.any(np.isinf(kappa.data)):
        raise ValueError("no reparametrization gradient exists for a Dirac posterior")

    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise is required")
        noise = draw_reparam_noise(D, kappa.data, K, rng)
    elif noise.w.shape != (K, N) or noise.v.shape != (K, N, D - 1):
        raise ValueError("noise record does not match the requested sample shape")

    w = _radial_node(kappa, noise.radial_at(kappa.data), D)
    radius = sqrt(1.0 - w * w)
    x = concat([reshape(w, (K, N, 1)), reshape(radius, (K, N, 1)) * noise.v], axis=-1)

    # Householder reflection e_1 -> mu, applied per posterior
    e1 = np.zeros(D)
    e1[0] = 1.0
    u = e1 - mu
    uu = dot(u, u)
    degenerate = uu.data < HOUSEHOLDER_EPS
    keep = Tensor(np.where(degenerate, 0.0, 2.0))
    uu_safe = uu + Tensor(degenerate.astype(float))
    coef = dot(reshape(u, (1, N, D)), x) / reshape(uu_safe, (1, N)) * reshape(keep, (1, N))
    z = x - reshape(coef, (K, N, 1)) * reshape(u, (1, N, D))
    if np.any(degenerate):
        # H is the identity at mu = e_1 and has no derivative there; the
        # gradient follows the rotation e_1 -> mu instead. delta is zero in value.
        mask = reshape(Tensor(degenerate * 1.0), (N, 1))
        delta = reshape((mu - Tensor(mu.data)) * mask, (1, N, D))
        tilt = reshape(w, (K, N, 1)) * delta - reshape(dot(x, delta), (K, N, 1)) * e1
        z = z + tilt
    if single:
        z = reshape(z, (K, D))
    return z, noise
