"""
Analytic Positive-Pair Marginal

For posteriors vMF(mu, kappa) at x and vMF(mu+, kappa+) at x+, the expected
positive-pair likelihood is

    h = C(kappa_pos) E_{z ~ vMF(mu, kappa)} [ C(kappa+) / C(r(z)) ],
    r(z) = sqrt(kappa+^2 + kappa_pos^2 + 2 kappa+ kappa_pos mu+^T z),

which follows from integrating C(kappa+) e^{kappa+ mu+^T z+ + kappa_pos z^T z+}
over z+. It depends on the two locations only through rho = mu^T mu+.

Rotational symmetry lets us write z = w mu + sqrt(1 - w^2) v with v a uniform
unit vector orthogonal to mu, so

    mu+^T z = w rho + sqrt(1 - w^2) sqrt(1 - rho^2) s,

where w follows the radial law of vMF(kappa) on S^(D-1) and s = e^T v, for a
fixed unit e orthogonal to mu, follows the radial law of the uniform
distribution on S^(D-2) (density proportional to (1 - s^2)^((D-4)/2)). For
D = 2 the orthogonal complement is a line and s is +-1 with equal mass.

The expectation is a tensor-product quadrature over (w, s). The s rule is
symmetric, so odd powers of sqrt(1 - w^2) cancel exactly and the inner sum is
analytic in w. Node counts are doubled until two successive values agree.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.special import logsumexp, roots_genlaguerre, roots_jacobi

from probcon.errors import NumericalFailure
from probcon.special import log_vmf_norm_const
from probcon.vmf import VmfParams, vmf_sample

START_NODES = 32
MAX_NODES = 1024
CONVERGENCE_TOL = 1e-9
# above this concentration the radial coordinate is integrated in u = kappa (1 - w)
LAGUERRE_KAPPA = 50.0
# query-node products evaluated per block
BLOCK_SIZE = 2_000_000


@dataclass(frozen=True)
class OracleQuery:
    """Arguments of the positive-pair marginal.

    Attributes:
        rho: mu(x)^T mu(x+), in [-1, 1]
        kappa: Concentration at x (``inf`` for a Dirac posterior)
        kappa_plus: Concentration at x+
        kappa_pos: Positive-pair concentration
        D: Latent dimension
    """

    rho: float
    kappa: float
    kappa_plus: float
    kappa_pos: float
    D: int

    def __post_init__(self) -> None:
        if not -1.0 - 1e-12 <= self.rho <= 1.0 + 1e-12:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if not (self.kappa >= 0 and self.kappa_plus >= 0 and self.kappa_pos >= 0):
            raise ValueError("concentrations must be non-negative")
        if int(self.D) != self.D or self.D < 2:
            raise ValueError(f"D must be an integer >= 2, got {self.D}")

    def swapped(self) -> "OracleQuery":
        return OracleQuery(self.rho, self.kappa_plus, self.kappa, self.kappa_pos, self.D)


@lru_cache(maxsize=64)
def _jacobi(n: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_jacobi(n, alpha, alpha)
    return nodes, np.log(weights)


@lru_cache(maxsize=64)
def _laguerre(n: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_genlaguerre(n, alpha)
    with np.errstate(divide="ignore"):
        return nodes, np.log(weights)


def _radial_rule(D: int, kappa: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and normalized log-weights ``(Q, n)`` of the radial law of vMF(kappa)."""
    alpha = (D - 3.0) / 2.0
    Q = kappa.shape[0]
    nodes = np.empty((Q, n))
    logw = np.empty((Q, n))

    # density (1 - w^2)^alpha e^{kappa w} on [-1, 1]
    low = kappa <= LAGUERRE_KAPPA
    if np.any(low):
        x, lw = _jacobi(n, alpha)
        nodes[low] = x
        logw[low] = lw + kappa[low, None] * (x - 1.0)

    # u = kappa (1 - w): density u^alpha (2 - u / kappa)^alpha e^{-u} on [0, 2 kappa]
    high = ~low & np.isfinite(kappa)
    if np.any(high):
        u, lw = _laguerre(n, alpha)
        k = kappa[high, None]
        inside = u[None, :] < 2.0 * k
        frac = np.where(inside, u[None, :] / k, 1.0)
        nodes[high] = 1.0 - frac
        with np.errstate(divide="ignore"):
            logw[high] = np.where(inside, lw + alpha * np.log(2.0 - frac), -np.inf)

    dirac = np.isinf(kappa)
    nodes[dirac] = 1.0
    logw[dirac] = 0.0

    logw -= logsumexp(logw, axis=1, keepdims=True)
    return nodes, logw


def _slice_rule(D: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and normalized log-weights of s = e^T v."""
    if D == 2:
        return np.array([-1.0, 1.0]), np.log(np.array([0.5, 0.5]))
    nodes, lw = _jacobi(n, (D - 4.0) / 2.0)
    return nodes, lw - logsumexp(lw)


def _closed_form(
    D: int, rho: np.ndarray, kappa: np.ndarray, kappa_plus: np.ndarray, kappa_pos: np.ndarray
) -> np.ndarray:
    """ln h when at least one posterior is Dirac."""
    out = np.empty_like(rho)
    both = np.isinf(kappa) & np.isinf(kappa_plus)
    out[both] = kappa_pos[both] * rho[both]
    one = ~both
    finite = np.where(np.isinf(kappa[one]), kappa_plus[one], kappa[one])
    combined = np.sqrt(
        np.clip(
            finite**2 + kappa_pos[one] ** 2 + 2.0 * finite * kappa_pos[one] * rho[one], 0.0, None
        )
    )
    out[one] = np.asarray(log_vmf_norm_const(D, finite)) - np.asarray(
        log_vmf_norm_const(D, combined)
    )
    return out + np.asarray(log_vmf_norm_const(D, kappa_pos))


def _log_h_fixed(
    D: int,
    rho: np.ndarray,
    kappa: np.ndarray,
    kappa_plus: np.ndarray,
    kappa_pos: np.ndarray,
    n: int,
) -> np.ndarray:
    """ln h for finite kappa_plus with an n x n rule."""
    w, logw = _radial_rule(D, kappa, n)
    s, logs = _slice_rule(D, n)
    cos = w[:, :, None] * rho[:, None, None] + (
        np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, :, None]
        * np.sqrt(np.clip(1.0 - rho * rho, 0.0, None))[:, None, None]
        * s[None, None, :]
    )
    cos = np.clip(cos, -1.0, 1.0)
    kp = kappa_plus[:, None, None]
    kq = kappa_pos[:, None, None]
    r = np.sqrt(np.clip(kp * kp + kq * kq + 2.0 * kp * kq * cos, 0.0, None))
    log_ratio = np.asarray(log_vmf_norm_const(D, kp)) - np.asarray(log_vmf_norm_const(D, r))
    log_terms = log_ratio + logw[:, :, None] + logs[None, None, :]
    return np.asarray(log_vmf_norm_const(D, kappa_pos)) + logsumexp(log_terms, axis=(1, 2))


def _log_h_adaptive(
    D: int, rho: np.ndarray, kappa: np.ndarray, kappa_plus: np.ndarray, kappa_pos: np.ndarray
) -> np.ndarray:
    out = np.empty_like(rho)
    n = START_NODES
    block = max(1, BLOCK_SIZE // (n * n))
    previous = np.concatenate(
        [
            _log_h_fixed(D, *(a[i : i + block] for a in (rho, kappa, kappa_plus, kappa_pos)), n)
            for i in range(0, rho.size, block)
        ]
    )
    todo = np.arange(rho.size)
    while todo.size:
        n *= 2
        if n > MAX_NODES:
            raise NumericalFailure(
                f"marginal quadrature did not converge with {MAX_NODES} nodes "
                f"({todo.size} queries pending, D={D})"
            )
        block = max(1, BLOCK_SIZE // (n * n))
        current = np.concatenate(
            [
                _log_h_fixed(
                    D, *(a[todo[i : i + block]] for a in (rho, kappa, kappa_plus, kappa_pos)), n
                )
                for i in range(0, todo.size, block)
            ]
        )
        done = np.abs(np.expm1(current - previous)) <= CONVERGENCE_TOL
        out[todo[done]] = current[done]
        todo, previous = todo[~done], current[~done]
    return out


def log_marginal_h_batch(
    D: int,
    rho: Union[float, np.ndarray],
    kappa: Union[float, np.ndarray],
    kappa_plus: Union[float, np.ndarray],
    kappa_pos: Union[float, np.ndarray],
) -> np.ndarray:
    """ln h for broadcast arrays of query arguments.

    Raises:
        ValueError: On out-of-range arguments
        NumericalFailure: If the quadrature does not converge
    """
    if int(D) != D or D < 2:
        raise ValueError(f"D must be an integer >= 2, got {D}")
    rho, kappa, kappa_plus, kappa_pos = (
        np.array(a, dtype=float) for a in np.broadcast_arrays(rho, kappa, kappa_plus, kappa_pos)
    )
    shape = rho.shape
    rho, kappa, kappa_plus, kappa_pos = (a.reshape(-1) for a in (rho, kappa, kappa_plus, kappa_pos))
    if np.any(np.abs(rho) > 1.0 + 1e-12):
        raise ValueError("rho must lie in [-1, 1]")
    if np.any(kappa < 0) or np.any(kappa_plus < 0) or np.any(kappa_pos < 0):
        raise ValueError("concentrations must be non-negative")
    rho = np.clip(rho, -1.0, 1.0)

    out = np.empty_like(rho)
    dirac = np.isinf(kappa) | np.isinf(kappa_plus)
    if np.any(dirac):
        out[dirac] = _closed_form(
            D, rho[dirac], kappa[dirac], kappa_plus[dirac], kappa_pos[dirac]
        )
    finite = ~dirac
    if np.any(finite):
        out[finite] = _log_h_adaptive(
            D, rho[finite], kappa[finite], kappa_plus[finite], kappa_pos[finite]
        )
    return out.reshape(shape)


def marginal_h(q: OracleQuery) -> float:
    """Expected positive-pair likelihood h for one query."""
    return float(
        np.exp(log_marginal_h_batch(q.D, q.rho, q.kappa, q.kappa_plus, q.kappa_pos))
    )


def mc_marginal_draws(
    posterior_ref: VmfParams,
    posterior_pos: VmfParams,
    kappa_pos: float,
    K: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """K single-sample estimates C(kappa_pos) e^{kappa_pos z_k^T z+_k}."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if posterior_ref.D != posterior_pos.D:
        raise ValueError("posteriors live on spheres of different dimension")
    z = vmf_sample(posterior_ref, rng, size=K)
    z_pos = vmf_sample(posterior_pos, rng, size=K)
    log_c = float(log_vmf_norm_const(posterior_ref.D, kappa_pos))
    return np.exp(log_c + kappa_pos * np.sum(z * z_pos, axis=1))


def mc_marginal_estimate(
    posterior_ref: VmfParams,
    posterior_pos: VmfParams,
    kappa_pos: float,
    K: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo estimate of h from K paired posterior samples.

    Dirac posteriors give C(kappa_pos) e^{kappa_pos mu^T mu+} for any K.
    """
    return float(np.mean(mc_marginal_draws(posterior_ref, posterior_pos, kappa_pos, K, rng)))
