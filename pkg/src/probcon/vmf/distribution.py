"""
von Mises-Fisher Distribution

Density and exact sampling on S^(D-1). Sampling follows Wood's rejection
scheme for the radial coordinate w = mu^T z, a uniform tangent direction, and
a Householder reflection that maps the north pole e_1 onto mu.

``kappa = inf`` is the Dirac tag: sampling returns mu exactly.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from probcon.errors import NumericalFailure
from probcon.special import log_vmf_norm_const

UNIT_TOL = 1e-9
MAX_REJECTION_ROUNDS = 1_000_000
HOUSEHOLDER_EPS = 1e-12


def as_unit_vector(coords: Union[np.ndarray, list], tol: float = UNIT_TOL) -> np.ndarray:
    """Validate that ``coords`` (shape ``(D,)`` or ``(N, D)``) has unit rows.

    Raises:
        ValueError: If any row norm differs from 1 by more than ``tol``
    """
    arr = np.asarray(coords, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] < 2:
        raise ValueError(f"unit vectors need shape (D,) or (N, D) with D >= 2, got {arr.shape}")
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError(f"not a unit vector (max norm error {np.max(np.abs(norms - 1.0)):.2e})")
    return arr


@dataclass(frozen=True)
class VmfParams:
    """Location and concentration of a vMF distribution.

    Attributes:
        mu: Unit vector of length D
        kappa: Positive concentration, or ``inf`` for a Dirac at mu
    """

    mu: np.ndarray
    kappa: float

    def __post_init__(self) -> None:
        mu = as_unit_vector(self.mu)
        if mu.ndim != 1:
            raise ValueError("VmfParams.mu must be a single vector")
        object.__setattr__(self, "mu", mu)
        kappa = float(self.kappa)
        if np.isnan(kappa) or kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        object.__setattr__(self, "kappa", kappa)

    @property
    def D(self) -> int:
        return int(self.mu.shape[0])

    @property
    def is_dirac(self) -> bool:
        return bool(np.isinf(self.kappa))


def vmf_logpdf(params: VmfParams, z: np.ndarray) -> Union[float, np.ndarray]:
    """ln C_D(kappa) + kappa mu^T z for one point ``(D,)`` or a batch ``(N, D)``.

    Raises:
        ValueError: On dimension mismatch or a Dirac posterior
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != params.D:
        raise ValueError(f"dimension mismatch: z has {z.shape[-1]}, mu has {params.D}")
    if params.is_dirac:
        raise ValueError("a Dirac posterior has no density")
    out = float(log_vmf_norm_const(params.D, params.kappa)) + params.kappa * (z @ params.mu)
    return float(out) if np.ndim(out) == 0 else out


def sample_radial(D: int, kappa: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw w = mu^T z for each finite concentration in ``kappa`` (Wood 1994).

    All pending entries are proposed together each round, so a seeded stream
    yields identical draws on every run.

    Raises:
        NumericalFailure: If entries are still pending after 10^6 rounds
    """
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    if np.any(~np.isfinite(kappa)) or np.any(kappa < 0):
        raise ValueError("sample_radial needs finite, non-negative concentrations")
    dm1 = D - 1.0
    b = dm1 / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + dm1 * dm1))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dm1 * np.log1p(-x0 * x0)

    w = np.empty_like(kappa)
    pending = np.arange(kappa.size)
    rounds = 0
    while pending.size:
        if rounds >= MAX_REJECTION_ROUNDS:
            raise NumericalFailure(
                f"vMF rejection sampler exhausted {MAX_REJECTION_ROUNDS} rounds "
                f"({pending.size} draws pending, D={D})"
            )
        rounds += 1
        bp, xp, cp, kp = b[pending], x0[pending], c[pending], kappa[pending]
        z = rng.beta(dm1 / 2.0, dm1 / 2.0, size=pending.size)
        cand = (1.0 - (1.0 + bp) * z) / (1.0 - (1.0 - bp) * z)
        log_u = np.log(rng.uniform(size=pending.size))
        accept = kp * cand + dm1 * np.log1p(-xp * cand) - cp >= log_u
        w[pending[accept]] = cand[accept]
        pending = pending[~accept]
    return np.clip(w, -1.0, 1.0)


def sample_tangent(D: int, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Uniform directions on S^(D-2), returned with trailing axis D - 1."""
    v = rng.standard_normal(size=(*shape, D - 1))
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(norms > 0, norms, 1.0)


def assemble_north(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Point (w, sqrt(1 - w^2) v) around the north pole e_1."""
    radius = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    return np.concatenate([w[..., None], radius[..., None] * v], axis=-1)


def householder_to(mu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the reflection H with H e_1 = mu to the rows of ``x``.

    H = I - 2 u u^T / (u^T u) with u = e_1 - mu; identity when mu = e_1.
    ``mu`` broadcasts against ``x`` along the leading axes.
    """
    u = -np.array(mu, dtype=float, copy=True)
    u[..., 0] += 1.0
    uu = np.sum(u * u, axis=-1, keepdims=True)
    ux = np.sum(u * x, axis=-1, keepdims=True)
    coef = np.where(uu > HOUSEHOLDER_EPS, 2.0 * ux / np.where(uu > HOUSEHOLDER_EPS, uu, 1.0), 0.0)
    return x - coef * u


def vmf_sample(
    params: VmfParams, rng: np.random.Generator, size: Optional[int] = None
) -> np.ndarray:
    """Exact draws from vMF(mu, kappa).

    Returns:
        Shape ``(D,)`` when ``size`` is ``None``, else ``(size, D)``; the
        Dirac tag returns copies of mu
    """
    n = 1 if size is None else int(size)
    if params.is_dirac:
        out = np.tile(params.mu, (n, 1))
    else:
        w = sample_radial(params.D, np.full(n, params.kappa), rng)
        v = sample_tangent(params.D, (n,), rng)
        out = householder_to(params.mu, assemble_north(w, v))
    return out[0] if size is None else out


def vmf_sample_batch(mu: np.ndarray, kappa: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row from vMF(mu_i, kappa_i); Dirac rows return mu_i.

    Args:
        mu: Unit rows, shape ``(N, D)``
        kappa: Concentrations, shape ``(N,)``
        rng: Random stream

    Returns:
        Samples of shape ``(N, D)``
    """
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    if mu.ndim != 2 or mu.shape[0] != kappa.shape[0]:
        raise ValueError(f"mu {mu.shape} and kappa {kappa.shape} do not align")
    D = mu.shape[1]
    out = mu.copy()
    finite = np.isfinite(kappa)
    if np.any(finite):
        w = sample_radial(D, kappa[finite], rng)
        v = sample_tangent(D, (int(finite.sum()),), rng)
        out[finite] = householder_to(mu[finite], assemble_north(w, v))
    return out
