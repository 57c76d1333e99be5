"""
Log-Space Bessel Functions and the vMF Normalizer

Numerically stable ln I_nu(x), the vMF log-normalizing constant ln C_D(kappa)
and the mean resultant length A_D(kappa) = I_{D/2}(kappa) / I_{D/2-1}(kappa).

Evaluation regions for ln I_nu(x), checked against an mpmath oracle in the
test suite:

* ``scipy.special.ive`` wherever it returns a normal (non-subnormal) finite
  value; this covers almost every (nu, x) met in practice.
* Power series summed in log space where ``ive`` underflows, which happens
  when x is small relative to nu.
* Debye uniform asymptotic expansion (four correction terms) where ``ive``
  overflows or returns NaN, i.e. when nu and x are both very large.

All public functions accept scalars or arrays and return floats for scalar
input.
"""

from typing import Union

import numpy as np
from scipy.special import gammaln, ive, logsumexp

ArrayLike = Union[float, np.ndarray]

# ive values below this are subnormal or close to it and lose precision.
IVE_FLOOR = 1e-290

# Continued fraction for A_D(kappa) below this kappa, ratio of scaled Bessel
# functions above it (the fraction needs O(kappa) terms).
CONTINUED_FRACTION_MAX_KAPPA = 1e3
CONTINUED_FRACTION_TOL = 1e-15
CONTINUED_FRACTION_MAX_TERMS = 200_000

LOG_2PI = float(np.log(2.0 * np.pi))


def _scalar_or_array(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def _log_series(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """ln I_nu(x) from the ascending series, all terms in log space."""
    out = np.empty_like(x)
    for i, (n, v) in enumerate(zip(nu, x)):
        # terms peak near m ~ v^2 / (4 nu) <= v / 2; cover the peak generously
        n_terms = int(np.ceil(v / 2.0 + 12.0 * np.sqrt(v + 1.0) + 40.0))
        m = np.arange(n_terms, dtype=float)
        log_terms = (2.0 * m + n) * np.log(v / 2.0) - gammaln(m + 1.0) - gammaln(m + n + 1.0)
        out[i] = logsumexp(log_terms)
    return out


def _log_debye(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """ln I_nu(x) from the Debye uniform asymptotic expansion (nu > 0)."""
    z = x / nu
    root = np.sqrt(1.0 + z * z)
    t = 1.0 / root
    eta = root - np.arcsinh(1.0 / z)
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = (
        t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2**2 - 425425.0 * t2**3) / 414720.0
    )
    u4 = (
        t2**2
        * (
            4465125.0
            - 94121676.0 * t2
            + 349922430.0 * t2**2
            - 446185740.0 * t2**3
            + 185910725.0 * t2**4
        )
        / 39813120.0
    )
    correction = 1.0 + u1 / nu + u2 / nu**2 + u3 / nu**3 + u4 / nu**4
    return nu * eta - 0.5 * np.log(2.0 * np.pi * nu) - 0.5 * np.log(root) + np.log(correction)


def log_bessel_i(nu: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Natural log of the modified Bessel function of the first kind.

    Args:
        nu: Order(s), nu >= 0
        x: Argument(s), x >= 0

    Returns:
        ln I_nu(x); -inf at x = 0 for nu > 0 and 0 at x = 0 for nu = 0

    Raises:
        ValueError: If any input is negative or NaN
    """
    scalar = np.ndim(nu) == 0 and np.ndim(x) == 0
    nu_arr, x_arr = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    nu_arr = nu_arr.ravel()
    x_arr = x_arr.ravel()
    if np.any(np.isnan(nu_arr)) or np.any(np.isnan(x_arr)):
        raise ValueError("log_bessel_i received NaN input")
    if np.any(nu_arr < 0) or np.any(x_arr < 0):
        raise ValueError("log_bessel_i is defined here for nu >= 0 and x >= 0 only")

    out = np.full(x_arr.shape, np.nan)
    at_zero = x_arr == 0
    out[at_zero] = np.where(nu_arr[at_zero] == 0, 0.0, -np.inf)
    at_inf = np.isinf(x_arr)
    out[at_inf] = np.inf

    todo = ~(at_zero | at_inf)
    with np.errstate(all="ignore"):
        scaled = ive(nu_arr, x_arr)
    good = todo & np.isfinite(scaled) & (scaled > IVE_FLOOR)
    out[good] = np.log(scaled[good]) + x_arr[good]

    rest = todo & ~good
    if np.any(rest):
        # ive underflows for small x / nu; it overflows or NaNs when both are huge
        small = rest & (x_arr * x_arr <= 16.0 * (nu_arr + 1.0) ** 2)
        large = rest & ~small
        if np.any(small):
            out[small] = _log_series(nu_arr[small], x_arr[small])
        if np.any(large):
            order_zero = large & (nu_arr == 0)
            out[order_zero] = x_arr[order_zero] - 0.5 * np.log(2.0 * np.pi * x_arr[order_zero])
            debye = large & (nu_arr > 0)
            out[debye] = _log_debye(nu_arr[debye], x_arr[debye])

    return _scalar_or_array(out.reshape(np.broadcast(nu, x).shape), scalar)


def _check_dimension(D: int) -> None:
    if int(D) != D or D < 2:
        raise ValueError(f"sphere dimension D must be an integer >= 2, got {D}")


def log_sphere_area(D: int) -> float:
    """ln of the surface area of S^(D-1) embedded in R^D."""
    _check_dimension(D)
    return float(np.log(2.0) + 0.5 * D * np.log(np.pi) - gammaln(0.5 * D))


def log_vmf_norm_const(D: int, kappa: ArrayLike) -> ArrayLike:
    """ln C_D(kappa) with C_D(kappa) = kappa^(D/2-1) / ((2 pi)^(D/2) I_{D/2-1}(kappa)).

    kappa = 0 returns the log density of the uniform distribution on the
    sphere and kappa = inf returns +inf (the Dirac limit).

    Raises:
        ValueError: If D < 2 or any kappa < 0
    """
    _check_dimension(D)
    scalar = np.ndim(kappa) == 0
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any(np.isnan(k)) or np.any(k < 0):
        raise ValueError("kappa must be non-negative")

    nu = 0.5 * D - 1.0
    out = np.empty_like(k)
    zero = k == 0
    out[zero] = -log_sphere_area(D)
    out[np.isinf(k)] = np.inf
    regular = ~zero & ~np.isinf(k)
    if np.any(regular):
        kr = k[regular]
        log_power = nu * np.log(kr) if nu > 0 else np.zeros_like(kr)
        out[regular] = log_power - 0.5 * D * LOG_2PI - np.asarray(log_bessel_i(nu, kr))
    return _scalar_or_array(out.reshape(np.shape(kappa)), scalar)


def _bessel_ratio_lentz(nu: float, x: np.ndarray) -> np.ndarray:
    """I_{nu+1}(x) / I_nu(x) by the modified Lentz method.

    Uses the Gauss continued fraction
    I_{nu+1}/I_nu = 1 / (b_1 + 1 / (b_2 + 1 / (b_3 + ...))), b_j = 2 (nu + j) / x.
    """
    tiny = 1e-300
    f = 2.0 * (nu + 1.0) / x
    c = f.copy()
    d = np.zeros_like(x)
    active = np.ones(x.shape, dtype=bool)
    for j in range(2, CONTINUED_FRACTION_MAX_TERMS):
        b = 2.0 * (nu + j) / x[active]
        d_new = b + d[active]
        d_new = np.where(d_new == 0.0, tiny, d_new)
        c_new = b + 1.0 / c[active]
        c_new = np.where(c_new == 0.0, tiny, c_new)
        d_new = 1.0 / d_new
        delta = c_new * d_new
        f[active] *= delta
        c[active] = c_new
        d[active] = d_new
        converged = np.abs(delta - 1.0) < CONTINUED_FRACTION_TOL
        idx = np.flatnonzero(active)
        active[idx[converged]] = False
        if not active.any():
            break
    return 1.0 / f


def mean_resultant_length(D: int, kappa: ArrayLike) -> ArrayLike:
    """A_D(kappa) = E[mu^T z] under vMF(mu, kappa) on S^(D-1).

    Equals -d/dkappa ln C_D(kappa). A_D(0) = 0 and A_D(inf) = 1.

    Raises:
        ValueError: If D < 2 or any kappa < 0
    """
    _check_dimension(D)
    scalar = np.ndim(kappa) == 0
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any(np.isnan(k)) or np.any(k < 0):
        raise ValueError("kappa must be non-negative")

    nu = 0.5 * D - 1.0
    out = np.zeros_like(k)
    out[np.isinf(k)] = 1.0
    fraction = (k > 0) & (k <= CONTINUED_FRACTION_MAX_KAPPA)
    if np.any(fraction):
        out[fraction] = _bessel_ratio_lentz(nu, k[fraction])
    far = (k > CONTINUED_FRACTION_MAX_KAPPA) & ~np.isinf(k)
    if np.any(far):
        kf = k[far]
        with np.errstate(all="ignore"):
            ratio = ive(nu + 1.0, kf) / ive(nu, kf)
        bad = ~np.isfinite(ratio) | (ratio <= 0)
        if np.any(bad):
            ratio[bad] = np.exp(
                np.asarray(log_bessel_i(nu + 1.0, kf[bad])) - np.asarray(log_bessel_i(nu, kf[bad]))
            )
        out[far] = ratio
    return _scalar_or_array(out.reshape(np.shape(kappa)), scalar)
