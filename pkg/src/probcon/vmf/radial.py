"""
Radial Marginal of the vMF Distribution

The projection t = mu^T z of z ~ vMF(mu, kappa) on S^(D-1) has density

    f(t) = C_D(kappa) |S^(D-2)| (1 - t^2)^((D-3)/2) exp(kappa t),  t in [-1, 1].

Two evaluation paths are provided:

* ``radial_cdf`` / ``radial_quantile`` for single values, using adaptive
  ``scipy.integrate.quad`` with algebraic endpoint weights and ``brentq``.
* ``radial_log_masses`` and friends for arrays, using fixed Gauss-Jacobi
  panels. A panel either carries the (1 -+ t)^alpha endpoint factor as its
  weight or is cut where exp(kappa t) has decayed by e^-40 relative to the
  panel's peak, so both the head mass F(w) and the tail mass 1 - F(w) stay
  accurate in log space far into either tail.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import gammaln, roots_jacobi

from probcon.special import log_vmf_norm_const, mean_resultant_length

ArrayLike = Union[float, np.ndarray]

QUAD_NODES = 80
HEAD_SPAN = 30.0
DECAY_CUT = 40.0
TINY_HEAD = 1e-3
BISECTION_STEPS = 64


@dataclass(frozen=True)
class RadialLaw:
    """Law of mu^T z under vMF(mu, kappa) in R^D."""

    D: int
    kappa: float

    def __post_init__(self) -> None:
        if int(self.D) != self.D or self.D < 2:
            raise ValueError(f"D must be an integer >= 2, got {self.D}")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError(f"radial law needs a finite kappa >= 0, got {self.kappa}")

    @property
    def alpha(self) -> float:
        return 0.5 * (self.D - 3)


def _log_subsphere_area(D: int) -> float:
    """ln |S^(D-2)|, the area of the tangent sphere (2 for D = 2)."""
    return float(np.log(2.0) + 0.5 * (D - 1) * np.log(np.pi) - gammaln(0.5 * (D - 1)))


def _log_norm(D: int, kappa: ArrayLike) -> np.ndarray:
    """ln of the factor N with f(t) = N (1 - t^2)^alpha exp(kappa (t - 1))."""
    k = np.asarray(kappa, dtype=float)
    return np.asarray(log_vmf_norm_const(D, k)) + _log_subsphere_area(D) + k


def radial_log_pdf(law: RadialLaw, t: ArrayLike) -> ArrayLike:
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [-1, 1]")
    with np.errstate(divide="ignore"):
        algebraic = law.alpha * np.log1p(-t_arr * t_arr) if law.alpha != 0 else 0.0
    out = _log_norm(law.D, law.kappa) + algebraic + law.kappa * (t_arr - 1.0)
    return float(out) if np.ndim(t) == 0 else out


def radial_pdf(law: RadialLaw, t: ArrayLike) -> ArrayLike:
    """Density of mu^T z; endpoints give 0 (D > 3), finite (D = 3) or inf (D = 2)."""
    out = np.exp(radial_log_pdf(law, t))
    return float(out) if np.ndim(t) == 0 else out


def radial_cdf(law: RadialLaw, t: float) -> float:
    """P(mu^T z <= t) by adaptive quadrature (relative tolerance 1e-12)."""
    if not -1.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [-1, 1], got {t}")
    if t == -1.0:
        return 0.0
    if t == 1.0:
        return 1.0
    alpha, kappa = law.alpha, law.kappa
    log_norm = float(_log_norm(law.D, kappa))
    options = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    if t <= 0.0:
        # head, (1 + s)^alpha carried by the weight; scaled by exp(kappa (t - 1))
        head, _ = quad(
            lambda s: np.exp(kappa * (s - t)) * (1.0 - s) ** alpha,
            -1.0,
            t,
            weight="alg",
            wvar=(alpha, 0.0),
            **options,
        )
        if head <= 0.0:
            return 0.0
        return float(min(1.0, np.exp(log_norm + kappa * (t - 1.0) + np.log(head))))
    tail, _ = quad(
        lambda s: np.exp(kappa * (s - 1.0)) * (1.0 + s) ** alpha,
        t,
        1.0,
        weight="alg",
        wvar=(0.0, alpha),
        **options,
    )
    if tail <= 0.0:
        return 1.0
    return float(max(0.0, -np.expm1(log_norm + np.log(tail))))


def radial_quantile(law: RadialLaw, p: float) -> float:
    """Inverse of ``radial_cdf`` by Brent's method (|dt| <= 1e-13)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return -1.0
    if p == 1.0:
        return 1.0
    return float(brentq(lambda t: radial_cdf(law, t) - p, -1.0, 1.0, xtol=1e-13, maxiter=500))


# --------------------------------------------------------------------------
# vectorized path


@lru_cache(maxsize=64)
def _jacobi_rule(alpha: float, beta: float, n: int = QUAD_NODES) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_jacobi(n, alpha, beta)
    return nodes, weights


def _tail_cut(alpha: float) -> float:
    """Span in kappa (1 - t) beyond which the tail integrand is negligible."""
    if alpha <= 0:
        return DECAY_CUT
    return alpha + 12.0 * np.sqrt(alpha + 1.0) + DECAY_CUT


def _panel(
    D: int,
    kappa: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    side: str,
    shift: Union[None, np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """ln |I| and sign(I) for I = int_lo^hi (1 - t^2)^alpha e^(kappa (t - 1)) (t - shift) dt.

    ``side="right"`` requires hi = 1 and carries (1 - t)^alpha in the weight,
    ``side="left"`` requires lo = -1 and carries (1 + t)^alpha, ``"none"``
    is plain Gauss-Legendre. Without ``shift`` the moment factor is 1.
    """
    alpha = 0.5 * (D - 3)
    if side == "right":
        nodes, weights = _jacobi_rule(alpha, 0.0)
    elif side == "left":
        nodes, weights = _jacobi_rule(0.0, alpha)
    else:
        nodes, weights = _jacobi_rule(0.0, 0.0)

    half = 0.5 * (hi - lo)
    t = lo[:, None] + half[:, None] * (1.0 + nodes[None, :])
    log_g = kappa[:, None] * (t - 1.0)
    if alpha != 0:
        with np.errstate(divide="ignore"):
            if side == "right":
                log_g = log_g + alpha * np.log1p(t)
            elif side == "left":
                log_g = log_g + alpha * np.log1p(-t)
            else:
                log_g = log_g + alpha * np.log1p(-t * t)
    with np.errstate(divide="ignore"):
        log_half = np.log(half)
    log_scale = (alpha + 1.0) * log_half if side != "none" else log_half

    terms = np.log(weights)[None, :] + log_g
    peak = np.max(terms, axis=1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    scaled = np.exp(terms - peak)
    if shift is not None:
        scaled = scaled * (t - shift[:, None])
    total = np.sum(scaled, axis=1)
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(total)) + peak[:, 0] + log_scale
    return log_abs, np.sign(total)


def _broadcast_inputs(D: int, kappa: ArrayLike, w: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    if int(D) != D or D < 2:
        raise ValueError(f"D must be an integer >= 2, got {D}")
    k, t = np.broadcast_arrays(np.asarray(kappa, dtype=float), np.asarray(w, dtype=float))
    k, t = k.ravel().copy(), t.ravel().copy()
    if np.any(~np.isfinite(k)) or np.any(k < 0):
        raise ValueError("kappa must be finite and non-negative")
    if np.any(np.isnan(t)) or np.any(t < -1.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [-1, 1]")
    return k, t


class _Plan:
    """Which panel computes which mass, per element."""

    def __init__(self, D: int, kappa: np.ndarray, w: np.ndarray):
        alpha = 0.5 * (D - 3)
        self.full_head = (w <= 0.0) & (kappa * (1.0 + w) <= HEAD_SPAN)
        cut = _tail_cut(alpha)
        with np.errstate(divide="ignore"):
            cut_point = np.where(kappa > 0, 1.0 - cut / np.where(kappa > 0, kappa, 1.0), -1.0)
        self.tail_lo = np.maximum(w, cut_point)
        # decay rate of f to the left of w, used for the cut head panel
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = kappa - 2.0 * alpha * w / (1.0 - w * w)
        self.slope = np.where(np.isfinite(slope), slope, 0.0)
        positive = self.slope > 0
        reach = DECAY_CUT / np.where(positive, self.slope, 1.0)
        self.head_lo = np.where(positive, np.maximum(-1.0, w - reach), -1.0)


def _head_panel(
    D: int, kappa: np.ndarray, w: np.ndarray, lo: np.ndarray, shift: Union[None, np.ndarray]
) -> Tuple[np.ndarray, np.ndarray]:
    """Head integral over [lo, w], weighted when the panel reaches -1."""
    log_abs = np.empty_like(w)
    sign = np.empty_like(w)
    reaches = lo <= -1.0
    for mask, side in ((reaches, "left"), (~reaches, "none")):
        if np.any(mask):
            lo_m = np.full(int(mask.sum()), -1.0) if side == "left" else lo[mask]
            shift_m = None if shift is None else shift[mask]
            log_abs[mask], sign[mask] = _panel(D, kappa[mask], lo_m, w[mask], side, shift_m)
    return log_abs, sign


def radial_log_masses(D: int, kappa: ArrayLike, w: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """ln F(w) and ln (1 - F(w)) for arrays of (kappa, w).

    Returns:
        ``(log_head, log_tail)`` as flat arrays
    """
    k, t = _broadcast_inputs(D, kappa, w)
    log_norm = _log_norm(D, k)
    log_head = np.full(t.shape, -np.inf)
    log_tail = np.full(t.shape, -np.inf)
    log_head[t >= 1.0] = 0.0
    log_tail[t <= -1.0] = 0.0
    inner = (t > -1.0) & (t < 1.0)
    plan = _Plan(D, k, t)

    full = inner & plan.full_head
    if np.any(full):
        head, _ = _panel(D, k[full], np.full(int(full.sum()), -1.0), t[full], "left")
        log_head[full] = np.minimum(head + log_norm[full], 0.0)
        log_tail[full] = np.log1p(-np.exp(log_head[full]))

    rest = inner & ~plan.full_head
    if np.any(rest):
        tail, _ = _panel(D, k[rest], plan.tail_lo[rest], np.ones(int(rest.sum())), "right")
        log_tail[rest] = np.minimum(tail + log_norm[rest], 0.0)
        log_head[rest] = np.log1p(-np.exp(log_tail[rest]))
        tiny = np.zeros(t.shape, dtype=bool)
        tiny[rest] = (log_head[rest] < np.log(TINY_HEAD)) & (plan.slope[rest] > 0)
        if np.any(tiny):
            head, _ = _head_panel(D, k[tiny], t[tiny], plan.head_lo[tiny], None)
            log_head[tiny] = head + log_norm[tiny]
    return log_head, log_tail


def radial_cdf_batch(D: int, kappa: ArrayLike, t: ArrayLike) -> np.ndarray:
    """Vectorized ``radial_cdf`` with the shape of ``broadcast(kappa, t)``."""
    shape = np.broadcast(np.asarray(kappa), np.asarray(t)).shape
    log_head, _ = radial_log_masses(D, kappa, t)
    return np.exp(log_head).reshape(shape)


def _bisect(D: int, kappa: np.ndarray, target: np.ndarray, use_tail: np.ndarray) -> np.ndarray:
    """Solve ln F(t) = target (or ln(1 - F(t)) = target where ``use_tail``)."""
    lo = np.full(kappa.shape, -1.0)
    hi = np.full(kappa.shape, 1.0)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        log_head, log_tail = radial_log_masses(D, kappa, mid)
        below = np.where(use_tail, log_tail > target, log_head < target)
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def radial_quantile_batch(D: int, kappa: ArrayLike, p: ArrayLike) -> np.ndarray:
    """Vectorized ``radial_quantile`` by bisection on the log masses."""
    shape = np.broadcast(np.asarray(kappa), np.asarray(p)).shape
    k, prob = np.broadcast_arrays(np.asarray(kappa, dtype=float), np.asarray(p, dtype=float))
    k, prob = k.ravel(), prob.ravel()
    if np.any(prob < 0.0) or np.any(prob > 1.0):
        raise ValueError("p must lie in [0, 1]")
    use_tail = prob > 0.5
    with np.errstate(divide="ignore"):
        target = np.where(use_tail, np.log1p(-prob), np.log(prob))
    out = _bisect(D, k, target, use_tail)
    out[prob == 0.0] = -1.0
    out[prob == 1.0] = 1.0
    return out.reshape(shape)


def radial_transport(
    D: int, kappa_from: ArrayLike, kappa_to: ArrayLike, w: ArrayLike
) -> np.ndarray:
    """Map w ~ RadialLaw(D, kappa_from) to the same CDF level under kappa_to.

    This is the common-random-numbers map: drawing u = F(w; kappa_from) once
    and setting w' = F^-1(u; kappa_to).
    """
    shape = np.broadcast(np.asarray(kappa_from), np.asarray(kappa_to), np.asarray(w)).shape
    arrays = (np.asarray(v, dtype=float) for v in (kappa_from, kappa_to, w))
    k_from, k_to, t = (a.ravel() for a in np.broadcast_arrays(*arrays))
    log_head, log_tail = radial_log_masses(D, k_from, t)
    use_tail = log_tail < log_head
    target = np.where(use_tail, log_tail, log_head)
    out = _bisect(D, np.array(k_to, dtype=float), target, use_tail)
    same = k_from == k_to
    out[same] = t[same]
    return out.reshape(shape)


def radial_kappa_derivative(D: int, kappa: ArrayLike, w: ArrayLike) -> np.ndarray:
    """Implicit derivative dw/dkappa at a fixed CDF level.

    From F(w(kappa); kappa) = u and df/dkappa = f (t - A_D(kappa)):

        dw/dkappa = int_w^1 f(t) (t - A) dt / f(w) = -int_-1^w f(t) (t - A) dt / f(w).

    The head form is used where the head mass is small, the tail form
    elsewhere, so the signed integral never comes from a large cancellation.
    """
    shape = np.broadcast(np.asarray(kappa), np.asarray(w)).shape
    k, t = _broadcast_inputs(D, kappa, w)
    alpha = 0.5 * (D - 3)
    t = np.maximum(t, -1.0 + 1e-12)
    out = np.zeros(t.shape)
    inner = t < 1.0
    if not np.any(inner):
        return out.reshape(shape)

    k_in, t_in = k[inner], t[inner]
    mean_t = np.asarray(mean_resultant_length(D, k_in), dtype=float).reshape(-1)
    plan = _Plan(D, k_in, t_in)
    log_head, _ = radial_log_masses(D, k_in, t_in)
    tiny_head = (log_head < np.log(TINY_HEAD)) & (plan.slope > 0) & (t_in < mean_t)
    use_head = plan.full_head | tiny_head

    log_abs = np.empty_like(t_in)
    sign = np.empty_like(t_in)
    if np.any(use_head):
        lo = np.where(plan.full_head[use_head], -1.0, plan.head_lo[use_head])
        head_abs, head_sign = _head_panel(D, k_in[use_head], t_in[use_head], lo, mean_t[use_head])
        log_abs[use_head], sign[use_head] = head_abs, -head_sign
    tail = ~use_head
    if np.any(tail):
        log_abs[tail], sign[tail] = _panel(
            D, k_in[tail], plan.tail_lo[tail], np.ones(int(tail.sum())), "right", mean_t[tail]
        )

    with np.errstate(divide="ignore"):
        log_density = (alpha * np.log1p(-t_in * t_in) if alpha != 0 else 0.0) + k_in * (t_in - 1.0)
    out[inner] = sign * np.exp(log_abs - log_density)
    return out.reshape(shape)
