"""
Oracle Checks

Marginal tables over probe grids, the limiting contrastive objective built on
them, and a suite of numeric certificates: monotonicity of the marginal along
the diagonal and in rho, symmetry in the two posteriors, agreement with a
Monte-Carlo estimate, and minimality of the limiting objective at the true
posteriors.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from probcon.oracle.marginal import (
    OracleQuery,
    log_marginal_h_batch,
    marginal_h,
    mc_marginal_draws,
)
from probcon.special import log_vmf_norm_const
from probcon.utils.rng import named_stream
from probcon.vmf import VmfParams

MONOTONE_MARGIN = 1e-10
SYMMETRY_TOL = 1e-8


def log_pair_marginals(
    model: Any, anchors: np.ndarray, candidates: np.ndarray, kappa_pos: float
) -> np.ndarray:
    """ln h for every (anchor, candidate) pair under ``model``'s posteriors, ``(A, C)``."""
    mu_a, kappa_a = model.predict(np.asarray(anchors, dtype=float))
    mu_c, kappa_c = model.predict(np.asarray(candidates, dtype=float))
    rho = np.clip(mu_a @ mu_c.T, -1.0, 1.0)
    return log_marginal_h_batch(
        mu_a.shape[1], rho, kappa_a[:, None], kappa_c[None, :], kappa_pos
    )


def pair_marginals(
    model: Any, anchors: np.ndarray, candidates: np.ndarray, kappa_pos: float
) -> np.ndarray:
    """h for every (anchor, candidate) pair, ``(A, C)``."""
    return np.exp(log_pair_marginals(model, anchors, candidates, kappa_pos))


def limiting_loss(
    true_model: Any,
    encoder_model: Any,
    anchors: np.ndarray,
    candidates: np.ndarray,
    kappa_pos: float,
) -> float:
    """Cross-entropy between row-normalized true and encoder marginal tables.

    Each anchor's row of h values is normalized over the candidates into a
    distribution; the result is -mean_a sum_c P_ac ln Q_ac, which is smallest
    exactly when every row of Q matches P.
    """
    log_p = log_pair_marginals(true_model, anchors, candidates, kappa_pos)
    log_q = log_pair_marginals(encoder_model, anchors, candidates, kappa_pos)
    weights = softmax(log_p, axis=1)
    return float(-np.mean(np.sum(weights * log_softmax(log_q, axis=1), axis=1)))


def jitter_directions(mu: np.ndarray, degrees: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate each unit row by ``degrees`` towards a random orthogonal direction."""
    noise = rng.standard_normal(size=mu.shape)
    noise -= np.sum(noise * mu, axis=1, keepdims=True) * mu
    noise /= np.linalg.norm(noise, axis=1, keepdims=True)
    angle = np.deg2rad(degrees)
    return np.cos(angle) * mu + np.sin(angle) * noise


@dataclass
class PerturbedModel:
    """Posteriors of ``base`` with scaled concentrations and jittered locations.

    With ``target`` set, only observations equal to that row get the scaled
    concentration.
    """

    base: Any
    kappa_scale: float = 1.0
    jitter_degrees: float = 0.0
    seed: int = 0
    target: Optional[np.ndarray] = None

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mu, kappa = self.base.predict(x)
        if self.jitter_degrees:
            mu = jitter_directions(mu, self.jitter_degrees, named_stream(self.seed, "jitter"))
        if self.target is None:
            return mu, kappa * self.kappa_scale
        hit = np.all(np.atleast_2d(x) == np.asarray(self.target), axis=-1).reshape(kappa.shape)
        return mu, np.where(hit, kappa * self.kappa_scale, kappa)


@dataclass
class RotatedModel:
    """Posteriors of ``base`` with every location multiplied by ``rotation``."""

    base: Any
    rotation: np.ndarray

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mu, kappa = self.base.predict(x)
        return mu @ self.rotation.T, kappa


def random_rotation(D: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR decomposition of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal(size=(D, D)))
    return q * np.sign(np.diag(r))


def marginal_table(
    rhos: Sequence[float],
    kappas: Sequence[float],
    kappa_pluses: Sequence[float],
    kappa_pos: float,
    D: int,
) -> List[Dict[str, float]]:
    """h over the grid rhos x kappas x kappa_pluses, one row per point."""
    grid = np.meshgrid(
        np.asarray(rhos, dtype=float),
        np.asarray(kappas, dtype=float),
        np.asarray(kappa_pluses, dtype=float),
        indexing="ij",
    )
    rho, kappa, kappa_plus = (g.reshape(-1) for g in grid)
    log_h = log_marginal_h_batch(D, rho, kappa, kappa_plus, kappa_pos)
    return [
        {
            "rho": float(r),
            "kappa": float(k),
            "kappa_plus": float(kp),
            "kappa_pos": float(kappa_pos),
            "D": int(D),
            "h": float(np.exp(lh)),
            "log_h": float(lh),
        }
        for r, k, kp, lh in zip(rho, kappa, kappa_plus, log_h)
    ]


def _strictly_increasing(values: np.ndarray) -> Tuple[bool, float]:
    steps = np.diff(values)
    return bool(np.all(steps > MONOTONE_MARGIN)), float(np.min(steps))


def _check_diagonal(D: int, kappa_pos: float, n_grid: int) -> Dict[str, Any]:
    kappas = np.logspace(0.0, 3.0, n_grid)
    log_h = log_marginal_h_batch(D, 1.0, kappas, kappas, kappa_pos)
    passed, step = _strictly_increasing(log_h)
    return {"passed": passed, "min_log_step": step, "kappa_pos": kappa_pos}


def _check_rho(D: int, kappa: float, kappa_pos: float, n_grid: int) -> Dict[str, Any]:
    rhos = np.linspace(-1.0, 1.0, n_grid)
    log_h = log_marginal_h_batch(D, rhos, kappa, kappa, kappa_pos)
    passed, step = _strictly_increasing(log_h)
    return {"passed": passed, "min_log_step": step, "kappa": kappa, "kappa_pos": kappa_pos}


def _check_symmetry(D: int, rng: np.random.Generator, n_queries: int) -> Dict[str, Any]:
    rho = rng.uniform(-1.0, 1.0, size=n_queries)
    kappa = np.exp(rng.uniform(0.0, np.log(200.0), size=n_queries))
    kappa_plus = np.exp(rng.uniform(0.0, np.log(200.0), size=n_queries))
    kappa_pos = np.exp(rng.uniform(0.0, np.log(100.0), size=n_queries))
    forward = log_marginal_h_batch(D, rho, kappa, kappa_plus, kappa_pos)
    backward = log_marginal_h_batch(D, rho, kappa_plus, kappa, kappa_pos)
    error = float(np.max(np.abs(np.expm1(forward - backward))))
    return {"passed": error <= SYMMETRY_TOL, "max_relative_error": error}


def _check_monte_carlo(
    query: OracleQuery, samples: int, rng: np.random.Generator
) -> Dict[str, Any]:
    mu = np.zeros(query.D)
    mu[0] = 1.0
    mu_plus = np.zeros(query.D)
    mu_plus[0], mu_plus[1] = query.rho, np.sqrt(max(0.0, 1.0 - query.rho**2))
    ref, pos = VmfParams(mu, query.kappa), VmfParams(mu_plus, query.kappa_plus)
    draws = mc_marginal_draws(ref, pos, query.kappa_pos, samples, rng)
    estimate = float(np.mean(draws))
    stderr = float(np.std(draws, ddof=1) / np.sqrt(samples))
    exact = marginal_h(query)
    return {
        "passed": abs(estimate - exact) <= 3.0 * stderr,
        "quadrature": exact,
        "monte_carlo": estimate,
        "standard_error": stderr,
    }


def _check_minimality(
    process: Any, kappa_pos: float, rng: np.random.Generator, n_side: int, n_perturbed: int
) -> Dict[str, Any]:
    anchors = rng.uniform(size=(n_side, process.D))
    candidates = rng.uniform(size=(n_side, process.D))
    truth = limiting_loss(process, process, anchors, candidates, kappa_pos)
    competitors: Dict[str, PerturbedModel] = {}
    if not getattr(process, "is_dirac", False):
        competitors["kappa_x0.8"] = PerturbedModel(process, kappa_scale=0.8)
        competitors["kappa_x1.2"] = PerturbedModel(process, kappa_scale=1.2)
    for seed in range(n_perturbed - len(competitors)):
        competitors[f"mu_jitter_5deg_{seed}"] = PerturbedModel(
            process, jitter_degrees=5.0, seed=seed
        )
    losses = {
        name: limiting_loss(process, model, anchors, candidates, kappa_pos)
        for name, model in competitors.items()
    }
    single: Dict[str, float] = {}
    if not getattr(process, "is_dirac", False):
        for scale in (0.8, 1.2):
            model = PerturbedModel(process, kappa_scale=scale, target=anchors[0])
            single[f"kappa_x{scale}_one_input"] = limiting_loss(
                process, model, anchors, candidates, kappa_pos
            )
    return {
        "passed": all(value > truth for value in [*losses.values(), *single.values()]),
        "truth": truth,
        "perturbed": losses,
        "single_input": single,
    }


def run_oracle_checks(
    D: int = 10,
    kappa_pos_values: Sequence[float] = (5.0, 20.0, 100.0),
    n_grid: int = 50,
    mc_samples: int = 200_000,
    seed: int = 0,
    process: Optional[Any] = None,
) -> Dict[str, Any]:
    """Run the numeric certificates and return a JSON-ready pass/fail report.

    Args:
        D: Latent dimension of the marginal checks
        kappa_pos_values: Positive-pair concentrations to certify
        n_grid: Points of the monotonicity grids
        mc_samples: Draws of the Monte-Carlo cross-check
        seed: Seed of the random queries
        process: Generative process for the minimality check (skipped if ``None``)

    Returns:
        ``{"passed": bool, "checks": {name: {...}}}``
    """
    rng = named_stream(seed, "oracle-checks")
    checks: Dict[str, Dict[str, Any]] = {}
    for kappa_pos in kappa_pos_values:
        checks[f"diagonal_increasing_kpos{kappa_pos:g}"] = _check_diagonal(D, kappa_pos, n_grid)
        checks[f"rho_increasing_kpos{kappa_pos:g}"] = _check_rho(D, 20.0, kappa_pos, n_grid)
    checks["symmetry"] = _check_symmetry(D, rng, 20)

    limit = float(np.exp(log_marginal_h_batch(D, 0.3, 20.0, 30.0, 1e-10)))
    uniform = float(np.exp(log_vmf_norm_const(D, 0.0)))
    checks["vanishing_kappa_pos"] = {
        "passed": abs(limit / uniform - 1.0) < 1e-8,
        "value": limit,
        "uniform_density": uniform,
    }

    query = OracleQuery(rho=0.5, kappa=20.0, kappa_plus=20.0, kappa_pos=20.0, D=D)
    checks["monte_carlo_agreement"] = _check_monte_carlo(query, mc_samples, rng)

    if process is not None:
        checks["minimality"] = _check_minimality(
            process, float(kappa_pos_values[0]), rng, n_side=10, n_perturbed=20
        )

    return {"passed": all(check["passed"] for check in checks.values()), "checks": checks}
