"""
Identifiability Metrics

Compares encoder posteriors with the ground truth in a way that ignores the
global rotation the encoder is only identified up to: locations are compared
through pairwise dot products mu(x_1)^T mu(x_2), concentrations directly.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Protocol, Tuple

import numpy as np
from scipy import stats

from probcon.utils.report_writer import embed_provenance
from probcon.utils.rng import named_stream

DEFAULT_PAIR_BUDGET = 1_000_000

KAPPA_TARGETS = {
    "vmf": "kappa",
    "gaussian": "inverse-variance",
    "laplace": "inverse-diversity",
    "dirac": "none",
}


class PosteriorModel(Protocol):
    """Anything mapping observations to vMF posterior parameters."""

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...


@dataclass
class MetricsReport:
    """Result of ``evaluate``.

    Attributes:
        rmse_mu: RMSE between predicted and true pairwise dot products
        rank_mu: Spearman correlation of the same
        rmse_kappa: RMSE between predicted and target concentrations (NaN for Dirac)
        rank_kappa: Spearman correlation of the same (NaN for Dirac)
        n_samples: Probe observations
        n_pairs: Probe pairs compared
        marginal_uniformity: Norm of the mean predicted location
        median_kappa_hat: Median predicted concentration
        kappa_target: What the concentrations were compared against
    """

    rmse_mu: float
    rank_mu: float
    rmse_kappa: float
    rank_kappa: float
    n_samples: int
    n_pairs: int
    marginal_uniformity: float
    median_kappa_hat: float
    kappa_target: str = "kappa"


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation with average ranks for ties.

    Returns:
        The correlation in [-1, 1], or NaN when either input is constant

    Raises:
        ValueError: If the lengths differ or are below 2
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size or a.size < 2:
        raise ValueError(f"spearman needs equal lengths >= 2, got {a.size} and {b.size}")
    rank_a, rank_b = stats.rankdata(a), stats.rankdata(b)
    rank_a -= rank_a.mean()
    rank_b -= rank_b.mean()
    denom = np.sqrt(np.sum(rank_a * rank_a) * np.sum(rank_b * rank_b))
    if denom == 0.0:
        return float("nan")
    return float(np.clip(np.sum(rank_a * rank_b) / denom, -1.0, 1.0))


def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def sample_pairs(
    n: int, pair_budget: Optional[int], rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """All index pairs i < j, or ``pair_budget`` uniformly drawn pairs with i != j."""
    total = n * (n - 1) // 2
    if pair_budget is None or total <= pair_budget:
        return np.triu_indices(n, k=1)
    first = rng.integers(0, n, size=pair_budget)
    second = (first + rng.integers(1, n, size=pair_budget)) % n
    return first, second


def evaluate(
    process: Any,
    encoder: PosteriorModel,
    n_samples: int = 10_000,
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET,
    rng: Optional[np.random.Generator] = None,
    probes: Optional[np.ndarray] = None,
) -> MetricsReport:
    """Rotation-invariant comparison of an encoder with the generative process.

    Args:
        process: Ground-truth ``GenerativeProcess``
        encoder: Model under test
        n_samples: Probe observations drawn when ``probes`` is not given
        pair_budget: Pairs compared; ``None`` compares all pairs
        rng: Stream for probes and pair subsampling
        probes: Fixed probe observations ``(n, D)``

    Returns:
        The metrics report
    """
    if rng is None:
        rng = named_stream(0, "metrics")
    if probes is None:
        if n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {n_samples}")
        probes = rng.uniform(size=(n_samples, process.D))
    probes = np.asarray(probes, dtype=float)
    n = probes.shape[0]

    mu, kappa = process.predict(probes)
    mu_hat, kappa_hat = encoder.predict(probes)

    first, second = sample_pairs(n, pair_budget, rng)
    dots = np.sum(mu[first] * mu[second], axis=1)
    dots_hat = np.sum(mu_hat[first] * mu_hat[second], axis=1)

    if np.all(np.isinf(kappa)):
        rmse_kappa, rank_kappa = float("nan"), float("nan")
    else:
        rmse_kappa, rank_kappa = _rmse(kappa_hat, kappa), spearman(kappa_hat, kappa)

    return MetricsReport(
        rmse_mu=_rmse(dots_hat, dots),
        rank_mu=spearman(dots_hat, dots),
        rmse_kappa=rmse_kappa,
        rank_kappa=rank_kappa,
        n_samples=int(n),
        n_pairs=int(dots.size),
        marginal_uniformity=float(np.linalg.norm(mu_hat.mean(axis=0))),
        median_kappa_hat=float(np.median(kappa_hat)),
        kappa_target=KAPPA_TARGETS.get(getattr(process, "family", "vmf"), "kappa"),
    )


def report_to_json(report: MetricsReport, config: Any, seed: int) -> Dict[str, Any]:
    """Report fields plus the resolved config and seed."""
    return embed_provenance(asdict(report), config, seed)
