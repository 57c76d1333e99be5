"""
Credible Intervals and Retrieval

A level-p credible interval of vMF(mu, kappa) is the cap {z : z^T mu >= t}
holding posterior mass p; t is the (1 - p) quantile of the radial law. The
cap is the highest-density region because the density grows with z^T mu.

Credible-interval retrieval returns the corpus items whose mode falls inside
the query's interval. Only modes are compared; the items' own uncertainty
plays no part.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from probcon.genproc import sample_posterior
from probcon.utils.report_writer import ReportWriter, read_csv_table
from probcon.utils.rng import named_stream
from probcon.vmf import RadialLaw, VmfParams, radial_quantile
from probcon.vmf.radial import radial_quantile_batch

# rounding slack for modes that coincide with the query
DOT_TOL = 1e-12


def _check_level(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"credible level must lie in (0, 1], got {p}")
    return p


def ci_threshold(kappa: float, p: float, D: int) -> float:
    """Threshold t with P(z^T mu >= t) = p under vMF(mu, kappa) in R^D.

    Args:
        kappa: Concentration (``inf`` gives t = 1)
        p: Credible level in (0, 1]
        D: Dimension

    Returns:
        The threshold in [-1, 1]

    Raises:
        ValueError: If p is outside (0, 1], kappa is negative or D < 2
    """
    p = _check_level(p)
    if np.isnan(kappa) or kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    if p == 1.0:
        return -1.0
    if np.isinf(kappa):
        return 1.0
    return radial_quantile(RadialLaw(D, float(kappa)), 1.0 - p)


def ci_thresholds(kappa: np.ndarray, p: float, D: int) -> np.ndarray:
    """Vectorized ``ci_threshold`` over an array of concentrations."""
    p = _check_level(p)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(np.isnan(kappa)) or np.any(kappa < 0):
        raise ValueError("kappa must be non-negative")
    if p == 1.0:
        return np.full(kappa.shape, -1.0)
    out = np.ones(kappa.shape)
    finite = np.isfinite(kappa)
    if np.any(finite):
        out[finite] = radial_quantile_batch(D, kappa[finite], 1.0 - p)
    return out


@dataclass(frozen=True)
class CredibleInterval:
    """Spherical cap {z : z^T center >= threshold} at level ``level``."""

    center: np.ndarray
    threshold: float
    level: float

    def contains(self, z: np.ndarray) -> Union[bool, np.ndarray]:
        """Membership of one latent ``(D,)`` or a batch ``(N, D)``."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.center.shape[0]:
            raise ValueError(f"expected latents of dimension {self.center.shape[0]}")
        inside = z @ self.center >= self.threshold
        return bool(inside) if z.ndim == 1 else inside


def credible_interval(params: VmfParams, p: float) -> CredibleInterval:
    return CredibleInterval(
        center=params.mu, threshold=ci_threshold(params.kappa, p, params.D), level=float(p)
    )


@dataclass
class CorpusItem:
    id: str
    posterior: VmfParams


@dataclass
class EmbeddedCorpus:
    """Embedded observations: one id and one posterior per item, all of the same D."""

    items: List[CorpusItem] = field(default_factory=list)

    def __post_init__(self) -> None:
        dims = {item.posterior.D for item in self.items}
        if len(dims) > 1:
            raise ValueError(f"corpus mixes dimensions {sorted(dims)}")
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus ids must be unique")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def D(self) -> int:
        if not self.items:
            raise ValueError("empty corpus has no dimension")
        return self.items[0].posterior.D

    @property
    def ids(self) -> List[str]:
        return [item.id for item in self.items]

    def modes(self) -> np.ndarray:
        return np.stack([item.posterior.mu for item in self.items])

    def kappas(self) -> np.ndarray:
        return np.array([item.posterior.kappa for item in self.items])

    @classmethod
    def from_model(
        cls, model: Any, x: np.ndarray, ids: Optional[Sequence[str]] = None
    ) -> "EmbeddedCorpus":
        """Embed observations ``x`` with ``model.predict``; ids default to row numbers."""
        mu, kappa = model.predict(np.asarray(x, dtype=float))
        if ids is None:
            ids = [str(i) for i in range(mu.shape[0])]
        if len(ids) != mu.shape[0]:
            raise ValueError(f"got {len(ids)} ids for {mu.shape[0]} observations")
        return cls(
            [CorpusItem(str(i), VmfParams(mu=m, kappa=float(k))) for i, m, k in zip(ids, mu, kappa)]
        )

    def to_csv(self, path: Union[str, Path], config: Any = None, seed: int = 0) -> Path:
        """Write ``id, mu_0 .. mu_{D-1}, kappa`` rows with a provenance comment."""
        path = Path(path)
        header = ["id", *(f"mu_{d}" for d in range(self.D)), "kappa"]
        rows = [
            [item.id, *item.posterior.mu.tolist(), item.posterior.kappa] for item in self.items
        ]
        writer = ReportWriter(path.parent, config if config is not None else {}, seed)
        return writer.save_csv(path.name, rows, header)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "EmbeddedCorpus":
        table = read_csv_table(Path(path))
        items = []
        for row in table:
            D = sum(1 for key in row if key.startswith("mu_"))
            mu = np.array([float(row[f"mu_{d}"]) for d in range(D)])
            items.append(CorpusItem(row["id"], VmfParams(mu=mu, kappa=float(row["kappa"]))))
        return cls(items)


def cii_retrieve(query: VmfParams, corpus: EmbeddedCorpus, p: float) -> List[str]:
    """Ids whose mode lies in the query's level-p interval, by descending dot product."""
    return [hit["id"] for hit in cii_hits(query, corpus, p)]


def cii_hits(query: VmfParams, corpus: EmbeddedCorpus, p: float) -> List[Dict[str, Any]]:
    """Retrieval hits as ``{"id", "dot", "t", "p"}`` records."""
    if not len(corpus):
        return []
    if corpus.D != query.D:
        raise ValueError(f"query has D={query.D}, corpus has D={corpus.D}")
    t = ci_threshold(query.kappa, p, query.D)
    dots = corpus.modes() @ query.mu
    order = np.argsort(-dots, kind="stable")
    ids = corpus.ids
    return [
        {"id": ids[i], "dot": float(dots[i]), "t": t, "p": float(p)}
        for i in order
        if dots[i] >= t - DOT_TOL
    ]


def coverage_check(
    process: Any,
    encoder: Any,
    p: float,
    n_trials: int,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Fraction of true latents that land in the encoder's level-p interval.

    Each trial draws an observation x, a latent z from the process posterior
    at x, and tests z against the interval built from ``encoder.predict(x)``.
    """
    p = _check_level(p)
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if rng is None:
        rng = named_stream(0, "coverage")
    x = rng.uniform(size=(n_trials, process.D))
    z = sample_posterior(process, x, rng)
    mu_hat, kappa_hat = encoder.predict(x)
    if mu_hat.shape[1] != process.D:
        raise ValueError(f"encoder latents have D={mu_hat.shape[1]}, process has D={process.D}")
    t = ci_thresholds(kappa_hat, p, process.D)
    return float(np.mean(np.sum(z * mu_hat, axis=1) >= t - DOT_TOL))
