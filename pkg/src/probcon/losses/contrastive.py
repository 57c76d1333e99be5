"""
Contrastive Objectives over Probabilistic Embeddings

All four objectives score a reference against its positive and M negatives
with the same weighting,

    fraction = e^{s+} / ((1/M) e^{s+} + (1/M) sum_m e^{s-_m}),

which lies in (0, M]:

* ``mcinfonce``: s = kappa_pos z^T z' on K reparametrized samples per
  posterior; the K fractions are averaged in linear space before the log.
  The reference sample z_k is shared by the positive and every negative of
  draw k.
* ``elk``: s = kappa_pos times the log expected likelihood kernel, no sampling.
* ``infonce``: s = kappa_pos mu^T mu', point embeddings only.
* ``hib``: sigmoid match probabilities a z^T z' + b averaged over K sample
  pairs, with the logs clamped at 1e-12.

With M = 0 every reference gets one other batch element as its single
negative (see ``in_batch_negative_index``).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from probcon.autodiff import (
    Tensor,
    as_tensor,
    clip,
    concat,
    dot,
    exp,
    index_select,
    log,
    logsumexp,
    mean,
    reshape,
    sigmoid,
    tsum,
)
from probcon.losses.kernels import el_vmf_log_kernel_tensor
from probcon.vmf import ReparamNoise, vmf_sample_reparam

LOSS_KINDS = ("mcinfonce", "hib", "elk", "infonce")
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters of a contrastive objective.

    Attributes:
        kappa_pos: Positive-pair concentration, the temperature analog
        K: Monte-Carlo samples per posterior
        M: Negatives per reference; 0 uses in-batch negatives
        loss_kind: ``mcinfonce``, ``hib``, ``elk`` or ``infonce``
        hib_a: HIB slope
        hib_b: HIB offset
    """

    kappa_pos: float = 20.0
    K: int = 16
    M: int = 1
    loss_kind: str = "mcinfonce"
    hib_a: float = 1.0
    hib_b: float = 0.0

    def __post_init__(self) -> None:
        if not self.kappa_pos > 0:
            raise ValueError(f"kappa_pos must be positive, got {self.kappa_pos}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.M < 0:
            raise ValueError(f"M must be >= 0, got {self.M}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}; choose from {LOSS_KINDS}")


@dataclass
class EmbeddingPosterior:
    """Encoder posteriors Q(z | x) for N inputs as tape tensors.

    Attributes:
        mu: Unit locations, ``(N, D)``
        kappa: Concentrations, ``(N,)``
    """

    mu: Tensor
    kappa: Tensor

    def __post_init__(self) -> None:
        self.mu, self.kappa = as_tensor(self.mu), as_tensor(self.kappa)
        if self.mu.ndim != 2 or self.kappa.shape != (self.mu.shape[0],):
            raise ValueError(f"posterior shapes do not align: {self.mu.shape}, {self.kappa.shape}")

    @property
    def N(self) -> int:
        return int(self.mu.shape[0])

    @property
    def D(self) -> int:
        return int(self.mu.shape[1])


@dataclass
class ContrastivePosteriors:
    """Posteriors of one batch: references, positives and negatives.

    Attributes:
        ref: B reference posteriors
        pos: B positive posteriors
        neg: B * M negative posteriors, row ``b * M + m``; ``None`` when M = 0
        M: Negatives per reference
        in_batch: For M = 0, the batch index serving as each reference's negative
    """

    ref: EmbeddingPosterior
    pos: EmbeddingPosterior
    neg: Optional[EmbeddingPosterior] = None
    M: int = 0
    in_batch: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        B = self.ref.N
        if self.pos.N != B or self.pos.D != self.ref.D:
            raise ValueError("reference and positive posteriors do not align")
        if self.M == 0:
            if self.in_batch is None:
                raise ValueError("M = 0 needs an in-batch negative index")
            self.in_batch = np.asarray(self.in_batch, dtype=int)
            if self.in_batch.shape != (B,):
                raise ValueError(f"in-batch index must have shape ({B},)")
        elif self.neg is None or self.neg.N != B * self.M or self.neg.D != self.ref.D:
            raise ValueError(f"need {B * self.M} negative posteriors of dimension {self.ref.D}")

    @property
    def B(self) -> int:
        return self.ref.N

    @property
    def n_negatives(self) -> int:
        """Negatives each reference is scored against."""
        return 1 if self.M == 0 else self.M

    def negative_params(self) -> Tuple[Tensor, Tensor]:
        """Negative locations ``(B, M', D)`` and concentrations ``(B, M')``."""
        B, D, m = self.B, self.ref.D, self.n_negatives
        if self.M == 0:
            mu = index_select(self.ref.mu, self.in_batch)
            kappa = index_select(self.ref.kappa, self.in_batch)
        else:
            assert self.neg is not None
            mu, kappa = self.neg.mu, self.neg.kappa
        return reshape(mu, (B, m, D)), reshape(kappa, (B, m))


@dataclass
class LossNoise:
    """Base randomness of the reparametrized samples of one loss evaluation."""

    ref: ReparamNoise
    pos: ReparamNoise
    neg: Optional[ReparamNoise] = None


class KappaPos:
    """Learnable positive-pair concentration, parameterized by its logarithm."""

    def __init__(self, initial: float):
        if not initial > 0:
            raise ValueError(f"kappa_pos must be positive, got {initial}")
        self.log_kappa = Tensor(np.log(initial), requires_grad=True, name="log_kappa_pos")

    def __call__(self) -> Tensor:
        return exp(self.log_kappa)

    @property
    def value(self) -> float:
        return float(np.exp(self.log_kappa.data))

    def parameters(self) -> list:
        return [self.log_kappa]


def in_batch_negative_index(B: int, rng: np.random.Generator) -> np.ndarray:
    """For each reference i, one uniformly chosen other index j != i."""
    if B < 2:
        raise ValueError("in-batch negatives need a batch of at least two pairs")
    return (np.arange(B) + rng.integers(1, B, size=B)) % B


def _sample(
    posterior: EmbeddingPosterior,
    K: int,
    rng: Optional[np.random.Generator],
    noise: Optional[ReparamNoise],
) -> Tuple[Tensor, ReparamNoise]:
    return vmf_sample_reparam(posterior.mu, posterior.kappa, rng, K, noise=noise)


def draw_samples(
    cfg: LossConfig,
    posteriors: ContrastivePosteriors,
    rng: Optional[np.random.Generator],
    noise: Optional[LossNoise] = None,
) -> Tuple[Tensor, Tensor, Tensor, LossNoise]:
    """K reparametrized samples of every posterior in the batch.

    Returns:
        ``(z_ref (K, B, D), z_pos (K, B, D), z_neg (K, B, M', D), noise)``;
        in-batch negatives reuse the other reference's samples
    """
    K, B, D = cfg.K, posteriors.B, posteriors.ref.D
    z_ref, ref_noise = _sample(posteriors.ref, K, rng, noise.ref if noise else None)
    z_pos, pos_noise = _sample(posteriors.pos, K, rng, noise.pos if noise else None)
    neg_noise: Optional[ReparamNoise] = None
    if posteriors.M == 0:
        picked = index_select(z_ref, (slice(None), posteriors.in_batch))
        z_neg = reshape(picked, (K, B, 1, D))
    else:
        assert posteriors.neg is not None
        flat, neg_noise = _sample(posteriors.neg, K, rng, noise.neg if noise else None)
        z_neg = reshape(flat, (K, B, posteriors.M, D))
    return z_ref, z_pos, z_neg, LossNoise(ref=ref_noise, pos=pos_noise, neg=neg_noise)


def draw_loss_noise(
    cfg: LossConfig, posteriors: ContrastivePosteriors, rng: np.random.Generator
) -> Optional[LossNoise]:
    """Noise record for replaying a sampled loss at other parameters."""
    if cfg.loss_kind not in ("mcinfonce", "hib"):
        return None
    return draw_samples(cfg, posteriors, rng)[3]


def log_fractions(pos_score: Tensor, neg_score: Tensor, M: int) -> Tensor:
    """ln of e^{s+} / ((1/M) e^{s+} + (1/M) sum e^{s-}), scores ``(..., B)`` and ``(..., B, M)``."""
    pos_col = reshape(pos_score, (*pos_score.shape, 1))
    denominator = logsumexp(concat([pos_col, neg_score], axis=-1), axis=-1) - np.log(M)
    return pos_score - denominator


def _kappa_pos(cfg: LossConfig, kappa_pos: Optional[Tensor]) -> Tensor:
    return as_tensor(cfg.kappa_pos) if kappa_pos is None else kappa_pos


def mc_infonce(
    posteriors: ContrastivePosteriors,
    cfg: LossConfig,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[LossNoise] = None,
    kappa_pos: Optional[Tensor] = None,
) -> Tensor:
    """Monte-Carlo InfoNCE, averaged over the batch.

    Raises:
        ValueError: If any posterior is Dirac-tagged
    """
    z_ref, z_pos, z_neg, _ = draw_samples(cfg, posteriors, rng, noise)
    K, B, D = z_ref.shape
    scale = _kappa_pos(cfg, kappa_pos)
    pos_score = scale * dot(z_ref, z_pos)
    neg_score = scale * dot(reshape(z_ref, (K, B, 1, D)), z_neg)
    fractions = log_fractions(pos_score, neg_score, posteriors.n_negatives)
    per_element = logsumexp(fractions, axis=0) - np.log(K)
    return -mean(per_element)


def hib_loss(
    posteriors: ContrastivePosteriors,
    cfg: LossConfig,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[LossNoise] = None,
) -> Tensor:
    """Hedged instance embedding loss with sampled match probabilities, no KL term."""
    z_ref, z_pos, z_neg, _ = draw_samples(cfg, posteriors, rng, noise)
    K, B, D = z_ref.shape
    m = posteriors.n_negatives
    p_pos = mean(sigmoid(cfg.hib_a * dot(z_ref, z_pos) + cfg.hib_b), axis=0)
    p_neg = mean(sigmoid(cfg.hib_a * dot(reshape(z_ref, (K, B, 1, D)), z_neg) + cfg.hib_b), axis=0)
    pos_term = -log(clip(p_pos, PROB_CLAMP, 1.0 - PROB_CLAMP))
    neg_term = -tsum(log(clip(1.0 - p_neg, PROB_CLAMP, 1.0 - PROB_CLAMP)), axis=-1) / m
    return mean(pos_term + neg_term)


def elk_loss(
    posteriors: ContrastivePosteriors, cfg: LossConfig, kappa_pos: Optional[Tensor] = None
) -> Tensor:
    """Contrastive expected-likelihood-kernel loss, deterministic."""
    ref, pos = posteriors.ref, posteriors.pos
    mu_neg, kappa_neg = posteriors.negative_params()
    B, D = posteriors.B, ref.D
    scale = _kappa_pos(cfg, kappa_pos)
    pos_score = scale * el_vmf_log_kernel_tensor(ref.mu, ref.kappa, pos.mu, pos.kappa)
    neg_score = scale * el_vmf_log_kernel_tensor(
        reshape(ref.mu, (B, 1, D)), reshape(ref.kappa, (B, 1)), mu_neg, kappa_neg
    )
    return -mean(log_fractions(pos_score, neg_score, posteriors.n_negatives))


def infonce_loss(
    posteriors: ContrastivePosteriors, cfg: LossConfig, kappa_pos: Optional[Tensor] = None
) -> Tensor:
    """Point-embedding InfoNCE on the locations only."""
    mu_ref, mu_pos = posteriors.ref.mu, posteriors.pos.mu
    mu_neg, _ = posteriors.negative_params()
    B, D = posteriors.B, posteriors.ref.D
    scale = _kappa_pos(cfg, kappa_pos)
    pos_score = scale * dot(mu_ref, mu_pos)
    neg_score = scale * dot(reshape(mu_ref, (B, 1, D)), mu_neg)
    return -mean(log_fractions(pos_score, neg_score, posteriors.n_negatives))


def compute_loss(
    cfg: LossConfig,
    posteriors: ContrastivePosteriors,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[LossNoise] = None,
    kappa_pos: Optional[Tensor] = None,
) -> Tensor:
    """Evaluate the objective named by ``cfg.loss_kind``.

    Args:
        cfg: Loss hyperparameters
        posteriors: Batch posteriors
        rng: Stream for the Monte-Carlo samples (sampled losses only)
        noise: Replay these base draws instead of sampling
        kappa_pos: Learnable concentration overriding ``cfg.kappa_pos``

    Returns:
        Scalar loss tensor on the tape
    """
    if cfg.loss_kind == "mcinfonce":
        return mc_infonce(posteriors, cfg, rng, noise, kappa_pos)
    if cfg.loss_kind == "hib":
        return hib_loss(posteriors, cfg, rng, noise)
    if cfg.loss_kind == "elk":
        return elk_loss(posteriors, cfg, kappa_pos)
    return infonce_loss(posteriors, cfg, kappa_pos)
