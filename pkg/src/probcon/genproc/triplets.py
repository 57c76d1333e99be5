"""
Contrastive Triplet Generation

Simulates the forward process "z uniform on the sphere, z+ ~ vMF(z, kappa_pos),
observations drawn given the latents" backwards: candidate observation pairs
(x, x+) are drawn uniformly from [0, 1]^D, latents are drawn from the process
posteriors, and the pair is kept with probability

    C(kappa_pos) e^{kappa_pos z^T z+} / (C(kappa_pos) e^{kappa_pos z^T z+} + C(0)),

evaluated in log space. Negatives are independent uniform observations.

Candidates are generated in fixed-size chunks, each with its own sub-stream
of a seed drawn from the caller's generator. Chunks are consumed in index
order, so the batch does not depend on how many worker threads produced them.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate, stats

from probcon.autodiff import load_checkpoint, save_checkpoint
from probcon.errors import NumericalFailure
from probcon.genproc.process import GenerativeProcess, sample_posterior
from probcon.special import log_vmf_norm_const
from probcon.utils.rng import child_seed

CHUNK_SIZE = 4096
STARVATION_RATE = 1e-6
STARVATION_MIN_CANDIDATES = 1_000_000


@dataclass
class ContrastiveBatch:
    """B accepted (reference, positive) pairs plus M negatives each.

    Attributes:
        refs: Reference observations, ``(B, D)``
        positives: Positive observations, ``(B, D)``
        negatives: Negative observations, ``(B, M, D)``; empty when M = 0
        acceptance_rate: Accepted / proposed candidates over consumed chunks
        n_candidates: Candidates proposed
        ref_latents: Latents z of the accepted references, ``(B, D)``
        pos_latents: Latents z+ of the accepted positives, ``(B, D)``
    """

    refs: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    acceptance_rate: float
    n_candidates: int
    ref_latents: np.ndarray
    pos_latents: np.ndarray

    @property
    def B(self) -> int:
        return int(self.refs.shape[0])

    @property
    def M(self) -> int:
        return int(self.negatives.shape[1])


def acceptance_log_prob(D: int, kappa_pos: float, cosine: np.ndarray) -> np.ndarray:
    """Log acceptance probability of latent pairs with z^T z+ = ``cosine``."""
    log_a = float(log_vmf_norm_const(D, kappa_pos)) + kappa_pos * np.asarray(cosine, dtype=float)
    return log_a - np.logaddexp(log_a, float(log_vmf_norm_const(D, 0.0)))


def accept_pairs(
    z: np.ndarray, z_pos: np.ndarray, kappa_pos: float, rng: np.random.Generator
) -> np.ndarray:
    """Boolean acceptance mask for latent pairs ``(N, D)``."""
    cosine = np.clip(np.sum(z * z_pos, axis=-1), -1.0, 1.0)
    log_u = np.log(rng.uniform(size=cosine.shape))
    return log_u < acceptance_log_prob(z.shape[-1], kappa_pos, cosine)


def accepted_cosine_cdf(D: int, kappa_pos: float, t: float) -> float:
    """CDF of z^T z+ among accepted pairs when z and z+ are uniform.

    The density is proportional to (1 - t^2)^((D-3)/2) times the acceptance
    probability at t.
    """
    alpha = (D - 3.0) / 2.0

    def kernel(s: float) -> float:
        return float(np.exp(acceptance_log_prob(D, kappa_pos, s)))

    t = float(np.clip(t, -1.0, 1.0))
    if t <= -1.0:
        return 0.0
    # (1 - s)^alpha (1 + s)^alpha as an algebraic endpoint weight
    total = integrate.quad(kernel, -1.0, 1.0, weight="alg", wvar=(alpha, alpha), epsrel=1e-12)[0]
    if t >= 1.0:
        return 1.0
    part = integrate.quad(
        lambda s: kernel(s) * (1.0 - s) ** alpha,
        -1.0,
        t,
        weight="alg",
        wvar=(alpha, 0.0),
        epsrel=1e-12,
    )[0]
    return float(min(1.0, part / total))


def _draw_chunk(
    proc: GenerativeProcess, chunk_seed: int, index: int, size: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=chunk_seed, spawn_key=(index,)))
    x = rng.uniform(size=(size, proc.D))
    x_pos = rng.uniform(size=(size, proc.D))
    z = sample_posterior(proc, x, rng)
    z_pos = sample_posterior(proc, x_pos, rng)
    keep = accept_pairs(z, z_pos, proc.kappa_pos, rng)
    return x[keep], x_pos[keep], z[keep], z_pos[keep]


def sample_triplet_batch(
    proc: GenerativeProcess,
    B: int,
    M: int,
    rng: np.random.Generator,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> ContrastiveBatch:
    """Draw B accepted pairs and M uniform negatives per pair.

    Args:
        proc: Generative process
        B: Number of accepted pairs (>= 1)
        M: Negatives per pair (>= 0; 0 leaves the negative block empty)
        rng: Caller's stream; one chunk seed and the negatives are drawn from it
        workers: Threads drawing chunks concurrently
        chunk_size: Candidates per chunk

    Returns:
        The batch

    Raises:
        ValueError: On invalid counts
        NumericalFailure: If acceptance starves below 1e-6 after 10^6 candidates
    """
    if B < 1 or M < 0 or workers < 1 or chunk_size < 1:
        raise ValueError(f"need B >= 1, M >= 0, workers >= 1, chunk_size >= 1 (B={B}, M={M})")

    chunk_seed = child_seed(rng)
    parts: List[Tuple[np.ndarray, ...]] = []
    accepted, n_candidates, next_chunk = 0, 0, 0

    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while accepted < B:
            wave = range(next_chunk, next_chunk + workers)
            next_chunk += workers
            if executor is None:
                results = [_draw_chunk(proc, chunk_seed, i, chunk_size) for i in wave]
            else:
                results = list(
                    executor.map(lambda i: _draw_chunk(proc, chunk_seed, i, chunk_size), wave)
                )
            for part in results:
                if accepted >= B:
                    break
                parts.append(part)
                accepted += part[0].shape[0]
                n_candidates += chunk_size
            if (
                accepted < B
                and n_candidates >= STARVATION_MIN_CANDIDATES
                and accepted / n_candidates < STARVATION_RATE
            ):
                raise NumericalFailure(
                    f"triplet acceptance starved: {accepted} of {n_candidates} candidates "
                    f"accepted (D={proc.D}, kappa_pos={proc.kappa_pos})"
                )
    finally:
        if executor is not None:
            executor.shutdown()

    x, x_pos, z, z_pos = (np.concatenate(block)[:B] for block in zip(*parts))
    negatives = rng.uniform(size=(B, M, proc.D))
    return ContrastiveBatch(
        refs=x,
        positives=x_pos,
        negatives=negatives,
        acceptance_rate=accepted / n_candidates,
        n_candidates=n_candidates,
        ref_latents=z,
        pos_latents=z_pos,
    )


def reference_uniformity(
    proc: GenerativeProcess, n: int, rng: np.random.Generator, workers: int = 1
) -> Dict[str, float]:
    """Check that accepted reference latents are uniform on the sphere.

    Returns:
        ``mean_resultant`` (norm of the mean latent), its scale under
        uniformity ``standard_error`` = 1/sqrt(n), the Rayleigh p-value
        (n D |mean|^2 is chi^2 with D degrees of freedom) and ``n``
    """
    batch = sample_triplet_batch(proc, n, 0, rng, workers=workers)
    resultant = float(np.linalg.norm(batch.ref_latents.mean(axis=0)))
    rayleigh = n * proc.D * resultant**2
    return {
        "mean_resultant": resultant,
        "standard_error": 1.0 / np.sqrt(n),
        "rayleigh_p_value": float(stats.chi2.sf(rayleigh, df=proc.D)),
        "n": n,
        "acceptance_rate": batch.acceptance_rate,
    }


def save_batch(
    batch: ContrastiveBatch, path: Union[str, Path], meta: Optional[dict] = None
) -> Path:
    """Dump a batch as a checkpoint-format archive with x, x+ and x- blocks."""
    tensors = {
        "x": batch.refs,
        "x_pos": batch.positives,
        "x_neg": batch.negatives,
        "z": batch.ref_latents,
        "z_pos": batch.pos_latents,
    }
    header = {
        "kind": "contrastive-batch",
        "acceptance_rate": batch.acceptance_rate,
        "n_candidates": batch.n_candidates,
        **(meta or {}),
    }
    return save_checkpoint(path, tensors, header)


def load_batch(path: Union[str, Path]) -> ContrastiveBatch:
    tensors, header = load_checkpoint(path)
    if header.get("kind") != "contrastive-batch":
        raise ValueError(f"{path} does not hold a contrastive batch")
    return ContrastiveBatch(
        refs=tensors["x"],
        positives=tensors["x_pos"],
        negatives=tensors["x_neg"],
        acceptance_rate=float(header["acceptance_rate"]),
        n_candidates=int(header["n_candidates"]),
        ref_latents=tensors["z"],
        pos_latents=tensors["z_pos"],
    )
