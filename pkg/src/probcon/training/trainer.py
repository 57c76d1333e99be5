"""
Training Loop

Online training on freshly generated triplets: every step draws a batch from
the generative process, evaluates the contrastive loss on the encoder's
posteriors and takes one Adam step. The learning rate drops by a factor of
10 after each quarter of the run.

Phasewise training spends the first half of the batches on the location
head alone, using one in-batch negative per reference, and the second half
on the concentration head alone with the configured negatives.
"""

import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from probcon.autodiff import Adam, index_select
from probcon.errors import NumericalFailure
from probcon.genproc import GenerativeProcess, sample_triplet_batch, save_batch
from probcon.losses import (
    LOSS_KINDS,
    ContrastivePosteriors,
    EmbeddingPosterior,
    KappaPos,
    LossConfig,
    compute_loss,
    in_batch_negative_index,
)
from probcon.metrics import DEFAULT_PAIR_BUDGET, MetricsReport, evaluate
from probcon.training.encoder import EncoderModel
from probcon.utils.report_writer import ReportWriter
from probcon.utils.rng import child_seed, named_stream

LR_DECAY = 0.1
LR_STAGES = 4

CURVE_COLUMNS = (
    "batch",
    "loss",
    "rmse_mu",
    "rank_mu",
    "rmse_kappa",
    "rank_kappa",
    "median_kappa_hat",
    "lr",
    "phase",
    "kappa_pos",
)


@dataclass
class TrainConfig:
    """Training hyperparameters.

    Attributes:
        batches: Optimizer steps
        batch_size: Accepted pairs per batch
        lr: Base learning rate
        K: Monte-Carlo samples per posterior
        M: Negatives per reference (0: one in-batch negative)
        kappa_pos: Positive-pair concentration
        phasewise: Train the location head first, then the concentration head
        seed: Master seed
        loss_kind: ``mcinfonce``, ``hib``, ``elk`` or ``infonce``
        eval_every: Snapshot interval in batches (0: final evaluation only)
        hib_a: HIB slope
        hib_b: HIB offset
        learn_kappa_pos: Optimize kappa_pos jointly with the encoder
        eval_samples: Probe observations per evaluation
        pair_budget: Probe pairs per evaluation (``None``: all)
        workers: Threads for triplet generation
    """

    batches: int = 2000
    batch_size: int = 128
    lr: float = 1e-4
    K: int = 16
    M: int = 8
    kappa_pos: float = 20.0
    phasewise: bool = False
    seed: int = 0
    loss_kind: str = "mcinfonce"
    eval_every: int = 0
    hib_a: float = 1.0
    hib_b: float = 0.0
    learn_kappa_pos: bool = False
    eval_samples: int = 2000
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET
    workers: int = 1

    def __post_init__(self) -> None:
        if self.batches < 0 or self.batch_size < 1 or self.K < 1 or self.M < 0:
            raise ValueError("batches >= 0, batch_size >= 1, K >= 1 and M >= 0 are required")
        if not self.lr > 0 or not self.kappa_pos > 0:
            raise ValueError("lr and kappa_pos must be positive")
        if self.eval_every < 0 or self.eval_samples < 2 or self.workers < 1:
            raise ValueError("eval_every >= 0, eval_samples >= 2 and workers >= 1 are required")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}; choose from {LOSS_KINDS}")
        if self.M == 0 and self.batch_size < 2:
            raise ValueError("in-batch negatives (M = 0) need batch_size >= 2")

    def loss_config(self, M: Optional[int] = None) -> LossConfig:
        return LossConfig(
            kappa_pos=self.kappa_pos,
            K=self.K,
            M=self.M if M is None else M,
            loss_kind=self.loss_kind,
            hib_a=self.hib_a,
            hib_b=self.hib_b,
        )


@dataclass
class TrainResult:
    """Outcome of ``train``.

    Attributes:
        encoder: The trained encoder (same object that was passed in)
        curve: One row per evaluation snapshot, keyed by ``CURVE_COLUMNS``
        losses: Loss of every step
        kappa_pos: Final positive-pair concentration
        final: Metrics at the end of training
    """

    encoder: EncoderModel
    curve: List[Dict[str, Any]] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    kappa_pos: float = 20.0
    final: Optional[MetricsReport] = None


def lr_schedule(progress: float, base_lr: float) -> float:
    """base_lr * 0.1^floor(4 progress), with progress = 1 in the last stage."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    stage = min(int(np.floor(progress * LR_STAGES)), LR_STAGES - 1)
    return base_lr * LR_DECAY**stage


def _phase(step: int, cfg: TrainConfig) -> int:
    """0 for joint training, 1 or 2 for the halves of phasewise training."""
    if not cfg.phasewise:
        return 0
    return 1 if step < cfg.batches // 2 else 2


def _split(posterior: EmbeddingPosterior, start: int, stop: int) -> EmbeddingPosterior:
    rows = slice(start, stop)
    return EmbeddingPosterior(
        mu=index_select(posterior.mu, rows), kappa=index_select(posterior.kappa, rows)
    )


def batch_posteriors(
    encoder: EncoderModel, batch: Any, M: int, rng: np.random.Generator
) -> ContrastivePosteriors:
    """Encode a triplet batch in one forward pass and split the posteriors."""
    B, D = batch.refs.shape
    stacked = np.concatenate([batch.refs, batch.positives, batch.negatives.reshape(-1, D)])
    posterior = encoder.posterior(stacked)
    ref = _split(posterior, 0, B)
    pos = _split(posterior, B, 2 * B)
    if M == 0:
        in_batch = in_batch_negative_index(B, rng)
        return ContrastivePosteriors(ref=ref, pos=pos, M=0, in_batch=in_batch)
    return ContrastivePosteriors(ref=ref, pos=pos, neg=_split(posterior, 2 * B, (2 + M) * B), M=M)


def write_curve_csv(
    curve: List[Dict[str, Any]], output_dir: Path, config: Any, seed: int, name: str = "curve.csv"
) -> Path:
    """Write the snapshot rows with the config and seed as a comment line."""
    writer = ReportWriter(output_dir, config, seed)
    rows = [[row.get(column) for column in CURVE_COLUMNS] for row in curve]
    return writer.save_csv(name, rows, CURVE_COLUMNS)


def _snapshot(
    step: int,
    loss: float,
    lr: float,
    phase: int,
    kappa_pos: float,
    report: MetricsReport,
) -> Dict[str, Any]:
    return {
        "batch": step,
        "loss": loss,
        "rmse_mu": report.rmse_mu,
        "rank_mu": report.rank_mu,
        "rmse_kappa": report.rmse_kappa,
        "rank_kappa": report.rank_kappa,
        "median_kappa_hat": report.median_kappa_hat,
        "lr": lr,
        "phase": phase,
        "kappa_pos": kappa_pos,
    }


def train(
    process: GenerativeProcess,
    encoder: EncoderModel,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
    output_dir: Optional[Path] = None,
    verbose: bool = True,
) -> TrainResult:
    """Train ``encoder`` in place on triplets from ``process``.

    Args:
        process: Generative process supplying the data
        encoder: Encoder to train
        cfg: Training configuration
        rng: Stream the run's sub-streams are derived from; defaults to the
            ``train`` stream of ``cfg.seed``
        output_dir: Where a failing batch is dumped
        verbose: Print progress lines

    Returns:
        The training result with the snapshot curve and final metrics

    Raises:
        NumericalFailure: On a non-finite loss; the offending batch is saved first
    """
    if encoder.D_in != process.D:
        raise ValueError(f"encoder expects D_in={encoder.D_in}, process has D={process.D}")
    if rng is None:
        rng = named_stream(cfg.seed, "train")
    run_seed = child_seed(rng)
    data_rng = named_stream(run_seed, "triplets")
    sample_rng = named_stream(run_seed, "mc-samples")
    index_rng = named_stream(run_seed, "in-batch")
    eval_rng = named_stream(run_seed, "evaluation")
    probes = named_stream(run_seed, "evaluation-probes").uniform(size=(cfg.eval_samples, process.D))

    kappa_pos = KappaPos(cfg.kappa_pos) if cfg.learn_kappa_pos else None
    params = encoder.parameters() + (kappa_pos.parameters() if kappa_pos else [])
    optimizer = Adam(params, lr=cfg.lr)
    result = TrainResult(encoder=encoder, kappa_pos=cfg.kappa_pos)

    if verbose:
        print("=" * 70)
        print(f"TRAINING  {cfg.loss_kind}  D={process.D}  D_enc={encoder.D_enc}")
        print(f"batches={cfg.batches}  B={cfg.batch_size}  K={cfg.K}  M={cfg.M}")
        print(f"phasewise={cfg.phasewise}  kappa_pos={cfg.kappa_pos}  seed={cfg.seed}")
        print("=" * 70)

    window: List[float] = []
    lr, phase, current_phase = cfg.lr, 0, -1
    for step in range(cfg.batches):
        phase = _phase(step, cfg)
        if phase != current_phase:
            encoder.mu_head.set_trainable(phase != 2)
            encoder.kappa_head.set_trainable(phase != 1)
            current_phase = phase
            if verbose and phase:
                head = "location" if phase == 1 else "concentration"
                print(f"\nPhase {phase}: training the {head} head")

        M = 0 if phase == 1 else cfg.M
        lr = lr_schedule(step / cfg.batches, cfg.lr)
        batch = sample_triplet_batch(process, cfg.batch_size, M, data_rng, workers=cfg.workers)
        posteriors = batch_posteriors(encoder, batch, M, index_rng)
        loss = compute_loss(
            cfg.loss_config(M), posteriors, sample_rng, kappa_pos=kappa_pos() if kappa_pos else None
        )

        value = loss.item()
        if not np.isfinite(value):
            dump_dir = Path(output_dir) if output_dir else Path(tempfile.mkdtemp(prefix="probcon-"))
            path = save_batch(batch, dump_dir / f"failed_batch_{step}", meta={"step": step})
            raise NumericalFailure(
                f"non-finite loss {value} at batch {step}; batch saved to {path}"
            )

        optimizer.zero_grad()
        loss.backward()
        optimizer.step(lr)
        result.losses.append(value)
        window.append(value)

        if cfg.eval_every and (step + 1) % cfg.eval_every == 0 and step + 1 < cfg.batches:
            report = evaluate(
                process, encoder, pair_budget=cfg.pair_budget, rng=eval_rng, probes=probes
            )
            current_kappa = kappa_pos.value if kappa_pos else cfg.kappa_pos
            result.curve.append(
                _snapshot(step + 1, float(np.mean(window)), lr, phase, current_kappa, report)
            )
            window = []
            if verbose:
                print(
                    f"   batch {step + 1:>7}  loss {value:9.4f}  rank_mu {report.rank_mu:6.3f}  "
                    f"rank_kappa {report.rank_kappa:6.3f}  median kappa_hat "
                    f"{report.median_kappa_hat:9.2f}"
                )

    encoder.mu_head.set_trainable(True)
    encoder.kappa_head.set_trainable(True)

    final = evaluate(process, encoder, pair_budget=cfg.pair_budget, rng=eval_rng, probes=probes)
    result.final = final
    result.kappa_pos = kappa_pos.value if kappa_pos else cfg.kappa_pos
    result.curve.append(
        _snapshot(
            cfg.batches,
            float(np.mean(window)) if window else float("nan"),
            lr,
            phase,
            result.kappa_pos,
            final,
        )
    )

    if verbose:
        print("\n" + "=" * 70)
        print("FINAL METRICS")
        print("=" * 70)
        for key, value in asdict(final).items():
            print(f"   {key:<22} {value}")
    return result
