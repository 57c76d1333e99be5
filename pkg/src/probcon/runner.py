"""
Experiment Runner

Builds the generative process and encoder for a resolved configuration, runs
training, and writes the outputs: config echo, curve CSV, encoder checkpoint
and final metrics JSON. Sweeps run one such experiment per axis value, each
in its own output directory and seeded only from the shared config seed, so
entries are independent of execution order and worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from probcon.config import ExperimentConfig
from probcon.genproc import GenerativeProcess, init_process, load_process
from probcon.metrics import MetricsReport, spearman
from probcon.training import TrainResult, init_encoder, save_encoder, train, write_curve_csv
from probcon.utils.report_writer import ReportWriter, to_jsonable
from probcon.utils.rng import named_stream


@dataclass(frozen=True)
class SweepAxis:
    """A config field swept over a default list of values."""

    field: str
    values: Tuple[Any, ...]
    numeric: bool = True
    # fields set alongside ``field`` to the same value
    linked: Tuple[str, ...] = ()


SWEEP_AXES: Dict[str, SweepAxis] = {
    "mc_samples": SweepAxis("K", (1, 4, 16, 64)),
    "encoder_dim": SweepAxis("D_enc", (4, 8, 10, 16, 32, 64, 128)),
    "latent_dim": SweepAxis("D", (10, 16, 32), linked=("D_enc",)),
    "family": SweepAxis("family", ("vmf", "gaussian", "laplace", "dirac"), numeric=False),
    "loss_kind": SweepAxis("loss_kind", ("mcinfonce", "hib", "elk", "infonce"), numeric=False),
    "negatives": SweepAxis("M", (0, 1, 32)),
    "phasewise": SweepAxis("phasewise", (False, True), numeric=False),
}


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    result: TrainResult
    output_dir: Path
    files: Dict[str, Path]


def build_process(cfg: ExperimentConfig, process_path: Optional[Path] = None) -> GenerativeProcess:
    """Load the process from ``process_path`` or draw it from the config seed."""
    if process_path is not None:
        process = load_process(process_path)
        if process.D != cfg.D:
            raise ValueError(f"process file has D={process.D}, config has D={cfg.D}")
        return process
    return init_process(**cfg.process_kwargs())


def run_experiment(
    cfg: ExperimentConfig,
    output_dir: Optional[Path] = None,
    process_path: Optional[Path] = None,
    verbose: bool = True,
) -> ExperimentOutcome:
    """Train one encoder and write its outputs.

    Args:
        cfg: Resolved experiment configuration
        output_dir: Destination (defaults to ``cfg.resolved_output_dir()``)
        process_path: Saved generative process to train on
        verbose: Print training progress

    Returns:
        The outcome with the training result and written file paths
    """
    out = Path(output_dir) if output_dir is not None else cfg.resolved_output_dir()
    writer = ReportWriter(out, cfg, cfg.seed)
    process = build_process(cfg, process_path)
    encoder = init_encoder(cfg.D, cfg.D_enc, seed=cfg.seed, process=process)
    result = train(
        process,
        encoder,
        cfg.train_config(),
        rng=named_stream(cfg.seed, "train"),
        output_dir=out,
        verbose=verbose,
    )
    assert result.final is not None
    files = {
        "config": writer.save_config_echo(),
        "curve": write_curve_csv(result.curve, out, cfg, cfg.seed),
        "encoder": save_encoder(
            encoder, out / "encoder", header={"seed": cfg.seed, "config": to_jsonable(cfg)}
        ),
        "metrics": writer.save_json("metrics.json", metrics_payload(result.final, result)),
    }
    return ExperimentOutcome(config=cfg, result=result, output_dir=out, files=files)


def metrics_payload(report: MetricsReport, result: Optional[TrainResult] = None) -> Dict[str, Any]:
    payload = to_jsonable(asdict(report))
    if result is not None:
        payload["kappa_pos_final"] = result.kappa_pos
        payload["final_loss"] = result.losses[-1] if result.losses else None
    return payload


def sweep_configs(
    base: ExperimentConfig, axis: str, values: Optional[Sequence[Any]] = None
) -> List[ExperimentConfig]:
    """One config per axis value, each validated."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    spec = SWEEP_AXES[axis]
    configs = []
    for value in values if values is not None else spec.values:
        update = {name: value for name in (spec.field, *spec.linked)}
        data = {**base.model_dump(), **update, "name": f"{base.name}-{axis}-{value}"}
        configs.append(ExperimentConfig(**data))
    return configs


def trend_summary(values: Sequence[Any], metrics: Sequence[float]) -> Dict[str, Any]:
    """Monotonicity of a metric along a numeric axis (NaN entries are ignored)."""
    pairs = sorted(
        (float(v), float(m)) for v, m in zip(values, metrics) if m is not None and np.isfinite(m)
    )
    if len(pairs) < 2:
        return {"non_increasing": None, "non_decreasing": None, "spearman": None}
    steps = np.diff([m for _, m in pairs])
    return {
        "non_increasing": bool(np.all(steps <= 0)),
        "non_decreasing": bool(np.all(steps >= 0)),
        "spearman": spearman(np.array([v for v, _ in pairs]), np.array([m for _, m in pairs])),
    }


def run_sweep(
    base: ExperimentConfig,
    axis: str,
    output_dir: Path,
    values: Optional[Sequence[Any]] = None,
    metric: str = "rmse_kappa",
    workers: int = 1,
    verbose: bool = True,
) -> Dict[str, Any]:
    """Run every entry of a sweep and write ``sweep.json`` and ``sweep.csv``.

    Entries run in a thread pool of ``workers``; their outputs go to
    ``output_dir/<index>-<value>/``.

    Returns:
        The sweep summary (entries plus monotone-trend flags for ``metric``)
    """
    metric_names = [f.name for f in fields(MetricsReport)]
    if metric not in metric_names:
        raise ValueError(f"unknown metric {metric!r}")
    configs = sweep_configs(base, axis, values)
    spec = SWEEP_AXES[axis]
    output_dir = Path(output_dir)

    def run_entry(index: int) -> ExperimentOutcome:
        cfg = configs[index]
        value = getattr(cfg, spec.field)
        return run_experiment(cfg, output_dir / f"{index:02d}-{value}", verbose=False)

    if verbose:
        print("=" * 70)
        print(f"SWEEP  axis={axis}  entries={len(configs)}  workers={workers}")
        print("=" * 70)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_entry, range(len(configs))))

    entries = []
    for outcome in outcomes:
        value = getattr(outcome.config, spec.field)
        entries.append(
            {
                "value": value,
                "output_dir": outcome.output_dir,
                **metrics_payload(outcome.result.final, outcome.result),
            }
        )
        if verbose:
            print(f"✓ {spec.field}={value}  {metric}={entries[-1][metric]}")

    summary: Dict[str, Any] = {"axis": axis, "field": spec.field, "metric": metric}
    summary["entries"] = entries
    summary["trend"] = (
        trend_summary([e["value"] for e in entries], [e[metric] for e in entries])
        if spec.numeric
        else None
    )
    writer = ReportWriter(output_dir, base, base.seed)
    writer.save_json("sweep.json", summary)
    columns = ["value", *metric_names]
    writer.save_csv("sweep.csv", [[e.get(c) for c in columns] for e in entries], columns)
    return to_jsonable(summary)
