"""
CLI for Probabilistic Contrastive Experiments

Command-line interface for generating processes, training and evaluating
encoders, certifying the analytic oracle, credible-interval demos and sweeps.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from probcon.config import PRESETS, ExperimentConfig, get_settings, parse_overrides, resolve_config
from probcon.credible import EmbeddedCorpus, cii_hits, coverage_check
from probcon.errors import NumericalFailure
from probcon.genproc import reference_uniformity, sample_triplet_batch, save_batch, save_process
from probcon.genproc.process import N_PROBES
from probcon.metrics import evaluate
from probcon.oracle import limiting_loss, marginal_table, run_oracle_checks
from probcon.runner import SWEEP_AXES, build_process, metrics_payload, run_experiment, run_sweep
from probcon.training import load_encoder
from probcon.utils.report_writer import ReportWriter
from probcon.utils.rng import named_stream

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2

EPILOG = """
Examples:
  # Draw and save a generative process
  probcon gen --preset ambiguous-desk --output-dir ./runs/process

  # Train with a preset plus overrides
  probcon train --preset ambiguous-desk --set K=4 --set seed=3

  # Re-evaluate a checkpoint
  probcon eval --preset ambiguous-desk --process ./runs/process/process.npz \\
      --encoder ./outputs/ambiguous-desk/encoder.npz

  # Certify the analytic marginal
  probcon oracle-check --preset ambiguous-desk

  # Sweep the number of Monte-Carlo samples with two workers
  probcon sweep --preset ambiguous-desk --axis mc_samples --workers 2
"""


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", "-p", choices=sorted(PRESETS), help="Named parameter preset")
    parser.add_argument("--config", "-c", help="Flat 'key = value' config file")
    parser.add_argument(
        "--set",
        "-s",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="Master seed (same as --set seed=N)")
    parser.add_argument("--output-dir", "-o", help="Output directory for this run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probcon",
        description="Probabilistic contrastive learning on the hypersphere",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Build and save a generative process")
    _add_common(gen)
    gen.add_argument(
        "--uniformity-samples",
        type=int,
        default=0,
        help="Accepted references for the uniform-marginal check (default: skip)",
    )
    gen.add_argument("--dump-batch", action="store_true", help="Also save one triplet batch")

    train = commands.add_parser("train", help="Train an encoder")
    _add_common(train)
    train.add_argument("--process", help="Saved process to train on (default: draw from seed)")
    train.add_argument("--quiet", "-q", action="store_true", help="Suppress progress output")

    evaluate_cmd = commands.add_parser("eval", help="Evaluate a saved encoder")
    _add_common(evaluate_cmd)
    evaluate_cmd.add_argument("--encoder", required=True, help="Encoder checkpoint")
    evaluate_cmd.add_argument("--process", help="Saved process (default: draw from seed)")

    oracle = commands.add_parser("oracle-check", help="Run the analytic oracle certificates")
    _add_common(oracle)
    oracle.add_argument(
        "--kappa-pos",
        type=float,
        nargs="+",
        default=[5.0, 20.0, 100.0],
        help="Positive-pair concentrations to certify (default: 5 20 100)",
    )
    oracle.add_argument("--mc-samples", type=int, default=200_000, help="Monte-Carlo draws")
    oracle.add_argument(
        "--with-process", action="store_true", help="Also check minimality on the process"
    )

    ci = commands.add_parser("ci", help="Credible-interval coverage and retrieval demo")
    _add_common(ci)
    ci.add_argument("--encoder", help="Encoder checkpoint (default: the true posteriors)")
    ci.add_argument("--process", help="Saved process (default: draw from seed)")
    ci.add_argument(
        "--levels", type=float, nargs="+", default=[0.5, 0.9, 0.99], help="Credible levels"
    )
    ci.add_argument("--trials", type=int, default=10_000, help="Coverage trials per level")
    ci.add_argument("--corpus-size", type=int, default=1000, help="Embedded corpus items")
    ci.add_argument("--queries", type=int, default=5, help="Retrieval queries")

    sweep = commands.add_parser("sweep", help="Run one experiment per value of an axis")
    _add_common(sweep)
    sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES), help="Swept axis")
    sweep.add_argument("--values", nargs="+", help="Axis values (default: the axis grid)")
    sweep.add_argument(
        "--metric", default="rmse_kappa", help="Metric of the trend summary (default: rmse_kappa)"
    )
    sweep.add_argument(
        "--workers", type=int, help="Concurrent entries (default: max_parallel_processes)"
    )
    return parser


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    return resolve_config(args.preset, args.config, overrides)


def _banner(title: str, cfg: ExperimentConfig, out: Path) -> None:
    print("=" * 70)
    print(title)
    print("=" * 70)
    print(f"\nExperiment: {cfg.name}")
    print(f"Seed: {cfg.seed}")
    print(f"Output directory: {out}")
    print()


def cmd_gen(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    writer = ReportWriter(out, cfg, cfg.seed)
    _banner("PROBCON GENERATIVE PROCESS", cfg, out)

    print("Step 1: Drawing the generative process...")
    process = build_process(cfg)
    path = save_process(process, out / "process")
    print(f"✓ Process saved to {path} ({process.reinit_attempts} initialization attempt(s))\n")

    probes = named_stream(cfg.seed, "gen-probes").uniform(size=(N_PROBES, cfg.D))
    mu, kappa = process.predict(probes)
    summary: Dict[str, Any] = {
        "process": path,
        "family": process.family,
        "reinit_attempts": process.reinit_attempts,
        "probe_kappa_min": float(np.min(kappa)),
        "probe_kappa_max": float(np.max(kappa)),
        "probe_mean_resultant": float(np.linalg.norm(mu.mean(axis=0))),
    }

    if args.uniformity_samples:
        print("Step 2: Checking the reference marginal...")
        summary["uniformity"] = reference_uniformity(
            process, args.uniformity_samples, named_stream(cfg.seed, "uniformity"), cfg.workers
        )
        print(f"✓ Rayleigh p-value {summary['uniformity']['rayleigh_p_value']:.4f}\n")

    if args.dump_batch:
        print("Step 3: Sampling one triplet batch...")
        batch = sample_triplet_batch(
            process, cfg.batch_size, cfg.M, named_stream(cfg.seed, "gen-batch"), cfg.workers
        )
        summary["batch"] = save_batch(batch, out / "batch")
        summary["acceptance_rate"] = batch.acceptance_rate
        print(f"✓ Batch saved (acceptance rate {batch.acceptance_rate:.4f})\n")

    writer.save_config_echo()
    writer.save_json("process.json", summary)
    print("✓ Done")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    if not args.quiet:
        _banner("PROBCON TRAINING", cfg, out)
    process_path = Path(args.process) if args.process else None
    outcome = run_experiment(cfg, out, process_path=process_path, verbose=not args.quiet)
    if not args.quiet:
        print("\nOutputs:")
        for kind, path in outcome.files.items():
            print(f"  - {kind}: {path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    writer = ReportWriter(out, cfg, cfg.seed)
    _banner("PROBCON EVALUATION", cfg, out)

    print("Step 1: Loading process and encoder...")
    process = build_process(cfg, Path(args.process) if args.process else None)
    encoder, _ = load_encoder(args.encoder)
    if encoder.D_in != process.D:
        raise ValueError(f"encoder expects D_in={encoder.D_in}, process has D={process.D}")
    print(f"✓ Encoder D_in={encoder.D_in} D_enc={encoder.D_enc}\n")

    print("Step 2: Computing metrics...")
    rng = named_stream(cfg.seed, "eval")
    report = evaluate(
        process, encoder, n_samples=cfg.eval_samples, pair_budget=cfg.pair_budget, rng=rng
    )
    payload = metrics_payload(report)
    if encoder.D_enc == process.D:
        anchors = rng.uniform(size=(10, process.D))
        candidates = rng.uniform(size=(10, process.D))
        payload["limiting_loss"] = limiting_loss(
            process, encoder, anchors, candidates, cfg.kappa_pos
        )
        payload["limiting_loss_truth"] = limiting_loss(
            process, process, anchors, candidates, cfg.kappa_pos
        )
    path = writer.save_json("eval.json", payload)
    print(f"✓ rank_mu={report.rank_mu:.4f} rank_kappa={report.rank_kappa:.4f}")
    print(f"✓ Metrics saved to {path}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    writer = ReportWriter(out, cfg, cfg.seed)
    _banner("PROBCON ORACLE CHECKS", cfg, out)

    process = build_process(cfg) if args.with_process else None
    report = run_oracle_checks(
        D=cfg.D,
        kappa_pos_values=args.kappa_pos,
        mc_samples=args.mc_samples,
        seed=cfg.seed,
        process=process,
    )
    for name, check in report["checks"].items():
        print(f"{'✓' if check['passed'] else '✗'} {name}")

    grid = np.logspace(0.0, 3.0, 7)
    rows = marginal_table(np.linspace(-1.0, 1.0, 11), grid, grid, cfg.kappa_pos, cfg.D)
    columns = list(rows[0])
    writer.save_csv("marginal_table.csv", [[row[c] for c in columns] for row in rows], columns)
    writer.save_json("oracle_checks.json", report)
    if not report["passed"]:
        raise NumericalFailure("one or more oracle certificates failed; see oracle_checks.json")
    print("\n✓ All certificates passed")
    return EXIT_OK


def cmd_ci(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    writer = ReportWriter(out, cfg, cfg.seed)
    _banner("PROBCON CREDIBLE INTERVALS", cfg, out)

    process = build_process(cfg, Path(args.process) if args.process else None)
    model: Any = process
    if args.encoder:
        model, _ = load_encoder(args.encoder)

    print("Step 1: Coverage of the credible intervals...")
    coverage = {}
    for level in args.levels:
        coverage[str(level)] = coverage_check(
            process, model, level, args.trials, named_stream(cfg.seed, "coverage")
        )
        print(f"✓ p={level}: empirical coverage {coverage[str(level)]:.4f}")

    print("\nStep 2: Retrieval over an embedded corpus...")
    corpus_x = named_stream(cfg.seed, "corpus").uniform(size=(args.corpus_size, cfg.D))
    corpus = EmbeddedCorpus.from_model(model, corpus_x)
    corpus.to_csv(out / "corpus.csv", cfg, cfg.seed)
    query_x = named_stream(cfg.seed, "queries").uniform(size=(args.queries, cfg.D))
    queries = EmbeddedCorpus.from_model(model, query_x)
    retrieval: List[Dict[str, Any]] = []
    for item in queries.items:
        hits = {str(level): cii_hits(item.posterior, corpus, level) for level in args.levels}
        retrieval.append({"query": item.id, "kappa": item.posterior.kappa, "hits": hits})
    print(f"✓ {len(retrieval)} queries over {len(corpus)} items\n")

    writer.save_json("ci.json", {"coverage": coverage, "retrieval": retrieval})
    print("✓ Done")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = cfg.resolved_output_dir()
    workers = args.workers or get_settings().max_parallel_processes
    summary = run_sweep(
        cfg, args.axis, out, values=args.values, metric=args.metric, workers=workers
    )
    trend = summary["trend"]
    if trend is not None:
        print(
            f"\nTrend of {args.metric}: non_increasing={trend['non_increasing']} "
            f"non_decreasing={trend['non_decreasing']}"
        )
    print(f"✓ Summary saved to {out / 'sweep.json'}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "oracle-check": cmd_oracle,
    "ci": cmd_ci,
    "sweep": cmd_sweep,
}


def _fail(code: int, error: BaseException) -> int:
    payload = {"error": type(error).__name__, "message": str(error), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the probcon CLI."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors
        return EXIT_VALIDATION if e.code else EXIT_OK
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg)
    except NumericalFailure as e:
        print(f"\nError: {e}")
        return _fail(EXIT_NUMERIC, e)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        print(f"\nError: {e}")
        return _fail(EXIT_VALIDATION, e)


if __name__ == "__main__":
    sys.exit(main())
