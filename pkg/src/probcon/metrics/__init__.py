"""
Identifiability Metrics

Rank correlations and RMSEs between encoder and true posteriors, invariant to
a global rotation of the latent space.
"""

from probcon.metrics.identifiability import (
    DEFAULT_PAIR_BUDGET,
    KAPPA_TARGETS,
    MetricsReport,
    PosteriorModel,
    evaluate,
    report_to_json,
    sample_pairs,
    spearman,
)

__all__ = [
    "DEFAULT_PAIR_BUDGET",
    "KAPPA_TARGETS",
    "MetricsReport",
    "PosteriorModel",
    "evaluate",
    "report_to_json",
    "sample_pairs",
    "spearman",
]
