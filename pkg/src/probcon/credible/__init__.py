"""
Credible Intervals

Level-p credible caps of vMF posteriors, retrieval of corpus items whose mode
lies inside a query's cap, and an end-to-end coverage check.
"""

from probcon.credible.intervals import (
    CorpusItem,
    CredibleInterval,
    EmbeddedCorpus,
    ci_threshold,
    ci_thresholds,
    cii_hits,
    cii_retrieve,
    coverage_check,
    credible_interval,
)

__all__ = [
    "CorpusItem",
    "CredibleInterval",
    "EmbeddedCorpus",
    "ci_threshold",
    "ci_thresholds",
    "cii_hits",
    "cii_retrieve",
    "coverage_check",
    "credible_interval",
]
