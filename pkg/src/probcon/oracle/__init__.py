"""
Analytic Oracle

Quadrature for the expected positive-pair likelihood of two vMF posteriors,
the limiting contrastive objective built on it, and numeric certificates of
its monotonicity, symmetry and minimality.
"""

from probcon.oracle.checks import (
    PerturbedModel,
    RotatedModel,
    jitter_directions,
    limiting_loss,
    log_pair_marginals,
    marginal_table,
    pair_marginals,
    random_rotation,
    run_oracle_checks,
)
from probcon.oracle.marginal import (
    OracleQuery,
    log_marginal_h_batch,
    marginal_h,
    mc_marginal_draws,
    mc_marginal_estimate,
)

__all__ = [
    "OracleQuery",
    "PerturbedModel",
    "RotatedModel",
    "jitter_directions",
    "limiting_loss",
    "log_marginal_h_batch",
    "log_pair_marginals",
    "marginal_h",
    "marginal_table",
    "mc_marginal_draws",
    "mc_marginal_estimate",
    "pair_marginals",
    "random_rotation",
    "run_oracle_checks",
]
