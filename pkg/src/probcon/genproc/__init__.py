"""
Generative Process

Frozen random networks that define the ground-truth posteriors P(z | x), and
the rejection sampler that turns them into contrastive training triplets.
"""

from probcon.genproc.process import (
    FAMILIES,
    GenerativeProcess,
    check_observations,
    fit_kappa_calibration,
    init_process,
    load_process,
    min_pairwise_cosine,
    posterior_of,
    sample_posterior,
    save_process,
)
from probcon.genproc.triplets import (
    ContrastiveBatch,
    accept_pairs,
    acceptance_log_prob,
    accepted_cosine_cdf,
    load_batch,
    reference_uniformity,
    sample_triplet_batch,
    save_batch,
)

__all__ = [
    "FAMILIES",
    "ContrastiveBatch",
    "GenerativeProcess",
    "accept_pairs",
    "acceptance_log_prob",
    "accepted_cosine_cdf",
    "check_observations",
    "fit_kappa_calibration",
    "init_process",
    "load_batch",
    "load_process",
    "min_pairwise_cosine",
    "posterior_of",
    "reference_uniformity",
    "sample_posterior",
    "sample_triplet_batch",
    "save_batch",
    "save_process",
]
