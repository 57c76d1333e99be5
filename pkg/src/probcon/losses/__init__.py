"""
Contrastive Losses

MCInfoNCE, hedged instance embeddings, the expected likelihood kernel loss and
the point-embedding InfoNCE baseline.
"""

from probcon.losses.contrastive import (
    LOSS_KINDS,
    PROB_CLAMP,
    ContrastivePosteriors,
    EmbeddingPosterior,
    KappaPos,
    LossConfig,
    LossNoise,
    compute_loss,
    draw_loss_noise,
    draw_samples,
    elk_loss,
    hib_loss,
    in_batch_negative_index,
    infonce_loss,
    log_fractions,
    mc_infonce,
)
from probcon.losses.kernels import el_vmf_log_kernel, el_vmf_log_kernel_tensor

__all__ = [
    "LOSS_KINDS",
    "PROB_CLAMP",
    "ContrastivePosteriors",
    "EmbeddingPosterior",
    "KappaPos",
    "LossConfig",
    "LossNoise",
    "compute_loss",
    "draw_loss_noise",
    "draw_samples",
    "el_vmf_log_kernel",
    "el_vmf_log_kernel_tensor",
    "elk_loss",
    "hib_loss",
    "in_batch_negative_index",
    "infonce_loss",
    "log_fractions",
    "mc_infonce",
]
