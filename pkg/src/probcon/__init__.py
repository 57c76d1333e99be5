"""
probcon - Probabilistic Contrastive Learning on the Hypersphere

Simulated generative processes with von Mises-Fisher posteriors, probabilistic
encoders trained with MCInfoNCE and baseline losses, and analytic oracles and
metrics that check the encoder recovers the true posteriors up to rotation.
"""

__version__ = "0.1.0"
__author__ = "probcon developers"

from probcon.errors import NumericalFailure
from probcon.genproc import GenerativeProcess, init_process, sample_triplet_batch
from probcon.losses import LossConfig, compute_loss
from probcon.metrics import MetricsReport, evaluate
from probcon.training import EncoderModel, TrainConfig, init_encoder, train
from probcon.vmf import VmfParams

__all__ = [
    "EncoderModel",
    "GenerativeProcess",
    "LossConfig",
    "MetricsReport",
    "NumericalFailure",
    "TrainConfig",
    "VmfParams",
    "compute_loss",
    "evaluate",
    "init_encoder",
    "init_process",
    "sample_triplet_batch",
    "train",
]
