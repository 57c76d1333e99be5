"""
Training

Probabilistic encoders and the online training loop.
"""

from probcon.training.encoder import (
    EncoderModel,
    encoder_widths,
    init_encoder,
    load_encoder,
    save_encoder,
)
from probcon.training.trainer import (
    CURVE_COLUMNS,
    TrainConfig,
    TrainResult,
    batch_posteriors,
    lr_schedule,
    train,
    write_curve_csv,
)

__all__ = [
    "CURVE_COLUMNS",
    "EncoderModel",
    "TrainConfig",
    "TrainResult",
    "batch_posteriors",
    "encoder_widths",
    "init_encoder",
    "load_encoder",
    "lr_schedule",
    "save_encoder",
    "train",
    "write_curve_csv",
]
