"""
Probabilistic Encoder

Two leaky-ReLU MLPs predicting the posterior Q(z | x) = vMF(mu_hat(x),
kappa_hat(x)). Both heads share the layout

    [D -> 10D, 10D -> 50D, 50D -> 50D (x4), 50D -> 10D, 10D -> out]

with out = D_enc for the l2-normalized location head and out = 1 for the
concentration head, whose output goes through kappa_hat = 1 + exp(.). Before
training the concentration head is rescaled so its outputs over 1000 probe
observations span the generative process's kappa range.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from probcon.autodiff import Mlp, MlpSpec, Tensor, load_checkpoint, save_checkpoint
from probcon.genproc.process import N_PROBES, check_observations, fit_kappa_calibration
from probcon.losses import EmbeddingPosterior
from probcon.utils.rng import named_stream

DEEP_LAYERS = 4


def encoder_widths(D_in: int, out_dim: int) -> List[int]:
    """Layer widths of an encoder head; hidden widths scale with ``D_in``."""
    return [D_in, 10 * D_in, *([50 * D_in] * (DEEP_LAYERS + 1)), 10 * D_in, out_dim]


@dataclass
class EncoderModel:
    """Location and concentration heads of a probabilistic encoder.

    Attributes:
        mu_head: Location network with l2-normalized output of size ``D_enc``
        kappa_head: Concentration network with one-plus-exp scalar output
        D_in: Observation dimension
        D_enc: Latent dimension of the encoder (may differ from the process)
    """

    mu_head: Mlp
    kappa_head: Mlp
    D_in: int
    D_enc: int

    def posterior(self, x: np.ndarray) -> EmbeddingPosterior:
        """Tape-connected posteriors for a batch ``(N, D_in)``."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.D_in:
            raise ValueError(f"expected observations of shape (N, {self.D_in}), got {x.shape}")
        return EmbeddingPosterior(mu=self.mu_head(x), kappa=self.kappa_head(x))

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior parameters ``(mu (N, D_enc), kappa (N,))`` without a graph."""
        x = check_observations(x, self.D_in).reshape(-1, self.D_in)
        return self.mu_head.predict(x), self.kappa_head.predict(x)

    def parameters(self) -> List[Tensor]:
        return self.mu_head.parameters() + self.kappa_head.parameters()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {**self.mu_head.state_dict("mu_head."), **self.kappa_head.state_dict("kappa_head.")}

    def copy(self) -> "EncoderModel":
        return EncoderModel(
            mu_head=self.mu_head.copy(),
            kappa_head=self.kappa_head.copy(),
            D_in=self.D_in,
            D_enc=self.D_enc,
        )


def _specs(D_in: int, D_enc: int) -> Tuple[MlpSpec, MlpSpec]:
    mu_spec = MlpSpec.from_widths(encoder_widths(D_in, D_enc), output_transform="l2-normalize")
    kappa_spec = MlpSpec.from_widths(encoder_widths(D_in, 1), output_transform="one-plus-exp")
    return mu_spec, kappa_spec


def init_encoder(
    D_in: int,
    D_enc: int,
    seed: int,
    process: Optional[Any] = None,
    kappa_range: Optional[Tuple[float, float]] = None,
) -> EncoderModel:
    """Build an encoder and calibrate its concentration head.

    Args:
        D_in: Observation dimension
        D_enc: Encoder latent dimension (>= 2)
        seed: Master seed; the heads use its ``encoder`` sub-stream
        process: Generative process whose kappa range is matched
        kappa_range: Explicit ``(kappa_min, kappa_max)``, overrides ``process``

    Returns:
        The initialized encoder
    """
    if D_in < 1 or D_enc < 2:
        raise ValueError(f"need D_in >= 1 and D_enc >= 2, got {D_in}, {D_enc}")
    rng = named_stream(seed, "encoder")
    mu_spec, kappa_spec = _specs(D_in, D_enc)
    mu_head = Mlp.create(mu_spec, rng)
    kappa_head = Mlp.create(kappa_spec, rng)

    if kappa_range is None and process is not None:
        kappa_range = (process.kappa_min, process.kappa_max)
    if kappa_range is not None:
        probes = named_stream(seed, "encoder-probes").uniform(size=(N_PROBES, D_in))
        raw = kappa_head.raw(probes).data.reshape(-1)
        kappa_head.calibrate_output(*fit_kappa_calibration(raw, *kappa_range))

    return EncoderModel(mu_head=mu_head, kappa_head=kappa_head, D_in=int(D_in), D_enc=int(D_enc))


def save_encoder(
    encoder: EncoderModel, path: Union[str, Path], header: Optional[Dict[str, Any]] = None
) -> Path:
    """Write the encoder parameters in the checkpoint format."""
    meta = {"kind": "encoder", "D_in": encoder.D_in, "D_enc": encoder.D_enc, **(header or {})}
    return save_checkpoint(path, encoder.state_dict(), meta)


def load_encoder(path: Union[str, Path]) -> Tuple[EncoderModel, Dict[str, Any]]:
    """Read an encoder written by ``save_encoder``; returns it with its header."""
    tensors, header = load_checkpoint(path)
    if header.get("kind") != "encoder":
        raise ValueError(f"{path} does not hold an encoder")
    D_in, D_enc = int(header["D_in"]), int(header["D_enc"])
    encoder = init_encoder(D_in, D_enc, seed=0)
    encoder.mu_head.load_state_dict(tensors, "mu_head.")
    encoder.kappa_head.load_state_dict(tensors, "kappa_head.")
    return encoder, header
