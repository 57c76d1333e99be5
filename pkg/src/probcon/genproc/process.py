"""
Generative Process

The ground-truth simulator: observations x in [0, 1]^D are mapped by frozen
random MLPs to a posterior over latents on S^(D-1) with location mu(x) and
concentration kappa(x) = 1 + exp(kappa_tilde(x)).

Construction draws both networks from the seed, re-draws the location network
while its outputs over a probe set are bunched together, and rescales the
concentration head so that its range over the probes is exactly
[kappa_min, kappa_max].
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from probcon.autodiff import Mlp, MlpSpec, load_checkpoint, save_checkpoint
from probcon.errors import NumericalFailure
from probcon.utils.rng import named_stream
from probcon.vmf import VmfParams, vmf_sample_batch

FAMILIES = ("vmf", "gaussian", "laplace", "dirac")
N_PROBES = 1000
MAX_REINIT_ATTEMPTS = 100
COLLAPSE_COSINE = 0.5


def check_observations(x: np.ndarray, D: int) -> np.ndarray:
    """Validate observations of shape ``(N, D)`` or ``(D,)`` in [0, 1]^D."""
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != D:
        raise ValueError(f"observations must have trailing dimension {D}, got {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("observations must lie in [0, 1]^D")
    return x


def min_pairwise_cosine(mu: np.ndarray) -> float:
    """Smallest mu_i^T mu_j over distinct pairs of unit rows."""
    gram = mu @ mu.T
    np.fill_diagonal(gram, np.inf)
    return float(np.min(gram))


def fit_kappa_calibration(
    raw: np.ndarray, kappa_min: float, kappa_max: float
) -> Tuple[float, float]:
    """Affine map (a, b) with 1 + exp(a * raw + b) spanning [kappa_min, kappa_max].

    A degenerate raw range (or kappa_min = kappa_max) gives a = 0, i.e. a
    constant concentration of kappa_min.
    """
    lo, hi = float(np.min(raw)), float(np.max(raw))
    log_lo, log_hi = np.log(kappa_min - 1.0), np.log(kappa_max - 1.0)
    if hi - lo < 1e-12 or kappa_max == kappa_min:
        return 0.0, float(log_lo)
    a = (log_hi - log_lo) / (hi - lo)
    return float(a), float(log_lo - a * lo)


@dataclass
class GenerativeProcess:
    """Frozen ground-truth posteriors P(z | x).

    Attributes:
        D: Observation and latent dimension
        kappa_min: Smallest concentration over the probe set
        kappa_max: Largest concentration over the probe set
        family: ``vmf``, ``gaussian``, ``laplace`` or ``dirac``
        kappa_pos: Concentration of the positive-pair law
        seed: Seed the networks were drawn from
        mu_net: Location network (l2-normalized output)
        kappa_net: Concentration network (one-plus-exp output)
        reinit_attempts: Location networks drawn until one passed
    """

    D: int
    kappa_min: float
    kappa_max: float
    family: str
    kappa_pos: float
    seed: int
    mu_net: Mlp
    kappa_net: Mlp
    reinit_attempts: int = 1

    @property
    def is_dirac(self) -> bool:
        return self.family == "dirac"

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior parameters for a batch ``(N, D)``.

        Returns:
            ``(mu, kappa)`` of shapes ``(N, D)`` and ``(N,)``; kappa is
            ``inf`` for the Dirac family
        """
        x = check_observations(x, self.D)
        batch = x.reshape(-1, self.D)
        mu = self.mu_net.predict(batch)
        if self.is_dirac:
            kappa = np.full(batch.shape[0], np.inf)
        else:
            kappa = self.kappa_net.predict(batch)
        return mu, kappa

    def kappa_target(self, x: np.ndarray) -> np.ndarray:
        """Concentration an encoder should recover: kappa(x) for vMF, the
        inverse variance 1/sigma^2 for Gaussian and the inverse diversity 1/b
        for Laplace noise (both equal kappa(x) by construction), inf for Dirac.
        """
        return self.predict(x)[1]


def init_process(
    D: int,
    kappa_min: float,
    kappa_max: float,
    family: str = "vmf",
    kappa_pos: float = 20.0,
    seed: int = 0,
) -> GenerativeProcess:
    """Build a generative process from a seed.

    Args:
        D: Observation and latent dimension (>= 2)
        kappa_min: Lower end of the concentration range (> 1)
        kappa_max: Upper end of the concentration range
        family: Posterior family
        kappa_pos: Positive-pair concentration
        seed: Master seed; the networks use its ``process`` sub-stream

    Returns:
        The frozen process

    Raises:
        ValueError: On invalid parameters
        NumericalFailure: If 100 location networks in a row are collapsed
    """
    if int(D) != D or D < 2:
        raise ValueError(f"D must be an integer >= 2, got {D}")
    if not 1.0 < kappa_min <= kappa_max or not np.isfinite(kappa_max):
        raise ValueError(
            f"need 1 < kappa_min <= kappa_max < inf, got [{kappa_min}, {kappa_max}]; "
            "the concentration head is 1 + exp(.), so every kappa exceeds 1"
        )
    if family not in FAMILIES:
        raise ValueError(f"unknown posterior family {family!r}; choose from {FAMILIES}")
    if not kappa_pos > 0:
        raise ValueError(f"kappa_pos must be positive, got {kappa_pos}")

    rng = named_stream(seed, "process")
    probes = named_stream(seed, "process-probes").uniform(size=(N_PROBES, D))

    mu_spec = MlpSpec.from_widths([D, D, D, D], output_transform="l2-normalize")
    kappa_spec = MlpSpec.from_widths([D, D, 1], output_transform="one-plus-exp")

    for attempt in range(1, MAX_REINIT_ATTEMPTS + 1):
        mu_net = Mlp.create(mu_spec, rng)
        if min_pairwise_cosine(mu_net.predict(probes)) <= COLLAPSE_COSINE:
            break
    else:
        raise NumericalFailure(
            f"location network collapsed in {MAX_REINIT_ATTEMPTS} initializations "
            f"(D={D}, seed={seed})"
        )

    kappa_net = Mlp.create(kappa_spec, rng)
    raw = kappa_net.raw(probes).data.reshape(-1)
    kappa_net.calibrate_output(*fit_kappa_calibration(raw, kappa_min, kappa_max))

    for net in (mu_net, kappa_net):
        net.set_trainable(False)

    return GenerativeProcess(
        D=int(D),
        kappa_min=float(kappa_min),
        kappa_max=float(kappa_max),
        family=family,
        kappa_pos=float(kappa_pos),
        seed=int(seed),
        mu_net=mu_net,
        kappa_net=kappa_net,
        reinit_attempts=attempt,
    )


def posterior_of(proc: GenerativeProcess, x: np.ndarray) -> VmfParams:
    """P(z | x) for a single observation (kappa = inf for Dirac processes)."""
    x = check_observations(x, proc.D)
    if x.ndim != 1:
        raise ValueError("posterior_of takes a single observation; use predict for batches")
    mu, kappa = proc.predict(x)
    return VmfParams(mu=mu[0], kappa=float(kappa[0]))


def sample_posterior(
    proc: GenerativeProcess, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one latent per observation from the process's posterior family.

    Gaussian and Laplace families perturb mu(x) in ambient space with
    per-coordinate variance 1/kappa(x) (Gaussian) or diversity 1/kappa(x)
    (Laplace) and project back onto the sphere.
    """
    single = np.ndim(x) == 1
    mu, kappa = proc.predict(x)
    if proc.family == "vmf":
        z = vmf_sample_batch(mu, kappa, rng)
    elif proc.family == "dirac":
        z = mu.copy()
    else:
        if proc.family == "gaussian":
            noise = rng.standard_normal(size=mu.shape) * np.sqrt(1.0 / kappa)[:, None]
        else:
            noise = rng.laplace(loc=0.0, scale=1.0, size=mu.shape) * (1.0 / kappa)[:, None]
        z = mu + noise
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        z = np.where(norms > 0, z / np.where(norms > 0, norms, 1.0), mu)
    return z[0] if single else z


def save_process(proc: GenerativeProcess, path: Union[str, Path]) -> Path:
    """Serialize the networks plus a header (D, family, kappa range, kappa_pos, seed)."""
    tensors = {**proc.mu_net.state_dict("mu."), **proc.kappa_net.state_dict("kappa.")}
    header = {
        "kind": "generative-process",
        "D": proc.D,
        "family": proc.family,
        "kappa_min": proc.kappa_min,
        "kappa_max": proc.kappa_max,
        "kappa_pos": proc.kappa_pos,
        "seed": proc.seed,
        "reinit_attempts": proc.reinit_attempts,
    }
    return save_checkpoint(path, tensors, header)


def load_process(path: Union[str, Path]) -> GenerativeProcess:
    tensors, header = load_checkpoint(path)
    if header.get("kind") != "generative-process":
        raise ValueError(f"{path} does not hold a generative process")
    D = int(header["D"])
    mu_net = Mlp.create(
        MlpSpec.from_widths([D, D, D, D], output_transform="l2-normalize"),
        np.random.default_rng(0),
    )
    kappa_net = Mlp.create(
        MlpSpec.from_widths([D, D, 1], output_transform="one-plus-exp"), np.random.default_rng(0)
    )
    mu_net.load_state_dict(tensors, "mu.")
    kappa_net.load_state_dict(tensors, "kappa.")
    for net in (mu_net, kappa_net):
        net.set_trainable(False)
    return GenerativeProcess(
        D=D,
        kappa_min=float(header["kappa_min"]),
        kappa_max=float(header["kappa_max"]),
        family=str(header["family"]),
        kappa_pos=float(header["kappa_pos"]),
        seed=int(header["seed"]),
        mu_net=mu_net,
        kappa_net=kappa_net,
        reinit_attempts=int(header.get("reinit_attempts", 1)),
    )
