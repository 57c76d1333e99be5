"""
Configuration Management

Environment settings via pydantic-settings, and the validated experiment
configuration assembled from a preset, a flat ``key = value`` file and
command-line overrides.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from probcon.genproc import FAMILIES
from probcon.losses import LOSS_KINDS
from probcon.training import TrainConfig


class Settings(BaseSettings):
    """Environment settings; ``PROBCON_OUTPUT_DIR`` is the only experiment override."""

    model_config = SettingsConfigDict(
        env_prefix="PROBCON_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    output_dir: Path = Field(Path("./outputs"), description="Root directory for experiment outputs")
    max_parallel_processes: int = Field(
        1, description="Default workers for triplet generation and sweeps", ge=1, le=20
    )

    def __init__(self, **kwargs):
        """Initialize settings and create the output directory if it doesn't exist."""
        super().__init__(**kwargs)
        self.output_dir.mkdir(parents=True, exist_ok=True)


# Global settings instance
settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create the global settings instance.

    Returns:
        Settings instance loaded from environment variables
    """
    global settings
    if settings is None:
        settings = Settings()
    return settings


def reload_settings() -> Settings:
    """Reload settings from environment variables.

    Returns:
        Fresh Settings instance
    """
    global settings
    settings = Settings()
    return settings


class ExperimentConfig(BaseModel):
    """One fully resolved experiment: generative process, encoder and training."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    name: str = "experiment"

    # Generative process
    D: int = Field(10, ge=2, description="Observation and latent dimension")
    kappa_min: float = Field(16.0, gt=1.0, description="Smallest posterior concentration")
    kappa_max: float = Field(32.0, gt=1.0, description="Largest posterior concentration")
    family: str = Field("vmf", description="Posterior family of the process")
    kappa_pos: float = Field(20.0, gt=0.0, description="Positive-pair concentration")

    # Encoder
    D_enc: int = Field(10, ge=2, description="Encoder latent dimension")

    # Training
    batches: int = Field(2000, ge=0)
    batch_size: int = Field(128, ge=1)
    lr: float = Field(1e-4, gt=0.0)
    K: int = Field(16, ge=1, description="Monte-Carlo samples per posterior")
    M: int = Field(8, ge=0, description="Negatives per reference (0: in-batch)")
    phasewise: bool = False
    loss_kind: str = "mcinfonce"
    hib_a: float = 1.0
    hib_b: float = 0.0
    learn_kappa_pos: bool = False
    eval_every: int = Field(0, ge=0)
    eval_samples: int = Field(2000, ge=2)
    pair_budget: Optional[int] = Field(1_000_000, ge=1)
    workers: int = Field(1, ge=1, le=64)

    seed: int = Field(0, ge=0)
    output_dir: Optional[Path] = None

    @field_validator("family")
    @classmethod
    def _known_family(cls, value: str) -> str:
        value = value.strip().lower()
        if value not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {value!r}")
        return value

    @field_validator("loss_kind")
    @classmethod
    def _known_loss(cls, value: str) -> str:
        value = value.strip().lower()
        if value not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {value!r}")
        return value

    @field_validator("pair_budget", "output_dir", mode="before")
    @classmethod
    def _none_words(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() in ("", "none", "all"):
            return None
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.kappa_min > self.kappa_max:
            raise ValueError(
                f"kappa_min ({self.kappa_min}) must not exceed kappa_max ({self.kappa_max})"
            )
        if self.M == 0 and self.batch_size < 2:
            raise ValueError("in-batch negatives (M = 0) need batch_size >= 2")
        return self

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batches=self.batches,
            batch_size=self.batch_size,
            lr=self.lr,
            K=self.K,
            M=self.M,
            kappa_pos=self.kappa_pos,
            phasewise=self.phasewise,
            seed=self.seed,
            loss_kind=self.loss_kind,
            eval_every=self.eval_every,
            hib_a=self.hib_a,
            hib_b=self.hib_b,
            learn_kappa_pos=self.learn_kappa_pos,
            eval_samples=self.eval_samples,
            pair_budget=self.pair_budget,
            workers=self.workers,
        )

    def process_kwargs(self) -> Dict[str, Any]:
        return {
            "D": self.D,
            "kappa_min": self.kappa_min,
            "kappa_max": self.kappa_max,
            "family": self.family,
            "kappa_pos": self.kappa_pos,
            "seed": self.seed,
        }

    def resolved_output_dir(self) -> Path:
        """``output_dir`` if set, else ``<settings.output_dir>/<name>``."""
        if self.output_dir is not None:
            return Path(self.output_dir)
        return get_settings().output_dir / self.name


_FULLSCALE = {
    "D": 10,
    "D_enc": 10,
    "kappa_min": 16.0,
    "kappa_max": 32.0,
    "family": "vmf",
    "kappa_pos": 20.0,
    "batches": 100_000,
    "batch_size": 512,
    "lr": 1e-4,
    "K": 512,
    "M": 32,
    "phasewise": True,
    "eval_every": 5000,
    "eval_samples": 10_000,
}

_DESK = {
    "D": 3,
    "D_enc": 3,
    "kappa_min": 16.0,
    "kappa_max": 32.0,
    "family": "vmf",
    "kappa_pos": 20.0,
    "batches": 2000,
    "batch_size": 128,
    "lr": 1e-3,
    "K": 16,
    "M": 8,
    "phasewise": False,
    "eval_every": 200,
    "eval_samples": 2000,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "ambiguous-fullscale": {**_FULLSCALE},
    "clear-fullscale": {**_FULLSCALE, "kappa_min": 64.0, "kappa_max": 128.0},
    "injective-fullscale": {**_FULLSCALE, "family": "dirac"},
    "d2-fullscale": {**_FULLSCALE, "D": 2, "D_enc": 2, "batches": 8192},
    "gaussian-fullscale": {**_FULLSCALE, "family": "gaussian"},
    "laplace-fullscale": {**_FULLSCALE, "family": "laplace"},
    "mc-samples-fullscale": {**_FULLSCALE},
    "encoder-dim-fullscale": {**_FULLSCALE},
    "high-dim-fullscale": {**_FULLSCALE, "D": 16, "D_enc": 16},
    "ambiguous-desk": {**_DESK},
    "clear-desk": {**_DESK, "kappa_min": 64.0, "kappa_max": 128.0},
    "injective-desk": {**_DESK, "family": "dirac"},
    "d2-desk": {**_DESK, "D": 2, "D_enc": 2},
    "gaussian-desk": {**_DESK, "family": "gaussian"},
    "laplace-desk": {**_DESK, "family": "laplace"},
    "hib-desk": {**_DESK, "loss_kind": "hib", "M": 0, "hib_a": 1.0, "hib_b": 0.0},
    "elk-desk": {**_DESK, "loss_kind": "elk", "M": 1},
    "infonce-desk": {**_DESK, "loss_kind": "infonce"},
}


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse flat ``key = value`` lines; blank lines and ``#`` comments are skipped.

    Raises:
        ValueError: On a line without ``=`` or a repeated key
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {number}: empty key")
        if key in values:
            raise ValueError(f"line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """Turn ``["K=4", "family=dirac"]`` into a dict."""
    return parse_config_text("\n".join(pairs))


def resolve_config(
    preset: Optional[str] = None,
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Merge preset, file and overrides (later wins) into a validated config.

    Raises:
        ValueError: For an unknown preset
        pydantic.ValidationError: For unknown keys or out-of-range values
    """
    values: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
        values["name"] = preset
    if config_file is not None:
        values.update(load_config_file(config_file))
    if overrides:
        values.update(overrides)
    return ExperimentConfig(**values)
