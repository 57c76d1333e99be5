"""
Report Writers

Helpers for the machine-readable outputs of an experiment: JSON reports,
CSV tables and the plain-text config echo. Every file written through
``ReportWriter`` carries the resolved config and seed.
"""

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars, arrays, dataclasses and non-finite floats for JSON.

    NaN becomes ``None``; infinities become the strings ``"inf"`` / ``"-inf"``.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if hasattr(value, "model_dump"):
        return to_jsonable(value.model_dump())
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number):
            return None
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    if isinstance(value, Path):
        return str(value)
    return value


def embed_provenance(payload: Mapping[str, Any], config: Any, seed: int) -> Dict[str, Any]:
    """Return ``payload`` with the resolved config and seed attached."""
    return {
        "config": to_jsonable(config),
        "seed": int(seed),
        **{k: to_jsonable(v) for k, v in payload.items()},
    }


class ReportWriter:
    """Writes experiment outputs under one output directory."""

    def __init__(self, output_dir: Path, config: Any, seed: int):
        """Initialize the writer.

        Args:
            output_dir: Directory receiving every file (created if missing)
            config: Resolved experiment config, echoed into each output
            seed: Master seed of the experiment
        """
        self.output_dir = Path(output_dir)
        self.config = config
        self.seed = int(seed)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def save_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        """Save ``payload`` as pretty-printed JSON with provenance.

        Keys are sorted so equal runs produce byte-identical files.
        """
        output_path = self.path(name)
        document = embed_provenance(payload, self.config, self.seed)
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, sort_keys=True)
            f.write("\n")
        return output_path

    def save_csv(
        self,
        name: str,
        rows: Iterable[Sequence[Any]],
        header: Sequence[str],
        comment: Optional[str] = None,
    ) -> Path:
        """Save a table as CSV.

        The first lines are ``#``-prefixed comments holding the config and
        seed as JSON, followed by the header row.
        """
        output_path = self.path(name)
        provenance = json.dumps(
            {"config": to_jsonable(self.config), "seed": self.seed}, sort_keys=True
        )
        with open(output_path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# {provenance}\n")
            if comment:
                f.write(f"# {comment}\n")
            writer = csv.writer(f)
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([_csv_cell(v) for v in row])
        return output_path

    def save_config_echo(self, name: str = "config.txt") -> Path:
        """Save the resolved config as flat ``key = value`` text."""
        output_path = self.path(name)
        values = to_jsonable(self.config)
        lines: List[str] = [f"# seed = {self.seed}"]
        for key in sorted(values):
            lines.append(f"{key} = {values[key]}")
        with open(output_path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        return output_path


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def read_csv_table(path: Path) -> List[Dict[str, str]]:
    """Read a CSV written by ``ReportWriter.save_csv`` (comment lines skipped)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
