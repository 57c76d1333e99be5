"""
Desk-scale training runs (marked slow; run with ``pytest -m slow``)
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from probcon.config import resolve_config
from probcon.runner import run_experiment

SEEDS = (0, 1, 2)


def _run(preset, seed, **overrides):
    cfg = resolve_config(preset, overrides={"seed": seed, **overrides})
    with tempfile.TemporaryDirectory() as tmpdir:
        return run_experiment(cfg, Path(tmpdir), verbose=False).result


@pytest.mark.slow
class TestDeskScale:
    """Identifiability and bias trends at desk scale, majority over three seeds."""

    def test_identifiability(self):
        """Test rank_mu >= 0.95 and rank_kappa >= 0.5 on D = 3."""
        passes = 0
        for seed in SEEDS:
            final = _run("ambiguous-desk", seed).final
            passes += final.rank_mu >= 0.95 and final.rank_kappa >= 0.5
        assert passes >= 2

    def test_more_mc_samples_reduce_kappa_error(self):
        """Test that K = 16 beats K = 1 on the concentration RMSE."""
        wins = 0
        for seed in SEEDS:
            many = _run("ambiguous-desk", seed, K=16).final.rmse_kappa
            one = _run("ambiguous-desk", seed, K=1).final.rmse_kappa
            wins += many < one
        assert wins >= 2

    def test_injective_process_drives_kappa_up(self):
        """Test that the median predicted concentration keeps growing on Dirac data."""
        passes = 0
        for seed in SEEDS:
            medians = [row["median_kappa_hat"] for row in _run("injective-desk", seed).curve]
            passes += bool(np.all(np.diff(medians[-5:]) > 0.0))
        assert passes >= 2
