"""
Tests for the generative process and triplet generation
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

import probcon.genproc.process as process_module
import probcon.genproc.triplets as triplets_module
from probcon.errors import NumericalFailure
from probcon.genproc import (
    FAMILIES,
    acceptance_log_prob,
    accepted_cosine_cdf,
    check_observations,
    fit_kappa_calibration,
    init_process,
    load_batch,
    load_process,
    min_pairwise_cosine,
    posterior_of,
    reference_uniformity,
    sample_posterior,
    sample_triplet_batch,
    save_batch,
    save_process,
)
from probcon.genproc.process import N_PROBES
from probcon.special import log_vmf_norm_const
from probcon.utils.rng import named_stream


@pytest.fixture
def process():
    return init_process(D=3, kappa_min=16.0, kappa_max=32.0, seed=0)


class TestInitProcess:
    """Tests for init_process and the posterior networks."""

    def test_same_seed_same_process(self):
        """Test that a seed fully determines the networks."""
        a = init_process(D=4, kappa_min=16.0, kappa_max=32.0, seed=3)
        b = init_process(D=4, kappa_min=16.0, kappa_max=32.0, seed=3)
        x = named_stream(0, "x").uniform(size=(10, 4))
        for left, right in zip(a.predict(x), b.predict(x)):
            np.testing.assert_array_equal(left, right)

    def test_kappa_range_spans_probe_set(self):
        """Test that the calibrated concentrations span [kappa_min, kappa_max] on the probes."""
        proc = init_process(D=10, kappa_min=16.0, kappa_max=32.0, seed=1)
        probes = named_stream(1, "process-probes").uniform(size=(N_PROBES, 10))
        kappa = proc.kappa_target(probes)
        assert kappa.min() == pytest.approx(16.0, abs=1e-9)
        assert kappa.max() == pytest.approx(32.0, abs=1e-9)

    def test_locations_are_unit_and_not_collapsed(self, process):
        """Test unit locations and the anti-collapse criterion."""
        probes = named_stream(0, "process-probes").uniform(size=(N_PROBES, 3))
        mu, _ = process.predict(probes)
        np.testing.assert_allclose(np.linalg.norm(mu, axis=1), 1.0, atol=1e-12)
        assert min_pairwise_cosine(mu) <= 0.5
        assert 1 <= process.reinit_attempts <= 100

    def test_dirac_family(self):
        """Test that the Dirac family reports infinite concentration and returns mu."""
        proc = init_process(D=3, kappa_min=16.0, kappa_max=32.0, family="dirac", seed=0)
        x = named_stream(0, "x").uniform(size=(5, 3))
        mu, kappa = proc.predict(x)
        assert proc.is_dirac
        assert np.all(np.isinf(kappa))
        np.testing.assert_array_equal(sample_posterior(proc, x, named_stream(0, "z")), mu)

    def test_gaussian_family_concentrates(self):
        """Test that a huge kappa keeps Gaussian draws next to mu."""
        proc = init_process(D=5, kappa_min=1e6, kappa_max=1e6, family="gaussian", seed=0)
        x = named_stream(0, "x").uniform(size=(200, 5))
        mu, _ = proc.predict(x)
        z = sample_posterior(proc, x, named_stream(0, "z"))
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)
        assert np.min(np.sum(z * mu, axis=1)) > 0.999

    def test_laplace_family_is_unit(self):
        """Test that Laplace draws are projected back onto the sphere."""
        proc = init_process(D=3, kappa_min=16.0, kappa_max=32.0, family="laplace", seed=0)
        z = sample_posterior(proc, named_stream(0, "x").uniform(size=(50, 3)), named_stream(1, "z"))
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"D": 1, "kappa_min": 16.0, "kappa_max": 32.0},
            {"D": 3, "kappa_min": 1.0, "kappa_max": 32.0},
            {"D": 3, "kappa_min": 40.0, "kappa_max": 32.0},
            {"D": 3, "kappa_min": 16.0, "kappa_max": 32.0, "family": "cauchy"},
            {"D": 3, "kappa_min": 16.0, "kappa_max": 32.0, "kappa_pos": 0.0},
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        """Test parameter validation."""
        with pytest.raises(ValueError):
            init_process(**kwargs)

    def test_low_kappa_min_names_the_head(self):
        """Test that kappa_min <= 1 explains the 1 + exp concentration head."""
        with pytest.raises(ValueError, match=r"1 \+ exp"):
            init_process(D=3, kappa_min=0.5, kappa_max=32.0)

    def test_collapse_raises_numerical_failure(self, monkeypatch):
        """Test that a collapsed location network is redrawn and eventually fails."""
        monkeypatch.setattr(process_module, "COLLAPSE_COSINE", -2.0)
        with pytest.raises(NumericalFailure):
            init_process(D=3, kappa_min=16.0, kappa_max=32.0, seed=0)

    def test_families_constant(self):
        """Test the supported families."""
        assert set(FAMILIES) == {"vmf", "gaussian", "laplace", "dirac"}


class TestObservations:
    """Tests for observation validation and single posteriors."""

    def test_rejects_out_of_cube(self):
        """Test that observations outside [0, 1]^D raise."""
        with pytest.raises(ValueError):
            check_observations(np.array([0.5, 1.5, 0.2]), 3)
        with pytest.raises(ValueError):
            check_observations(np.zeros((2, 4)), 3)

    def test_posterior_of_single_observation(self, process):
        """Test posterior_of against predict."""
        x = np.array([0.1, 0.5, 0.9])
        params = posterior_of(process, x)
        mu, kappa = process.predict(x[None, :])
        np.testing.assert_array_equal(params.mu, mu[0])
        assert params.kappa == kappa[0]

    def test_calibration_degenerate_range(self):
        """Test that a constant raw output maps to kappa_min."""
        a, b = fit_kappa_calibration(np.full(10, 0.3), 16.0, 32.0)
        assert a == 0.0
        assert 1.0 + np.exp(b) == pytest.approx(16.0)

    def test_save_and_load(self, process):
        """Test that a saved process predicts identically."""
        x = named_stream(0, "x").uniform(size=(20, 3))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_process(process, Path(tmpdir) / "process")
            loaded = load_process(path)
        assert loaded.seed == process.seed
        assert loaded.family == process.family
        for left, right in zip(process.predict(x), loaded.predict(x)):
            np.testing.assert_array_equal(left, right)


class TestTriplets:
    """Tests for rejection-sampled contrastive batches."""

    def test_batch_shapes(self, process):
        """Test refs, positives and negatives blocks."""
        batch = sample_triplet_batch(process, B=64, M=5, rng=named_stream(0, "t"))
        assert batch.refs.shape == (64, 3)
        assert batch.positives.shape == (64, 3)
        assert batch.negatives.shape == (64, 5, 3)
        assert batch.B == 64 and batch.M == 5
        assert 0.0 < batch.acceptance_rate <= 1.0
        for block in (batch.refs, batch.positives, batch.negatives):
            assert np.all((block >= 0.0) & (block <= 1.0))

    def test_in_batch_mode_has_empty_negatives(self, process):
        """Test M = 0."""
        batch = sample_triplet_batch(process, B=8, M=0, rng=named_stream(0, "t"))
        assert batch.negatives.shape == (8, 0, 3)

    def test_deterministic_and_worker_independent(self, process):
        """Test that the batch depends on the seed only, not on the worker count."""
        a = sample_triplet_batch(process, B=3000, M=2, rng=named_stream(9, "t"), chunk_size=512)
        b = sample_triplet_batch(
            process, B=3000, M=2, rng=named_stream(9, "t"), workers=4, chunk_size=512
        )
        np.testing.assert_array_equal(a.refs, b.refs)
        np.testing.assert_array_equal(a.positives, b.positives)
        np.testing.assert_array_equal(a.negatives, b.negatives)
        assert a.n_candidates == b.n_candidates

    def test_accepted_pairs_are_aligned(self, process):
        """Test that accepted latents are more aligned than independent ones."""
        batch = sample_triplet_batch(process, B=2000, M=0, rng=named_stream(1, "t"))
        cosine = np.sum(batch.ref_latents * batch.pos_latents, axis=1)
        assert cosine.mean() > 0.0

    def test_vanishing_kappa_pos_accepts_half(self):
        """Test that acceptance tends to 1/2 as kappa_pos -> 0."""
        proc = init_process(D=3, kappa_min=16.0, kappa_max=32.0, kappa_pos=1e-8, seed=0)
        np.testing.assert_allclose(
            np.exp(acceptance_log_prob(3, 1e-8, np.array([-1.0, 0.0, 1.0]))), 0.5, atol=1e-7
        )
        batch = sample_triplet_batch(proc, B=4000, M=0, rng=named_stream(0, "t"))
        assert batch.acceptance_rate == pytest.approx(0.5, abs=0.02)

    def test_balance_point_accepts_half(self):
        """Test acceptance 1/2 where C(kappa_pos) e^{kappa_pos t} = C(0)."""
        D, kappa_pos = 10, 20.0
        t_star = (log_vmf_norm_const(D, 0.0) - log_vmf_norm_const(D, kappa_pos)) / kappa_pos
        assert np.exp(acceptance_log_prob(D, kappa_pos, t_star)) == pytest.approx(0.5, abs=1e-12)

    def test_acceptance_is_finite_at_large_kappa_pos(self):
        """Test log-space acceptance for kappa_pos up to 1e3."""
        log_a = acceptance_log_prob(10, 1e3, np.linspace(-1.0, 1.0, 11))
        assert np.all(np.isfinite(log_a))
        assert np.all(log_a <= 0.0)

    def test_accepted_cosine_cdf_limits(self):
        """Test the CDF endpoints and monotonicity."""
        values = [accepted_cosine_cdf(3, 20.0, t) for t in (-1.0, -0.5, 0.0, 0.5, 1.0)]
        assert values[0] == 0.0
        assert values[-1] == 1.0
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_accepted_cosine_cdf_matches_direct_integral(self):
        """Test the CDF against quadrature of (1 - t^2)^((D-3)/2) times the acceptance."""
        D, kappa_pos = 5, 5.0
        log_ratio = log_vmf_norm_const(D, 0.0) - log_vmf_norm_const(D, kappa_pos)

        def density(t):
            return (1.0 - t * t) ** ((D - 3) / 2.0) / (1.0 + np.exp(log_ratio - kappa_pos * t))

        total = integrate.quad(density, -1.0, 1.0, epsabs=1e-13)[0]
        for t in (-0.7, 0.0, 0.4, 0.9):
            expected = integrate.quad(density, -1.0, t, epsabs=1e-13)[0] / total
            assert accepted_cosine_cdf(D, kappa_pos, t) == pytest.approx(expected, rel=1e-8)

    def test_accepted_cosines_follow_the_law(self, monkeypatch):
        """Test a KS fit of accepted z^T z+ when the latents are uniform on the sphere."""
        D, kappa_pos = 5, 5.0

        def uniform_latents(proc, x, rng):
            z = rng.standard_normal(size=x.shape)
            return z / np.linalg.norm(z, axis=-1, keepdims=True)

        monkeypatch.setattr(triplets_module, "sample_posterior", uniform_latents)
        proc = init_process(D=D, kappa_min=16.0, kappa_max=32.0, kappa_pos=kappa_pos, seed=0)
        batch = sample_triplet_batch(proc, B=1500, M=0, rng=named_stream(7, "law"))
        cosines = np.sum(batch.ref_latents * batch.pos_latents, axis=1)
        cdf = np.vectorize(lambda t: accepted_cosine_cdf(D, kappa_pos, t))
        assert stats.kstest(cosines, cdf).pvalue > 0.01

    def test_rejects_invalid_counts(self, process):
        """Test count validation."""
        with pytest.raises(ValueError):
            sample_triplet_batch(process, B=0, M=1, rng=named_stream(0, "t"))
        with pytest.raises(ValueError):
            sample_triplet_batch(process, B=4, M=-1, rng=named_stream(0, "t"))

    def test_reference_uniformity_report(self, process):
        """Test the fields of the uniformity diagnostic."""
        report = reference_uniformity(process, 500, named_stream(0, "u"))
        assert report["n"] == 500
        assert 0.0 <= report["mean_resultant"] <= 1.0
        assert 0.0 <= report["rayleigh_p_value"] <= 1.0
        assert report["standard_error"] == pytest.approx(1.0 / np.sqrt(500))

    def test_batch_dump_round_trip(self, process):
        """Test save_batch and load_batch."""
        batch = sample_triplet_batch(process, B=16, M=3, rng=named_stream(0, "t"))
        with tempfile.TemporaryDirectory() as tmpdir:
            loaded = load_batch(save_batch(batch, Path(tmpdir) / "batch", meta={"seed": 0}))
        np.testing.assert_array_equal(loaded.negatives, batch.negatives)
        assert loaded.n_candidates == batch.n_candidates
