"""
Tests for the vMF distribution
"""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from probcon.autodiff import Tensor
from probcon.special import log_vmf_norm_const, mean_resultant_length
from probcon.utils.rng import named_stream
from probcon.vmf import (
    RadialLaw,
    VmfParams,
    as_unit_vector,
    draw_reparam_noise,
    householder_to,
    radial_cdf,
    radial_cdf_batch,
    radial_pdf,
    radial_quantile,
    radial_quantile_batch,
    vmf_logpdf,
    vmf_sample,
    vmf_sample_batch,
    vmf_sample_reparam,
)


def _unit(D, axis=0):
    mu = np.zeros(D)
    mu[axis] = 1.0
    return mu


class TestVmfParams:
    """Tests for VmfParams and unit-vector validation."""

    def test_accepts_unit_vector(self):
        """Test construction and derived properties."""
        params = VmfParams(mu=_unit(4), kappa=3.0)
        assert params.D == 4
        assert not params.is_dirac

    def test_dirac_tag(self):
        """Test that kappa = inf marks a Dirac posterior."""
        assert VmfParams(mu=_unit(3), kappa=np.inf).is_dirac

    def test_rejects_non_unit_location(self):
        """Test that locations off the sphere raise."""
        with pytest.raises(ValueError):
            VmfParams(mu=np.array([1.0, 1.0, 0.0]), kappa=1.0)
        with pytest.raises(ValueError):
            as_unit_vector([0.6, 0.8 + 1e-6])

    def test_rejects_negative_kappa(self):
        """Test that negative concentrations raise."""
        with pytest.raises(ValueError):
            VmfParams(mu=_unit(3), kappa=-1.0)


class TestVmfLogpdf:
    """Tests for vmf_logpdf."""

    def test_mode_value(self):
        """Test ln C_3(1) + 1 at the mode."""
        params = VmfParams(mu=_unit(3), kappa=1.0)
        assert vmf_logpdf(params, _unit(3)) == pytest.approx(-1.6925, abs=1e-4)

    def test_uniform_limit(self):
        """Test that a vanishing kappa gives the uniform density."""
        params = VmfParams(mu=_unit(3), kappa=1e-12)
        z = np.array([0.0, 0.6, 0.8])
        assert vmf_logpdf(params, z) == pytest.approx(-np.log(4.0 * np.pi), abs=1e-9)

    @pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
    def test_integrates_to_one_on_s2(self, kappa):
        """Test normalization on the 2-sphere with Gauss-Legendre in cos(theta)."""
        params = VmfParams(mu=_unit(3), kappa=kappa)
        t, w = np.polynomial.legendre.leggauss(200)
        z = np.stack([t, np.sqrt(1.0 - t * t), np.zeros_like(t)], axis=1)
        total = 2.0 * np.pi * np.sum(w * np.exp(vmf_logpdf(params, z)))
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_dimension_mismatch(self):
        """Test that latents of another dimension raise."""
        with pytest.raises(ValueError):
            vmf_logpdf(VmfParams(mu=_unit(3), kappa=1.0), _unit(4))


class TestRadialLaw:
    """Tests for the radial marginal."""

    def test_three_dimensional_cdf(self):
        """Test F(t) = (e^{kappa t} - e^{-kappa}) / (e^kappa - e^{-kappa}) for D = 3."""
        law = RadialLaw(3, 2.0)
        for t in (-0.5, 0.0, 0.6623, 0.9):
            expected = (np.exp(2.0 * t) - np.exp(-2.0)) / (np.exp(2.0) - np.exp(-2.0))
            assert radial_cdf(law, t) == pytest.approx(expected, abs=1e-10)

    def test_density_normalized(self):
        """Test that the density integrates to one."""
        for D in (3, 10):
            for kappa in (0.5, 20.0):
                law = RadialLaw(D, kappa)
                total, _ = quad(lambda t: radial_pdf(law, t), -1.0, 1.0, epsabs=1e-12, limit=200)
                assert total == pytest.approx(1.0, abs=1e-8)

    def test_quantile_inverts_cdf(self):
        """Test quantile/CDF consistency."""
        law = RadialLaw(10, 20.0)
        for p in (1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6):
            assert radial_cdf(law, radial_quantile(law, p)) == pytest.approx(p, rel=1e-8)

    def test_batch_matches_scalar(self):
        """Test the vectorized CDF and quantile against the adaptive ones."""
        kappa = np.array([0.5, 5.0, 50.0, 500.0])
        t = np.array([-0.3, 0.4, 0.95, 0.999])
        expected = [radial_cdf(RadialLaw(10, k), s) for k, s in zip(kappa, t)]
        np.testing.assert_allclose(radial_cdf_batch(10, kappa, t), expected, rtol=1e-8)
        q = radial_quantile_batch(10, kappa, 0.3)
        np.testing.assert_allclose(radial_cdf_batch(10, kappa, q), 0.3, rtol=1e-8)

    def test_rejects_infinite_kappa(self):
        """Test that the radial law needs a finite concentration."""
        with pytest.raises(ValueError):
            RadialLaw(3, np.inf)


class TestSampling:
    """Tests for exact vMF sampling."""

    def test_samples_are_unit_vectors(self):
        """Test that draws lie on the sphere."""
        z = vmf_sample(VmfParams(mu=_unit(5), kappa=4.0), named_stream(0, "t"), size=1000)
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)

    def test_mean_resultant_and_radial_ks(self):
        """Test D = 10, kappa = 20: mean resultant and KS test of the radial coordinate."""
        D, kappa, n = 10, 20.0, 100_000
        mu = as_unit_vector(np.arange(1.0, D + 1.0) / np.linalg.norm(np.arange(1.0, D + 1.0)))
        z = vmf_sample(VmfParams(mu=mu, kappa=kappa), named_stream(1, "sampler"), size=n)
        w = z @ mu
        expected = mean_resultant_length(D, kappa)
        assert abs(w.mean() - expected) < 3.0 * w.std(ddof=1) / np.sqrt(n)
        result = stats.kstest(w, lambda t: radial_cdf_batch(D, kappa, t))
        assert result.pvalue > 0.01

    def test_tangent_part_is_isotropic(self):
        """Test that the mean of the draws points along mu."""
        mu = as_unit_vector([0.0, 0.6, 0.8])
        z = vmf_sample(VmfParams(mu=mu, kappa=5.0), named_stream(2, "t"), size=50_000)
        direction = z.mean(axis=0) / np.linalg.norm(z.mean(axis=0))
        assert direction @ mu > 0.999

    def test_spread_shrinks_as_kappa_grows(self):
        """Test that Var(mu^T z) falls strictly along an increasing kappa grid."""
        D, n = 5, 100_000
        mu = _unit(D, axis=3)
        variances = [
            np.var(vmf_sample(VmfParams(mu=mu, kappa=k), named_stream(i, "spread"), size=n) @ mu)
            for i, k in enumerate([0.5, 2.0, 8.0, 32.0, 128.0])
        ]
        assert all(a > b for a, b in zip(variances, variances[1:]))

    def test_dirac_returns_location(self):
        """Test that the Dirac tag returns mu exactly."""
        mu = _unit(4, axis=2)
        z = vmf_sample(VmfParams(mu=mu, kappa=np.inf), named_stream(0, "t"), size=3)
        np.testing.assert_array_equal(z, np.tile(mu, (3, 1)))

    def test_batch_sampler_is_deterministic(self):
        """Test equal seeds give equal draws and Dirac rows pass through."""
        mu = np.tile(_unit(3), (4, 1))
        kappa = np.array([1.0, 10.0, np.inf, 100.0])
        a = vmf_sample_batch(mu, kappa, named_stream(5, "batch"))
        b = vmf_sample_batch(mu, kappa, named_stream(5, "batch"))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a[2], mu[2])

    def test_householder_maps_north_pole(self):
        """Test that e_1 is sent to mu."""
        mu = as_unit_vector([0.0, 0.0, 1.0])
        np.testing.assert_allclose(householder_to(mu, _unit(3)), mu, atol=1e-15)


class TestReparametrizedSampling:
    """Tests for tape-connected sampling."""

    def test_shapes_and_unit_norm(self):
        """Test the (K, N, D) layout."""
        mu = Tensor(np.tile(_unit(4), (3, 1)), requires_grad=True)
        kappa = Tensor(np.array([2.0, 5.0, 9.0]), requires_grad=True)
        z, noise = vmf_sample_reparam(mu, kappa, named_stream(0, "r"), K=7)
        assert z.shape == (7, 3, 4)
        assert noise.K == 7
        np.testing.assert_allclose(np.linalg.norm(z.data, axis=-1), 1.0, atol=1e-12)

    def test_kappa_gradient_matches_mean_resultant_slope(self):
        """Test d/dkappa E[mu^T z] = A_D'(kappa) through the sampler."""
        D, k0, K = 5, 8.0, 200_000
        mu = Tensor(_unit(D))
        kappa = Tensor(np.array(k0), requires_grad=True)
        z, _ = vmf_sample_reparam(mu, kappa, named_stream(3, "r"), K=K)
        (z[:, 0]).mean().backward()
        h = 1e-4
        slope = (mean_resultant_length(D, k0 + h) - mean_resultant_length(D, k0 - h)) / (2 * h)
        assert float(kappa.grad) == pytest.approx(slope, rel=0.05)

    def test_agrees_with_exact_sampler(self):
        """Test a two-sample KS fit of mu^T z against the rejection sampler."""
        D, kappa, n = 6, 7.0, 5000
        mu = as_unit_vector(np.array([0.0, 3.0, 0.0, 4.0, 0.0, 0.0]) / 5.0)
        z, _ = vmf_sample_reparam(Tensor(mu), Tensor(np.array(kappa)), named_stream(6, "r"), K=n)
        exact = vmf_sample(VmfParams(mu=mu, kappa=kappa), named_stream(7, "exact"), size=n)
        assert stats.ks_2samp(z.data @ mu, exact @ mu).pvalue > 0.01

    @pytest.mark.parametrize("direction", ["aligned", "generic"])
    def test_gradient_at_north_pole(self, direction):
        """Test that mu = e_1 still passes a location gradient through the sampler."""
        D = 4
        mu_value = _unit(D) if direction == "aligned" else as_unit_vector([0.5, 0.5, 0.5, 0.5])
        mu = Tensor(mu_value, requires_grad=True)
        z, _ = vmf_sample_reparam(mu, Tensor(np.array(5.0)), named_stream(8, "r"), K=500)
        (z[:, 1]).mean().backward()
        assert np.all(np.isfinite(mu.grad))
        assert np.linalg.norm(mu.grad) > 0.0
        if direction == "aligned":
            assert mu.grad[1] == pytest.approx(z.data[:, 0].mean(), rel=1e-12)

    def test_replayed_noise_is_common_random_numbers(self):
        """Test that replaying noise reproduces the draws."""
        mu = Tensor(np.tile(_unit(3), (2, 1)))
        kappa = Tensor(np.array([3.0, 30.0]))
        noise = draw_reparam_noise(3, kappa.data, 5, named_stream(0, "crn"))
        a, _ = vmf_sample_reparam(mu, kappa, None, K=5, noise=noise)
        b, _ = vmf_sample_reparam(mu, kappa, None, K=5, noise=noise)
        np.testing.assert_array_equal(a.data, b.data)

    def test_rejects_dirac(self):
        """Test that Dirac concentrations have no reparametrization."""
        with pytest.raises(ValueError):
            vmf_sample_reparam(Tensor(_unit(3)), Tensor(np.array(np.inf)), named_stream(0, "r"), 2)

    def test_norm_const_consistency(self):
        """Test the sampler's mean against the Bessel ratio for D = 3."""
        mu = Tensor(_unit(3))
        kappa = Tensor(np.array(2.0))
        z, _ = vmf_sample_reparam(mu, kappa, named_stream(4, "r"), K=100_000)
        expected = 1.0 / np.tanh(2.0) - 0.5
        assert z.data[:, 0].mean() == pytest.approx(expected, abs=0.01)
        assert np.isfinite(log_vmf_norm_const(3, 2.0))
