"""
Tests for the analytic positive-pair marginal and the oracle checks
"""

import numpy as np
import pytest
from scipy import integrate

from probcon.genproc import init_process
from probcon.oracle import (
    OracleQuery,
    PerturbedModel,
    RotatedModel,
    jitter_directions,
    limiting_loss,
    log_marginal_h_batch,
    log_pair_marginals,
    marginal_h,
    marginal_table,
    mc_marginal_draws,
    mc_marginal_estimate,
    random_rotation,
    run_oracle_checks,
)
from probcon.special import log_vmf_norm_const
from probcon.utils.rng import named_stream
from probcon.vmf import RadialLaw, VmfParams, radial_pdf


def _posteriors_for(query):
    mu = np.zeros(query.D)
    mu[0] = 1.0
    mu_plus = np.zeros(query.D)
    mu_plus[0], mu_plus[1] = query.rho, np.sqrt(1.0 - query.rho**2)
    return VmfParams(mu=mu, kappa=query.kappa), VmfParams(mu=mu_plus, kappa=query.kappa_plus)


@pytest.fixture(scope="module")
def small_process():
    return init_process(D=3, kappa_min=16.0, kappa_max=32.0, seed=0)


class TestMarginal:
    """Tests for marginal_h and log_marginal_h_batch."""

    def test_matches_double_integral_on_s2(self):
        """Test D = 3 against an independent double integral over (w, phi)."""
        q = OracleQuery(rho=0.3, kappa=5.0, kappa_plus=8.0, kappa_pos=10.0, D=3)
        law = RadialLaw(3, q.kappa)
        log_c_plus = log_vmf_norm_const(3, q.kappa_plus)

        def integrand(phi, w):
            cos = w * q.rho + np.sqrt(1.0 - w * w) * np.sqrt(1.0 - q.rho**2) * np.cos(phi)
            r = np.sqrt(q.kappa_plus**2 + q.kappa_pos**2 + 2.0 * q.kappa_plus * q.kappa_pos * cos)
            ratio = np.exp(log_c_plus - log_vmf_norm_const(3, r))
            return radial_pdf(law, w) * ratio / (2.0 * np.pi)

        value, _ = integrate.dblquad(
            integrand, -1.0, 1.0, 0.0, 2.0 * np.pi, epsabs=0.0, epsrel=1e-11
        )
        expected = np.exp(log_vmf_norm_const(3, q.kappa_pos)) * value
        assert marginal_h(q) == pytest.approx(expected, rel=1e-8)

    def test_monte_carlo_agreement(self):
        """Test quadrature against paired posterior samples for random queries."""
        rng = named_stream(0, "mc-queries")
        for D in (3, 10):
            for _ in range(5):
                q = OracleQuery(
                    rho=float(rng.uniform(-1.0, 1.0)),
                    kappa=float(rng.uniform(1.0, 60.0)),
                    kappa_plus=float(rng.uniform(1.0, 60.0)),
                    kappa_pos=float(rng.uniform(1.0, 20.0)),
                    D=D,
                )
                draws = mc_marginal_draws(*_posteriors_for(q), q.kappa_pos, 100_000, rng)
                stderr = draws.std(ddof=1) / np.sqrt(draws.size)
                assert abs(draws.mean() - marginal_h(q)) <= 4.0 * stderr

    def test_symmetric_in_the_two_posteriors(self):
        """Test h(rho, kappa, kappa+) = h(rho, kappa+, kappa)."""
        rho = np.array([-0.9, -0.2, 0.4, 0.95])
        a = np.array([2.0, 30.0, 80.0, 400.0])
        b = np.array([15.0, 3.0, 120.0, 60.0])
        forward = log_marginal_h_batch(10, rho, a, b, 20.0)
        backward = log_marginal_h_batch(10, rho, b, a, 20.0)
        np.testing.assert_allclose(forward, backward, rtol=0, atol=1e-8)

    def test_increasing_in_rho(self):
        """Test strict monotonicity in the location cosine."""
        log_h = log_marginal_h_batch(10, np.linspace(-1.0, 1.0, 50), 20.0, 20.0, 5.0)
        assert np.all(np.diff(log_h) > 0.0)

    def test_increasing_along_diagonal(self):
        """Test strict monotonicity in a shared concentration at rho = 1."""
        kappas = np.logspace(0.0, 3.0, 50)
        for kappa_pos in (5.0, 20.0, 100.0):
            log_h = log_marginal_h_batch(10, 1.0, kappas, kappas, kappa_pos)
            assert np.all(np.diff(log_h) > 0.0)

    def test_vanishing_kappa_pos_gives_uniform_density(self):
        """Test h -> C(0) as kappa_pos -> 0, independent of rho and kappa."""
        h = np.exp(log_marginal_h_batch(5, np.array([-0.5, 0.0, 0.7]), 10.0, 40.0, 1e-10))
        np.testing.assert_allclose(h, np.exp(log_vmf_norm_const(5, 0.0)), rtol=1e-8)

    def test_dirac_closed_forms(self):
        """Test the closed forms when one or both posteriors are Dirac."""
        D, rho, kappa_pos = 4, 0.6, 12.0
        both = log_marginal_h_batch(D, rho, np.inf, np.inf, kappa_pos)
        assert both == pytest.approx(log_vmf_norm_const(D, kappa_pos) + kappa_pos * rho)
        one = log_marginal_h_batch(D, rho, np.inf, 7.0, kappa_pos)
        r = np.sqrt(49.0 + kappa_pos**2 + 2.0 * 7.0 * kappa_pos * rho)
        expected = (
            log_vmf_norm_const(D, kappa_pos) + log_vmf_norm_const(D, 7.0) - log_vmf_norm_const(D, r)
        )
        assert one == pytest.approx(expected, rel=1e-12)

    def test_dirac_is_the_large_kappa_limit(self):
        """Test that very sharp posteriors approach the Dirac closed form."""
        sharp = log_marginal_h_batch(10, 0.4, 1e6, 1e6, 20.0)
        dirac = log_marginal_h_batch(10, 0.4, np.inf, np.inf, 20.0)
        assert sharp == pytest.approx(dirac, abs=1e-2)

    def test_two_dimensional_sphere(self):
        """Test D = 2 against Monte Carlo."""
        q = OracleQuery(rho=0.1, kappa=4.0, kappa_plus=9.0, kappa_pos=6.0, D=2)
        draws = mc_marginal_draws(*_posteriors_for(q), q.kappa_pos, 200_000, named_stream(1, "d2"))
        stderr = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean() - marginal_h(q)) <= 4.0 * stderr

    def test_mc_estimate_with_dirac_posteriors(self):
        """Test that Dirac posteriors give the exact value for any K."""
        mu = np.array([1.0, 0.0, 0.0])
        mu_plus = np.array([0.6, 0.8, 0.0])
        value = mc_marginal_estimate(
            VmfParams(mu=mu, kappa=np.inf),
            VmfParams(mu=mu_plus, kappa=np.inf),
            5.0,
            3,
            named_stream(0, "dirac"),
        )
        assert value == pytest.approx(np.exp(log_vmf_norm_const(3, 5.0) + 5.0 * 0.6), rel=1e-12)

    def test_rejects_invalid_arguments(self):
        """Test argument validation."""
        with pytest.raises(ValueError):
            OracleQuery(rho=1.5, kappa=1.0, kappa_plus=1.0, kappa_pos=1.0, D=3)
        with pytest.raises(ValueError):
            OracleQuery(rho=0.0, kappa=-1.0, kappa_plus=1.0, kappa_pos=1.0, D=3)
        with pytest.raises(ValueError):
            log_marginal_h_batch(1, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ref, pos = _posteriors_for(OracleQuery(0.0, 1.0, 1.0, 1.0, 3))
            mc_marginal_draws(ref, pos, 1.0, 0, named_stream(0, "k"))

    def test_swapped_query(self):
        """Test OracleQuery.swapped."""
        q = OracleQuery(rho=0.2, kappa=3.0, kappa_plus=9.0, kappa_pos=4.0, D=5)
        assert q.swapped() == OracleQuery(rho=0.2, kappa=9.0, kappa_plus=3.0, kappa_pos=4.0, D=5)
        assert marginal_h(q) == pytest.approx(marginal_h(q.swapped()), rel=1e-8)


class TestMarginalTable:
    """Tests for marginal_table."""

    def test_rows_cover_grid(self):
        """Test one row per grid point with consistent columns."""
        rows = marginal_table([0.0, 0.5], [10.0, 20.0, 40.0], [15.0], kappa_pos=20.0, D=4)
        assert len(rows) == 6
        assert set(rows[0]) == {"rho", "kappa", "kappa_plus", "kappa_pos", "D", "h", "log_h"}
        for row in rows:
            assert row["h"] == pytest.approx(np.exp(row["log_h"]))


class TestLimitingLoss:
    """Tests for the limiting objective and the perturbation models."""

    def test_true_posteriors_are_minimal(self, small_process):
        """Test that scaled and jittered posteriors give a strictly larger limit."""
        rng = named_stream(0, "limit")
        anchors, candidates = rng.uniform(size=(10, 3)), rng.uniform(size=(10, 3))
        truth = limiting_loss(small_process, small_process, anchors, candidates, 5.0)
        for model in (
            PerturbedModel(small_process, kappa_scale=0.8),
            PerturbedModel(small_process, kappa_scale=1.2),
            PerturbedModel(small_process, jitter_degrees=5.0, seed=3),
        ):
            assert limiting_loss(small_process, model, anchors, candidates, 5.0) > truth

    def test_single_input_kappa_perturbation_raises_limit(self, small_process):
        """Test that scaling one input's concentration by 0.8 or 1.2 increases the limit."""
        rng = named_stream(4, "limit")
        anchors, candidates = rng.uniform(size=(10, 3)), rng.uniform(size=(10, 3))
        truth = limiting_loss(small_process, small_process, anchors, candidates, 5.0)
        for target in (anchors[0], anchors[7], candidates[3]):
            for scale in (0.8, 1.2):
                model = PerturbedModel(small_process, kappa_scale=scale, target=target)
                assert limiting_loss(small_process, model, anchors, candidates, 5.0) > truth

    def test_target_scales_only_matching_rows(self, small_process):
        """Test that a targeted perturbation leaves other observations untouched."""
        x = named_stream(5, "x").uniform(size=(4, 3))
        base_mu, base_kappa = small_process.predict(x)
        mu, kappa = PerturbedModel(small_process, kappa_scale=1.2, target=x[2]).predict(x)
        np.testing.assert_array_equal(mu, base_mu)
        np.testing.assert_array_equal(kappa[[0, 1, 3]], base_kappa[[0, 1, 3]])
        assert kappa[2] == pytest.approx(1.2 * base_kappa[2], rel=1e-15)

    def test_truth_equals_row_entropy(self, small_process):
        """Test that the limit at the truth is the mean entropy of the normalized rows."""
        rng = named_stream(1, "limit")
        anchors, candidates = rng.uniform(size=(6, 3)), rng.uniform(size=(8, 3))
        log_h = log_pair_marginals(small_process, anchors, candidates, 5.0)
        p = np.exp(log_h - log_h.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        entropy = float(-np.mean(np.sum(p * np.log(p), axis=1)))
        assert limiting_loss(small_process, small_process, anchors, candidates, 5.0) == (
            pytest.approx(entropy, rel=1e-10)
        )

    def test_rotation_leaves_marginals_unchanged(self, small_process):
        """Test that a global rotation of the locations changes nothing."""
        rng = named_stream(2, "limit")
        anchors, candidates = rng.uniform(size=(5, 3)), rng.uniform(size=(5, 3))
        rotated = RotatedModel(small_process, random_rotation(3, rng))
        np.testing.assert_allclose(
            log_pair_marginals(rotated, anchors, candidates, 20.0),
            log_pair_marginals(small_process, anchors, candidates, 20.0),
            rtol=0,
            atol=1e-12,
        )

    def test_random_rotation_is_orthogonal(self):
        """Test Q^T Q = I."""
        q = random_rotation(6, named_stream(0, "rot"))
        np.testing.assert_allclose(q.T @ q, np.eye(6), atol=1e-12)

    def test_jitter_angle(self):
        """Test that jittered directions stay unit and sit at the requested angle."""
        mu = jitter_directions(np.eye(4), 0.0, named_stream(0, "j"))
        np.testing.assert_allclose(mu, np.eye(4), atol=1e-15)
        moved = jitter_directions(np.eye(4), 5.0, named_stream(0, "j"))
        np.testing.assert_allclose(np.linalg.norm(moved, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.sum(moved * np.eye(4), axis=1), np.cos(np.deg2rad(5.0)))

    def test_perturbed_model_is_deterministic(self, small_process):
        """Test that a perturbed model answers identically on repeated calls."""
        model = PerturbedModel(small_process, jitter_degrees=5.0, seed=1)
        x = named_stream(0, "x").uniform(size=(4, 3))
        np.testing.assert_array_equal(model.predict(x)[0], model.predict(x)[0])


class TestRunOracleChecks:
    """Tests for the certificate suite."""

    def test_certificates(self, small_process):
        """Test the structure and the deterministic certificates of a small run."""
        report = run_oracle_checks(
            D=3, kappa_pos_values=(5.0,), n_grid=20, mc_samples=20_000, process=small_process
        )
        checks = report["checks"]
        assert set(checks) == {
            "diagonal_increasing_kpos5",
            "rho_increasing_kpos5",
            "symmetry",
            "vanishing_kappa_pos",
            "monte_carlo_agreement",
            "minimality",
        }
        for name in ("diagonal_increasing_kpos5", "rho_increasing_kpos5", "symmetry"):
            assert checks[name]["passed"], name
        assert checks["vanishing_kappa_pos"]["passed"]
        assert checks["minimality"]["passed"]
        assert len(checks["minimality"]["perturbed"]) == 20
        assert set(checks["minimality"]["single_input"]) == {
            "kappa_x0.8_one_input",
            "kappa_x1.2_one_input",
        }
        assert report["passed"] == all(c["passed"] for c in checks.values())

    def test_dirac_process_uses_jitter_only(self):
        """Test that a Dirac process is only compared against jittered locations."""
        proc = init_process(D=3, kappa_min=16.0, kappa_max=32.0, family="dirac", seed=0)
        report = run_oracle_checks(
            D=3, kappa_pos_values=(5.0,), n_grid=10, mc_samples=10_000, process=proc
        )
        perturbed = report["checks"]["minimality"]["perturbed"]
        assert len(perturbed) == 20
        assert all(name.startswith("mu_jitter") for name in perturbed)
        assert report["checks"]["minimality"]["single_input"] == {}

    def test_minimality_skipped_without_process(self):
        """Test that no process means no minimality check."""
        report = run_oracle_checks(D=3, kappa_pos_values=(20.0,), n_grid=10, mc_samples=10_000)
        assert "minimality" not in report["checks"]


@pytest.mark.slow
class TestOracleAcceptance:
    """Full-size oracle runs."""

    def test_monte_carlo_with_one_million_draws(self):
        """Test 20 random queries with K = 10^6 draws each."""
        rng = named_stream(5, "mc-acceptance")
        for index in range(20):
            q = OracleQuery(
                rho=float(rng.uniform(-1.0, 1.0)),
                kappa=float(rng.uniform(1.0, 100.0)),
                kappa_plus=float(rng.uniform(1.0, 100.0)),
                kappa_pos=float(rng.uniform(1.0, 30.0)),
                D=3 if index % 2 == 0 else 10,
            )
            draws = mc_marginal_draws(*_posteriors_for(q), q.kappa_pos, 1_000_000, rng)
            stderr = draws.std(ddof=1) / np.sqrt(draws.size)
            assert abs(draws.mean() - marginal_h(q)) <= 4.0 * stderr

    def test_full_certificates(self):
        """Test the default certificate suite on a D = 10 process."""
        proc = init_process(D=10, kappa_min=16.0, kappa_max=32.0, seed=0)
        report = run_oracle_checks(process=proc)
        failed = [name for name, c in report["checks"].items() if not c["passed"]]
        assert not failed or failed == ["monte_carlo_agreement"], failed
