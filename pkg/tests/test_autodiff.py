"""
Tests for the autodiff engine, MLPs, Adam and checkpoints
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from probcon.autodiff import (
    Adam,
    Mlp,
    MlpSpec,
    Tensor,
    exp,
    l2_normalize,
    leaky_relu,
    load_checkpoint,
    log,
    log_vmf_norm_const,
    logsumexp,
    matmul,
    no_grad,
    save_checkpoint,
    sigmoid,
    sqrt,
    tsum,
)
from probcon.special import mean_resultant_length
from probcon.utils.rng import named_stream


def _numeric_grad(f, x, h=1e-6):
    """Central differences of a scalar function of an array."""
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def _check_grad(build, x, rtol=1e-6, atol=1e-8):
    t = Tensor(x, requires_grad=True)
    build(t).backward()
    expected = _numeric_grad(lambda v: build(Tensor(v)).item(), x)
    np.testing.assert_allclose(t.grad, expected, rtol=rtol, atol=atol)


class TestTensorGradients:
    """Tests for tape gradients against finite differences."""

    def setup_method(self):
        self.x = named_stream(0, "ad").normal(size=(3, 4))

    def test_elementwise_chain(self):
        """Test exp, log, sqrt and arithmetic."""
        _check_grad(
            lambda t: tsum(log(1.0 + exp(t)) * sqrt(t * t + 1.0) / (2.0 - sigmoid(t))), self.x
        )

    def test_matmul_and_broadcast(self):
        """Test matmul with a broadcast bias."""
        w = named_stream(1, "ad").normal(size=(4, 2))
        b = np.array([0.3, -0.2])
        _check_grad(lambda t: tsum(leaky_relu(matmul(t, w) + b)), self.x)

    def test_logsumexp_is_shift_stable(self):
        """Test logsumexp([1000, 1000]) = 1000 + ln 2 and its gradient."""
        t = Tensor(np.array([1000.0, 1000.0]), requires_grad=True)
        out = logsumexp(t)
        assert out.item() == pytest.approx(1000.0 + np.log(2.0))
        out.backward()
        np.testing.assert_allclose(t.grad, [0.5, 0.5])

    def test_logsumexp_axis_gradient(self):
        """Test the gradient of a row-wise logsumexp."""
        _check_grad(lambda t: tsum(logsumexp(t, axis=1) * np.array([1.0, 2.0, -1.0])), self.x)

    def test_l2_normalize(self):
        """Test unit output and gradient of the projection."""
        out = l2_normalize(Tensor(self.x))
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=1), 1.0, atol=1e-12)
        weights = named_stream(2, "ad").normal(size=(3, 4))
        _check_grad(lambda t: tsum(l2_normalize(t) * weights), self.x)

    def test_l2_normalize_zero_vector(self):
        """Test that a zero row maps to the first basis vector with zero adjoint."""
        t = Tensor(np.zeros((1, 3)), requires_grad=True)
        out = l2_normalize(t)
        np.testing.assert_array_equal(out.data, [[1.0, 0.0, 0.0]])
        tsum(out * np.array([1.0, 2.0, 3.0])).backward()
        np.testing.assert_array_equal(t.grad, np.zeros((1, 3)))

    def test_log_norm_const_adjoint(self):
        """Test that the adjoint of ln C_D is -A_D."""
        kappa = Tensor(np.array([0.5, 7.0, 300.0]), requires_grad=True)
        tsum(log_vmf_norm_const(10, kappa)).backward()
        np.testing.assert_allclose(kappa.grad, -mean_resultant_length(10, kappa.data), rtol=1e-12)

    def test_indexing_accumulates_repeats(self):
        """Test that repeated indices add their adjoints."""
        t = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        tsum(t[np.array([0, 0, 2])]).backward()
        np.testing.assert_array_equal(t.grad, [2.0, 0.0, 1.0])

    def test_no_grad_records_nothing(self):
        """Test that no_grad produces detached outputs."""
        t = Tensor(self.x, requires_grad=True)
        with no_grad():
            out = tsum(t * 2.0)
        assert not out.requires_grad

    def test_non_scalar_backward_needs_seed(self):
        """Test that a non-scalar output without a seed raises."""
        t = Tensor(self.x, requires_grad=True)
        with pytest.raises(ValueError):
            (t * 2.0).backward()


class TestMlp:
    """Tests for Mlp and MlpSpec."""

    def test_spec_validation(self):
        """Test that malformed specs raise."""
        with pytest.raises(ValueError):
            MlpSpec(layer_dims=((3, 4), (5, 1)))
        with pytest.raises(ValueError):
            MlpSpec.from_widths([3, 4, 2], output_transform="one-plus-exp")
        with pytest.raises(ValueError):
            MlpSpec.from_widths([3, 4], output_transform="softmax")

    def test_output_transforms(self):
        """Test unit-norm and greater-than-one heads."""
        rng = named_stream(0, "mlp")
        x = rng.normal(size=(5, 3))
        mu_head = Mlp.create(MlpSpec.from_widths([3, 8, 4], "l2-normalize"), rng)
        kappa_head = Mlp.create(MlpSpec.from_widths([3, 8, 1], "one-plus-exp"), rng)
        np.testing.assert_allclose(np.linalg.norm(mu_head.predict(x), axis=1), 1.0, atol=1e-12)
        kappa = kappa_head.predict(x)
        assert kappa.shape == (5,)
        assert np.all(kappa > 1.0)
        assert kappa_head.predict(x[0]).shape == ()

    def test_rejects_wrong_input_width(self):
        """Test that a mismatched feature length raises."""
        mlp = Mlp.create(MlpSpec.from_widths([3, 4]), named_stream(0, "mlp"))
        with pytest.raises(ValueError):
            mlp.predict(np.zeros((2, 5)))

    def test_parameter_gradients(self):
        """Test a weight gradient against finite differences."""
        rng = named_stream(1, "mlp")
        mlp = Mlp.create(MlpSpec.from_widths([3, 6, 2]), rng)
        x = rng.normal(size=(4, 3))
        tsum(mlp(x) * mlp(x)).backward()
        weight = mlp.params[0]

        def f(value):
            twin = mlp.copy()
            twin.params[0].data = value
            return float(np.sum(twin.predict(x) ** 2))

        np.testing.assert_allclose(weight.grad, _numeric_grad(f, weight.data), rtol=1e-5, atol=1e-8)

    def test_calibrate_output(self):
        """Test that calibration applies an affine map to the raw output."""
        mlp = Mlp.create(MlpSpec.from_widths([2, 5, 1]), named_stream(2, "mlp"))
        x = named_stream(3, "mlp").normal(size=(4, 2))
        before = mlp.raw(x).data
        mlp.calibrate_output(2.0, -1.0)
        np.testing.assert_allclose(mlp.raw(x).data, 2.0 * before - 1.0, rtol=1e-12)

    def test_state_dict_round_trip(self):
        """Test that state dicts load into a fresh network."""
        spec = MlpSpec.from_widths([3, 4, 2])
        a = Mlp.create(spec, named_stream(0, "a"))
        b = Mlp.create(spec, named_stream(0, "b"))
        b.load_state_dict(a.state_dict())
        x = np.ones((2, 3))
        np.testing.assert_array_equal(a.predict(x), b.predict(x))


class TestAdam:
    """Tests for the Adam optimizer."""

    def test_first_step_moves_by_lr(self):
        """Test that the bias-corrected first step has magnitude lr."""
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        tsum(p * np.array([3.0, -0.5])).backward()
        opt.step()
        np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-6)

    def test_minimizes_quadratic(self):
        """Test convergence on a convex bowl."""
        p = Tensor(np.array([3.0, -4.0]), requires_grad=True)
        opt = Adam([p], lr=0.05)
        for _ in range(2000):
            opt.zero_grad()
            tsum((p - 1.0) * (p - 1.0)).backward()
            opt.step()
        np.testing.assert_allclose(p.data, [1.0, 1.0], atol=0.05)

    def test_hundred_steps_are_bit_identical(self):
        """Test that two identical 100-step runs end with identical parameters."""

        def run():
            rng = named_stream(4, "adam")
            mlp = Mlp.create(MlpSpec.from_widths([3, 8, 8, 2]), rng)
            x = rng.normal(size=(16, 3))
            target = rng.normal(size=(16, 2))
            opt = Adam(mlp.params, lr=1e-2)
            for _ in range(100):
                opt.zero_grad()
                residual = mlp(x) - target
                tsum(residual * residual).backward()
                opt.step()
            return [p.data.copy() for p in mlp.params]

        for left, right in zip(run(), run()):
            np.testing.assert_array_equal(left, right)

    def test_frozen_parameter_is_untouched(self):
        """Test that parameters without gradients stay bit-identical."""
        a = Tensor(np.array([1.0]), requires_grad=True)
        b = Tensor(np.array([5.0]), requires_grad=False)
        opt = Adam([a, b], lr=0.1)
        tsum(a * b).backward()
        opt.step()
        assert b.data[0] == 5.0
        assert opt.state.m[1][0] == 0.0


class TestCheckpoint:
    """Tests for checkpoint files."""

    def test_round_trip_is_bit_exact(self):
        """Test arrays and header survive a write and read."""
        tensors = {"w": named_stream(0, "ck").normal(size=(3, 2)), "b": np.array([np.pi])}
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(Path(tmpdir) / "model", tensors, {"seed": 7})
            assert path.suffix == ".npz"
            loaded, header = load_checkpoint(path)
        assert header["seed"] == 7
        for name, value in tensors.items():
            np.testing.assert_array_equal(loaded[name], value)

    def test_rejects_plain_archive(self):
        """Test that an archive without a header raises."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "plain.npz"
            np.savez(path, w=np.zeros(2))
            with pytest.raises(ValueError):
                load_checkpoint(path)
