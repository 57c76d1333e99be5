"""
Multilayer Perceptrons

Leaky-ReLU MLPs with a configurable output transform, stored as flat lists of
tape parameters so the optimizer and the checkpoint writer can walk them.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from probcon.autodiff.functional import LEAKY_SLOPE, l2_normalize, leaky_relu
from probcon.autodiff.tensor import Operand, Tensor, as_tensor, exp, no_grad

OUTPUT_TRANSFORMS = ("l2-normalize", "one-plus-exp", "none")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    Attributes:
        layer_dims: ``(in, out)`` pairs, consecutive pairs must chain
        slope: Leaky-ReLU negative slope applied between layers
        output_transform: ``l2-normalize``, ``one-plus-exp`` (scalar head) or ``none``
    """

    layer_dims: Tuple[Tuple[int, int], ...]
    slope: float = LEAKY_SLOPE
    output_transform: str = "none"

    def __post_init__(self) -> None:
        if not self.layer_dims:
            raise ValueError("MlpSpec needs at least one layer")
        for (_, out_dim), (in_dim, _) in zip(self.layer_dims, self.layer_dims[1:]):
            if out_dim != in_dim:
                raise ValueError(f"layer dims do not chain: {self.layer_dims}")
        if any(n < 1 for pair in self.layer_dims for n in pair):
            raise ValueError(f"layer dims must be positive: {self.layer_dims}")
        if not 0.0 < self.slope < 1.0:
            raise ValueError(f"leaky-ReLU slope must lie in (0, 1), got {self.slope}")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output transform {self.output_transform!r}")
        if self.output_transform == "one-plus-exp" and self.out_dim != 1:
            raise ValueError("one-plus-exp heads must have a scalar output")

    @classmethod
    def from_widths(
        cls, widths: Sequence[int], output_transform: str = "none", slope: float = LEAKY_SLOPE
    ) -> "MlpSpec":
        """Build a spec from the chain of widths ``[in, hidden..., out]``."""
        dims = tuple((int(a), int(b)) for a, b in zip(widths, widths[1:]))
        return cls(layer_dims=dims, slope=slope, output_transform=output_transform)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0][0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1][1]


def init_params(spec: MlpSpec, rng: np.random.Generator) -> List[Tensor]:
    """Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Returns:
        ``[W_0, b_0, W_1, b_1, ...]`` with ``W_i`` shaped ``(in, out)``
    """
    params: List[Tensor] = []
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        bound = 1.0 / np.sqrt(fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        bias = rng.uniform(-bound, bound, size=(fan_out,))
        params.append(Tensor(weight, requires_grad=True, name=f"layer{i}.weight"))
        params.append(Tensor(bias, requires_grad=True, name=f"layer{i}.bias"))
    return params


def mlp_forward(
    spec: MlpSpec, params: Sequence[Tensor], x: Operand, apply_transform: bool = True
) -> Tensor:
    """Run the network on a batch ``(N, in)`` or a single input ``(in,)``.

    The one-plus-exp head returns shape ``(N,)`` (or a scalar for a single
    input). With ``apply_transform=False`` the raw last-layer output is
    returned, which is what range calibration works on.

    Raises:
        ValueError: If the feature length does not match ``spec.in_dim``
    """
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] != spec.in_dim:
        raise ValueError(f"input feature length {x.shape} does not match in_dim {spec.in_dim}")
    single = x.ndim == 1
    h = x.reshape(1, spec.in_dim) if single else x

    n_layers = len(spec.layer_dims)
    for i in range(n_layers):
        h = h @ params[2 * i] + params[2 * i + 1]
        if i < n_layers - 1:
            h = leaky_relu(h, spec.slope)

    if apply_transform:
        if spec.output_transform == "l2-normalize":
            h = l2_normalize(h)
        elif spec.output_transform == "one-plus-exp":
            h = 1.0 + exp(h.reshape(h.shape[0]))
    return h[0] if single else h


class Mlp:
    """An ``MlpSpec`` together with its parameters."""

    def __init__(self, spec: MlpSpec, params: List[Tensor]):
        if len(params) != 2 * len(spec.layer_dims):
            raise ValueError("parameter list does not match the MLP layout")
        for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
            if params[2 * i].shape != (fan_in, fan_out) or params[2 * i + 1].shape != (fan_out,):
                raise ValueError(f"parameter shapes of layer {i} do not match the MLP layout")
        self.spec = spec
        self.params = params

    @classmethod
    def create(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        return cls(spec, init_params(spec, rng))

    def __call__(self, x: Operand) -> Tensor:
        return mlp_forward(self.spec, self.params, x)

    def raw(self, x: Operand) -> Tensor:
        """Output before the transform."""
        return mlp_forward(self.spec, self.params, x, apply_transform=False)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without recording a graph."""
        with no_grad():
            return self(x).data

    def parameters(self) -> List[Tensor]:
        return list(self.params)

    def set_trainable(self, trainable: bool) -> None:
        for p in self.params:
            p.requires_grad = trainable
            p.grad = None

    def calibrate_output(self, scale: float, shift: float) -> None:
        """Fold ``y -> scale * y + shift`` into the last linear layer."""
        weight, bias = self.params[-2], self.params[-1]
        weight.data = weight.data * scale
        bias.data = bias.data * scale + shift

    def state_dict(self, prefix: str = "") -> Dict[str, np.ndarray]:
        return {f"{prefix}{p.name}": p.data.copy() for p in self.params}

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str = "") -> None:
        for p in self.params:
            value = state[f"{prefix}{p.name}"]
            if value.shape != p.shape:
                raise ValueError(f"checkpoint shape mismatch for {prefix}{p.name}")
            p.data = np.array(value, dtype=np.float64)

    def copy(self) -> "Mlp":
        params = [
            Tensor(p.data.copy(), requires_grad=p.requires_grad, name=p.name) for p in self.params
        ]
        return Mlp(self.spec, params)
