"""Small fully connected stacks used by the pose codecs and frame encoder."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

_ACTIVATIONS = {"tanh": ad.tanh, "sigmoid": ad.sigmoid, "relu": ad.relu, "linear": lambda x: x}


def interp_widths(d_in: int, d_out: int, steps: int = 3) -> list[int]:
    """Evenly spaced layer widths from d_in to d_out, endpoints exact."""
    return [round(d_in + (d_out - d_in) * k / steps) for k in range(steps + 1)]


class Mlp:
    """Affine stack with a hidden activation and a separate output activation."""

    def __init__(self, widths: list[int], activation: str = "tanh",
                 out_activation: str = "linear", prefix: str = "mlp",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None):
        if len(widths) < 2:
            raise ValueError(f"need at least input and output widths, got {widths}")
        if activation not in _ACTIVATIONS or out_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r} / {out_activation!r}")
        self.widths = list(widths)
        self.activation = activation
        self.out_activation = out_activation
        self.prefix = prefix
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            wname, bname = f"{prefix}.w{i}", f"{prefix}.b{i}"
            if params is not None:
                w, bias = params[wname], params[bname]
            else:
                s = 1.0 / np.sqrt(a)
                w = rng.uniform(-s, s, (a, b))
                bias = np.zeros((1, b))
            self.weights.append(ad.parameter(w, wname))
            self.biases.append(ad.parameter(bias, bname))

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: Tensor) -> Tensor:
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.affine(x, w, b)
            x = _ACTIVATIONS[self.out_activation if i == last else self.activation](x)
        return x
