"""Fill in low-confidence joints with a denoising pose autoencoder.

The autoencoder regresses absolute coordinates: a pose is flattened to a
50-vector, normalized by the frame dimensions, with every masked joint fed
as zeros.  Training applies joint-level input dropout to confident poses so
the model learns to restore missing joints from the visible ones.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .mlp import Mlp, interp_widths
from .optim import Adam
from .pose import N_JOINTS, Pose, LocomotionSequence
from .synth import snap


class CompletionModel:
    """Symmetric encoder/decoder over normalized flattened poses."""

    def __init__(self, d_ae: int = 10, activation: str = "tanh",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None,
                 in_dim: int = 2 * N_JOINTS, prefix: str = "completion"):
        widths = interp_widths(in_dim, d_ae)
        self.d_ae = d_ae
        self.in_dim = in_dim
        self.prefix = prefix
        self.encoder = Mlp(widths, activation, out_activation=activation,
                           prefix=f"{prefix}.enc", rng=rng, params=params)
        self.decoder = Mlp(widths[::-1], activation, out_activation="linear",
                           prefix=f"{prefix}.dec", rng=rng, params=params)

    def parameters(self) -> list[ad.Tensor]:
        return self.encoder.parameters() + self.decoder.parameters()

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.data) for p in self.parameters()]

    def forward(self, x: ad.Tensor) -> ad.Tensor:
        return self.decoder.forward(self.encoder.forward(x))

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Normalized (n, 50) inputs -> normalized (n, 50) reconstructions."""
        return self.forward(ad.constant(np.atleast_2d(x))).data


def train_completion(poses: list[Pose], *, d_ae: int = 10, activation: str = "tanh",
                     dropout: float = 0.5, lr: float = 1e-3, steps: int = 2000,
                     batch: int = 32, seed=0,
                     beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> CompletionModel:
    """Fit the autoencoder on confident poses (the confidence filter's output).

    Input dropout operates per joint (both coordinates together, no rescale)
    so the train-time mask distribution matches inference-time zero filling.
    """
    if not poses:
        raise ValueError("completion training set is empty; nothing passed the confidence filter")
    rng = np.random.default_rng(seed)
    dims = np.array([[p.frame_size[0], p.frame_size[1]] for p in poses], dtype=np.float64)
    data = np.stack([p.coords for p in poses]) / dims[:, None, :]
    data = data.reshape(len(poses), 2 * N_JOINTS)
    model = CompletionModel(d_ae, activation, rng=rng)
    opt = Adam(model.parameters(), lr, beta1, beta2, eps)
    n = len(poses)
    for _ in range(steps):
        idx = rng.integers(0, n, size=min(batch, n))
        x = data[idx]
        keep = (rng.random((len(idx), N_JOINTS)) >= dropout).astype(np.float64)
        mask = np.repeat(keep, 2, axis=1)
        loss = ad.mean_all(ad.absolute(ad.sub(
            model.forward(ad.constant(x * mask)), ad.constant(x))))
        ad.backward(loss, model.parameters())
        opt.step()
    return model


def training_loss_graph(model: CompletionModel, x: np.ndarray, mask: np.ndarray) -> ad.Tensor:
    """The training objective with an explicit frozen mask (for grad checks)."""
    return ad.mean_all(ad.absolute(ad.sub(
        model.forward(ad.hadamard(ad.constant(x), ad.constant(mask))), ad.constant(x))))


def complete(pose: Pose, model: CompletionModel, alpha_c: float = 0.25) -> Pose:
    """Replace joints at or below the threshold with autoencoder estimates.

    Confident joints pass through bit-identical; replaced joints get the
    sentinel confidence alpha_c and grid-snapped estimated coordinates.
    """
    if not (0.0 < alpha_c < 1.0):
        raise ValueError(f"alpha_c must lie in (0, 1), got {alpha_c}")
    keep = pose.conf > alpha_c
    if keep.all():
        return pose
    dims = np.array(pose.frame_size, dtype=np.float64)
    x = (pose.coords / dims) * keep[:, None]
    est = model.reconstruct(x.reshape(1, -1)).reshape(N_JOINTS, 2) * dims
    coords = pose.coords.copy()
    coords[~keep] = snap(est[~keep])
    conf = pose.conf.copy()
    conf[~keep] = alpha_c
    return Pose(coords, conf, pose.frame_size)


def complete_sequence(seq: LocomotionSequence, model: CompletionModel,
                      alpha_c: float = 0.25) -> LocomotionSequence:
    """Apply completion frame by frame, keeping all other channels."""
    coords = np.empty_like(seq.coords)
    conf = np.empty_like(seq.conf)
    for i in range(seq.frames):
        done = complete(seq.pose(i), model, alpha_c)
        coords[i] = done.coords
        conf[i] = done.conf
    return LocomotionSequence(coords, conf, seq.anchor_depth, seq.transforms,
                              seq.t_p, seq.t_f, seq.frame_size, seq.pedestrian_id)
