"""Stream forecasters and the end-to-end locomotion pipeline.

The global stream is forecast by a per-frame encoder (pixel position, depth,
confidence and the flattened camera transform) feeding a QRNN
encoder-decoder that emits consecutive-frame residuals; the absolute track
is their cumulative sum anchored at the last observed position.  The local
stream is compressed by a spatial codec into a small latent space and
forecast there.  Training always scores predictions against the original
pre-completion data, weighted by detector confidence; completed data is
used only as model input.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .completion import CompletionModel, complete_sequence
from .mlp import Mlp, interp_widths
from .optim import Adam
from .pose import ANCHOR, N_JOINTS, LocomotionSequence
from .qrnn import QrnnEncoderDecoder
from .streams import LOCAL_TO_JOINT, GlobalStream, LocalStream, decompose, recombine


class PipelineError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


def weighted_l1_loss(pred: Tensor, target: np.ndarray, weights: np.ndarray) -> Tensor:
    """Mean over all entries of weight * |pred - target|.

    Weights are per-entry confidences (already expanded to coordinate
    granularity); they scale the error, they do not renormalize the mean.
    """
    target = np.asarray(target, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if pred.shape != target.shape or pred.shape != weights.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape}, target {target.shape}, weights {weights.shape}")
    if np.any(weights < 0.0):
        raise ValueError("confidence weights must be non-negative")
    diff = ad.absolute(ad.sub(pred, ad.constant(target)))
    return ad.mean_all(ad.hadamard(diff, ad.constant(weights)))


def _dup2(conf: np.ndarray) -> np.ndarray:
    """Repeat per-joint confidences for the u and v coordinates."""
    return np.repeat(conf, 2, axis=-1)


# ---------------------------------------------------------------------------
# global stream


class FrameEncoder:
    """Shared per-frame embedding of the global stream (16 -> 2).

    Inputs per frame: anchor pixel position (2), anchor depth (1), anchor
    confidence (1), flattened 3x4 start-to-frame camera transform (12).
    """

    IN_DIM = 16

    def __init__(self, hidden: int = 32, rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None, prefix: str = "frame_enc"):
        self.hidden = hidden
        self.net = Mlp([self.IN_DIM, hidden, 2], "tanh", "linear", prefix, rng, params)

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()

    def forward(self, feats: Tensor) -> Tensor:
        if feats.cols != self.IN_DIM:
            raise ad.ShapeError(f"frame encoder expects {self.IN_DIM} columns, got {feats.cols}")
        return self.net.forward(feats)


def global_features(g: GlobalStream, frame_size: tuple[int, int],
                    depth_scale: float = 20.0, trans_scale: float = 20.0) -> np.ndarray:
    """Normalized (T, 16) frame-encoder inputs for a global stream."""
    w, h = frame_size
    flat = g.transforms.reshape(g.frames, 12).copy()
    flat[:, (3, 7, 11)] /= trans_scale  # translation entries of the row-major 3x4
    return np.hstack([
        g.coords / np.array([w, h]),
        (g.depth / depth_scale)[:, None],
        g.conf[:, None],
        flat,
    ])


class GlobalForecaster:
    """Anchor-track forecaster conditioned on depth and camera egomotion."""

    def __init__(self, hidden: int = 64, n_layers: int = 2, kernel: int = 2,
                 fe_hidden: int = 32, pooling: str = "fo", context_mode: str = "init",
                 residual_mode: str = "consecutive", pooling_mode: str = "sequence",
                 depth_scale: float = 20.0, trans_scale: float = 20.0,
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None, prefix: str = "global"):
        if residual_mode not in ("consecutive", "from_last"):
            raise ValueError(f"residual_mode must be 'consecutive' or 'from_last', got {residual_mode!r}")
        if pooling_mode not in ("sequence", "mean"):
            raise ValueError(f"pooling_mode must be 'sequence' or 'mean', got {pooling_mode!r}")
        self.residual_mode = residual_mode
        self.pooling_mode = pooling_mode
        self.depth_scale = depth_scale
        self.trans_scale = trans_scale
        self.frame_encoder = FrameEncoder(fe_hidden, rng, params, f"{prefix}.frame_enc")
        self.seq = QrnnEncoderDecoder(2, 2, 2, hidden, n_layers, kernel, pooling,
                                      context_mode, f"{prefix}.seq", rng, params)

    def parameters(self) -> list[Tensor]:
        return self.frame_encoder.parameters() + self.seq.parameters()

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.data) for p in self.parameters()]

    def _norm_dims(self, frame_size) -> np.ndarray:
        return np.array(frame_size, dtype=np.float64)

    def _seed_residual(self, g: GlobalStream, dims: np.ndarray) -> np.ndarray:
        if self.residual_mode == "from_last" or g.frames < 2:
            return np.zeros((1, 2))
        return ((g.coords[-1] - g.coords[-2]) / dims).reshape(1, 2)

    def _encode_history(self, g: GlobalStream, frame_size) -> Tensor:
        feats = global_features(g, frame_size, self.depth_scale, self.trans_scale)
        x_alpha = self.frame_encoder.forward(ad.constant(feats))
        if self.pooling_mode == "mean":
            ones = ad.constant(np.full((1, g.frames), 1.0 / g.frames))
            x_alpha = ad.matmul(ones, x_alpha)
        return self.seq.encode(x_alpha)

    def decode_track(self, g: GlobalStream, frame_size, t_f: int,
                     teachers: np.ndarray | None = None) -> Tensor:
        """Absolute predicted anchor positions (t_f, 2) in pixels, in-graph."""
        eye = np.hstack([np.eye(3), np.zeros((3, 1))])
        if not np.array_equal(g.transforms[0], eye):
            raise ValueError("global stream history must start at the identity transform")
        dims = self._norm_dims(frame_size)
        ctx = self._encode_history(g, frame_size)
        seed = ad.constant(self._seed_residual(g, dims))
        t = ad.constant(teachers) if teachers is not None else None
        res = self.seq.decode(ctx, t_f, seed, t)
        res_px = ad.hadamard(res, ad.constant(dims.reshape(1, 2)))
        last = ad.constant(g.coords[-1].reshape(1, 2))
        rows = []
        acc = last
        for s in range(t_f):
            step = ad.slice_block(res_px, s, s + 1)
            if self.residual_mode == "consecutive":
                acc = ad.add(acc, step)
                rows.append(acc)
            else:
                rows.append(ad.add(last, step))
        return ad.concat(rows, axis=0) if t_f > 1 else rows[0]

    def forecast(self, g: GlobalStream, frame_size, t_f: int) -> np.ndarray:
        return self.decode_track(g, frame_size, t_f).data.copy()

    def residual_teachers(self, coords: np.ndarray, last_observed: np.ndarray,
                          frame_size) -> np.ndarray:
        """Teacher inputs for the decoder from a future anchor track."""
        dims = self._norm_dims(frame_size)
        if self.residual_mode == "consecutive":
            prev = np.vstack([last_observed.reshape(1, 2), coords[:-1]])
            return (coords - prev) / dims
        return (coords - last_observed.reshape(1, 2)) / dims


class ZeroVelocityGlobal:
    """Stub forecaster: repeats the last observed anchor."""

    def forecast(self, g: GlobalStream, frame_size, t_f: int) -> np.ndarray:
        return np.repeat(g.coords[-1:].copy(), t_f, axis=0)


# ---------------------------------------------------------------------------
# local stream


class LocalForecaster:
    """Anchor-relative pose forecaster in a learned latent space.

    The spatial codec (a symmetric autoencoder over the 48 offset values,
    latent width d_ae, trained with the completion recipe) is frozen while
    the sequence model learns; gradients still flow through its decoder.
    """

    def __init__(self, d_ae: int = 10, hidden: int = 64, n_layers: int = 4,
                 kernel: int = 2, pooling: str = "fo", context_mode: str = "init",
                 activation: str = "tanh",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None, prefix: str = "local"):
        widths = interp_widths(2 * (N_JOINTS - 1), d_ae)
        self.d_ae = d_ae
        self.codec_enc = Mlp(widths, activation, activation, f"{prefix}.codec_enc", rng, params)
        self.codec_dec = Mlp(widths[::-1], activation, "linear", f"{prefix}.codec_dec", rng, params)
        self.seq = QrnnEncoderDecoder(d_ae, d_ae, d_ae, hidden, n_layers, kernel,
                                      pooling, context_mode, f"{prefix}.seq", rng, params)

    def parameters(self) -> list[Tensor]:
        return self.codec_enc.parameters() + self.codec_dec.parameters() + self.seq.parameters()

    def codec_parameters(self) -> list[Tensor]:
        return self.codec_enc.parameters() + self.codec_dec.parameters()

    def seq_parameters(self) -> list[Tensor]:
        return self.seq.parameters()

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.data) for p in self.parameters()]

    def encode_offsets(self, offsets: np.ndarray, frame_size) -> np.ndarray:
        """(T, 24, 2) pixel offsets -> (T, d_ae) latents (frozen codec)."""
        flat = offsets.reshape(offsets.shape[0], 2 * (N_JOINTS - 1)) \
            / np.tile(np.array(frame_size, float), N_JOINTS - 1)
        return self.codec_enc.forward(ad.constant(flat)).data

    def decode_latents(self, latents: Tensor, frame_size) -> Tensor:
        """Latents -> normalized offset rows (in-graph)."""
        return self.codec_dec.forward(latents)

    def forecast_graph(self, l: LocalStream, frame_size, t_f: int,
                       teacher_latents: np.ndarray | None = None) -> Tensor:
        hist = self.encode_offsets(l.offsets, frame_size)
        ctx = self.seq.encode(ad.constant(hist))
        seed = ad.constant(hist[-1].reshape(1, -1))
        t = ad.constant(teacher_latents) if teacher_latents is not None else None
        lat = self.seq.decode(ctx, t_f, seed, t)
        return self.decode_latents(lat, frame_size)

    def forecast(self, l: LocalStream, frame_size, t_f: int) -> np.ndarray:
        norm = self.forecast_graph(l, frame_size, t_f).data
        dims = np.tile(np.array(frame_size, dtype=np.float64), N_JOINTS - 1)
        return (norm * dims).reshape(t_f, N_JOINTS - 1, 2)


class ZeroVelocityLocal:
    """Stub forecaster: repeats the last observed offsets."""

    def forecast(self, l: LocalStream, frame_size, t_f: int) -> np.ndarray:
        return np.repeat(l.offsets[-1:].copy(), t_f, axis=0)


# ---------------------------------------------------------------------------
# entangled ablation


class EntangledForecaster:
    """Single sequence model over raw flattened 50-dim poses (no streams)."""

    def __init__(self, hidden: int = 64, n_layers: int = 4, kernel: int = 2,
                 pooling: str = "fo", context_mode: str = "init",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None, prefix: str = "entangled"):
        d = 2 * N_JOINTS
        self.seq = QrnnEncoderDecoder(d, d, d, hidden, n_layers, kernel, pooling,
                                      context_mode, f"{prefix}.seq", rng, params)

    def parameters(self) -> list[Tensor]:
        return self.seq.parameters()

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.data) for p in self.parameters()]

    def forecast_graph(self, coords: np.ndarray, frame_size, t_f: int,
                       teachers: np.ndarray | None = None) -> Tensor:
        dims = np.tile(np.array(frame_size, dtype=np.float64), N_JOINTS)
        hist = coords.reshape(coords.shape[0], -1) / dims
        ctx = self.seq.encode(ad.constant(hist))
        seed = ad.constant(hist[-1].reshape(1, -1))
        t = ad.constant(teachers) if teachers is not None else None
        return self.seq.decode(ctx, t_f, seed, t)

    def forecast(self, seq_hist: LocomotionSequence, t_f: int) -> np.ndarray:
        norm = self.forecast_graph(seq_hist.coords, seq_hist.frame_size, t_f).data
        dims = np.tile(np.array(seq_hist.frame_size, dtype=np.float64), N_JOINTS)
        return (norm * dims).reshape(t_f, N_JOINTS, 2)


# ---------------------------------------------------------------------------
# training


def _minibatch_train(build_loss, n_records: int, params: list[Tensor], lr: float,
                     epochs: int, batch: int, rng: np.random.Generator,
                     beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Generic shuffled-epoch Adam loop over per-record loss builders."""
    opt = Adam(params, lr, beta1, beta2, eps)
    for _ in range(epochs):
        order = rng.permutation(n_records)
        for lo in range(0, n_records, batch):
            chunk = order[lo:lo + batch]
            losses = [build_loss(int(i)) for i in chunk]
            total = losses[0]
            for extra in losses[1:]:
                total = ad.add(total, extra)
            loss = ad.scale(total, 1.0 / len(losses))
            ad.backward(loss, params)
            opt.step()


def train_codec(offset_rows: np.ndarray, model: LocalForecaster, *, lr: float = 1e-3,
                steps: int = 1500, batch: int = 64, seed=0,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Fit the local spatial codec on normalized offset rows (n, 48)."""
    if offset_rows.size == 0:
        raise ValueError("codec training set is empty")
    rng = np.random.default_rng(seed)
    params = model.codec_parameters()
    opt = Adam(params, lr, beta1, beta2, eps)
    n = offset_rows.shape[0]
    for _ in range(steps):
        x = offset_rows[rng.integers(0, n, size=min(batch, n))]
        recon = model.codec_dec.forward(model.codec_enc.forward(ad.constant(x)))
        loss = ad.mean_all(ad.absolute(ad.sub(recon, ad.constant(x))))
        ad.backward(loss, params)
        opt.step()


def _norm_offsets(offsets: np.ndarray, frame_size) -> np.ndarray:
    dims = np.tile(np.array(frame_size, dtype=np.float64), N_JOINTS - 1)
    return offsets.reshape(offsets.shape[0], -1) / dims


def train_local(records: list[LocomotionSequence], completion: CompletionModel | None,
                *, alpha_c: float = 0.25, d_ae: int = 10, hidden: int = 64,
                n_layers: int = 4, kernel: int = 2, pooling: str = "fo",
                context_mode: str = "init", lr: float = 1e-4, epochs: int = 10,
                batch: int = 8, codec_steps: int = 1500, seed=0,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> LocalForecaster:
    """Codec first, then the sequence model on frozen-codec latents."""
    if not records:
        raise ValueError("no training records")
    seeds = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(seeds[0])
    model = LocalForecaster(d_ae, hidden, n_layers, kernel, pooling, context_mode, rng=rng)

    inputs = [complete_sequence(r, completion, alpha_c) if completion else r for r in records]
    streams_in = [decompose(s, require_complete=completion is not None)[1] for s in inputs]
    rows = np.vstack([_norm_offsets(l.offsets, r.frame_size)
                      for l, r in zip(streams_in, records)])
    train_codec(rows, model, lr=1e-3, steps=codec_steps, batch=64, seed=seeds[1],
                beta1=beta1, beta2=beta2, eps=eps)

    samples = []
    for rec, l_in in zip(records, streams_in):
        _, l_raw = decompose(rec, require_complete=False)
        latents = model.encode_offsets(l_in.offsets, rec.frame_size)
        target = _norm_offsets(l_raw.offsets[rec.t_p:], rec.frame_size)
        w = _dup2(l_raw.conf[rec.t_p:] * rec.conf[rec.t_p:, ANCHOR:ANCHOR + 1])
        hist = LocalStream(l_in.offsets[:rec.t_p], l_in.conf[:rec.t_p])
        samples.append((hist, latents[rec.t_p:], target, w, rec.frame_size, rec.t_f))

    def build_loss(i: int) -> Tensor:
        hist, teach, target, w, fs, t_f = samples[i]
        pred = model.forecast_graph(hist, fs, t_f, teacher_latents=teach)
        return weighted_l1_loss(pred, target, w)

    _minibatch_train(build_loss, len(samples), model.seq_parameters(), lr, epochs,
                     batch, np.random.default_rng(seeds[2]), beta1, beta2, eps)
    return model


def train_global(records: list[LocomotionSequence], completion: CompletionModel | None,
                 *, alpha_c: float = 0.25, hidden: int = 64, n_layers: int = 2,
                 kernel: int = 2, fe_hidden: int = 32, pooling: str = "fo",
                 context_mode: str = "init", residual_mode: str = "consecutive",
                 pooling_mode: str = "sequence", depth_scale: float = 20.0,
                 trans_scale: float = 20.0, lr: float = 1e-3, epochs: int = 10,
                 batch: int = 8, seed=0, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> GlobalForecaster:
    if not records:
        raise ValueError("no training records")
    seeds = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(seeds[0])
    model = GlobalForecaster(hidden, n_layers, kernel, fe_hidden, pooling, context_mode,
                             residual_mode, pooling_mode, depth_scale, trans_scale, rng=rng)
    samples = []
    for rec in records:
        src = complete_sequence(rec, completion, alpha_c) if completion else rec
        g_in, _ = decompose(src, require_complete=completion is not None)
        g_raw, _ = decompose(rec, require_complete=False)
        hist = GlobalStream(g_in.coords[:rec.t_p], g_in.depth[:rec.t_p],
                            g_in.transforms[:rec.t_p], g_in.conf[:rec.t_p])
        teachers = model.residual_teachers(g_in.coords[rec.t_p:],
                                           g_in.coords[rec.t_p - 1], rec.frame_size)
        target = g_raw.coords[rec.t_p:]
        w = _dup2(g_raw.conf[rec.t_p:, None])
        samples.append((hist, teachers, target, w, rec.frame_size, rec.t_f))

    def build_loss(i: int) -> Tensor:
        hist, teach, target, w, fs, t_f = samples[i]
        pred = model.decode_track(hist, fs, t_f, teachers=teach)
        return weighted_l1_loss(pred, target, w)

    _minibatch_train(build_loss, len(samples), model.parameters(), lr, epochs,
                     batch, np.random.default_rng(seeds[1]), beta1, beta2, eps)
    return model


def train_entangled(records: list[LocomotionSequence], completion: CompletionModel | None = None,
                    *, alpha_c: float = 0.25, hidden: int = 64, n_layers: int = 4,
                    kernel: int = 2, pooling: str = "fo", context_mode: str = "init",
                    lr: float = 1e-4, epochs: int = 10, batch: int = 8, seed=0,
                    beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> EntangledForecaster:
    """Ablation: one sequence model over whole poses, optionally completed."""
    if not records:
        raise ValueError("no training records")
    seeds = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(seeds[0])
    model = EntangledForecaster(hidden, n_layers, kernel, pooling, context_mode, rng=rng)
    samples = []
    for rec in records:
        src = complete_sequence(rec, completion, alpha_c) if completion else rec
        dims = np.tile(np.array(rec.frame_size, dtype=np.float64), N_JOINTS)
        flat = src.coords.reshape(rec.frames, -1) / dims
        teachers = flat[rec.t_p:]
        target = rec.coords[rec.t_p:].reshape(rec.t_f, -1) / dims
        w = _dup2(rec.conf[rec.t_p:])
        samples.append((src.coords[:rec.t_p], teachers, target, w, rec.frame_size, rec.t_f))

    def build_loss(i: int) -> Tensor:
        hist, teach, target, w, fs, t_f = samples[i]
        pred = model.forecast_graph(hist, fs, t_f, teachers=teach)
        return weighted_l1_loss(pred, target, w)

    _minibatch_train(build_loss, len(samples), model.parameters(), lr, epochs,
                     batch, np.random.default_rng(seeds[1]), beta1, beta2, eps)
    return model


# ---------------------------------------------------------------------------
# pipelines


def forecast_locomotion(record: LocomotionSequence, completion: CompletionModel | None,
                        local_model, global_model, t_f: int | None = None,
                        alpha_c: float = 0.25) -> np.ndarray:
    """History -> completed -> streams -> per-stream forecasts -> poses.

    Only the observed prefix of the record is used.  Without a completion
    model (ablation) the raw streams are fed as-is.
    """
    t_f = record.t_f if t_f is None else t_f
    hist = record.history()
    if completion is not None:
        try:
            hist = complete_sequence(hist, completion, alpha_c)
        except Exception as e:
            raise PipelineError(f"completion stage failed for {record.pedestrian_id or '?'}: {e}") from e
    try:
        g, l = decompose(hist, require_complete=completion is not None)
    except Exception as e:
        raise PipelineError(f"decomposition stage failed for {record.pedestrian_id or '?'}: {e}") from e
    try:
        offsets = local_model.forecast(l, record.frame_size, t_f)
        anchor = global_model.forecast(g, record.frame_size, t_f)
    except Exception as e:
        raise PipelineError(f"forecast stage failed for {record.pedestrian_id or '?'}: {e}") from e
    try:
        return recombine(anchor, offsets)
    except Exception as e:
        raise PipelineError(f"recombination stage failed for {record.pedestrian_id or '?'}: {e}") from e


def forecast_entangled(record: LocomotionSequence, model: EntangledForecaster,
                       completion: CompletionModel | None = None,
                       t_f: int | None = None, alpha_c: float = 0.25) -> np.ndarray:
    t_f = record.t_f if t_f is None else t_f
    hist = record.history()
    if completion is not None:
        hist = complete_sequence(hist, completion, alpha_c)
    return model.forecast(hist, t_f)
