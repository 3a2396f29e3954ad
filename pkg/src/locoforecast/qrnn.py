"""Quasi-recurrent sequence-to-sequence model.

Gates come from causal convolutions over the input (computed for the whole
sequence at once); only the cheap elementwise pooling recurrence is
sequential.  The encoder's final pooled states, concatenated across layers,
form the context that initializes the decoder's cells.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class QrnnLayer:
    """One causal-convolution gate block with f/o pooling.

    pooling "fo": c_t = f_t*c_{t-1} + (1-f_t)*z_t, h_t = o_t*c_t.
    pooling "f" drops the output gate (h_t = c_t).
    """

    def __init__(self, in_dim: int, hidden: int, kernel: int = 2,
                 pooling: str = "fo", prefix: str = "qrnn",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None):
        if kernel < 1:
            raise ValueError(f"kernel must be >= 1, got {kernel}")
        if pooling not in ("fo", "f"):
            raise ValueError(f"pooling must be 'fo' or 'f', got {pooling!r}")
        self.in_dim = in_dim
        self.hidden = hidden
        self.kernel = kernel
        self.pooling = pooling
        self.prefix = prefix
        names = ["wz", "wf", "bz", "bf"] + (["wo", "bo"] if pooling == "fo" else [])
        if params is not None:
            got = {n: params[f"{prefix}.{n}"] for n in names}
        else:
            s = 1.0 / np.sqrt(kernel * in_dim)
            got = {n: rng.uniform(-s, s, (kernel * in_dim, hidden)) for n in names if n.startswith("w")}
            got["bz"] = np.zeros((1, hidden))
            got["bf"] = np.ones((1, hidden))  # start with mild memory
            if pooling == "fo":
                got["bo"] = np.zeros((1, hidden))
        for n in names:
            setattr(self, n, ad.parameter(got[n], f"{prefix}.{n}"))

    def parameters(self) -> list[Tensor]:
        out = [self.wz, self.wf, self.bz, self.bf]
        if self.pooling == "fo":
            out += [self.wo, self.bo]
        return out

    def _window(self, x: Tensor) -> Tensor:
        """Causal lag window: row t holds inputs t-k+1 .. t, zero padded."""
        T = x.rows
        cols = []
        for lag in range(self.kernel - 1, -1, -1):
            if lag == 0:
                cols.append(x)
            elif lag >= T:
                cols.append(ad.constant(np.zeros((T, self.in_dim))))
            else:
                kept = ad.slice_block(x, 0, T - lag)
                pad = ad.constant(np.zeros((lag, self.in_dim)))
                cols.append(ad.concat([pad, kept], axis=0))
        return ad.concat(cols, axis=1) if len(cols) > 1 else cols[0]

    def gates(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor | None]:
        w = self._window(x)
        z = ad.tanh(ad.affine(w, self.wz, self.bz))
        f = ad.sigmoid(ad.affine(w, self.wf, self.bf))
        o = ad.sigmoid(ad.affine(w, self.wo, self.bo)) if self.pooling == "fo" else None
        return z, f, o

    def forward(self, x: Tensor, c0: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Run the whole sequence; returns (h (T, hidden), final cell (1, hidden))."""
        if x.cols != self.in_dim:
            raise ad.ShapeError(f"{self.prefix}: expected {self.in_dim} input columns, got {x.cols}")
        T = x.rows
        z, f, o = self.gates(x)
        fbar = ad.sub(ad.constant(np.ones((T, self.hidden))), f)
        c = c0 if c0 is not None else ad.constant(np.zeros((1, self.hidden)))
        hs = []
        for t in range(T):
            zt = ad.slice_block(z, t, t + 1)
            ft = ad.slice_block(f, t, t + 1)
            fbt = ad.slice_block(fbar, t, t + 1)
            c = ad.add(ad.hadamard(ft, c), ad.hadamard(fbt, zt))
            hs.append(ad.hadamard(ad.slice_block(o, t, t + 1), c) if o is not None else c)
        return ad.concat(hs, axis=0) if T > 1 else hs[0], c

    def step(self, window: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        """One pooled step from an explicit (1, kernel*in_dim) lag window."""
        z = ad.tanh(ad.affine(window, self.wz, self.bz))
        f = ad.sigmoid(ad.affine(window, self.wf, self.bf))
        one = ad.constant(np.ones((1, self.hidden)))
        c = ad.add(ad.hadamard(f, c), ad.hadamard(ad.sub(one, f), z))
        if self.pooling == "fo":
            o = ad.sigmoid(ad.affine(window, self.wo, self.bo))
            return ad.hadamard(o, c), c
        return c, c


class QrnnEncoderDecoder:
    """Stacked QRNN encoder + autoregressive stacked QRNN decoder.

    The context (concatenated final encoder cells, one block per layer)
    either initializes the decoder cells ("init") or is appended to every
    decoder input ("concat").
    """

    def __init__(self, in_dim: int, dec_dim: int, out_dim: int, hidden: int,
                 n_layers: int, kernel: int = 2, pooling: str = "fo",
                 context_mode: str = "init", prefix: str = "seq",
                 rng: np.random.Generator | None = None,
                 params: dict[str, np.ndarray] | None = None):
        if n_layers < 1:
            raise ValueError(f"need at least one layer, got {n_layers}")
        if context_mode not in ("init", "concat"):
            raise ValueError(f"context_mode must be 'init' or 'concat', got {context_mode!r}")
        self.in_dim = in_dim
        self.dec_dim = dec_dim
        self.out_dim = out_dim
        self.hidden = hidden
        self.n_layers = n_layers
        self.kernel = kernel
        self.context_mode = context_mode
        self.prefix = prefix
        ctx = n_layers * hidden if context_mode == "concat" else 0
        self.enc_layers = [
            QrnnLayer(in_dim if i == 0 else hidden, hidden, kernel, pooling,
                      f"{prefix}.enc{i}", rng, params)
            for i in range(n_layers)]
        self.dec_layers = [
            QrnnLayer((dec_dim + ctx) if i == 0 else hidden, hidden, kernel, pooling,
                      f"{prefix}.dec{i}", rng, params)
            for i in range(n_layers)]
        if params is not None:
            wo, bo = params[f"{prefix}.w_out"], params[f"{prefix}.b_out"]
        else:
            s = 1.0 / np.sqrt(hidden)
            wo = rng.uniform(-s, s, (hidden, out_dim))
            bo = np.zeros((1, out_dim))
        self.w_out = ad.parameter(wo, f"{prefix}.w_out")
        self.b_out = ad.parameter(bo, f"{prefix}.b_out")

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.enc_layers + self.dec_layers:
            out.extend(layer.parameters())
        out += [self.w_out, self.b_out]
        return out

    @property
    def context_dim(self) -> int:
        return self.n_layers * self.hidden

    def encode(self, x: Tensor) -> Tensor:
        """Full observed sequence (t_p, in_dim) -> context (1, n_layers*hidden)."""
        if x.cols != self.in_dim:
            raise ad.ShapeError(f"{self.prefix}: encoder expects {self.in_dim} columns, got {x.cols}")
        if x.rows < 1:
            raise ad.ShapeError(f"{self.prefix}: encoder needs at least one observed frame")
        finals = []
        h = x
        for layer in self.enc_layers:
            h, c = layer.forward(h)
            finals.append(c)
        return ad.concat(finals, axis=1) if len(finals) > 1 else finals[0]

    def decode(self, context: Tensor, t_f: int, seed_vec: Tensor,
               teachers: Tensor | None = None) -> Tensor:
        """Roll the decoder out t_f steps.

        ``seed_vec`` is the last observed target vector (first decoder
        input).  With ``teachers`` given (training, forcing probability 1)
        the next input is always the true previous target; otherwise the
        decoder feeds on its own outputs.
        """
        if context.shape != (1, self.context_dim):
            raise ad.ShapeError(f"{self.prefix}: context must be (1, {self.context_dim}), got {context.shape}")
        if seed_vec.shape != (1, self.dec_dim):
            raise ad.ShapeError(f"{self.prefix}: seed must be (1, {self.dec_dim}), got {seed_vec.shape}")
        if teachers is not None and teachers.shape != (t_f, self.dec_dim):
            raise ad.ShapeError(f"{self.prefix}: teachers must be ({t_f}, {self.dec_dim}), got {teachers.shape}")
        if t_f == 0:
            return ad.constant(np.zeros((0, self.out_dim)))
        if self.context_mode == "init":
            cells = [ad.slice_block(context, 0, 1, i * self.hidden, (i + 1) * self.hidden)
                     for i in range(self.n_layers)]
        else:
            cells = [ad.constant(np.zeros((1, self.hidden))) for _ in range(self.n_layers)]
        # per-layer ring of previous inputs for the causal window
        hist: list[list[Tensor]] = [
            [ad.constant(np.zeros((1, layer.in_dim))) for _ in range(layer.kernel - 1)]
            for layer in self.dec_layers]
        outputs = []
        inp = seed_vec
        for s in range(t_f):
            x = ad.concat([inp, context], axis=1) if self.context_mode == "concat" else inp
            for i, layer in enumerate(self.dec_layers):
                window = ad.concat(hist[i] + [x], axis=1) if layer.kernel > 1 else x
                if layer.kernel > 1:
                    hist[i] = hist[i][1:] + [x]
                x, cells[i] = layer.step(window, cells[i])
            out = ad.affine(x, self.w_out, self.b_out)
            outputs.append(out)
            if s + 1 < t_f:
                inp = ad.slice_block(teachers, s, s + 1) if teachers is not None else out
        return ad.concat(outputs, axis=0) if t_f > 1 else outputs[0]

    def forecast(self, history: np.ndarray, t_f: int, seed_vec: np.ndarray,
                 teachers: np.ndarray | None = None) -> Tensor:
        """Convenience wrapper taking plain arrays."""
        ctx = self.encode(ad.constant(history))
        t = ad.constant(teachers) if teachers is not None else None
        return self.decode(ctx, t_f, ad.constant(seed_vec.reshape(1, -1)), t)
