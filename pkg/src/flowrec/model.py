"""The flow model: an MLP over ``[x_t, step_embedding(t)]`` predicting x_1.

Forward, backward and Adam are written directly in numpy. Training runs in
float32; a float64 model is available for finite-difference checks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes

MAGIC = b"FCF1"
FORMAT_VERSION = 1

ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0), lambda z, a: (z > 0).astype(z.dtype)),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda z, a: a * (1.0 - a)),
}


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_items: int
    hidden_sizes: tuple[int, ...] = (300, 300)
    step_embed_dim: int = 10
    n_steps: int = 9
    dropout: float = 0.0
    activation: str = "tanh"
    init_seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be a non-empty list of positive sizes")
        if self.n_items < 1:
            raise ValueError("n_items must be positive")
        if self.step_embed_dim < 2 or self.step_embed_dim % 2:
            raise ValueError("step_embed_dim must be a positive even number")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.n_items + self.step_embed_dim, *self.hidden_sizes, self.n_items]


def step_embedding(steps, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """Sinusoidal encoding of integer step indices, ``(sin, cos)`` interleaved.

    Returns an array of shape ``(len(steps), dim)``, float64.
    """
    if dim % 2:
        raise ValueError("embedding dimension must be even")
    steps = np.atleast_1d(np.asarray(steps, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = steps[:, None] * freqs[None, :]
    emb = np.empty((len(steps), dim))
    emb[:, 0::2] = np.sin(args)
    emb[:, 1::2] = np.cos(args)
    return emb


class FlowModel:
    def __init__(self, config: ModelConfig, weights, biases):
        self.config = config
        self.weights = list(weights)
        self.biases = list(biases)
        sizes = config.layer_sizes
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l], sizes[l + 1]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l} has shape {w.shape}/{b.shape}, expected {(sizes[l], sizes[l + 1])}")

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    @property
    def n_items(self) -> int:
        return self.config.n_items

    def parameters(self) -> list[np.ndarray]:
        """Parameters in canonical order ``W0, b0, W1, b1, ...``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "FlowModel":
        return FlowModel(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _inputs(self, x, t) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.n_items:
            raise ValueError(f"expected rows of length {self.n_items}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("model input has non-finite entries")
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        steps = np.rint(t * self.config.n_steps)
        emb = step_embedding(steps, self.config.step_embed_dim)
        return np.concatenate([x.astype(self.dtype, copy=False), emb.astype(self.dtype)], axis=1)

    def _run(self, x, t, train, rng):
        act, _ = ACTIVATIONS[self.config.activation]
        p = self.config.dropout
        h = self._inputs(x, t)
        cache = [(h, None, None)]
        n_hidden = len(self.weights) - 1
        for l in range(n_hidden):
            z = h @ self.weights[l] + self.biases[l]
            a = act(z)
            mask = None
            if train and p > 0:
                if rng is None:
                    raise ValueError("dropout in train mode needs an rng")
                mask = (rng.random(a.shape, dtype=np.float32) >= p).astype(self.dtype) / (1.0 - p)
                h = a * mask
            else:
                h = a
            cache.append((h, z, mask))
        out = h @ self.weights[-1] + self.biases[-1]
        return out, cache

    def forward(self, x, t, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Predict x_1 from state rows ``x`` at times ``t`` (scalar or per row)."""
        return self._run(x, t, train, rng)[0]

    __call__ = forward

    def backward(self, x, t, target, train: bool = False, rng=None) -> tuple[float, list[np.ndarray]]:
        """Mean squared error and its gradients, ordered like :meth:`parameters`."""
        out, cache = self._run(x, t, train, rng)
        target = np.asarray(target, dtype=self.dtype)
        if target.shape != out.shape:
            raise ValueError(f"target shape {target.shape} != output shape {out.shape}")
        diff = out - target
        loss_value = float(np.mean(np.square(diff, dtype=np.float64)))
        _, dact = ACTIVATIONS[self.config.activation]
        grad = diff * (2.0 / diff.size)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        for l in range(len(self.weights) - 1, -1, -1):
            h_in = cache[l][0]
            grads[2 * l] = h_in.T @ grad
            grads[2 * l + 1] = grad.sum(axis=0)
            if l == 0:
                break
            dh = grad @ self.weights[l].T
            h, z, mask = cache[l]
            a = h if mask is None else ACTIVATIONS[self.config.activation][0](z)
            if mask is not None:
                dh = dh * mask
            grad = dh * dact(z, a)
        return loss_value, grads


def init_model(config: ModelConfig) -> FlowModel:
    """Glorot-uniform weights from ``config.init_seed``, zero biases."""
    rng = np.random.default_rng(config.init_seed)
    dtype = np.dtype(config.dtype)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return FlowModel(config, weights, biases)


def mse_loss(pred, target) -> float:
    """Mean over all entries of the squared error."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


@dataclass
class Adam:
    """Bias-corrected Adam without weight decay, updating parameters in place."""

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ValueError("params and grads differ in length")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise ValueError("non-finite gradient")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        b1, b2 = self.betas
        self.step_count += 1
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype, copy=False)


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, model: FlowModel, optimizer: Adam | None = None) -> None:
    """Write ``FCF1`` + u32 header length + JSON header + little-endian float32 arrays.

    Arrays follow :meth:`FlowModel.parameters` order, then Adam first
    moments, then second moments when an optimizer is given.
    """
    if model.dtype != np.float32:
        raise CheckpointError("checkpoints store float32 parameters; convert the model first")
    params = model.parameters()
    has_moments = optimizer is not None and bool(optimizer.m)
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "shapes": [list(p.shape) for p in params],
        "optimizer": None
        if optimizer is None
        else {
            "lr": optimizer.lr,
            "betas": list(optimizer.betas),
            "eps": optimizer.eps,
            "step": optimizer.step_count,
            "has_moments": has_moments,
        },
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    arrays = list(params)
    if has_moments:
        arrays += optimizer.m + optimizer.v
    body = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    atomic_write_bytes(path, MAGIC + struct.pack("<I", len(head)) + head + body)


def load_checkpoint(path, n_items: int | None = None) -> tuple[FlowModel, Adam | None]:
    """Read a checkpoint; ``n_items`` (if given) must match the stored model."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a flow-model checkpoint (bad magic bytes)")
    try:
        (hlen,) = struct.unpack("<I", data[4:8])
        header = json.loads(data[8 : 8 + hlen].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    cfg = dict(header["config"])
    cfg["hidden_sizes"] = tuple(cfg["hidden_sizes"])
    config = ModelConfig(**cfg)
    if n_items is not None and config.n_items != n_items:
        raise CheckpointError(
            f"{path}: checkpoint has n_items={config.n_items} but the dataset has {n_items}"
        )
    shapes = [tuple(s) for s in header["shapes"]]
    expected = []
    for a, b in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        expected += [(a, b), (b,)]
    if shapes != expected:
        raise CheckpointError(f"{path}: layer shapes {shapes} disagree with config")
    opt = header.get("optimizer")
    n_sets = 3 if opt and opt.get("has_moments") else 1
    sizes = [int(np.prod(s)) for s in shapes]
    body = data[8 + hlen :]
    if len(body) != 4 * sum(sizes) * n_sets:
        raise CheckpointError(f"{path}: truncated or oversized parameter block")
    flat = np.frombuffer(body, dtype="<f4")
    arrays, offset = [], 0
    for _ in range(n_sets):
        for shape, size in zip(shapes, sizes):
            arrays.append(flat[offset : offset + size].reshape(shape).astype(np.float32))
            offset += size
    k = len(shapes)
    params = arrays[:k]
    model = FlowModel(config, params[0::2], params[1::2])
    optimizer = None
    if opt is not None:
        optimizer = Adam(lr=opt["lr"], betas=tuple(opt["betas"]), eps=opt["eps"], step_count=opt["step"])
        if n_sets == 3:
            optimizer.m = arrays[k : 2 * k]
            optimizer.v = arrays[2 * k :]
    return model, optimizer
