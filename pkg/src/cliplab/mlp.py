"""Four-layer ReLU MLP on coordinate-array inputs, trained with manual
backpropagation: SGD + momentum, cosine learning-rate decay to zero, global
gradient-norm clipping, and point-space augmentations re-binned on the fly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .render import DEFAULT_COORD_BINS, VERTEX_WEIGHT
from .scene import Camera

HIDDEN_WIDTH = 256
N_HIDDEN_LAYERS = 3


class DivergedLoss(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 128
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip_norm: float = 10.0
    seed: int = 0
    hidden_width: int = HIDDEN_WIDTH
    flip: bool = True
    # Point-space analogue of crop augmentation: independent per-axis scale
    # factors (aspect jitter, like resized crops) and a bounded translation
    # (fraction of the half-frame), clipped so all points stay in frame.
    scale_jitter: tuple[float, float] | None = None   # e.g. (0.5, 1.0)
    translation_jitter: float = 0.0                   # e.g. 0.2
    inplane_rotation_deg: tuple[float, float] | None = None  # e.g. (0, 360)

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1 or self.lr <= 0:
            raise ValueError("epochs, batch_size, lr must be positive")
        if self.scale_jitter is not None and not (0 < self.scale_jitter[0] <= self.scale_jitter[1]):
            raise ValueError("scale_jitter must satisfy 0 < low <= high")
        if not 0.0 <= self.translation_jitter <= 1.0:
            raise ValueError("translation_jitter must lie in [0, 1]")


def init_params(sizes: list[int], seed: int) -> MlpParams:
    """He-normal weights (std sqrt(2/fan_in)) and zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: MlpParams, X: np.ndarray):
    """Returns (logits, activations) with activations[0] = X."""
    acts = [np.asarray(X, dtype=np.float64)]
    a = acts[0]
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        a = z if k == len(params.weights) - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return acts[-1], acts


def loss_and_grad(params: MlpParams, X: np.ndarray, y: np.ndarray,
                  weight_decay: float = 0.0):
    """Mean softmax cross-entropy plus 0.5 * wd * ||W||^2; returns (loss, grads)."""
    y = np.asarray(y)
    logits, acts = forward(params, X)
    n = len(y)
    probs = softmax(logits)
    ce = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300))))
    loss = ce
    if weight_decay:
        loss += 0.5 * weight_decay * sum(float(np.sum(W * W)) for W in params.weights)

    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        if weight_decay:
            gw[k] += weight_decay * params.weights[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k].T) * (acts[k] > 0)
    return loss, MlpParams(gw, gb)


def predict(params: MlpParams, X: np.ndarray):
    """(predicted class(es), softmax probabilities)."""
    single = np.asarray(X).ndim == 1
    logits, _ = forward(params, np.atleast_2d(X))
    probs = softmax(logits)
    pred = probs.argmax(axis=1)
    return (int(pred[0]), probs[0]) if single else (pred, probs)


def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """Endpoint-inclusive cosine decay: base_lr at epoch 0, exactly 0 at the last."""
    if epochs == 1:
        return base_lr
    return base_lr * 0.5 * (1.0 + np.cos(np.pi * epoch / (epochs - 1)))


def augment_views(points: np.ndarray, rng: np.random.Generator, cam: Camera,
                  config: TrainConfig) -> np.ndarray:
    """Jitter a (B, 8, 2) batch of plane-coordinate views: horizontal flip,
    uniform scale, in-frame translation, optional in-plane rotation."""
    pts = np.array(points, dtype=np.float64)
    B = len(pts)
    if config.inplane_rotation_deg is not None:
        lo, hi = config.inplane_rotation_deg
        ang = np.radians(rng.uniform(lo, hi, size=B))
        c, s = np.cos(ang), np.sin(ang)
        rot = np.stack([np.stack([c, -s], axis=1), np.stack([s, c], axis=1)], axis=1)
        pts = np.einsum("bij,bvj->bvi", rot, pts)
    if config.flip:
        flip = rng.random(B) < 0.5
        pts[flip, :, 0] *= -1.0
    if config.scale_jitter is not None:
        lo, hi = config.scale_jitter
        pts *= rng.uniform(lo, hi, size=(B, 1, 2))
    if config.translation_jitter:
        half = cam.scale / 2.0
        amp = config.translation_jitter * half
        lo = -half - pts.min(axis=1)   # most negative in-frame shift per view/axis
        hi = half - pts.max(axis=1)
        t = np.clip(rng.uniform(-amp, amp, size=lo.shape),
                    np.minimum(lo, 0.0), np.maximum(hi, 0.0))
        pts += t[:, None, :]
    return pts


def bin_views(points: np.ndarray, cam: Camera, bins: int = DEFAULT_COORD_BINS) -> np.ndarray:
    """(B, 8, 2) plane-coordinate views -> (B, 2*bins) coordinate arrays.

    Vectorized equivalent of stacking coord_array_from_plane over the batch.
    """
    pts = np.asarray(points, dtype=np.float64)
    f = cam.image_size / cam.scale
    n = (cam.image_size / 2.0 + pts * f) / cam.image_size
    in_frame = np.all((n >= 0.0) & (n <= 1.0), axis=2)           # (B, 8)
    idx = np.minimum(np.floor(n * bins).astype(np.int64), bins - 1)
    out = np.zeros((len(pts), 2 * bins))
    b, v = np.nonzero(in_frame)
    np.add.at(out, (b, idx[b, v, 0]), VERTEX_WEIGHT)
    np.add.at(out, (b, bins + idx[b, v, 1]), VERTEX_WEIGHT)
    return out


@dataclass
class TrainLog:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)


def train(views: np.ndarray, labels: np.ndarray, num_classes: int,
          cam: Camera, config: TrainConfig,
          bins: int = DEFAULT_COORD_BINS) -> tuple[MlpParams, TrainLog]:
    """Train on (N, 8, 2) plane-coordinate training views with on-the-fly
    augmentation; deterministic for a fixed config."""
    views = np.asarray(views, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.max() >= num_classes:
        raise ValueError("label out of range")
    sizes = [2 * bins] + [config.hidden_width] * N_HIDDEN_LAYERS + [num_classes]
    params = init_params(sizes, config.seed)
    vel = MlpParams([np.zeros_like(w) for w in params.weights],
                    [np.zeros_like(b) for b in params.biases])
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC11F]))
    log = TrainLog()
    n = len(views)
    for epoch in range(config.epochs):
        lr = cosine_lr(config.lr, epoch, config.epochs)
        order = rng.permutation(n)
        losses, hits, seen = [], 0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            pts = augment_views(views[idx], rng, cam, config)
            X = bin_views(pts, cam, bins)
            loss, grads = loss_and_grad(params, X, labels[idx], config.weight_decay)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.weights)
                            + sum(float(np.sum(g * g)) for g in grads.biases))
            if config.grad_clip_norm and gnorm > config.grad_clip_norm:
                scale = config.grad_clip_norm / gnorm
                for g in grads.weights:
                    g *= scale
                for g in grads.biases:
                    g *= scale
            for w, v, g in zip(params.weights, vel.weights, grads.weights):
                v *= config.momentum
                v -= lr * g
                w += v
            for b, v, g in zip(params.biases, vel.biases, grads.biases):
                v *= config.momentum
                v -= lr * g
                b += v
            losses.append(loss)
            pred, _ = predict(params, X)
            hits += int(np.sum(pred == labels[idx]))
            seen += len(idx)
        log.loss.append(float(np.mean(losses)))
        log.accuracy.append(hits / seen)
        log.lr.append(float(lr))
    return params, log


# Model file: magic, layer count, shapes, then contiguous little-endian f64.

_MAGIC = b"CLIPMLP1"


def save_model(params: MlpParams, path: str):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<i", len(params.weights)))
        for W in params.weights:
            fh.write(struct.pack("<ii", *W.shape))
        for W, b in zip(params.weights, params.biases):
            fh.write(W.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def load_model(path: str) -> MlpParams:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a model file")
        (n_layers,) = struct.unpack("<i", fh.read(4))
        shapes = [struct.unpack("<ii", fh.read(8)) for _ in range(n_layers)]
        weights, biases = [], []
        for fan_in, fan_out in shapes:
            weights.append(np.frombuffer(fh.read(8 * fan_in * fan_out),
                                         dtype="<f8").reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(fh.read(8 * fan_out), dtype="<f8").copy())
    return MlpParams(weights, biases)
