"""Per-pixel segmentation head used as the fitness function.

Features are the raw channels concatenated with their 3x3 edge-clamped box
mean; the head is one ReLU hidden layer followed by a linear layer, trained
with mean softmax cross-entropy. Gradients are written out by hand and flow
back to the pre-expansion channel map so they can be chained into the opsin
kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .exceptions import DimensionError, ParameterError
from .spectral import ChannelMap

PARAM_NAMES = ("w1", "b1", "w2", "b2")
INIT_SCALE = 0.1


@dataclass
class PerceptionHead:
    """Dense parameters: ``w1 (hidden, c_in)``, ``b1 (hidden,)``, ``w2 (k_out, hidden)``, ``b2 (k_out,)``."""

    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: NDArray[np.float64]
    seed: int | None = None

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden, c_in = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.ndim != 2 or self.w2.shape[1] != hidden:
            raise DimensionError("inconsistent hidden-layer shapes")
        if self.b2.shape != (self.w2.shape[0],):
            raise DimensionError("b2 must have one entry per class")
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ParameterError(f"{name} holds non-finite values")

    @property
    def c_in(self) -> int:
        return int(self.w1.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[0])

    @property
    def k_out(self) -> int:
        return int(self.w2.shape[0])

    @property
    def n_params(self) -> int:
        return sum(getattr(self, n).size for n in PARAM_NAMES)

    def params(self) -> dict[str, NDArray[np.float64]]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def replace_params(self, params: dict[str, NDArray]) -> "PerceptionHead":
        return PerceptionHead(**{n: params[n] for n in PARAM_NAMES}, seed=self.seed)

    def copy(self) -> "PerceptionHead":
        return self.replace_params({n: getattr(self, n).copy() for n in PARAM_NAMES})


@dataclass(frozen=True)
class Prediction:
    logits: NDArray[np.float64]
    labels: NDArray[np.int64]


@dataclass(frozen=True)
class LossReport:
    loss: float
    grad_head: dict[str, NDArray[np.float64]]
    grad_channels: NDArray[np.float64]
    prediction: Prediction | None = field(default=None, repr=False)


def init_head(c_in: int, hidden: int, k_out: int, seed: int = 0) -> PerceptionHead:
    """Uniform ``[-0.1, 0.1]`` initialisation, drawn in the order w1, b1, w2, b2."""
    if min(c_in, hidden, k_out) < 1:
        raise ParameterError(f"head dims must be positive, got ({c_in}, {hidden}, {k_out})")
    rng = np.random.default_rng(seed)
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)  # noqa: E731
    w1 = u(hidden, c_in)
    b1 = u(hidden)
    w2 = u(k_out, hidden)
    b2 = u(k_out)
    return PerceptionHead(w1, b1, w2, b2, seed=seed)


def _pad_edge(x: NDArray) -> NDArray:
    return np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")


def box_mean(x: NDArray) -> NDArray[np.float64]:
    """3x3 mean per channel with edge clamping, for ``(H, W, C)`` arrays."""
    h, w = x.shape[:2]
    p = _pad_edge(np.asarray(x, dtype=np.float64))
    acc = np.zeros(x.shape, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            acc += p[dy : dy + h, dx : dx + w]
    return acc / 9.0


def box_mean_adjoint(g: NDArray) -> NDArray[np.float64]:
    """Transpose of :func:`box_mean`: spreads each gradient over its window and
    folds the padded border back onto the edge pixels it replicated."""
    h, w = g.shape[:2]
    gp = np.zeros((h + 2, w + 2) + g.shape[2:], dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            gp[dy : dy + h, dx : dx + w] += g
    gp /= 9.0
    gp[1] += gp[0]
    gp[h] += gp[h + 1]
    gp = gp[1 : h + 1]
    gp[:, 1] += gp[:, 0]
    gp[:, w] += gp[:, w + 1]
    return gp[:, 1 : w + 1]


def featurize(map: ChannelMap | NDArray) -> NDArray[np.float64]:
    """``[channels ; box_mean(channels)]`` along the last axis."""
    ch = map.channels if isinstance(map, ChannelMap) else np.asarray(map, dtype=np.float64)
    if ch.ndim != 3:
        raise DimensionError(f"expected (H, W, C) channels, got shape {ch.shape}")
    return np.concatenate([ch, box_mean(ch)], axis=-1)


def featurize_adjoint(grad_features: NDArray) -> NDArray[np.float64]:
    c = grad_features.shape[-1] // 2
    return grad_features[..., :c] + box_mean_adjoint(grad_features[..., c:])


def _check_features(head: PerceptionHead, features: NDArray) -> NDArray[np.float64]:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 3 or f.shape[-1] != head.c_in:
        raise DimensionError(f"features of shape {f.shape} do not match c_in={head.c_in}")
    return f


def forward(head: PerceptionHead, features: NDArray) -> Prediction:
    f = _check_features(head, features)
    logits, _ = _forward(head, f.reshape(-1, head.c_in))
    logits = logits.reshape(f.shape[:2] + (head.k_out,))
    return Prediction(logits, np.argmax(logits, axis=-1))


def _forward(head: PerceptionHead, x: NDArray) -> tuple[NDArray, NDArray]:
    pre = x @ head.w1.T + head.b1
    hid = np.maximum(pre, 0.0)
    return hid @ head.w2.T + head.b2, pre


def _log_softmax(logits: NDArray) -> NDArray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def loss_and_grads(head: PerceptionHead, features: NDArray, labels: NDArray) -> LossReport:
    """Mean cross-entropy and its exact gradients.

    ``grad_channels`` is taken with respect to the raw ``C``-channel map,
    i.e. through :func:`featurize`.
    """
    f = _check_features(head, features)
    h, w = f.shape[:2]
    y = np.asarray(labels).reshape(-1)
    if y.size != h * w:
        raise DimensionError("labels do not match the feature map")
    if y.size and (y.min() < 0 or y.max() >= head.k_out):
        raise ParameterError(f"labels must lie in [0, {head.k_out})")
    y = y.astype(np.int64)
    x = f.reshape(-1, head.c_in)
    n = x.shape[0]

    logits, pre = _forward(head, x)
    logp = _log_softmax(logits)
    rows = np.arange(n)
    loss = float(-logp[rows, y].sum() / n)

    dlogits = np.exp(logp)
    dlogits[rows, y] -= 1.0
    dlogits /= n
    hid = np.maximum(pre, 0.0)
    g_w2 = dlogits.T @ hid
    g_b2 = dlogits.sum(axis=0)
    dpre = (dlogits @ head.w2) * (pre > 0)
    g_w1 = dpre.T @ x
    g_b1 = dpre.sum(axis=0)
    dx = dpre @ head.w1

    grad_channels = featurize_adjoint(dx.reshape(h, w, head.c_in))
    pred = Prediction(logits.reshape(h, w, -1), np.argmax(logits, axis=-1).reshape(h, w))
    return LossReport(
        loss=loss,
        grad_head={"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2},
        grad_channels=grad_channels,
        prediction=pred,
    )


def miou(pred: Prediction | NDArray, labels: NDArray) -> float:
    """Mean IoU over classes present in the labels or the prediction."""
    p = pred.labels if isinstance(pred, Prediction) else np.asarray(pred)
    t = np.asarray(labels)
    if p.shape != t.shape:
        raise DimensionError(f"prediction shape {p.shape} != label shape {t.shape}")
    p = p.ravel()
    t = t.ravel()
    ious = []
    for k in np.union1d(np.unique(p), np.unique(t)):
        inter = np.count_nonzero((p == k) & (t == k))
        union = np.count_nonzero((p == k) | (t == k))
        ious.append(inter / union)
    return float(np.mean(ious)) if ious else 1.0
