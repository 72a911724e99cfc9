"""Conservation-constrained co-training of opsin peaks and the perception head.

Only ``lambda_max`` of each trainable kernel moves; every applied per-epoch
shift is clipped to ``+/- max_shift_nm``. One epoch is one full pass over the
scene list with gradients averaged over scenes in a fixed order, followed by
a single optimizer step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from .environment import EnvPipeline, noise_array
from .exceptions import DimensionError, OptimizationError, ParameterError
from .perception import PARAM_NAMES, PerceptionHead, featurize, init_head, loss_and_grads, miou
from .spectral import (
    HsiCube,
    OpsinBank,
    render_array,
    weight_gradient_matrix,
    weight_matrix,
)


@dataclass(frozen=True)
class EvolutionConfig:
    epochs: int = 300
    lr_opsin: float = 2e-2
    lr_head: float = 5e-4
    max_shift_nm: float = 0.5
    optimizer: Literal["sgd", "adam"] = "adam"
    cosine_schedule: bool = True
    seed: int = 0
    hidden: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ParameterError("epochs must be non-negative")
        if not self.max_shift_nm > 0:
            raise ParameterError("max_shift_nm must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_opsin < 0 or self.lr_head < 0:
            raise ParameterError("learning rates must be non-negative")
        if self.hidden < 1:
            raise ParameterError("hidden width must be positive")

    def lr_scale(self, epoch: int) -> float:
        """Multiplier for the update made in ``epoch`` (1-based)."""
        if not self.cosine_schedule or self.epochs <= 1:
            return 1.0
        return 0.5 * (1.0 + math.cos(math.pi * (epoch - 1) / self.epochs))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Snapshot after ``epoch``'s update; loss/mIoU come from that epoch's forward pass."""

    epoch: int
    lambda_max: tuple[float, ...]
    loss: float
    miou: float
    applied_shift: tuple[float, ...]


@dataclass(frozen=True)
class ChannelModifier:
    index: int
    mode: Literal["knockout", "weakness"]
    gain: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("knockout", "weakness"):
            raise ParameterError(f"unknown modifier mode {self.mode!r}")
        if self.mode == "weakness" and not (self.gain is not None and 0.0 < self.gain < 1.0):
            raise ParameterError("weakness needs a gain in (0, 1)")


class Adam:
    """Elementwise Adam over a dict of arrays; returns proposed deltas."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, NDArray] = {}
        self.v: dict[str, NDArray] = {}
        self.t: dict[str, int] = {}

    def delta(self, name: str, grad: NDArray, lr: float) -> NDArray:
        g = np.asarray(grad, dtype=np.float64)
        m = self.m.get(name, np.zeros_like(g))
        v = self.v.get(name, np.zeros_like(g))
        t = self.t.get(name, 0) + 1
        m = self.beta1 * m + (1.0 - self.beta1) * g
        v = self.beta2 * v + (1.0 - self.beta2) * g * g
        self.m[name], self.v[name], self.t[name] = m, v, t
        m_hat = m / (1.0 - self.beta1**t)
        v_hat = v / (1.0 - self.beta2**t)
        return -lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def delta(self, name: str, grad: NDArray, lr: float) -> NDArray:
        return -lr * np.asarray(grad, dtype=np.float64)


@dataclass
class EvolutionState:
    """Optimizer moments and the epoch counter carried between steps."""

    epoch: int = 0
    head_opt: Adam | SGD = field(default_factory=Adam)
    opsin_opt: Adam | SGD = field(default_factory=Adam)

    @classmethod
    def fresh(cls, config: EvolutionConfig) -> "EvolutionState":
        if config.optimizer == "adam":
            make = lambda: Adam(config.beta1, config.beta2, config.eps)  # noqa: E731
        else:
            make = SGD
        return cls(0, make(), make())


@dataclass(frozen=True)
class EpochGradients:
    loss: float
    miou: float
    grad_head: dict[str, NDArray[np.float64]]
    grad_lambda: NDArray[np.float64]


def compute_gradients(
    bank: OpsinBank,
    head: PerceptionHead,
    scenes: Sequence[HsiCube],
    env: EnvPipeline | None = None,
    epoch: int = 0,
    noise_seed: int | None = None,
) -> EpochGradients:
    """Scene-averaged loss, mIoU and gradients for head and every ``lambda_max``.

    Noise, when configured, is treated as a fixed additive perturbation in
    the backward pass (zero gradient where the output was clamped).
    """
    if not scenes:
        raise ParameterError("at least one scene is required")
    env = env or EnvPipeline()
    grid = scenes[0].grid
    W = weight_matrix(bank, grid)
    G = weight_gradient_matrix(bank, grid)
    n_scenes = len(scenes)
    loss_total = 0.0
    miou_total = 0.0
    g_head = {n: np.zeros_like(getattr(head, n)) for n in PARAM_NAMES}
    g_lambda = np.zeros(bank.n_channels)
    for s_idx, raw in enumerate(scenes):
        if raw.grid != grid:
            raise DimensionError("all scenes must share one spectral grid")
        cube = env.apply(raw)
        channels = render_array(cube.data, W)
        if env.noise is not None and env.noise.tau > 0:
            seed = env.noise.seed if noise_seed is None else noise_seed
            channels, kept = noise_array(channels, env.noise.tau, (int(seed), epoch, s_idx))
        else:
            kept = None
        report = loss_and_grads(head, featurize(channels), cube.labels)
        g_ch = report.grad_channels if kept is None else report.grad_channels * kept
        # d loss / d lambda_c = sum_i (sum_p g_ch[p, c] * data[p, i]) * G[c, i]
        flat = cube.data.reshape(-1, grid.n_bands)
        proj = g_ch.reshape(-1, bank.n_channels).T @ flat
        g_lambda += np.einsum("cn,cn->c", proj, G)
        for n in PARAM_NAMES:
            g_head[n] += report.grad_head[n]
        loss_total += report.loss
        miou_total += miou(report.prediction, cube.labels)
    return EpochGradients(
        loss=loss_total / n_scenes,
        miou=miou_total / n_scenes,
        grad_head={n: g / n_scenes for n, g in g_head.items()},
        grad_lambda=g_lambda / n_scenes,
    )


def epoch_step(
    bank: OpsinBank,
    head: PerceptionHead,
    scenes: Sequence[HsiCube],
    env: EnvPipeline | None,
    config: EvolutionConfig,
    state: EvolutionState,
) -> tuple[OpsinBank, PerceptionHead, TrajectoryRecord]:
    """One forward/backward pass over ``scenes`` and one clamped update."""
    epoch = state.epoch + 1
    grads = compute_gradients(bank, head, scenes, env, epoch=epoch, noise_seed=_noise_seed(env, config))
    _check_finite(grads, bank, epoch)

    scale = config.lr_scale(epoch)
    new_params = {
        n: getattr(head, n) + state.head_opt.delta(n, grads.grad_head[n], config.lr_head * scale)
        for n in PARAM_NAMES
    }
    new_head = head.replace_params(new_params)

    trainable = bank.trainable_mask
    proposed = np.zeros(bank.n_channels)
    if trainable.any():
        proposed[trainable] = state.opsin_opt.delta(
            "lambda", grads.grad_lambda[trainable], config.lr_opsin * scale
        )
    applied = np.clip(proposed, -config.max_shift_nm, config.max_shift_nm)
    applied[~trainable] = 0.0
    lambdas = bank.lambdas
    new_lambdas = np.where(trainable, lambdas + applied, lambdas)
    new_bank = bank.with_lambdas(new_lambdas)
    state.epoch = epoch
    record = TrajectoryRecord(
        epoch=epoch,
        lambda_max=tuple(float(v) for v in new_bank.lambdas),
        loss=grads.loss,
        miou=grads.miou,
        applied_shift=tuple(float(v) for v in new_lambdas - lambdas),
    )
    return new_bank, new_head, record


def _noise_seed(env: EnvPipeline | None, config: EvolutionConfig) -> int | None:
    if env is None or env.noise is None:
        return None
    return int(env.noise.seed)


def _check_finite(grads: EpochGradients, bank: OpsinBank, epoch: int) -> None:
    if not math.isfinite(grads.loss):
        raise OptimizationError(
            f"non-finite loss {grads.loss} at epoch {epoch}",
            epoch=epoch,
            values={"loss": grads.loss, "lambda_max": bank.lambdas.tolist()},
        )
    if not np.all(np.isfinite(grads.grad_lambda)):
        raise OptimizationError(
            f"non-finite lambda gradient at epoch {epoch}",
            epoch=epoch,
            values={"grad_lambda": grads.grad_lambda.tolist()},
        )


def evolve(
    bank: OpsinBank,
    scenes: Sequence[HsiCube],
    env: EnvPipeline | None,
    config: EvolutionConfig,
    head: PerceptionHead | None = None,
) -> tuple[list[TrajectoryRecord], OpsinBank, PerceptionHead]:
    """Run ``config.epochs`` epochs; returns trajectory, final bank and head.

    The trajectory starts with epoch 0: the initial bank evaluated without
    any update.
    """
    if not scenes:
        raise ParameterError("at least one scene is required")
    grid = scenes[0].grid
    for k in bank.kernels:
        k.check_grid(grid)
    n_classes = max(s.n_classes for s in scenes)
    if head is None:
        head = init_head(2 * bank.n_channels, config.hidden, n_classes, seed=config.seed)
    elif head.c_in != 2 * bank.n_channels:
        raise DimensionError(f"head expects {head.c_in} features, bank yields {2 * bank.n_channels}")

    g0 = compute_gradients(bank, head, scenes, env, epoch=0, noise_seed=_noise_seed(env, config))
    _check_finite(g0, bank, 0)
    records = [
        TrajectoryRecord(0, tuple(float(v) for v in bank.lambdas), g0.loss, g0.miou, (0.0,) * bank.n_channels)
    ]
    state = EvolutionState.fresh(config)
    for _ in range(config.epochs):
        bank, head, rec = epoch_step(bank, head, scenes, env, config, state)
        records.append(rec)
    return records, bank, head


def run_evolution(
    bank: OpsinBank,
    scenes: Sequence[HsiCube],
    env: EnvPipeline | None,
    config: EvolutionConfig,
) -> list[TrajectoryRecord]:
    return evolve(bank, scenes, env, config)[0]


def duplicate_kernel(bank: OpsinBank, index: int, jitter_nm: float = 0.5, seed: int = 0) -> OpsinBank:
    """Insert a trainable copy of ``bank[index]`` right after it.

    The copy's peak is offset by a uniform draw in ``[-jitter_nm, jitter_nm]``
    so the twins can break symmetry.
    """
    if not (0 <= index < bank.n_channels):
        raise IndexError(f"kernel index {index} out of range for {bank.n_channels} kernels")
    if jitter_nm < 0:
        raise ParameterError("jitter_nm must be non-negative")
    src = bank.kernels[index]
    offset = float(np.random.default_rng(seed).uniform(-jitter_nm, jitter_nm)) if jitter_nm > 0 else 0.0
    copy = replace(src, lambda_max=src.lambda_max + offset, trainable=True)
    kernels = list(bank.kernels)
    kernels.insert(index + 1, copy)
    return OpsinBank(tuple(kernels))


def apply_modifier(bank: OpsinBank, modifier: ChannelModifier) -> OpsinBank:
    if not (0 <= modifier.index < bank.n_channels):
        raise IndexError(f"kernel index {modifier.index} out of range for {bank.n_channels} kernels")
    gain = 0.0 if modifier.mode == "knockout" else float(modifier.gain)
    kernels = list(bank.kernels)
    kernels[modifier.index] = replace(kernels[modifier.index], channel_gain=gain)
    return OpsinBank(tuple(kernels))


def check_clamp(records: Sequence[TrajectoryRecord], trainable: NDArray, max_shift_nm: float, tol: float = 1e-12) -> None:
    """Raise if any recorded shift breaks the clamp or moves a frozen kernel."""
    trainable = np.asarray(trainable, dtype=bool)
    for rec in records:
        shifts = np.asarray(rec.applied_shift)
        if np.any(np.abs(shifts[trainable]) > max_shift_nm + tol):
            raise OptimizationError(f"epoch {rec.epoch}: shift exceeds {max_shift_nm} nm", rec.epoch, shifts.tolist())
        if np.any(shifts[~trainable] != 0.0):
            raise OptimizationError(f"epoch {rec.epoch}: a frozen kernel moved", rec.epoch, shifts.tolist())
