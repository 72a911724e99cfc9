"""Wavelength grids, hyperspectral cubes, Gaussian opsin banks and rendering.

A cube of shape ``(H, W, N)`` is integrated against ``C`` Gaussian
sensitivity kernels, producing a ``(H, W, C)`` channel map. Rendering is a
per-pixel dot product (a 1x1 convolution), so it is linear in the cube and in
each kernel's gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .exceptions import DimensionError, ParameterError

DEFAULT_SIGMA_NM = 25.0
# Kernels may drift this far outside the sampled span before they are rejected.
LAMBDA_MARGIN_NM = 100.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _frozen(arr: NDArray) -> NDArray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Ordered band-centre wavelengths in nm.

    ``step`` is the median spacing; irregular grids are allowed.
    """

    wavelengths: NDArray[np.float64]

    def __post_init__(self) -> None:
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if wl.ndim != 1 or wl.size < 2:
            raise DimensionError("a spectral grid needs at least two wavelengths")
        if not np.all(np.isfinite(wl)) or np.any(wl <= 0):
            raise ParameterError("wavelengths must be finite and positive")
        if np.any(np.diff(wl) <= 0):
            raise ParameterError("wavelengths must be strictly increasing")
        object.__setattr__(self, "wavelengths", _frozen(wl))

    @classmethod
    def regular(cls, start: float = 400.0, stop: float = 700.0, step: float = 10.0) -> "SpectralGrid":
        """Inclusive regular grid, e.g. 400..700 nm at 10 nm (31 bands)."""
        n = int(round((stop - start) / step)) + 1
        return cls(start + step * np.arange(n, dtype=np.float64))

    @property
    def n_bands(self) -> int:
        return int(self.wavelengths.size)

    @property
    def step(self) -> float:
        return float(np.median(np.diff(self.wavelengths)))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.wavelengths[0]), float(self.wavelengths[-1])

    def __len__(self) -> int:
        return self.n_bands

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpectralGrid):
            return NotImplemented
        return np.array_equal(self.wavelengths, other.wavelengths)

    def __hash__(self) -> int:
        return hash(self.wavelengths.tobytes())


@dataclass(frozen=True, eq=False)
class HsiCube:
    """``H x W x N`` non-negative intensities with per-pixel class labels."""

    data: NDArray[np.float64]
    labels: NDArray[np.int64]
    grid: SpectralGrid
    n_classes: int

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        labels = np.asarray(self.labels)
        if data.ndim != 3:
            raise DimensionError(f"cube data must be 3-D (H, W, N), got shape {data.shape}")
        if data.shape[2] != self.grid.n_bands:
            raise DimensionError(
                f"cube has {data.shape[2]} bands but the grid has {self.grid.n_bands}"
            )
        if labels.shape != data.shape[:2]:
            raise DimensionError(f"labels shape {labels.shape} != image shape {data.shape[:2]}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ParameterError("labels must be integers")
        labels = labels.astype(np.int64)
        if not np.all(np.isfinite(data)):
            raise ParameterError("cube intensities must be finite")
        if np.any(data < 0):
            raise ParameterError("cube intensities must be non-negative")
        if self.n_classes < 1:
            raise ParameterError("n_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ParameterError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "n_classes", int(self.n_classes))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: NDArray) -> "HsiCube":
        return HsiCube(data, self.labels, self.grid, self.n_classes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HsiCube):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.grid == other.grid
            and np.array_equal(self.labels, other.labels)
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class OpsinKernel:
    """One Gaussian spectral-sensitivity kernel.

    ``channel_gain`` scales the whole kernel: 1 is intact, 0 a knockout and
    anything in between a weakened channel.
    """

    lambda_max: float
    sigma: float = DEFAULT_SIGMA_NM
    trainable: bool = True
    channel_gain: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.lambda_max):
            raise ParameterError(f"lambda_max must be finite, got {self.lambda_max}")
        if not (0.0 <= self.channel_gain <= 1.0):
            raise ParameterError(f"channel_gain must lie in [0, 1], got {self.channel_gain}")
        object.__setattr__(self, "lambda_max", float(self.lambda_max))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "channel_gain", float(self.channel_gain))
        object.__setattr__(self, "trainable", bool(self.trainable))

    def check_grid(self, grid: SpectralGrid) -> None:
        lo, hi = grid.span
        if not (lo - LAMBDA_MARGIN_NM <= self.lambda_max <= hi + LAMBDA_MARGIN_NM):
            raise ParameterError(
                f"lambda_max={self.lambda_max} nm is outside [{lo - LAMBDA_MARGIN_NM}, "
                f"{hi + LAMBDA_MARGIN_NM}] for this grid"
            )

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "sigma": self.sigma,
            "trainable": self.trainable,
            "channel_gain": self.channel_gain,
        }


@dataclass(frozen=True)
class OpsinBank:
    """Ordered kernels; channel identity is positional."""

    kernels: tuple[OpsinKernel, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        kernels = tuple(self.kernels)
        if len(kernels) < 1:
            raise ParameterError("an opsin bank needs at least one kernel")
        for k in kernels:
            if not isinstance(k, OpsinKernel):
                raise ParameterError(f"expected OpsinKernel, got {type(k).__name__}")
        object.__setattr__(self, "kernels", kernels)

    @classmethod
    def from_lambdas(
        cls,
        lambdas: Sequence[float],
        sigma: float = DEFAULT_SIGMA_NM,
        trainable: bool | Sequence[bool] = True,
        gains: float | Sequence[float] = 1.0,
    ) -> "OpsinBank":
        n = len(lambdas)
        trainable = [trainable] * n if isinstance(trainable, bool) else list(trainable)
        gains = [gains] * n if np.isscalar(gains) else list(gains)
        if len(trainable) != n or len(gains) != n:
            raise DimensionError("trainable/gains must match the number of lambdas")
        return cls(tuple(OpsinKernel(l, sigma, t, g) for l, t, g in zip(lambdas, trainable, gains)))

    @classmethod
    def from_dicts(cls, items: Sequence[dict]) -> "OpsinBank":
        return cls(tuple(OpsinKernel(**item) for item in items))

    def to_dicts(self) -> list[dict]:
        return [k.to_dict() for k in self.kernels]

    @property
    def n_channels(self) -> int:
        return len(self.kernels)

    @property
    def lambdas(self) -> NDArray[np.float64]:
        return np.array([k.lambda_max for k in self.kernels], dtype=np.float64)

    @property
    def trainable_mask(self) -> NDArray[np.bool_]:
        return np.array([k.trainable for k in self.kernels], dtype=bool)

    def with_lambdas(self, lambdas: Sequence[float]) -> "OpsinBank":
        if len(lambdas) != self.n_channels:
            raise DimensionError("one lambda per kernel is required")
        return OpsinBank(
            tuple(replace(k, lambda_max=float(l)) for k, l in zip(self.kernels, lambdas))
        )

    def __len__(self) -> int:
        return self.n_channels

    def __getitem__(self, index: int) -> OpsinKernel:
        return self.kernels[index]


@dataclass(frozen=True, eq=False)
class ChannelMap:
    """``H x W x C`` perceived intensities; labels carried from the source cube."""

    channels: NDArray[np.float64]
    labels: NDArray[np.int64] | None = None

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 3:
            raise DimensionError(f"channel map must be 3-D (H, W, C), got shape {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise ParameterError("channel map entries must be finite")
        object.__setattr__(self, "channels", _frozen(ch))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != ch.shape[:2]:
                raise DimensionError("labels must match the map's spatial shape")
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n_channels(self) -> int:
        return int(self.channels.shape[2])

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.channels.shape


def gaussian_weights(kernel: OpsinKernel, grid: SpectralGrid) -> NDArray[np.float64]:
    """Sampled Gaussian sensitivity, gain folded in.

    ``w_i = gain / (sqrt(2 pi) sigma) * exp(-(lambda_i - lambda_max)^2 / (2 sigma^2))``
    """
    if not kernel.sigma > 0:
        raise ParameterError(f"sigma must be positive, got {kernel.sigma}")
    z = (grid.wavelengths - kernel.lambda_max) / kernel.sigma
    return kernel.channel_gain * (_INV_SQRT_2PI / kernel.sigma) * np.exp(-0.5 * z * z)


def weight_gradient(kernel: OpsinKernel, grid: SpectralGrid) -> NDArray[np.float64]:
    """Derivative of :func:`gaussian_weights` with respect to ``lambda_max``."""
    w = gaussian_weights(kernel, grid)
    return w * (grid.wavelengths - kernel.lambda_max) / kernel.sigma**2


def weight_matrix(bank: OpsinBank, grid: SpectralGrid) -> NDArray[np.float64]:
    """``(C, N)`` stack of kernel weights."""
    return np.stack([gaussian_weights(k, grid) for k in bank.kernels])


def weight_gradient_matrix(bank: OpsinBank, grid: SpectralGrid) -> NDArray[np.float64]:
    return np.stack([weight_gradient(k, grid) for k in bank.kernels])


def render(cube: HsiCube, bank: OpsinBank) -> ChannelMap:
    """Integrate every pixel spectrum against each kernel."""
    W = weight_matrix(bank, cube.grid)
    if W.shape[1] != cube.data.shape[2]:
        raise DimensionError("kernel weight length does not match the cube's band count")
    return ChannelMap(render_array(cube.data, W), cube.labels)


def render_array(data: NDArray, weights: NDArray) -> NDArray[np.float64]:
    """Array-level rendering: ``(H, W, N) x (C, N) -> (H, W, C)``.

    ``einsum`` without BLAS keeps the per-pixel reduction order fixed.
    """
    data = np.asarray(data, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if data.shape[-1] != weights.shape[-1]:
        raise DimensionError(
            f"cube has {data.shape[-1]} bands but weights have {weights.shape[-1]}"
        )
    return np.einsum("hwn,cn->hwc", data, weights, optimize=False)
