"""Environmental transforms: water attenuation, dimming, bioluminescence, noise."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConfigError, DimensionError, ParameterError
from .spectral import ChannelMap, HsiCube, SpectralGrid

DEFAULT_TAU_CONE = 0.1
DEFAULT_TAU_ROD = 0.02


def oceanic_kd(wavelengths: NDArray) -> NDArray[np.float64]:
    """Default attenuation profile in 1/m, with its blue window at 475 nm."""
    wl = np.asarray(wavelengths, dtype=np.float64)
    return 0.02 + 0.3 * ((wl - 475.0) / 100.0) ** 2


@dataclass(frozen=True, eq=False)
class AttenuationModel:
    """Diffuse downwelling attenuation ``K_d`` tabulated in nm / (1/m).

    Values between samples are linearly interpolated; lookups outside the
    table are rejected.
    """

    wavelengths: NDArray[np.float64]
    kd: NDArray[np.float64]

    def __post_init__(self) -> None:
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        kd = np.asarray(self.kd, dtype=np.float64)
        if wl.ndim != 1 or wl.shape != kd.shape or wl.size < 2:
            raise DimensionError("K_d table needs matching 1-D wavelength and value columns")
        if np.any(np.diff(wl) <= 0):
            raise ParameterError("K_d table wavelengths must be strictly increasing")
        if not np.all(np.isfinite(kd)) or np.any(kd < 0):
            raise ParameterError("K_d values must be finite and non-negative")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "kd", kd)

    @classmethod
    def oceanic(cls, start: float = 300.0, stop: float = 1100.0) -> "AttenuationModel":
        wl = np.arange(start, stop + 0.5, 1.0)
        return cls(wl, oceanic_kd(wl))

    @classmethod
    def constant(cls, value: float, start: float = 300.0, stop: float = 1100.0) -> "AttenuationModel":
        return cls(np.array([start, stop]), np.array([value, value], dtype=float))

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "AttenuationModel":
        """Two whitespace-separated columns (nm, 1/m); ``#`` starts a comment."""
        table = np.loadtxt(path, comments="#", ndmin=2)
        if table.shape[1] != 2:
            raise DimensionError(f"{os.fspath(path)}: expected two columns, got {table.shape[1]}")
        return cls(table[:, 0], table[:, 1])

    def at(self, wavelengths: NDArray) -> NDArray[np.float64]:
        wl = np.asarray(wavelengths, dtype=np.float64)
        if wl.min() < self.wavelengths[0] or wl.max() > self.wavelengths[-1]:
            raise ParameterError(
                f"K_d table covers [{self.wavelengths[0]}, {self.wavelengths[-1]}] nm, "
                f"grid needs [{wl.min()}, {wl.max()}]"
            )
        return np.interp(wl, self.wavelengths, self.kd)

    def transmission(self, grid: SpectralGrid, depth_m: float) -> NDArray[np.float64]:
        if depth_m < 0:
            raise ParameterError(f"depth must be non-negative, got {depth_m}")
        return np.exp(-self.at(grid.wavelengths) * depth_m)


@dataclass(frozen=True)
class NoiseModel:
    """Signal-dependent Gaussian noise with variance ``tau * I``."""

    tau: float = DEFAULT_TAU_CONE
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ParameterError(f"tau must be non-negative, got {self.tau}")


@dataclass(frozen=True)
class BioluminescenceSpec:
    bio_label: int

    def __post_init__(self) -> None:
        if self.bio_label < 0:
            raise ParameterError("bio_label must be a class index")


def attenuate(cube: HsiCube, depth_m: float, model: AttenuationModel) -> HsiCube:
    """Scale each band by ``exp(-K_d(lambda) * depth)``."""
    if depth_m < 0:
        raise ParameterError(f"depth must be non-negative, got {depth_m}")
    if depth_m == 0:
        return cube
    return cube.with_data(cube.data * model.transmission(cube.grid, depth_m))


def dim(cube: HsiCube, factor: float) -> HsiCube:
    if not (0.0 < factor <= 1.0):
        raise ParameterError(f"dim factor must lie in (0, 1], got {factor}")
    if factor == 1.0:
        return cube
    return cube.with_data(cube.data * factor)


def bioluminesce(original: HsiCube, attenuated: HsiCube, spec: BioluminescenceSpec) -> HsiCube:
    """Keep ``bio_label`` pixels at their unattenuated values."""
    if original.shape != attenuated.shape:
        raise DimensionError(f"shape mismatch {original.shape} vs {attenuated.shape}")
    if original.grid != attenuated.grid:
        raise DimensionError("original and attenuated cubes use different grids")
    if not np.array_equal(original.labels, attenuated.labels):
        raise DimensionError("original and attenuated cubes carry different labels")
    if spec.bio_label >= original.n_classes:
        raise ParameterError(f"bio_label {spec.bio_label} >= n_classes {original.n_classes}")
    glow = (original.labels == spec.bio_label)[..., None]
    return attenuated.with_data(np.where(glow, original.data, attenuated.data))


def _philox_normals(key: Sequence[int], n: int) -> NDArray[np.float64]:
    """``n`` standard normals; element ``e`` uses raw counter words ``2e, 2e+1``.

    Box-Muller over a fixed two-words-per-draw budget keeps each value a pure
    function of ``(key, e)``, so chunked or parallel evaluation matches serial.
    """
    ss = np.random.SeedSequence(list(key))
    bg = np.random.Philox(key=ss.generate_state(2, dtype=np.uint64))
    raw = bg.random_raw(2 * n).reshape(n, 2)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


def noise_array(
    intensities: NDArray, tau: float, key: Sequence[int]
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Noisy copy of ``intensities`` and the mask of entries left unclamped."""
    I = np.asarray(intensities, dtype=np.float64)
    if np.any(I < 0):
        raise ParameterError("noise variance tau*I needs non-negative intensities")
    if tau == 0:
        return I.copy(), np.ones(I.shape, dtype=bool)
    z = _philox_normals(key, I.size).reshape(I.shape)
    noisy = I + np.sqrt(tau * I) * z
    kept = noisy > 0
    return np.where(kept, noisy, 0.0), kept


def add_noise(map: ChannelMap, model: NoiseModel, stream: Sequence[int] = ()) -> ChannelMap:
    """``I + N(0, tau * I)`` per pixel and channel, clamped at zero.

    ``stream`` distinguishes independent draws under one seed (the optimizer
    passes ``(epoch, scene)``).
    """
    key = (int(model.seed), *(int(s) for s in stream))
    noisy, _ = noise_array(map.channels, model.tau, key)
    return ChannelMap(noisy, map.labels)


@dataclass(frozen=True)
class EnvPipeline:
    """Cube-level transforms plus optional post-render noise.

    Order: attenuate, restore bioluminescent pixels, dim. Noise is applied to
    the rendered channel map by the caller.
    """

    depth_m: float | None = None
    attenuation: AttenuationModel | None = None
    dim_factor: float = 1.0
    bio_label: int | None = None
    noise: NoiseModel | None = None

    def __post_init__(self) -> None:
        if self.bio_label is not None and (self.depth_m is None or self.depth_m <= 0):
            raise ConfigError("bioluminescence needs a positive attenuation depth")
        if self.depth_m is not None and self.depth_m < 0:
            raise ConfigError(f"depth must be non-negative, got {self.depth_m}")
        if not (0.0 < self.dim_factor <= 1.0):
            raise ConfigError(f"dim factor must lie in (0, 1], got {self.dim_factor}")

    def apply(self, cube: HsiCube) -> HsiCube:
        out = cube
        if self.depth_m is not None and self.depth_m > 0:
            model = self.attenuation or AttenuationModel.oceanic()
            out = attenuate(cube, self.depth_m, model)
            if self.bio_label is not None:
                out = bioluminesce(cube, out, BioluminescenceSpec(self.bio_label))
        return dim(out, self.dim_factor)

    def to_dict(self) -> dict:
        return {
            "depth_m": self.depth_m,
            "dim_factor": self.dim_factor,
            "bio_label": self.bio_label,
            "tau": None if self.noise is None else self.noise.tau,
            "noise_seed": None if self.noise is None else int(self.noise.seed),
        }
