"""Reconstruction-fidelity camouflage score.

The foreground is the eroded mask and the background the complement of the
dilated mask, so a thin band along the object boundary is ignored. A
foreground pixel counts as reconstructed when its nearest background pixel in
channel space lies within a relative distance ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from .exceptions import DegenerateRegionError, DimensionError, ParameterError
from .spectral import ChannelMap

T_BRIGHT = 0.2
T_DARK = 1.2
T_DARKER = 1.6

_CHUNK = 2048


@dataclass(frozen=True)
class CamouflageConfig:
    t: float = T_BRIGHT
    struct_radius: int = 1
    iterations: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t) and self.t > 0):
            raise ParameterError(f"threshold t must be positive, got {self.t}")
        if int(self.struct_radius) != self.struct_radius or self.struct_radius < 1:
            raise ParameterError(f"struct_radius must be an integer >= 1, got {self.struct_radius}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ParameterError(f"iterations must be an integer >= 1, got {self.iterations}")

    @classmethod
    def for_dim_factor(cls, factor: float, **kw) -> "CamouflageConfig":
        """Threshold preset by lighting: 1.0 bright, 0.1 dark, 0.05 darker."""
        if factor >= 1.0:
            t = T_BRIGHT
        elif factor >= 0.1:
            t = T_DARK
        else:
            t = T_DARKER
        return cls(t=t, **kw)


def _as_mask(mask) -> NDArray[np.bool_]:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {m.shape}")
    if m.dtype != np.bool_:
        if not np.all((m == 0) | (m == 1)):
            raise ParameterError("mask must be boolean or 0/1 valued")
        m = m.astype(bool)
    return m


def _morph(mask, config: CamouflageConfig, op) -> NDArray[np.bool_]:
    m = _as_mask(mask)
    size = 2 * int(config.struct_radius) + 1
    out = m
    for _ in range(int(config.iterations)):
        out = op(out, size=size, mode="nearest")
    return out.astype(bool)


def erode(mask, config: CamouflageConfig = CamouflageConfig()) -> NDArray[np.bool_]:
    """True where the whole edge-clamped square neighbourhood is true."""
    return _morph(mask, config, ndimage.minimum_filter)


def dilate(mask, config: CamouflageConfig = CamouflageConfig()) -> NDArray[np.bool_]:
    """True where any pixel of the edge-clamped square neighbourhood is true."""
    return _morph(mask, config, ndimage.maximum_filter)


def nearest_background(fg: NDArray, bg: NDArray) -> NDArray[np.int64]:
    """Index into ``bg`` of the Euclidean nearest neighbour of each ``fg`` row.

    Exhaustive search; ``argmin`` picks the first minimum, so ties go to the
    earliest background row.
    """
    idx = np.empty(fg.shape[0], dtype=np.int64)
    for s in range(0, fg.shape[0], _CHUNK):
        block = fg[s : s + _CHUNK]
        d2 = ((block[:, None, :] - bg[None, :, :]) ** 2).sum(axis=-1)
        idx[s : s + _CHUNK] = np.argmin(d2, axis=1)
    return idx


def reconstruction_hits(
    channels: NDArray, mask, config: CamouflageConfig = CamouflageConfig()
) -> tuple[NDArray[np.bool_], NDArray[np.bool_]]:
    """Per-foreground-pixel indicator ``R_f`` and the foreground mask it indexes."""
    ch = np.asarray(channels, dtype=np.float64)
    m = _as_mask(mask)
    if ch.ndim != 3 or ch.shape[:2] != m.shape:
        raise DimensionError(f"mask {m.shape} does not match channel map {ch.shape}")
    fg_mask = erode(m, config)
    bg_mask = ~dilate(m, config)
    if not fg_mask.any():
        raise DegenerateRegionError("foreground is empty after erosion", side="foreground")
    if not bg_mask.any():
        raise DegenerateRegionError("background is empty after dilation", side="background")
    fg = ch[fg_mask]
    bg = ch[bg_mask]
    phi = bg[nearest_background(fg, bg)]
    err = np.linalg.norm(fg - phi, axis=1)
    return err < config.t * np.linalg.norm(fg, axis=1), fg_mask


def camouflage_score(
    map: ChannelMap | NDArray, mask, config: CamouflageConfig = CamouflageConfig()
) -> float:
    """Fraction of foreground pixels reconstructable from the background."""
    ch = map.channels if isinstance(map, ChannelMap) else map
    hits, _ = reconstruction_hits(ch, mask, config)
    return float(hits.mean())
