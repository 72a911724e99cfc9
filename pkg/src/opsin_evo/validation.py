"""Input checks shared by the estimator front end."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .exceptions import DimensionError, ParameterError
from .spectral import SpectralGrid


def check_cubes(X) -> NDArray[np.float64]:
    """Coerce ``X`` to a float ``(n, H, W, N)`` stack; a single ``(H, W, N)`` cube is promoted."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise DimensionError(f"expected (H, W, N) or (n, H, W, N) cubes, got shape {arr.shape}")
    if 0 in arr.shape:
        raise DimensionError(f"empty cube stack of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("cubes contain non-finite values")
    if np.any(arr < 0):
        raise ParameterError("spectral intensities must be non-negative")
    return arr


def check_labels(y, X: NDArray) -> NDArray[np.int64]:
    """Labels as ``(n, H, W)`` non-negative integers matching ``X``."""
    lab = np.asarray(y)
    if lab.ndim == 2:
        lab = lab[None]
    if lab.shape != X.shape[:3]:
        raise DimensionError(f"labels of shape {lab.shape} do not match cubes {X.shape[:3]}")
    if not np.issubdtype(lab.dtype, np.integer):
        if not np.all(lab == np.round(lab)):
            raise ParameterError("labels must be integers")
    lab = lab.astype(np.int64)
    if lab.min() < 0:
        raise ParameterError("labels must be non-negative")
    return lab


def resolve_grid(wavelengths, n_bands: int) -> SpectralGrid:
    """Grid from explicit wavelengths, or the 400-700 nm default when ``None``."""
    grid = SpectralGrid.regular() if wavelengths is None else SpectralGrid(np.asarray(wavelengths, dtype=float))
    if grid.n_bands != n_bands:
        raise DimensionError(f"cubes have {n_bands} bands but the grid has {grid.n_bands}")
    return grid
