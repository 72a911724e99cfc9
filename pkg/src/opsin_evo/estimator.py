"""scikit-learn style wrappers around the opsin layer and the evolution loop.

Cubes are plain arrays: ``(H, W, N)`` or a stack ``(n, H, W, N)``; labels
are ``(H, W)`` or ``(n, H, W)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .environment import EnvPipeline, NoiseModel
from .evolution import EvolutionConfig, evolve
from .exceptions import DimensionError
from .perception import featurize, forward, miou
from .spectral import HsiCube, OpsinBank, render_array, weight_matrix
from .validation import check_cubes, check_labels, resolve_grid


def _bank(lambdas, sigma, trainable=True, gains=1.0) -> OpsinBank:
    trainable = True if trainable is None else trainable
    if not isinstance(trainable, bool):
        trainable = [bool(t) for t in trainable]
    return OpsinBank.from_lambdas([float(l) for l in lambdas], sigma, trainable, gains)


class OpsinLayer(TransformerMixin, BaseEstimator):
    """Fixed Gaussian opsin bank as a transformer: cubes in, channel maps out."""

    def __init__(self, lambdas=(580.0, 540.0, 425.0), sigma=25.0, gains=1.0, wavelengths=None):
        self.lambdas = lambdas
        self.sigma = sigma
        self.gains = gains
        self.wavelengths = wavelengths

    def fit(self, X, y=None):
        arr = check_cubes(X)
        self.grid_ = resolve_grid(self.wavelengths, arr.shape[-1])
        self.bank_ = _bank(self.lambdas, self.sigma, gains=self.gains)
        for k in self.bank_.kernels:
            k.check_grid(self.grid_)
        self.weights_ = weight_matrix(self.bank_, self.grid_)
        self.n_features_in_ = arr.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        single = np.ndim(X) == 3
        arr = check_cubes(X)
        if arr.shape[-1] != self.n_features_in_:
            raise DimensionError(f"fitted on {self.n_features_in_} bands, got {arr.shape[-1]}")
        out = np.stack([render_array(c, self.weights_) for c in arr])
        return out[0] if single else out


class OpsinEvolver(BaseEstimator):
    """Co-trains opsin peaks and the segmentation head on labelled cubes.

    After ``fit``: ``bank_`` (evolved kernels), ``head_``, ``trajectory_``
    (one record per epoch, starting at epoch 0) and ``n_classes_``.
    """

    def __init__(
        self,
        lambdas=(560.0, 425.0),
        trainable=None,
        sigma=25.0,
        epochs=300,
        lr_opsin=2e-2,
        lr_head=5e-4,
        max_shift_nm=0.5,
        optimizer="adam",
        cosine_schedule=True,
        hidden=16,
        depth_m=None,
        dim_factor=1.0,
        bio_label=None,
        tau=None,
        wavelengths=None,
        random_state=0,
    ):
        self.lambdas = lambdas
        self.trainable = trainable
        self.sigma = sigma
        self.epochs = epochs
        self.lr_opsin = lr_opsin
        self.lr_head = lr_head
        self.max_shift_nm = max_shift_nm
        self.optimizer = optimizer
        self.cosine_schedule = cosine_schedule
        self.hidden = hidden
        self.depth_m = depth_m
        self.dim_factor = dim_factor
        self.bio_label = bio_label
        self.tau = tau
        self.wavelengths = wavelengths
        self.random_state = random_state

    def _seed(self) -> int:
        return 0 if self.random_state is None else int(self.random_state)

    def _env(self) -> EnvPipeline:
        noise = None if self.tau is None else NoiseModel(float(self.tau), seed=self._seed())
        return EnvPipeline(self.depth_m, None, self.dim_factor, self.bio_label, noise)

    def _cubes(self, X, y=None) -> list[HsiCube]:
        arr = check_cubes(X)
        if arr.shape[-1] != self.grid_.n_bands:
            raise DimensionError(f"fitted on {self.grid_.n_bands} bands, got {arr.shape[-1]}")
        labels = np.zeros(arr.shape[:3], dtype=np.int64) if y is None else check_labels(y, arr)
        k = max(self.n_classes_, int(labels.max()) + 1)
        return [HsiCube(c, l, self.grid_, k) for c, l in zip(arr, labels)]

    def fit(self, X, y):
        arr = check_cubes(X)
        labels = check_labels(y, arr)
        self.grid_ = resolve_grid(self.wavelengths, arr.shape[-1])
        self.n_classes_ = int(labels.max()) + 1
        self.n_features_in_ = arr.shape[-1]
        config = EvolutionConfig(
            epochs=int(self.epochs),
            lr_opsin=float(self.lr_opsin),
            lr_head=float(self.lr_head),
            max_shift_nm=float(self.max_shift_nm),
            optimizer=self.optimizer,
            cosine_schedule=bool(self.cosine_schedule),
            seed=self._seed(),
            hidden=int(self.hidden),
        )
        bank = _bank(self.lambdas, self.sigma, self.trainable)
        scenes = self._cubes(arr, labels)
        self.trajectory_, self.bank_, self.head_ = evolve(bank, scenes, self._env(), config)
        return self

    def transform(self, X):
        """Channel maps under the fitted bank and the environment, without noise."""
        check_is_fitted(self, "bank_")
        single = np.ndim(X) == 3
        env = self._env()
        W = weight_matrix(self.bank_, self.grid_)
        out = np.stack([render_array(env.apply(c).data, W) for c in self._cubes(X)])
        return out[0] if single else out

    def predict(self, X):
        """Per-pixel class labels (ties go to the lowest class index)."""
        maps = self.transform(X)
        single = maps.ndim == 3
        maps = maps[None] if single else maps
        out = np.stack([forward(self.head_, featurize(m)).labels for m in maps])
        return out[0] if single else out

    def score(self, X, y):
        """Mean over cubes of the per-cube mIoU."""
        arr = check_cubes(X)
        labels = check_labels(y, arr)
        pred = self.predict(arr)
        return float(np.mean([miou(p, t) for p, t in zip(pred, labels)]))
