"""Synthetic labeled hyperspectral scenes and the ``OPSINHSI1`` container.

Scenes are built from per-class spectrum templates (sums of Gaussian peaks
over a baseline) painted into a spatial layout, with multiplicative per-pixel,
per-band jitter.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .exceptions import (
    GenerationError,
    MalformedHeaderError,
    NegativeIntensityError,
    ParameterError,
    ParseError,
    PayloadMismatchError,
)
from .spectral import HsiCube, SpectralGrid

MAGIC = "OPSINHSI1"
LAYOUTS = ("blobs", "stripes", "scattered-fruit")
_HEADER_KEYS = ("height", "width", "bands", "classes", "wavelengths")


@dataclass(frozen=True)
class SpectrumTemplate:
    """Class spectrum: ``baseline + sum(amp * exp(-(l - c)^2 / (2 w^2)))``.

    ``peaks`` holds ``(center_nm, width_nm, amplitude)`` triples; ``width`` is
    the Gaussian standard deviation.
    """

    name: str
    peaks: tuple[tuple[float, float, float], ...] = ()
    baseline: float = 0.0
    jitter: float = 0.0

    def __post_init__(self) -> None:
        peaks = tuple(tuple(float(v) for v in p) for p in self.peaks)
        for p in peaks:
            if len(p) != 3:
                raise ParameterError(f"{self.name}: a peak is (center, width, amplitude)")
            if p[1] <= 0:
                raise ParameterError(f"{self.name}: peak widths must be positive")
            if p[2] < 0:
                raise ParameterError(f"{self.name}: peak amplitudes must be non-negative")
        if self.baseline < 0:
            raise ParameterError(f"{self.name}: baseline must be non-negative")
        if not (0.0 <= self.jitter < 1.0):
            raise ParameterError(f"{self.name}: jitter must lie in [0, 1)")
        object.__setattr__(self, "peaks", peaks)

    def evaluate(self, grid: SpectralGrid) -> NDArray[np.float64]:
        wl = grid.wavelengths
        out = np.full(wl.shape, float(self.baseline))
        for center, width, amp in self.peaks:
            out = out + amp * np.exp(-0.5 * ((wl - center) / width) ** 2)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumTemplate":
        return cls(
            name=str(d["name"]),
            peaks=tuple(tuple(p) for p in d.get("peaks", ())),
            baseline=float(d.get("baseline", 0.0)),
            jitter=float(d.get("jitter", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "peaks": [list(p) for p in self.peaks],
            "baseline": self.baseline,
            "jitter": self.jitter,
        }


@dataclass(frozen=True)
class SceneConfig:
    height: int
    width: int
    grid: SpectralGrid
    classes: tuple[SpectrumTemplate, ...]
    layout: str = "blobs"
    blob_count: int = 6
    fruit_density: float = 0.15
    seed: int = 0
    # Per-pixel brightness factor drawn from [1 - shading, 1 + shading]; 0 disables.
    shading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if not (0.0 <= self.shading < 1.0):
            raise ParameterError("shading must lie in [0, 1)")
        if len(self.classes) < 2:
            raise ParameterError("a scene needs at least two classes")
        if self.height < 8 or self.width < 8:
            raise ParameterError("scene dimensions must be at least 8x8")
        if self.layout not in LAYOUTS:
            raise ParameterError(f"unknown layout {self.layout!r}; choose from {LAYOUTS}")
        if self.blob_count < 1:
            raise ParameterError("blob_count must be positive")
        if not (0.0 < self.fruit_density < 1.0):
            raise ParameterError("fruit_density must lie in (0, 1)")
        if not (0 <= int(self.seed) < 2**64):
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        g = d.get("grid", {})
        if "wavelengths" in g:
            grid = SpectralGrid(np.asarray(g["wavelengths"], dtype=float))
        else:
            grid = SpectralGrid.regular(g.get("start", 400.0), g.get("stop", 700.0), g.get("step", 10.0))
        return cls(
            height=int(d.get("height", 32)),
            width=int(d.get("width", 32)),
            grid=grid,
            classes=tuple(SpectrumTemplate.from_dict(c) for c in d["classes"]),
            layout=str(d.get("layout", "blobs")),
            blob_count=int(d.get("blob_count", 6)),
            fruit_density=float(d.get("fruit_density", 0.15)),
            seed=int(d.get("seed", 0)),
            shading=float(d.get("shading", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "grid": {"wavelengths": [float(w) for w in self.grid.wavelengths]},
            "classes": [c.to_dict() for c in self.classes],
            "layout": self.layout,
            "blob_count": self.blob_count,
            "fruit_density": self.fruit_density,
            "seed": int(self.seed),
            "shading": self.shading,
        }


def _stripes(h: int, w: int, k: int) -> NDArray[np.int64]:
    cols = (np.arange(w) * k) // w
    return np.broadcast_to(cols, (h, w)).astype(np.int64)


def _blobs(h: int, w: int, k: int, count: int, rng: np.random.Generator) -> NDArray[np.int64]:
    centers = np.column_stack([rng.uniform(0, h, count), rng.uniform(0, w, count)])
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[..., None] - centers[:, 0]) ** 2 + (xx[..., None] - centers[:, 1]) ** 2
    owner = np.argmin(d2, axis=-1)
    return (owner % k).astype(np.int64)


def _scattered_fruit(
    h: int, w: int, k: int, density: float, rng: np.random.Generator
) -> NDArray[np.int64]:
    labels = np.zeros((h, w), dtype=np.int64)
    yy, xx = np.mgrid[0:h, 0:w]
    fruit_classes = list(range(1, k))
    placed = 0
    # Bounded so a tiny canvas cannot loop forever.
    for _ in range(10 * h * w):
        if placed >= len(fruit_classes) and np.mean(labels > 0) >= density:
            break
        radius = int(rng.integers(2, 6))
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
        if not disc.any():
            continue
        labels[disc] = fruit_classes[placed % len(fruit_classes)]
        placed += 1
    return labels


def synth_scene(config: SceneConfig) -> HsiCube:
    """Render a labeled cube; a pure function of ``config`` (seed included)."""
    rng = np.random.default_rng(int(config.seed))
    h, w, k = config.height, config.width, config.n_classes
    if config.layout == "stripes":
        labels = _stripes(h, w, k)
    elif config.layout == "blobs":
        labels = _blobs(h, w, k, config.blob_count, rng)
    else:
        labels = _scattered_fruit(h, w, k, config.fruit_density, rng)

    counts = np.bincount(labels.ravel(), minlength=k)
    for cls_idx, tmpl in enumerate(config.classes):
        if counts[cls_idx] == 0:
            raise GenerationError(
                f"class {tmpl.name!r} (index {cls_idx}) has zero area in the {config.layout} layout"
            )

    spectra = np.stack([t.evaluate(config.grid) for t in config.classes])
    jitter = np.array([t.jitter for t in config.classes])
    data = spectra[labels]
    u = rng.uniform(-1.0, 1.0, size=data.shape)
    data = data * (1.0 + jitter[labels][..., None] * u)
    if config.shading > 0:
        data = data * rng.uniform(1.0 - config.shading, 1.0 + config.shading, size=(h, w, 1))
    return HsiCube(data, labels, config.grid, k)


def synth_scenes(config: SceneConfig, count: int) -> list[HsiCube]:
    """``count`` scenes with seeds derived from ``config.seed``."""
    seeds = np.random.SeedSequence(int(config.seed)).generate_state(count, dtype=np.uint64)
    out = []
    for s in seeds:
        out.append(synth_scene(replace(config, seed=int(s))))
    return out


# --------------------------------------------------------------------------
# container I/O


def encode_scene(cube: HsiCube) -> bytes:
    if cube.n_classes > 256:
        raise ParameterError("the container stores labels as single bytes (at most 256 classes)")
    wl = ",".join(repr(float(v)) for v in cube.grid.wavelengths)
    header = (
        f"{MAGIC}\n"
        f"height={cube.height}\n"
        f"width={cube.width}\n"
        f"bands={cube.grid.n_bands}\n"
        f"classes={cube.n_classes}\n"
        f"wavelengths={wl}\n"
        "\n"
    ).encode("ascii")
    payload = np.ascontiguousarray(cube.data, dtype="<f8").tobytes()
    labels = np.ascontiguousarray(cube.labels, dtype=np.uint8).tobytes()
    return header + payload + labels


def decode_scene(raw: bytes) -> HsiCube:
    magic = (MAGIC + "\n").encode("ascii")
    if not raw.startswith(magic):
        raise MalformedHeaderError(f"missing {MAGIC} magic string")
    end = raw.find(b"\n\n", len(magic) - 1)
    if end < 0:
        raise MalformedHeaderError("header is not terminated by a blank line")
    try:
        text = raw[len(magic) : end + 1].decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedHeaderError("header is not ASCII") from exc
    fields: dict[str, str] = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedHeaderError(f"bad header line {line!r}")
        fields[key.strip()] = value.strip()
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise MalformedHeaderError(f"header lacks {', '.join(missing)}")
    try:
        h, w, n, k = (int(fields[key]) for key in ("height", "width", "bands", "classes"))
        wl = np.array([float(v) for v in fields["wavelengths"].split(",")], dtype=np.float64)
    except ValueError as exc:
        raise MalformedHeaderError(f"unparseable header value: {exc}") from exc
    if min(h, w, n, k) < 1:
        raise MalformedHeaderError("dimensions must be positive")
    if wl.size != n:
        raise MalformedHeaderError(f"{wl.size} wavelengths listed for {n} bands")

    body = raw[end + 2 :]
    expected = h * w * n * 8 + h * w
    if len(body) != expected:
        raise PayloadMismatchError(
            f"declared {h}x{w}x{n} needs {expected} payload bytes, found {len(body)}"
        )
    data = np.frombuffer(body, dtype="<f8", count=h * w * n).reshape(h, w, n).astype(np.float64)
    labels = np.frombuffer(body, dtype=np.uint8, offset=h * w * n * 8).reshape(h, w)
    if not np.all(np.isfinite(data)):
        raise ParseError("payload holds non-finite intensities")
    if np.any(data < 0):
        raise NegativeIntensityError("payload holds negative intensities")
    if labels.max(initial=0) >= k:
        raise ParseError(f"label {int(labels.max())} exceeds declared classes={k}")
    try:
        grid = SpectralGrid(wl)
    except ValueError as exc:
        raise MalformedHeaderError(f"invalid wavelength list: {exc}") from exc
    return HsiCube(data, labels.astype(np.int64), grid, k)


def save_scene(cube: HsiCube, path: str | os.PathLike) -> None:
    blob = encode_scene(cube)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise OSError(f"could not write scene to {os.fspath(path)}: {exc}") from exc


def load_scene(path: str | os.PathLike) -> HsiCube:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"could not read scene from {os.fspath(path)}: {exc}") from exc
    return decode_scene(raw)
