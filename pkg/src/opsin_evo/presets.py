"""Built-in synthetic scenes and per-experiment defaults.

Scene amplitudes are chosen so the rendered channels sit well above the
noise floor for their lighting regime. Learning rates are desk-scale: one
optimizer step per epoch over a handful of 32x32 scenes needs larger steps
than minibatch training on full datasets.
"""

from __future__ import annotations

from .scenes import SceneConfig, SpectrumTemplate
from .spectral import SpectralGrid

EXPERIMENTS = (
    "mammal-dichromacy",
    "gene-duplication",
    "colorblind-fruit",
    "khaki",
    "blueshift",
    "multirod",
    "mars-vision",
    "camera-design",
)

BLUESHIFT_DEPTHS = (0.0, 10.0, 50.0, 70.0)
HUMAN_CONES = (580.0, 540.0, 425.0)
CAMERA_RGB = (590.0, 540.0, 460.0)


def _t(name, peaks=(), baseline=0.0, jitter=0.2) -> SpectrumTemplate:
    return SpectrumTemplate(name, tuple(peaks), baseline, jitter)


def scene_preset(name: str, seed: int = 0) -> SceneConfig:
    grid = SpectralGrid.regular()
    if name == "foliage":
        classes = [
            _t("ground", [(600, 80, 20)], 10),
            _t("leaf", [(550, 40, 80)], 10),
            _t("fruit", [(650, 30, 100)], 10),
        ]
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed, shading=0.2)
    if name == "fruit":
        classes = [
            _t("leaf", [(550, 40, 8)], 1),
            _t("fruit", [(610, 30, 14), (550, 40, 7)], 1),
        ]
        return SceneConfig(32, 32, grid, classes, "scattered-fruit", fruit_density=0.2, seed=seed, shading=0.2)
    if name == "two-target":
        classes = [
            _t("green-target", [(540, 25, 80)], jitter=0.1),
            _t("red-target", [(580, 25, 80)], jitter=0.1),
        ]
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed, shading=0.3)
    if name == "underwater":
        classes = [
            _t("sand", (), 10),
            _t("fish", [(500, 40, 10)], 10),
            _t("coral", [(500, 40, 20)], 10),
        ]
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed)
    if name == "deep-sea":
        classes = [
            _t("sand", (), 40),
            _t("fish", [(440, 30, 40)], 40),
            _t("glow", [(500, 20, 30)], 0),
        ]
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed, shading=0.2)
    if name in ("khaki", "mars"):
        classes = [
            _t("dirt", [(620, 90, 30)], 10),
            _t("rock", [(590, 90, 26)], 12),
        ]
        if name == "mars":
            classes.append(_t("sky", [(480, 60, 20), (650, 60, 15)], 8))
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed, shading=0.1)
    if name == "tissue":
        classes = [
            _t("normal", [(560, 60, 30), (420, 20, 10)], 5),
            _t("tumour", [(575, 60, 30), (420, 20, 6)], 5),
        ]
        return SceneConfig(32, 32, grid, classes, "blobs", blob_count=8, seed=seed, shading=0.1)
    raise KeyError(f"unknown scene preset {name!r}")


SCENE_PRESETS = ("foliage", "fruit", "two-target", "underwater", "deep-sea", "khaki", "mars", "tissue")


def _bank(lambdas, trainable=True):
    n = len(lambdas)
    trainable = [trainable] * n if isinstance(trainable, bool) else list(trainable)
    return [{"lambda_max": float(l), "trainable": bool(t)} for l, t in zip(lambdas, trainable)]


_PHENOTYPES = (
    ("normal", []),
    ("green-blind", [{"index": 1, "mode": "knockout"}]),
    ("red-blind", [{"index": 0, "mode": "knockout"}]),
    ("green-weak", [{"index": 1, "mode": "weakness", "gain": 0.3}]),
    ("red-weak", [{"index": 0, "mode": "weakness", "gain": 0.3}]),
)


def experiment_defaults(name: str) -> dict:
    """Plain-dict default spec for ``name`` (before user overrides)."""
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    evo = {"epochs": 300, "lr_opsin": 0.2, "lr_head": 1e-2, "seed": 0}
    d: dict = {"name": name, "n_scenes": 4, "evolution": evo}

    if name == "mammal-dichromacy":
        d["scene"] = scene_preset("foliage").to_dict()
        d["bank"] = _bank([620.0, 375.0])
        d["conditions"] = [{"label": "dim", "dim_factor": 0.1, "tau": 0.1}]
    elif name == "gene-duplication":
        d["scene"] = scene_preset("two-target", seed=1).to_dict()
        d["bank"] = _bank([560.0, 425.0], [True, False])
        d["duplicate"] = {"index": 0, "jitter_nm": 0.5}
        d["conditions"] = [{"label": "duplicated", "tau": 0.1}]
        evo["epochs"] = 200
    elif name == "colorblind-fruit":
        d["scene"] = scene_preset("fruit").to_dict()
        d["bank"] = _bank(HUMAN_CONES, False)
        d["camouflage_class"] = 1
        conds = []
        for light, dim_factor, tau in (("bright", 1.0, None), ("dark", 0.1, 0.1), ("darker", 0.05, 0.1)):
            for pheno, mods in _PHENOTYPES:
                conds.append(
                    {"label": f"{pheno}-{light}", "dim_factor": dim_factor, "tau": tau, "modifiers": mods}
                )
        d["conditions"] = conds
        evo["epochs"] = 100
    elif name == "khaki":
        d["scene"] = scene_preset("khaki").to_dict()
        d["bank"] = _bank(HUMAN_CONES)
        d["conditions"] = [
            {"label": pheno, "modifiers": mods} for pheno, mods in _PHENOTYPES if pheno.endswith("blind") or pheno == "normal"
        ]
        evo["lr_opsin"] = 5e-4
    elif name == "blueshift":
        d["scene"] = scene_preset("underwater").to_dict()
        d["bank"] = _bank([493.0])
        d["conditions"] = [{"label": f"depth-{int(z)}m", "depth_m": z, "tau": 0.02} for z in BLUESHIFT_DEPTHS]
    elif name == "multirod":
        d["scene"] = scene_preset("deep-sea", seed=5).to_dict()
        d["bank"] = _bank([481.0] * 5)
        d["conditions"] = [
            {"label": "no-biolum", "depth_m": 50.0, "tau": 0.02},
            {"label": "biolum", "depth_m": 50.0, "tau": 0.02, "bio_label": 2},
        ]
        evo.update(epochs=200, lr_opsin=0.1, lr_head=0.02)
    elif name == "mars-vision":
        d["scene"] = scene_preset("mars").to_dict()
        d["bank"] = _bank([560.0, 425.0])
        d["conditions"] = [{"label": "dichromat"}]
    elif name == "camera-design":
        d["scene"] = scene_preset("tissue").to_dict()
        d["bank"] = _bank(HUMAN_CONES)
        d["conditions"] = [
            {"label": "general"},
            {"label": "rgb-camera", "bank": _bank(CAMERA_RGB)},
        ]
    return d
