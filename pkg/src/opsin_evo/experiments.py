"""Named experiment protocols, resolved configs and output files.

An experiment is a scene source, a starting bank and an ordered list of
conditions (environment settings plus optional bank edits). Each condition
is one independent evolution run. The first condition is the primary one;
its trajectory is written at the top level of the output directory.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .camouflage import CamouflageConfig, camouflage_score
from .environment import AttenuationModel, EnvPipeline, NoiseModel, add_noise
from .evolution import (
    ChannelModifier,
    EvolutionConfig,
    TrajectoryRecord,
    apply_modifier,
    check_clamp,
    duplicate_kernel,
    evolve,
)
from .exceptions import ConfigError, OpsinEvoError
from .presets import EXPERIMENTS, experiment_defaults
from .scenes import SceneConfig, load_scene, synth_scenes
from .spectral import HsiCube, OpsinBank, render

TRAJECTORY_HEADER = ("epoch", "kernel", "lambda_max_nm", "applied_shift_nm", "loss", "miou")
# Noise stream id for post-training scoring, disjoint from training epochs.
SCORE_STREAM = 2**32 - 1


@dataclass(frozen=True)
class Condition:
    label: str
    depth_m: float | None = None
    dim_factor: float = 1.0
    tau: float | None = None
    bio_label: int | None = None
    modifiers: tuple[ChannelModifier, ...] = ()
    bank: tuple[dict, ...] | None = None
    t: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Condition":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"condition {d.get('label')!r}: unknown keys {sorted(unknown)}")
        if "label" not in d:
            raise ConfigError("every condition needs a label")
        return cls(
            label=str(d["label"]),
            depth_m=None if d.get("depth_m") is None else float(d["depth_m"]),
            dim_factor=float(d.get("dim_factor", 1.0)),
            tau=None if d.get("tau") is None else float(d["tau"]),
            bio_label=None if d.get("bio_label") is None else int(d["bio_label"]),
            modifiers=tuple(ChannelModifier(**m) for m in d.get("modifiers", ())),
            bank=None if d.get("bank") is None else tuple(dict(k) for k in d["bank"]),
            t=None if d.get("t") is None else float(d["t"]),
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "depth_m": self.depth_m,
            "dim_factor": self.dim_factor,
            "tau": self.tau,
            "bio_label": self.bio_label,
            "modifiers": [
                {"index": m.index, "mode": m.mode, **({} if m.gain is None else {"gain": m.gain})}
                for m in self.modifiers
            ],
            "bank": None if self.bank is None else [dict(k) for k in self.bank],
            "t": self.t,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    bank: tuple[dict, ...]
    conditions: tuple[Condition, ...]
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    scene: SceneConfig | None = None
    scene_paths: tuple[str, ...] = ()
    n_scenes: int = 4
    duplicate: dict | None = None
    camouflage_class: int | None = None
    attenuation_file: str | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if not self.bank:
            raise ConfigError("the starting bank is empty")
        if not self.conditions:
            raise ConfigError("an experiment needs at least one condition")
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"condition labels must be unique, got {labels}")
        if self.scene is None and not self.scene_paths:
            raise ConfigError("give either a scene config or scene_paths")
        for p in self.scene_paths:
            if not os.path.exists(p):
                raise ConfigError(f"scene file not found: {p}")
        if self.attenuation_file is not None and not os.path.exists(self.attenuation_file):
            raise ConfigError(f"attenuation table not found: {self.attenuation_file}")
        if self.n_scenes < 1:
            raise ConfigError("n_scenes must be positive")
        # Builds every condition's environment and bank once, so bad
        # combinations fail before any training starts.
        for c in self.conditions:
            self.environment(c)
            self.initial_bank(c)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        """Fill in the named experiment's defaults, then apply ``d`` on top.

        ``evolution`` and ``scene`` are merged key by key; every other key
        replaces the default wholesale.
        """
        if "name" not in d:
            raise ConfigError("config needs an experiment name")
        try:
            base = experiment_defaults(str(d["name"]))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        merged = copy.deepcopy(base)
        for key, value in d.items():
            if key in ("evolution", "scene") and isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = copy.deepcopy(value)
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if merged.get("scene_paths"):
            merged["scene"] = None
        try:
            return cls(
                name=merged["name"],
                bank=tuple(dict(k) for k in merged["bank"]),
                conditions=tuple(Condition.from_dict(c) for c in merged["conditions"]),
                evolution=EvolutionConfig(**merged.get("evolution", {})),
                scene=None if merged.get("scene") is None else SceneConfig.from_dict(merged["scene"]),
                scene_paths=tuple(str(p) for p in merged.get("scene_paths", ())),
                n_scenes=int(merged.get("n_scenes", 4)),
                duplicate=merged.get("duplicate"),
                camouflage_class=merged.get("camouflage_class"),
                attenuation_file=merged.get("attenuation_file"),
                out_dir=merged.get("out_dir"),
            )
        except ConfigError:
            raise
        except (OpsinEvoError, TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid {d['name']} config: {exc}") from exc

    def to_dict(self) -> dict:
        """Fully resolved form; ``from_dict`` of this reproduces the run."""
        return {
            "name": self.name,
            "bank": [dict(k) for k in self.bank],
            "conditions": [c.to_dict() for c in self.conditions],
            "evolution": self.evolution.to_dict(),
            "scene": None if self.scene is None else self.scene.to_dict(),
            "scene_paths": list(self.scene_paths),
            "n_scenes": self.n_scenes,
            "duplicate": self.duplicate,
            "camouflage_class": self.camouflage_class,
            "attenuation_file": self.attenuation_file,
            "out_dir": self.out_dir,
        }

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def environment(self, c: Condition) -> EnvPipeline:
        noise = None if c.tau is None else NoiseModel(c.tau, seed=self.evolution.seed)
        atten = None if self.attenuation_file is None else AttenuationModel.from_file(self.attenuation_file)
        return EnvPipeline(c.depth_m, atten, c.dim_factor, c.bio_label, noise)

    def initial_bank(self, c: Condition) -> OpsinBank:
        bank = OpsinBank.from_dicts(c.bank if c.bank is not None else self.bank)
        if self.duplicate is not None:
            bank = duplicate_kernel(
                bank,
                int(self.duplicate.get("index", 0)),
                float(self.duplicate.get("jitter_nm", 0.5)),
                seed=self.evolution.seed,
            )
        for m in c.modifiers:
            bank = apply_modifier(bank, m)
        return bank

    def load_scenes(self) -> list[HsiCube]:
        if self.scene_paths:
            return [load_scene(p) for p in self.scene_paths]
        return synth_scenes(self.scene, self.n_scenes)


@dataclass
class ConditionResult:
    label: str
    records: list[TrajectoryRecord]
    initial_bank: OpsinBank
    final_bank: OpsinBank
    s_r: float | None = None

    @property
    def final_miou(self) -> float:
        return self.records[-1].miou


@dataclass
class RunSummary:
    name: str
    final_bank: list[dict]
    final_miou: float
    s_r: dict[str, float]
    conditions: dict[str, dict]
    wall_seconds: float
    config_hash: str
    results: list[ConditionResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "final_bank": self.final_bank,
            "final_miou": self.final_miou,
            "s_r": self.s_r,
            "conditions": self.conditions,
            "wall_seconds": self.wall_seconds,
            "config_hash": self.config_hash,
        }


def _score(spec: ExperimentSpec, c: Condition, bank: OpsinBank, scenes: Sequence[HsiCube]) -> float:
    env = spec.environment(c)
    cfg = CamouflageConfig(c.t) if c.t is not None else CamouflageConfig.for_dim_factor(c.dim_factor)
    scores = []
    for i, cube in enumerate(scenes):
        m = render(env.apply(cube), bank)
        if env.noise is not None:
            m = add_noise(m, env.noise, stream=(SCORE_STREAM, i))
        scores.append(camouflage_score(m, cube.labels == spec.camouflage_class, cfg))
    return float(np.mean(scores))


def run_condition(spec: ExperimentSpec, c: Condition, scenes: Sequence[HsiCube]) -> ConditionResult:
    bank0 = spec.initial_bank(c)
    records, bank, _ = evolve(bank0, scenes, spec.environment(c), spec.evolution)
    check_clamp(records, bank0.trainable_mask, spec.evolution.max_shift_nm)
    s_r = _score(spec, c, bank, scenes) if spec.camouflage_class is not None else None
    return ConditionResult(c.label, records, bank0, bank, s_r)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> RunSummary:
    """Run every condition of ``spec``; results keep the condition order.

    Conditions share nothing mutable, so ``threads > 1`` runs them
    concurrently without changing any output.
    """
    t0 = time.perf_counter()
    scenes = spec.load_scenes()
    if threads > 1 and len(spec.conditions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: run_condition(spec, c, scenes), spec.conditions))
    else:
        results = [run_condition(spec, c, scenes) for c in spec.conditions]
    primary = results[0]
    return RunSummary(
        name=spec.name,
        final_bank=primary.final_bank.to_dicts(),
        final_miou=primary.final_miou,
        s_r={r.label: r.s_r for r in results if r.s_r is not None},
        conditions={
            r.label: {
                "initial_bank": r.initial_bank.to_dicts(),
                "final_bank": r.final_bank.to_dicts(),
                "final_miou": r.final_miou,
                "final_loss": r.records[-1].loss,
                "s_r": r.s_r,
            }
            for r in results
        },
        wall_seconds=time.perf_counter() - t0,
        config_hash=spec.config_hash(),
        results=results,
    )


def trajectory_csv(records: Sequence[TrajectoryRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for rec in records:
        for k, (lam, shift) in enumerate(zip(rec.lambda_max, rec.applied_shift)):
            w.writerow((rec.epoch, k, repr(lam), repr(shift), repr(rec.loss), repr(rec.miou)))
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def emit_outputs(
    summary: RunSummary, out_dir: str | os.PathLike, spec: ExperimentSpec | None = None
) -> list[Path]:
    """Write trajectories, ``summary.json`` and ``resolved_config.json``.

    The clamp is checked again on every trajectory before anything is
    written. Returns the written paths.
    """
    out = Path(out_dir)
    max_shift = spec.evolution.max_shift_nm if spec is not None else EvolutionConfig().max_shift_nm
    for r in summary.results:
        check_clamp(r.records, r.initial_bank.trainable_mask, max_shift)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {out}: {exc.strerror}") from exc
    written = []
    if summary.results:
        p = out / "trajectory.csv"
        _write(p, trajectory_csv(summary.results[0].records))
        written.append(p)
    if len(summary.results) > 1:
        for r in summary.results:
            sub = out / "conditions" / r.label
            sub.mkdir(parents=True, exist_ok=True)
            p = sub / "trajectory.csv"
            _write(p, trajectory_csv(r.records))
            written.append(p)
    p = out / "summary.json"
    _write(p, json.dumps(summary.to_dict(), indent=2) + "\n")
    written.append(p)
    if spec is not None:
        p = out / "resolved_config.json"
        _write(p, json.dumps(spec.to_dict(), indent=2) + "\n")
        written.append(p)
    return written


def load_config(path: str | os.PathLike) -> dict[str, Any]:
    """Read a TOML or JSON experiment config into a plain dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        if path.suffix == ".json":
            return json.loads(raw)
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
