"""``opsin-evo`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .camouflage import CamouflageConfig, camouflage_score
from .exceptions import ConfigError, OpsinEvoError
from .experiments import ExperimentSpec, emit_outputs, load_config, run_experiment
from .presets import EXPERIMENTS, SCENE_PRESETS, scene_preset
from .scenes import SceneConfig, load_scene, save_scene, synth_scene
from .spectral import OpsinBank, render

THREADS_ENV = "OPSIN_EVO_THREADS"


def _threads(arg: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    else:
        n = arg if arg is not None else 1
    if n < 1:
        raise ConfigError(f"thread count must be positive, got {n}")
    return n


def cmd_run(args) -> int:
    raw = load_config(args.config)
    if args.seed is not None:
        raw["evolution"] = {**raw.get("evolution", {}), "seed": args.seed}
    out = args.out or raw.get("out_dir") or os.path.join("runs", str(raw.get("name", "run")))
    raw["out_dir"] = str(out)
    spec = ExperimentSpec.from_dict(raw)
    summary = run_experiment(spec, threads=_threads(args.threads))
    emit_outputs(summary, out, spec)
    print(f"{spec.name}: final mIoU {summary.final_miou:.4f}, "
          f"lambda_max {[round(k['lambda_max'], 2) for k in summary.final_bank]} -> {out}")
    return 0


def _scene_from_dict(d: dict) -> SceneConfig:
    if "preset" in d:
        base = scene_preset(d["preset"], seed=int(d.get("seed", 0))).to_dict()
        d = {**base, **{k: v for k, v in d.items() if k != "preset"}}
    return SceneConfig.from_dict(d)


def cmd_synth(args) -> int:
    raw = load_config(args.scene_config)
    try:
        cfg = _scene_from_dict(raw)
    except KeyError as exc:
        raise ConfigError(f"{args.scene_config}: {exc.args[0]}") from None
    save_scene(synth_scene(cfg), args.out)
    print(f"wrote {args.out}")
    return 0


def _parse_bank(text: str) -> OpsinBank:
    p = Path(text)
    src = p.read_text() if p.suffix == ".json" or p.is_file() else text
    try:
        items = json.loads(src)
    except ValueError as exc:
        raise ConfigError(f"bank is neither a JSON file nor inline JSON: {exc}") from None
    if isinstance(items, dict):
        items = items.get("final_bank") or items.get("bank")
    if not isinstance(items, list) or not items:
        raise ConfigError("bank must be a non-empty JSON list")
    if all(isinstance(x, (int, float)) for x in items):
        return OpsinBank.from_lambdas([float(x) for x in items])
    return OpsinBank.from_dicts(items)


def cmd_score(args) -> int:
    cube = load_scene(args.scene)
    bank = _parse_bank(args.bank)
    cfg = CamouflageConfig(args.t, args.struct_radius, args.iterations)
    s = camouflage_score(render(cube, bank), cube.labels == args.mask_from_labels, cfg)
    print(f"{s:.6f}")
    return 0


def cmd_show(args) -> int:
    print(json.dumps(ExperimentSpec.from_dict({"name": args.name}).to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opsin-evo", description="Opsin evolution experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config (TOML or JSON)")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override evolution.seed")
    p.add_argument("--threads", type=int, help=f"parallel conditions ({THREADS_ENV} takes precedence)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write a synthetic scene file")
    p.add_argument("scene_config", help=f"scene config; may name a preset from {SCENE_PRESETS}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="camouflage score of a scene under a bank")
    p.add_argument("--scene", required=True)
    p.add_argument("--bank", required=True, help="JSON file or inline JSON list")
    p.add_argument("--mask-from-labels", type=int, required=True, metavar="CLASS")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--struct-radius", type=int, default=1)
    p.add_argument("--iterations", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("show", help="print the resolved default config of an experiment")
    p.add_argument("name", choices=EXPERIMENTS)
    p.set_defaults(func=cmd_show)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OpsinEvoError, OSError, ValueError) as exc:
        print(f"opsin-evo: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
