"""Differentiable opsin-layer evolution on synthetic hyperspectral scenes."""

from .camouflage import CamouflageConfig, camouflage_score, dilate, erode
from .environment import (
    AttenuationModel,
    BioluminescenceSpec,
    EnvPipeline,
    NoiseModel,
    add_noise,
    attenuate,
    bioluminesce,
    dim,
)
from .estimator import OpsinEvolver, OpsinLayer
from .evolution import (
    ChannelModifier,
    EvolutionConfig,
    TrajectoryRecord,
    apply_modifier,
    duplicate_kernel,
    evolve,
    run_evolution,
)
from .exceptions import (
    ConfigError,
    DegenerateRegionError,
    DimensionError,
    GenerationError,
    OpsinEvoError,
    OptimizationError,
    ParameterError,
    ParseError,
)
from .experiments import ExperimentSpec, RunSummary, emit_outputs, run_experiment
from .perception import PerceptionHead, init_head, miou
from .scenes import SceneConfig, SpectrumTemplate, load_scene, save_scene, synth_scene, synth_scenes
from .spectral import (
    ChannelMap,
    HsiCube,
    OpsinBank,
    OpsinKernel,
    SpectralGrid,
    gaussian_weights,
    render,
    weight_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "AttenuationModel",
    "BioluminescenceSpec",
    "CamouflageConfig",
    "ChannelMap",
    "ChannelModifier",
    "ConfigError",
    "DegenerateRegionError",
    "DimensionError",
    "EnvPipeline",
    "EvolutionConfig",
    "ExperimentSpec",
    "GenerationError",
    "HsiCube",
    "NoiseModel",
    "OpsinBank",
    "OpsinEvoError",
    "OpsinEvolver",
    "OpsinKernel",
    "OpsinLayer",
    "OptimizationError",
    "ParameterError",
    "ParseError",
    "PerceptionHead",
    "RunSummary",
    "SceneConfig",
    "SpectralGrid",
    "SpectrumTemplate",
    "TrajectoryRecord",
    "add_noise",
    "apply_modifier",
    "attenuate",
    "bioluminesce",
    "camouflage_score",
    "dilate",
    "dim",
    "duplicate_kernel",
    "emit_outputs",
    "erode",
    "evolve",
    "gaussian_weights",
    "init_head",
    "load_scene",
    "miou",
    "render",
    "run_evolution",
    "run_experiment",
    "save_scene",
    "synth_scene",
    "synth_scenes",
    "weight_gradient",
]
