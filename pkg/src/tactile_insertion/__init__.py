"""Tactile-feedback peg-in-hole insertion: simulator, agents and evaluation."""
from .config import Config, load_config
from .geometry import EnvKind, EnvironmentSpec, PoseError, ShapeKind, check_insertion, make_cross_section
from .objects import make_object, novel_objects, training_objects
from .sensors import Representation
from .sim import Outcome, reset, run_episode, step

__version__ = "0.1.0"

__all__ = [
    "Config",
    "EnvKind",
    "EnvironmentSpec",
    "Outcome",
    "PoseError",
    "Representation",
    "ShapeKind",
    "check_insertion",
    "load_config",
    "make_cross_section",
    "make_object",
    "novel_objects",
    "reset",
    "run_episode",
    "step",
    "training_objects",
]
