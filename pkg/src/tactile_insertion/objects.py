"""Training and novel object catalogue.

Training objects are unlocked cylinder -> hexagon -> ellipse -> cuboid. Novel
objects are analogs of a phone charger, two chamfered bottles and a box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ObjectParams
from .geometry import CrossSection, GeometryError, make_cross_section
from .sensors import FINGERPRINT_DIM

TRAINING_NAMES = ("cylinder", "hexagon", "ellipse", "cuboid")
NOVEL_NAMES = ("big_bottle", "small_bottle", "phone_charger", "paper_box")
CIRCLE_CLASS = ("cylinder", "big_bottle", "small_bottle")
RECTANGLE_CLASS = ("cuboid", "phone_charger", "paper_box")

_OBJECT_IDS = {
    "cylinder": 0,
    "hexagon": 1,
    "ellipse": 2,
    "cuboid": 3,
    "big_bottle": 100,
    "small_bottle": 101,
    "phone_charger": 102,
    "paper_box": 103,
}
_CHAMFERED = {"big_bottle", "small_bottle"}
_FINGERPRINT_SALT = 0x7AC711E


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    name: str
    shape: CrossSection
    object_id: int
    chamfer: bool = False

    @property
    def fingerprint(self) -> np.ndarray:
        return fingerprint(self.object_id)

    @property
    def lever_arm(self) -> float:
        """Half the characteristic width; scales yaw-induced sensor motion."""
        return 0.5 * self.shape.width


def fingerprint(object_id: int) -> np.ndarray:
    """Unit-norm appearance vector, a deterministic function of the object id."""
    v = np.random.default_rng([_FINGERPRINT_SALT, int(object_id)]).standard_normal(FINGERPRINT_DIM)
    return v / np.linalg.norm(v)


def rounded_rectangle(length: float, width: float, radius: float, arc_points: int = 8) -> np.ndarray:
    """Convex polygon vertices of a rectangle with circular-arc corners."""
    if not (0.0 < radius < min(length, width) / 2.0):
        raise GeometryError("corner radius must be positive and below half the short side")
    hx, hy = length / 2.0 - radius, width / 2.0 - radius
    verts = []
    for cx, cy, start in ((hx, -hy, -90.0), (hx, hy, 0.0), (-hx, hy, 90.0), (-hx, -hy, 180.0)):
        for k in range(arc_points + 1):
            a = math.radians(start + 90.0 * k / arc_points)
            verts.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))
    return np.array(verts)


def parse_shape(text: str, n_samples: int = 256) -> CrossSection:
    """Parse ``"<kind> <dims...>"``; kinds are geometry kinds plus ``rounded_rectangle``."""
    parts = text.split()
    if not parts:
        raise GeometryError("empty shape description")
    kind, *nums = parts
    try:
        dims = [float(x) for x in nums]
    except ValueError as exc:
        raise GeometryError(f"bad shape dimensions in {text!r}") from exc
    if kind == "rounded_rectangle":
        if len(dims) != 3:
            raise GeometryError("rounded_rectangle takes length, width, corner radius")
        return make_cross_section("polygon", rounded_rectangle(*dims), n_samples=n_samples)
    if kind == "polygon":
        return make_cross_section("polygon", np.array(dims).reshape(-1, 2), n_samples=n_samples)
    return make_cross_section(kind, dims, n_samples=n_samples)


def make_object(name: str, params: ObjectParams | None = None, n_samples: int = 256) -> ObjectSpec:
    params = params or ObjectParams()
    if name not in _OBJECT_IDS:
        raise KeyError(f"unknown object {name!r}")
    shape = parse_shape(getattr(params, name), n_samples)
    return ObjectSpec(name, shape, _OBJECT_IDS[name], chamfer=name in _CHAMFERED)


def training_objects(params: ObjectParams | None = None, n_samples: int = 256) -> list[ObjectSpec]:
    return [make_object(n, params, n_samples) for n in TRAINING_NAMES]


def novel_objects(params: ObjectParams | None = None, n_samples: int = 256) -> list[ObjectSpec]:
    """The four held-out objects; each has its own fingerprint id."""
    return [make_object(n, params, n_samples) for n in NOVEL_NAMES]


def objects_for(selection: str, params: ObjectParams | None = None, n_samples: int = 256) -> list[ObjectSpec]:
    if selection == "train":
        return training_objects(params, n_samples)
    if selection == "novel":
        return novel_objects(params, n_samples)
    if selection == "all":
        return training_objects(params, n_samples) + novel_objects(params, n_samples)
    if selection in _OBJECT_IDS:
        return [make_object(selection, params, n_samples)]
    raise KeyError(f"unknown object selection {selection!r}")
