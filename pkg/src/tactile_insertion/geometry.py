"""Convex cross-sections, planar pose errors and clearance-inflated containment.

All lengths are millimetres and all angles degrees unless a name says
otherwise. A :class:`CrossSection` is the footprint of a grasped object in
its own frame (centroid at the origin). An :class:`EnvironmentSpec` places
walls, or a full hole, around the footprint of the nominal object inflated
by the clearance. :func:`check_insertion` decides whether the object,
displaced by a :class:`PoseError`, passes the environment and reports the
contacts when it does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels

DEFAULT_SAMPLES = 256
DEFAULT_CLEARANCE = 3.0
DEFAULT_CLUSTER_RADIUS = 2.0
ROTATION_WEIGHT = 0.5  # mm per degree
MIN_WIDTH, MAX_WIDTH = 20.0, 60.0

# Local maxima of smooth shapes are refined on the continuous boundary, so
# contact depths do not carry the chord error of the sample spacing. Maxima
# further inside than the margin (which bounds that chord error) cannot
# become contacts and are left as sampled.
_REFINE_MARGIN = 0.05
_GOLDEN_ITERS = 20
_PLATEAU_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid cross-section construction."""


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    ELLIPSE = "ellipse"
    HEXAGON = "hexagon"
    RECTANGLE = "rectangle"
    POLYGON = "polygon"


class EnvKind(str, Enum):
    LINE_WALL = "line_wall"
    CORNER_WALL = "corner_wall"
    U_WALL = "u_wall"
    HOLE = "hole"


# Wall sides are outward directions of the hole frame.
_SIDES = {
    "-y": (0.0, -1.0),
    "-x": (-1.0, 0.0),
    "+x": (1.0, 0.0),
    "+y": (0.0, 1.0),
}
ACTIVE_SIDES = {
    EnvKind.LINE_WALL: ("-y",),
    EnvKind.CORNER_WALL: ("-y", "-x"),
    EnvKind.U_WALL: ("-y", "-x", "+x"),
    EnvKind.HOLE: ("-y", "-x", "+x", "+y"),
}


def rotation_matrix(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Convex footprint of an object, centred on its centroid."""

    kind: ShapeKind
    params: tuple
    rotation: float = 0.0
    boundary: np.ndarray = field(repr=False, default=None)
    boundary_param: np.ndarray | None = field(repr=False, default=None)
    vertices: np.ndarray | None = field(repr=False, default=None)

    @property
    def is_smooth(self) -> bool:
        return self.kind in (ShapeKind.CIRCLE, ShapeKind.ELLIPSE)

    @property
    def n_samples(self) -> int:
        return len(self.boundary)

    @property
    def perimeter(self) -> float:
        if self.kind is ShapeKind.CIRCLE:
            return 2.0 * math.pi * self.params[0]
        if self.kind is ShapeKind.ELLIPSE:
            a, b = self.params
            # Ramanujan II; relative error < 1e-9 at these aspect ratios.
            h = ((a - b) / (a + b)) ** 2
            return math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    @property
    def width(self) -> float:
        """Mean caliper width (perimeter / pi); the diameter for a circle."""
        return self.perimeter / math.pi

    @property
    def radius(self) -> float:
        """Largest distance from the centroid to the boundary."""
        return float(np.hypot(self.boundary[:, 0], self.boundary[:, 1]).max())

    def point_at(self, t) -> np.ndarray:
        """Boundary point(s) of a smooth shape at parametric angle ``t`` (radians)."""
        t = np.asarray(t, dtype=float)
        if self.kind is ShapeKind.CIRCLE:
            r = self.params[0]
            pts = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
        elif self.kind is ShapeKind.ELLIPSE:
            a, b = self.params
            pts = np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)
        else:
            raise GeometryError(f"{self.kind.value} has no smooth parametrisation")
        if self.rotation:
            pts = pts @ rotation_matrix(self.rotation).T
        return pts

    def signed_distance(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Exact signed distance to the region and the outward normal of the closest feature."""
        q = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.kind is ShapeKind.CIRCLE:
            r = np.hypot(q[:, 0], q[:, 1])
            safe = np.where(r > 0.0, r, 1.0)
            normal = np.where((r > 0.0)[:, None], q / safe[:, None], np.array([1.0, 0.0]))
            return r - self.params[0], normal
        if self.kind is ShapeKind.ELLIPSE:
            if self.rotation:
                rot = rotation_matrix(self.rotation)
                sd, n = kernels.ellipse_signed_distance(q @ rot, *self.params)
                return sd, n @ rot.T
            return kernels.ellipse_signed_distance(q, *self.params)
        return kernels.polygon_signed_distance(q, self.vertices)

    def support(self, direction) -> float:
        """Support function h(u) = max over the region of <x, u> for a unit vector u."""
        u = np.asarray(direction, dtype=float)
        if self.kind is ShapeKind.CIRCLE:
            return float(self.params[0])
        if self.kind is ShapeKind.ELLIPSE:
            a, b = self.params
            ur = rotation_matrix(-self.rotation) @ u
            return float(math.hypot(a * ur[0], b * ur[1]))
        return float((self.vertices @ u).max())


def _polygon_area_centroid(v: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _sample_polygon(v: np.ndarray, n: int) -> np.ndarray:
    # Every vertex is a sample, so the extreme of any convex violation
    # function along an edge is represented exactly.
    e = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(e[:, 0], e[:, 1])
    m = len(v)
    if n < m:
        raise GeometryError(f"need at least {m} samples for a {m}-gon")
    share = (n - m) * lengths / lengths.sum()
    counts = np.floor(share).astype(int)
    remainder = n - m - counts.sum()
    order = np.argsort(-(share - counts), kind="stable")
    counts[order[:remainder]] += 1
    pts = []
    for i in range(m):
        k = counts[i] + 1
        s = np.arange(k) / k
        pts.append(v[i] + s[:, None] * e[i])
    return np.concatenate(pts)


def _check_convex(v: np.ndarray) -> np.ndarray:
    if len(v) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    e = np.roll(v, -1, axis=0) - v
    if np.any(np.hypot(e[:, 0], e[:, 1]) <= 0.0):
        raise GeometryError("polygon has repeated vertices")
    nxt = np.roll(e, -1, axis=0)
    cross = e[:, 0] * nxt[:, 1] - e[:, 1] * nxt[:, 0]
    if np.all(cross > 0):
        return v
    if np.all(cross < 0):
        return v[::-1].copy()
    raise GeometryError("polygon is not strictly convex")


def make_cross_section(kind, params, rotation: float = 0.0, n_samples: int = DEFAULT_SAMPLES) -> CrossSection:
    """Build a validated cross-section with ``n_samples`` boundary points.

    ``params`` per kind: circle ``(radius,)``; ellipse ``(semi_x, semi_y)``;
    hexagon ``(circumradius,)``; rectangle ``(length_x, length_y)``;
    polygon: a sequence of ``(x, y)`` vertices (re-centred on the area
    centroid). ``rotation`` turns the footprint in its own frame.
    """
    kind = ShapeKind(kind)
    rot = rotation_matrix(rotation)
    if kind is ShapeKind.POLYGON:
        v = np.asarray(params, dtype=float).reshape(-1, 2)
        v = _check_convex(v)
        area, c = _polygon_area_centroid(v)
        if area <= 0:
            raise GeometryError("polygon has no area")
        v = v - c
        params = tuple(map(tuple, v.tolist()))
    else:
        params = tuple(float(p) for p in np.atleast_1d(params))
        expected = {ShapeKind.CIRCLE: 1, ShapeKind.HEXAGON: 1, ShapeKind.ELLIPSE: 2, ShapeKind.RECTANGLE: 2}[kind]
        if len(params) != expected:
            raise GeometryError(f"{kind.value} takes {expected} parameter(s), got {len(params)}")
        if any(not (p > 0.0) or not math.isfinite(p) for p in params):
            raise GeometryError(f"{kind.value} dimensions must be positive: {params}")

    vertices = None
    param = None
    if kind in (ShapeKind.CIRCLE, ShapeKind.ELLIPSE):
        param = 2.0 * math.pi * np.arange(n_samples) / n_samples
        if kind is ShapeKind.CIRCLE:
            r = params[0]
            pts = np.stack([r * np.cos(param), r * np.sin(param)], axis=1)
        else:
            a, b = params
            pts = np.stack([a * np.cos(param), b * np.sin(param)], axis=1)
        pts = pts @ rot.T
    else:
        if kind is ShapeKind.HEXAGON:
            ang = np.radians(60.0 * np.arange(6))
            v = params[0] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        elif kind is ShapeKind.RECTANGLE:
            hx, hy = params[0] / 2.0, params[1] / 2.0
            v = np.array([[hx, -hy], [hx, hy], [-hx, hy], [-hx, -hy]])
        vertices = v @ rot.T
        pts = _sample_polygon(vertices, n_samples)

    shape = CrossSection(kind, params, float(rotation), pts, param, vertices)
    if not (MIN_WIDTH <= shape.width <= MAX_WIDTH):
        raise GeometryError(f"characteristic width {shape.width:.2f} mm outside [{MIN_WIDTH}, {MAX_WIDTH}]")
    return shape


@dataclass(frozen=True)
class PoseError:
    """Object pose relative to its hole: translation (mm) and yaw (degrees)."""

    ex: float = 0.0
    ey: float = 0.0
    etheta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey, self.etheta])

    @classmethod
    def from_array(cls, a) -> "PoseError":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def in_gripper_frame(self) -> np.ndarray:
        """(x, y) expressed in the object/gripper frame, plus yaw."""
        t = rotation_matrix(-self.etheta) @ np.array([self.ex, self.ey])
        return np.array([t[0], t[1], self.etheta])

    def to_hole(self, points) -> np.ndarray:
        """Map object-frame points into the hole frame."""
        return np.asarray(points) @ rotation_matrix(self.etheta).T + np.array([self.ex, self.ey])

    def to_gripper(self, points) -> np.ndarray:
        """Map hole-frame points into the object/gripper frame."""
        return (np.asarray(points) - np.array([self.ex, self.ey])) @ rotation_matrix(self.etheta)


def scalar_error(pose: PoseError, weight: float = ROTATION_WEIGHT) -> float:
    """Scalarised misalignment |ex| + |ey| + weight * |etheta| in mm."""
    return abs(pose.ex) + abs(pose.ey) + weight * abs(pose.etheta)


@dataclass(frozen=True, eq=False)
class EnvironmentSpec:
    """Insertion environment built around the nominal shape inflated by ``clearance``."""

    kind: EnvKind
    nominal_shape: CrossSection
    clearance: float = DEFAULT_CLEARANCE

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvKind(self.kind))
        if not (self.clearance > 0.0):
            raise GeometryError("clearance must be positive")

    @property
    def active_constraints(self) -> tuple[str, ...]:
        return ACTIVE_SIDES[self.kind]

    def violation(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Penetration beyond the clearance per point (negative = free) and its normal."""
        q = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.kind is EnvKind.HOLE:
            sd, normal = self.nominal_shape.signed_distance(q)
            return sd - self.clearance, normal
        best = np.full(len(q), -np.inf)
        normal = np.zeros((len(q), 2))
        for side in self.active_constraints:
            u = np.array(_SIDES[side])
            v = q @ u - (self.nominal_shape.support(u) + self.clearance)
            better = v > best
            best = np.where(better, v, best)
            normal[better] = u
        return best, normal


@dataclass(frozen=True)
class Contact:
    point: tuple[float, float]
    depth: float
    normal: tuple[float, float]


@dataclass(frozen=True)
class ContactResult:
    """Outcome of one insertion attempt.

    ``max_violation`` is the largest boundary penetration, negative when
    the object passes with margin; ``max_depth`` clips it at zero.
    """

    fits: bool
    contacts: tuple[Contact, ...]
    max_depth: float
    max_violation: float

    @property
    def total_depth(self) -> float:
        return float(sum(c.depth for c in self.contacts))


def _golden_max(fn, lo: np.ndarray, hi: np.ndarray, iters: int = _GOLDEN_ITERS) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised golden-section maximisation of ``fn`` on each bracket."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - g * (b - a)
        new_d = a + g * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = fn(np.where(left, new_c, new_d))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    t = 0.5 * (a + b)
    return t, fn(t)


def _local_maxima(v: np.ndarray) -> list[int]:
    """Plateau-aware local maxima of a cyclic sequence; one index per plateau (its middle)."""
    n = len(v)
    prev = np.roll(v, 1)
    nxt = np.roll(v, -1)
    cand = (v >= prev - _PLATEAU_TOL) & (v >= nxt - _PLATEAU_TOL)
    if cand.all():
        return [int(np.argmax(v))]
    # Group cyclic runs of candidates, then keep runs not dominated by a neighbour.
    start = int(np.argmin(cand))
    out = []
    i = 0
    while i < n:
        j = (start + i) % n
        if not cand[j]:
            i += 1
            continue
        run = []
        while i < n and cand[(start + i) % n]:
            run.append((start + i) % n)
            i += 1
        vals = v[run]
        peak = vals.max()
        top = [k for k, val in zip(run, vals) if val >= peak - _PLATEAU_TOL]
        out.append(top[len(top) // 2])
    return out


def check_insertion(
    shape: CrossSection,
    pose: PoseError,
    env: EnvironmentSpec,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
) -> ContactResult:
    """Attempt an insertion of ``shape`` displaced by ``pose`` into ``env``."""
    pts = pose.to_hole(shape.boundary)
    v, normal = env.violation(pts)
    maxima = _local_maxima(v)

    cands = []
    if shape.is_smooth:
        refine = [i for i in maxima if v[i] > -_REFINE_MARGIN]
        if refine:
            step = 2.0 * math.pi / shape.n_samples
            t0 = shape.boundary_param[refine]

            def fn(t):
                return env.violation(pose.to_hole(shape.point_at(t)))[0]

            t_best, v_best = _golden_max(fn, t0 - step, t0 + step)
            keep = v_best > v[refine]
            p_best = pose.to_hole(shape.point_at(t_best))
            _, n_best = env.violation(p_best)
            for k, i in enumerate(refine):
                if keep[k]:
                    cands.append((float(v_best[k]), p_best[k], n_best[k]))
                else:
                    cands.append((float(v[i]), pts[i], normal[i]))
        handled = set(refine)
        cands.extend((float(v[i]), pts[i], normal[i]) for i in maxima if i not in handled)
    else:
        cands = [(float(v[i]), pts[i], normal[i]) for i in maxima]

    max_violation = max(float(v.max()), max((c[0] for c in cands), default=-np.inf))
    deep = sorted((c for c in cands if c[0] > 0.0), key=lambda c: -c[0])
    kept: list[Contact] = []
    for depth, p, n in deep:
        if any(math.hypot(p[0] - k.point[0], p[1] - k.point[1]) <= cluster_radius for k in kept):
            continue
        nn = n / math.hypot(n[0], n[1])
        kept.append(Contact((float(p[0]), float(p[1])), depth, (float(nn[0]), float(nn[1]))))

    fits = not kept
    return ContactResult(
        fits=fits,
        contacts=tuple(kept),
        max_depth=0.0 if fits else kept[0].depth,
        max_violation=max_violation,
    )
