import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_max_violation, random_shape_args
from tactile_insertion import kernels
from tactile_insertion import _kernels_py
from tactile_insertion.geometry import (
    EnvironmentSpec,
    EnvKind,
    GeometryError,
    PoseError,
    check_insertion,
    make_cross_section,
    scalar_error,
)

CIRCLE = make_cross_section("circle", [17.5])


def hole(shape, c=3.0):
    return EnvironmentSpec(EnvKind.HOLE, shape, c)


# --- cross-sections -------------------------------------------------------


def test_circle_width_is_diameter():
    assert CIRCLE.width == pytest.approx(35.0, abs=1e-12)


def test_square_rotated_quarter_turn_is_same_point_set():
    a = make_cross_section("rectangle", [35, 35])
    b = make_cross_section("rectangle", [35, 35], rotation=90)
    key = lambda p: np.round(p, 9).tolist()
    assert sorted(key(a.boundary)) == sorted(key(b.boundary))


def test_hexagon_boundary_between_apothem_and_circumradius():
    h = make_cross_section("hexagon", [17.5])
    r = np.hypot(*h.boundary.T)
    assert len(r) == 256
    apothem = 17.5 * math.cos(math.pi / 6)
    assert r.min() >= apothem - 1e-9
    assert r.max() <= 17.5 + 1e-9


@pytest.mark.parametrize("kind,params", [("circle", [17.5]), ("ellipse", [21, 13]), ("hexagon", [18]), ("rectangle", [50, 25])])
def test_boundary_samples_on_analytic_boundary(kind, params):
    s = make_cross_section(kind, params, rotation=17.0)
    sd, _ = s.signed_distance(s.boundary)
    assert np.abs(sd).max() < 1e-9
    assert s.n_samples == 256


def test_centroid_at_origin_for_offset_polygon():
    tri = np.array([[100.0, 100.0], [140.0, 100.0], [120.0, 135.0]])
    s = make_cross_section("polygon", tri)
    v = np.asarray(s.vertices)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = cr.sum() / 2
    assert abs(((x + xn) * cr).sum() / (6 * a)) < 1e-9
    assert abs(((y + yn) * cr).sum() / (6 * a)) < 1e-9


@pytest.mark.parametrize(
    "kind,params",
    [
        ("circle", [-1.0]),
        ("rectangle", [30, 0]),
        ("polygon", [[0, 0], [30, 0], [5, 5], [0, 30]]),
        ("circle", [5.0]),  # width 10 mm, below the object scale
        ("ellipse", [20]),
    ],
)
def test_invalid_shapes_rejected(kind, params):
    with pytest.raises(GeometryError):
        make_cross_section(kind, params)


def test_clockwise_polygon_accepted():
    sq = np.array([[0, 0], [0, 30], [30, 30], [30, 0]], dtype=float)
    s = make_cross_section("polygon", sq)
    assert s.width == pytest.approx(4 * 30 / math.pi)


# --- check_insertion examples --------------------------------------------


def test_zero_error_fits():
    r = check_insertion(CIRCLE, PoseError(0, 0, 0), hole(CIRCLE))
    assert r.fits and r.contacts == () and r.max_depth == 0.0


def test_circle_offset_single_contact():
    r = check_insertion(CIRCLE, PoseError(4, 0, 0), hole(CIRCLE))
    assert not r.fits
    assert len(r.contacts) == 1
    c = r.contacts[0]
    assert r.max_depth == pytest.approx(1.0, abs=1e-9)
    assert c.point[0] > 0 and abs(c.point[1]) < 1e-6
    assert c.normal == pytest.approx((1.0, 0.0), abs=1e-6)


def test_rotated_rectangle_diagonal_corner_contacts():
    # 35x25 clears the 3 mm hole at 8 degrees (margin ~0.69 mm); at 12 degrees
    # two diagonally opposite corners are blocked.
    rect = make_cross_section("rectangle", [35, 25])
    env = hole(rect)
    r8 = check_insertion(rect, PoseError(0, 0, 8), env)
    assert r8.fits and r8.max_violation == pytest.approx(oracle_max_violation(rect, PoseError(0, 0, 8), "hole"), abs=1e-6)
    r = check_insertion(rect, PoseError(0, 0, 12), env)
    assert not r.fits and len(r.contacts) >= 2
    p = np.array([c.point for c in r.contacts[:2]])
    assert np.dot(p[0], p[1]) < 0  # opposite sides of the centre
    assert r.contacts[0].depth == pytest.approx(r.contacts[1].depth, abs=1e-9)


def test_square_nine_degrees_matches_oracle():
    sq = make_cross_section("rectangle", [35, 35])
    pose = PoseError(0, 0, 9)
    r = check_insertion(sq, pose, hole(sq))
    assert r.fits == (oracle_max_violation(sq, pose, "hole") > 0) is False or r.fits


def test_contact_result_invariants():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k, p, rot = random_shape_args(rng)
        try:
            s = make_cross_section(k, p, rot)
        except GeometryError:
            continue
        env = EnvironmentSpec(list(EnvKind)[int(rng.integers(4))], s, 3.0)
        r = check_insertion(s, PoseError(*rng.uniform(-8, 8, 2), rng.uniform(-15, 15)), env)
        assert r.fits == (len(r.contacts) == 0) == (r.max_depth == 0.0)
        for c in r.contacts:
            assert c.depth > 0
            assert abs(math.hypot(*c.normal) - 1.0) < 1e-9
        depths = [c.depth for c in r.contacts]
        assert depths == sorted(depths, reverse=True)
        for i, a in enumerate(r.contacts):
            for b in r.contacts[i + 1 :]:
                assert math.dist(a.point, b.point) > 2.0


def test_wall_contacts_use_wall_normals():
    r = check_insertion(CIRCLE, PoseError(2, -5, 0), EnvironmentSpec("corner_wall", CIRCLE))
    assert len(r.contacts) == 1
    assert r.contacts[0].normal == pytest.approx((0.0, -1.0))
    assert r.max_depth == pytest.approx(2.0, abs=1e-9)


def test_oracle_agreement_sample():
    """A quick slice of the full oracle comparison run by the acceptance suite."""
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 300:
        k, p, rot = random_shape_args(rng)
        try:
            s = make_cross_section(k, p, rot)
        except GeometryError:
            continue
        pose = PoseError(*rng.uniform(-8, 8, 2), rng.uniform(-15, 15))
        kind = list(EnvKind)[int(rng.integers(4))]
        r = check_insertion(s, pose, EnvironmentSpec(kind, s, 3.0))
        ov = oracle_max_violation(s, pose, kind)
        assert r.fits == (ov <= 0) or abs(ov) < 1e-6
        checked += 1


# --- scalar error ----------------------------------------------------------


@pytest.mark.parametrize("pose,expected", [((0, 0, 0), 0.0), ((3, -4, 0), 7.0), ((0, 0, 10), 5.0)])
def test_scalar_error(pose, expected):
    assert scalar_error(PoseError(*pose)) == expected


def test_pose_frames_round_trip():
    pose = PoseError(1.5, -2.0, 23.0)
    pts = np.array([[3.0, 4.0], [-7.0, 0.5]])
    assert np.allclose(pose.to_gripper(pose.to_hole(pts)), pts, atol=1e-12)
    g = pose.in_gripper_frame()
    assert math.hypot(g[0], g[1]) == pytest.approx(math.hypot(1.5, -2.0))


# --- properties -----------------------------------------------------------

finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.0, 10.0, **finite), frac=st.floats(0.0, 1.0, **finite))
def test_circle_fit_monotone_in_translation(t, frac):
    env = hole(CIRCLE)
    if check_insertion(CIRCLE, PoseError(t, 0, 0), env).fits:
        assert check_insertion(CIRCLE, PoseError(t * frac, 0, 0), env).fits


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-8, 8, **finite), y=st.floats(-8, 8, **finite), th=st.floats(-30, 30, **finite))
def test_circle_depth_invariant_to_yaw(x, y, th):
    env = hole(CIRCLE)
    a = check_insertion(CIRCLE, PoseError(x, y, 0.0), env)
    b = check_insertion(CIRCLE, PoseError(x, y, th), env)
    assert a.fits == b.fits
    assert abs(a.max_depth - b.max_depth) < 1e-9
    assert a.max_depth == pytest.approx(max(math.hypot(x, y) - 3.0, 0.0), abs=1e-9)


shape_strategy = st.sampled_from(
    [
        ("circle", [17.5]),
        ("ellipse", [21, 13]),
        ("hexagon", [18]),
        ("rectangle", [50, 25]),
        ("rectangle", [35, 35]),
        ("ellipse", [24, 20]),
    ]
)


@settings(max_examples=80, deadline=None)
@given(
    shape=shape_strategy,
    x=st.floats(-8, 8, **finite),
    y=st.floats(-8, 8, **finite),
    th=st.floats(-15, 15, **finite),
)
def test_constraint_nesting(shape, x, y, th):
    s = make_cross_section(*shape)
    pose = PoseError(x, y, th)
    if check_insertion(s, pose, EnvironmentSpec("hole", s)).fits:
        for kind in ("u_wall", "corner_wall", "line_wall"):
            assert check_insertion(s, pose, EnvironmentSpec(kind, s)).fits


@settings(max_examples=80, deadline=None)
@given(
    shape=shape_strategy,
    x=st.floats(-8, 8, **finite),
    y=st.floats(-8, 8, **finite),
    th=st.floats(-15, 15, **finite),
    kind=st.sampled_from(list(EnvKind)),
)
def test_matches_oracle(shape, x, y, th, kind):
    s = make_cross_section(*shape)
    pose = PoseError(x, y, th)
    r = check_insertion(s, pose, EnvironmentSpec(kind, s))
    ov = oracle_max_violation(s, pose, kind)
    assert r.fits == (ov <= 0) or abs(ov) < 1e-6
    if ov > 0:  # the ellipse oracle only bounds the slack of fitting poses
        assert r.max_violation == pytest.approx(ov, abs=2e-3)


# --- kernel backends ------------------------------------------------------


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(3))
def test_compiled_kernels_match_fallback(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-40, 40, (500, 2))
    verts = make_cross_section("hexagon", [18], rotation=7).vertices
    sd_a, n_a = kernels.polygon_signed_distance(pts, verts)
    sd_b, n_b = _kernels_py.polygon_signed_distance(pts, verts)
    assert np.allclose(sd_a, sd_b, atol=1e-12) and np.allclose(n_a, n_b, atol=1e-9)
    sd_a, n_a = kernels.ellipse_signed_distance(pts, 21.0, 13.0)
    sd_b, n_b = _kernels_py.ellipse_signed_distance(pts, 21.0, 13.0)
    assert np.allclose(sd_a, sd_b, atol=1e-10) and np.allclose(n_a, n_b, atol=1e-7)


def test_ellipse_distance_against_dense_sampling():
    t = np.linspace(0, 2 * np.pi, 200_001)
    curve = np.stack([21 * np.cos(t), 13 * np.sin(t)], axis=1)
    pts = np.array([[30.0, 2.0], [0.0, 20.0], [-25.0, -9.0], [5.0, 3.0]])
    sd, _ = _kernels_py.ellipse_signed_distance(pts, 21.0, 13.0)
    dense = np.array([np.hypot(*(curve - p).T).min() for p in pts])
    assert np.allclose(np.abs(sd), dense, atol=1e-6)
    assert sd[3] < 0 < sd[0]


def test_pure_python_backend_selected_by_env(monkeypatch):
    import importlib

    monkeypatch.setenv("TACTILE_INSERTION_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("TACTILE_INSERTION_PURE_PYTHON")
        importlib.reload(kernels)
