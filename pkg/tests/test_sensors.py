import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactile_insertion.config import SensorParams
from tactile_insertion.geometry import Contact, ContactResult, EnvironmentSpec, PoseError, check_insertion
from tactile_insertion.objects import fingerprint, make_object, training_objects, novel_objects
from tactile_insertion.sensors import (
    FINGERPRINT_DIM,
    Representation,
    flow_base,
    observation_dim,
    synth_flow,
    synth_rgb_proxy,
    synth_wrench,
    wrench_base,
)

FITS = ContactResult(True, (), 0.0, -1.0)
P = SensorParams()


def single(px, py, depth=1.0, normal=(1.0, 0.0)):
    return ContactResult(False, (Contact((px, py), depth, normal),), depth, depth)


def frames(obs, k=12):
    return obs.reshape(k, 2, 3)


def test_dimensions():
    rng = np.random.default_rng(0)
    assert synth_flow(FITS, PoseError(), rng).size == 72 == observation_dim("flow")
    assert observation_dim(Representation.RGB) == 88
    assert synth_wrench(FITS, rng).size == 160 == observation_dim("wrench")
    fp = fingerprint(1)
    assert synth_rgb_proxy(np.zeros(72), fp, rng).size == 88


def test_no_contact_is_zero_mean_noise():
    rng = np.random.default_rng(1)
    obs = np.array([synth_flow(FITS, PoseError(), rng) for _ in range(1000)])
    assert abs(obs.mean()) < 0.02
    assert np.abs(obs.mean(axis=0)).max() < 0.02


def test_noise_calibration():
    rng = np.random.default_rng(2)
    obs = np.array([synth_flow(FITS, PoseError(), rng) for _ in range(10_000)])
    var = obs.var(axis=0)
    s2 = P.sigma**2
    assert var.min() >= 0.8 * s2 and var.max() <= 1.2 * s2
    w = np.array([synth_wrench(FITS, rng) for _ in range(10_000)])
    assert 0.8 * s2 <= w.var(axis=0).min() and w.var(axis=0).max() <= 1.2 * s2


def test_inplane_rotation_sign_follows_contact_side():
    b_pos = flow_base(single(10.0, 0.0), PoseError())
    b_neg = flow_base(single(-10.0, 0.0), PoseError())
    assert b_pos[0, 2] > 0 > b_neg[0, 2]
    assert b_pos[1, 2] == -b_pos[0, 2]  # the two sensors rotate oppositely


def test_differential_vertical_shear():
    up = flow_base(single(0.0, 10.0), PoseError())
    down = flow_base(single(0.0, -10.0), PoseError())
    assert up[0, 1] - up[1, 1] > 0
    assert down[0, 1] - down[1, 1] < 0


def test_base_gains():
    b = flow_base(single(10.0, 5.0, depth=2.0), PoseError())
    assert b[0, 2] == pytest.approx(P.kappa1 * 10 * 2)
    assert b[0, 1] - b[1, 1] == pytest.approx(P.kappa2 * 5 * 2)
    assert (b[0, 1] + b[1, 1]) / 2 == pytest.approx(P.kappa3 * 2)
    assert b[0, 0] == b[1, 0] == 0.0  # no yaw, no differential x shear


def test_yaw_cue_sign():
    c = single(10.0, 0.0)
    assert flow_base(c, PoseError(0, 0, 5))[0, 0] > 0 > flow_base(c, PoseError(0, 0, -5))[0, 0]


@settings(max_examples=100, deadline=None)
@given(
    px=st.floats(-30, 30, allow_nan=False, allow_subnormal=False),
    py=st.floats(-30, 30, allow_nan=False, allow_subnormal=False),
    d=st.floats(0.01, 8, allow_nan=False),
)
def test_sign_coding_single_contact(px, py, d):
    b = flow_base(single(px, py, d), PoseError())
    assert np.sign(b[0, 2]) == np.sign(px * d)


def test_contact_ramp_envelope():
    c = single(10.0, 0.0, depth=2.0)
    p = SensorParams(sigma=0.0)
    f = frames(synth_flow(c, PoseError(), np.random.default_rng(0), p))
    base = flow_base(c, PoseError(), p)
    for k in range(12):
        assert np.allclose(f[k], (k + 1) / 12 * base)


def test_determinism():
    c = single(3.0, -4.0)
    a = synth_flow(c, PoseError(1, 2, 3), np.random.default_rng(9))
    b = synth_flow(c, PoseError(1, 2, 3), np.random.default_rng(9))
    assert np.array_equal(a, b)


# --- RGB proxy ------------------------------------------------------------


def test_fingerprint_constant_per_object():
    obj = make_object("cuboid")
    rng = np.random.default_rng(0)
    flow = synth_flow(single(5, 0), PoseError(), rng)
    a = synth_rgb_proxy(flow, obj.fingerprint, rng)
    b = synth_rgb_proxy(flow, obj.fingerprint, rng)
    assert np.array_equal(a[72:], b[72:])
    assert np.linalg.norm(obj.fingerprint) == pytest.approx(1.0)


def test_fingerprints_of_distinct_objects_differ():
    fps = [o.fingerprint for o in training_objects() + novel_objects()]
    assert all(len(f) == FINGERPRINT_DIM for f in fps)
    for i in range(len(fps)):
        for j in range(i + 1, len(fps)):
            assert float(fps[i] @ fps[j]) < 0.9


def test_zero_flow_leaves_noise_and_fingerprint():
    fp = fingerprint(3)
    out = synth_rgb_proxy(np.zeros(72), fp, np.random.default_rng(0), SensorParams(rgb_noise=0.0))
    assert np.all(out[:72] == 0.0)
    assert np.allclose(out[72:], P.fingerprint_scale * fp)


def test_texture_modulation_bounded():
    flow = np.ones(72)
    out = synth_rgb_proxy(flow, fingerprint(2), np.random.default_rng(0), SensorParams(rgb_noise=0.0))
    assert np.all(np.abs(out[:72] - 1.0) <= P.texture_amplitude)
    assert not np.allclose(out[:72], 1.0)


# --- wrench ---------------------------------------------------------------


def test_wrench_no_contact_noise_only():
    rng = np.random.default_rng(4)
    w = np.array([synth_wrench(FITS, rng) for _ in range(500)])
    assert abs(w.mean()) < 0.01


def test_wrench_torque_sign():
    assert wrench_base(single(10.0, 0.0))[4] < 0 < wrench_base(single(-10.0, 0.0))[4]
    assert wrench_base(single(0.0, 10.0))[3] > 0
    assert wrench_base(single(0.0, 0.0, 2.0))[2] < 0  # Fz opposes the push


def test_wrench_lateral_force_opposes_normal():
    w = wrench_base(single(10.0, 0.0, normal=(1.0, 0.0)))
    assert w[0] < 0 and w[1] == pytest.approx(0.0)


def _circle_wrench_samples(pose, n=400, seed=5):
    obj = make_object("cylinder")
    env = EnvironmentSpec("hole", obj.shape)
    c = check_insertion(obj.shape, pose, env)
    rng = np.random.default_rng(seed)
    return c, np.array([synth_wrench(c, rng, pose=pose) for _ in range(n)])


def _same_mean(a, b):
    z = (a.mean(0) - b.mean(0)) / np.sqrt(a.var(0) / len(a) + b.var(0) / len(b))
    return np.abs(z).max() < 4.5  # two-sample z test, Bonferroni over 160 channels


def test_wrench_circle_yaw_centred():
    _, a = _circle_wrench_samples(PoseError(0, 0, 8))
    _, b = _circle_wrench_samples(PoseError(0, 0, -8), seed=6)
    assert _same_mean(a, b)


def test_wrench_blind_to_circle_yaw_under_contact():
    """Same gripper-frame offset, opposite yaw: identical F/T, different flow."""
    offs = np.array([5.0, 0.0])
    poses = []
    for th in (8.0, -8.0):
        t = PoseError(0, 0, th).to_hole(offs[None])[0]
        poses.append(PoseError(t[0], t[1], th))
    ca, a = _circle_wrench_samples(poses[0])
    cb, b = _circle_wrench_samples(poses[1], seed=6)
    assert not ca.fits and not cb.fits
    assert _same_mean(a, b)
    fa, fb = flow_base(ca, poses[0]), flow_base(cb, poses[1])
    assert np.sign(fa[0, 0]) != np.sign(fb[0, 0])
