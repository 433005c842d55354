"""Feature-level sensor models: tactile flow, RGB proxy and force/torque.

Every model turns a :class:`~tactile_insertion.geometry.ContactResult` into a
flat observation vector. Signals ramp up linearly over the contact frames and
carry i.i.d. Gaussian noise. Without contact the vector is pure noise.

Flow layout is ``(frame, sensor, feature)`` with features
``(shear_x, shear_z, inplane_rotation)``; wrench layout is
``(frame, channel)`` with channels ``(Fx, Fy, Fz, Tx, Ty)``.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .config import SensorParams
from .geometry import ContactResult, PoseError, rotation_matrix

SHEAR_X, SHEAR_Z, INPLANE_ROTATION = 0, 1, 2
N_SENSORS = 2
N_FLOW_FEATURES = 3
WRENCH_CHANNELS = ("Fx", "Fy", "Fz", "Tx", "Ty")
FINGERPRINT_DIM = 16
_TEXTURE_SEED = 0x5EED7E


class Representation(str, Enum):
    FLOW = "flow"
    RGB = "rgb"
    WRENCH = "wrench"


def flow_dim(params: SensorParams = SensorParams()) -> int:
    return params.frames * N_SENSORS * N_FLOW_FEATURES


def observation_dim(rep: Representation | str, params: SensorParams = SensorParams()) -> int:
    rep = Representation(rep)
    if rep is Representation.FLOW:
        return flow_dim(params)
    if rep is Representation.RGB:
        return flow_dim(params) + FINGERPRINT_DIM
    return params.wrench_frames * len(WRENCH_CHANNELS)


def _ramp(frames: int) -> np.ndarray:
    return np.arange(1, frames + 1) / frames


def contact_summary(contact: ContactResult, pose: PoseError):
    """Total reaction f (sum of depths) and depth-weighted centroid in the gripper frame."""
    if contact.fits:
        return 0.0, np.zeros(2)
    d = np.array([c.depth for c in contact.contacts])
    pts = np.array([c.point for c in contact.contacts])
    f = float(d.sum())
    centroid = (d[:, None] * pts).sum(axis=0) / f
    return f, pose.to_gripper(centroid)


def flow_base(
    contact: ContactResult,
    pose: PoseError,
    params: SensorParams = SensorParams(),
    gain: float = 1.0,
    lever_arm: float = 17.5,
    grasp_offset=None,
) -> np.ndarray:
    """Noise-free per-sensor features at full contact, shape ``(2, 3)``.

    The yaw cue uses the tangential displacement ``lever_arm * sin(etheta)``
    so that every gain is per mm^2.
    """
    base = np.zeros((N_SENSORS, N_FLOW_FEATURES))
    if contact.fits:
        return base
    f, p = contact_summary(contact, pose)
    if grasp_offset is not None:
        p = p + np.asarray(grasp_offset)
    px, py = p
    rot = params.kappa1 * px * f
    dz = params.kappa2 * py * f
    zmean = params.kappa3 * f
    dx = params.kappa4 * f * lever_arm * math.sin(math.radians(pose.etheta))
    base[0] = (0.5 * dx, zmean + 0.5 * dz, rot)
    base[1] = (-0.5 * dx, zmean - 0.5 * dz, -rot)
    return gain * base


def synth_flow(
    contact: ContactResult,
    pose: PoseError,
    rng: np.random.Generator,
    params: SensorParams = SensorParams(),
    gain: float = 1.0,
    lever_arm: float = 17.5,
    grasp_offset=None,
) -> np.ndarray:
    base = flow_base(contact, pose, params, gain, lever_arm, grasp_offset)
    frames = _ramp(params.frames)[:, None, None] * base[None]
    noise = rng.normal(0.0, params.sigma, frames.shape)
    return (frames + noise).reshape(-1)


def texture_pattern(fingerprint: np.ndarray, dim: int) -> np.ndarray:
    """Deterministic per-object modulation in (-1, 1) derived from the fingerprint."""
    proj = np.random.default_rng(_TEXTURE_SEED).standard_normal((dim, len(fingerprint)))
    return np.tanh(2.0 * proj @ np.asarray(fingerprint))


def synth_rgb_proxy(
    flow: np.ndarray,
    fingerprint: np.ndarray,
    rng: np.random.Generator,
    params: SensorParams = SensorParams(),
) -> np.ndarray:
    """Flow with object-texture modulation plus the object's appearance vector."""
    flow = np.asarray(flow, dtype=float)
    texture = texture_pattern(fingerprint, flow.size)
    block = flow * (1.0 + params.texture_amplitude * texture)
    block = block + rng.normal(0.0, params.rgb_noise, flow.size)
    return np.concatenate([block, params.fingerprint_scale * np.asarray(fingerprint, dtype=float)])


def wrench_base(
    contact: ContactResult,
    pose: PoseError | None = None,
    params: SensorParams = SensorParams(),
) -> np.ndarray:
    """Noise-free (Fx, Fy, Fz, Tx, Ty) at full contact in the gripper frame."""
    pose = pose or PoseError()
    if contact.fits:
        return np.zeros(len(WRENCH_CHANNELS))
    f, p = contact_summary(contact, pose)
    d = np.array([c.depth for c in contact.contacts])
    n = np.array([c.normal for c in contact.contacts])
    # Reaction on the object opposes the outward normal of the violated wall.
    fxy = -(d[:, None] * n).sum(axis=0) @ rotation_matrix(pose.etheta)
    g = params.force_gain
    gl = g * params.lateral_force_ratio
    t = params.torque_gain
    return np.array([gl * fxy[0], gl * fxy[1], -g * f, t * p[1] * f, -t * p[0] * f])


def synth_wrench(
    contact: ContactResult,
    rng: np.random.Generator,
    params: SensorParams = SensorParams(),
    pose: PoseError | None = None,
) -> np.ndarray:
    """F/T stream without the yaw-torque channel."""
    base = wrench_base(contact, pose, params)
    frames = _ramp(params.wrench_frames)[:, None] * base[None]
    noise = rng.normal(0.0, params.sigma, frames.shape)
    return (frames + noise).reshape(-1)
