"""Episode mechanics: error sampling, insertion attempts, reward and termination.

An episode starts with the object displaced by a hidden pose error and
immediately attempts an insertion. While blocked, the policy sees only the
sensor observation of the last attempt and answers with a gripper-frame
correction; each correction is followed by another attempt.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from .config import Config
from .geometry import ContactResult, EnvironmentSpec, EnvKind, PoseError, check_insertion, rotation_matrix, scalar_error
from .objects import ObjectSpec
from .sensors import Representation, observation_dim, synth_flow, synth_rgb_proxy, synth_wrench


class UsageError(RuntimeError):
    pass


class Outcome(str, Enum):
    RUNNING = "running"
    SUCCESS = "success"
    DIVERGED = "diverged"
    ATTEMPT_LIMIT = "attempt_limit"


@dataclass(frozen=True)
class ErrorRange:
    xy: float
    theta: float


def train_range(config: Config = Config()) -> ErrorRange:
    return ErrorRange(config.sim.train_xy, config.sim.train_theta)


def eval_range(config: Config = Config()) -> ErrorRange:
    return ErrorRange(config.sim.eval_xy, config.sim.eval_theta)


def make_environment(kind, obj: ObjectSpec, config: Config = Config()) -> EnvironmentSpec:
    """Environment matching ``obj``; chamfered objects get reduced clearance."""
    clearance = config.geometry.clearance
    if obj.chamfer:
        clearance -= config.sensors.chamfer_clearance_reduction
    return EnvironmentSpec(EnvKind(kind), obj.shape, clearance)


def clamp_action(action, config: Config = Config()) -> np.ndarray:
    a = np.asarray(action, dtype=float).reshape(3)
    lim = np.array([config.sim.max_step_xy, config.sim.max_step_xy, config.sim.max_step_theta])
    return np.clip(a, -lim, lim)


def apply_action(pose: PoseError, action: np.ndarray) -> PoseError:
    """Move the object by a gripper-frame displacement."""
    dxy = rotation_matrix(pose.etheta) @ action[:2]
    return PoseError(pose.ex + dxy[0], pose.ey + dxy[1], pose.etheta + action[2])


@dataclass(frozen=True, eq=False)
class EpisodeState:
    true_error: PoseError
    attempts: int
    env: EnvironmentSpec
    obj: ObjectSpec
    representation: Representation
    contact: ContactResult
    rng: np.random.Generator = field(repr=False)
    config: Config = field(repr=False, default_factory=Config)
    grasp_offset: np.ndarray | None = None
    outcome: Outcome = Outcome.RUNNING

    @property
    def done(self) -> bool:
        return self.outcome is not Outcome.RUNNING


@dataclass(frozen=True, eq=False)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    true_error: PoseError
    next_true_error: PoseError


def observe(
    contact: ContactResult,
    pose: PoseError,
    obj: ObjectSpec,
    representation: Representation,
    rng: np.random.Generator,
    config: Config = Config(),
    grasp_offset=None,
) -> np.ndarray:
    rep = Representation(representation)
    sp = config.sensors
    if rep is Representation.WRENCH:
        return synth_wrench(contact, rng, sp, pose=pose)
    gain = sp.chamfer_gain if obj.chamfer else 1.0
    flow = synth_flow(contact, pose, rng, sp, gain=gain, lever_arm=obj.lever_arm, grasp_offset=grasp_offset)
    if rep is Representation.RGB:
        return synth_rgb_proxy(flow, obj.fingerprint, rng, sp)
    return flow


def _attempt(state_kw: dict, pose: PoseError) -> tuple[ContactResult, np.ndarray]:
    cfg = state_kw["config"]
    contact = check_insertion(state_kw["obj"].shape, pose, state_kw["env"], cfg.geometry.cluster_radius)
    obs = observe(
        contact, pose, state_kw["obj"], state_kw["representation"], state_kw["rng"], cfg, state_kw["grasp_offset"]
    )
    return contact, obs


def sample_error(rng: np.random.Generator, error_range: ErrorRange) -> PoseError:
    xy = rng.uniform(-error_range.xy, error_range.xy, 2)
    th = rng.uniform(-error_range.theta, error_range.theta)
    return PoseError(float(xy[0]), float(xy[1]), float(th))


def reset(
    env: EnvironmentSpec,
    obj: ObjectSpec,
    representation,
    rng: np.random.Generator,
    error_range: ErrorRange | None = None,
    config: Config = Config(),
    initial_error: PoseError | None = None,
    grasp_offset=None,
) -> tuple[EpisodeState, np.ndarray]:
    """Sample a hidden error and perform the first insertion attempt."""
    error_range = error_range or train_range(config)
    pose = initial_error if initial_error is not None else sample_error(rng, error_range)
    kw = dict(
        env=env,
        obj=obj,
        representation=Representation(representation),
        rng=rng,
        config=config,
        grasp_offset=None if grasp_offset is None else np.asarray(grasp_offset, dtype=float),
    )
    contact, obs = _attempt(kw, pose)
    outcome = Outcome.SUCCESS if contact.fits else Outcome.RUNNING
    if outcome is Outcome.SUCCESS:
        obs = np.zeros_like(obs)
    state = EpisodeState(true_error=pose, attempts=1, contact=contact, outcome=outcome, **kw)
    return state, obs


def step(state: EpisodeState, action) -> tuple[np.ndarray, float, EpisodeState]:
    """Apply a correction, attempt again and score the attempt."""
    if state.done:
        raise UsageError(f"episode already finished ({state.outcome.value})")
    cfg = state.config
    a = clamp_action(action, cfg)
    new_pose = apply_action(state.true_error, a)
    kw = dict(
        env=state.env,
        obj=state.obj,
        representation=state.representation,
        rng=state.rng,
        config=cfg,
        grasp_offset=state.grasp_offset,
    )
    contact, obs = _attempt(kw, new_pose)
    attempts = state.attempts + 1

    sim = cfg.sim
    if abs(new_pose.ex) > sim.emax_xy or abs(new_pose.ey) > sim.emax_xy or abs(new_pose.etheta) > sim.emax_theta:
        outcome = Outcome.DIVERGED
    elif contact.fits:
        outcome = Outcome.SUCCESS
    elif attempts >= sim.max_attempts:
        outcome = Outcome.ATTEMPT_LIMIT
    else:
        outcome = Outcome.RUNNING

    w = cfg.geometry.rotation_weight
    reward = scalar_error(state.true_error, w) - scalar_error(new_pose, w) - sim.penalty
    if outcome is Outcome.SUCCESS:
        reward += sim.success_reward
    if outcome is not Outcome.RUNNING:
        obs = np.zeros_like(obs)
    new_state = dataclasses.replace(state, true_error=new_pose, attempts=attempts, contact=contact, outcome=outcome)
    return obs, float(reward), new_state


Policy = Callable[[np.ndarray], np.ndarray]


class OraclePolicy:
    """Privileged reference controller that cancels the true error (clamped)."""

    privileged = True

    def __call__(self, obs, true_error: PoseError):
        g = true_error.in_gripper_frame()
        return -g


class ZeroPolicy:
    def __call__(self, obs):
        return np.zeros(3)


def _act(policy, obs: np.ndarray, state: EpisodeState) -> np.ndarray:
    if getattr(policy, "privileged", False):
        return np.asarray(policy(obs, state.true_error), dtype=float)
    return np.asarray(policy(obs), dtype=float)


def _contact_record(contact: ContactResult) -> list:
    return [{"point": list(c.point), "depth": c.depth, "normal": list(c.normal)} for c in contact.contacts]


@dataclass
class EpisodeLog:
    object: str
    env: str
    representation: str
    initial_error: PoseError
    transitions: list[Transition] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    outcome: Outcome = Outcome.RUNNING
    attempts: int = 0

    @property
    def steps(self) -> int:
        return len(self.transitions)

    @property
    def total_reward(self) -> float:
        return float(sum(t.reward for t in self.transitions))

    @property
    def final_error(self) -> PoseError:
        return self.transitions[-1].next_true_error if self.transitions else self.initial_error

    def to_lines(self, episode: int | None = None, extra: dict | None = None) -> Iterable[str]:
        """Line-delimited JSON, one record per insertion attempt."""
        for rec in self.records:
            out = dict(rec)
            if episode is not None:
                out["episode"] = episode
            if extra:
                out.update(extra)
            yield json.dumps(out, sort_keys=True)


def run_episode(
    policy,
    env: EnvironmentSpec,
    obj: ObjectSpec,
    representation,
    rng: np.random.Generator,
    max_attempts: int | None = None,
    error_range: ErrorRange | None = None,
    config: Config = Config(),
    initial_error: PoseError | None = None,
    grasp_offset=None,
    on_transition: Callable[[Transition], bool | None] | None = None,
    keep_obs: bool = True,
) -> EpisodeLog:
    """Run one episode to termination.

    ``on_transition`` is called after every step; returning ``False`` stops
    the episode early (used to enforce transition budgets).
    """
    if max_attempts is not None and max_attempts != config.sim.max_attempts:
        config = dataclasses.replace(config, sim=dataclasses.replace(config.sim, max_attempts=max_attempts))
    state, obs = reset(env, obj, representation, rng, error_range, config, initial_error, grasp_offset)
    log = EpisodeLog(obj.name, env.kind.value, Representation(representation).value, state.true_error)

    def record(st: EpisodeState, ob: np.ndarray, action=None, reward=None):
        log.records.append(
            {
                "attempt": st.attempts,
                "error": [st.true_error.ex, st.true_error.ey, st.true_error.etheta],
                "fits": st.contact.fits,
                "contacts": _contact_record(st.contact),
                "obs": ob.tolist() if keep_obs else None,
                "reward": reward,
                "action": None if action is None else action.tolist(),
                "outcome": st.outcome.value,
            }
        )

    pending = dict(st=state, ob=obs, reward=None)
    while not state.done:
        action = clamp_action(_act(policy, obs, state), config)
        record(pending["st"], pending["ob"], action, pending["reward"])
        next_obs, reward, new_state = step(state, action)
        tr = Transition(obs, action, reward, next_obs, new_state.done, state.true_error, new_state.true_error)
        log.transitions.append(tr)
        state, obs = new_state, next_obs
        pending = dict(st=state, ob=obs, reward=reward)
        if on_transition is not None and on_transition(tr) is False:
            break
    record(pending["st"], pending["ob"], None, pending["reward"])
    log.outcome = state.outcome
    log.attempts = state.attempts
    return log


def zero_observation(representation, config: Config = Config()) -> np.ndarray:
    return np.zeros(observation_dim(representation, config.sensors))
