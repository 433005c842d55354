"""Staged training over wall environments and objects, and the flat ablation.

Stages run LineWall -> CornerWall -> UWall -> Hole. The LineWall stage starts
with one object and unlocks the next each time the reward test fires. Every
run spends the same transition budget, so the curriculum and the flat
ablation see exactly the same amount of data.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import ReplayBuffer, TD3Agent, td3_select_action, td3_update
from .config import Config
from .geometry import ACTIVE_SIDES, EnvKind, PoseError
from .objects import TRAINING_NAMES, ObjectSpec, make_object
from .sim import make_environment, run_episode, train_range

ENV_ORDER = (EnvKind.LINE_WALL, EnvKind.CORNER_WALL, EnvKind.U_WALL, EnvKind.HOLE)


@dataclass(frozen=True)
class CurriculumStage:
    env: EnvKind
    objects: tuple[str, ...]
    max_episodes: int
    theta_r: float
    theta_s: float
    window: int = 30
    unlock: bool = False

    def __post_init__(self):
        if self.window < 1 or self.max_episodes < 1:
            raise ValueError("stage window and episode cap must be positive")
        if not self.objects:
            raise ValueError("stage needs at least one object")


def thresholds(config: Config) -> tuple[float, float]:
    cp = config.curriculum
    r_s = config.sim.success_reward
    return cp.theta_r_fraction * r_s, cp.theta_s_fraction * r_s


def default_schedule(config: Config = Config()) -> list[CurriculumStage]:
    cp = config.curriculum
    tr, ts = thresholds(config)
    caps = (cp.line_episodes, cp.corner_episodes, cp.u_episodes, cp.hole_episodes)
    return [
        CurriculumStage(env, TRAINING_NAMES, cap, tr, ts, cp.window, unlock=(env is EnvKind.LINE_WALL))
        for env, cap in zip(ENV_ORDER, caps)
    ]


def flat_schedule(config: Config = Config()) -> list[CurriculumStage]:
    tr, ts = thresholds(config)
    return [CurriculumStage(EnvKind.HOLE, TRAINING_NAMES, 10**9, tr, ts, config.curriculum.window)]


def converged(rewards, stage: CurriculumStage) -> bool:
    """Reward test over the most recent ``stage.window`` episode returns."""
    r = np.asarray(rewards, dtype=float)
    if len(r) < stage.window:
        return False
    last = r[-stage.window :]
    return bool(last.mean() >= stage.theta_r and last.std() <= stage.theta_s)


@dataclass
class TrainingLog:
    records: list[dict] = field(default_factory=list)
    transitions: int = 0
    # (observation, gripper-frame error) pairs seen during training; kept in memory only.
    dataset: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)

    def append(self, rec: dict) -> None:
        if self.records and rec["episode"] <= self.records[-1]["episode"]:
            raise ValueError("episode indices must increase")
        self.transitions += rec["steps"]
        rec["transitions_total"] = self.transitions
        self.records.append(rec)

    def rewards(self, stage_index: int | None = None) -> list[float]:
        return [r["reward"] for r in self.records if stage_index is None or r["stage"] == stage_index]

    def to_lines(self):
        for rec in self.records:
            yield json.dumps(rec, sort_keys=True)

    def write(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("".join(line + "\n" for line in self.to_lines()))
        os.replace(tmp, path)

    @classmethod
    def read(cls, path) -> "TrainingLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                rec.pop("transitions_total", None)
                log.append(rec)
        return log

    def dataset_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.dataset:
            return np.zeros((0, 0)), np.zeros((0, 3))
        return np.array([d[0] for d in self.dataset]), np.array([d[1] for d in self.dataset])


def train_stages(
    agent: TD3Agent,
    schedule: list[CurriculumStage],
    rng: np.random.Generator,
    budget: int | None = None,
    run_to_budget: bool = True,
    keep_dataset: bool = False,
    fresh_buffer: bool | None = None,
) -> tuple[TD3Agent, TrainingLog]:
    """Run the stages in order with one TD3 update per transition.

    With ``run_to_budget`` the last stage ignores its episode cap and its
    convergence exit, and keeps going until the budget is spent exactly.
    """
    cfg = agent.config
    budget = cfg.curriculum.transition_cap if budget is None else budget
    order = [ENV_ORDER.index(s.env) for s in schedule]
    if order != sorted(order):
        raise ValueError("stages must follow LineWall -> CornerWall -> UWall -> Hole")
    buffer = ReplayBuffer(agent.obs_dim, cfg.agent.buffer_capacity)
    objects: dict[str, ObjectSpec] = {}
    log = TrainingLog()
    episode = 0
    offset = None
    span = train_range(cfg)

    def on_transition(tr):
        buffer.add(tr)
        td3_update(agent, buffer)
        if keep_dataset:
            log.dataset.append((tr.obs, tr.true_error.in_gripper_frame()))
        on_transition.count += 1
        return on_transition.count < budget

    on_transition.count = 0

    def policy(obs):
        return td3_select_action(agent, obs, explore=True)

    if fresh_buffer is None:
        fresh_buffer = cfg.curriculum.fresh_buffer
    for si, stage in enumerate(schedule):
        # The critic never sees which walls are present, so transitions from
        # an earlier constraint set would contradict the current one.
        if fresh_buffer and si > 0:
            buffer.clear()
        last = si == len(schedule) - 1
        open_ended = last and run_to_budget
        unlocked = 1 if stage.unlock else len(stage.objects)
        window: list[float] = []
        stage_episodes = 0
        while on_transition.count < budget and (open_ended or stage_episodes < stage.max_episodes):
            if episode % cfg.sim.regrasp_every == 0:
                offset = rng.uniform(-cfg.sim.regrasp_offset, cfg.sim.regrasp_offset, 2)
            name = stage.objects[int(rng.integers(unlocked))]
            obj = objects.setdefault(name, make_object(name, cfg.objects, cfg.geometry.n_samples))
            env = make_environment(stage.env, obj, cfg)
            # Starts that already fit carry no learning signal and are redrawn.
            while True:
                ep = run_episode(
                    policy, env, obj, agent.representation, rng, error_range=span, config=cfg,
                    grasp_offset=offset, on_transition=on_transition, keep_obs=False,
                )
                if ep.steps:
                    break
            agent.episodes_seen += 1
            stage_episodes += 1
            e0 = ep.initial_error
            log.append(
                {
                    "episode": episode,
                    "stage": si,
                    "env": stage.env.value,
                    "object": name,
                    "reward": ep.total_reward,
                    "outcome": ep.outcome.value,
                    "attempts": ep.attempts,
                    "steps": ep.steps,
                    "truncated": not ep.transitions[-1].done,
                    "initial_error": [e0.ex, e0.ey, e0.etheta],
                    "unlocked": unlocked,
                }
            )
            episode += 1
            window.append(ep.total_reward)
            if open_ended or not converged(window, stage):
                continue
            if stage.unlock and unlocked < len(stage.objects):
                unlocked += 1
                window = []
                continue
            break
    return agent, log


def run_curriculum(
    agent: TD3Agent,
    schedule: list[CurriculumStage] | None = None,
    rng: np.random.Generator | None = None,
    budget: int | None = None,
    keep_dataset: bool = False,
) -> tuple[TD3Agent, TrainingLog]:
    rng = rng if rng is not None else np.random.default_rng(0)
    schedule = schedule if schedule is not None else default_schedule(agent.config)
    return train_stages(agent, schedule, rng, budget, keep_dataset=keep_dataset)


def run_flat(
    agent: TD3Agent,
    rng: np.random.Generator | None = None,
    budget: int | None = None,
    keep_dataset: bool = False,
) -> tuple[TD3Agent, TrainingLog]:
    """Hole-only training on all four training objects, same budget."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return train_stages(agent, flat_schedule(agent.config), rng, budget, keep_dataset=keep_dataset)


def constraint_count(env) -> int:
    return len(ACTIVE_SIDES[EnvKind(env)])


def sample_objects(stage: CurriculumStage, rng: np.random.Generator, n: int, unlocked: int | None = None) -> list[str]:
    """Draw objects exactly as the trainer does (uniform over the unlocked prefix)."""
    k = len(stage.objects) if unlocked is None else unlocked
    return [stage.objects[int(rng.integers(k))] for _ in range(n)]


def initial_error_of(rec: dict) -> PoseError:
    return PoseError(*rec["initial_error"])
