"""TD3 insertion agent with a privileged critic, plus the supervised baseline.

The actor maps sensor observations to a gripper-frame correction. The twin
critics score (true error, action) pairs; the true error is only available
while training, which is why it never reaches the actor.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .geometry import EnvKind, PoseError
from .nn import AdamState, Mlp, adam_step, soft_update
from .objects import ObjectSpec
from .sensors import Representation, observation_dim
from .sim import Transition, clamp_action, make_environment, reset, step, train_range

AGENT_FORMAT = "tactile_insertion.agent"
AGENT_VERSION = 1


class CheckpointError(ValueError):
    pass


def action_bounds(config: Config) -> np.ndarray:
    return np.array([config.sim.max_step_xy, config.sim.max_step_xy, config.sim.max_step_theta])


def error_scale(config: Config) -> np.ndarray:
    return np.array([config.sim.train_xy, config.sim.train_xy, config.sim.train_theta])


def regression_target(true_error: PoseError, config: Config) -> np.ndarray:
    """Clamped correction that cancels the error, in the gripper frame."""
    return clamp_action(-true_error.in_gripper_frame(), config)


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, obs_dim: int, capacity: int = 100_000):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.action = np.zeros((self.capacity, 3))
        self.reward = np.zeros(self.capacity)
        self.done = np.zeros(self.capacity)
        self.err = np.zeros((self.capacity, 3))
        self.next_err = np.zeros((self.capacity, 3))
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> None:
        i = self._pos
        self.obs[i] = tr.obs
        self.next_obs[i] = tr.next_obs
        self.action[i] = tr.action
        self.reward[i] = tr.reward
        self.done[i] = float(tr.done)
        self.err[i] = tr.true_error.in_gripper_frame()
        self.next_err[i] = tr.next_true_error.in_gripper_frame()
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def clear(self) -> None:
        self.size = 0
        self._pos = 0

    def sample_indices(self, rng: np.random.Generator, batch_size: int) -> np.ndarray:
        return rng.integers(0, self.size, batch_size)

    def batch(self, idx: np.ndarray) -> dict:
        return {
            "obs": self.obs[idx],
            "next_obs": self.next_obs[idx],
            "action": self.action[idx],
            "reward": self.reward[idx],
            "done": self.done[idx],
            "err": self.err[idx],
            "next_err": self.next_err[idx],
        }


@dataclass
class UpdateInfo:
    critic1_loss: float
    critic2_loss: float
    actor_loss: float | None
    target: np.ndarray
    target_q1: np.ndarray
    target_q2: np.ndarray


class TD3Agent:
    """Actor, twin privileged critics, their targets and optimiser state."""

    kind = "td3"

    def __init__(self, representation, config: Config = Config(), seed: int = 0, policy_name: str = "rl-star"):
        self.representation = Representation(representation)
        self.config = config
        self.policy_name = policy_name
        ap = config.agent
        self.obs_dim = observation_dim(self.representation, config.sensors)
        self.rng = np.random.default_rng(seed)
        hidden = ap.wrench_actor_hidden if self.representation is Representation.WRENCH else ap.actor_hidden
        self.bounds = action_bounds(config)
        self.actor = Mlp((self.obs_dim, hidden, hidden, 3), "tanh", self.bounds, self.rng)
        self.critic1 = Mlp((6, ap.critic_hidden, ap.critic_hidden, 1), rng=self.rng, final_scale=1.0)
        self.critic2 = Mlp((6, ap.critic_hidden, ap.critic_hidden, 1), rng=self.rng, final_scale=1.0)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = AdamState.for_params(self.actor.params, ap.lr_actor)
        self.critic1_opt = AdamState.for_params(self.critic1.params, ap.lr_critic)
        self.critic2_opt = AdamState.for_params(self.critic2.params, ap.lr_critic)
        self.actor_frozen_until = ap.freeze_episodes
        self.episodes_seen = 0
        self.updates = 0
        self.actor_updates = 0

    @property
    def actor_frozen(self) -> bool:
        return self.episodes_seen < self.actor_frozen_until

    def _critic_input(self, err: np.ndarray, action: np.ndarray) -> np.ndarray:
        return np.concatenate([err / error_scale(self.config), action / self.bounds], axis=-1)

    def __call__(self, obs) -> np.ndarray:
        return td3_select_action(self, obs, explore=False)

    def networks(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "actor_target": self.actor_target,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }

    def to_dict(self) -> dict:
        return {
            "format": AGENT_FORMAT,
            "version": AGENT_VERSION,
            "kind": self.kind,
            "policy": self.policy_name,
            "representation": self.representation.value,
            "obs_dim": self.obs_dim,
            "config": self.config.to_dict(),
            "networks": {k: v.to_dict() for k, v in self.networks().items()},
            "optimizers": {
                "actor": self.actor_opt.to_dict(),
                "critic1": self.critic1_opt.to_dict(),
                "critic2": self.critic2_opt.to_dict(),
            },
            "rng": self.rng.bit_generator.state,
            "counters": {
                "episodes_seen": self.episodes_seen,
                "updates": self.updates,
                "actor_updates": self.actor_updates,
                "actor_frozen_until": self.actor_frozen_until,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TD3Agent":
        config = Config.from_dict(d["config"])
        agent = cls(d["representation"], config, 0, d.get("policy", "rl-star"))
        for name, net in agent.networks().items():
            loaded = Mlp.from_dict(d["networks"][name])
            if loaded.architecture() != net.architecture():
                raise CheckpointError(f"network {name} does not match the configured architecture")
            net.params[:] = loaded.params
        agent.actor_opt = AdamState.from_dict(d["optimizers"]["actor"])
        agent.critic1_opt = AdamState.from_dict(d["optimizers"]["critic1"])
        agent.critic2_opt = AdamState.from_dict(d["optimizers"]["critic2"])
        agent.rng.bit_generator.state = d["rng"]
        c = d["counters"]
        agent.episodes_seen = c["episodes_seen"]
        agent.updates = c["updates"]
        agent.actor_updates = c["actor_updates"]
        agent.actor_frozen_until = c["actor_frozen_until"]
        return agent


def td3_select_action(agent: TD3Agent, obs, explore: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (agent.obs_dim,):
        raise ValueError(f"observation has shape {obs.shape}, actor expects ({agent.obs_dim},)")
    a = agent.actor.forward(obs)
    if explore:
        rng = rng or agent.rng
        a = a + rng.normal(0.0, agent.config.agent.exploration_noise, 3)
    return np.clip(a, -agent.bounds, agent.bounds)


def td3_update(
    agent: TD3Agent,
    buffer: ReplayBuffer,
    batch_size: int | None = None,
    update_index: int | None = None,
    indices: np.ndarray | None = None,
) -> UpdateInfo | None:
    """One clipped double-Q critic step, with a delayed actor step.

    Returns ``None`` (and changes nothing) while the buffer holds fewer
    than ``batch_size`` transitions.
    """
    ap = agent.config.agent
    batch_size = batch_size or ap.batch_size
    if len(buffer) < batch_size:
        return None
    if update_index is None:
        update_index = agent.updates + 1
    agent.updates = update_index
    rng = agent.rng
    idx = indices if indices is not None else buffer.sample_indices(rng, batch_size)
    b = buffer.batch(idx)
    n = len(idx)

    noise = rng.normal(0.0, ap.target_noise, (n, 3))
    noise = np.clip(noise, -ap.target_noise_clip, ap.target_noise_clip) * agent.bounds
    next_a = np.clip(agent.actor_target.forward(b["next_obs"]) + noise, -agent.bounds, agent.bounds)
    next_in = agent._critic_input(b["next_err"], next_a)
    q1_t = agent.critic1_target.forward(next_in)[:, 0]
    q2_t = agent.critic2_target.forward(next_in)[:, 0]
    not_done = 1.0 - b["done"]
    y = b["reward"] + ap.gamma * not_done * np.minimum(q1_t, q2_t)

    cur_in = agent._critic_input(b["err"], b["action"])
    losses = []
    for critic, opt in ((agent.critic1, agent.critic1_opt), (agent.critic2, agent.critic2_opt)):
        q, cache = critic.forward_cache(cur_in)
        diff = q[:, 0] - y
        losses.append(float(np.mean(diff * diff)))
        grad, _ = critic.backward_cache(cache, (2.0 / n) * diff[:, None])
        adam_step(critic.params, grad, opt)

    actor_loss = None
    if update_index % ap.policy_delay == 0:
        if not agent.actor_frozen:
            a, a_cache = agent.actor.forward_cache(b["obs"])
            q, c_cache = agent.critic1.forward_cache(agent._critic_input(b["err"], a))
            actor_loss = float(-q.mean())
            _, dq_din = agent.critic1.backward_cache(c_cache, np.full((n, 1), -1.0 / n))
            dq_da = dq_din[:, 3:] / agent.bounds
            grad, _ = agent.actor.backward_cache(a_cache, dq_da)
            adam_step(agent.actor.params, grad, agent.actor_opt)
            agent.actor_updates += 1
            soft_update(agent.actor_target, agent.actor, ap.tau)
        soft_update(agent.critic1_target, agent.critic1, ap.tau)
        soft_update(agent.critic2_target, agent.critic2, ap.tau)
    return UpdateInfo(losses[0], losses[1], actor_loss, y, q1_t, q2_t)


def collect_random_transitions(
    obj: ObjectSpec,
    representation,
    rng: np.random.Generator,
    n: int,
    config: Config = Config(),
    env_kind=EnvKind.LINE_WALL,
) -> list[Transition]:
    """Exactly ``n`` transitions under uniformly random corrections."""
    env = make_environment(env_kind, obj, config)
    bounds = action_bounds(config)
    out: list[Transition] = []
    episode = 0
    offset = None
    while len(out) < n:
        if episode % config.sim.regrasp_every == 0:
            offset = rng.uniform(-config.sim.regrasp_offset, config.sim.regrasp_offset, 2)
        episode += 1
        state, obs = reset(env, obj, representation, rng, train_range(config), config, grasp_offset=offset)
        while not state.done and len(out) < n:
            a = rng.uniform(-bounds, bounds)
            next_obs, r, new_state = step(state, a)
            out.append(Transition(obs, a, r, next_obs, new_state.done, state.true_error, new_state.true_error))
            state, obs = new_state, next_obs
    return out


def _regress(net: Mlp, x: np.ndarray, y: np.ndarray, rng, epochs, lr, batch, stop_mse=None, val=None):
    """Minibatch Adam on mean squared error; returns the best-validation parameters if ``val`` given."""
    opt = AdamState.for_params(net.params, lr)
    n = len(x)
    best = (np.inf, net.params.copy())
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch):
            idx = order[s : s + batch]
            out, cache = net.forward_cache(x[idx])
            g = 2.0 * (out - y[idx]) / out.size
            grad, _ = net.backward_cache(cache, g)
            adam_step(net.params, grad, opt)
        mse = float(np.mean((net.forward(x) - y) ** 2))
        history.append(mse)
        if val is not None:
            vmse = float(np.mean((net.forward(val[0]) - val[1]) ** 2))
            if vmse < best[0]:
                best = (vmse, net.params.copy())
        if stop_mse is not None and mse < stop_mse:
            break
    if val is not None:
        net.params[:] = best[1]
    return history


def bootstrap_actor(
    agent: TD3Agent,
    obj: ObjectSpec,
    rng: np.random.Generator,
    n: int | None = None,
    env_kind=EnvKind.LINE_WALL,
) -> list[Transition]:
    """Warm-start the actor by regression toward the error-cancelling correction.

    Critics are left untouched. Returns the collected dataset.
    """
    cfg = agent.config
    ap = cfg.agent
    n = ap.bootstrap_n if n is None else n
    data = collect_random_transitions(obj, agent.representation, rng, n, cfg, env_kind)
    x = np.array([t.obs for t in data])
    y = np.array([regression_target(t.true_error, cfg) for t in data])
    _regress(agent.actor, x, y, rng, ap.bootstrap_epochs, ap.bootstrap_lr, ap.bootstrap_batch, stop_mse=ap.bootstrap_mse)
    agent.actor_target.params[:] = agent.actor.params
    return data


class SLAgent:
    """Regressor of the gripper-frame error; acts with the opposite correction."""

    kind = "sl"

    def __init__(self, representation, config: Config = Config(), seed: int = 0, policy_name: str = "sl"):
        self.representation = Representation(representation)
        self.config = config
        self.policy_name = policy_name
        self.obs_dim = observation_dim(self.representation, config.sensors)
        h = config.agent.actor_hidden
        self.rng = np.random.default_rng(seed)
        self.regressor = Mlp((self.obs_dim, h, h, 3), rng=self.rng)

    @property
    def label_scale(self) -> np.ndarray:
        return np.array([1.0, 1.0, self.config.geometry.rotation_weight])

    def estimate(self, obs) -> np.ndarray:
        """Estimated (ex, ey, etheta) in the gripper frame."""
        return self.regressor.forward(obs) / self.label_scale

    def __call__(self, obs) -> np.ndarray:
        return sl_act(self, obs)

    def to_dict(self) -> dict:
        return {
            "format": AGENT_FORMAT,
            "version": AGENT_VERSION,
            "kind": self.kind,
            "policy": self.policy_name,
            "representation": self.representation.value,
            "obs_dim": self.obs_dim,
            "config": self.config.to_dict(),
            "networks": {"regressor": self.regressor.to_dict()},
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SLAgent":
        agent = cls(d["representation"], Config.from_dict(d["config"]), 0, d.get("policy", "sl"))
        net = Mlp.from_dict(d["networks"]["regressor"])
        if net.architecture() != agent.regressor.architecture():
            raise CheckpointError("regressor does not match the configured architecture")
        agent.regressor.params[:] = net.params
        agent.rng.bit_generator.state = d["rng"]
        return agent


def sl_fit(
    obs: np.ndarray,
    errors: np.ndarray,
    representation=Representation.FLOW,
    config: Config = Config(),
    seed: int = 0,
    epochs: int | None = None,
) -> SLAgent:
    """Fit the error regressor by MSE; ``errors`` are gripper-frame (ex, ey, etheta)."""
    obs = np.asarray(obs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(obs) == 0:
        raise ValueError("empty SL dataset")
    agent = SLAgent(representation, config, seed)
    ap = config.agent
    y = errors * agent.label_scale
    order = agent.rng.permutation(len(obs))
    n_val = max(1, len(obs) // 10) if len(obs) >= 20 else 0
    val = (obs[order[:n_val]], y[order[:n_val]]) if n_val else None
    train = order[n_val:]
    _regress(agent.regressor, obs[train], y[train], agent.rng, epochs or ap.sl_epochs, ap.sl_lr, ap.sl_batch, val=val)
    return agent


def sl_act(agent: SLAgent, obs) -> np.ndarray:
    return clamp_action(-agent.estimate(obs), agent.config)


def save_agent(agent, path) -> None:
    """Write a checkpoint atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(agent.to_dict(), sort_keys=True))
    os.replace(tmp, path)


def load_agent(path):
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if d.get("format") != AGENT_FORMAT:
        raise CheckpointError(f"{path} is not an agent checkpoint")
    if d.get("version") != AGENT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {d.get('version')}")
    if d["kind"] == "td3":
        return TD3Agent.from_dict(d)
    if d["kind"] == "sl":
        return SLAgent.from_dict(d)
    raise CheckpointError(f"unknown agent kind {d['kind']!r}")
