"""End-to-end training recipes for the five compared policies.

rl-star   flow observations, bootstrap then curriculum
rl-flat   flow observations, same bootstrap, hole only
rl-rgb    RGB-proxy observations, bootstrap then curriculum
rl-ft     force/torque observations, bootstrap, hole only
sl        error regressor fitted to the observations seen while training rl-star

A given seed produces the same bootstrap for rl-star and rl-flat, so the
ablation differs only in what happens after it.
"""
from __future__ import annotations

import numpy as np

from .agents import SLAgent, TD3Agent, bootstrap_actor, sl_fit
from .config import Config
from .curriculum import TrainingLog, run_curriculum, run_flat
from .objects import make_object
from .sensors import Representation

POLICIES = ("rl-star", "rl-flat", "rl-rgb", "rl-ft", "sl")

_REPRESENTATION = {
    "rl-star": Representation.FLOW,
    "rl-flat": Representation.FLOW,
    "rl-rgb": Representation.RGB,
    "rl-ft": Representation.WRENCH,
    "sl": Representation.FLOW,
}
_CURRICULUM = {"rl-star", "rl-rgb", "sl"}


def representation_of(policy: str) -> Representation:
    if policy not in _REPRESENTATION:
        raise KeyError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    return _REPRESENTATION[policy]


def training_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1]))


def bootstrapped_agent(policy: str, config: Config, seed: int) -> tuple[TD3Agent, np.random.Generator]:
    rep = representation_of(policy)
    agent = TD3Agent(rep, config, seed, policy_name=policy)
    rng = training_rng(seed)
    bootstrap_actor(agent, make_object("cylinder", config.objects, config.geometry.n_samples), rng)
    return agent, rng


def train_td3(policy: str, config: Config = Config(), seed: int = 0, keep_dataset: bool = False):
    agent, rng = bootstrapped_agent(policy, config, seed)
    if policy in _CURRICULUM:
        return run_curriculum(agent, rng=rng, keep_dataset=keep_dataset)
    return run_flat(agent, rng=rng, keep_dataset=keep_dataset)


def train_sl(config: Config = Config(), seed: int = 0, source: TrainingLog | None = None):
    """Fit the SL baseline on rl-star's training observations.

    ``source`` must carry its dataset; without it rl-star is trained first
    with the same seed.
    """
    if source is None or not source.dataset:
        _, source = train_td3("rl-star", config, seed, keep_dataset=True)
    obs, err = source.dataset_arrays()
    agent = sl_fit(obs, err, Representation.FLOW, config, seed)
    return agent, source


def train_policy(policy: str, config: Config = Config(), seed: int = 0) -> tuple[TD3Agent | SLAgent, TrainingLog]:
    representation_of(policy)
    if policy == "sl":
        return train_sl(config, seed)
    return train_td3(policy, config, seed)
