"""Shared fixtures: a lazily filled cache of trained policies and evaluations.

Training is deterministic per (policy, seed), so every test that asks for the
same policy gets the same object, and the acceptance suite trains each
policy at most once per seed.
"""
from __future__ import annotations

import pytest

from tactile_insertion.config import Config
from tactile_insertion.evaluation import EvalConfig, evaluate
from tactile_insertion.objects import make_object
from tactile_insertion.pipelines import train_sl, train_td3

ACCEPTANCE_KEY = pytest.StashKey[list]()


class PolicyCache:
    def __init__(self, config: Config, trials: int = 250, eval_seed: int = 0):
        self.config = config
        self.trials = trials
        self.eval_seed = eval_seed
        self._agents = {}
        self._logs = {}
        self._metrics = {}

    def agent(self, policy: str, seed: int):
        key = (policy, seed)
        if key not in self._agents:
            if policy == "sl":
                star_log = self.log("rl-star", seed)
                agent, _ = train_sl(self.config, seed, source=star_log)
            else:
                # rl-star keeps its observations so the SL baseline can reuse them
                agent, log = train_td3(policy, self.config, seed, keep_dataset=policy == "rl-star")
                self._logs[key] = log
            self._agents[key] = agent
        return self._agents[key]

    def log(self, policy: str, seed: int):
        self.agent(policy, seed)
        return self._logs[(policy, seed)]

    def success(self, policy: str, seed: int, obj: str) -> float:
        """Success rate in percent over ``trials`` evaluation episodes."""
        key = (policy, seed, obj)
        if key not in self._metrics:
            ec = EvalConfig(trials=self.trials, seed=self.eval_seed)
            self._metrics[key] = evaluate(self.agent(policy, seed), make_object(obj, self.config.objects), ec, self.config, keep_obs=False)
        return 100.0 * self._metrics[key].success_rate


@pytest.fixture(scope="session")
def policies():
    return PolicyCache(Config())


@pytest.fixture(scope="session")
def acceptance(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
