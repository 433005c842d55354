"""Evaluation protocol, metrics and the policy-by-object results table.

Each evaluation episode draws its own generator from
``(seed, object_id, episode)``, so results do not depend on the order in
which episodes run.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import Config
from .geometry import EnvKind
from .objects import ObjectSpec
from .sensors import Representation, observation_dim
from .sim import ErrorRange, EpisodeLog, make_environment, run_episode

REPORT_FORMAT = "tactile_insertion.report"
REPORT_VERSION = 1


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    trials: int = 250
    xy: float = 5.0
    theta: float = 10.0
    seed: int = 0
    env: EnvKind = EnvKind.HOLE

    def __post_init__(self):
        if self.trials < 1:
            raise EvalError("trials must be at least 1")
        if self.xy < 0 or self.theta < 0:
            raise EvalError("error ranges must be non-negative")

    @classmethod
    def from_config(cls, config: Config, **overrides) -> "EvalConfig":
        kw = dict(trials=config.eval.trials, xy=config.sim.eval_xy, theta=config.sim.eval_theta, seed=config.eval.seed)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        ec = cls(**kw)
        if ec.xy > config.sim.emax_xy or ec.theta > config.sim.emax_theta:
            raise EvalError("evaluation error range exceeds the divergence limits")
        return ec

    @property
    def error_range(self) -> ErrorRange:
        return ErrorRange(self.xy, self.theta)


@dataclass
class Metrics:
    policy: str
    object: str
    env: str
    trials: int
    successes: int
    success_rate: float
    mean_attempts_on_success: float | None
    outcomes: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("outcomes")
        return d

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(**d)


def episode_rng(seed: int, object_id: int, episode: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(object_id), int(episode)]))


def aggregate(policy: str, obj_name: str, env: str, logs: list[EpisodeLog]) -> Metrics:
    """Success rate over all episodes; attempts averaged over successes only."""
    outcomes = []
    ok_attempts = []
    for i, ep in enumerate(logs):
        e0 = ep.initial_error
        outcomes.append(
            {
                "episode": i,
                "outcome": ep.outcome.value,
                "attempts": ep.attempts,
                "initial_error": [e0.ex, e0.ey, e0.etheta],
            }
        )
        if ep.outcome.value == "success":
            ok_attempts.append(ep.attempts)
    n = len(logs)
    return Metrics(
        policy=policy,
        object=obj_name,
        env=env,
        trials=n,
        successes=len(ok_attempts),
        success_rate=len(ok_attempts) / n if n else 0.0,
        mean_attempts_on_success=float(np.mean(ok_attempts)) if ok_attempts else None,
        outcomes=outcomes,
    )


def evaluate(
    policy,
    obj: ObjectSpec,
    eval_config: EvalConfig = EvalConfig(),
    config: Config = Config(),
    representation=None,
    policy_name: str | None = None,
    episode_logs: list | None = None,
    keep_obs: bool = True,
) -> Metrics:
    """Run ``eval_config.trials`` noise-free episodes of ``policy`` on ``obj``.

    ``representation`` defaults to the policy's own; a policy whose input
    width does not match the observation width is rejected.
    """
    rep = representation if representation is not None else getattr(policy, "representation", Representation.FLOW)
    rep = Representation(rep)
    want = getattr(policy, "obs_dim", None)
    have = observation_dim(rep, config.sensors)
    if want is not None and want != have:
        raise EvalError(f"policy expects {want}-dim observations, {rep.value} provides {have}")
    env = make_environment(eval_config.env, obj, config)
    logs = []
    for k in range(eval_config.trials):
        rng = episode_rng(eval_config.seed, obj.object_id, k)
        logs.append(
            run_episode(policy, env, obj, rep, rng, error_range=eval_config.error_range, config=config, keep_obs=keep_obs)
        )
    name = policy_name or getattr(policy, "policy_name", type(policy).__name__)
    if episode_logs is not None:
        episode_logs.extend(logs)
    return aggregate(name, obj.name, env.kind.value, logs)


@dataclass(frozen=True)
class ReportCell:
    policy: str
    object: str
    success_rate: float
    mean_attempts_on_success: float | None
    trials: int


@dataclass
class Report:
    policies: list[str] = field(default_factory=list)
    objects: list[str] = field(default_factory=list)
    cells: list[ReportCell] = field(default_factory=list)

    def cell(self, policy: str, obj: str) -> ReportCell | None:
        for c in self.cells:
            if c.policy == policy and c.object == obj:
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "policies": list(self.policies),
            "objects": list(self.objects),
            "cells": [asdict(c) for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("format") != REPORT_FORMAT:
            raise EvalError("not a report document")
        return cls(list(d["policies"]), list(d["objects"]), [ReportCell(**c) for c in d["cells"]])


def build_report(metrics: list[Metrics], policy_order=None, object_order=None) -> Report:
    policies = list(policy_order or [])
    objects = list(object_order or [])
    for m in metrics:
        if m.policy not in policies:
            policies.append(m.policy)
        if m.object not in objects:
            objects.append(m.object)
    cells = [ReportCell(m.policy, m.object, m.success_rate, m.mean_attempts_on_success, m.trials) for m in metrics]
    return Report(policies, objects, cells)


def emit_report(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=1, sort_keys=True)


def parse_report(text: str) -> Report:
    try:
        return Report.from_dict(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise EvalError(f"malformed report: {exc}") from exc


def format_table(report: Report) -> str:
    """Aligned text table: one row per policy, ``success% / attempts`` per object."""
    header = ["policy"] + report.objects
    rows = [header]
    for p in report.policies:
        row = [p]
        for o in report.objects:
            c = report.cell(p, o)
            if c is None:
                row.append("missing")
            elif c.mean_attempts_on_success is None:
                row.append(f"{100 * c.success_rate:.1f}% / -")
            else:
                row.append(f"{100 * c.success_rate:.1f}% / {c.mean_attempts_on_success:.2f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"
