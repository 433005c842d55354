"""Command-line entry point: ``tactile-insertion {train,eval,report,replay}``.

Every output file is written to a temporary sibling and renamed into place,
so an interrupted or failing command never replaces earlier results.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .agents import CheckpointError, load_agent, save_agent
from .config import CONFIG_ENV_VAR, ConfigError, load_config
from .evaluation import EvalConfig, EvalError, Metrics, build_report, emit_report, evaluate, format_table
from .geometry import EnvKind, GeometryError
from .objects import NOVEL_NAMES, TRAINING_NAMES, objects_for
from .pipelines import POLICIES, train_policy


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _lines(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def cmd_train(args) -> int:
    config = load_config(args.config)
    out = Path(args.out or f"runs/{args.policy}-seed{args.seed}")
    agent, log = train_policy(args.policy, config, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "training_log.jsonl", _lines(log.records))
    write_atomic(out / "config.ini", config.to_ini())
    # Checkpoint goes last: its presence marks a complete run.
    save_agent(agent, out / "checkpoint.json")
    print(f"{args.policy}: {len(log.records)} episodes, {log.transitions} transitions -> {out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    agent = load_agent(ckpt)
    config = agent.config
    ec = EvalConfig.from_config(config, trials=args.trials, seed=args.seed, env=EnvKind(args.env))
    objs = objects_for(args.objects, config.objects, config.geometry.n_samples)
    out = Path(args.out) if args.out else ckpt.parent
    metrics: list[Metrics] = []
    episode_lines = []
    for obj in objs:
        logs = []
        m = evaluate(agent, obj, ec, config, policy_name=agent.policy_name, episode_logs=logs, keep_obs=not args.no_obs)
        metrics.append(m)
        for i, ep in enumerate(logs):
            episode_lines.extend(ep.to_lines(i, {"object": obj.name, "policy": agent.policy_name}))
        rate = f"{100 * m.success_rate:.1f}%"
        att = "-" if m.mean_attempts_on_success is None else f"{m.mean_attempts_on_success:.2f}"
        print(f"{agent.policy_name:8s} {obj.name:14s} success {rate:>6s}  attempts {att}")
    stem = f"{agent.policy_name}.{args.objects}"
    write_atomic(out / f"{stem}.episodes.jsonl", "".join(line + "\n" for line in episode_lines))
    write_atomic(out / f"{stem}.metrics.jsonl", _lines(m.to_dict() for m in metrics))
    return 0


def read_metrics(directory: Path) -> list[Metrics]:
    files = sorted(directory.glob("*.metrics.jsonl"))
    out = []
    for f in files:
        for line in f.read_text().splitlines():
            if line.strip():
                out.append(Metrics.from_dict(json.loads(line)))
    return out


def cmd_report(args) -> int:
    src = Path(args.inp)
    if not src.is_dir():
        raise CliError(f"input directory not found: {src}")
    metrics = read_metrics(src)
    present = {m.policy for m in metrics}
    report = build_report(
        metrics,
        [p for p in POLICIES if p in present],
        [o for o in TRAINING_NAMES + NOVEL_NAMES if any(m.object == o for m in metrics)],
    )
    out = Path(args.out) if args.out else src
    text = format_table(report)
    write_atomic(out / "report.json", emit_report(report) + "\n")
    write_atomic(out / "report.txt", text)
    sys.stdout.write(text)
    return 0


def _fmt(v) -> str:
    return "[" + ", ".join(f"{x:+.3f}" for x in v) + "]"


def cmd_replay(args) -> int:
    path = Path(args.log)
    if not path.is_file():
        raise CliError(f"log not found: {path}")
    recs = []
    for line in path.read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            if rec.get("episode") == args.episode and (args.object is None or rec.get("object") == args.object):
                recs.append(rec)
    if not recs:
        raise CliError(f"episode {args.episode} not found in {path}")
    objects = sorted({r.get("object") for r in recs}, key=str)
    if len(objects) > 1:
        raise CliError(f"episode {args.episode} exists for several objects ({', '.join(objects)}); pass --object")
    print(f"episode {args.episode}  object {objects[0]}  policy {recs[0].get('policy')}")
    for r in recs:
        contacts = r["contacts"]
        depths = ", ".join(f"{c['depth']:.3f}" for c in contacts)
        print(f"attempt {r['attempt']:2d}  error {_fmt(r['error'])}  fits {str(r['fits']).lower()}  contacts {len(contacts)} [{depths}]")
        if r.get("obs") is not None:
            obs = np.asarray(r["obs"])
            if args.full_obs:
                print("  obs " + " ".join(f"{x:.4f}" for x in obs))
            else:
                print(f"  obs dim {obs.size}  norm {np.linalg.norm(obs):.3f}  max|x| {np.abs(obs).max():.3f}")
        if r.get("reward") is not None:
            print(f"  reward {r['reward']:+.3f}")
        if r.get("action") is not None:
            print(f"  action {_fmt(r['action'])}")
        print(f"  outcome {r['outcome']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tactile-insertion", description="Tactile insertion training and evaluation suite.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one policy")
    t.add_argument("--config", help=f"INI config file (default: ${CONFIG_ENV_VAR} or built-in defaults)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--policy", choices=POLICIES, required=True)
    t.add_argument("--out", help="output directory (default runs/<policy>-seed<seed>)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--objects", default="all", help="train, novel, all or an object name")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--env", default="hole", choices=[k.value for k in EnvKind])
    e.add_argument("--out", help="output directory (default: next to the checkpoint)")
    e.add_argument("--no-obs", action="store_true", help="omit observations from the episode log")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="tabulate metrics files")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    y = sub.add_parser("replay", help="print one evaluation episode step by step")
    y.add_argument("--log", required=True)
    y.add_argument("--episode", type=int, required=True)
    y.add_argument("--object")
    y.add_argument("--full-obs", action="store_true")
    y.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, CheckpointError, EvalError, GeometryError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"tactile-insertion: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
