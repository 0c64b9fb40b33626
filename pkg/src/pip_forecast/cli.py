"""Command-line entry points: train, eval, report, serve, synth."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import evaluation, scenes
from .checkpoint import load_checkpoint
from .training import TrainConfig, train


def _load_samples(path: str) -> list:
    return scenes.read_scenes(path)


def _split_filter(samples, split: str, split_seed: int):
    if split == "all":
        return samples
    return [s for s in samples
            if scenes.split_of(s.recording_id, s.ego_id, split_seed) == split]


def cmd_train(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)

    scene_path = raw.pop("scenes", None)
    synthetic_n = raw.pop("synthetic_n", None)
    synthetic_seed = raw.pop("synthetic_seed", 0)
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(raw) - known
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)} (known: {sorted(known)})")
    cfg = TrainConfig(**raw)

    if scene_path:
        samples = _split_filter(_load_samples(scene_path), "train", cfg.split_seed) \
            if raw.get("dataset") else _load_samples(scene_path)
    elif synthetic_n:
        from .synthetic import generate_yield_benchmark
        samples, _ = generate_yield_benchmark(synthetic_n, seed=synthetic_seed)
    else:
        raise SystemExit("config needs either 'scenes' (path) or 'synthetic_n'")

    result = train(cfg, samples)
    print(f"trained {len(result.loss_curve)} steps; "
          f"final loss {result.loss_curve[-1]:.4f}")
    if result.checkpoint_path:
        print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    model, manifest = load_checkpoint(args.ckpt)
    samples = _split_filter(_load_samples(args.scenes), args.split,
                            args.split_seed if args.split_seed is not None
                            else manifest.get("split_seed", 0))
    rep = evaluation.evaluate(model, samples, manifest, plan_source=args.plan_source)
    payload = rep.as_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report written to {args.report}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    models = {}
    for spec in args.ckpt:
        name, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--ckpt must look like NAME=PATH, got {spec!r}")
        models[name] = load_checkpoint(path)
    samples = _split_filter(_load_samples(args.scenes), args.split, args.split_seed)
    rep = evaluation.report(models, samples, plan_source=args.plan_source)
    print(rep["text"])
    if args.out:
        evaluation.write_report(rep, args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    ckpt = args.ckpt or os.environ.get("PIP_FORECAST_CKPT")
    port = args.port if args.port is not None else int(os.environ.get("PIP_FORECAST_PORT", 8000))
    app = create_app(ckpt, args.scenes, lane_width=args.lane_width, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=port)
    return 0


def cmd_synth(args) -> int:
    from .synthetic import generate_yield_benchmark
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_samples, _ = generate_yield_benchmark(args.n, seed=args.seed)
    eval_samples, _ = generate_yield_benchmark(args.eval_n, seed=args.seed + 1,
                                               recording_prefix="yield-eval")
    scenes.write_scenes(train_samples, out / "train_scenes.jsonl")
    scenes.write_scenes(eval_samples, out / "eval_scenes.jsonl")
    scenes.write_manifest(train_samples + eval_samples, out / "manifest.jsonl")
    print(f"wrote {len(train_samples)} train / {len(eval_samples)} eval scenes to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pip-forecast",
                                     description="planning-conditioned trajectory forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a flat JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate RMSE/NLL per horizon")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--split", default="test", choices=["train", "test", "eval", "all"])
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--plan-source", default="spline", choices=["spline", "truth"])
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="ablation comparison table")
    p.add_argument("--ckpt", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--scenes", required=True)
    p.add_argument("--split", default="all", choices=["train", "test", "eval", "all"])
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--plan-source", default="spline", choices=["spline", "truth"])
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="run the what-if HTTP service")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--scenes", required=True)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--lane-width", type=float, default=3.7)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("synth", help="generate the synthetic yield benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--eval-n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
