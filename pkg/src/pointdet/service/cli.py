"""Command-line entry points: generate / train / eval / infer / serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..data import GeneratorConfig, export_annotations, generate_dataset, ingest_annotations
from ..metrics import evaluate_setting, format_report, save_report
from ..model import ModelConfig, PointPromptedDetector
from ..train import TrainConfig, train
from .runconfig import ConfigError, RunConfig, load_run_config
from .server import ServiceState, handle_infer, serve_forever

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    p = _Parser(prog="pointdet",
                description="Point-prompted small-object detection toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="run-configuration JSON file")
        sp.add_argument("--seed", type=int, help="override the config seed")

    g = sub.add_parser("generate", help="render a synthetic dataset to disk")
    common(g)
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--count", type=int, help="number of scenes (overrides config)")

    t = sub.add_parser("train", help="train a detector on a dataset directory")
    common(t)
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", help="run directory for checkpoints and logs")

    e = sub.add_parser("eval", help="evaluate a checkpoint under one setting")
    common(e)
    e.add_argument("--setting", type=int, choices=(1, 2, 3, 4), required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--score-threshold", type=float)
    e.add_argument("--out", help="report JSON path")

    i = sub.add_parser("infer", help="run prompted detection on one image")
    common(i)
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--data", required=True, help="dataset directory holding the image")
    i.add_argument("--image-id", required=True)
    i.add_argument("--prompts", required=True,
                   help="semicolon-separated x,y,category triples, e.g. '30,40,0;90,100,1'")
    i.add_argument("--score-threshold", type=float)
    i.add_argument("--out", help="response JSON path (stdout when omitted)")

    s = sub.add_parser("serve", help="run the local inference service")
    common(s)
    s.add_argument("--checkpoint")
    s.add_argument("--data", help="dataset directory to expose via /images")
    s.add_argument("--port", type=int)
    s.add_argument("--host")
    s.add_argument("--static-dir", help="directory of console assets to serve")
    return p


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    print("effective configuration:")
    print(cfg.dumps())
    return cfg


def _parse_prompts(text: str):
    prompts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise ValueError(f"bad prompt triple {chunk!r}; expected x,y,category")
        prompts.append({"x": float(parts[0]), "y": float(parts[1]),
                        "category": int(parts[2])})
    if not prompts:
        raise ValueError("no prompts given")
    return prompts


def _cmd_generate(args) -> int:
    cfg = _load_config(args)
    g = cfg.generator
    n = args.count if args.count is not None else g.n_scenes
    gen = GeneratorConfig(n_categories=g.n_categories, count_range=g.count_range,
                          size_range=g.size_range, image_size=g.image_size,
                          clutter=g.clutter, iou_cap=g.iou_cap,
                          max_attempts=g.max_attempts)
    scenes = generate_dataset(gen, n, seed=cfg.seed, prefix=g.prefix)
    out = export_annotations(scenes, args.out)
    print(f"wrote {n} scenes to {out.parent}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    scenes = ingest_annotations(Path(args.data))
    model = PointPromptedDetector(cfg.model)
    tc = cfg.training
    if args.out:
        tc.out_dir = args.out
    tc.seed = cfg.seed
    result = train(model, scenes, tc, log_every=100)
    print(f"final checkpoint: {result.final_checkpoint}")
    print(f"metrics log: {result.log_path}")
    print(f"epoch losses: {[round(v, 4) for v in result.epoch_losses]}")
    return 0


def _load_model(cfg: RunConfig, checkpoint: str) -> PointPromptedDetector:
    model = PointPromptedDetector(cfg.model)
    model.load(checkpoint)
    return model


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    scenes = ingest_annotations(Path(args.data))
    model = _load_model(cfg, args.checkpoint)
    thr = args.score_threshold if args.score_threshold is not None \
        else cfg.evaluation.score_threshold
    report = evaluate_setting(model, scenes, f"S{args.setting}",
                              seed=cfg.evaluation.seed, score_threshold=thr,
                              jitter=cfg.evaluation.jitter)
    print(format_report(report))
    if args.out:
        save_report(report, args.out)
        print(f"report written to {args.out}")
    return 0


def _cmd_infer(args) -> int:
    cfg = _load_config(args)
    model = _load_model(cfg, args.checkpoint)
    state = ServiceState.from_paths(model, image_dir=args.data,
                                    max_upload_bytes=cfg.service.max_upload_bytes)
    request = {"image_id": args.image_id, "prompts": _parse_prompts(args.prompts)}
    if args.score_threshold is not None:
        request["score_threshold"] = args.score_threshold
    response = handle_infer(request, state)
    text = json.dumps(response, indent=1)
    if args.out:
        Path(args.out).write_text(text)
        print(f"response written to {args.out}")
    else:
        print(text)
    return 0


def _cmd_serve(args) -> int:
    cfg = _load_config(args)
    checkpoint = args.checkpoint or cfg.service.checkpoint
    model = _load_model(cfg, checkpoint) if checkpoint else None
    image_dir = args.data or cfg.service.image_dir or None
    state = ServiceState.from_paths(model, image_dir=image_dir,
                                    max_upload_bytes=cfg.service.max_upload_bytes)
    serve_forever(state,
                  host=args.host or cfg.service.host,
                  port=args.port if args.port is not None else cfg.service.port,
                  static_dir=args.static_dir)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
