"""Command line entry point.

Exit codes: 0 success, 1 usage or invalid arguments, 2 I/O or format error,
3 numeric failure. ``score`` and ``evaluate`` print JSON on stdout; logs go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from alamp.errors import InvalidInput, IOFailure, LampError, NoFeasibleSet, NumericFailure
from alamp.harness import checkpoint
from alamp.harness.manifest import load_manifest
from alamp.harness.pipeline import (
    PipelineConfig,
    build_examples,
    check_compatible,
    evaluate,
    score_image,
    select_patches,
)
from alamp.imaging import load_image, save_png
from alamp.layout import build_attribute_graph, load_detections, sidecar_path, vectorize_graph
from alamp.net.features import ExtractorSpec
from alamp.net.model import ModelConfig
from alamp.net.optim import TrainConfig
from alamp.net.train import train
from alamp.saliency import compute_saliency
from alamp.selector import SOLVERS, SelectorConfig

log = logging.getLogger("alamp")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise IOFailure(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise IOFailure(f"{path}: invalid JSON ({exc})") from exc


def _write_json(path: str, obj) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _pipeline_from_json(d: dict) -> PipelineConfig:
    d = dict(d)
    solver = d.pop("solver", "local_search")
    if "selector" in d:
        return PipelineConfig(SelectorConfig.from_dict(d["selector"]), solver)
    return PipelineConfig(SelectorConfig.from_dict(d), solver)


def cmd_select_patches(args) -> int:
    img = load_image(args.image)
    pipe = _pipeline_from_json(_read_json(args.config)) if args.config else PipelineConfig()
    solver = args.solver or pipe.solver
    chosen = select_patches(img, pipe.selector, solver)
    _write_json(args.out, chosen.to_json(args.image, pipe.selector.window))
    return EXIT_OK


def cmd_build_graph(args) -> int:
    img = load_image(args.image)
    dets = load_detections(args.dets or sidecar_path(args.image))
    g = build_attribute_graph(dets, img.dims)
    _write_json(args.out, {**g.to_json(), "vector": vectorize_graph(g).tolist()})
    return EXIT_OK


def cmd_train(args) -> int:
    entries = load_manifest(args.manifest)
    tcfg = TrainConfig(lr=args.lr, weight_decay=args.weight_decay, momentum=args.momentum,
                       epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    init = None
    if args.stage == "fused" and args.init:
        init, extra = checkpoint.load(args.init)
        pipe = PipelineConfig.from_dict(extra.get("pipeline", {}))
        mcfg = init.config
    else:
        pipe = _pipeline_from_json(_read_json(args.config)) if args.config else PipelineConfig()
        stats = tuple(s.strip() for s in args.stats.split(",") if s.strip())
        mcfg = ModelConfig(ExtractorSpec(args.extractor, args.K, args.input_side),
                           k_stat=args.k_stat, stats=stats, m=pipe.selector.m)
    examples, skipped = build_examples(entries, pipe, mcfg.extractor.input_side, args.skip_errors)
    if skipped:
        log.warning("skipped %d of %d images", skipped, len(entries))
    if args.stage == "both":
        params = train(examples, mcfg, tcfg, "mp_only")
        params = train(examples, None, tcfg, "fused", init=params)
    else:
        params = train(examples, mcfg, tcfg, args.stage, init=init)
    checkpoint.save(params, args.out, extra={"pipeline": pipe.to_dict()})
    log.info("wrote %s (stage %s, %d examples)", args.out, params.stage, len(examples))
    return EXIT_OK


def _load_model(path: str):
    params, extra = checkpoint.load(path)
    pipe = PipelineConfig.from_dict(extra.get("pipeline", {}))
    check_compatible(params, pipe)
    return params, pipe


def cmd_evaluate(args) -> int:
    params, pipe = _load_model(args.checkpoint)
    result = evaluate(params, load_manifest(args.manifest), pipe, skip_errors=args.skip_errors)
    print(json.dumps(result.to_json()))
    return EXIT_OK


def cmd_score(args) -> int:
    params, pipe = _load_model(args.checkpoint)
    if args.dump_saliency:
        save_png(args.dump_saliency, compute_saliency(load_image(args.image)).to_uint8())
    score = score_image(params, args.image, pipe, args.dets)
    print(json.dumps({"score": score}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="alamp", description="Adaptive multi-patch aesthetics pipeline")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("select-patches", help="select patches for one image")
    s.add_argument("--image", required=True)
    s.add_argument("--config", help="JSON selector config")
    s.add_argument("--solver", choices=SOLVERS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select_patches)

    g = sub.add_parser("build-graph", help="attribute graph and layout vector from detections")
    g.add_argument("--image", required=True)
    g.add_argument("--dets", help="detections JSON (default: <image>.dets.json)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_build_graph)

    t = sub.add_parser("train", help="train one stage (or both) on a manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--stage", choices=("mp_only", "fused", "both"), default="both")
    t.add_argument("--init", help="mp_only checkpoint for --stage fused")
    t.add_argument("--config", help="JSON selector config")
    t.add_argument("--epochs", type=int, default=40)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--weight-decay", type=float, default=1e-5)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--extractor", choices=("handcrafted", "tiny_conv"), default="handcrafted")
    t.add_argument("--K", type=int, default=64)
    t.add_argument("--input-side", type=int, default=32)
    t.add_argument("--k-stat", type=int, default=32)
    t.add_argument("--stats", default="max,mean")
    t.add_argument("--skip-errors", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="accuracy and F-measure over a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--skip-errors", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("score", help="score one image")
    c.add_argument("--image", required=True)
    c.add_argument("--dets", help="detections JSON (default: <image>.dets.json)")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--dump-saliency", metavar="PNG", help="write the saliency map as grayscale PNG")
    c.set_defaults(func=cmd_score)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "train" and args.stage == "fused" and not args.init:
        print("alamp train: --stage fused requires --init <mp_only checkpoint>", file=sys.stderr)
        return EXIT_USAGE
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            return args.func(args)
    except (IOFailure, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (NumericFailure, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (InvalidInput, NoFeasibleSet, LampError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
