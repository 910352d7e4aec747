"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O or
format failure.  Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checkpoint, engine, reports
from .data import FeatureDataset, SynthSpec, load_features, save_features, synth_blobs
from .errors import DataFormatError, NumericalError, ValidationError

log = logging.getLogger("gpal")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _setup_logging() -> None:
    level = os.environ.get("GPAL_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpal", description="GP-based active learning over feature vectors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p_synth.add_argument("--spec", required=True, help="JSON file describing the blobs")
    p_synth.add_argument("--out", required=True, help="output feature file path")

    p_train = sub.add_parser("train", help="train one model on the labeled subset")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--labels-from", help="JSON file with {'ids': [...]} or {'indices': [...]}")
    p_train.add_argument("--config", help="run config JSON (train section is used)")
    p_train.add_argument("--model-kind", choices=[engine.MODEL_SVGP, engine.MODEL_SOFTMAX])
    p_train.add_argument("--out", required=True, help="checkpoint output path")

    p_al = sub.add_parser("al", help="run the active-learning loop with a simulated oracle")
    p_al.add_argument("--config", required=True)
    p_al.add_argument("--data", required=True)
    p_al.add_argument("--out", required=True, help="report output directory")
    p_al.add_argument("--seeds", help="comma-separated seeds; one subdirectory per seed")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)

    p_serve = sub.add_parser("serve", help="serve a live labeling session over HTTP")
    p_serve.add_argument("--data", required=True)
    p_serve.add_argument("--config", help="default session config JSON")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--static-dir", help="directory with the built labeling UI")
    p_serve.add_argument("--image-root", help="directory image_uris resolve under")
    p_serve.add_argument("--out", help="directory to flush report files into on finish")

    p_report = sub.add_parser("report", help="summarize finished runs as CSV on stdout")
    p_report.add_argument("--runs", required=True, help="directory holding per-run subdirectories")
    p_report.add_argument("--aggregate", action="store_true", help="emit mean/std across runs")

    return parser


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _cmd_synth(args) -> int:
    raw = _read_json(args.spec)
    centers = raw.get("centers")
    spec = SynthSpec(
        n_per_class=raw["n_per_class"],
        dim=raw["dim"],
        centers=np.asarray(centers, dtype=np.float64) if centers is not None else None,
        spread=raw.get("spread", 1.0),
        seed=raw.get("seed", 0),
        test_n_per_class=raw.get("test_n_per_class"),
        class_names=raw.get("class_names"),
    )
    ds = synth_blobs(spec)
    save_features(ds, args.out)
    log.info("wrote %d samples to %s", ds.n_samples, args.out)
    return EXIT_OK


def _labeled_indices(ds: FeatureDataset, labels_from: str | None) -> np.ndarray:
    if labels_from is None:
        pool = ds.train_pool_indices()
        labeled = np.array([i for i in pool if ds.has_label(int(i))], dtype=np.int64)
        if labeled.size == 0:
            raise ValidationError("no labeled train_pool samples in the sidecar")
        return labeled
    raw = _read_json(labels_from)
    if "indices" in raw:
        return np.asarray(raw["indices"], dtype=np.int64)
    if "ids" in raw:
        return np.asarray([ds.index_of_id(s) for s in raw["ids"]], dtype=np.int64)
    raise ValidationError(f"{labels_from} must contain 'indices' or 'ids'")


def _cmd_train(args) -> int:
    ds = load_features(args.data)
    cfg = engine.ALConfig.from_dict(_read_json(args.config)) if args.config else engine.ALConfig()
    if args.model_kind:
        strategy = cfg.strategy
        if args.model_kind == engine.MODEL_SOFTMAX:
            strategy = "random"
        cfg = replace(cfg, model_kind=args.model_kind, strategy=strategy)
    labeled = _labeled_indices(ds, args.labels_from)
    model = engine.train_model(ds, labeled, cfg)
    checkpoint.save_model(model, args.out, config_echo=cfg.to_dict())
    log.info("checkpoint written to %s", args.out)
    return EXIT_OK


def _run_one(ds, cfg: engine.ALConfig, out_dir: Path) -> None:
    report = engine.run_al(ds, cfg, engine.SimulatedOracle(ds))
    reports.write_report(report, out_dir)


def _cmd_al(args) -> int:
    ds = load_features(args.data)
    cfg = engine.ALConfig.from_dict(_read_json(args.config))
    out = Path(args.out)
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise ValidationError(f"bad --seeds value: {exc}") from exc
        if not seeds:
            raise ValidationError("--seeds is empty")
        jobs = [(replace(cfg, seed=s), out / f"seed_{s}") for s in seeds]
        with ThreadPoolExecutor(max_workers=min(4, len(jobs))) as pool:
            futures = [pool.submit(_run_one, ds, c, d) for c, d in jobs]
            for fut in futures:
                fut.result()
    else:
        _run_one(ds, cfg, out)
    return EXIT_OK


def _cmd_eval(args) -> int:
    ds = load_features(args.data)
    model = checkpoint.load_model(args.model)
    acc, balanced = engine.evaluate_with_balance(model, ds)
    print(json.dumps({"test_accuracy": acc, "balanced_accuracy": balanced}))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ds = load_features(args.data)
    default_cfg = engine.ALConfig.from_dict(_read_json(args.config)) if args.config else None
    app = create_app(
        ds,
        default_config=default_cfg,
        static_dir=args.static_dir,
        image_root=args.image_root,
        out_dir=args.out,
    )
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_report(args) -> int:
    runs_dir = Path(args.runs)
    paths = sorted(runs_dir.glob("*/report.json"))
    if (runs_dir / "report.json").exists():
        paths.insert(0, runs_dir / "report.json")
    if not paths:
        raise DataFormatError(f"no report.json found under {runs_dir}")
    loaded = [reports.load_report(p) for p in paths]
    if args.aggregate:
        sys.stdout.write(reports.aggregate_csv_text(loaded))
    else:
        for rep in loaded:
            sys.stdout.write(reports.curve_csv_text(rep))
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "al": _cmd_al,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold into the validation code
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyError as exc:
        print(f"error: missing key {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
