"""Command-line interface.

Subcommands: synth, train, calibrate, inject, detect, eval. Exit codes:
0 success, 1 usage, 2 data/validation problem, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from .detector import (
    CalibratedDetector,
    DetectorConfig,
    aggregate_alerts,
    calibrate_threshold,
    fit_route_model,
    score_flight,
)
from .harness import (
    EvalConfig,
    export_geojson,
    export_report,
    format_report_tables,
    kfold_evaluate,
    write_verdicts_jsonl,
)
from .seq_autoencoder import (
    ModelFileError,
    NumericsError,
    TrainConfig,
    load_model,
    save_model,
)
from .synth_routes import generate_dataset, load_synth_config
from .threat_injection import (
    AttackKind,
    AttackSpan,
    apply_attack,
    write_injection_manifest,
)
from .track_model import FlightDataError, load_dataset, parse_flight_csv, serialize_flight_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data."""

    def error(self, message):  # noqa: A002 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="adsbguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic benign route dataset")
    p.add_argument("--config", required=True, help="synth config JSON")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="fit a route model on a benign dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("calibrate", help="cross-validate a detection threshold into a model file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("inject", help="inject an attack into one flight CSV")
    p.add_argument("--flight", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in AttackKind])
    p.add_argument("--span", default="180:250", help="inclusive message span START:END")
    p.add_argument("--donor", help="donor flight CSV (route replacement)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", help="score a flight with a calibrated model")
    p.add_argument("--model", required=True)
    p.add_argument("--flight", required=True)
    p.add_argument("--t", type=int, default=1, help="consecutive flagged windows per alert")
    p.add_argument("--out", required=True, help="verdicts JSONL path")
    p.add_argument("--geojson", help="also export per-window GeoJSON here")

    p = sub.add_parser("eval", help="k-fold attack-injection evaluation of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--t", default="5,10,15", help="comma-separated aggregation t values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report directory")
    return parser


def _parse_span(text: str, parser: _Parser) -> AttackSpan:
    try:
        start_s, end_s = text.split(":")
        return AttackSpan(int(start_s), int(end_s))
    except ValueError:
        parser.error(f"--span must be START:END with START <= END, got {text!r}")
        raise AssertionError("unreachable")


def _cmd_synth(args) -> int:
    cfg = load_synth_config(args.config)
    dataset = generate_dataset(cfg, args.out)
    print(f"wrote {len(dataset.flights)} flights for route {dataset.route_id!r} to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset = load_dataset(args.dataset)
    cfg = DetectorConfig(
        window_len=args.window,
        hidden_size=args.hidden,
        train=TrainConfig(seed=args.seed),
    )
    profile, normalizer, model = fit_route_model(dataset.flights, cfg, dataset.route_id)
    save_model(args.out, model, profile, normalizer, threshold=None)
    meta = model.train_meta
    print(
        f"trained on {len(dataset.flights)} flights "
        f"(best val loss {meta['best_val_loss']:.6g} at epoch {meta['best_epoch']}); "
        f"model -> {args.out}"
    )
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    dataset = load_dataset(args.dataset)
    loaded = load_model(args.model)
    train_cfg = loaded.model.train_meta.get("train_config")
    cfg = DetectorConfig(
        window_len=loaded.model.window_len,
        hidden_size=loaded.model.hidden_size,
        reverse_reconstruction=loaded.model.reverse_reconstruction,
        profile_samples=len(loaded.profile.avg_path),
        major_fractions=loaded.profile.major_fractions,
        train=TrainConfig(**train_cfg) if train_cfg else TrainConfig(),
        percentile=args.percentile,
        calib_folds=args.folds,
    )
    threshold = calibrate_threshold(dataset.flights, cfg)
    save_model(args.model, loaded.model, loaded.profile, loaded.normalizer, threshold=threshold)
    print(f"threshold {threshold!r} written into {args.model}")
    return EXIT_OK


def _cmd_inject(args, parser: _Parser) -> int:
    span = _parse_span(args.span, parser)
    kind = AttackKind(args.kind)
    track = parse_flight_csv(Path(args.flight).read_text(encoding="utf-8"), flight_id=Path(args.flight).stem)
    donor = None
    if kind is AttackKind.ROUTE:
        if not args.donor:
            parser.error("--donor is required for --kind route")
        donor = parse_flight_csv(Path(args.donor).read_text(encoding="utf-8"), flight_id=Path(args.donor).stem)
    attacked = apply_attack(track, kind, span, seed=args.seed, donor=donor)
    out = Path(args.out)
    out.write_text(serialize_flight_csv(attacked), encoding="utf-8")
    params = {"donor": args.donor} if kind is AttackKind.ROUTE else {}
    write_injection_manifest(out.with_suffix(".manifest.json"), kind, span, args.seed, params)
    print(f"injected {kind.value} over [{span.start}, {span.end}] -> {out}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    loaded = load_model(args.model)
    if loaded.threshold is None:
        raise ModelFileError(f"model {args.model} has no threshold; run `adsbguard calibrate` first")
    track = parse_flight_csv(Path(args.flight).read_text(encoding="utf-8"), flight_id=Path(args.flight).stem)
    det = CalibratedDetector(
        model=loaded.model,
        normalizer=loaded.normalizer,
        profile=loaded.profile,
        threshold=loaded.threshold,
        window_len=loaded.model.window_len,
        aggregation_t=args.t,
    )
    verdicts = score_flight(det, track)
    alerts = aggregate_alerts(verdicts, args.t, det.window_len)
    write_verdicts_jsonl(args.out, verdicts, alerts, args.t)
    if args.geojson:
        Path(args.geojson).write_text(export_geojson(track, verdicts, det.window_len), encoding="utf-8")
    flagged = sum(1 for v in verdicts if v.flagged)
    print(f"{len(verdicts)} windows, {flagged} flagged, {len(alerts)} alert(s) at t={args.t} -> {args.out}")
    return EXIT_OK


def _cmd_eval(args, parser: _Parser) -> int:
    try:
        t_values = tuple(int(x) for x in args.t.split(","))
    except ValueError:
        parser.error(f"--t must be comma-separated integers, got {args.t!r}")
        raise AssertionError("unreachable")
    dataset = load_dataset(args.dataset)
    cfg = EvalConfig(seed=args.seed, t_values=t_values)
    report = kfold_evaluate(dataset, cfg)
    export_report(report, args.out)
    print(format_report_tables(report))
    print(f"\nreport written to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "inject":
            return _cmd_inject(args, parser)
        if args.command == "detect":
            return _cmd_detect(args)
        if args.command == "eval":
            return _cmd_eval(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except NumericsError as exc:
        print(f"adsbguard: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FlightDataError, ModelFileError, OSError, ValueError) as exc:
        print(f"adsbguard: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
