"""Cross-validated attack-injection evaluation and report/GeoJSON export.

The experiment mirrors deployment: split a benign route dataset into k
folds; per fold, fit a calibrated detector on the other folds, then score
five copies of each held-out flight (benign plus the four attack variants
injected over a fixed message span). Window-level FPR/TPR, alarm delay, and
run-length-aggregated false alarm rates for several t values are averaged
over folds as mean and standard deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .detector import (
    CalibratedDetector,
    DetectorConfig,
    Verdict,
    fit_detector,
    score_flight,
)
from .synth_routes import SynthConfig, generate_benign_flight
from .threat_injection import AttackKind, AttackSpan, apply_attack, label_windows
from .track_model import FlightTrack, GeoPoint, RouteDataset

ATTACK_ORDER = (AttackKind.RND, AttackKind.ROUTE, AttackKind.SHIFT_UP, AttackKind.SHIFT_DOWN)


@dataclass
class EvalConfig:
    k_folds: int = 10
    t_values: tuple[int, ...] = (5, 10, 15)
    seed: int = 0
    span: AttackSpan = field(default_factory=AttackSpan)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    drift_step_ft: float = 400.0
    donor_shift_deg: float = 6.0  # how far the synthetic donor route is displaced


@dataclass
class FoldPlan:
    """Seeded shuffle of flight ids split into k balanced folds."""

    folds: list[list[str]]

    def __post_init__(self) -> None:
        sizes = [len(f) for f in self.folds]
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValueError(f"fold sizes must differ by at most 1, got {sizes}")


def make_fold_plan(flight_ids: list[str], k: int, seed: int) -> FoldPlan:
    if k < 2 or len(flight_ids) < k:
        raise ValueError(f"cannot split {len(flight_ids)} flights into {k} folds")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    order = rng.permutation(len(flight_ids))
    return FoldPlan(folds=[[flight_ids[i] for i in chunk] for chunk in np.array_split(order, k)])


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass
class FlightMetrics:
    fpr: float | None
    tpr: float | None
    delay: int | None
    detected: bool
    per_t: dict[int, dict]


def _flag_runs(flags: list[bool]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive True values as (start, length) pairs."""
    runs = []
    start = None
    for idx, f in enumerate(flags):
        if f and start is None:
            start = idx
        elif not f and start is not None:
            runs.append((start, idx - start))
            start = None
    if start is not None:
        runs.append((start, len(flags) - start))
    return runs


def compute_metrics(
    verdicts: list[Verdict],
    labels: list[bool],
    attack_start: int | None,
    t_values: tuple[int, ...],
    window_len: int,
) -> FlightMetrics:
    """Window-level rates, alarm delay, and per-t aggregation outcomes for
    one scored flight. ``labels`` must align with the verdicts one-to-one."""
    if len(verdicts) != len(labels):
        raise ValueError(f"{len(verdicts)} verdicts vs {len(labels)} labels")
    flags = [v.flagged for v in verdicts]
    benign = [not m for m in labels]
    n_benign = sum(benign)
    n_malicious = len(labels) - n_benign

    fpr = sum(1 for f, b in zip(flags, benign) if f and b) / n_benign if n_benign else None
    tpr = sum(1 for f, m in zip(flags, labels) if f and m) / n_malicious if n_malicious else None

    delay = None
    if attack_start is not None:
        for v in verdicts:
            if v.flagged and v.start + window_len - 1 >= attack_start:
                delay = v.start + window_len - 1 - attack_start + 1
                break

    runs = _flag_runs(flags)
    per_t: dict[int, dict] = {}
    for t in t_values:
        qualifying = [(s, n) for s, n in runs if n >= t]
        alerted = np.zeros(len(flags), dtype=bool)
        for s, n in qualifying:
            alerted[s : s + n] = True
        far = (
            sum(1 for idx in range(len(flags)) if alerted[idx] and benign[idx]) / n_benign
            if n_benign
            else None
        )
        detected_t = any(
            any(labels[idx] for idx in range(s, s + n)) for s, n in qualifying
        )
        per_t[t] = {"far": far, "detected": detected_t, "n_alerts": len(qualifying)}
    return FlightMetrics(fpr=fpr, tpr=tpr, delay=delay, detected=delay is not None, per_t=per_t)


def _mean_std(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "std": None}
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def _donor_flight(dataset: RouteDataset, cfg: EvalConfig) -> FlightTrack:
    """Synthetic flight on a clearly different route, used as the segment
    donor for route-replacement injection."""
    first = dataset.flights[0]
    start = first.messages[0].pos
    end = first.messages[-1].pos
    shift = cfg.donor_shift_deg
    donor_cfg = SynthConfig(
        route_id="donor-route",
        start=GeoPoint(
            float(np.clip(start.lat_deg + shift, -85.0, 85.0)),
            float(np.clip(start.lon_deg + shift, -180.0, 180.0)),
        ),
        end=GeoPoint(
            float(np.clip(end.lat_deg + shift, -85.0, 85.0)),
            float(np.clip(end.lon_deg + shift, -180.0, 180.0)),
        ),
        n_messages=max(265, max(len(f) for f in dataset.flights)),
        seed=_derived_seed(cfg.seed, 0xD030),
    )
    return generate_benign_flight(donor_cfg, donor_cfg.seed, flight_id="donor")


def _fold_aggregate(per_flight: list[FlightMetrics], t_values: tuple[int, ...]) -> dict:
    agg = {
        "fpr": _mean_std([m.fpr for m in per_flight if m.fpr is not None])["mean"],
        "tpr": _mean_std([m.tpr for m in per_flight if m.tpr is not None])["mean"],
        "delay": _mean_std([float(m.delay) for m in per_flight if m.delay is not None])["mean"],
        "detection_rate": sum(1 for m in per_flight if m.detected) / len(per_flight),
        "per_t": {},
    }
    for t in t_values:
        fars = [m.per_t[t]["far"] for m in per_flight if m.per_t[t]["far"] is not None]
        agg["per_t"][t] = {
            "far": _mean_std(fars)["mean"],
            "detection_rate": sum(1 for m in per_flight if m.per_t[t]["detected"]) / len(per_flight),
        }
    return agg


def kfold_evaluate(dataset: RouteDataset, cfg: EvalConfig) -> dict:
    """Run the full cross-validated attack-injection experiment.

    Returns a JSON-ready report: per-attack mean/std of FPR, TPR, and alarm
    delay over folds, benign-copy FPR, per-t aggregated false alarm rates,
    the fold plan, and per-fold detail. A fold that errors is recorded under
    ``incomplete_folds`` and excluded from the aggregates.
    """
    if len(dataset.flights) < cfg.k_folds:
        raise ValueError(f"need at least {cfg.k_folds} flights, got {len(dataset.flights)}")
    for flight in dataset.flights:
        cfg.span.check_within(len(flight))

    flights_by_id = {f.flight_id: f for f in dataset.flights}
    plan = make_fold_plan([f.flight_id for f in dataset.flights], cfg.k_folds, cfg.seed)
    donor = _donor_flight(dataset, cfg)
    window_len = cfg.detector.window_len

    fold_records: list[dict] = []
    incomplete: list[dict] = []
    for fold_idx, test_ids in enumerate(plan.folds):
        test_set = set(test_ids)
        train_flights = [f for f in dataset.flights if f.flight_id not in test_set]
        test_flights = [flights_by_id[i] for i in sorted(test_ids)]
        try:
            record = _evaluate_fold(
                fold_idx, train_flights, test_flights, donor, dataset.route_id, cfg
            )
            fold_records.append(record)
        except Exception as exc:  # noqa: BLE001 - a fold failure must not kill the run
            incomplete.append({"fold": fold_idx, "error": f"{type(exc).__name__}: {exc}"})

    report: dict = {
        "route_id": dataset.route_id,
        "n_flights": len(dataset.flights),
        "seed": cfg.seed,
        "k_folds": cfg.k_folds,
        "window_len": window_len,
        "span": {"start": cfg.span.start, "end": cfg.span.end},
        "t_values": list(cfg.t_values),
        "fold_plan": plan.folds,
        "folds": fold_records,
        "incomplete_folds": incomplete,
    }

    report["benign_fpr"] = _mean_std([r["benign"]["fpr"] for r in fold_records])
    attacks: dict = {}
    for kind in ATTACK_ORDER:
        rows = [r["attacks"][kind.value] for r in fold_records]
        attacks[kind.value] = {
            "fpr": _mean_std([x["fpr"] for x in rows if x["fpr"] is not None]),
            "tpr": _mean_std([x["tpr"] for x in rows if x["tpr"] is not None]),
            "delay": _mean_std([x["delay"] for x in rows if x["delay"] is not None]),
            "detection_rate": _mean_std([x["detection_rate"] for x in rows])["mean"],
        }
    report["attacks"] = attacks

    aggregation: dict = {}
    for t in cfg.t_values:
        fars = []
        det_rates = []
        for r in fold_records:
            for kind in ATTACK_ORDER:
                row = r["attacks"][kind.value]["per_t"][t]
                if row["far"] is not None:
                    fars.append(row["far"])
                det_rates.append(row["detection_rate"])
        aggregation[str(t)] = {
            "far": _mean_std(fars),
            "detection_rate": _mean_std(det_rates)["mean"],
            "all_attacks_detected": bool(det_rates) and min(det_rates) >= 1.0,
        }
    report["aggregation"] = aggregation
    return report


def _evaluate_fold(
    fold_idx: int,
    train_flights: list[FlightTrack],
    test_flights: list[FlightTrack],
    donor: FlightTrack,
    route_id: str,
    cfg: EvalConfig,
) -> dict:
    det_cfg = replace(
        cfg.detector,
        train=replace(cfg.detector.train, seed=_derived_seed(cfg.seed, fold_idx)),
    )
    det = fit_detector(train_flights, det_cfg, route_id)
    window_len = cfg.detector.window_len

    benign_metrics: list[FlightMetrics] = []
    attack_metrics: dict[str, list[FlightMetrics]] = {k.value: [] for k in ATTACK_ORDER}
    for flight_idx, flight in enumerate(test_flights):
        verdicts = score_flight(det, flight)
        labels = [False] * len(verdicts)
        benign_metrics.append(compute_metrics(verdicts, labels, None, cfg.t_values, window_len))
        for kind_idx, kind in enumerate(ATTACK_ORDER):
            attacked = apply_attack(
                flight,
                kind,
                cfg.span,
                seed=_derived_seed(cfg.seed, fold_idx, flight_idx, kind_idx),
                donor=donor,
                step_ft=cfg.drift_step_ft,
            )
            verdicts = score_flight(det, attacked)
            labels = label_windows(len(attacked), cfg.span, window_len, stride=1)
            attack_metrics[kind.value].append(
                compute_metrics(verdicts, labels, cfg.span.start, cfg.t_values, window_len)
            )

    return {
        "fold": fold_idx,
        "test_flights": [f.flight_id for f in test_flights],
        "threshold": det.threshold,
        "benign": {"fpr": _mean_std([m.fpr for m in benign_metrics])["mean"]},
        "attacks": {k: _fold_aggregate(v, cfg.t_values) for k, v in attack_metrics.items()},
    }


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def export_geojson(track: FlightTrack, verdicts: list[Verdict], window_len: int) -> str:
    """One point feature per verdict at its window's last message position.
    Flagged windows render red, benign green; altitude rides along as a
    size hint for map styling."""
    features = []
    for v in verdicts:
        msg = track.messages[v.start + window_len - 1]
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [msg.pos.lon_deg, msg.pos.lat_deg],
                },
                "properties": {
                    "window_start": v.start,
                    "score": v.score,
                    "flagged": v.flagged,
                    "alt_ft": msg.alt_ft,
                    "marker-color": "#d62728" if v.flagged else "#2ca02c",
                },
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2) + "\n"


def write_verdicts_jsonl(
    path: str | Path, verdicts: list[Verdict], alerts, t: int
) -> None:
    """Verdict stream: one JSON object per window, then an alert summary."""
    lines = [
        json.dumps({"i": v.start, "score": v.score, "flagged": v.flagged}) for v in verdicts
    ]
    lines.append(
        json.dumps(
            {
                "t": t,
                "alerts": [
                    {
                        "first_window": a.first_window,
                        "trigger_window": a.trigger_window,
                        "alarm_message": a.alarm_message,
                    }
                    for a in alerts
                ],
            }
        )
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_report(report: dict, out_dir: str | Path) -> None:
    """Write report.json plus CSV tables: per-attack results and the per-t
    aggregated false alarm rates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    rows = ["attack,delay_mean,delay_std,detection_rate,fpr_mean,fpr_std,tpr_mean,tpr_std"]
    for kind in ATTACK_ORDER:
        a = report["attacks"][kind.value]
        rows.append(
            f"{kind.value},{_csv_num(a['delay']['mean'])},{_csv_num(a['delay']['std'])},"
            f"{_csv_num(a['detection_rate'])},{_csv_num(a['fpr']['mean'])},{_csv_num(a['fpr']['std'])},"
            f"{_csv_num(a['tpr']['mean'])},{_csv_num(a['tpr']['std'])}"
        )
    (out / "attack_results.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    rows = ["t,far_mean,far_std,detection_rate,all_attacks_detected"]
    for t in report["t_values"]:
        row = report["aggregation"][str(t)]
        rows.append(
            f"{t},{_csv_num(row['far']['mean'])},{_csv_num(row['far']['std'])},"
            f"{_csv_num(row['detection_rate'])},{row['all_attacks_detected']}"
        )
    (out / "aggregated_far.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def _csv_num(x) -> str:
    return "" if x is None else repr(float(x))


def format_report_tables(report: dict) -> str:
    """Human-readable summary of the two result tables."""
    lines = [f"Route {report['route_id']}: {report['n_flights']} flights, "
             f"{report['k_folds']}-fold CV, window {report['window_len']}"]
    lines.append("")
    lines.append(f"{'attack':<12}{'delay':>16}{'FPR %':>16}{'TPR %':>16}{'detected':>10}")
    for kind in ATTACK_ORDER:
        a = report["attacks"][kind.value]
        lines.append(
            f"{kind.value:<12}"
            f"{_fmt_pm(a['delay'], 1, scale=1):>16}"
            f"{_fmt_pm(a['fpr'], 2, scale=100):>16}"
            f"{_fmt_pm(a['tpr'], 2, scale=100):>16}"
            f"{_fmt_pct(a['detection_rate']):>10}"
        )
    lines.append("")
    lines.append(f"{'t':<6}{'FAR %':>16}{'all attacks detected':>24}")
    for t in report["t_values"]:
        row = report["aggregation"][str(t)]
        lines.append(
            f"{t:<6}{_fmt_pm(row['far'], 2, scale=100):>16}{str(row['all_attacks_detected']):>24}"
        )
    return "\n".join(lines)


def _fmt_pm(stat: dict, digits: int, scale: float) -> str:
    if stat["mean"] is None:
        return "n/a"
    std = 0.0 if stat["std"] is None else stat["std"]
    return f"{stat['mean'] * scale:.{digits}f}+-{std * scale:.{digits}f}"


def _fmt_pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100.0 * x:.0f}%"
