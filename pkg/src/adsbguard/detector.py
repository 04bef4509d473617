"""Window scoring, threshold calibration, and alarm logic.

A window's anomaly score sums, over its L messages, one minus the cosine
similarity between each input vector and its reconstruction, so scores live
in [0, 2L]. The detection threshold is the nearest-rank 95th percentile of
benign window scores pooled from an internal cross-validation over the
training flights: each fold's flights are scored by a model (plus route
profile and normalizer) fitted on the remaining folds only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import (
    Normalizer,
    apply_normalizer,
    fit_normalizer,
    flight_features,
    make_windows,
    stack_windows,
)
from .geodesy import DEFAULT_MAJOR_FRACTIONS, DEFAULT_PATH_SAMPLES, RouteProfile, build_route_profile
from .seq_autoencoder import EncoderDecoderModel, TrainConfig, reconstruct_windows, train
from .track_model import FlightTrack

NORM_EPS = 1e-12


@dataclass(frozen=True)
class Verdict:
    start: int
    score: float
    flagged: bool


@dataclass(frozen=True)
class Alert:
    """Raised once per maximal run of >= t consecutive flagged windows.

    ``first_window`` is the run's first flagged window start, ``trigger_window``
    the t-th consecutive one, and ``alarm_message`` the last message index of
    the triggering window.
    """

    first_window: int
    trigger_window: int
    alarm_message: int


@dataclass
class DetectorConfig:
    """Everything needed to fit a route detector from benign flights."""

    window_len: int = 15
    hidden_size: int = 64
    reverse_reconstruction: bool = True
    profile_samples: int = DEFAULT_PATH_SAMPLES
    major_fractions: tuple[float, ...] = DEFAULT_MAJOR_FRACTIONS
    train: TrainConfig = field(default_factory=TrainConfig)
    train_stride: int = 1  # windowing stride for training data only; scoring always strides by 1
    percentile: float = 95.0
    calib_folds: int = 5
    aggregation_t: int = 1


@dataclass
class CalibratedDetector:
    model: EncoderDecoderModel
    normalizer: Normalizer
    profile: RouteProfile
    threshold: float
    window_len: int
    aggregation_t: int = 1

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.aggregation_t < 1:
            raise ValueError("aggregation t must be at least 1")


def cos_similarity(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; scale-invariant in either argument.

    Degenerate norms: two near-null vectors are perfectly similar (1.0), a
    null vector against a non-null one is maximally dissimilar here (0.0),
    which keeps window scores total and bounded.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_hat.shape}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(x_hat))
    if nx < NORM_EPS and ny < NORM_EPS:
        return 1.0
    if nx < NORM_EPS or ny < NORM_EPS:
        return 0.0
    return float(np.dot(x, x_hat) / (nx * ny))


def anomaly_scores_batch(inputs: np.ndarray, reconstructions: np.ndarray) -> np.ndarray:
    """Scores for a batch of aligned (n, L, d) window pairs."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(reconstructions, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    nx = np.linalg.norm(x, axis=-1)
    ny = np.linalg.norm(y, axis=-1)
    dot = np.sum(x * y, axis=-1)
    denom = np.where((nx < NORM_EPS) | (ny < NORM_EPS), 1.0, nx * ny)
    cos = dot / denom
    cos = np.where((nx < NORM_EPS) & (ny < NORM_EPS), 1.0, cos)
    cos = np.where((nx < NORM_EPS) ^ (ny < NORM_EPS), 0.0, cos)
    return np.sum(1.0 - cos, axis=-1)


def anomaly_score(window_values: np.ndarray, reconstruction: np.ndarray) -> float:
    """Sum over the window's messages of (1 - cosine similarity)."""
    x = np.asarray(window_values, dtype=np.float64)
    y = np.asarray(reconstruction, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length/shape mismatch: {x.shape} vs {y.shape}")
    return float(anomaly_scores_batch(x[None], y[None])[0])


def nearest_rank_percentile(scores: np.ndarray, percentile: float) -> float:
    """Order-statistic percentile: the ceil(p/100 * n)-th smallest value."""
    values = np.sort(np.asarray(scores, dtype=np.float64))
    if values.size == 0:
        raise ValueError("no scores to take a percentile of")
    if not 0.0 < percentile <= 100.0:
        raise ValueError("percentile must lie in (0, 100]")
    rank = int(np.ceil(percentile / 100.0 * values.size))
    return float(values[max(rank, 1) - 1])


def fit_route_model(
    flights: tuple[FlightTrack, ...] | list[FlightTrack],
    cfg: DetectorConfig,
    route_id: str,
) -> tuple[RouteProfile, Normalizer, EncoderDecoderModel]:
    profile = build_route_profile(
        flights, route_id=route_id, samples=cfg.profile_samples, fractions=cfg.major_fractions
    )
    raw = [flight_features(f, profile) for f in flights]
    normalizer = fit_normalizer(np.concatenate(raw, axis=0))
    windows = []
    for feats in raw:
        windows.extend(make_windows(apply_normalizer(feats, normalizer), cfg.window_len, cfg.train_stride))
    model = train(
        stack_windows(windows),
        cfg.train,
        hidden_size=cfg.hidden_size,
        reverse_reconstruction=cfg.reverse_reconstruction,
    )
    return profile, normalizer, model


def flight_scores(
    track: FlightTrack,
    model: EncoderDecoderModel,
    normalizer: Normalizer,
    profile: RouteProfile,
    window_len: int,
) -> tuple[np.ndarray, np.ndarray]:
    """(window starts, anomaly scores) for every stride-1 window of a flight."""
    feats = apply_normalizer(flight_features(track, profile), normalizer)
    windows = make_windows(feats, window_len, stride=1)
    batch = stack_windows(windows)
    recon = reconstruct_windows(model, batch)
    scores = anomaly_scores_batch(batch, recon)
    return np.array([w.start for w in windows]), scores


def calibrate_threshold(
    flights: tuple[FlightTrack, ...] | list[FlightTrack],
    cfg: DetectorConfig,
    percentile: float | None = None,
    folds: int | None = None,
) -> float:
    """Cross-validated benign-score percentile.

    Splits the training flights into ``folds`` folds; for each, fits the full
    pipeline (profile, normalizer, model) on the others and scores the
    held-out flights' windows. All held-out scores pool into one population
    and the threshold is its nearest-rank percentile.
    """
    percentile = cfg.percentile if percentile is None else percentile
    folds = cfg.calib_folds if folds is None else folds
    if folds < 2:
        raise ValueError("calibration needs at least 2 folds")
    if len(flights) < folds:
        raise ValueError(f"calibration needs at least {folds} flights, got {len(flights)}")
    flights = tuple(flights)
    pooled: list[np.ndarray] = []
    for k in range(folds):
        held = [f for i, f in enumerate(flights) if i % folds == k]
        rest = [f for i, f in enumerate(flights) if i % folds != k]
        profile, normalizer, model = fit_route_model(rest, cfg, route_id=f"calib-fold-{k}")
        for flight in held:
            _, scores = flight_scores(flight, model, normalizer, profile, cfg.window_len)
            pooled.append(scores)
    return nearest_rank_percentile(np.concatenate(pooled), percentile)


def fit_detector(
    flights: tuple[FlightTrack, ...] | list[FlightTrack],
    cfg: DetectorConfig,
    route_id: str,
) -> CalibratedDetector:
    """Calibrate a threshold on the training flights, then fit the deployed
    profile/normalizer/model on all of them."""
    if len(flights) < 2:
        raise ValueError("training a route detector needs at least 2 flights")
    threshold = calibrate_threshold(flights, cfg)
    profile, normalizer, model = fit_route_model(flights, cfg, route_id=route_id)
    return CalibratedDetector(
        model=model,
        normalizer=normalizer,
        profile=profile,
        threshold=threshold,
        window_len=cfg.window_len,
        aggregation_t=cfg.aggregation_t,
    )


def score_flight(det: CalibratedDetector, track: FlightTrack) -> list[Verdict]:
    """Stride-1 window verdicts for one flight; flagged = score > threshold."""
    starts, scores = flight_scores(track, det.model, det.normalizer, det.profile, det.window_len)
    return [
        Verdict(start=int(i), score=float(s), flagged=bool(s > det.threshold))
        for i, s in zip(starts, scores)
    ]


def aggregate_alerts(verdicts: list[Verdict], t: int, window_len: int) -> list[Alert]:
    """One alert per maximal run of >= t consecutive flagged verdicts,
    anchored at the run's t-th element (a sustained attack alerts once)."""
    if t < 1:
        raise ValueError("t must be at least 1")
    alerts: list[Alert] = []
    run_start: int | None = None
    run_len = 0
    for idx, v in enumerate(verdicts):
        if v.flagged:
            if run_start is None:
                run_start = idx
            run_len += 1
        else:
            if run_start is not None and run_len >= t:
                trigger = verdicts[run_start + t - 1].start
                alerts.append(
                    Alert(
                        first_window=verdicts[run_start].start,
                        trigger_window=trigger,
                        alarm_message=trigger + window_len - 1,
                    )
                )
            run_start = None
            run_len = 0
    if run_start is not None and run_len >= t:
        trigger = verdicts[run_start + t - 1].start
        alerts.append(
            Alert(
                first_window=verdicts[run_start].start,
                trigger_window=trigger,
                alarm_message=trigger + window_len - 1,
            )
        )
    return alerts


def alarm_delay(verdicts: list[Verdict], attack_start: int, window_len: int) -> int | None:
    """Messages from the attack's first message until the end of the first
    flagged window whose span reaches the attack; None when nothing fires."""
    for v in verdicts:
        if v.flagged and v.start + window_len - 1 >= attack_start:
            return v.start + window_len - 1 - attack_start + 1
    return None
