"""Per-message feature vectors, z-score normalization, and window slicing.

Each track message maps to a 10-component vector (component order is
``FEATURE_NAMES``): ground speed, latitude, longitude, altitude, heading
encoded as sin/cos, and Vincenty distances to the route's four major points.
Heading is encoded on the unit circle rather than in raw degrees so neither
the sequence model nor cosine scoring sees a discontinuity at the 359-to-0
wrap; pass ``heading_sincos=False`` for the raw-degrees ablation (9
components, ``heading_deg`` replacing the sin/cos pair).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geodesy import RouteProfile, distances_to_point
from .track_model import FlightTrack, TrackMessage, as_arrays

FEATURE_NAMES = (
    "speed_kt",
    "lat_deg",
    "lon_deg",
    "alt_ft",
    "heading_sin",
    "heading_cos",
    "dist_A_m",
    "dist_B_m",
    "dist_C_m",
    "dist_D_m",
)

STD_FLOOR_REL = 1e-6
STD_FLOOR_ABS = 1e-9


def flight_features(track: FlightTrack, profile: RouteProfile, heading_sincos: bool = True) -> np.ndarray:
    """Raw (unnormalized) feature matrix for a whole flight, shape (N, d).

    Extraction is per message with no hidden state, so the matrix of a
    concatenation equals the concatenation of the matrices.
    """
    arr = as_arrays(track)
    heading_rad = np.radians(arr.heading_deg)
    if heading_sincos:
        heading_cols = [np.sin(heading_rad), np.cos(heading_rad)]
    else:
        heading_cols = [arr.heading_deg]
    dist_cols = []
    for point in profile.major_points:
        dists, _ = distances_to_point(arr.lat, arr.lon, point)
        dist_cols.append(dists)
    return np.column_stack([arr.speed_kt, arr.lat, arr.lon, arr.alt_ft, *heading_cols, *dist_cols])


def extract_features(msg: TrackMessage, profile: RouteProfile, heading_sincos: bool = True) -> np.ndarray:
    """Raw feature vector for a single message, shape (d,)."""
    heading_rad = np.radians(msg.heading_deg)
    if heading_sincos:
        heading_cols = [np.sin(heading_rad), np.cos(heading_rad)]
    else:
        heading_cols = [msg.heading_deg]
    dists = [
        distances_to_point(np.array([msg.pos.lat_deg]), np.array([msg.pos.lon_deg]), point)[0][0]
        for point in profile.major_points
    ]
    return np.array([msg.speed_kt, msg.pos.lat_deg, msg.pos.lon_deg, msg.alt_ft, *heading_cols, *dists])


@dataclass
class Normalizer:
    """Per-component mean/std fitted on training features. Stds are floored
    (max of 1e-6 of the mean magnitude and 1e-9) so constant components stay
    finite under z-scoring."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("normalizer mean/std must be 1-D and the same shape")
        if np.any(self.std <= 0):
            raise ValueError("normalizer std components must be positive")


def fit_normalizer(vectors: np.ndarray) -> Normalizer:
    """Fit per-component mean and standard deviation over rows of ``vectors``."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError(f"need a (n>=2, d) matrix of feature vectors, got shape {vectors.shape}")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)
    floor = np.maximum(STD_FLOOR_REL * np.abs(mean), STD_FLOOR_ABS)
    return Normalizer(mean=mean, std=np.maximum(std, floor))


def apply_normalizer(vectors: np.ndarray, norm: Normalizer) -> np.ndarray:
    """Z-score rows (or a single vector) with the fitted statistics."""
    return (np.asarray(vectors, dtype=np.float64) - norm.mean) / norm.std


def invert_normalizer(vectors: np.ndarray, norm: Normalizer) -> np.ndarray:
    return np.asarray(vectors, dtype=np.float64) * norm.std + norm.mean


@dataclass
class Window:
    """L consecutive feature vectors starting at message index ``start``."""

    start: int
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 2:
            raise ValueError(f"window needs shape (L>=2, d), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("window values must be finite")

    @property
    def length(self) -> int:
        return int(self.values.shape[0])


def make_windows(features: np.ndarray, window_len: int, stride: int = 1) -> list[Window]:
    """Slice a feature sequence into windows of ``window_len`` rows.

    Starts run 0, stride, 2*stride, ... up to N - window_len, giving
    floor((N - L) / stride) + 1 windows.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if window_len < 2:
        raise ValueError("window length must be at least 2")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if n < window_len:
        raise ValueError(f"sequence of {n} rows is shorter than window length {window_len}")
    return [
        Window(start=i, values=features[i : i + window_len])
        for i in range(0, n - window_len + 1, stride)
    ]


def stack_windows(windows: list[Window]) -> np.ndarray:
    """(n_windows, L, d) array view of a window list."""
    if not windows:
        raise ValueError("no windows to stack")
    return np.stack([w.values for w in windows])
