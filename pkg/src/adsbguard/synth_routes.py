"""Synthetic benign route datasets for reproducible desk-scale evaluation.

Flights follow a great-circle path between two endpoints with a trapezoidal
climb/cruise/descent altitude profile and heading equal to the local path
bearing. Smooth first-order autoregressive noise perturbs cross-track
position, altitude, and speed so tracks vary the way real traffic does
instead of jittering white noise the model could trivially average away.
Generation is deterministic: each flight draws from a seed derived from the
dataset seed and the flight index.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .track_model import (
    MANIFEST_NAME,
    FlightTrack,
    GeoPoint,
    RouteDataset,
    from_arrays,
    serialize_flight_csv,
)

SYNTH_CONFIG_NAME = "synth.json"
MESSAGE_INTERVAL_S = 30.0
AR_COEFF = 0.95
KM_PER_DEG_LAT = 111.32


@dataclass
class SynthConfig:
    route_id: str = "synth-route"
    start: GeoPoint = GeoPoint(32.0, 34.9)
    end: GeoPoint = GeoPoint(51.5, -0.5)
    n_flights: int = 80
    n_messages: int = 400
    cruise_alt_ft: float = 30000.0
    climb_fraction: float = 0.15
    descent_fraction: float = 0.15
    cruise_speed_kt: float = 460.0
    ground_speed_kt: float = 160.0
    cross_track_noise_km: float = 1.5
    alt_noise_ft: float = 120.0
    speed_noise_kt: float = 6.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_messages < 265:
            raise ValueError("flights need at least 265 messages so the default attack span fits")
        if self.n_flights < 10:
            raise ValueError("need at least 10 flights for 10-fold evaluation")
        if not 0 < self.climb_fraction + self.descent_fraction < 1:
            raise ValueError("climb and descent fractions must leave room for cruise")


def _to_unit(p: GeoPoint) -> np.ndarray:
    lat, lon = np.radians(p.lat_deg), np.radians(p.lon_deg)
    return np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def _great_circle(start: GeoPoint, end: GeoPoint, progress: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spherical interpolation of the path at the given progress fractions."""
    a, b = _to_unit(start), _to_unit(end)
    omega = np.arccos(np.clip(np.dot(a, b), -1.0, 1.0))
    if omega < 1e-12:
        pts = np.outer(np.ones_like(progress), a)
    else:
        pts = (
            np.outer(np.sin((1.0 - progress) * omega), a) + np.outer(np.sin(progress * omega), b)
        ) / np.sin(omega)
    lat = np.degrees(np.arcsin(np.clip(pts[:, 2], -1.0, 1.0)))
    lon = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    return lat, lon


def _bearings(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    """Forward azimuth between consecutive points, repeated at the tail."""
    lat1, lat2 = np.radians(lat[:-1]), np.radians(lat[1:])
    dlon = np.radians(lon[1:] - lon[:-1])
    y = np.sin(dlon) * np.cos(lat2)
    x = np.cos(lat1) * np.sin(lat2) - np.sin(lat1) * np.cos(lat2) * np.cos(dlon)
    theta = np.degrees(np.arctan2(y, x))
    theta = np.mod(theta, 360.0)
    return np.append(theta, theta[-1])


def _ar1(rng: np.random.Generator, n: int, std: float, coeff: float = AR_COEFF) -> np.ndarray:
    """Stationary AR(1) series with the requested marginal std."""
    if std <= 0:
        return np.zeros(n)
    innov_std = std * np.sqrt(1.0 - coeff**2)
    out = np.empty(n)
    out[0] = rng.normal(0.0, std)
    shocks = rng.normal(0.0, innov_std, size=n - 1)
    for k in range(1, n):
        out[k] = coeff * out[k - 1] + shocks[k - 1]
    return out


def _trapezoid(progress: np.ndarray, rise_frac: float, fall_frac: float, low: float, high: float) -> np.ndarray:
    level = np.full_like(progress, high)
    rising = progress < rise_frac
    falling = progress > 1.0 - fall_frac
    level[rising] = low + (high - low) * progress[rising] / rise_frac
    level[falling] = low + (high - low) * (1.0 - progress[falling]) / fall_frac
    return level


def flight_seed(dataset_seed: int, flight_index: int) -> int:
    return int(np.random.SeedSequence([dataset_seed, flight_index]).generate_state(1)[0])


def generate_benign_flight(cfg: SynthConfig, seed: int, flight_id: str = "flight") -> FlightTrack:
    rng = np.random.default_rng(seed)
    n = cfg.n_messages
    progress = np.arange(n) / (n - 1)

    lat, lon = _great_circle(cfg.start, cfg.end, progress)
    base_bearing = _bearings(lat, lon)

    # Cross-track displacement perpendicular to the path.
    offset_km = _ar1(rng, n, cfg.cross_track_noise_km)
    perp = np.radians(base_bearing + 90.0)
    lat = lat + offset_km * np.cos(perp) / KM_PER_DEG_LAT
    lon = lon + offset_km * np.sin(perp) / (KM_PER_DEG_LAT * np.cos(np.radians(lat)))

    alt = _trapezoid(progress, cfg.climb_fraction, cfg.descent_fraction, 0.0, cfg.cruise_alt_ft)
    alt = alt + _ar1(rng, n, cfg.alt_noise_ft)
    speed = _trapezoid(progress, cfg.climb_fraction, cfg.descent_fraction, cfg.ground_speed_kt, cfg.cruise_speed_kt)
    speed = speed + _ar1(rng, n, cfg.speed_noise_kt)

    heading = _bearings(lat, lon)  # noisy path, so heading wobbles with cross-track drift
    t = MESSAGE_INTERVAL_S * np.arange(n)

    # Quantize to the CSV precision so generate -> write -> load is exact.
    lat = np.round(np.clip(lat, -90.0, 90.0), 6)
    lon = np.round(np.clip(lon, -180.0, 180.0), 6)
    alt = np.round(np.clip(alt, -1500.0, 60000.0), 1)
    speed = np.round(np.clip(speed, 0.0, 1200.0), 1)
    heading = np.mod(np.round(heading, 1), 360.0)
    return from_arrays(flight_id, t, lat, lon, alt, speed, heading)


def generate_flights(cfg: SynthConfig) -> list[FlightTrack]:
    return [
        generate_benign_flight(cfg, flight_seed(cfg.seed, i), flight_id=f"flight_{i:03d}")
        for i in range(cfg.n_flights)
    ]


def generate_dataset(cfg: SynthConfig, out_dir: str | Path) -> RouteDataset:
    """Write n_flights CSVs plus the route manifest and the generator config
    next to them; the directory loads back with ``load_dataset``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    flights = generate_flights(cfg)
    filenames = []
    for flight in flights:
        name = f"{flight.flight_id}.csv"
        (out / name).write_text(serialize_flight_csv(flight), encoding="utf-8")
        filenames.append(name)
    manifest = {"route_id": cfg.route_id, "flights": filenames}
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / SYNTH_CONFIG_NAME).write_text(json.dumps(synth_config_to_dict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RouteDataset(route_id=cfg.route_id, flights=tuple(flights))


def synth_config_to_dict(cfg: SynthConfig) -> dict:
    doc = asdict(cfg)
    doc["start"] = {"lat_deg": cfg.start.lat_deg, "lon_deg": cfg.start.lon_deg}
    doc["end"] = {"lat_deg": cfg.end.lat_deg, "lon_deg": cfg.end.lon_deg}
    return doc


def synth_config_from_dict(doc: dict) -> SynthConfig:
    doc = dict(doc)
    doc["start"] = GeoPoint(**doc["start"])
    doc["end"] = GeoPoint(**doc["end"])
    return SynthConfig(**doc)


def load_synth_config(path: str | Path) -> SynthConfig:
    return synth_config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
