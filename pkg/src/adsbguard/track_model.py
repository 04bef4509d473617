"""Flight track data types, per-flight CSV parsing, and route dataset loading.

A flight is an ordered sequence of track messages (time, position, altitude,
ground speed, heading) derived from ADS-B broadcasts. One CSV file per flight,
header ``t,lat,lon,alt_ft,speed_kt,heading_deg``; a route directory bundles
flight files under a ``route.json`` manifest.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

CSV_HEADER = ("t", "lat", "lon", "alt_ft", "speed_kt", "heading_deg")
MANIFEST_NAME = "route.json"

# Field bounds for a single track message.
LAT_RANGE = (-90.0, 90.0)
LON_RANGE = (-180.0, 180.0)
ALT_RANGE = (-1500.0, 60000.0)
SPEED_RANGE = (0.0, 1200.0)
HEADING_RANGE = (0.0, 360.0)  # right-open: heading < 360


class FlightDataError(ValueError):
    """Base class for flight ingestion failures."""


class ParseError(FlightDataError):
    """Malformed CSV content (bad header, column count, unparseable number)."""


class ValidationError(FlightDataError):
    """A parsed value violates a track message invariant."""


class OrderingError(FlightDataError):
    """Timestamps are not strictly increasing."""


class DatasetError(FlightDataError):
    """A route dataset directory could not be loaded as a whole."""


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float


@dataclass(frozen=True)
class TrackMessage:
    """One ADS-B-derived report. Field bounds are checked by parsing and
    :func:`validate_track`, not at construction, so that injectors and
    validators can represent out-of-range data."""

    t: float
    pos: GeoPoint
    alt_ft: float
    speed_kt: float
    heading_deg: float


@dataclass
class FlightTrack:
    flight_id: str
    messages: tuple[TrackMessage, ...]

    def __post_init__(self) -> None:
        self.messages = tuple(self.messages)
        if len(self.messages) < 2:
            raise ValueError(
                f"flight {self.flight_id!r}: needs at least 2 messages, got {len(self.messages)}"
            )
        ts = [m.t for m in self.messages]
        for i in range(1, len(ts)):
            if not ts[i] > ts[i - 1]:
                raise OrderingError(
                    f"flight {self.flight_id!r}: timestamps not strictly increasing "
                    f"at message {i} (t={ts[i - 1]} then t={ts[i]})"
                )

    def __len__(self) -> int:
        return len(self.messages)


@dataclass
class RouteDataset:
    route_id: str
    flights: tuple[FlightTrack, ...]

    def __post_init__(self) -> None:
        self.flights = tuple(self.flights)

    def __len__(self) -> int:
        return len(self.flights)


class TrackArrays(NamedTuple):
    """Column view of a track as float64 arrays."""

    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    alt_ft: np.ndarray
    speed_kt: np.ndarray
    heading_deg: np.ndarray


def as_arrays(track: FlightTrack) -> TrackArrays:
    msgs = track.messages
    return TrackArrays(
        t=np.array([m.t for m in msgs], dtype=np.float64),
        lat=np.array([m.pos.lat_deg for m in msgs], dtype=np.float64),
        lon=np.array([m.pos.lon_deg for m in msgs], dtype=np.float64),
        alt_ft=np.array([m.alt_ft for m in msgs], dtype=np.float64),
        speed_kt=np.array([m.speed_kt for m in msgs], dtype=np.float64),
        heading_deg=np.array([m.heading_deg for m in msgs], dtype=np.float64),
    )


def from_arrays(
    flight_id: str,
    t: Iterable[float],
    lat: Iterable[float],
    lon: Iterable[float],
    alt_ft: Iterable[float],
    speed_kt: Iterable[float],
    heading_deg: Iterable[float],
) -> FlightTrack:
    msgs = tuple(
        TrackMessage(float(ti), GeoPoint(float(la), float(lo)), float(al), float(sp), float(hd))
        for ti, la, lo, al, sp, hd in zip(t, lat, lon, alt_ft, speed_kt, heading_deg)
    )
    return FlightTrack(flight_id=flight_id, messages=msgs)


def _check_field(name: str, value: float, lo: float, hi: float, *, right_open: bool = False) -> str | None:
    if not math.isfinite(value):
        return f"{name}={value} is not finite"
    if value < lo:
        return f"{name}={value} below minimum {lo}"
    if right_open:
        if value >= hi:
            return f"{name}={value} must be < {hi}"
    elif value > hi:
        return f"{name}={value} above maximum {hi}"
    return None


def _message_violations(msg: TrackMessage) -> list[str]:
    checks = [
        _check_field("lat", msg.pos.lat_deg, *LAT_RANGE),
        _check_field("lon", msg.pos.lon_deg, *LON_RANGE),
        _check_field("alt_ft", msg.alt_ft, *ALT_RANGE),
        _check_field("speed_kt", msg.speed_kt, *SPEED_RANGE),
        _check_field("heading_deg", msg.heading_deg, *HEADING_RANGE, right_open=True),
    ]
    if not math.isfinite(msg.t) or msg.t < 0:
        checks.append(f"t={msg.t} must be finite and non-negative")
    return [c for c in checks if c is not None]


def parse_flight_csv(content: str, flight_id: str = "flight") -> FlightTrack:
    """Parse one flight CSV (header + >= 2 data rows) into a FlightTrack.

    Raises ParseError / ValidationError / OrderingError with the offending
    1-based file line in the message.
    """
    reader = csv.reader(io.StringIO(content))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: missing header") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(
            f"line 1: bad header {','.join(header)!r}, expected {','.join(CSV_HEADER)!r}"
        )

    messages: list[TrackMessage] = []
    prev_t: float | None = None
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # tolerate trailing blank line
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"line {line_no}: expected {len(CSV_HEADER)} columns, got {len(row)}")
        try:
            values = [float(cell) for cell in row]
        except ValueError as exc:
            raise ParseError(f"line {line_no}: {exc}") from None
        t, lat, lon, alt, speed, heading = values
        msg = TrackMessage(t, GeoPoint(lat, lon), alt, speed, heading)
        bad = _message_violations(msg)
        if bad:
            raise ValidationError(f"line {line_no}: {'; '.join(bad)}")
        if prev_t is not None and not t > prev_t:
            raise OrderingError(
                f"line {line_no}: timestamp t={t} not greater than previous t={prev_t}"
            )
        prev_t = t
        messages.append(msg)

    if len(messages) < 2:
        raise ParseError(f"need at least 2 data rows, got {len(messages)}")
    return FlightTrack(flight_id=flight_id, messages=tuple(messages))


def serialize_flight_csv(track: FlightTrack) -> str:
    """Render a track back to CSV. Lat/lon keep 6 decimals, other fields 1."""
    lines = [",".join(CSV_HEADER)]
    for m in track.messages:
        lines.append(
            f"{m.t:.1f},{m.pos.lat_deg:.6f},{m.pos.lon_deg:.6f},"
            f"{m.alt_ft:.1f},{m.speed_kt:.1f},{m.heading_deg:.1f}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str]


def validate_track(track: FlightTrack, min_len: int = 2) -> ValidationReport:
    """Collect every invariant violation in a track (violations are data,
    not failures, so nothing raises here)."""
    violations: list[str] = []
    if len(track) < min_len:
        violations.append(f"too short: {len(track)} messages, need at least {min_len}")
    prev_t: float | None = None
    for idx, msg in enumerate(track.messages):
        for v in _message_violations(msg):
            violations.append(f"message {idx}: {v}")
        if prev_t is not None and not msg.t > prev_t:
            violations.append(f"message {idx}: t={msg.t} not greater than previous t={prev_t}")
        prev_t = msg.t
    return ValidationReport(ok=not violations, violations=violations)


def load_dataset(directory: str | Path, min_len: int = 2) -> RouteDataset:
    """Load a route directory (manifest + one CSV per flight).

    All-or-nothing: any unreadable or invalid flight aborts the load, and the
    error names every offending file. Flight order is lexicographic by
    filename regardless of manifest order.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        route_id = manifest["route_id"]
        filenames = list(manifest["flights"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"bad manifest {manifest_path}: {exc}") from None

    if not filenames:
        raise DatasetError(f"no flights listed in {manifest_path}")

    flights: list[FlightTrack] = []
    failures: list[str] = []
    for name in sorted(filenames):
        path = directory / name
        if not path.is_file():
            failures.append(f"{name}: file not found")
            continue
        try:
            track = parse_flight_csv(path.read_text(encoding="utf-8"), flight_id=Path(name).stem)
        except FlightDataError as exc:
            failures.append(f"{name}: {exc}")
            continue
        report = validate_track(track, min_len=min_len)
        if not report.ok:
            failures.append(f"{name}: {'; '.join(report.violations)}")
            continue
        flights.append(track)

    if failures:
        raise DatasetError(f"{len(failures)} flight(s) failed to load: " + " | ".join(failures))
    if not flights:
        raise DatasetError(f"no flights loaded from {directory}")
    return RouteDataset(route_id=route_id, flights=tuple(flights))
