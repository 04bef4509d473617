"""Attack injectors and ground-truth window labeling.

Three anomaly generators operate on a contiguous message span of a benign
flight: multiplicative random noise on every broadcast attribute, segment
replacement from a donor flight on another route, and a gradual altitude
drift that grows by a fixed step per message. Injection never touches
messages outside the span and never alters timestamps, so flight length and
ordering are preserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .track_model import (
    ALT_RANGE,
    LAT_RANGE,
    LON_RANGE,
    SPEED_RANGE,
    FlightTrack,
    as_arrays,
    from_arrays,
)

DEFAULT_SPAN = (180, 250)
DEFAULT_DRIFT_STEP_FT = 400.0
DEFAULT_NOISE_RANGE = (0.0, 2.0)


class AttackKind(str, Enum):
    RND = "rnd"
    ROUTE = "route"
    SHIFT_UP = "shift-up"
    SHIFT_DOWN = "shift-down"


@dataclass(frozen=True)
class AttackSpan:
    """Inclusive message-index range under attack. The default [180, 250]
    covers 71 messages."""

    start: int = DEFAULT_SPAN[0]
    end: int = DEFAULT_SPAN[1]

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def check_within(self, flight_len: int) -> None:
        if self.end >= flight_len:
            raise ValueError(
                f"span [{self.start}, {self.end}] does not fit a flight of {flight_len} messages"
            )


def inject_random_noise(
    track: FlightTrack,
    span: AttackSpan,
    seed: int,
    noise_range: tuple[float, float] = DEFAULT_NOISE_RANGE,
    per_attribute: bool = True,
) -> FlightTrack:
    """Multiply each in-span attribute by an independent uniform draw.

    Draws cover [low, high) per attribute per message (or one draw per
    message with ``per_attribute=False``). Results are clamped back into
    field bounds, with heading wrapped mod 360; timestamps are untouched.
    """
    span.check_within(len(track))
    arr = as_arrays(track)
    lat, lon, alt = arr.lat.copy(), arr.lon.copy(), arr.alt_ft.copy()
    speed, heading = arr.speed_kt.copy(), arr.heading_deg.copy()

    rng = np.random.default_rng(seed)
    n = len(span)
    low, high = noise_range
    if per_attribute:
        mult = rng.uniform(low, high, size=(n, 5))
    else:
        mult = np.repeat(rng.uniform(low, high, size=(n, 1)), 5, axis=1)

    sl = slice(span.start, span.end + 1)
    lat[sl] = np.clip(lat[sl] * mult[:, 0], *LAT_RANGE)
    lon[sl] = np.clip(lon[sl] * mult[:, 1], *LON_RANGE)
    alt[sl] = np.clip(alt[sl] * mult[:, 2], *ALT_RANGE)
    speed[sl] = np.clip(speed[sl] * mult[:, 3], *SPEED_RANGE)
    heading[sl] = np.mod(heading[sl] * mult[:, 4], 360.0)
    return from_arrays(track.flight_id, arr.t, lat, lon, alt, speed, heading)


def inject_route_replacement(
    track: FlightTrack,
    donor: FlightTrack,
    span: AttackSpan,
    donor_offset: int | None = None,
) -> FlightTrack:
    """Replace the span's position/altitude/speed/heading with a donor
    segment (positionally aligned by default); original timestamps stay."""
    span.check_within(len(track))
    offset = span.start if donor_offset is None else donor_offset
    if offset < 0 or offset + len(span) > len(donor):
        raise ValueError(
            f"donor flight of {len(donor)} messages cannot supply {len(span)} "
            f"messages from offset {offset}"
        )
    arr = as_arrays(track)
    don = as_arrays(donor)
    lat, lon, alt = arr.lat.copy(), arr.lon.copy(), arr.alt_ft.copy()
    speed, heading = arr.speed_kt.copy(), arr.heading_deg.copy()
    sl = slice(span.start, span.end + 1)
    dl = slice(offset, offset + len(span))
    lat[sl], lon[sl], alt[sl] = don.lat[dl], don.lon[dl], don.alt_ft[dl]
    speed[sl], heading[sl] = don.speed_kt[dl], don.heading_deg[dl]
    return from_arrays(track.flight_id, arr.t, lat, lon, alt, speed, heading)


def inject_gradual_drift(
    track: FlightTrack,
    span: AttackSpan,
    direction: str,
    step_ft: float = DEFAULT_DRIFT_STEP_FT,
) -> FlightTrack:
    """Shift altitude by an increasing multiple of ``step_ft``: the k-th
    in-span message moves by k * step_ft, up or down. No clamping, so an
    up-then-down pair with the same step cancels exactly; validate_track
    reports any excursion past the altitude bounds."""
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    if step_ft < 0:
        raise ValueError("drift step must be non-negative")
    span.check_within(len(track))
    arr = as_arrays(track)
    alt = arr.alt_ft.copy()
    sign = 1.0 if direction == "up" else -1.0
    ks = np.arange(1, len(span) + 1, dtype=np.float64)
    alt[span.start : span.end + 1] += sign * step_ft * ks
    return from_arrays(track.flight_id, arr.t, arr.lat, arr.lon, alt, arr.speed_kt, arr.heading_deg)


def apply_attack(
    track: FlightTrack,
    kind: AttackKind,
    span: AttackSpan,
    seed: int = 0,
    donor: FlightTrack | None = None,
    donor_offset: int | None = None,
    step_ft: float = DEFAULT_DRIFT_STEP_FT,
    noise_range: tuple[float, float] = DEFAULT_NOISE_RANGE,
) -> FlightTrack:
    """Dispatch one of the attack generators."""
    if kind is AttackKind.RND:
        return inject_random_noise(track, span, seed=seed, noise_range=noise_range)
    if kind is AttackKind.ROUTE:
        if donor is None:
            raise ValueError("route replacement needs a donor flight")
        return inject_route_replacement(track, donor, span, donor_offset=donor_offset)
    if kind is AttackKind.SHIFT_UP:
        return inject_gradual_drift(track, span, "up", step_ft=step_ft)
    if kind is AttackKind.SHIFT_DOWN:
        return inject_gradual_drift(track, span, "down", step_ft=step_ft)
    raise ValueError(f"unknown attack kind {kind!r}")


def label_windows(flight_len: int, span: AttackSpan, window_len: int, stride: int = 1) -> list[bool]:
    """Ground truth per window: malicious iff the window overlaps the span
    (contains at least one spoofed message)."""
    if window_len < 2 or stride < 1 or flight_len < window_len:
        raise ValueError("labeling parameters must match make_windows preconditions")
    labels = []
    for start in range(0, flight_len - window_len + 1, stride):
        end = start + window_len - 1
        labels.append(not (end < span.start or start > span.end))
    return labels


def write_injection_manifest(
    path: str | Path,
    kind: AttackKind,
    span: AttackSpan,
    seed: int | None,
    params: dict,
) -> None:
    """Ground-truth sidecar for a modified flight CSV."""
    doc = {
        "kind": kind.value,
        "span": {"start": span.start, "end": span.end},
        "seed": seed,
        "params": params,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
