"""Geodesic distances and route geometry.

Distances use the inverse Vincenty iteration on the WGS-84 ellipsoid.
A route's geometry is summarized by its average path (per-ordinal mean of
previous flights, resampled to a fixed number of progress samples) and four
reference points spread along that path; per-message distances to those
points encode flight progress for the feature extractor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .track_model import FlightTrack, GeoPoint, as_arrays


@dataclass(frozen=True)
class Ellipsoid:
    semi_major_m: float
    flattening: float

    def __post_init__(self) -> None:
        if not self.semi_major_m > 0:
            raise ValueError("semi-major axis must be positive")
        if not 0 < self.flattening < 1:
            raise ValueError("flattening must be in (0, 1)")

    @property
    def semi_minor_m(self) -> float:
        return self.semi_major_m * (1.0 - self.flattening)


WGS84 = Ellipsoid(semi_major_m=6378137.0, flattening=1.0 / 298.257223563)

VINCENTY_TOL = 1e-12
VINCENTY_MAX_ITER = 200

DEFAULT_MAJOR_FRACTIONS = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
DEFAULT_PATH_SAMPLES = 500


@dataclass(frozen=True)
class GeodesicResult:
    """Distance in meters plus a convergence flag. When the Vincenty
    iteration fails (near-antipodal pairs) the distance falls back to
    haversine and ``converged`` is False."""

    distance_m: float
    converged: bool


def haversine_m(p1: GeoPoint, p2: GeoPoint, ellipsoid: Ellipsoid = WGS84) -> float:
    """Spherical great-circle distance using the ellipsoid's mean radius."""
    radius = (2.0 * ellipsoid.semi_major_m + ellipsoid.semi_minor_m) / 3.0
    lat1, lon1, lat2, lon2 = map(np.radians, (p1.lat_deg, p1.lon_deg, p2.lat_deg, p2.lon_deg))
    s = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return float(2.0 * radius * np.arcsin(np.sqrt(s)))


def _vincenty_arrays(
    lat1: np.ndarray,
    lon1: np.ndarray,
    lat2: np.ndarray,
    lon2: np.ndarray,
    ellipsoid: Ellipsoid,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse Vincenty. Returns (distance_m, converged)."""
    a = ellipsoid.semi_major_m
    f = ellipsoid.flattening
    b = ellipsoid.semi_minor_m

    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    u1 = np.arctan((1.0 - f) * np.tan(phi1))
    u2 = np.arctan((1.0 - f) * np.tan(phi2))
    ell = np.radians(lon2 - lon1)

    sin_u1, cos_u1 = np.sin(u1), np.cos(u1)
    sin_u2, cos_u2 = np.sin(u2), np.cos(u2)

    lam = ell.copy()
    converged = np.zeros(lam.shape, dtype=bool)
    sin_sigma = np.zeros_like(lam)
    cos_sigma = np.ones_like(lam)
    sigma = np.zeros_like(lam)
    cos_sq_alpha = np.ones_like(lam)
    cos_2sigma_m = np.zeros_like(lam)

    for _ in range(max_iter):
        sin_lam, cos_lam = np.sin(lam), np.cos(lam)
        sin_sigma = np.sqrt(
            (cos_u2 * sin_lam) ** 2 + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam) ** 2
        )
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = np.arctan2(sin_sigma, cos_sigma)
        # Coincident points make sin_sigma zero; sin_alpha is irrelevant there.
        safe_sin_sigma = np.where(sin_sigma == 0.0, 1.0, sin_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / safe_sin_sigma
        cos_sq_alpha = 1.0 - sin_alpha**2
        # Equatorial geodesics have cos_sq_alpha == 0; C vanishes with it.
        safe_cos_sq = np.where(cos_sq_alpha == 0.0, 1.0, cos_sq_alpha)
        cos_2sigma_m = np.where(
            cos_sq_alpha == 0.0, 0.0, cos_sigma - 2.0 * sin_u1 * sin_u2 / safe_cos_sq
        )
        c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha))
        lam_prev = lam
        lam = ell + (1.0 - c) * f * sin_alpha * (
            sigma
            + c * sin_sigma * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2))
        )
        converged = converged | (np.abs(lam - lam_prev) < tol)
        if np.all(converged):
            break

    u_sq = cos_sq_alpha * (a**2 - b**2) / b**2
    big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)))
    big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
    delta_sigma = big_b * sin_sigma * (
        cos_2sigma_m
        + big_b
        / 4.0
        * (
            cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2)
            - big_b
            / 6.0
            * cos_2sigma_m
            * (-3.0 + 4.0 * sin_sigma**2)
            * (-3.0 + 4.0 * cos_2sigma_m**2)
        )
    )
    distance = b * big_a * (sigma - delta_sigma)
    # Exactly coincident inputs short-circuit to zero.
    coincident = (lat1 == lat2) & (lon1 == lon2)
    distance = np.where(coincident, 0.0, distance)
    converged = converged | coincident
    return distance, converged


def vincenty_inverse(
    p1: GeoPoint,
    p2: GeoPoint,
    ellipsoid: Ellipsoid = WGS84,
    tol: float = VINCENTY_TOL,
    max_iter: int = VINCENTY_MAX_ITER,
) -> GeodesicResult:
    """Geodesic distance between two points on the ellipsoid.

    Iterates the longitude-difference correction until it changes by less
    than ``tol``. Non-convergent (near-antipodal) pairs fall back to the
    haversine distance with ``converged=False``; routes in scope never get
    near that regime, so the fallback is a safety valve.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    dist, ok = _vincenty_arrays(
        np.asarray(p1.lat_deg, dtype=np.float64),
        np.asarray(p1.lon_deg, dtype=np.float64),
        np.asarray(p2.lat_deg, dtype=np.float64),
        np.asarray(p2.lon_deg, dtype=np.float64),
        ellipsoid,
        tol,
        max_iter,
    )
    if bool(ok):
        return GeodesicResult(distance_m=float(dist), converged=True)
    return GeodesicResult(distance_m=haversine_m(p1, p2, ellipsoid), converged=False)


def distances_to_point(
    lats: np.ndarray,
    lons: np.ndarray,
    point: GeoPoint,
    ellipsoid: Ellipsoid = WGS84,
    tol: float = VINCENTY_TOL,
    max_iter: int = VINCENTY_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray]:
    """Vincenty distances from many (lat, lon) samples to one fixed point.
    Returns (distances_m, converged_mask); non-convergent entries carry the
    haversine fallback."""
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    dist, ok = _vincenty_arrays(
        lats,
        lons,
        np.full_like(lats, point.lat_deg),
        np.full_like(lons, point.lon_deg),
        ellipsoid,
        tol,
        max_iter,
    )
    if not np.all(ok):
        for i in np.flatnonzero(~ok):
            dist[i] = haversine_m(GeoPoint(float(lats[i]), float(lons[i])), point, ellipsoid)
    return dist, ok


@dataclass
class AveragePath:
    """Mean route path sampled at M uniform progress fractions k/(M-1),
    stored as an (M, 2) array of [lat_deg, lon_deg] rows."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != 2 or self.samples.shape[0] < 4:
            raise ValueError(f"average path needs shape (M>=4, 2), got {self.samples.shape}")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def point(self, index: int) -> GeoPoint:
        lat, lon = self.samples[index]
        return GeoPoint(float(lat), float(lon))


@dataclass
class RouteProfile:
    route_id: str
    major_points: tuple[GeoPoint, GeoPoint, GeoPoint, GeoPoint]
    avg_path: AveragePath
    major_fractions: tuple[float, ...] = field(default=DEFAULT_MAJOR_FRACTIONS)

    def __post_init__(self) -> None:
        if len(self.major_points) != 4:
            raise ValueError("a route profile carries exactly 4 major points")


def _unwrap_deg(lon: np.ndarray) -> np.ndarray:
    return np.degrees(np.unwrap(np.radians(lon)))


def average_path(flights: list[FlightTrack] | tuple[FlightTrack, ...], samples: int = DEFAULT_PATH_SAMPLES) -> AveragePath:
    """Per-ordinal mean path of a route.

    Each flight is resampled to ``samples`` points by linear interpolation in
    normalized message progress, then lat/lon are averaged arithmetically
    across flights. Longitudes are unwrapped per flight and aligned across
    flights so antimeridian-crossing routes average continuously.
    """
    if len(flights) < 2:
        raise ValueError(f"average path needs at least 2 flights, got {len(flights)}")
    if samples < 4:
        raise ValueError("samples must be at least 4")
    progress = np.linspace(0.0, 1.0, samples)
    lat_acc = np.zeros(samples)
    lon_acc = np.zeros(samples)
    ref_lon: float | None = None
    for flight in flights:
        arr = as_arrays(flight)
        n = len(flight)
        own = np.arange(n) / (n - 1)
        lon_unwrapped = _unwrap_deg(arr.lon)
        if ref_lon is None:
            ref_lon = float(lon_unwrapped[0])
        else:
            # Align whole-turn offsets between flights before averaging.
            lon_unwrapped = lon_unwrapped - 360.0 * round((lon_unwrapped[0] - ref_lon) / 360.0)
        lat_acc += np.interp(progress, own, arr.lat)
        lon_acc += np.interp(progress, own, lon_unwrapped)
    lat_mean = lat_acc / len(flights)
    lon_mean = lon_acc / len(flights)
    lon_mean = (lon_mean + 180.0) % 360.0 - 180.0
    return AveragePath(samples=np.column_stack([lat_mean, lon_mean]))


def major_points(
    avg_path: AveragePath, fractions: tuple[float, ...] = DEFAULT_MAJOR_FRACTIONS
) -> tuple[GeoPoint, ...]:
    """Reference points at the given progress fractions (nearest sample)."""
    m = len(avg_path)
    points = []
    for frac in fractions:
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"fraction {frac} outside [0, 1]")
        idx = int(round(frac * (m - 1)))
        points.append(avg_path.point(idx))
    return tuple(points)


def build_route_profile(
    flights: list[FlightTrack] | tuple[FlightTrack, ...],
    route_id: str,
    samples: int = DEFAULT_PATH_SAMPLES,
    fractions: tuple[float, ...] = DEFAULT_MAJOR_FRACTIONS,
) -> RouteProfile:
    path = average_path(flights, samples=samples)
    pts = major_points(path, fractions=fractions)
    return RouteProfile(route_id=route_id, major_points=pts, avg_path=path, major_fractions=tuple(fractions))
