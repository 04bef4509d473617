"""Independent geodesic-distance oracle for validating the Vincenty solver.

Deliberately shares no code or method with the implementation under test:
instead of Vincenty's series iteration, it integrates the geodesic ODE on
the WGS-84 ellipsoid of revolution with a high-order adaptive Runge-Kutta
scheme and solves the two-point problem by shooting on the initial azimuth
and the arc length. With the tolerances below the returned distance is good
to well under a millimeter for the non-antipodal pairs used in the tests.

State along the geodesic, parameterized by arc length s:
    dphi/ds    = cos(alpha) / M(phi)
    dlambda/ds = sin(alpha) / (N(phi) cos(phi))
    dalpha/ds  = sin(alpha) tan(phi) / N(phi)
where M and N are the meridional and prime-vertical radii of curvature.

Run as a script to regenerate the frozen case file used by the test suite:
    python tests/geodesic_oracle.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve

A = 6378137.0
F = 1.0 / 298.257223563
E2 = F * (2.0 - F)

CASES_PATH = Path(__file__).parent / "data" / "geodesic_cases.json"


def _ode(_s: float, y: np.ndarray) -> list[float]:
    phi, _lam, alpha = y
    sin_phi = math.sin(phi)
    w2 = 1.0 - E2 * sin_phi * sin_phi
    n = A / math.sqrt(w2)
    m = A * (1.0 - E2) / w2**1.5
    return [
        math.cos(alpha) / m,
        math.sin(alpha) / (n * math.cos(phi)),
        math.sin(alpha) * math.tan(phi) / n,
    ]


def _shoot(lat1: float, lon1: float, alpha0: float, length: float) -> tuple[float, float]:
    """Integrate the geodesic from the start point; return final (phi, lam)."""
    sol = solve_ivp(
        _ode,
        (0.0, length),
        [math.radians(lat1), math.radians(lon1), alpha0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-13,
        dense_output=False,
    )
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def _spherical_guess(lat1: float, lon1: float, lat2: float, lon2: float) -> tuple[float, float]:
    """Great-circle azimuth and distance as the shooting starting point."""
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    dl = l2 - l1
    y = math.sin(dl) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    azimuth = math.atan2(y, x)
    central = 2.0 * math.asin(
        math.sqrt(
            math.sin((p2 - p1) / 2.0) ** 2
            + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
        )
    )
    return azimuth, central * A * (1.0 - F / 2.0)


def oracle_distance_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Geodesic distance via ODE shooting. Coincident points return 0."""
    if lat1 == lat2 and lon1 == lon2:
        return 0.0
    target_phi = math.radians(lat2)
    target_lam = math.radians(lon2)
    alpha_guess, s_guess = _spherical_guess(lat1, lon1, lat2, lon2)

    def residual(unknowns: np.ndarray) -> list[float]:
        alpha0, length = unknowns
        phi, lam = _shoot(lat1, lon1, alpha0, length)
        dlam = (lam - target_lam + math.pi) % (2.0 * math.pi) - math.pi
        return [phi - target_phi, dlam]

    solution, _info, status, message = fsolve(
        residual, [alpha_guess, s_guess], full_output=True, xtol=1e-13
    )
    if status != 1:
        raise RuntimeError(f"geodesic shooting failed to converge: {message}")
    return float(abs(solution[1]))


def random_pairs(count: int, seed: int) -> list[tuple[float, float, float, float]]:
    """Non-antipodal random pairs: central angle capped at 150 degrees,
    latitudes capped at 80 degrees to stay inside well-conditioned territory."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        lat1, lat2 = rng.uniform(-80.0, 80.0, size=2)
        lon1, lon2 = rng.uniform(-180.0, 180.0, size=2)
        p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
        cos_central = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(l2 - l1)
        if math.degrees(math.acos(max(-1.0, min(1.0, cos_central)))) < 150.0:
            pairs.append((float(lat1), float(lon1), float(lat2), float(lon2)))
    return pairs


FIXED_PAIR = (51.4700, -0.4543, 32.0055, 34.8854)


def main() -> None:
    cases = []
    fixed = {
        "pair": list(FIXED_PAIR),
        "distance_m": oracle_distance_m(*FIXED_PAIR),
        "tag": "fixed-example",
    }
    cases.append(fixed)
    for pair in random_pairs(100, seed=20260810):
        cases.append({"pair": list(pair), "distance_m": oracle_distance_m(*pair), "tag": "random"})
    CASES_PATH.parent.mkdir(parents=True, exist_ok=True)
    CASES_PATH.write_text(json.dumps(cases, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} oracle cases to {CASES_PATH}")


if __name__ == "__main__":
    main()
