"""Independent checks of spectral claims through the first-order system dPsi/dz = A(z) Psi.

Local solutions come either from the series around z = -g or from direct
integration with an embedded Dormand-Prince 5(4) pair along straight
complex paths.  Matching is tested between Psi(z) and its reflection
Phi(z) = (phi_2(-z), phi_1(-z)) (four-component analogue for eps != 0).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import OutsideD0, PathTooCloseToSingularity, StepUnderflow
from .gfunctions import DiskDomain, signed
from .series import (
    N_MAX,
    ModelParams,
    coefficient_matrix,
    compute_K,
    compute_K_eps,
    reconstruct,
)

SERIES_TOL = 1e-18
PATH_CLEARANCE = 0.1       # minimal distance to +-g in units of g
START_OFFSET = 0.4         # series initial data at -g + 0.4 g
DP_ORDER = 5

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100,
                1 / 40])


@dataclass(frozen=True)
class VectorState:
    """Psi at the point z: (phi_1, phi_2) or (phi_1, phi_2, bar phi_1, bar phi_2)."""

    components: tuple
    z: complex

    def __post_init__(self):
        if not all(cmath.isfinite(c) for c in self.components):
            raise ValueError("non-finite component in VectorState")

    def array(self) -> np.ndarray:
        return np.array(self.components, dtype=complex)


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    t = ((p - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


def _rhs(params, x, z, y):
    return np.array(coefficient_matrix(params, x, z), dtype=complex) @ y


def _dp_step(params, x, z, y, h):
    k = []
    for i in range(7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k)) if i else y
        k.append(_rhs(params, x, z + _C[i] * h, yi))
    k = np.array(k)
    y5 = y + h * (_B5 @ k)
    err = h * ((_B5 - _B4) @ k)
    return y5, err


def integrate(params: ModelParams, x, start, end, init: VectorState, step_tol: float = 1e-10, *,
              fixed_steps: int | None = None, max_steps: int = 200_000) -> VectorState:
    """Integrate dPsi/dz = A(z) Psi on the straight segment from ``start`` to ``end``.

    Adaptive mode keeps the local error estimate of every accepted step below
    ``step_tol`` relative to max(1, |Psi|).  ``fixed_steps`` switches to
    equal steps without error control, which is what order checks need.
    """
    g = params.g
    start, end = complex(start), complex(end)
    for s in (g, -g):
        if _segment_distance(s, start, end) < PATH_CLEARANCE * g:
            raise PathTooCloseToSingularity(
                f"path {start} -> {end} passes within {PATH_CLEARANCE}g of z={s:g}")
    y = init.array()
    if len(y) != (2 if params.symmetric else 4):
        raise ValueError("state dimension does not match the model")
    if abs(complex(init.z) - start) > 1e-14 * max(1.0, abs(start)):
        raise ValueError("initial state is not located at the path start")
    span = end - start
    if span == 0:
        return VectorState(tuple(complex(v) for v in y), end)

    if fixed_steps is not None:
        h = span / fixed_steps
        z = start
        for i in range(fixed_steps):
            y, _ = _dp_step(params, x, z, y, h)
            z = start + (i + 1) * h
        return VectorState(tuple(complex(v) for v in y), end)

    length = abs(span)
    unit = span / length
    s, ds = 0.0, min(length, 0.1 * g)
    for _ in range(max_steps):
        if s >= length:
            break
        ds = min(ds, length - s)
        y_new, err = _dp_step(params, x, start + s * unit, y, ds * unit)
        scale = max(1.0, float(np.max(np.abs(y))))
        ratio = float(np.max(np.abs(err))) / (step_tol * scale)
        if ratio <= 1.0:
            s += ds
            y = y_new
        factor = 0.9 * ratio ** (-1 / DP_ORDER) if ratio > 0 else 5.0
        ds *= min(5.0, max(0.2, factor))
        if ds < 1e-14 * length and s < length:
            raise StepUnderflow(f"step size underflow at z={start + s * unit}")
    else:
        raise StepUnderflow(f"more than {max_steps} steps between {start} and {end}")
    return VectorState(tuple(complex(v) for v in y), end)


def _series(params, x, radius):
    if params.symmetric:
        return compute_K(params, x, SERIES_TOL, N_MAX, scale=params.g, radius=radius)
    return (compute_K_eps(params, x, "+", SERIES_TOL, N_MAX, scale=params.g, radius=radius),
            compute_K_eps(params, x, "-", SERIES_TOL, N_MAX, scale=params.g, radius=radius))


def series_state(params: ModelParams, x, z, parity: str = "+", c: complex = 1.0) -> VectorState:
    """Psi(z) from the series around -g; ``parity`` flips Delta, ``c`` scales the K^+ pair."""
    g = params.g
    z = complex(z)
    radius = abs(z + g)
    if not radius < 2 * g:
        raise OutsideD0(f"z={z} lies outside the convergence disk around -g")
    if params.symmetric:
        p = signed(params, parity)
        psi, _ = reconstruct(p, _series(p, x, max(radius, g)), z)
        return VectorState(tuple(psi), z)
    psi, _ = reconstruct(params, _series(params, x, max(radius, g)), z)
    return VectorState((psi[0], c * psi[1], c * psi[2], psi[3]), z)


def _require_d0(g, z0):
    if complex(z0) not in DiskDomain(g):
        raise OutsideD0(f"z0={z0} is outside D0 = D1 & D2")


def check_conditions(params: ModelParams, x, z0, parity: str = "+") -> tuple[float, float]:
    """Normalized residuals of phi_1(z0) = phi_2(-z0) and phi_2(z0) = phi_1(-z0).

    Each residual is divided by the larger magnitude of the two sides.  At
    z0 = 0 both conditions coincide and so do the returned values.
    """
    g = params.g
    if not params.symmetric:
        raise ValueError("use eps_conditions for eps != 0")
    _require_d0(g, z0)
    z0 = complex(z0)
    p1, p2 = series_state(params, x, z0, parity).components
    m1, m2 = series_state(params, x, -z0, parity).components
    res_a = abs(p1 - m2) / max(abs(p1), abs(m2), 1e-300)
    res_b = abs(p2 - m1) / max(abs(p2), abs(m1), 1e-300)
    return res_a, res_b


def d0_grid(g: float, n: int = 25, fraction: float = 0.6) -> list[complex]:
    """Origin plus rings of radius up to ``fraction``*g, all inside D0."""
    if n < 1:
        raise ValueError("n must be positive")
    pts = [0j]
    rest = n - 1
    rings = 3 if rest >= 3 else max(rest, 1)
    for i in range(rings):
        count = rest // rings + (1 if i < rest % rings else 0)
        r = fraction * g * (i + 1) / rings
        for j in range(count):
            ang = 2 * math.pi * j / count + 0.4 * i
            pts.append(r * cmath.exp(1j * ang))
    return pts[:n]


def theorem_check(params: ModelParams, x_star, grid=None, parity: str = "+", *,
                  method: str = "series", step_tol: float = 1e-12) -> float:
    """max over the grid of |Psi(z) - Phi(z)| / |Psi(z)| with Phi(z) = (phi_2(-z), phi_1(-z)).

    ``method="integrate"`` propagates the series data from -g + 0.4 g to each
    grid point with the integrator instead of summing the series there.
    """
    g = params.g
    if not params.symmetric:
        raise ValueError("theorem_check covers the parity-symmetric model")
    grid = d0_grid(g) if grid is None else list(grid)
    for z in grid:
        _require_d0(g, z)
    p = signed(params, parity)
    start = -g + START_OFFSET * g
    init = series_state(params, x_star, start, parity) if method == "integrate" else None

    def psi(z):
        if method == "series":
            return series_state(params, x_star, z, parity).array()
        if method == "integrate":
            return integrate(p, x_star, start, z, init, step_tol).array()
        raise ValueError("method must be 'series' or 'integrate'")

    worst = 0.0
    for z in grid:
        a = psi(complex(z))
        b = psi(-complex(z))
        phi = np.array([b[1], b[0]])
        worst = max(worst, float(np.linalg.norm(a - phi) / max(np.linalg.norm(a), 1e-300)))
    return worst


@dataclass(frozen=True)
class EpsConditionReport:
    """Residuals of the four matching equations and the two estimates of c."""

    residuals: tuple
    c_a: complex
    c_b: complex

    @property
    def c_mismatch(self) -> float:
        return abs(self.c_a - self.c_b) / max(abs(self.c_a), abs(self.c_b), 1e-300)


def eps_conditions(params: ModelParams, x, z0=0.0) -> EpsConditionReport:
    """Four-component matching Psi(z0) = Phi(z0) for eps != 0.

    c is fixed from the first equation and, independently, from the second;
    the residuals use the first estimate.
    """
    g = params.g
    _require_d0(g, z0)
    z0 = complex(z0)
    u = series_state(params, x, z0).components      # c = 1
    v = series_state(params, x, -z0).components
    # Psi = (phi1, c q1, c q2, phi2bar); Phi(z0) = Psi(-z0) permuted as (3, 4, 1, 2)
    c_a = u[0] / v[2]
    c_b = v[3] / u[1]
    c = c_a
    lhs = (u[0], c * u[1], c * u[2], u[3])
    rhs = (c * v[2], v[3], v[0], c * v[1])
    res = tuple(abs(a - b) / max(abs(a), abs(b), 1e-300) for a, b in zip(lhs, rhs))
    return EpsConditionReport(residuals=res, c_a=c_a, c_b=c_b)


__all__ = [
    "EpsConditionReport", "VectorState", "check_conditions", "d0_grid", "eps_conditions",
    "integrate", "series_state", "theorem_check",
]
