"""Power-series coefficients K_n of the local solutions around z = -g.

Writing phi_2(z) = exp(-g z) sum K_n (z+g)^n and
phi_1(z) = exp(-g z) sum Delta K_n (z+g)^n / (x-n), the first equation of the
coupled system is satisfied identically and the second one gives

    (n+1) K_{n+1} = f_n(x) K_n - K_{n-1},
    f_n(x) = 2g + (n - x + Delta**2 / (x - n)) / (2g),

with K_0 = 1 and K_{-1} = 0.  The broken-symmetry model decouples into two
systems of the same shape; with a = x -/+ eps and b = x +/- eps the
coefficients K^+ and K^- obey

    f_n = 2g + (n - a + Delta**2 / (b - n)) / (2g),

and b is the variable whose integer values are the poles.

Coefficients are produced in scaled form C_n = K_n * w**n for a caller-chosen
scale w.  The G-functions evaluate sums of K_n (g -/+ z)**n, and running the
recurrence directly on the scaled sequence keeps every intermediate finite
even when |w|**n alone would overflow.
"""

from __future__ import annotations

import cmath
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import mpmath

from .errors import GridOutsideDomain, NoConvergence, PoleProximity

DELTA_POLE = 1e-4
N_MAX = 500
TAIL_WINDOW = 5
TOL_TAIL = 1e-16
EXTENDED_DPS = 40

UNIT_ROUNDOFF = 2.0**-53


@dataclass(frozen=True)
class ModelParams:
    """Couplings of H = a^+a + g sx (a + a^+) + eps sx + Delta sz (omega = 1)."""

    g: float
    delta: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"coupling g must be positive, got {self.g!r}")
        for name in ("g", "delta", "epsilon"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def symmetric(self) -> bool:
        return self.epsilon == 0

    def energy(self, x):
        """E = x - g^2."""
        return x - self.g * self.g

    def spectral(self, energy):
        """x = E + g^2."""
        return energy + self.g * self.g

    def with_delta(self, delta: float) -> "ModelParams":
        return replace(self, delta=delta)


@dataclass(frozen=True)
class SeriesExpansion:
    """Truncated coefficient sequence C_n = K_n * scale**n, n = 0..order.

    ``branch`` is ``"0"`` for the symmetric model and ``"+"``/``"-"`` for
    K^+/K^- of the broken-symmetry model; ``pole_at`` is the variable b whose
    integer values are poles (b = x for the symmetric model).  ``rounding``
    holds running absolute error bounds on each C_n.
    """

    coeffs: tuple
    order: int
    tail_bound: float
    converged: bool
    x: complex
    scale: complex = 1.0
    branch: str = "0"
    pole_at: complex = 0.0
    delta: float = 0.0
    rounding: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, n):
        return self.coeffs[n]

    def pole_coeffs(self) -> list:
        """Delta * C_n / (b - n), the coefficients of the phi_1-type series."""
        d, b = self.delta, self.pole_at
        return [d * c / (b - n) for n, c in enumerate(self.coeffs)]


@contextmanager
def precision(dps: int | None):
    """Arithmetic context: plain doubles for ``dps=None``, mpmath otherwise."""
    if dps is None:
        yield None
    else:
        with mpmath.workdps(dps):
            yield mpmath.mp


def unit_roundoff(dps: int | None) -> float:
    return UNIT_ROUNDOFF if dps is None else 10.0 ** (1 - dps)


def _lift(value, dps):
    if dps is None:
        return value
    if isinstance(value, complex):
        return mpmath.mpc(value)
    return mpmath.mpf(value) if not isinstance(value, (mpmath.mpf, mpmath.mpc)) else value


def pole_distance(b, n_hi: int = N_MAX) -> float:
    """Distance from b to the nearest integer in [0, n_hi]."""
    b = complex(b)
    m = min(max(round(b.real), 0), n_hi)
    return abs(b - m)


def branch_variables(params: ModelParams, x, sign: str):
    """Return (a, b) entering f_n for the requested coefficient branch."""
    eps = params.epsilon
    if sign == "0":
        return x, x
    if sign == "+":
        return x - eps, x + eps
    if sign == "-":
        return x + eps, x - eps
    raise ValueError(f"unknown branch {sign!r}")


def iter_scaled(g, delta2, a, b, w, u: float = UNIT_ROUNDOFF) -> Iterator[tuple]:
    """Yield (C_n, err_n) with C_n = K_n w^n and err_n a running rounding bound.

    The bound propagates the absolute perturbation of each step through the
    recurrence in the worst case, so it grows wherever the forward recurrence
    amplifies rounding errors.
    """
    two_g = 2 * g
    w2 = w * w
    aw, aw2 = abs(w), abs(w2)
    c_prev, c = 0 * w, 1 + 0 * w
    e_prev, e = 0.0, 0.0
    n = 0
    yield c, e
    while True:
        f = two_g + (n - a + delta2 / (b - n)) / two_g
        fw = f * w
        c_new = (fw * c - w2 * c_prev) / (n + 1)
        afw = float(abs(fw))
        e_new = (afw * e + aw2 * e_prev
                 + u * (4 * afw * float(abs(c)) + 2 * aw2 * float(abs(c_prev)))) / (n + 1) \
            + u * float(abs(c_new))
        c_prev, c = c, c_new
        e_prev, e = e, e_new
        n += 1
        yield c, e


def _expand(params, x, sign, tol_tail, n_max, scale, order, radius, dps, delta_pole):
    a, b = branch_variables(params, x, sign)
    dist = pole_distance(b, n_max)
    if dist < delta_pole:
        raise PoleProximity(
            f"pole variable {complex(b).real:.12g} lies within {delta_pole:g} of an integer")
    if tol_tail <= 0:
        raise ValueError("tol_tail must be positive")
    g, delta = params.g, params.delta
    r = g if radius is None else radius
    weight = 1.0 + abs(delta) / max(dist, 1e-300)
    u = unit_roundoff(dps)
    rho = r / (2 * g)

    with precision(dps):
        gg, d2 = _lift(g, dps), _lift(delta, dps) ** 2
        aa, bb = _lift(a, dps), _lift(b, dps)
        ratio = r / g

        coeffs, errs = [], []
        run = 0
        found = None
        window = []
        limit = n_max if order is None else order
        for n, (c, e) in enumerate(iter_scaled(gg, d2, aa, bb, gg, u)):
            coeffs.append(c)
            errs.append(e)
            term = float(abs(c)) * ratio**n * weight
            window.append(term)
            run = run + 1 if term < tol_tail else 0
            if order is None and run == TAIL_WINDOW:
                found = n
                break
            if n >= limit:
                break
        window = window[-TAIL_WINDOW:]
        if order is None:
            if found is None:
                raise NoConvergence(
                    f"tail criterion not met by n_max={n_max} at x={complex(x).real:.12g}")
            order = found
            converged = True
        else:
            converged = run >= TAIL_WINDOW
        tail = max(window) * (rho / (1 - rho) if rho < 1 else math.inf)

        w = g if scale is None else scale
        if w != g:
            coeffs, errs = [], []
            ww = _lift(w, dps)
            for n, (c, e) in enumerate(iter_scaled(gg, d2, aa, bb, ww, u)):
                coeffs.append(c)
                errs.append(e)
                if n >= order:
                    break
        else:
            coeffs, errs = coeffs[:order + 1], errs[:order + 1]

        if dps is None:
            coeffs = [c if isinstance(c, complex) else float(c) for c in coeffs]

    return SeriesExpansion(
        coeffs=tuple(coeffs), order=order, tail_bound=tail, converged=converged,
        x=x, scale=w, branch=sign, pole_at=_lift(b, dps), delta=delta,
        rounding=tuple(errs))


def compute_K(params: ModelParams, x, tol_tail: float = TOL_TAIL, n_max: int = N_MAX, *,
              scale=1.0, order: int | None = None, radius: float | None = None,
              dps: int | None = None, delta_pole: float = DELTA_POLE) -> SeriesExpansion:
    """Coefficients K_n(x) of the symmetric model.

    Truncation stops at the smallest N at which |K_n r^n| (1 + |Delta|/dist(x, N))
    stays below ``tol_tail`` for five consecutive n, with r = ``radius``
    (default g, the distance from the expansion point to z = 0).  Passing
    ``order`` fixes the truncation instead.  ``params.epsilon`` is ignored.
    """
    return _expand(params, x, "0", tol_tail, n_max, scale, order, radius, dps, delta_pole)


def compute_K_eps(params: ModelParams, x, sign: str, tol_tail: float = TOL_TAIL,
                  n_max: int = N_MAX, *, scale=1.0, order: int | None = None,
                  radius: float | None = None, dps: int | None = None,
                  delta_pole: float = DELTA_POLE) -> SeriesExpansion:
    """Coefficients K^+ (``sign="+"``) or K^- (``sign="-"``) of the broken-symmetry model.

    K^+ has poles at x = n - eps, K^- at x = n + eps.  At eps = 0 both
    coincide with :func:`compute_K` term by term.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    return _expand(params, x, sign, tol_tail, n_max, scale, order, radius, dps, delta_pole)


def _horner(coeffs: Sequence[complex], t: complex) -> tuple[complex, complex]:
    """Value and derivative (in t) of sum c_n t^n."""
    p, dp = 0j, 0j
    for c in reversed(coeffs):
        dp = dp * t + p
        p = p * t + c
    return p, dp


def local_solution(series: SeriesExpansion, g: float, z) -> tuple[complex, complex, complex, complex]:
    """(phi_1-type, d/dz, phi_2-type, d/dz) at z from one coefficient branch.

    The phi_2-type function is exp(-g z) sum K_n (z+g)^n and the phi_1-type one
    is exp(-g z) sum Delta K_n (z+g)^n / (b-n).
    """
    z = complex(z)
    w = complex(series.scale)
    t = (z + g) / w
    plain = [complex(c) for c in series.coeffs]
    poles = [complex(c) for c in series.pole_coeffs()]
    u, du = _horner(plain, t)
    v, dv = _horner(poles, t)
    du, dv = du / w, dv / w
    ex = cmath.exp(-g * z)
    return ex * v, ex * (dv - g * v), ex * u, ex * (du - g * u)


def coefficient_matrix(params: ModelParams, x, z) -> list[list[complex]]:
    """A(z) of dPsi/dz = A(z) Psi; 2x2 for eps = 0, else the 4x4 embedding."""
    g, d, eps = params.g, params.delta, params.epsilon
    E = complex(x) - g * g
    z = complex(z)
    zp, zm = z + g, z - g
    if params.symmetric:
        return [[(E - g * z) / zp, -d / zp],
                [-d / zm, (E + g * z) / zm]]
    return [[(E - eps - g * z) / zp, 0, 0, -d / zp],
            [0, (E + eps - g * z) / zp, -d / zp, 0],
            [0, -d / zm, (E - eps + g * z) / zm, 0],
            [-d / zm, 0, 0, (E + eps + g * z) / zm]]


def reconstruct(params: ModelParams, series, z) -> tuple[list[complex], list[complex]]:
    """Psi(z) and Psi'(z) from a series (or a (K^+, K^-) pair for eps != 0).

    Four-vector ordering is (phi_1, phi_2, bar phi_1, bar phi_2), with
    phi_1, bar phi_2 built from K^- and phi_2, bar phi_1 from K^+ (c = 1).
    """
    g = params.g
    if isinstance(series, SeriesExpansion):
        p1, dp1, p2, dp2 = local_solution(series, g, z)
        return [p1, p2], [dp1, dp2]
    kp, km = series
    m1, dm1, m2, dm2 = local_solution(km, g, z)
    q1, dq1, q2, dq2 = local_solution(kp, g, z)
    return [m1, q1, q2, m2], [dm1, dq1, dq2, dm2]


def ode_residual(params: ModelParams, x, series, z_grid) -> float:
    """Max over ``z_grid`` of |Psi' - A Psi| / |Psi| for the reconstructed series.

    Every grid point must lie strictly inside D_1 = {|z+g| < 2g} and away
    from the singular points z = +-g.
    """
    g = params.g
    worst = 0.0
    for z in z_grid:
        z = complex(z)
        if not abs(z + g) < 2 * g:
            raise GridOutsideDomain(f"z={z} is outside the convergence disk D1")
        if abs(z + g) < 1e-8 * g or abs(z - g) < 1e-8 * g:
            raise GridOutsideDomain(f"z={z} coincides with a singular point")
        psi, dpsi = reconstruct(params, series, z)
        A = coefficient_matrix(params, x, z)
        res = [dpsi[i] - sum(A[i][j] * psi[j] for j in range(len(psi)))
               for i in range(len(psi))]
        num = math.sqrt(sum(abs(r) ** 2 for r in res))
        den = math.sqrt(sum(abs(p) ** 2 for p in psi))
        worst = max(worst, num / den)
    return worst


def disk_grid(g: float, n: int = 20, fraction: float = 0.8) -> list[complex]:
    """``n`` points spread over D_1, on rings of radius up to ``fraction``*2g around -g."""
    pts = []
    rings = (0.35, 0.65, 1.0)
    per = max(1, n // len(rings))
    for i, rr in enumerate(rings):
        count = per if i < len(rings) - 1 else n - per * (len(rings) - 1)
        for j in range(count):
            ang = 2 * math.pi * (j + 0.5 * i) / count + 0.3
            pts.append(-g + rr * fraction * 2 * g * complex(math.cos(ang), math.sin(ang)))
    return pts
