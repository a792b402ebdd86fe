"""G-functions whose real zeros are the regular spectrum.

* ``eval_G``          G_pm(x) = sum K_n (1 -/+ Delta/(x-n)) g^n
* ``eval_G_general``  G_pm(x; z) = phi_2(-z) - phi_1(z)
* ``eval_G_eps``      Delta^2 Rbar^+ Rbar^- - R^+ R^-  for the broken-symmetry model
* ``residue_at_pole`` numerical residue at x = n (or n -/+ eps)

Negative parity is positive parity with Delta -> -Delta.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath

from .errors import NoConvergence, SingularPoint
from .series import (
    DELTA_POLE,
    N_MAX,
    TAIL_WINDOW,
    TOL_TAIL,
    ModelParams,
    SeriesExpansion,
    compute_K,
    compute_K_eps,
    pole_distance,
    precision,
    unit_roundoff,
)

PARITIES = ("+", "-")


@dataclass(frozen=True)
class GEvaluation:
    value: complex
    x: float
    z: complex
    kind: str
    order_used: int
    converged: bool
    error_estimate: float = 0.0

    def __float__(self):
        return float(self.value.real if isinstance(self.value, complex) else self.value)


@dataclass(frozen=True)
class DiskDomain:
    """D_1 = |z+g| < 2g, D_2 = |z-g| < 2g and their intersection D_0."""

    g: float

    @property
    def radius(self) -> float:
        return 2 * self.g

    def in_d1(self, z) -> bool:
        return abs(complex(z) + self.g) < self.radius

    def in_d2(self, z) -> bool:
        return abs(complex(z) - self.g) < self.radius

    def __contains__(self, z) -> bool:
        return self.in_d1(z) and self.in_d2(z)


def signed(params: ModelParams, parity: str) -> ModelParams:
    if parity == "+":
        return params
    if parity == "-":
        return params.with_delta(-params.delta)
    raise ValueError(f"parity must be '+' or '-', got {parity!r}")


def _fsum(values, dps):
    if dps is not None:
        return mpmath.fsum(values)
    values = list(values)
    if any(isinstance(v, complex) for v in values):
        return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))
    return math.fsum(values)


def _abs_sum(values) -> float:
    return math.fsum(float(abs(v)) for v in values)


def _sum_error(series: SeriesExpansion, values, u) -> float:
    """Bound on the error of a sum over (possibly pole-weighted) coefficients."""
    rounding = series.rounding
    weights = [float(abs(v)) / max(float(abs(c)), 1e-300) for v, c in zip(values, series.coeffs)]
    prop = math.fsum(w * e for w, e in zip(weights, rounding))
    return prop + u * _abs_sum(values)


def _split(a: float):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_product(a: float, b: float):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dot_diff(a, b, c, d):
    """a*b - c*d without cancellation loss for doubles (Dekker products)."""
    if not all(isinstance(v, float) for v in (a, b, c, d)):
        return a * b - c * d
    p1, e1 = _two_product(a, b)
    p2, e2 = _two_product(c, d)
    return math.fsum((p1, e1, -p2, -e2))


def _entire_order(rho: float, tol: float) -> int:
    """Order at which rho^n / sqrt(n!) has fallen ``tol`` below its peak.

    Eigenfunctions in Bargmann space have Taylor coefficients bounded like
    1/sqrt(n!), so this bounds the order needed for the convergent part of a
    series evaluated at distance rho from its centre.
    """
    log_tol = math.log(tol)
    peak = -math.inf
    n = 0
    while True:
        val = n * math.log(rho) - 0.5 * math.lgamma(n + 1)
        peak = max(peak, val)
        if n > rho * rho and val < peak + log_tol:
            return n
        n += 1


def series_order(params: ModelParams, x, z=0.0, *, tol_tail: float = TOL_TAIL,
                 n_max: int = N_MAX, dps: int | None = None,
                 delta_pole: float = DELTA_POLE) -> int:
    """Truncation order used for G(x; z).

    At z = 0 this is the tail-criterion order.  Inside D_0 the tail criterion
    is applied at the larger of |g - z|, |g + z|.  Outside D_0 the series only
    converge at eigenvalues, and the order is raised until the entire part has
    settled.
    """
    g = params.g
    n0 = compute_K(params, x, tol_tail, n_max, scale=g, dps=dps, delta_pole=delta_pole).order
    z = complex(z)
    if z == 0:
        return n0
    rho = max(abs(g - z), abs(g + z))
    if rho < 2 * g:
        try:
            return max(n0, compute_K(params, x, tol_tail, n_max, scale=g, radius=rho, dps=dps,
                                     delta_pole=delta_pole).order)
        except NoConvergence:
            pass
    return min(n_max, max(n0, _entire_order(rho, tol_tail)))


def _tail_small(tol: float, *sequences) -> bool:
    return all(max(float(abs(v)) for v in seq[-TAIL_WINDOW:]) < tol for seq in sequences)


def _real_if_zero_imag(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def eval_G(params: ModelParams, parity: str, x: float, *, tol_tail: float = TOL_TAIL,
           n_max: int = N_MAX, order: int | None = None, dps: int | None = None,
           delta_pole: float = DELTA_POLE) -> GEvaluation:
    """G_+(x) or G_-(x) at real x, summed with compensated summation."""
    return eval_G_general(params, parity, x, 0.0, tol_tail=tol_tail, n_max=n_max,
                          order=order, dps=dps, delta_pole=delta_pole)


def eval_G_general(params: ModelParams, parity: str, x, z, *, tol_tail: float = TOL_TAIL,
                   n_max: int = N_MAX, order: int | None = None, dps: int | None = None,
                   delta_pole: float = DELTA_POLE) -> GEvaluation:
    """G_pm(x; z) = phi_2(-z) - phi_1(z) at a fixed truncation order.

    Outside D_0 the value is the partial sum at ``order`` and ``converged`` is
    False; its zeros in x still approach the eigenvalues as the order grows.
    """
    g = params.g
    z = _real_if_zero_imag(z)
    if abs(z - g) <= 1e-12 * g or abs(z + g) <= 1e-12 * g:
        raise SingularPoint(f"z={z} is a regular singular point of the system")
    p = signed(params, parity)
    u = unit_roundoff(dps)

    if z == 0:
        s = compute_K(p, x, tol_tail, n_max, scale=g, order=order, dps=dps,
                      delta_pole=delta_pole)
        with precision(dps):
            pole = s.pole_coeffs()
            value = _fsum(s.coeffs, dps) - _fsum(pole, dps)
        err = _sum_error(s, s.coeffs, u) + _sum_error(s, pole, u)
        if dps is not None:
            value = float(value) if not isinstance(value, mpmath.mpc) else complex(value)
        return GEvaluation(value=value, x=x, z=0.0, kind=parity, order_used=s.order,
                           converged=s.converged, error_estimate=err)

    if order is None:
        order = series_order(p, x, z, tol_tail=tol_tail, n_max=n_max, dps=dps,
                             delta_pole=delta_pole)
    s2 = compute_K(p, x, tol_tail, n_max, scale=g - z, order=order, dps=dps,
                   delta_pole=delta_pole)
    s1 = compute_K(p, x, tol_tail, n_max, scale=g + z, order=order, dps=dps,
                   delta_pole=delta_pole)
    with precision(dps):
        pole = s1.pole_coeffs()
    if dps is None:
        e_plus, e_minus = cmath.exp(g * z), cmath.exp(-g * z)
        if isinstance(z, float):
            e_plus, e_minus = math.exp(g * z), math.exp(-g * z)
        value = e_plus * _fsum(s2.coeffs, None) - e_minus * _fsum(pole, None)
    else:
        with mpmath.workdps(dps):
            zz = mpmath.mpf(z) if isinstance(z, float) else mpmath.mpc(z)
            val = mpmath.exp(g * zz) * mpmath.fsum(s2.coeffs) \
                - mpmath.exp(-g * zz) * mpmath.fsum(pole)
        value = complex(val) if isinstance(val, mpmath.mpc) else float(val)
    err = abs(cmath.exp(g * z)) * _sum_error(s2, s2.coeffs, u) \
        + abs(cmath.exp(-g * z)) * _sum_error(s1, pole, u)
    converged = complex(z) in DiskDomain(g) and _tail_small(tol_tail, s2.coeffs, pole)
    return GEvaluation(value=value, x=x, z=z, kind=parity, order_used=order,
                       converged=converged, error_estimate=err)


def eps_poles(params: ModelParams, x_lo: float, x_hi: float) -> list[float]:
    """Poles n - eps (K^+ branch) and n + eps (K^- branch) inside [x_lo, x_hi]."""
    eps = params.epsilon
    out = set()
    for n in range(0, int(math.floor(x_hi + abs(eps))) + 2):
        for p in (n - eps, n + eps):
            if x_lo <= p <= x_hi:
                out.add(p)
    return sorted(out)


def eval_G_eps(params: ModelParams, x: float, *, tol_tail: float = TOL_TAIL,
               n_max: int = N_MAX, order: int | None = None, dps: int | None = None,
               delta_pole: float = DELTA_POLE) -> GEvaluation:
    """G_eps(x) = Delta^2 Rbar^+(x) Rbar^-(x) - R^+(x) R^-(x)."""
    g = params.g
    u = unit_roundoff(dps)
    kp = compute_K_eps(params, x, "+", tol_tail, n_max, scale=g, order=order, dps=dps,
                       delta_pole=delta_pole)
    km = compute_K_eps(params, x, "-", tol_tail, n_max, scale=g, order=order, dps=dps,
                       delta_pole=delta_pole)
    with precision(dps):
        pp, pm = kp.pole_coeffs(), km.pole_coeffs()
        r_plus, r_minus = _fsum(kp.coeffs, dps), _fsum(km.coeffs, dps)
        rb_plus, rb_minus = _fsum(pp, dps), _fsum(pm, dps)  # these carry a factor Delta
    if dps is None:
        value = _dot_diff(rb_plus, rb_minus, r_plus, r_minus)
    else:
        with mpmath.workdps(dps):
            value = float(rb_plus * rb_minus - r_plus * r_minus)
    e_rp, e_rm = _sum_error(kp, kp.coeffs, u), _sum_error(km, km.coeffs, u)
    e_bp, e_bm = _sum_error(kp, pp, u), _sum_error(km, pm, u)
    err = (abs(rb_minus) * e_bp + abs(rb_plus) * e_bm
           + abs(r_minus) * e_rp + abs(r_plus) * e_rm)
    return GEvaluation(value=value, x=x, z=0.0, kind="eps",
                       order_used=max(kp.order, km.order),
                       converged=kp.converged and km.converged, error_estimate=float(err))


RESIDUE_STEPS = tuple(1e-2 * 2.0**-k for k in range(7))


def pole_location(params: ModelParams, branch: str, n: int) -> float:
    if branch in PARITIES:
        return float(n)
    if branch == "eps+":
        return n - params.epsilon
    if branch == "eps-":
        return n + params.epsilon
    raise ValueError(f"unknown branch {branch!r}")


def residue_at_pole(params: ModelParams, branch: str, n: int, *, rtol: float = 1e-6,
                    tol_tail: float = TOL_TAIL, n_max: int = N_MAX,
                    dps: int | None = None) -> float:
    """Residue of G_+ / G_- at x = n, or of G_eps at x = n - eps ("eps+") / n + eps ("eps-").

    The symmetric two-sided average of (x - p) G(x) at p +/- delta_k is even
    in delta_k, so a Richardson table in delta_k^2 over delta_k = 1e-2 * 2^-k
    removes the smooth part.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    p = pole_location(params, branch, n)

    def G(x):
        kw = dict(tol_tail=tol_tail, n_max=n_max, dps=dps, delta_pole=0.0)
        if branch in PARITIES:
            return eval_G(params, branch, x, **kw).value
        return eval_G_eps(params, x, **kw).value

    h = [0.5 * d * (G(p + d) - G(p - d)) for d in RESIDUE_STEPS]
    table = [[v] for v in h]
    for k in range(1, len(h)):
        for j in range(1, k + 1):
            prev = table[k][j - 1]
            table[k].append(prev + (prev - table[k - 1][j - 1]) / (4.0**j - 1))
    best = table[-1][-1]
    err = abs(best - table[-2][-2])
    scale = max(1.0, max(abs(v) for v in h))
    if err > rtol * scale:
        raise NoConvergence(f"residue extrapolation did not settle (error {err:.3g})")
    return float(best.real if isinstance(best, complex) else best)


__all__ = [
    "DiskDomain", "GEvaluation", "PARITIES", "eps_poles", "eval_G", "eval_G_eps",
    "eval_G_general", "pole_distance", "pole_location", "residue_at_pole", "series_order",
    "signed",
]
