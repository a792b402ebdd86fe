"""Spectrum from G-function zeros: bracketing, bisection and joint complex zeros."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import oracle as _oracle
from .errors import NoJointZero, NotFound, PoleProximity
from .gfunctions import (
    PARITIES,
    eps_poles,
    eval_G,
    eval_G_eps,
    eval_G_general,
    residue_at_pole,
    series_order,
)
from .series import DELTA_POLE, EXTENDED_DPS, N_MAX, TOL_TAIL, ModelParams

GRID_DEFAULT = 48
TOL_X = 1e-12
REFINE_ABOVE = 1e-10      # double-precision root uncertainty that triggers extended refinement
REFINE_TOL_TAIL = 1e-30
TOL_JOINT = 1e-6
LARGE_X = 30.0
BRANCHES = ("+", "-", "eps")


@dataclass(frozen=True)
class SpectrumLevel:
    x: float
    energy: float
    parity: str            # "+", "-" or "none"
    kind: str              # "regular" or "exceptional-candidate"
    method: str            # "G_zero", "G_general_zero" or "oracle"
    residual: float
    bracket: tuple
    uncertainty: float = 0.0


def stable_z0(g: float) -> complex:
    """Imaginary evaluation point used above ``LARGE_X``."""
    return 1j * min(5.0, 2 * g * 0.9)


def poles_in(params: ModelParams, branch: str, lo: float, hi: float) -> list[float]:
    if branch == "eps":
        return eps_poles(params, lo, hi)
    return [float(n) for n in range(max(0, math.ceil(lo)), math.floor(hi) + 1)]


def pole_free_intervals(params: ModelParams, branch: str, x_min: float, x_max: float,
                        delta_pole: float = DELTA_POLE) -> list[tuple[float, float]]:
    """Split (x_min, x_max) into pieces that keep ``delta_pole`` away from every pole."""
    out = []
    cur = x_min
    w = delta_pole * (1 + 1e-6)  # keep rounding from landing inside the window
    for p in poles_in(params, branch, x_min - w, x_max + w):
        if p - w > cur:
            out.append((cur, p - w))
        cur = max(cur, p + w)
    if x_max > cur:
        out.append((cur, x_max))
    return out


def graded_grid(a: float, b: float, m: int) -> list[float]:
    """m+1 points on [a, b] clustered towards both ends, where G runs into poles."""
    return [a + (b - a) * 0.5 * (1 - math.cos(math.pi * k / m)) for k in range(m + 1)]


def _plain(params, branch, dps, tol_tail, n_max, delta_pole):
    kw = dict(tol_tail=tol_tail, n_max=n_max, dps=dps, delta_pole=delta_pole)
    if branch == "eps":
        return lambda x: eval_G_eps(params, x, **kw)
    return lambda x: eval_G(params, branch, x, **kw)


def bisect(f, lo: float, hi: float, f_lo: float, tol_x: float, max_iter: int = 200):
    """Shrink a sign-change bracket of the real function f to width < tol_x."""
    for _ in range(max_iter):
        if hi - lo < tol_x:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid, mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo, hi


def _uncertainty(G, x, lo, hi, a, b):
    """Root uncertainty: bracket half-width or error estimate over local slope."""
    h = min(1e-6, 0.25 * (x - a), 0.25 * (b - x)) if b > a else 1e-6
    h = max(h, 1e-12)
    ev = G(x)
    slope = abs(float(np.real(G(x + h).value)) - float(np.real(G(x - h).value))) / (2 * h)
    half = 0.5 * (hi - lo)
    if slope == 0:
        return ev, math.inf
    return ev, max(half, ev.error_estimate / slope)


def _refine_extended(params, branch, x, unc, x0, x1, tol_x, n_max, delta_pole, a, b):
    """Re-bisect with extended precision, first inside x +- 2 unc, else on the grid bracket."""
    G = _plain(params, branch, EXTENDED_DPS, REFINE_TOL_TAIL, n_max, delta_pole)
    f = lambda t: float(np.real(G(t).value))  # noqa: E731
    lo, hi = max(x0, x - 2 * unc), min(x1, x + 2 * unc)
    f_lo = f(lo)
    if f_lo * f(hi) > 0:
        lo, hi, f_lo = x0, x1, f(x0)
    lo, hi = bisect(f, lo, hi, f_lo, tol_x)
    x = 0.5 * (lo + hi)
    ev, unc = _uncertainty(G, x, lo, hi, a, b)
    return x, lo, hi, ev, unc


def _scan_plain(params, branch, a, b, grid, tol_x, dps, tol_tail, n_max, delta_pole):
    G = _plain(params, branch, dps, tol_tail, n_max, delta_pole)
    xs = graded_grid(a, b, grid)
    vals = [float(np.real(G(x).value)) for x in xs]
    parity = branch if branch in PARITIES else "none"
    levels = []
    for i in range(len(xs) - 1):
        x0, x1, f0, f1 = xs[i], xs[i + 1], vals[i], vals[i + 1]
        if f0 == 0:
            lo = hi = x0
        elif f0 * f1 < 0:
            lo, hi = bisect(lambda x: float(np.real(G(x).value)), x0, x1, f0, tol_x)
        else:
            continue
        x = 0.5 * (lo + hi)
        ev, unc = _uncertainty(G, x, lo, hi, a, b)
        if unc > REFINE_ABOVE and dps is None:
            x, lo, hi, ev, unc = _refine_extended(params, branch, x, unc, x0, x1, tol_x,
                                                  n_max, delta_pole, a, b)
        levels.append(SpectrumLevel(x=x, energy=params.energy(x), parity=parity,
                                    kind="regular", method="G_zero",
                                    residual=abs(ev.value), bracket=(lo, hi), uncertainty=unc))
    if vals[-1] == 0:
        x = xs[-1]
        levels.append(SpectrumLevel(x=x, energy=params.energy(x), parity=parity,
                                    kind="regular", method="G_zero", residual=0.0,
                                    bracket=(x, x)))
    return levels


def _scan_pole_window(params, branch, p, tol_x, dps, tol_tail, n_max, delta_pole):
    """Zeros of the pole-free product (x - p) G(x) inside |x - p| < delta_pole."""
    G = _plain(params, branch, dps, tol_tail, n_max, 0.0)

    def F(x):
        return float(np.real((x - p) * G(x).value))

    lo, hi = p - delta_pole, p + delta_pole
    f_lo, f_hi = F(lo), F(hi)
    if f_lo * f_hi > 0:
        return []
    lo, hi = bisect(lambda x: F(x) if x != p else F(p + 1e-15), lo, hi, f_lo, tol_x)
    x = 0.5 * (lo + hi)
    parity = branch if branch in PARITIES else "none"
    return [SpectrumLevel(x=x, energy=params.energy(x), parity=parity,
                          kind="exceptional-candidate", method="G_zero",
                          residual=abs(F(x) if x != p else 0.0), bracket=(lo, hi),
                          uncertainty=0.5 * (hi - lo))]


def _joint_zeros(params, parity, z0, a, b, order, samples, tol_x, tol_joint, dps,
                 tol_tail, n_max, delta_pole):
    """All joint zeros of Re G(x; z0) and Im G(x; z0) on a pole-free interval."""
    kw = dict(tol_tail=tol_tail, n_max=n_max, dps=dps, delta_pole=delta_pole)

    def G(x, n=order):
        return complex(eval_G_general(params, parity, x, z0, order=n, **kw).value)

    xs = graded_grid(a, b, samples)
    vals = [G(x) for x in xs]
    parts = {"re": [v.real for v in vals], "im": [v.imag for v in vals]}
    scales = {k: statistics.median(abs(v) for v in arr) for k, arr in parts.items()}
    found, rejected = [], []
    for comp, other in (("re", "im"), ("im", "re")):
        arr = parts[comp]
        pick = (lambda v: v.real) if comp == "re" else (lambda v: v.imag)
        for i in range(len(xs) - 1):
            if arr[i] == 0 and arr[i + 1] == 0:
                continue
            if arr[i] * arr[i + 1] > 0 or arr[i + 1] == 0:
                continue
            lo, hi = bisect(lambda x: pick(G(x)), xs[i], xs[i + 1], arr[i], tol_x)
            x = 0.5 * (lo + hi)
            val = G(x)
            off = abs(val.imag if comp == "re" else val.real)
            if off <= tol_joint * scales[other]:
                found.append((x, lo, hi, val, comp))
            else:
                rejected.append((x, off / max(scales[other], 1e-300)))
    found.sort()
    unique = []
    for item in found:
        if not unique or item[0] - unique[-1][0] > max(1e3 * tol_x, 1e-9):
            unique.append(item)
    return unique, rejected


def _refine_order(params, parity, z0, x, lo, hi, comp, order, a, b, tol_x, dps, tol_tail,
                  n_max, delta_pole):
    """Raise the truncation order until the zero position stops moving."""
    kw = dict(tol_tail=tol_tail, n_max=n_max, dps=dps, delta_pole=delta_pole)
    pick = (lambda v: v.real) if comp == "re" else (lambda v: v.imag)
    target = max(1e3 * tol_x, 1e-10)
    shift = math.inf
    while order < n_max:
        new_order = min(n_max, order + max(20, order // 2))

        def f(t, n=new_order):
            return pick(complex(eval_G_general(params, parity, t, z0, order=n, **kw).value))

        w = max(1e-6, 1e4 * (hi - lo))
        s_lo, s_hi = max(a, x - w), min(b, x + w)
        f_lo, f_hi = f(s_lo), f(s_hi)
        if f_lo * f_hi > 0:
            order = new_order
            continue
        lo2, hi2 = bisect(f, s_lo, s_hi, f_lo, tol_x)
        x_new = 0.5 * (lo2 + hi2)
        shift = abs(x_new - x)
        x, lo, hi, order = x_new, lo2, hi2, new_order
        if shift < target:
            break
    return x, lo, hi, order, shift


def find_joint_zero(params: ModelParams, parity: str, z0, x_bracket, *, tol_x: float = TOL_X,
                    tol_joint: float = TOL_JOINT, order: int | None = None, samples: int = 64,
                    verify_order: bool = True, dps: int | None = None,
                    tol_tail: float = TOL_TAIL, n_max: int = N_MAX,
                    delta_pole: float = DELTA_POLE) -> SpectrumLevel:
    """Level from the joint zero of Re G(x; z0) and Im G(x; z0) inside ``x_bracket``.

    The bracket is split at poles.  A zero of one component is accepted only
    if the other component is below ``tol_joint`` times its median magnitude
    over the samples; otherwise :class:`NoJointZero` is raised.  For real z0
    the imaginary part vanishes identically and every real zero passes.
    """
    lo_b, hi_b = x_bracket
    z0 = complex(z0)
    hits = []
    rejected = []
    for a, b in pole_free_intervals(params, parity, lo_b, hi_b, delta_pole):
        n = order
        if n is None:
            n = max(series_order(params, a, z0, tol_tail=tol_tail, n_max=n_max, dps=dps,
                                 delta_pole=delta_pole),
                    series_order(params, b, z0, tol_tail=tol_tail, n_max=n_max, dps=dps,
                                 delta_pole=delta_pole))
        found, rej = _joint_zeros(params, parity, z0, a, b, n, samples, tol_x, tol_joint, dps,
                                  tol_tail, n_max, delta_pole)
        rejected += rej
        hits += [(h, n, a, b) for h in found]
    if not hits:
        detail = ", ".join(f"x={x:.10g} (|other|/scale={r:.2g})" for x, r in rejected)
        raise NoJointZero(f"no joint zero in {x_bracket}" + (f"; rejected {detail}" if detail else ""))
    if len(hits) > 1:
        xs = ", ".join(f"{h[0][0]:.10g}" for h in hits)
        raise ValueError(f"bracket {x_bracket} holds several joint zeros ({xs}); narrow it")
    (x, lo, hi, val, comp), n, a, b = hits[0]
    shift = 0.0
    if verify_order and z0.imag != 0:
        x, lo, hi, n, shift = _refine_order(params, parity, z0, x, lo, hi, comp, n, a, b, tol_x,
                                            dps, tol_tail, n_max, delta_pole)
        val = complex(eval_G_general(params, parity, x, z0, order=n, tol_tail=tol_tail,
                                     n_max=n_max, dps=dps, delta_pole=delta_pole).value)
    return SpectrumLevel(x=x, energy=params.energy(x), parity=parity, kind="regular",
                         method="G_general_zero", residual=abs(val), bracket=(lo, hi),
                         uncertainty=max(0.5 * (hi - lo), shift))


def _scan_joint(params, parity, z0, a, b, grid, order, tol_x, dps, tol_tail, n_max, delta_pole):
    order = order or max(series_order(params, a, z0, tol_tail=tol_tail, n_max=n_max, dps=dps,
                             delta_pole=delta_pole),
                series_order(params, b, z0, tol_tail=tol_tail, n_max=n_max, dps=dps,
                             delta_pole=delta_pole))
    found, _ = _joint_zeros(params, parity, z0, a, b, order, grid, tol_x, TOL_JOINT, dps,
                            tol_tail, n_max, delta_pole)
    levels = []
    for x, lo, hi, val, comp in found:
        shift = 0.0
        n = order
        if z0.imag != 0:
            x, lo, hi, n, shift = _refine_order(params, parity, z0, x, lo, hi, comp, order, a, b,
                                                tol_x, dps, tol_tail, n_max, delta_pole)
            val = eval_G_general(params, parity, x, z0, order=n, tol_tail=tol_tail,
                                 n_max=n_max, dps=dps, delta_pole=delta_pole).value
        levels.append(SpectrumLevel(x=x, energy=params.energy(x), parity=parity,
                                    kind="regular", method="G_general_zero",
                                    residual=abs(val), bracket=(lo, hi),
                                    uncertainty=max(0.5 * (hi - lo), shift)))
    return levels


def _run_task(task):
    kind, args = task
    if kind == "plain":
        return _scan_plain(*args)
    if kind == "joint":
        return _scan_joint(*args)
    return _scan_pole_window(*args)


def merge_levels(groups, tol_x: float) -> list[SpectrumLevel]:
    """Sorted union of level lists; entries closer than ``tol_x`` (same parity) collapse."""
    levels = sorted((lv for grp in groups for lv in grp), key=lambda lv: (lv.x, lv.parity))
    out, last = [], {}
    for lv in levels:
        if lv.parity in last and lv.x - last[lv.parity] <= tol_x:
            continue
        last[lv.parity] = lv.x
        out.append(lv)
    return out


def scan_regular(params: ModelParams, branch: str, x_min: float, x_max: float,
                 grid_per_interval: int = GRID_DEFAULT, tol_x: float = TOL_X, *, z0=None,
                 large_x: float = LARGE_X, pole_windows: bool = True, order: int | None = None,
                 workers: int = 1,
                 dps: int | None = None, tol_tail: float = TOL_TAIL, n_max: int = N_MAX,
                 delta_pole: float = DELTA_POLE) -> list[SpectrumLevel]:
    """Regular levels of one parity (``"+"``/``"-"``) or of G_eps (``"eps"``) in (x_min, x_max).

    Each pole-free interval is sampled on a grid clustered towards the poles,
    every sign change is bisected to width ``tol_x``.  With ``z0=None`` the
    plain G-function is used up to ``large_x`` and joint zeros of
    G(x; i min(5, 1.8 g)) above it; an explicit ``z0`` forces the joint-zero
    search everywhere.  Windows of width ``delta_pole`` around the poles are
    searched through (x - n) G(x) and reported as exceptional candidates.
    ``order`` fixes the truncation for joint-zero intervals.
    ``x_min`` may be negative: the spectrum starts at x >= -sqrt(Delta^2 + eps^2).
    """
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    if branch == "eps" and z0 is not None:
        raise ValueError("the generalized G(x; z) is defined for the symmetric model only")
    if grid_per_interval < 8:
        raise ValueError("grid_per_interval must be at least 8")
    if not x_min < x_max:
        raise ValueError("x_min must be smaller than x_max")
    if branch in PARITIES and not params.symmetric:
        raise ValueError("parity-resolved scans need eps = 0; use branch='eps'")

    common = (tol_x, dps, tol_tail, n_max, delta_pole)
    tasks = []
    for a, b in pole_free_intervals(params, branch, x_min, x_max, delta_pole):
        pieces = [(a, b, z0)]
        if z0 is None:
            if branch != "eps" and b > large_x:
                zz = stable_z0(params.g)
                pieces = ([(a, large_x, None)] if a < large_x else []) + \
                    [(max(a, large_x), b, zz)]
        for lo, hi, zz in pieces:
            if zz is None:
                tasks.append(("plain", (params, branch, lo, hi, grid_per_interval) + common))
            else:
                tasks.append(("joint", (params, branch, complex(zz), lo, hi, grid_per_interval,
                                        order) + common))
    if pole_windows and z0 is None:
        for p in poles_in(params, branch, x_min, min(x_max, large_x)):
            if x_min < p - delta_pole and p + delta_pole < x_max:
                tasks.append(("window", (params, branch, p) + common))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    return merge_levels(results, tol_x)


def spectral_floor(params: ModelParams) -> float:
    """Lower bound on x: H >= -g^2 - sqrt(Delta^2 + eps^2)."""
    return -math.hypot(params.delta, params.epsilon)


def confirm_exceptional(params: ModelParams, x: float, n_fock: int = _oracle.N_FOCK_DEFAULT,
                        tol: float = 1e-8) -> bool:
    """True if the oracle has a parity-degenerate pair at spectral value x."""
    E = params.energy(x)
    hits = 0
    for parity in PARITIES:
        w = _oracle.sector_eigenvalues(params, parity, n_fock)
        hits += bool(len(w)) and bool(np.min(np.abs(w - E)) < tol)
    return hits == 2


def full_spectrum(params: ModelParams, x_max: float, x_min: float | None = None, *,
                  z0=None, grid_per_interval: int = GRID_DEFAULT, tol_x: float = TOL_X,
                  n_fock: int = _oracle.N_FOCK_DEFAULT, parities=PARITIES,
                  order: int | None = None, workers: int = 1,
                  dps: int | None = None) -> list[SpectrumLevel]:
    """Union of G_+ and G_- zeros and oracle-confirmed exceptional levels (or G_eps zeros).

    Exceptional candidates are checked against the oracle: a degenerate pair
    makes them exceptional (method "oracle"), otherwise they stay in the list
    as regular levels that happen to sit next to an integer.
    """
    if x_min is None:
        x_min = spectral_floor(params) - 1e-3
    kw = dict(grid_per_interval=grid_per_interval, tol_x=tol_x, z0=z0, order=order,
              workers=workers, dps=dps)
    if not params.symmetric:
        return scan_regular(params, "eps", x_min, x_max, **kw)
    levels = [lv for parity in parities for lv in scan_regular(params, parity, x_min, x_max, **kw)]
    out, seen_exc = [], set()
    for lv in sorted(levels, key=lambda lv: (lv.x, lv.parity)):
        if lv.kind != "exceptional-candidate":
            out.append(lv)
            continue
        n = round(lv.x)
        if abs(lv.x - n) < 1e-8 and confirm_exceptional(params, float(n), n_fock):
            if n not in seen_exc:
                seen_exc.add(n)
                for parity in parities:
                    out.append(replace(lv, x=float(n), energy=params.energy(float(n)),
                                       parity=parity, method="oracle"))
        else:
            out.append(replace(lv, kind="regular"))
    return sorted(out, key=lambda lv: (lv.x, lv.parity))


def find_exceptional(params: ModelParams, n: int, scan_param: str = "delta", value_range=None,
                     samples: int = 21, n_fock: int = 150, tol_gap: float = 1e-8,
                     tol_residue: float = 1e-6) -> list[tuple[float, dict]]:
    """Parameter values at which a parity-degenerate pair sits at x = n.

    The oracle gap E_+ - E_- of the levels nearest to E = n - g^2 is sampled
    over ``value_range`` of ``scan_param`` ("delta" or "g"); sign changes are
    bisected, and each solution is confirmed by a vanishing residue of G_+
    and G_- at x = n.  ``value_range`` is open: its end points are not sampled,
    so the trivial degeneracy at Delta = 0 is not reported.  ``value_range=None``
    checks the given parameters only.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if scan_param not in ("delta", "g"):
        raise ValueError("scan_param must be 'delta' or 'g'")

    def at(v):
        return replace(params, **{scan_param: v})

    def gap(v):
        return _oracle.degeneracy_gap(at(v), n, n_fock)

    def confirm(v):
        gp = gap(v)
        res = {}
        for parity in PARITIES:
            try:
                res[parity] = residue_at_pole(at(v), parity, n)
            except Exception as exc:  # extrapolation failure counts as unconfirmed
                res[parity] = math.nan
                res[f"error_{parity}"] = str(exc)
        ok = abs(gp) < tol_gap and all(abs(res[p]) < tol_residue for p in PARITIES)
        return {"gap": gp, "residue_plus": res["+"], "residue_minus": res["-"],
                "confirmed": bool(ok)}

    if value_range is None:
        v = getattr(params, scan_param)
        if abs(gap(v)) >= tol_gap:
            raise NotFound(f"no degenerate pair at x={n} for the given parameters")
        return [(v, confirm(v))]

    lo, hi = value_range
    vs = list(np.linspace(lo, hi, samples + 2)[1:-1])
    gs = [gap(v) for v in vs]
    out = []
    for i, (v, gv) in enumerate(zip(vs, gs)):
        if abs(gv) < tol_gap:
            out.append((float(v), confirm(v)))
            continue
        if i + 1 < len(vs) and gv * gs[i + 1] < 0 and abs(gs[i + 1]) >= tol_gap:
            a, b, ga = v, vs[i + 1], gv
            for _ in range(200):
                m = 0.5 * (a + b)
                gm = gap(m)
                if abs(gm) < 0.01 * tol_gap or b - a < 1e-15:
                    break
                if (gm > 0) == (ga > 0):
                    a, ga = m, gm
                else:
                    b = m
            m = 0.5 * (a + b)
            out.append((float(m), confirm(m)))
    out = [item for item in out if item[1]["confirmed"]]
    if not out:
        raise NotFound(f"no parity-degenerate pair at x={n} for {scan_param} in {value_range}")
    return out


__all__ = [
    "SpectrumLevel", "confirm_exceptional", "find_exceptional", "find_joint_zero",
    "full_spectrum", "graded_grid", "merge_levels", "pole_free_intervals", "poles_in",
    "scan_regular", "spectral_floor", "stable_z0",
]
