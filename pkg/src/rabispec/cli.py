"""Command-line interface: spectra, G-function traces, validation and oracle comparison.

Every flag can also be set through an environment variable named
``RABISPEC_<FLAG>`` (upper case, dashes as underscores), e.g.
``RABISPEC_NFOCK=400``.  Explicit flags win over the environment.

Exit codes: 0 success, 1 mismatch or failed validation, 2 configuration
error, 3 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import odecheck, oracle, spectrum
from .errors import (
    LevelNotConverged,
    NoConvergence,
    NoConvergenceOfEigensolver,
    RabiSpecError,
    StepUnderflow,
)
from .gfunctions import DiskDomain, eval_G_eps, eval_G_general
from .series import N_MAX, ModelParams

ENV_PREFIX = "RABISPEC_"
EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NOCONV = 0, 1, 2, 3
SIG_DIGITS = 15
LEVEL_COLUMNS = ["index", "x", "energy", "parity", "kind", "method", "residual",
                 "bracket_lo", "bracket_hi"]
TRACE_COLUMNS = ["x", "re", "im", "converged", "order_used"]


class ConfigError(ValueError):
    pass


def parse_complex(text: str) -> complex:
    """Parse "a+bi", "5i", "-0.5i", "0.3" (also accepts j)."""
    s = text.strip().replace(" ", "").replace("j", "i")
    if not s:
        raise ConfigError("empty z0")
    try:
        if s.endswith("i"):
            body = s[:-1]
            cut = max(body.rfind("+"), body.rfind("-"))
            while cut > 0 and body[cut - 1] in "eE":
                cut = max(body.rfind("+", 0, cut - 1), body.rfind("-", 0, cut - 1))
            if cut <= 0:
                re_part, im_text = 0.0, body
            else:
                re_part, im_text = float(body[:cut]), body[cut:]
            if im_text in ("", "+"):
                im = 1.0
            elif im_text == "-":
                im = -1.0
            else:
                im = float(im_text)
            return complex(re_part, im)
        return complex(float(s), 0.0)
    except ValueError as exc:
        raise ConfigError(f"cannot parse z0={text!r}; use a+bi or 5i") from exc


def fmt(v) -> str:
    """Decimal string with 15 significant digits."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{float(v):.{SIG_DIGITS}g}"
    return str(v)


def round15(v):
    """Float rounded to 15 significant digits (identity for other types)."""
    if isinstance(v, (float, np.floating)) and math.isfinite(v):
        return float(f"{float(v):.{SIG_DIGITS}g}")
    if isinstance(v, (float, np.floating)):
        return None
    return v


@dataclass(frozen=True)
class RunConfig:
    """Validated options of one invocation."""

    command: str
    params: ModelParams
    parity: str
    x_min: float | None
    x_max: float | None
    z0: complex | None
    tol: float
    trunc: int | None
    nfock: int
    fmt: str
    out: str | None
    samples: int
    xs: tuple
    dps: int | None
    workers: int
    grid: int
    eps_model: bool = False


def level_rows(levels) -> list[dict]:
    return [{"index": i, "x": lv.x, "energy": lv.energy, "parity": lv.parity, "kind": lv.kind,
             "method": lv.method, "residual": lv.residual, "bracket_lo": lv.bracket[0],
             "bracket_hi": lv.bracket[1]} for i, lv in enumerate(levels)]


def render(rows: list[dict], columns: list[str], fmt_name: str, meta: dict | None = None) -> str:
    if fmt_name == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])
        return buf.getvalue()
    doc = dict(meta or {})
    doc["columns"] = columns
    doc["rows"] = [{c: round15(r.get(c)) for c in columns} for r in rows]
    return json.dumps(doc, indent=1) + "\n"


def read_table(text: str) -> tuple[list[str], list[dict]]:
    """Parse a table written by :func:`render` (either format) back into rows."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        return doc["columns"], doc["rows"]
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for r in reader:
        row = {}
        for k, v in r.items():
            if v in ("true", "false"):
                row[k] = v == "true"
            else:
                try:
                    row[k] = int(v) if re.fullmatch(r"-?\d+", v) else float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return reader.fieldnames or [], rows


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


def _meta(cfg: RunConfig) -> dict:
    p = cfg.params
    meta = {"command": cfg.command, "g": p.g, "delta": p.delta, "epsilon": p.epsilon}
    if cfg.z0 is not None:
        meta["z0"] = [cfg.z0.real, cfg.z0.imag]
    return meta


def _parities(cfg: RunConfig):
    return ("+", "-") if cfg.parity == "both" else (cfg.parity,)


def _levels(cfg: RunConfig):
    p = cfg.params
    x_min = cfg.x_min if cfg.x_min is not None else spectrum.spectral_floor(p) - 1e-3
    return spectrum.full_spectrum(p, cfg.x_max, x_min, z0=cfg.z0, grid_per_interval=cfg.grid,
                                  tol_x=min(cfg.tol, 1e-12), n_fock=cfg.nfock,
                                  parities=_parities(cfg), order=cfg.trunc,
                                  workers=cfg.workers, dps=cfg.dps)


def cmd_spectrum(cfg: RunConfig) -> int:
    p = cfg.params
    if p.delta == 0 and p.symmetric:
        _note("note: Delta = 0 has no regular spectrum; every level is exceptional "
              "(x = n, doubly degenerate)")
        levels = []
    else:
        levels = _levels(cfg)
    meta = _meta(cfg)
    _emit(cfg, render(level_rows(levels), LEVEL_COLUMNS, cfg.fmt, meta))
    return EXIT_OK


def cmd_gtrace(cfg: RunConfig) -> int:
    p = cfg.params
    xs = np.linspace(cfg.x_min, cfg.x_max, cfg.samples)
    rows = []
    for x in xs:
        x = float(x)
        try:
            if cfg.eps_model:
                ev = eval_G_eps(p, x, order=cfg.trunc, dps=cfg.dps)
            else:
                ev = eval_G_general(p, cfg.parity, x, cfg.z0 or 0.0, order=cfg.trunc,
                                    dps=cfg.dps)
            v = complex(ev.value)
            rows.append({"x": x, "re": v.real, "im": v.imag, "converged": bool(ev.converged),
                         "order_used": ev.order_used})
        except RabiSpecError as exc:
            if not isinstance(exc, ValueError):
                raise
            rows.append({"x": x, "re": math.nan, "im": math.nan, "converged": False,
                         "order_used": 0})
    _emit(cfg, render(rows, TRACE_COLUMNS, cfg.fmt, _meta(cfg)))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    p = cfg.params
    z0 = cfg.z0 if cfg.z0 is not None else 0j
    rows, ok = [], True
    for x in cfg.xs:
        if p.symmetric:
            for parity in _parities(cfg):
                ra, rb = odecheck.check_conditions(p, x, z0, parity)
                thm = odecheck.theorem_check(p, x, parity=parity)
                good = max(ra, rb) < cfg.tol and thm < 1e-6
                ok &= good
                rows.append({"x": x, "parity": parity, "res_a": ra, "res_b": rb,
                             "theorem_mismatch": thm, "pass": good})
        else:
            rep = odecheck.eps_conditions(p, x, z0)
            worst = max(rep.residuals)
            good = worst < cfg.tol and rep.c_mismatch < 1e-6
            ok &= good
            rows.append({"x": x, "parity": "none", "res_a": worst, "res_b": rep.c_mismatch,
                         "theorem_mismatch": math.nan, "pass": good})
    cols = ["x", "parity", "res_a", "res_b", "theorem_mismatch", "pass"]
    _emit(cfg, render(rows, cols, cfg.fmt, _meta(cfg)))
    if not ok:
        _note("validation failed for at least one x (residual above --tol)")
    return EXIT_OK if ok else EXIT_MISMATCH


def _oracle_levels(cfg: RunConfig):
    p = cfg.params
    out = []
    if p.symmetric:
        for parity in _parities(cfg):
            w = oracle.sector_eigenvalues(p, parity, cfg.nfock)
            out += [(float(e + p.g ** 2), parity) for e in w]
    else:
        res = oracle.solve(p, cfg.nfock)
        out = [(float(x), "none") for x in res.spectral(p)]
    out.sort()
    return out


def cmd_compare(cfg: RunConfig) -> int:
    p = cfg.params
    levels = [] if (p.delta == 0 and p.symmetric) else _levels(cfg)
    ref = [(x, par) for x, par in _oracle_levels(cfg)
           if x < cfg.x_max and (cfg.x_min is None or x > cfg.x_min)]
    if ref and ref[-1][0] < cfg.x_max - 1 and len(ref) == len(_oracle_levels(cfg)):
        _note("warning: oracle certified window ends below x-max; raise --nfock")
    rows, used = [], set()
    for lv in levels:
        cand = [(abs(x - lv.x), i) for i, (x, par) in enumerate(ref)
                if par == lv.parity and i not in used]
        if cand:
            d, i = min(cand)
            used.add(i)
            rows.append({"x": lv.x, "parity": lv.parity, "oracle_x": ref[i][0], "abs_dx": d,
                         "status": "ok" if d <= cfg.tol else "mismatch"})
        else:
            rows.append({"x": lv.x, "parity": lv.parity, "oracle_x": math.nan,
                         "abs_dx": math.nan, "status": "extra"})
    for i, (x, par) in enumerate(ref):
        if i not in used:
            rows.append({"x": math.nan, "parity": par, "oracle_x": x, "abs_dx": math.nan,
                         "status": "missing"})
    cols = ["x", "parity", "oracle_x", "abs_dx", "status"]
    _emit(cfg, render(rows, cols, cfg.fmt, _meta(cfg)))
    worst = max((r["abs_dx"] for r in rows if r["status"] in ("ok", "mismatch")), default=0.0)
    bad = sum(r["status"] != "ok" for r in rows)
    _note(f"levels={len(levels)} oracle={len(ref)} worst |dx|={worst:.3e} problems={bad}")
    return EXIT_OK if bad == 0 else EXIT_MISMATCH


def cmd_oracle(cfg: RunConfig) -> int:
    rows = []
    for i, (x, par) in enumerate(_oracle_levels(cfg)):
        if cfg.x_max is not None and x >= cfg.x_max:
            break
        rows.append({"index": i, "x": x, "energy": x - cfg.params.g ** 2, "parity": par})
    _emit(cfg, render(rows, ["index", "x", "energy", "parity"], cfg.fmt, _meta(cfg)))
    return EXIT_OK


def cmd_convert(cfg: RunConfig, path: str) -> int:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    columns, rows = read_table(text)
    meta = json.loads(text) if text.lstrip().startswith("{") else {}
    meta = {k: v for k, v in meta.items() if k not in ("columns", "rows")}
    _emit(cfg, render(rows, columns, cfg.fmt, meta))
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "gtrace": cmd_gtrace, "validate": cmd_validate,
            "compare": cmd_compare, "oracle": cmd_oracle}


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rabispec",
                                 description="Rabi-model spectra from G-function zeros.")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--g", type=float, default=_env("g"), help="coupling g > 0")
    common.add_argument("--delta", type=float, default=_env("delta"), help="level splitting")
    common.add_argument("--epsilon", type=float, default=_env("epsilon"),
                        help="bias; switches to the broken-symmetry model when given")
    common.add_argument("--parity", choices=["+", "-", "both"], default=_env("parity", "both"))
    common.add_argument("--x-min", type=float, default=_env("x-min"))
    common.add_argument("--x-max", type=float, default=_env("x-max"))
    common.add_argument("--z0", default=_env("z0"), help='evaluation point, "a+bi" or "5i"')
    common.add_argument("--tol", type=float, default=_env("tol"))
    common.add_argument("--trunc", type=int, default=_env("trunc"), help="series order override")
    common.add_argument("--nfock", type=int, default=_env("nfock", oracle.N_FOCK_DEFAULT))
    common.add_argument("--format", dest="fmt", choices=["csv", "json"],
                        default=_env("format", "csv"))
    common.add_argument("--out", default=_env("out"), help="output file (default stdout)")
    common.add_argument("--dps", type=int, default=_env("dps"),
                        help="decimal digits for extended-precision evaluation")
    common.add_argument("--workers", type=int, default=_env("workers", 1))
    common.add_argument("--grid", type=int, default=_env("grid", spectrum.GRID_DEFAULT),
                        help="grid points per pole-free interval")
    sub.add_parser("spectrum", parents=[common], help="levels from G-function zeros")
    p = sub.add_parser("gtrace", parents=[common], help="sample G on a uniform x grid")
    p.add_argument("--samples", type=int, default=_env("samples", 200))
    p = sub.add_parser("validate", parents=[common], help="matching conditions at given x")
    p.add_argument("--x", type=float, action="append", dest="xs",
                   default=None, help="spectral value to check (repeatable)")
    sub.add_parser("compare", parents=[common], help="G-function spectrum vs oracle")
    sub.add_parser("oracle", parents=[common], help="truncated-Fock eigenvalues")
    p = sub.add_parser("convert", help="re-read a table and write it in another format")
    p.add_argument("input")
    p.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    return ap


def make_config(ns: argparse.Namespace) -> RunConfig:
    """Check preconditions and freeze the options; raises ConfigError."""
    cmd = ns.command
    if ns.g is None or ns.delta is None:
        raise ConfigError("--g and --delta are required")
    try:
        params = ModelParams(float(ns.g), float(ns.delta), float(ns.epsilon or 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    z0 = parse_complex(ns.z0) if ns.z0 not in (None, "") else None
    parity = ns.parity
    if not params.symmetric:
        if parity != "both":
            raise ConfigError("--parity applies to eps = 0 only")
        if z0 is not None and cmd in ("spectrum", "compare", "gtrace"):
            raise ConfigError("--z0 requires the symmetric model (eps = 0)")
    if cmd == "gtrace" and ns.epsilon is not None and z0 not in (None, 0):
        raise ConfigError("the eps trace is defined at z0 = 0 only")
    if cmd == "gtrace" and parity == "both":
        parity = "+"
    x_min = None if ns.x_min is None else float(ns.x_min)
    x_max = None if ns.x_max is None else float(ns.x_max)
    if cmd in ("spectrum", "compare", "gtrace") and x_max is None:
        raise ConfigError("--x-max is required")
    if cmd == "gtrace" and x_min is None:
        raise ConfigError("--x-min is required for gtrace")
    if x_min is not None and x_max is not None and not x_min < x_max:
        raise ConfigError("x-min must be smaller than x-max")
    grid = int(ns.grid)
    if grid < 8:
        raise ConfigError("--grid must be at least 8")
    trunc = None if ns.trunc is None else int(ns.trunc)
    if trunc is not None and not 1 <= trunc <= N_MAX:
        raise ConfigError(f"--trunc must lie in [1, {N_MAX}]")
    nfock = int(ns.nfock)
    if nfock < 2:
        raise ConfigError("--nfock must be at least 2")
    samples = int(getattr(ns, "samples", 200) or 200)
    if samples < 2:
        raise ConfigError("--samples must be at least 2")
    xs = tuple(getattr(ns, "xs", None) or ())
    if cmd == "validate":
        if not xs:
            raise ConfigError("validate needs at least one --x")
        if z0 is not None and z0 not in DiskDomain(params.g):
            raise ConfigError(f"z0={z0} lies outside D0 (|z0 -+ g| < 2g)")
    default_tol = {"validate": 1e-7, "compare": 1e-8}.get(cmd, 1e-12)
    tol = default_tol if ns.tol is None else float(ns.tol)
    if not tol > 0:
        raise ConfigError("--tol must be positive")
    dps = None if ns.dps in (None, "") else int(ns.dps)
    if dps is not None and dps < 16:
        raise ConfigError("--dps must be at least 16")
    workers = int(ns.workers)
    if workers < 1:
        raise ConfigError("--workers must be positive")
    return RunConfig(command=cmd, params=params, parity=parity, x_min=x_min, x_max=x_max, z0=z0,
                     tol=tol, trunc=trunc, nfock=nfock, fmt=ns.fmt, out=ns.out, samples=samples,
                     xs=xs, dps=dps, workers=workers, grid=grid,
                     eps_model=ns.epsilon is not None)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if ns.command == "convert":
            cfg = RunConfig(command="convert", params=ModelParams(1.0, 0.0), parity="both",
                            x_min=None, x_max=None, z0=None, tol=1.0, trunc=None, nfock=2,
                            fmt=ns.fmt, out=ns.out, samples=2, xs=(), dps=None, workers=1,
                            grid=8)
            return cmd_convert(cfg, ns.input)
        cfg = make_config(ns)
        return COMMANDS[cfg.command](cfg)
    except (NoConvergence, NoConvergenceOfEigensolver, LevelNotConverged, StepUnderflow) as exc:
        _note(f"error: no convergence: {exc}")
        return EXIT_NOCONV
    except (ConfigError, ValueError, OSError) as exc:
        _note(f"error: {exc}")
        return EXIT_CONFIG
    except RabiSpecError as exc:
        _note(f"error: {exc}")
        return EXIT_NOCONV


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
