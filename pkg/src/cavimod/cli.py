"""Command-line front end.

    cavimod classify --map "catalog:f1(alpha=0.5)" --n 3
    cavimod bounds --map catalog:identity --n 3 --r 0.1 --R 1
    cavimod integrals --map catalog:f2 --plot-data f2.csv
    cavimod dilat --map "x1, x2*exp(x1), x3" --format csv --output d.csv
    cavimod check --map catalog:f3
    cavimod catalog

Exit codes: 0 success, 1 numerical failure, 2 invalid input, 3 undetermined
classification under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .dilatation import chain_slack, dilatation_fields
from .errors import CavimodError, ExpressionError
from .expression import parse_map_expression
from .mapping import CATALOG, MappingSpec, scaled_jacobian
from .modulus import (
    CavitationVerdict,
    check_bgmv,
    check_fundamental,
    cavitation_integrals,
    classify_cavitation,
    modulus_bounds,
    modulus_conversions,
    radius_bracket,
    sample_field,
)
from .quadrature import ClassifierConfig, DEFAULT_K0, DEFAULT_KMAX, DEFAULT_RADIAL_M, DEFAULT_SPHERE_LEVEL, make_grid

COMMANDS = ("dilat", "bounds", "integrals", "classify", "check", "catalog")
EXIT_OK, EXIT_NUMERIC, EXIT_INVALID, EXIT_UNDETERMINED = 0, 1, 2, 3
FD_WARNING = "expression map: finite-difference Jacobian, accuracy floor about 1e-6"


class ValidationError(CavimodError, ValueError):
    """A run configuration is invalid."""


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines the numeric output of a run."""

    command: str
    map: str = "catalog:identity"
    n: int = 3
    r: float = 0.1
    R: float = 1.0
    sphere_level: int = DEFAULT_SPHERE_LEVEL
    radial_m: int = DEFAULT_RADIAL_M
    k0: int = DEFAULT_K0
    kmax: int = DEFAULT_KMAX
    seed: int = 0
    samples: int = 2000
    output: Optional[str] = None
    format: str = "json"
    strict: bool = False
    plot_data: Optional[str] = None

    def validate(self) -> "RunConfig":
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"unknown command {self.command!r}")
        if not (isinstance(self.n, int) and 2 <= self.n <= 16):
            problems.append(f"n must be an integer in [2, 16], got {self.n}")
        if not (0.0 < self.r < self.R <= 1.0):
            problems.append(f"radii must satisfy 0 < r < R <= 1, got r={self.r}, R={self.R}")
        if not 1 <= self.sphere_level <= 6:
            problems.append(f"sphere level must be in [1, 6], got {self.sphere_level}")
        if not 8 <= self.radial_m <= 1 << 16:
            problems.append(f"radial m must be in [8, 65536], got {self.radial_m}")
        if not 1 <= self.k0 < self.kmax <= 40:
            problems.append(f"need 1 <= k0 < kmax <= 40, got k0={self.k0}, kmax={self.kmax}")
        elif self.kmax - self.k0 + 1 < ClassifierConfig.window:
            problems.append(f"need at least {ClassifierConfig.window} epsilon levels, "
                            f"got k0={self.k0}, kmax={self.kmax}")
        if self.seed < 0:
            problems.append(f"seed must be nonnegative, got {self.seed}")
        if not 1 <= self.samples <= 10**6:
            problems.append(f"samples must be in [1, 1e6], got {self.samples}")
        if self.format not in ("json", "csv"):
            problems.append(f"format must be json or csv, got {self.format!r}")
        if problems:
            raise ValidationError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name: f for f in fields(cls)}
        kw = {}
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in names:
                raise ValidationError(f"unknown configuration key {key!r}")
            kw[key] = _coerce(names[key].type, value, key)
        if "command" not in kw:
            raise ValidationError("configuration has no command")
        return cls(**kw)


def _coerce(kind, value, key):
    kind = str(kind)
    if value is None or kind.startswith("Optional"):
        return None if value in (None, "", "null", "None") else str(value)
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError
                return value.lower() in ("true", "1", "yes")
            return bool(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key}: cannot read {value!r} as {kind}") from None
    return str(value)


def load_config_file(path: str) -> dict:
    """Read a JSON object (a config or a whole report) or ``key = value`` lines."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        return dict(data.get("config", data))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value.strip("\"'")
    return out


# --- JSON and CSV -----------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    results = report.get("results") or {}
    if "columns" in results:
        w.writerow(results["columns"])
        for row in results["rows"]:
            w.writerow([_fmt(v) for v in row])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(report):
            w.writerow([k, _fmt(v)])
    return buf.getvalue()


def emit_plot_data(report: dict, path) -> Path:
    """Write the epsilon sweep or radius sweep of a report as CSV.

    Columns are ``epsilon, IQ, IK, ID, IL`` for integral reports and
    ``r, lower, upper, exact`` for bound sweeps.  A report with neither
    gives a header-only file.
    """
    results = (report or {}).get("results") or {}
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if "sweep" in results:
            w.writerow(["r", "lower", "upper", "exact"])
            for row in results["sweep"]:
                w.writerow([_fmt(row.get(k)) for k in ("r", "lower", "upper", "exact")])
        else:
            w.writerow(["epsilon", "IQ", "IK", "ID", "IL"])
            for row in results.get("partials", []):
                w.writerow([_fmt(v) for v in row])
    return path


# --- commands ---------------------------------------------------------------

def _cmd_catalog(cfg, f):
    return {"maps": [{"name": k, "description": v} for k, v in CATALOG.items()]}


def _cmd_dilat(cfg, f):
    grid = make_grid(cfg.n, cfg.r, cfg.R, cfg.sphere_level, cfg.radial_m, cfg.seed)
    pts = grid.points().reshape(-1, cfg.n)
    u = np.repeat(grid.sphere_nodes, len(grid.radial_nodes), axis=0)
    t = np.tile(grid.radial_nodes, len(grid.sphere_weights))
    fl = dilatation_fields(scaled_jacobian(f, pts), u, with_T=True)
    slack = chain_slack(fl["K"], fl["L"], fl["D"], fl["Q"], cfg.n, fl["T"], relative=True)
    cols = ["t"] + [f"u{i + 1}" for i in range(cfg.n)] + ["K", "L", "D", "Q", "T", "regular"]
    data = [t, *u.T, fl["K"], fl["L"], fl["D"], fl["Q"], fl["T"]]
    rows = [list(map(float, vals)) + [bool(reg)] for vals, reg in zip(zip(*data), fl["regular"])]
    return {
        "columns": cols,
        "rows": rows,
        "summary": {
            "points": len(rows),
            "irregular_fraction": float(1.0 - np.mean(fl["regular"])),
            "T_converged_fraction": float(np.mean(fl["T_converged"][fl["regular"]])),
            "min_relative_chain_slack": float(np.nanmin(slack)),
        },
    }


def _cmd_bounds(cfg, f):
    grid = make_grid(cfg.n, cfg.r, cfg.R, cfg.sphere_level, cfg.radial_m, cfg.seed)
    fld = sample_field(f, grid)
    b = modulus_bounds(f, cfg.r, cfg.R, field=fld)
    out = b.to_dict()
    out["ring_modulus_interval"] = [
        modulus_conversions(b.upper, "family_to_ring", cfg.n),
        modulus_conversions(b.lower, "family_to_ring", cfg.n) if b.lower > 0 else math.inf,
    ]
    if cfg.R == 1.0:
        out["radius_bracket"] = radius_bracket(f, cfg.r, field=fld).to_dict()
    if cfg.plot_data:
        # eight inner radii on cell boundaries, all read from the same samples
        m = len(grid.radial_nodes)
        edges = cfg.r * np.exp(grid.radial_log_weights[0] * np.arange(m + 1))
        sweep = []
        for i in sorted({int(round(j * m / 8)) for j in range(8)}):
            sub = fld.restrict(float(edges[i]), cfg.R)
            bi = modulus_bounds(f, sub.grid.r, cfg.R, field=sub)
            sweep.append({"r": bi.r, "lower": bi.lower, "upper": bi.upper, "exact": bi.exact})
        out["sweep"] = sweep
    return out


def _cavitation(cfg, f):
    return cavitation_integrals(f, cfg.k0, cfg.kmax, cfg.sphere_level, cfg.radial_m, cfg.seed)


def _cmd_integrals(cfg, f):
    rep = _cavitation(cfg, f).to_dict()
    for k in ("verdict", "fired_rule", "contradiction"):
        rep.pop(k)
    return rep


def _cmd_classify(cfg, f):
    return classify_cavitation(_cavitation(cfg, f)).to_dict()


def _cmd_check(cfg, f):
    grid = make_grid(cfg.n, cfg.r, cfg.R, cfg.sphere_level, cfg.radial_m, cfg.seed)
    fld = sample_field(f, grid)
    bg, bg_parts = check_bgmv(f, cfg.r, cfg.R, field=fld, full_output=True)
    fu, fu_parts = check_fundamental(f, cfg.r, cfg.R, field=fld, full_output=True)
    rng = np.random.default_rng(cfg.seed)
    u = rng.standard_normal((cfg.samples, cfg.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = rng.uniform(0.05, 0.95, cfg.samples)
    fl = dilatation_fields(scaled_jacobian(f, u * t[:, None]), u, with_T=True)
    reg = fl["regular"]
    slack = chain_slack(fl["K"][reg], fl["L"][reg], fl["D"][reg], fl["Q"][reg], cfg.n,
                        fl["T"][reg], relative=True)
    return {
        "bgmv": dict(bg_parts, residual=bg),
        "fundamental": dict(fu_parts, residual=fu),
        "chain": {"samples": cfg.samples, "regular": int(reg.sum()),
                  "min_relative_slack": float(np.min(slack)) if slack.size else None,
                  "analytic_jacobian": f.has_analytic_jacobian},
    }


HANDLERS = {"catalog": _cmd_catalog, "dilat": _cmd_dilat, "bounds": _cmd_bounds,
            "integrals": _cmd_integrals, "classify": _cmd_classify, "check": _cmd_check}


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def execute(cfg: RunConfig) -> dict:
    """Run a validated configuration and return the report dictionary."""
    cfg.validate()
    f: Optional[MappingSpec] = None
    warnings: List[str] = []
    if cfg.command != "catalog":
        f = parse_map_expression(cfg.map, cfg.n)
        if not f.has_analytic_jacobian:
            warnings.append(FD_WARNING)
    collect = _Collect()
    logger = logging.getLogger("cavimod")
    logger.addHandler(collect)
    t0 = time.perf_counter()
    try:
        results = HANDLERS[cfg.command](cfg, f)
    finally:
        logger.removeHandler(collect)
    elapsed = time.perf_counter() - t0
    warnings += collect.messages
    warnings += results.get("warnings", []) if isinstance(results, dict) else []
    return {
        "tool": "cavimod",
        "version": __version__,
        "config": cfg.to_dict(),
        "grid": {"n": cfg.n, "sphere_level": cfg.sphere_level, "radial_m": cfg.radial_m,
                 "k0": cfg.k0, "kmax": cfg.kmax, "seed": cfg.seed},
        "results": results,
        "warnings": warnings,
        "timing": {"seconds": elapsed},
        "error": None,
    }


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", help="catalog:NAME(k=v,...) or comma-separated components in x1..xn, |x|")
    common.add_argument("--n", type=int, help="dimension (default 3)")
    common.add_argument("--r", type=float, help="inner radius (default 0.1)")
    common.add_argument("--R", type=float, help="outer radius (default 1)")
    common.add_argument("--sphere-level", type=int, help=f"sphere rule level (default {DEFAULT_SPHERE_LEVEL})")
    common.add_argument("--radial-m", type=int, help=f"radial nodes (default {DEFAULT_RADIAL_M})")
    common.add_argument("--k0", type=int, help=f"first epsilon exponent (default {DEFAULT_K0})")
    common.add_argument("--kmax", type=int, help=f"last epsilon exponent (default {DEFAULT_KMAX})")
    common.add_argument("--seed", type=int, help="seed for Monte Carlo sphere rules and sampling")
    common.add_argument("--samples", type=int, help="random points for the chain check (default 2000)")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), help="report format (default json)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="exit 3 when classification is undetermined")
    common.add_argument("--config", help="JSON or key = value file; explicit flags win")
    common.add_argument("--plot-data", help="write epsilon or radius sweep CSV here")
    p = argparse.ArgumentParser(prog="cavimod",
                                description="Modulus bounds and cavitation tests for maps of the punctured ball.")
    p.add_argument("--version", action="version", version=f"cavimod {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "dilat": "dilatations on a grid (small grid unless levels are given)",
        "bounds": "lower and upper modulus bounds on A(r, R)",
        "integrals": "the four cavitation integrals with epsilon evidence",
        "classify": "cavitation verdict",
        "check": "distortion inequality residuals and the dilatation chain",
        "catalog": "list catalog maps",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        data.update(load_config_file(args.config))
    data["command"] = args.command
    if args.command == "dilat":
        data.setdefault("sphere_level", 1)
        data.setdefault("radial_m", 16)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "command":
            data[f.name] = value
    return RunConfig.from_dict(data)


def _write(report: dict, cfg: Optional[RunConfig]):
    fmt = cfg.format if cfg else "json"
    text = report_csv(report) if fmt == "csv" else json.dumps(_plain(report), indent=2) + "\n"
    if cfg is not None and cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    cfg = None
    try:
        cfg = config_from_args(args).validate()
        report = execute(cfg)
    except (ValueError, OSError) as exc:
        code, report = EXIT_INVALID, None
        err = exc
    except ArithmeticError as exc:
        code, report = EXIT_NUMERIC, None
        err = exc
    else:
        err = None
    if err is not None:
        report = {"tool": "cavimod", "version": __version__,
                  "config": cfg.to_dict() if cfg else None, "results": None, "warnings": [],
                  "error": {"type": type(err).__name__, "message": str(err),
                            "position": getattr(err, "position", None)
                            if isinstance(err, ExpressionError) else None}}
        print(f"cavimod: error: {err}", file=sys.stderr)
        _write(report, cfg)
        return code
    if cfg.plot_data:
        emit_plot_data(report, cfg.plot_data)
    _write(report, cfg)
    if (cfg.command == "classify" and cfg.strict
            and report["results"]["verdict"] == CavitationVerdict.UNDETERMINED.value):
        return EXIT_UNDETERMINED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
