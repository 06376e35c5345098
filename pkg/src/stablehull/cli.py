"""Command-line front end: ``verify``, ``estimate`` and ``sample-path``.

Settings come from an optional flat ``key = value`` file (``--config``)
overridden by flags. Exit codes: 0 success, 1 verification failure,
2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import convex_geom as cg
from . import functionals as F
from . import sausage as S
from . import verify as V
from .mc_engine import EstimateCI
from .stable_sim import Convention, SeedStream, StableSpec, sample_path_skeleton

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "STABLEHULL_SEED"

FUNCTIONALS = ("mean-support", "c-alpha", "mixed-volume", "V1", "V2", "scaling-check", "spitzer",
               "sausage", "asymptotics")
CSV_COLUMNS = ("functional", "alpha", "d", "convention", "n", "R", "m", "t", "mean", "half_width",
               "level", "extrapolated", "seed")


class ConfigError(ValueError):
    pass


def parse_body(text: str, d: int) -> cg.ConvexBody:
    """``ball:r | lpball:p,r | cube:a | box:a1,..,ad``."""
    kind, _, args = text.partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ConfigError(f"bad body descriptor {text!r}") from None
    try:
        if kind == "ball" and len(vals) == 1:
            return cg.EuclideanBall(vals[0], d)
        if kind == "lpball" and len(vals) == 2:
            return cg.LpBall(vals[0], vals[1], d)
        if kind == "cube" and len(vals) == 1:
            return cg.Polytope.cube(vals[0], d)
        if kind == "box" and len(vals) == d:
            return cg.Polytope.box(vals)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"bad body descriptor {text!r} for d = {d}")


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


@dataclass
class ExperimentConfig:
    command: str = "estimate"
    functional: str = "mean-support"
    alpha: float = 2.0
    dim: int = 1
    convention: str = "paper"
    n0: int = F.DEFAULT_N0
    reps: int = F.DEFAULT_REPS
    quad: int = F.DEFAULT_M
    points: int = S.DEFAULT_POINTS
    t: float = 1.0
    t_grid: tuple = S.DEFAULT_T_GRID
    fit_count: int = 0
    body: str = "ball:1"
    u: tuple = ()
    seed: int = 0
    level: float = 0.99
    workers: int = 1
    out: str = "-"
    format: str = "csv"
    claims: tuple = ()
    profile: str = "default"

    def validate(self) -> "ExperimentConfig":
        if self.command not in ("verify", "estimate", "sample-path"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.functional not in FUNCTIONALS:
            raise ConfigError(f"unknown functional {self.functional!r}; choose from {', '.join(FUNCTIONALS)}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.profile not in V.PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.reps < 2:
            raise ConfigError("reps must be >= 2")
        if self.n0 < 1 or self.quad < 1 or self.points < 1:
            raise ConfigError("n0, quad and points must be positive")
        if not self.t > 0 and not (self.command == "sample-path" and self.t == 0):
            raise ConfigError(f"t must be positive, got {self.t}")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        try:
            self.spec()
            Convention.parse(self.convention)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.fit_count and not 2 <= self.fit_count <= len(self.t_grid):
            raise ConfigError("fit_count must lie between 2 and the number of grid times (0 = all)")
        if self.u and len(self.u) != self.dim:
            raise ConfigError(f"direction u needs {self.dim} entries")
        unknown = [c for c in self.claims if c not in V.CLAIMS]
        if unknown:
            raise ConfigError(f"unknown claims: {', '.join(unknown)}")
        return self

    def spec(self) -> StableSpec:
        return StableSpec(self.alpha, self.dim, Convention.parse(self.convention))

    def direction(self) -> np.ndarray:
        if not self.u:
            e = np.zeros(self.dim)
            e[0] = 1.0
            return e
        u = np.asarray(self.u, dtype=float)
        return u / np.linalg.norm(u)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


_CASTS = {"alpha": float, "dim": int, "n0": int, "reps": int, "quad": int, "points": int, "t": float,
          "t_grid": _floats, "fit_count": int, "u": _floats, "seed": int, "level": float, "workers": int,
          "claims": lambda s: tuple(c.strip() for c in str(s).split(",") if c.strip())}


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; unknown keys are errors."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip()
    return out


def build_config(command: str, file_values: dict, flags: dict) -> ExperimentConfig:
    values = {"command": command}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        values["seed"] = env_seed
    values.update(file_values)
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        typed = {k: _CASTS[k](v) if k in _CASTS and isinstance(v, str) else v for k, v in values.items()}
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from None
    return ExperimentConfig(**typed).validate()


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file (flags win)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--dim", type=int)
    common.add_argument("--convention", choices=["paper", "std-bm"])
    common.add_argument("--n0", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--quad", type=int)
    common.add_argument("--points", type=int)
    common.add_argument("--t", type=float)
    common.add_argument("--t-grid", dest="t_grid")
    common.add_argument("--fit-count", dest="fit_count", type=int,
                        help="number of smallest grid times entering the slope fit (0 = all)")
    common.add_argument("--body")
    common.add_argument("--u")
    common.add_argument("--seed", type=int)
    common.add_argument("--level", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])

    p = argparse.ArgumentParser(prog="stablehull", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run the verification claims")
    v.add_argument("--claims", help="comma-separated claim names (default: all)")
    v.add_argument("--profile", choices=sorted(V.PROFILES))
    e = sub.add_parser("estimate", parents=[common], help="estimate one functional")
    e.add_argument("--functional", choices=FUNCTIONALS)
    sub.add_parser("sample-path", parents=[common], help="write one path skeleton as CSV")
    return p


# ---------------------------------------------------------------------------
# estimate


def _row(cfg: ExperimentConfig, functional, ci: EstimateCI, n, extrapolated, t=None) -> dict:
    return {"functional": functional, "alpha": cfg.alpha, "d": cfg.dim, "convention": cfg.convention,
            "n": n, "R": ci.count, "m": cfg.quad, "t": cfg.t if t is None else t, "mean": ci.mean,
            "half_width": ci.half_width, "level": ci.level, "extrapolated": extrapolated,
            "seed": cfg.seed}


def _est_rows(cfg, name, est: F.ExtrapolatedEstimate, t=None) -> list[dict]:
    rows = [_row(cfg, name, ci, n, False, t) for n, ci in est.raw]
    rows.append(_row(cfg, name, est.extrapolated, math.inf, True, t))
    return rows


def cmd_estimate(cfg: ExperimentConfig) -> list[dict]:
    spec = cfg.spec()
    kw = dict(seed=cfg.seed, workers=cfg.workers, level=cfg.level)
    f = cfg.functional
    if f == "mean-support":
        return _est_rows(cfg, f, F.estimate_mean_support(spec, cfg.direction(), cfg.n0, cfg.reps, **kw))
    if f == "c-alpha":
        return [_row(cfg, f, F.c_alpha_estimate(spec, cfg.reps, **kw), 1, False)]
    if f == "mixed-volume":
        body = parse_body(cfg.body, cfg.dim)
        if isinstance(body, cg.LpBall):
            raise ConfigError("mixed-volume slots must be Euclidean balls or one polytope")
        est = F.theorem1_lhs(spec, [body] * (cfg.dim - 1), cfg.n0, cfg.reps, cfg.quad, **kw)
        rows = _est_rows(cfg, f, est)
        rhs = F.theorem1_rhs(spec, [body] * (cfg.dim - 1), cfg.quad)
        rows.append(_row(cfg, "mixed-volume-rhs", EstimateCI(cfg.reps, rhs, 0.0, 0.0, cfg.level),
                         math.inf, True))
        return rows
    if f == "V1":
        return _est_rows(cfg, f, F.estimate_V1(spec, cfg.n0, cfg.reps, cfg.quad, **kw))
    if f == "V2":
        return _est_rows(cfg, f, F.estimate_V2_kubota(spec, cfg.n0, cfg.reps, **kw))
    if f == "spitzer":
        sup, pos = F.spitzer_pair(spec, cfg.n0, cfg.reps, **kw)
        return _est_rows(cfg, "spitzer-sup", sup) + [_row(cfg, "spitzer-positive-part", pos, 1, False)]
    if f == "scaling-check":
        lhs, rhs = F.scaling_check(spec, cfg.t, cfg.direction(), 4 * cfg.n0, cfg.reps, **kw)
        return [_row(cfg, "scaling-lhs", lhs, 4 * cfg.n0, False),
                _row(cfg, "scaling-rhs", rhs, 4 * cfg.n0, False)]
    body = parse_body(cfg.body, cfg.dim)
    if f == "sausage":
        est = S.estimate_sausage_volume(spec, body, cfg.t, cfg.n0, cfg.points, cfg.reps, **kw)
        return _est_rows(cfg, f, est)
    req = S.SausageRequest(spec, body, cfg.t_grid, cfg.n0, cfg.reps, cfg.points,
                           fit_count=cfg.fit_count or None, **kw)
    res = S.small_time_asymptotics(req)
    rows = []
    for t, est in zip(res.t_grid, res.estimates):
        rows.extend(_est_rows(cfg, "sausage", est, t))
    rows.append(_row(cfg, "asymptotics-slope", res.slope, math.inf, True, 0.0))
    rows.append(_row(cfg, "asymptotics-theory",
                     EstimateCI(res.slope.count, res.theoretical_slope, 0.0, 0.0, cfg.level),
                     math.inf, True, 0.0))
    return rows


# ---------------------------------------------------------------------------
# output


def rows_to_csv(rows, columns, config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict | None, list[dict]]:
    """Parse a CSV written by this tool back into ``(config, rows)``."""
    lines = text.splitlines()
    config = None
    if lines and lines[0].startswith("# config: "):
        config = json.loads(lines[0][len("# config: "):])
        lines = lines[1:]
    return config, list(csv.DictReader(lines))


def _emit(cfg: ExperimentConfig, text: str):
    if cfg.out in ("-", ""):
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)


def _finite(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, (tuple, np.ndarray)):
        return _finite(list(obj))
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def cmd_sample_path(cfg: ExperimentConfig) -> list[dict]:
    n = cfg.n0
    path = sample_path_skeleton(cfg.spec(), cfg.t, n, SeedStream(cfg.seed, 0))
    rows = []
    for k, (time, x) in enumerate(zip(path.times, path.points)):
        row = {"k": k, "time": float(time)}
        row.update({f"x_{j + 1}": float(v) for j, v in enumerate(x)})
        rows.append(row)
    return rows


def cmd_verify(cfg: ExperimentConfig, stream=None) -> tuple[int, dict]:
    stream = stream or sys.stderr
    overrides = {"seed": cfg.seed, "workers": cfg.workers, "level": cfg.level}
    results = V.run_claims(cfg.claims or None, cfg.profile, **overrides)
    for r in results:
        print(r.line(), file=stream)
    report = {"config": cfg.to_dict(), "claims": [r.to_dict() for r in results],
              "passed": all(r.passed for r in results)}
    return (EXIT_OK if report["passed"] else EXIT_FAIL), report


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
    except (ConfigError, OSError) as exc:
        print(f"stablehull: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.command == "verify":
            code, report = cmd_verify(cfg)
            _emit(cfg, json.dumps(_finite(report), indent=2) + "\n")
            return code
        if cfg.command == "sample-path":
            rows = cmd_sample_path(cfg)
            cols = ["k", "time"] + [f"x_{j + 1}" for j in range(cfg.dim)]
        else:
            rows = cmd_estimate(cfg)
            cols = CSV_COLUMNS
        if cfg.format == "json":
            text = json.dumps(_finite({"config": cfg.to_dict(), "rows": rows}), indent=2) + "\n"
        else:
            text = rows_to_csv(rows, cols, cfg.to_dict())
        _emit(cfg, text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"stablehull: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"stablehull: unsupported request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"stablehull: runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
