"""Experiment driver: validated configs, dispatch, reports and replay.

A config is a JSON object ``{"command": ..., "seed": ..., "params": {...}}``.
Missing parameters are filled from :data:`DEFAULTS`; the merged config is
echoed into every report so a run can be replayed from its report alone.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import scipy
import scipy.fft

from . import __version__
from . import bilinear, duhamel, selfsimilar
from .spectral import DEFAULT_BOX_LENGTH, CauchyData, Grid, random_cauchy_data, save_field
from .streams import stream

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "verify-kernel", "estimate-constant", "selfsimilar-search", "continuity", "schedule")

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"n": 64, "box_length": DEFAULT_BOX_LENGTH, "K": 0.1, "split": 0.5, "M": 64,
                 "k_max": 30, "tol": 1e-10, "C": duhamel.DEFAULT_C, "T": None, "zero_data": False,
                 "oracle_steps": 0},
    "verify-kernel": {"samples": 1_000_000, "lattice": 64, "top": 20},
    "estimate-constant": {"trials": 64, "n": 64, "box_length": DEFAULT_BOX_LENGTH, "T_w": 8.0,
                          "dt": 0.1, "refine": False},
    "selfsimilar-search": {"seeds": 32, "nr": 64, "ntheta": 64, "max_iter": 200, "tol": 1e-6,
                           "residual_tol": 1e-8, "penalty": 1.0, "amplitude": 0.5, "kmax": 2},
    "continuity": {"n": 64, "box_length": DEFAULT_BOX_LENGTH, "K": 0.1, "eps": [1e-2, 1e-3], "M": 64,
                   "k_max": 60, "tol": 1e-13, "C": duhamel.DEFAULT_C},
    "schedule": {"K": 1.0, "C": 1.0, "T": None},
}
RANDOMIZED = {"simulate", "verify-kernel", "estimate-constant", "selfsimilar-search", "continuity"}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_grid_n = {"type": "integer", "minimum": 8, "multipleOf": 2}
_opt_pos = {"anyOf": [{"type": "null"}, _pos]}

PARAM_SCHEMAS: dict[str, dict] = {
    "simulate": {"n": _grid_n, "box_length": _pos, "K": {"type": "number", "minimum": 0}, "M": _posint,
                 "split": {"type": "number", "minimum": 0, "maximum": 1}, "k_max": _posint, "tol": _pos,
                 "C": _pos, "T": _opt_pos, "zero_data": {"type": "boolean"},
                 "oracle_steps": {"type": "integer", "minimum": 0}},
    "verify-kernel": {"samples": _posint, "lattice": {"type": "integer", "minimum": 2}, "top": _posint},
    "estimate-constant": {"trials": _posint, "n": _grid_n, "box_length": _pos, "T_w": _pos, "dt": _pos,
                          "refine": {"type": "boolean"}},
    "selfsimilar-search": {"seeds": _posint, "nr": {"type": "integer", "minimum": 16},
                           "ntheta": {"type": "integer", "minimum": 4, "multipleOf": 2},
                           "max_iter": {"type": "integer", "minimum": 0}, "tol": _pos, "residual_tol": _pos,
                           "penalty": {"type": "number", "minimum": 0}, "amplitude": _num,
                           "kmax": _posint},
    "continuity": {"n": _grid_n, "box_length": _pos, "K": _pos, "M": _posint, "k_max": _posint, "tol": _pos,
                   "C": _pos, "eps": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}},
    "schedule": {"K": _pos, "C": _pos, "T": _opt_pos},
}


def config_schema(command: str) -> dict:
    return {
        "type": "object",
        "properties": {
            "command": {"enum": list(COMMANDS)},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "params": {"type": "object", "properties": PARAM_SCHEMAS[command], "additionalProperties": False},
        },
        "required": ["command", "params"] + (["seed"] if command in RANDOMIZED else []),
        "additionalProperties": False,
    }


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``path: message`` diagnostics."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int | None = None

    @classmethod
    def build(cls, raw: dict | None = None, command: str | None = None, seed: int | None = None) -> "RunConfig":
        """Merge defaults, file values and overrides, then validate."""
        raw = dict(raw or {})
        command = command or raw.get("command")
        if command not in COMMANDS:
            raise ConfigError([f"command: must be one of {', '.join(COMMANDS)} (got {command!r})"])
        if raw.get("command", command) != command:
            raise ConfigError([f"command: config says {raw['command']!r} but {command!r} was requested"])
        params = dict(DEFAULTS[command])
        params.update(raw.get("params", {}))
        merged = {"command": command, "params": params}
        s = seed if seed is not None else raw.get("seed", 0 if command in RANDOMIZED else None)
        if s is not None:
            merged["seed"] = s
        extra = set(raw) - {"command", "params", "seed"}
        errors = [f"{k}: unexpected top-level field" for k in sorted(extra)]
        validator = jsonschema.Draft7Validator(config_schema(command))
        for err in sorted(validator.iter_errors(merged), key=lambda e: list(e.path)):
            path = ".".join(str(p) for p in err.path) or "<root>"
            errors.append(f"{path}: {err.message}")
        if errors:
            raise ConfigError(errors)
        return cls(command, params, merged.get("seed"))

    def as_dict(self) -> dict:
        d = {"command": self.command, "params": self.params}
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass
class RunReport:
    config: dict
    versions: dict
    wall_time: float
    checks: list
    results: dict
    artifacts: list = field(default_factory=list)
    replay: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks if not c.get("informational"))

    def as_dict(self) -> dict:
        d = {"config": self.config, "versions": self.versions, "wall_time": self.wall_time,
             "checks": self.checks, "results": self.results, "artifacts": self.artifacts,
             "passed": self.passed}
        if self.replay is not None:
            d["replay"] = self.replay
        return d

    def write(self, path: Path) -> Path:
        path.write_text(json.dumps(_jsonable(self.as_dict()), indent=2, sort_keys=True))
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _check(name: str, value, threshold, op: str = "<=", informational: bool = False) -> dict:
    ops = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b, "==": lambda a, b: a == b}
    return {"name": name, "value": value, "threshold": threshold, "op": op,
            "passed": bool(ops[op](value, threshold)), "informational": informational}


def _versions() -> dict:
    return {"cmcwave": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


# -- commands ----------------------------------------------------------------------

def _cmd_schedule(cfg: RunConfig, out: Path):
    p = cfg.params
    s = duhamel.make_schedule(p["K"], p["C"], p["T"])
    checks = [_check(f"schedule condition {k}", bool(v), True, "==") for k, v in sorted(s.checks.items())]
    return checks, {"schedule": s.as_dict()}, []


def _cmd_simulate(cfg: RunConfig, out: Path):
    p = cfg.params
    grid = Grid(p["n"], p["box_length"])
    schedule = duhamel.make_schedule(max(p["K"], 1e-300), p["C"], p["T"])
    if p["zero_data"] or p["K"] == 0:
        data = CauchyData.zeros(grid)
    else:
        data = random_cauchy_data(grid, stream(cfg.seed), p["K"], p["split"])
    sol, ledger = duhamel.picard_solve(data, schedule, p["M"], p["k_max"], p["tol"], p["T"])
    ratios = ledger.ratios()
    checks = [
        _check("picard converged", ledger.converged, True, "=="),
        _check("max difference ratio (k>=1)", float(ratios.max()) if ratios.size else 0.0, 0.6),
        _check("max wedge norm / A", max(ledger.wedge_norm) / schedule.A if schedule.A > 0 else 0.0, 1.05),
        _check("integral equation residual", sol.residual, 1e-8),
        _check("schedule valid", schedule.valid, True, "=="),
    ]
    results = {"schedule": schedule.as_dict(), "data_norm": data.norm(), "iterations": len(ledger),
               "diff_norm": ledger.diff_norm, "wedge_norm": ledger.wedge_norm,
               "residual": sol.residual, "guarantees_void": ledger.guarantees_void}
    arts = []
    ledger.to_csv(out / "ledger.csv")
    arts.append("ledger.csv")
    for path in save_field(sol.snapshot(sol.M), out / "u_final"):
        arts.append(path.name)
    if p["oracle_steps"] > 0:
        dt = sol.T / (sol.M * p["oracle_steps"])
        ref = duhamel.leapfrog_oracle(data, sol.T, dt, sol.M)
        err = float(duhamel.node_norms(grid, ref.u_hat - sol.u_hat, 1.5).max())
        results["oracle_difference"] = err
        checks.append(_check("oracle difference / (10 dt^2 K)", err / (10 * (sol.T / sol.M) ** 2 * max(p["K"], 1e-300)), 1.0))
    return checks, results, arts


def _cmd_verify_kernel(cfg: RunConfig, out: Path):
    p = cfg.params
    rand = bilinear.random_samples(stream(cfg.seed), p["samples"])
    lat = bilinear.lattice_samples(p["lattice"])
    results, checks = {}, []
    for name, s in (("random", rand), ("lattice", lat)):
        r = bilinear.scan_kernel(*s)
        results[name] = r
        checks += [
            _check(f"{name}: max kernel quotient", r["max_quotient"], 0.5 + 1e-12),
            _check(f"{name}: change-of-variables error", r["max_identity_error"], 1e-10),
            _check(f"{name}: jacobian vs central difference (rel)", r["max_jacobian_rel_error"], 1e-6),
            _check(f"{name}: min jacobian", r["min_jacobian"], 0.0, ">="),
            _check(f"{name}: denominator identity error", r["max_denominator_identity_error"], 1e-12),
        ]
    rows = bilinear.extremes(*rand, top=p["top"])
    with open(out / "kernel_extremes.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return checks, results, ["kernel_extremes.csv"]


def _constant_stats(p, seed, scale: int):
    grid = Grid(p["n"] * scale, p["box_length"])
    return bilinear.estimate_constant(p["trials"], grid, p["T_w"] * scale, seed, p["dt"])


def _cmd_estimate_constant(cfg: RunConfig, out: Path):
    p = cfg.params
    base = _constant_stats(p, cfg.seed, 1)
    results = {"base": base}
    checks = []
    for name, st in base["per_sign"].items():
        checks.append(_check(f"{name} max ratio finite", bool(np.isfinite(st["max"])), True, "=="))
    pp = base["per_sign"]["(+,+)"]["max"]
    checks.append(_check("(+,-) max / (+,+) max", base["per_sign"]["(+,-)"]["max"] / pp, 3.0, informational=True))
    if p["refine"]:
        fine = _constant_stats(p, cfg.seed, 2)
        results["refined"] = fine
        change = abs(fine["C"] - base["C"]) / base["C"]
        results["relative_change"] = change
        checks.append(_check("relative change of C under doubling n and T_w", change, 0.10))
    (out / "constant.json").write_text(json.dumps(_jsonable(results), indent=2, sort_keys=True))
    return checks, results, ["constant.json"]


def _cmd_selfsimilar(cfg: RunConfig, out: Path):
    p = cfg.params
    grid = selfsimilar.PolarGrid(p["nr"], p["ntheta"])
    runs, arts, rows = [], ["search.json", "identity.csv"], []
    rhos = np.linspace(0.05, 0.95, 19)
    for i in range(p["seeds"]):
        seed = cfg.seed + i
        r = selfsimilar.profile_search(seed, grid, p["max_iter"], p["tol"], p["residual_tol"], p["penalty"],
                                       p["amplitude"], p["kmax"])
        runs.append(r.as_dict())
        rows += [{"seed": seed, **row} for row in selfsimilar.identity_table(r.profile, rhos)]
        if r.classification == "nontrivial":
            for path in selfsimilar.save_profile(r.profile, out / f"counterexample_seed{seed}"):
                arts.append(path.name)
    (out / "search.json").write_text(json.dumps(_jsonable(runs), indent=2, sort_keys=True))
    with open(out / "identity.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["seed", "rho", "identity"])
        w.writeheader()
        w.writerows(rows)
    counts = {c: sum(r["classification"] == c for r in runs) for c in ("trivial", "nontrivial", "not-converged")}
    checks = [_check("nontrivial converged profiles", counts["nontrivial"], 0),
              _check("converged runs", counts["trivial"] + counts["nontrivial"], 1, ">=", informational=True)]
    results = {"counts": counts, "runs": runs, "regularity_note":
               "band-limited Chebyshev x Fourier profiles only; a narrower class than C^2"}
    return checks, results, arts


def _cmd_continuity(cfg: RunConfig, out: Path):
    p = cfg.params
    grid = Grid(p["n"], p["box_length"])
    schedule = duhamel.make_schedule(p["K"], p["C"])
    rng = stream(cfg.seed)
    eps_max = max(p["eps"])
    data = random_cauchy_data(grid, rng, p["K"] - eps_max)
    pert = random_cauchy_data(grid, rng, 1.0)
    rows, checks = [], []
    for eps in p["eps"]:
        r = duhamel.continuity_experiment(data, pert, eps, schedule, p["M"], p["k_max"], p["tol"])
        rows.append(r)
        checks.append(_check(f"difference / (B eps) at eps={eps:g}", r["ratio"], 1.05))
        checks.append(_check(f"perturbed data within K at eps={eps:g}", r["within_K"], True, "=="))
    return checks, {"schedule": schedule.as_dict(), "runs": rows}, []


_DISPATCH = {"schedule": _cmd_schedule, "simulate": _cmd_simulate, "verify-kernel": _cmd_verify_kernel,
             "estimate-constant": _cmd_estimate_constant, "selfsimilar-search": _cmd_selfsimilar,
             "continuity": _cmd_continuity}


def run(config: RunConfig, out_dir: str | Path = "runs", threads: int | None = None) -> RunReport:
    """Execute ``config``, write artifacts and ``report.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with scipy.fft.set_workers(threads or 1):
        try:
            checks, results, arts = _DISPATCH[config.command](config, out)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            raise type(exc)(f"{config.command}: {exc}") from exc
    report = RunReport(config.as_dict(), _versions(), time.perf_counter() - t0, checks, results,
                       sorted(arts) + ["report.json"])
    report.write(out / "report.json")
    for c in checks:
        log.info("%s %s: %s %s %s", "PASS" if c["passed"] else "FAIL", c["name"], c["value"], c["op"],
                 c["threshold"])
    return report


def _compare(a, b, path="", rtol=1e-12) -> list[str]:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}{k}: missing")
            else:
                out += _compare(a[k], b[k], f"{path}{k}.", rtol)
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path[:-1]}: length {len(a)} != {len(b)}"]
        return [m for i, (x, y) in enumerate(zip(a, b)) for m in _compare(x, y, f"{path}{i}.", rtol)]
    if isinstance(a, bool) or isinstance(b, bool) or not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
        return [] if a == b else [f"{path[:-1]}: {a!r} != {b!r}"]
    if a == b or abs(a - b) <= rtol * max(abs(a), abs(b)):
        return []
    return [f"{path[:-1]}: {a!r} != {b!r}"]


def replay(report_path: str | Path, out_dir: str | Path | None = None, seed: int | None = None,
           threads: int | None = None) -> RunReport:
    """Re-run the config embedded in a report and compare every measured scalar."""
    report_path = Path(report_path)
    if not report_path.is_file():
        raise FileNotFoundError(f"no report at {report_path}")
    old = json.loads(report_path.read_text())
    for name in old.get("artifacts", []):
        if not (report_path.parent / name).exists():
            raise FileNotFoundError(f"artifact {name} listed in the report is missing")
    cfg_old = old["config"]
    cfg = RunConfig.build(cfg_old, seed=seed)
    new = run(cfg, out_dir or report_path.parent / "replay", threads)
    fresh = json.loads(json.dumps(_jsonable(new.as_dict())))
    config_mismatch = cfg.as_dict() != cfg_old
    mismatches = _compare({"checks": old["checks"], "results": old["results"]},
                          {"checks": fresh["checks"], "results": fresh["results"]})
    new.replay = {"source": str(report_path), "config_mismatch": config_mismatch,
                  "matches": not mismatches and not config_mismatch, "mismatches": mismatches[:50]}
    new.write(Path(out_dir or report_path.parent / "replay") / "report.json")
    return new
