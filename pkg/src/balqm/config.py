"""JSON run configuration: parsing, defaults and validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from . import operators as ops
from .operators import OperatorSpec, Partition
from .perron import SolveConfig
from .structure import SamplerConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "CHECKS", "ASSERTIONS"]

CHECKS = ("ellipticity", "balanced_qm", "quasi_monotone", "cond_i", "cond_i_prime", "cond_ii")
ASSERTIONS = ("hypotheses", "barriers", "converged", "solution", "uniqueness")
DATA_KINDS = {
    "constant": {"value"},
    "affine": {"offset", "slope"},
    "product_of_sines": {"amplitude", "frequency"},
    "gaussian_bump": {"amplitude", "center", "width"},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class RunConfig:
    operator: dict
    grid: dict
    checks: list[str]
    sampler: dict
    solver: dict
    assertions: list[str] | None
    output: dict
    seed: int
    ignored_keys: list[str] = field(default_factory=list)

    def echo(self) -> dict:
        return {
            "operator": self.operator,
            "grid": self.grid,
            "checks": list(self.checks),
            "sampler": self.sampler,
            "solver": self.solver,
            "assertions": None if self.assertions is None else list(self.assertions),
            "output": self.output,
            "seed": self.seed,
        }

    def sampler_config(self) -> SamplerConfig:
        s = self.sampler
        return SamplerConfig(
            sample_count=s["sample_count"],
            value_range=tuple(s["value_range"]),
            gradient_range=tuple(s["gradient_range"]),
            matrix_scale=s["matrix_scale"],
            seed=self.seed,
            atol=s["atol"],
        )

    def solve_config(self) -> SolveConfig:
        s = self.solver
        return SolveConfig(tol=s["tol"], max_sweeps=s["max_sweeps"],
                           relaxation=s["relaxation"], snapshot_every=s["snapshot_every"])

    def bounds(self) -> list[tuple[float, float]]:
        return [tuple(b) for b in self.grid["bounds"]]

    def build_operator(self) -> OperatorSpec:
        op, dim, bounds = self.operator, self.grid["dim"], self.bounds()
        if op["name"] == "competitive":
            return ops.make_competitive(
                op["lambda"], op["alpha"], op["beta"],
                make_data(op["f"], bounds), make_data(op["g"], bounds), dim=dim, bounds=bounds)
        return ops.make_diagonal_linear(
            op["lambdas"], [make_data(d, bounds) for d in op["data"]],
            Partition(op["m1"], len(op["lambdas"]) - op["m1"]), dim=dim, bounds=bounds)


def make_data(d: dict, bounds):
    kind = d["kind"]
    if kind == "constant":
        return ops.constant(d["value"])
    if kind == "affine":
        return ops.affine(d["offset"], d["slope"])
    if kind == "product_of_sines":
        return ops.product_of_sines(d["amplitude"], bounds, d["frequency"])
    return ops.gaussian_bump(d["amplitude"], d["center"], d["width"])


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict
        self.ignored: list[str] = []

    def section(self, raw: Any, path: str, allowed: set[str]) -> dict:
        if not isinstance(raw, dict):
            raise ConfigError(path, "expected an object")
        for key in raw:
            if key not in allowed:
                where = f"{path}.{key}" if path else key
                if self.strict:
                    raise ConfigError(where, "unknown key")
                self.ignored.append(where)
        return raw


def _number(raw, path, *, positive=False, nonneg=False, integer=False, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(path, f"expected a number, got {raw!r}")
    if integer and not float(raw).is_integer():
        raise ConfigError(path, f"expected an integer, got {raw!r}")
    if raw != raw or raw in (float("inf"), float("-inf")):
        raise ConfigError(path, "must be finite")
    if positive and not raw > 0:
        raise ConfigError(path, f"must be positive, got {raw}")
    if nonneg and raw < 0:
        raise ConfigError(path, f"must be nonnegative, got {raw}")
    if minimum is not None and raw < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {raw}")
    return int(raw) if integer else float(raw)


def _interval(raw, path):
    if not isinstance(raw, list) or len(raw) != 2:
        raise ConfigError(path, "expected [low, high]")
    lo, hi = _number(raw[0], f"{path}[0]"), _number(raw[1], f"{path}[1]")
    if not lo < hi:
        raise ConfigError(path, f"low must be below high, got [{lo}, {hi}]")
    return [lo, hi]


def _vector(raw, path, length):
    if not isinstance(raw, list) or len(raw) != length:
        raise ConfigError(path, f"expected a list of {length} numbers")
    return [_number(v, f"{path}[{k}]") for k, v in enumerate(raw)]


def _data(rd: _Reader, raw, path, dim) -> dict:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return {"kind": "constant", "value": _number(raw, path)}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(path, "expected a number or an object with 'kind'")
    kind = raw["kind"]
    if kind not in DATA_KINDS:
        raise ConfigError(f"{path}.kind", f"unknown data kind {kind!r}; "
                          f"choose from {sorted(DATA_KINDS)}")
    rd.section(raw, path, DATA_KINDS[kind] | {"kind"})
    out: dict = {"kind": kind}
    if kind == "constant":
        out["value"] = _number(raw.get("value", 0.0), f"{path}.value")
    elif kind == "affine":
        out["offset"] = _number(raw.get("offset", 0.0), f"{path}.offset")
        out["slope"] = _vector(raw.get("slope", [0.0] * dim), f"{path}.slope", dim)
    elif kind == "product_of_sines":
        out["amplitude"] = _number(raw.get("amplitude", 1.0), f"{path}.amplitude")
        out["frequency"] = _number(raw.get("frequency", 1), f"{path}.frequency",
                                   integer=True, minimum=1)
    else:
        out["amplitude"] = _number(raw.get("amplitude", 1.0), f"{path}.amplitude")
        out["center"] = _vector(raw.get("center", [0.5] * dim), f"{path}.center", dim)
        out["width"] = _number(raw.get("width", 0.1), f"{path}.width", positive=True)
    return out


def _grid(rd, raw, path) -> dict:
    rd.section(raw, path, {"dim", "bounds", "nodes"})
    dim = _number(raw.get("dim", 1), f"{path}.dim", integer=True)
    if dim not in (1, 2):
        raise ConfigError(f"{path}.dim", f"must be 1 or 2, got {dim}")
    bounds_raw = raw.get("bounds", [[0.0, 1.0]] * dim)
    if not isinstance(bounds_raw, list) or len(bounds_raw) != dim:
        raise ConfigError(f"{path}.bounds", f"expected {dim} intervals")
    bounds = [_interval(b, f"{path}.bounds[{k}]") for k, b in enumerate(bounds_raw)]
    nodes_raw = raw.get("nodes", [101] * dim if dim == 1 else [33, 33])
    if isinstance(nodes_raw, int) and not isinstance(nodes_raw, bool):
        nodes_raw = [nodes_raw] * dim
    if not isinstance(nodes_raw, list) or len(nodes_raw) != dim:
        raise ConfigError(f"{path}.nodes", f"expected {dim} node counts")
    nodes = [_number(n, f"{path}.nodes[{k}]", integer=True, minimum=3)
             for k, n in enumerate(nodes_raw)]
    return {"dim": dim, "bounds": bounds, "nodes": nodes}


def _operator(rd, raw, path, dim) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    name = raw.get("name", "competitive")
    if name == "competitive":
        rd.section(raw, path, {"name", "lambda", "alpha", "beta", "f", "g"})
        out = {"name": name}
        for key, default in (("lambda", 2.0), ("alpha", 0.5), ("beta", 0.5)):
            out[key] = _number(raw.get(key, default), f"{path}.{key}", positive=True)
        for key in ("f", "g"):
            out[key] = _data(rd, raw.get(key, {"kind": "constant", "value": 1.0}),
                             f"{path}.{key}", dim)
        return out
    if name == "diagonal_linear":
        rd.section(raw, path, {"name", "lambdas", "data", "m1"})
        lams_raw = raw.get("lambdas", [1.0])
        if not isinstance(lams_raw, list) or not lams_raw:
            raise ConfigError(f"{path}.lambdas", "expected a nonempty list")
        lams = [_number(v, f"{path}.lambdas[{k}]", positive=True) for k, v in enumerate(lams_raw)]
        data_raw = raw.get("data", [0.0] * len(lams))
        if not isinstance(data_raw, list) or len(data_raw) != len(lams):
            raise ConfigError(f"{path}.data", f"expected {len(lams)} data entries")
        data = [_data(rd, d, f"{path}.data[{k}]", dim) for k, d in enumerate(data_raw)]
        m1 = _number(raw.get("m1", len(lams)), f"{path}.m1", integer=True, minimum=1)
        if m1 > len(lams):
            raise ConfigError(f"{path}.m1", f"must be <= {len(lams)}")
        return {"name": name, "lambdas": lams, "data": data, "m1": m1}
    raise ConfigError(f"{path}.name", f"unknown operator {name!r}")


def _sampler(rd, raw, path) -> dict:
    rd.section(raw, path, {"sample_count", "value_range", "gradient_range", "matrix_scale",
                           "atol"})
    return {
        "sample_count": _number(raw.get("sample_count", 10000), f"{path}.sample_count",
                                integer=True, minimum=1),
        "value_range": _interval(raw.get("value_range", [-5.0, 5.0]), f"{path}.value_range"),
        "gradient_range": _interval(raw.get("gradient_range", [-5.0, 5.0]),
                                    f"{path}.gradient_range"),
        "matrix_scale": _number(raw.get("matrix_scale", 5.0), f"{path}.matrix_scale",
                                positive=True),
        "atol": _number(raw.get("atol", 1e-10), f"{path}.atol", nonneg=True),
    }


def _solver(rd, raw, path) -> dict:
    rd.section(raw, path, {"tol", "max_sweeps", "relaxation", "snapshot_every", "dual",
                           "oracle", "oracle_step", "oracle_max_steps"})
    relaxation = raw.get("relaxation", "block")
    if relaxation not in ("block", "nodal"):
        raise ConfigError(f"{path}.relaxation", f"must be 'block' or 'nodal', got {relaxation!r}")
    out = {
        "tol": _number(raw.get("tol", 1e-8), f"{path}.tol", positive=True),
        "max_sweeps": _number(raw.get("max_sweeps", 10000), f"{path}.max_sweeps",
                              integer=True, minimum=1),
        "relaxation": relaxation,
        "snapshot_every": _number(raw.get("snapshot_every", 100), f"{path}.snapshot_every",
                                  integer=True, minimum=0),
    }
    for key in ("dual", "oracle"):
        value = raw.get(key, True)
        if not isinstance(value, bool):
            raise ConfigError(f"{path}.{key}", "expected true or false")
        out[key] = value
    step = raw.get("oracle_step")
    out["oracle_step"] = None if step is None else _number(step, f"{path}.oracle_step",
                                                           positive=True)
    out["oracle_max_steps"] = _number(raw.get("oracle_max_steps", 1_000_000),
                                      f"{path}.oracle_max_steps", integer=True, minimum=1)
    return out


def _names(raw, path, allowed) -> list[str]:
    if not isinstance(raw, list):
        raise ConfigError(path, "expected a list")
    for k, v in enumerate(raw):
        if v not in allowed:
            raise ConfigError(f"{path}[{k}]", f"unknown entry {v!r}; choose from {list(allowed)}")
    return list(raw)


def parse_config(text: str, strict: bool = True) -> RunConfig:
    """Parse and validate a JSON run configuration, filling defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}") from None
    rd = _Reader(strict)
    rd.section(raw, "", {"operator", "grid", "checks", "sampler", "solver", "assertions",
                         "output", "seed"})
    grid = _grid(rd, raw.get("grid", {}), "grid")
    operator = _operator(rd, raw.get("operator", {}), "operator", grid["dim"])
    checks = _names(raw.get("checks", list(CHECKS)), "checks", CHECKS)
    sampler = _sampler(rd, raw.get("sampler", {}), "sampler")
    solver = _solver(rd, raw.get("solver", {}), "solver")
    assertions = raw.get("assertions")
    if assertions is not None:
        assertions = _names(assertions, "assertions", ASSERTIONS)
    output = rd.section(raw.get("output", {}), "output", {"dir"})
    out_dir = output.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir", "expected a nonempty path string")
    seed = _number(raw.get("seed", 0), "seed", integer=True, nonneg=True)
    cfg = RunConfig(operator, grid, checks, sampler, solver, assertions, {"dir": out_dir}, seed,
                    ignored_keys=rd.ignored)
    try:
        cfg.build_operator()
    except ValueError as exc:
        raise ConfigError("operator", str(exc)) from None
    return cfg
