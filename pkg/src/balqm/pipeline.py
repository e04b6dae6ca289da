"""Orchestration: checks, discretization, barriers, solves, verification.

Every stage either runs, fails (with its error recorded) or is skipped with a
machine-readable reason; the report always contains all requested stages.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .barriers import BarrierError, BarrierPair, build_barriers
from .config import RunConfig
from .grid import DiscreteSystem, Grid, VectorGridFunction, build_grid, discretize
from .perron import OracleDivergence, perron_solve, perron_solve_dual, pseudo_time_oracle
from .structure import run_checks
from .viscosity import MisclassifiedError, classify, compare_orderings

log = logging.getLogger(__name__)

__all__ = ["RunReport", "run_pipeline", "emit", "STAGES", "SUBCOMMAND_STAGES"]

STAGES = ("checks", "discretize", "barriers", "primal", "dual", "oracle", "verify")
SUBCOMMAND_STAGES = {
    "check": ("checks",),
    "barriers": ("discretize", "barriers"),
    "solve": ("discretize", "barriers", "primal", "dual", "oracle"),
    "verify": ("discretize", "barriers", "primal", "dual", "oracle", "verify"),
    "all": STAGES,
}
# informational only: the competitive system is not expected to satisfy it
INFORMATIONAL_CHECKS = ("monorig",)


@dataclass
class RunReport:
    config: dict
    stages: dict = field(default_factory=dict)
    checks: dict | None = None
    assertions: dict = field(default_factory=dict)
    grid: Grid | None = None
    fields: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions.values())

    def to_dict(self) -> dict:
        out = {"version": self.version, "config": self.config}
        if self.checks is not None:
            out["checks"] = {k: v.to_dict() for k, v in self.checks.items()}
        out["stages"] = self.stages
        out["assertions"] = self.assertions
        out["passed"] = self.passed
        return out


def _skip(reason: str) -> dict:
    return {"status": "skipped", "reason": reason}


def _max_diff(a: VectorGridFunction, b: VectorGridFunction) -> float:
    return float(np.max(np.abs(a.values - b.values)))


def _snapshot_comparison(system, primal_report, dual_report, tol) -> dict:
    """Compare every dual snapshot (sub-super side) with every primal snapshot."""
    pairs, failures, worst = 0, 0, -math.inf
    for _, W in dual_report.snapshots:
        for _, Z in primal_report.snapshots:
            rep = compare_orderings(system, W, Z, tol=tol, classify_tol=tol)
            pairs += 1
            failures += not rep.holds
            worst = max(worst, rep.group1_excess, rep.group2_excess)
    return {"pairs": pairs, "failures": failures, "worst_excess": worst,
            "holds": failures == 0}


def run_pipeline(cfg: RunConfig, stages=STAGES) -> RunReport:
    stages = tuple(s for s in STAGES if s in stages)
    report = RunReport(config=cfg.echo())
    if cfg.ignored_keys:
        report.config["ignored_keys"] = list(cfg.ignored_keys)
    spec = cfg.build_operator()
    solve_cfg = cfg.solve_config()
    tol = solve_cfg.tol

    gating_names = []
    if "checks" in stages:
        gating_names = list(cfg.checks)
    elif "verify" in stages:
        gating_names = ["cond_i_prime", "cond_ii"]
    if gating_names:
        log.info("running checks %s", gating_names)
        report.checks = run_checks(spec, cfg.sampler_config(), gating_names)
    if "checks" in stages:
        if report.checks is None:
            report.stages["checks"] = _skip("no checks requested")
        else:
            report.stages["checks"] = {
                "status": "ok",
                "passed": {k: v.passed for k, v in report.checks.items()},
            }

    system: DiscreteSystem | None = None
    if "discretize" in stages:
        try:
            grid = build_grid(cfg.grid["dim"], cfg.bounds(), cfg.grid["nodes"])
            system = discretize(spec, grid)
            report.grid = grid
            report.stages["discretize"] = {"status": "ok", "interior_nodes": grid.n_interior,
                                           "spacing": list(grid.spacing)}
        except ValueError as exc:
            report.stages["discretize"] = {"status": "failed", "error": str(exc)}

    barriers: BarrierPair | None = None
    if "barriers" in stages:
        if system is None:
            report.stages["barriers"] = _skip("discretization unavailable")
        elif spec.name != "competitive":
            report.stages["barriers"] = _skip(
                "no barrier construction for operator " + repr(spec.name))
        else:
            try:
                barriers = build_barriers(spec, system.grid, system, tol=tol)
                report.stages["barriers"] = {"status": "ok", **barriers.summary()}
                report.fields["barrier_z"] = barriers.z
                report.fields["barrier_w"] = barriers.w
            except BarrierError as exc:
                report.stages["barriers"] = {"status": "failed", "error": str(exc),
                                             "details": exc.details}

    results = {}
    solve_reports = {}
    for name, fn, enabled in (("primal", perron_solve, True),
                              ("dual", perron_solve_dual, cfg.solver["dual"])):
        if name not in stages:
            continue
        if not enabled:
            report.stages[name] = _skip("disabled in solver config")
        elif barriers is None:
            report.stages[name] = _skip("barriers unavailable")
        else:
            try:
                U, rep = fn(system, barriers, solve_cfg)
                results[name], solve_reports[name] = U, rep
                report.stages[name] = {"status": "ok", **rep.to_dict()}
            except (RuntimeError, ValueError) as exc:
                report.stages[name] = {"status": "failed", "error": str(exc)}
    if "primal" in results:
        report.fields["solution"] = results["primal"]

    if "oracle" in stages:
        if not cfg.solver["oracle"]:
            report.stages["oracle"] = _skip("disabled in solver config")
        elif barriers is None:
            report.stages["oracle"] = _skip("barriers unavailable")
        else:
            try:
                U, rep = pseudo_time_oracle(system, barriers.z, step=cfg.solver["oracle_step"],
                                            tol=tol, max_steps=cfg.solver["oracle_max_steps"])
                results["oracle"], solve_reports["oracle"] = U, rep
                report.stages["oracle"] = {"status": "ok", **rep.to_dict()}
            except OracleDivergence as exc:
                report.stages["oracle"] = {"status": "failed", "error": str(exc),
                                           "residual_history": exc.history}
            except ValueError as exc:
                report.stages["oracle"] = {"status": "failed", "error": str(exc)}

    uniqueness_gate = None
    if report.checks is not None:
        for key, label in (("cond_i_prime", "condition i'"), ("cond_ii", "condition ii")):
            if key not in report.checks:
                uniqueness_gate = uniqueness_gate or f"{label} not checked"
            elif not report.checks[key].passed:
                uniqueness_gate = uniqueness_gate or f"{label} failed"
    else:
        uniqueness_gate = "condition i' not checked"

    verify = None
    if "verify" in stages:
        if "primal" not in results:
            report.stages["verify"] = _skip("primal solution unavailable")
        else:
            U = results["primal"]
            verify = {"status": "ok"}
            verify["classification"] = classify(system, U, tol).to_dict()
            try:
                verify["barrier_comparison"] = compare_orderings(
                    system, barriers.w, barriers.z, tol=tol, classify_tol=tol).to_dict()
            except MisclassifiedError as exc:
                verify["barrier_comparison"] = {"holds": False, "error": str(exc)}
            names = [n for n in ("primal", "dual", "oracle") if n in results]
            verify["discrepancies"] = {
                f"{a}-{b}": _max_diff(results[a], results[b])
                for i, a in enumerate(names) for b in names[i + 1 :]
            }
            if "dual" in solve_reports and solve_cfg.snapshot_every:
                try:
                    verify["snapshot_comparison"] = _snapshot_comparison(
                        system, solve_reports["primal"], solve_reports["dual"], tol)
                except MisclassifiedError as exc:
                    verify["snapshot_comparison"] = {"holds": False, "error": str(exc)}
            if uniqueness_gate is not None:
                verify["uniqueness"] = _skip(uniqueness_gate)
            elif len(names) < 2:
                verify["uniqueness"] = _skip("fewer than two solution routes available")
            else:
                worst = max(verify["discrepancies"].values())
                verify["uniqueness"] = {"status": "ok", "max_discrepancy": worst,
                                        "bound": 2 * tol, "agree": worst <= 2 * tol}
            report.stages["verify"] = verify

    _assertions(cfg, report, stages, results, solve_reports, verify)
    return report


def _assertions(cfg, report, stages, results, solve_reports, verify):
    requested = cfg.assertions
    if requested is None:
        requested = []
        if "checks" in stages and report.checks:
            requested.append("hypotheses")
        if "barriers" in stages:
            requested.append("barriers")
        if "primal" in stages:
            requested.append("converged")
        if "verify" in stages:
            requested.append("solution")
            if report.checks and "cond_i_prime" in report.checks and "cond_ii" in report.checks:
                requested.append("uniqueness")
    out = {}
    for name in requested:
        if name == "hypotheses":
            if report.checks is None:
                out[name] = {"passed": False, "reason": "checks not run"}
            else:
                failed = sorted(k for k, v in report.checks.items()
                                if not v.passed and k not in INFORMATIONAL_CHECKS)
                out[name] = {"passed": not failed, "failed": failed}
        elif name == "barriers":
            st = report.stages.get("barriers", {})
            out[name] = {"passed": st.get("status") == "ok" and st.get("ordering_verified", False)}
        elif name == "converged":
            ran = [n for n in ("primal", "dual", "oracle") if n in solve_reports]
            missing = [n for n in ("primal", "dual", "oracle")
                       if n in stages and report.stages.get(n, {}).get("status") == "failed"]
            ok = "primal" in solve_reports and not missing and all(
                solve_reports[n].converged for n in ran)
            out[name] = {"passed": ok,
                         "routes": {n: solve_reports[n].converged for n in ran},
                         "failed_routes": missing}
        elif name == "solution":
            verdict = verify["classification"]["verdict"] if verify else None
            out[name] = {"passed": verdict == "solution", "verdict": verdict}
        elif name == "uniqueness":
            u = verify.get("uniqueness") if verify else None
            if u is None:
                out[name] = {"passed": False, "reason": "verification not run"}
            elif u["status"] == "skipped":
                out[name] = {"passed": False, "reason": u["reason"]}
            else:
                out[name] = {"passed": u["agree"]}
    report.assertions = out


def _clean(obj):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def report_json(report: RunReport) -> str:
    return json.dumps(_clean(report.to_dict()), indent=2) + "\n"


def write_csv(path: str, grid: Grid, U: VectorGridFunction) -> None:
    axis_names = ["x", "y"][: grid.dim]
    header = axis_names + [f"u1_{k + 1}" for k in range(U.m1)] + \
        [f"u2_{k + 1}" for k in range(U.m2)]
    flat = U.flat()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, pt in enumerate(grid.points):
            writer.writerow([repr(float(v)) for v in pt] + [repr(float(v)) for v in flat[:, i]])


def read_csv(path: str, grid: Grid, m1: int) -> VectorGridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    values = data[:, grid.dim :].T.reshape((-1,) + grid.shape)
    return VectorGridFunction(values, m1)


def emit(report: RunReport, out_dir: str) -> list[str]:
    """Write ``report.json`` and one CSV per field set; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        fh.write(report_json(report))
    written.append(path)
    for name, U in report.fields.items():
        path = os.path.join(out_dir, f"{name}.csv")
        write_csv(path, report.grid, U)
        written.append(path)
    return written
