"""Monotone sandwich relaxation between a super-sub and a sub-super barrier.

The primal run starts at the super-sub barrier ``z``: group-1 values only
move down and group-2 values only move up, and every iterate stays in the
sandwich ``w1 <= u1 <= z1``, ``z2 <= u2 <= w2``.  The dual run starts at
``w`` with the orientations reversed.  Both are Gauss-Seidel iterations on
the components, in index order:

* ``relaxation="block"`` (default) solves the full discrete equation of one
  component with the others frozen, by semismooth Newton on the M-matrix
  system;
* ``relaxation="nodal"`` visits nodes lexicographically and solves each
  nodal equation by bisection on its sandwich interval.

``pseudo_time_oracle`` is an independent explicit fixed-point iteration used
to cross-check both.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .barriers import BarrierPair
from .grid import DiscreteSystem, VectorGridFunction

__all__ = [
    "SolveConfig",
    "SolveReport",
    "NodalSolveError",
    "OracleDivergence",
    "perron_solve",
    "perron_solve_dual",
    "pseudo_time_oracle",
    "oracle_step_bound",
]


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-8
    max_sweeps: int = 10000
    relaxation: str = "block"
    monotonicity_slack: float = 1e-12
    snapshot_every: int = 100
    bisection_iterations: int = 60
    newton_iterations: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.relaxation not in ("block", "nodal"):
            raise ValueError(f"relaxation must be 'block' or 'nodal', got {self.relaxation!r}")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")


@dataclass
class SolveReport:
    mode: str
    converged: bool
    sweeps: int
    residual_history: list[float]
    monotonicity_violations: int = 0
    sandwich_violations: int = 0
    wall_time: float = 0.0
    snapshots: list[tuple[int, VectorGridFunction]] = field(default_factory=list, repr=False)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_dict(self) -> dict:
        # wall time is left out so that serialized reports are reproducible
        return {
            "mode": self.mode,
            "converged": self.converged,
            "sweeps": self.sweeps,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
            "monotonicity_violations": self.monotonicity_violations,
            "sandwich_violations": self.sandwich_violations,
        }


class NodalSolveError(RuntimeError):
    """A nodal equation has no root inside its sandwich interval."""

    def __init__(self, message: str, component: int, node: tuple[int, ...]):
        super().__init__(message)
        self.component = component
        self.node = node


class OracleDivergence(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


def _own_derivative(system: DiscreteSystem, j: int, flat: np.ndarray) -> np.ndarray:
    sf = system.spec.structural_form
    if sf.coupling_derivative is not None:
        x = system.x_interior
        r = flat[: system.m1, system.grid.interior].T
        s = flat[system.m1 :, system.grid.interior].T
        d = np.asarray(sf.coupling_derivative[j](x, r, s), dtype=float)
        return np.broadcast_to(d, (system.grid.n_interior,)).astype(float)
    # one-sided difference in the upward direction
    interior = system.grid.interior
    t = flat[j, interior]
    delta = 1e-7 * (1.0 + np.abs(t))
    bumped = flat.copy()
    bumped[j, interior] = t + delta
    return (system.coupling(j, bumped) - system.coupling(j, flat)) / delta


def _block_solve(system: DiscreteSystem, j: int, flat: np.ndarray, iterations: int) -> np.ndarray:
    """Solve component ``j``'s discrete equation with the others frozen.

    Returns the new interior values; ``flat`` is left untouched.
    """
    interior = system.grid.interior
    work = flat.copy()
    K = system.interior_block(j)
    for _ in range(iterations):
        G = system.component_residual(j, work)
        if not np.any(G):
            break
        d = _own_derivative(system, j, work)
        J = (K + sp.diags(d, format="csc")).tocsc()
        step = spla.splu(J).solve(G)
        work[j, interior] -= step
        if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(work[j, interior]))):
            break
    return work[j, interior]


def _nodal_sweep(system, flat, lower, upper, cfg, order):
    """One lexicographic sweep; updates ``flat`` in place.

    Returns the number of nodes whose root would leave the sandwich.
    """
    grid = system.grid
    interior = grid.interior
    slack = cfg.monotonicity_slack
    rows = [K.tocsr() for K in system.matrices]
    diag = [system.diagonal(j) for j in range(system.m)]
    coupling = system.spec.structural_form.coupling
    m1 = system.m1
    for i, node in enumerate(interior):
        x = system.x_interior[i : i + 1]
        for j in order:
            K = rows[j]
            lo_idx, hi_idx = K.indptr[i], K.indptr[i + 1]
            rest = float(K.data[lo_idx:hi_idx] @ flat[j, K.indices[lo_idx:hi_idx]])
            rest -= diag[j][i] * flat[j, node]
            xi = flat[:, node].copy()

            def phi(t):
                xi[j] = t
                return diag[j][i] * t + rest + float(
                    coupling[j](x, xi[None, :m1], xi[None, m1:])[0])

            a, b = lower[j, node], upper[j, node]
            fa, fb = phi(a), phi(b)
            if fa > slack or fb < -slack:
                raise NodalSolveError(
                    f"component {j} at node {grid.node_index(int(node))}: nodal residual "
                    f"has no root in [{a}, {b}] (values {fa}, {fb}); "
                    "check the structural conditions with structure_check",
                    j, grid.node_index(int(node)))
            if fa >= 0:
                flat[j, node] = a
                continue
            if fb <= 0:
                flat[j, node] = b
                continue
            for _ in range(cfg.bisection_iterations):
                mid = 0.5 * (a + b)
                if mid <= a or mid >= b:
                    break
                if phi(mid) > 0:
                    b = mid
                else:
                    a = mid
            flat[j, node] = 0.5 * (a + b)
    return 0


def _relax(system: DiscreteSystem, barriers: BarrierPair, cfg: SolveConfig, mode: str):
    if not barriers.ordering_verified:
        raise ValueError("barriers must be ordering-verified before solving")
    system.check(barriers.z)
    system.check(barriers.w)
    start = barriers.z if mode == "primal" else barriers.w
    U = start.copy()
    flat = U.flat()
    m, m1 = system.m, system.m1
    lower = barriers.lower().reshape(m, -1)
    upper = barriers.upper().reshape(m, -1)
    interior = system.grid.interior
    slack = cfg.monotonicity_slack
    # +1: component may only decrease in this run, -1: only increase
    sign = np.array([1.0] * m1 + [-1.0] * (m - m1))
    if mode == "dual":
        sign = -sign

    t0 = time.perf_counter()
    history = [system.residual(U).max_abs()]
    report = SolveReport(mode, history[0] <= cfg.tol, 0, history)
    if cfg.snapshot_every:
        report.snapshots.append((0, U.copy()))
    sweep = 0
    while not report.converged and sweep < cfg.max_sweeps:
        prev = flat.copy()
        if cfg.relaxation == "block":
            for j in range(m):
                new = _block_solve(system, j, flat, cfg.newton_iterations)
                lo, hi = lower[j, interior], upper[j, interior]
                outside = (new < lo - slack) | (new > hi + slack)
                report.sandwich_violations += int(np.count_nonzero(outside))
                flat[j, interior] = np.clip(new, lo, hi)
        else:
            _nodal_sweep(system, flat, lower, upper, cfg, range(m))
        sweep += 1
        moved = sign[:, None] * (flat - prev)
        report.monotonicity_violations += int(np.count_nonzero(moved > slack))
        history.append(system.residual(U).max_abs())
        report.converged = history[-1] <= cfg.tol
        if cfg.snapshot_every and (sweep % cfg.snapshot_every == 0 or report.converged):
            report.snapshots.append((sweep, U.copy()))
    report.sweeps = sweep
    if cfg.snapshot_every and report.snapshots[-1][0] != sweep:
        report.snapshots.append((sweep, U.copy()))
    report.wall_time = time.perf_counter() - t0
    return U, report


def perron_solve(system: DiscreteSystem, barriers: BarrierPair,
                 cfg: SolveConfig | None = None) -> tuple[VectorGridFunction, SolveReport]:
    """Descend from the super-sub barrier to a discrete solution."""
    return _relax(system, barriers, cfg or SolveConfig(), "primal")


def perron_solve_dual(system: DiscreteSystem, barriers: BarrierPair,
                      cfg: SolveConfig | None = None) -> tuple[VectorGridFunction, SolveReport]:
    """Ascend from the sub-super barrier; mirror image of :func:`perron_solve`."""
    return _relax(system, barriers, cfg or SolveConfig(), "dual")


def oracle_step_bound(system: DiscreteSystem) -> float:
    """Largest explicit step with ``step * (stencil diagonal + coupling bound) <= 1``."""
    lip = system.spec.structural_form.coupling_lipschitz
    if lip is None:
        raise ValueError(
            "operator declares no coupling_lipschitz; pass an explicit step to the oracle")
    diag = max(float(system.diagonal(j).max(initial=0.0)) for j in range(system.m))
    return 1.0 / (diag + lip)


def pseudo_time_oracle(system: DiscreteSystem, U0: VectorGridFunction, step: float | None = None,
                       tol: float = 1e-8, max_steps: int = 1_000_000
                       ) -> tuple[VectorGridFunction, SolveReport]:
    """Explicit iteration ``U <- U - step * F(U)`` on interior nodes.

    Every component's residual is increasing in its own unknown, so the same
    sign drives both groups toward zero residual.
    """
    bound = oracle_step_bound(system) if system.spec.structural_form.coupling_lipschitz \
        is not None else None
    if step is None:
        if bound is None:
            raise ValueError("no step given and no stability bound available")
        step = 0.9 * bound
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if bound is not None and step > bound * (1 + 1e-12):
        raise ValueError(f"step {step} exceeds the stability bound {bound}")
    system.check(U0)
    U = U0.copy()
    flat = U.flat()
    interior = system.grid.interior
    t0 = time.perf_counter()
    res = np.stack([system.component_residual(j, flat) for j in range(system.m)])
    current = float(np.max(np.abs(res), initial=0.0))
    # residual history is sampled every 100 steps, plus the final value
    history = [current]
    best = current
    steps = 0
    while current > tol and steps < max_steps:
        flat[:, interior] -= step * res
        res = np.stack([system.component_residual(j, flat) for j in range(system.m)])
        steps += 1
        current = float(np.max(np.abs(res)))
        if current > 10 * best:
            history.append(current)
            raise OracleDivergence(
                f"residual grew to {current} (best {best}) after {steps} steps", history)
        best = min(best, current)
        if steps % 100 == 0:
            history.append(current)
    if history[-1] != current or len(history) == 1 and steps:
        history.append(current)
    report = SolveReport("oracle", current <= tol, steps, history,
                         wall_time=time.perf_counter() - t0)
    return U, report
