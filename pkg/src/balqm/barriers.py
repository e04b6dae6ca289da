"""Barrier construction for the competitive two-species system.

Four scalar Dirichlet problems on the same five-point (three-point in 1D)
stencil as the discretized system:

    u_hi:  -Δu + λu = f
    v_lo:  -Δv + λv + β max(u_hi, v) = g
    v_hi:  -Δv + λv = g
    u_lo:  -Δu + λu + α max(u, v_hi) = f

give a super-sub pair ``z = (u_hi, v_lo)`` and a sub-super pair
``w = (u_lo, v_hi)`` with ``u_lo <= u_hi`` and ``v_lo <= v_hi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DiscreteSystem, Grid, VectorGridFunction, discretize, stencil_matrix
from .operators import OperatorSpec
from .viscosity import Classification, classify

__all__ = [
    "BarrierPair",
    "BarrierError",
    "PolicyIterationError",
    "PolicyResult",
    "solve_scalar_linear",
    "solve_scalar_semilinear",
    "build_barriers",
]


class BarrierError(RuntimeError):
    def __init__(self, message: str, details: dict):
        super().__init__(message)
        self.details = details


class PolicyIterationError(RuntimeError):
    def __init__(self, message: str, policies: tuple[np.ndarray, np.ndarray]):
        super().__init__(message)
        self.policies = policies


def _nodal(grid: Grid, data) -> np.ndarray:
    if callable(data):
        return np.asarray(data(grid.points), dtype=float).reshape(grid.shape)
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.shape, float(arr))
    return arr.reshape(grid.shape)


def _laplacian(grid: Grid) -> sp.csc_matrix:
    K = stencil_matrix(grid, (1.0,) * grid.dim)
    return K[:, grid.interior].tocsc()


def _solve(A: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    lu = spla.splu(A)
    x = lu.solve(rhs)
    # one step of iterative refinement keeps the residual at roundoff level
    return x + lu.solve(rhs - A @ x)


def solve_scalar_linear(grid: Grid, lam: float, data) -> np.ndarray:
    """Solve ``-Δu + λu = data`` with zero Dirichlet data; returns nodal values."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    rhs = _nodal(grid, data).ravel()[grid.interior]
    L = _laplacian(grid)
    A = (L + lam * sp.identity(grid.n_interior, format="csc")).tocsc()
    out = np.zeros(grid.size)
    out[grid.interior] = _solve(A, rhs)
    return out.reshape(grid.shape)


@dataclass
class PolicyResult:
    values: np.ndarray
    policies: int
    residual: float


def solve_scalar_semilinear(grid: Grid, lam: float, coupling_weight: float, frozen_field,
                            data, max_policy_iterations: int = 100) -> PolicyResult:
    """Solve ``-Δv + λv + w max(frozen, v) = data`` by policy iteration.

    A policy marks the nodes where the maximum is attained by the unknown.
    Each policy gives a linear M-matrix system; iteration stops when the
    policy repeats.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if coupling_weight < 0:
        raise ValueError(f"coupling weight must be nonnegative, got {coupling_weight}")
    interior = grid.interior
    rhs = _nodal(grid, data).ravel()[interior]
    phi = _nodal(grid, frozen_field).ravel()[interior]
    L = _laplacian(grid)

    def solve_policy(active):
        A = (L + sp.diags(lam + coupling_weight * active, format="csc")).tocsc()
        return _solve(A, rhs - coupling_weight * np.where(active, 0.0, phi))

    active = np.zeros(grid.n_interior, dtype=bool)
    v = solve_policy(active)
    count = 1
    while True:
        new = v >= phi
        if np.array_equal(new, active):
            break
        if count >= max_policy_iterations:
            raise PolicyIterationError(
                f"policy iteration did not settle in {max_policy_iterations} steps",
                (active.copy(), new.copy()))
        active = new
        v = solve_policy(active)
        count += 1
    res = L @ v + lam * v + coupling_weight * np.maximum(phi, v) - rhs
    out = np.zeros(grid.size)
    out[interior] = v
    return PolicyResult(out.reshape(grid.shape), count, float(np.max(np.abs(res), initial=0.0)))


@dataclass
class BarrierPair:
    z: VectorGridFunction
    w: VectorGridFunction
    ordering_verified: bool
    z_classification: Classification | None = None
    w_classification: Classification | None = None
    policy_counts: dict = field(default_factory=dict)

    def lower(self) -> np.ndarray:
        """Nodewise lower edge of the sandwich: w1 for group 1, z2 for group 2."""
        m1 = self.z.m1
        return np.concatenate([self.w.values[:m1], self.z.values[m1:]])

    def upper(self) -> np.ndarray:
        m1 = self.z.m1
        return np.concatenate([self.z.values[:m1], self.w.values[m1:]])

    def summary(self) -> dict:
        m1 = self.z.m1
        return {
            "ordering_verified": self.ordering_verified,
            "z": None if self.z_classification is None else self.z_classification.to_dict(),
            "w": None if self.w_classification is None else self.w_classification.to_dict(),
            "group1_gap_min": float((self.z.values[:m1] - self.w.values[:m1]).min()),
            "group2_gap_min": float((self.w.values[m1:] - self.z.values[m1:]).min())
            if self.z.m2 else 0.0,
            "policy_counts": dict(self.policy_counts),
        }


def sandwich_ordered(z: VectorGridFunction, w: VectorGridFunction) -> bool:
    m1 = z.m1
    return bool(np.all(z.values[:m1] >= w.values[:m1]) and np.all(z.values[m1:] <= w.values[m1:]))


def build_barriers(spec: OperatorSpec, grid: Grid, system: DiscreteSystem | None = None,
                   tol: float = 1e-8) -> BarrierPair:
    if spec.name != "competitive":
        raise ValueError(
            "barriers are only constructed for the competitive operator; "
            "supply them for other operators and validate with classify")
    if system is None:
        system = discretize(spec, grid)
    lam, alpha, beta = spec.params["lambda"], spec.params["alpha"], spec.params["beta"]
    f, g = spec.params["f"], spec.params["g"]
    u_hi = solve_scalar_linear(grid, lam, f)
    v_lo = solve_scalar_semilinear(grid, lam, beta, u_hi, g)
    v_hi = solve_scalar_linear(grid, lam, g)
    u_lo = solve_scalar_semilinear(grid, lam, alpha, v_hi, f)
    z = VectorGridFunction.from_fields([u_hi], [v_lo.values])
    w = VectorGridFunction.from_fields([u_lo.values], [v_hi])
    cz, cw = classify(system, z, tol), classify(system, w, tol)
    details = {
        "z": cz.to_dict(),
        "w": cw.to_dict(),
        "u_hi_minus_u_lo_min": float((u_hi - u_lo.values).min()),
        "v_hi_minus_v_lo_min": float((v_hi - v_lo.values).min()),
    }
    if not cz.is_super_sub:
        raise BarrierError(f"z classifies as {cz.verdict}, expected super_sub", details)
    if not cw.is_sub_super:
        raise BarrierError(f"w classifies as {cw.verdict}, expected sub_super", details)
    if not sandwich_ordered(z, w):
        raise BarrierError("barrier ordering z1 >= w1, z2 <= w2 fails", details)
    return BarrierPair(z, w, True, cz, cw,
                       {"v_lo": v_lo.policies, "u_lo": u_lo.policies})
