"""Residual-sign notions of super-sub, sub-super and solution on a grid.

On a positive-type scheme the sign of the nodal residual plays the role of
the touching test functions: a grid function is super-sub when every group-1
residual is nonnegative and every group-2 residual nonpositive, sub-super
with the signs swapped, and a solution when both hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import DiscreteSystem, VectorGridFunction

__all__ = [
    "Classification",
    "ComparisonReport",
    "MisclassifiedError",
    "classify",
    "ishii_koike_signs",
    "lattice_combine_super_sub",
    "lattice_combine_sub_super",
    "family_inf_sup",
    "family_sup_inf",
    "compare_orderings",
]

VERDICTS = ("super_sub", "sub_super", "solution", "neither")


@dataclass(frozen=True)
class Classification:
    verdict: str
    min_residual: tuple[float, ...]
    max_residual: tuple[float, ...]
    tol: float

    @property
    def is_super_sub(self) -> bool:
        return self.verdict in ("super_sub", "solution")

    @property
    def is_sub_super(self) -> bool:
        return self.verdict in ("sub_super", "solution")

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_residual": list(self.min_residual),
            "max_residual": list(self.max_residual),
            "tol": self.tol,
        }


def _signs(res: np.ndarray, m1: int, tol: float) -> tuple[bool, bool]:
    g1, g2 = res[:m1], res[m1:]
    super_sub = bool(np.all(g1 >= -tol) and np.all(g2 <= tol))
    sub_super = bool(np.all(g1 <= tol) and np.all(g2 >= -tol))
    return super_sub, sub_super


def classify(system: DiscreteSystem, U: VectorGridFunction, tol: float = 1e-8) -> Classification:
    res = system.residual(U).values
    super_sub, sub_super = _signs(res, system.m1, tol)
    if res.size == 0 or np.max(np.abs(res)) <= tol:
        verdict = "solution"
    elif super_sub:
        verdict = "super_sub"
    elif sub_super:
        verdict = "sub_super"
    else:
        verdict = "neither"
    if res.shape[1]:
        lo, hi = res.min(axis=1), res.max(axis=1)
    else:
        lo = hi = np.zeros(res.shape[0])
    return Classification(verdict, tuple(map(float, lo)), tuple(map(float, hi)), float(tol))


def ishii_koike_signs(system: DiscreteSystem, U: VectorGridFunction,
                      tol: float = 1e-8) -> tuple[bool, bool]:
    """(subsolution, supersolution) in the all-components sense: every
    residual ``<= tol`` resp. ``>= -tol`` regardless of group."""
    res = system.residual(U).values
    return bool(np.all(res <= tol)), bool(np.all(res >= -tol))


def _require_same(U: VectorGridFunction, V: VectorGridFunction):
    if not U.same_layout(V):
        raise ValueError(
            f"layout mismatch: {U.values.shape}/m1={U.m1} vs {V.values.shape}/m1={V.m1}")


def lattice_combine_super_sub(U: VectorGridFunction, V: VectorGridFunction) -> VectorGridFunction:
    """Group-1 minimum, group-2 maximum."""
    _require_same(U, V)
    m1 = U.m1
    out = np.empty_like(U.values)
    out[:m1] = np.minimum(U.values[:m1], V.values[:m1])
    out[m1:] = np.maximum(U.values[m1:], V.values[m1:])
    return VectorGridFunction(out, m1)


def lattice_combine_sub_super(U: VectorGridFunction, V: VectorGridFunction) -> VectorGridFunction:
    """Group-1 maximum, group-2 minimum."""
    _require_same(U, V)
    m1 = U.m1
    out = np.empty_like(U.values)
    out[:m1] = np.maximum(U.values[:m1], V.values[:m1])
    out[m1:] = np.minimum(U.values[m1:], V.values[m1:])
    return VectorGridFunction(out, m1)


def family_inf_sup(family: Sequence[VectorGridFunction]) -> VectorGridFunction:
    """Nodewise infimum of group 1 and supremum of group 2 over a family."""
    if len(family) == 0:
        raise ValueError("family must be nonempty")
    out = family[0]
    for V in family[1:]:
        out = lattice_combine_super_sub(out, V)
    return VectorGridFunction(out.values.copy(), out.m1)


def family_sup_inf(family: Sequence[VectorGridFunction]) -> VectorGridFunction:
    if len(family) == 0:
        raise ValueError("family must be nonempty")
    out = family[0]
    for V in family[1:]:
        out = lattice_combine_sub_super(out, V)
    return VectorGridFunction(out.values.copy(), out.m1)


class MisclassifiedError(ValueError):
    def __init__(self, message: str, classification: Classification):
        super().__init__(message)
        self.classification = classification


@dataclass
class ComparisonReport:
    holds: bool
    tol: float
    group1_excess: float
    group2_excess: float
    worst_component: int | None = None
    worst_node: tuple[int, ...] | None = None
    classifications: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "tol": self.tol,
            "group1_excess": self.group1_excess,
            "group2_excess": self.group2_excess,
            "worst_component": self.worst_component,
            "worst_node": None if self.worst_node is None else list(self.worst_node),
            "classifications": {k: v.to_dict() for k, v in self.classifications.items()},
        }


def compare_orderings(system: DiscreteSystem, U_sub_super: VectorGridFunction,
                      V_super_sub: VectorGridFunction, tol: float = 1e-8,
                      classify_tol: float = 1e-8) -> ComparisonReport:
    """Check ``u1 <= v1`` and ``v2 <= u2`` nodewise for a sub-super ``U`` and
    a super-sub ``V``."""
    _require_same(U_sub_super, V_super_sub)
    cu = classify(system, U_sub_super, classify_tol)
    if not cu.is_sub_super:
        raise MisclassifiedError(f"first argument is {cu.verdict}, expected sub_super", cu)
    cv = classify(system, V_super_sub, classify_tol)
    if not cv.is_super_sub:
        raise MisclassifiedError(f"second argument is {cv.verdict}, expected super_sub", cv)
    m1 = U_sub_super.m1
    excess = np.empty_like(U_sub_super.values)
    excess[:m1] = U_sub_super.values[:m1] - V_super_sub.values[:m1]
    excess[m1:] = V_super_sub.values[m1:] - U_sub_super.values[m1:]
    g1 = float(excess[:m1].max())
    g2 = float(excess[m1:].max()) if excess.shape[0] > m1 else 0.0
    holds = max(g1, g2) <= tol
    report = ComparisonReport(holds, float(tol), g1, g2,
                              classifications={"sub_super": cu, "super_sub": cv})
    if not holds:
        flat = int(np.argmax(excess))
        idx = np.unravel_index(flat, excess.shape)
        report.worst_component = int(idx[0])
        report.worst_node = tuple(int(i) for i in idx[1:])
    return report
