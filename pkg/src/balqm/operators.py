"""Weakly coupled operators with a two-group partition.

An operator is a list of ``m`` component evaluators

    F_j(x, r, s, p, X) -> float

where ``r`` holds the group-1 unknowns, ``s`` the group-2 unknowns, ``p`` the
gradient of component ``j`` and ``X`` its Hessian.  Components are indexed
from 0; group 1 is ``0 .. m1-1`` and group 2 is ``m1 .. m-1``.

Operators that will be discretized also declare a structural form

    F_j = -sum_k a_jk X_kk + b_j(x) . p + c_j(x, r, s)

with constant nonnegative diffusion ``a_j``, an optional drift field ``b_j``
and a pointwise coupling ``c_j``.  Drift and coupling callables are
vectorized: ``x`` has shape ``(N, dim)``, ``r`` shape ``(N, m1)`` and ``s``
shape ``(N, m2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

DataFn = Callable[[np.ndarray], np.ndarray]
Evaluator = Callable[..., float]

__all__ = [
    "Partition",
    "StructuralForm",
    "OperatorSpec",
    "evaluate",
    "evaluate_structural",
    "make_competitive",
    "make_diagonal_linear",
    "constant",
    "affine",
    "product_of_sines",
    "gaussian_bump",
]


@dataclass(frozen=True)
class Partition:
    m1: int
    m2: int = 0

    def __post_init__(self):
        if self.m1 < 1:
            raise ValueError(f"m1 must be >= 1, got {self.m1}")
        if self.m2 < 0:
            raise ValueError(f"m2 must be >= 0, got {self.m2}")

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    def group(self, j: int) -> int:
        """Return 1 or 2 for component index ``j``."""
        return 1 if j < self.m1 else 2


@dataclass(frozen=True)
class StructuralForm:
    """Per-component decomposition used by the finite-difference scheme.

    ``coupling_derivative`` (optional) returns a generalized derivative of
    ``c_j`` with respect to the component's own unknown; it lets the block
    solver run an exact semismooth Newton step.  ``coupling_lipschitz`` bounds
    ``sum_k |d c_j / d xi_k|`` over all ``j`` and fixes the explicit oracle's
    stable step.
    """

    diffusion: tuple[tuple[float, ...], ...]
    coupling: tuple[Callable, ...]
    drift: tuple[Callable | None, ...] | None = None
    coupling_derivative: tuple[Callable, ...] | None = None
    coupling_lipschitz: float | None = None

    def drift_at(self, j: int, x: np.ndarray) -> np.ndarray | None:
        if self.drift is None or self.drift[j] is None:
            return None
        return np.asarray(self.drift[j](x), dtype=float).reshape(x.shape)


@dataclass(frozen=True)
class OperatorSpec:
    partition: Partition
    dim: int
    components: tuple[Evaluator, ...]
    bounds: tuple[tuple[float, float], ...]
    structural_form: StructuralForm | None = None
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.components) != self.partition.m:
            raise ValueError(
                f"{len(self.components)} evaluators for m={self.partition.m} components"
            )
        if len(self.bounds) != self.dim:
            raise ValueError("one (low, high) pair per axis is required")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"inverted bounds ({lo}, {hi})")
        sf = self.structural_form
        if sf is not None:
            m = self.partition.m
            if len(sf.diffusion) != m or len(sf.coupling) != m:
                raise ValueError("structural_form needs one entry per component")
            for a in sf.diffusion:
                if len(a) != self.dim or min(a) < 0:
                    raise ValueError(f"diffusion must be nonnegative per axis, got {a}")

    @property
    def m(self) -> int:
        return self.partition.m

    def split(self, xi: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        xi = np.asarray(xi, dtype=float)
        return xi[: self.partition.m1], xi[self.partition.m1 :]


def _vector(name: str, value, length: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (length,):
        raise ValueError(f"{name}: expected length {length}, got shape {np.shape(value)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entry {arr}")
    return arr


def _check_args(spec, j, x, r, s, p, X):
    if not 0 <= j < spec.m:
        raise IndexError(f"component index {j} out of range for m={spec.m}")
    x = _vector("x", x, spec.dim)
    for k, (lo, hi) in enumerate(spec.bounds):
        if not lo - 1e-12 <= x[k] <= hi + 1e-12:
            raise ValueError(f"x: coordinate {k}={x[k]} outside [{lo}, {hi}]")
    r = _vector("r", r, spec.partition.m1)
    s = _vector("s", s, spec.partition.m2)
    p = _vector("p", p, spec.dim)
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.dim, spec.dim):
        raise ValueError(f"X: expected shape ({spec.dim}, {spec.dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X: non-finite entry")
    if not np.array_equal(X, X.T):
        raise ValueError("X: matrix is not symmetric")
    return x, r, s, p, X


def evaluate(spec: OperatorSpec, j: int, x, r, s, p, X) -> float:
    """Evaluate component ``j`` of ``spec`` after validating every argument."""
    x, r, s, p, X = _check_args(spec, j, x, r, s, p, X)
    value = float(spec.components[j](x, r, s, p, X))
    if not np.isfinite(value):
        raise ValueError(f"evaluator {j} returned non-finite value {value}")
    return value


def evaluate_structural(spec: OperatorSpec, j: int, x, r, s, p, X) -> float:
    """Evaluate component ``j`` through its declared decomposition."""
    sf = spec.structural_form
    if sf is None:
        raise ValueError(f"operator {spec.name!r} declares no structural_form")
    x, r, s, p, X = _check_args(spec, j, x, r, s, p, X)
    value = -float(np.dot(sf.diffusion[j], np.diag(X)))
    b = sf.drift_at(j, x[None, :])
    if b is not None:
        value += float(np.dot(b[0], p))
    value += float(sf.coupling[j](x[None, :], r[None, :], s[None, :])[0])
    return value


def _check_data(name: str, fn: DataFn, bounds, dim: int, nonnegative: bool):
    axes = [np.linspace(lo, hi, 33) for lo, hi in bounds]
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.asarray(fn(pts), dtype=float)
    if vals.shape != (len(pts),) or not np.all(np.isfinite(vals)):
        raise ValueError(f"{name}: data function must return finite values of shape (N,)")
    if nonnegative and vals.min() < 0:
        raise ValueError(f"{name}: data must be nonnegative, found {vals.min()}")


def _default_bounds(dim, bounds):
    if bounds is None:
        return ((0.0, 1.0),) * dim
    return tuple((float(lo), float(hi)) for lo, hi in bounds)


def make_competitive(lam: float, alpha: float, beta: float, f: DataFn, g: DataFn,
                     dim: int = 1, bounds=None) -> OperatorSpec:
    """Two-species competitive system

        -Δu + λu + α max(u, v) - f = 0
        -Δv + λv + β max(u, v) - g = 0

    with u in group 1 and v in group 2.
    """
    for name, val in (("lambda", lam), ("alpha", alpha), ("beta", beta)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    bounds = _default_bounds(dim, bounds)
    _check_data("f", f, bounds, dim, nonnegative=True)
    _check_data("g", g, bounds, dim, nonnegative=True)
    lam, alpha, beta = float(lam), float(alpha), float(beta)

    def F1(x, r, s, p, X):
        return -np.trace(X) + lam * r[0] + alpha * max(r[0], s[0]) - f(x[None, :])[0]

    def F2(x, r, s, p, X):
        return -np.trace(X) + lam * s[0] + beta * max(r[0], s[0]) - g(x[None, :])[0]

    def c1(x, r, s):
        return lam * r[:, 0] + alpha * np.maximum(r[:, 0], s[:, 0]) - f(x)

    def c2(x, r, s):
        return lam * s[:, 0] + beta * np.maximum(r[:, 0], s[:, 0]) - g(x)

    def dc1(x, r, s):
        return lam + alpha * (r[:, 0] >= s[:, 0])

    def dc2(x, r, s):
        return lam + beta * (s[:, 0] >= r[:, 0])

    form = StructuralForm(
        diffusion=((1.0,) * dim, (1.0,) * dim),
        coupling=(c1, c2),
        coupling_derivative=(dc1, dc2),
        coupling_lipschitz=lam + max(alpha, beta),
    )
    return OperatorSpec(
        partition=Partition(1, 1),
        dim=dim,
        components=(F1, F2),
        bounds=bounds,
        structural_form=form,
        name="competitive",
        params={"lambda": lam, "alpha": alpha, "beta": beta, "f": f, "g": g},
    )


def make_diagonal_linear(lams: Sequence[float], data: Sequence[DataFn],
                         partition: Partition, dim: int = 1, bounds=None) -> OperatorSpec:
    """Uncoupled family F_j = -tr X + λ_j ξ_j - data_j(x)."""
    m = partition.m
    if len(lams) != m or len(data) != m:
        raise ValueError(f"need {m} rates and {m} data functions")
    for lam in lams:
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
    bounds = _default_bounds(dim, bounds)
    for k, fn in enumerate(data):
        _check_data(f"data[{k}]", fn, bounds, dim, nonnegative=False)
    m1 = partition.m1

    def own(j, r, s):
        return r[..., j] if j < m1 else s[..., j - m1]

    def make(j):
        lam, fn = float(lams[j]), data[j]

        def F(x, r, s, p, X):
            return -np.trace(X) + lam * own(j, r, s) - fn(x[None, :])[0]

        def c(x, r, s):
            return lam * own(j, r, s) - fn(x)

        def dc(x, r, s):
            return np.full(len(x), lam)

        return F, c, dc

    parts = [make(j) for j in range(m)]
    form = StructuralForm(
        diffusion=((1.0,) * dim,) * m,
        coupling=tuple(p[1] for p in parts),
        coupling_derivative=tuple(p[2] for p in parts),
        coupling_lipschitz=float(max(lams)),
    )
    return OperatorSpec(
        partition=partition,
        dim=dim,
        components=tuple(p[0] for p in parts),
        bounds=bounds,
        structural_form=form,
        name="diagonal_linear",
        params={"lambdas": [float(v) for v in lams], "data": list(data)},
    )


# Data catalog.  Every entry maps (N, dim) points to (N,) values.

def constant(value: float) -> DataFn:
    value = float(value)

    def fn(x):
        return np.full(len(x), value)

    fn.lipschitz = 0.0
    return fn


def affine(offset: float, slope: Sequence[float]) -> DataFn:
    offset = float(offset)
    slope = np.asarray(slope, dtype=float)

    def fn(x):
        return offset + np.asarray(x) @ slope

    fn.lipschitz = float(np.linalg.norm(slope))
    return fn


def product_of_sines(amplitude: float, bounds, frequency: int = 1) -> DataFn:
    """``amplitude * prod_k sin(frequency * pi * (x_k - lo_k) / (hi_k - lo_k))``."""
    amplitude = float(amplitude)
    lo = np.array([b[0] for b in bounds], dtype=float)
    width = np.array([b[1] - b[0] for b in bounds], dtype=float)

    def fn(x):
        t = (np.asarray(x) - lo) / width
        return amplitude * np.prod(np.sin(frequency * np.pi * t), axis=1)

    fn.lipschitz = abs(amplitude) * frequency * np.pi * float(np.sqrt(np.sum(1 / width**2)))
    return fn


def gaussian_bump(amplitude: float, center: Sequence[float], width: float) -> DataFn:
    amplitude, width = float(amplitude), float(width)
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    center = np.asarray(center, dtype=float)

    def fn(x):
        d2 = np.sum((np.asarray(x) - center) ** 2, axis=1)
        return amplitude * np.exp(-d2 / (2 * width**2))

    fn.lipschitz = abs(amplitude) / (width * np.sqrt(np.e))
    return fn
