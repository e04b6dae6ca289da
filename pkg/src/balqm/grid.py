"""Uniform box grids and a monotone finite-difference scheme.

The diffusion term ``-sum_k a_k d^2/dx_k^2`` uses central second
differences, the drift ``b . grad`` first-order upwinding (or central
differencing when requested and the mesh Péclet number allows it), and the
coupling ``c_j`` is evaluated pointwise.  For every component the linear part
is stored as a sparse matrix acting on all grid nodes, restricted to interior
rows, so boundary data enter through the boundary columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .operators import OperatorSpec, Partition

__all__ = [
    "Grid",
    "VectorGridFunction",
    "DiscreteSystem",
    "ResidualField",
    "DiscretizationError",
    "build_grid",
    "discretize",
    "residual",
    "stencil_matrix",
]


class DiscretizationError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.shape))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``, lexicographic (axis 0 slowest)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=1)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            mask[tuple(idx)] = False
            idx[k] = -1
            mask[tuple(idx)] = False
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        """Flat indices of interior nodes in lexicographic order."""
        return np.flatnonzero(self.interior_mask.ravel())

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def node_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))


def build_grid(dim: int, bounds, nodes_per_axis) -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if np.isscalar(nodes_per_axis):
        nodes_per_axis = (int(nodes_per_axis),) * dim
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if len(bounds) == 1 and dim == 2:
        bounds = np.repeat(bounds, 2, axis=0)
    if len(bounds) != dim or len(nodes_per_axis) != dim:
        raise ValueError(f"need {dim} bounds and node counts")
    for lo, hi in bounds:
        if not lo < hi:
            raise ValueError(f"inverted bounds ({lo}, {hi})")
    for n in nodes_per_axis:
        if int(n) < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {n}")
    return Grid(dim, tuple((float(lo), float(hi)) for lo, hi in bounds),
                tuple(int(n) for n in nodes_per_axis))


@dataclass
class VectorGridFunction:
    """Nodal values of all ``m`` components, ``values[j]`` has the grid shape."""

    values: np.ndarray
    m1: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim < 2 or not 1 <= self.m1 <= self.values.shape[0]:
            raise ValueError("values must have shape (m, *grid_shape) with 1 <= m1 <= m")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    @classmethod
    def zeros(cls, grid: Grid, partition: Partition) -> VectorGridFunction:
        return cls(np.zeros((partition.m,) + grid.shape), partition.m1)

    @classmethod
    def from_fields(cls, group1, group2) -> VectorGridFunction:
        group1 = [np.asarray(u, dtype=float) for u in group1]
        group2 = [np.asarray(u, dtype=float) for u in group2]
        return cls(np.stack(group1 + group2), len(group1))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def m2(self) -> int:
        return self.m - self.m1

    @property
    def u1(self) -> np.ndarray:
        return self.values[: self.m1]

    @property
    def u2(self) -> np.ndarray:
        return self.values[self.m1 :]

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    def copy(self) -> VectorGridFunction:
        return VectorGridFunction(self.values.copy(), self.m1)

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.m, -1)

    def same_layout(self, other: VectorGridFunction) -> bool:
        return self.values.shape == other.values.shape and self.m1 == other.m1


@dataclass(frozen=True)
class ResidualField:
    """Discrete ``F_j`` at interior nodes, ``values`` has shape ``(m, n_interior)``."""

    values: np.ndarray
    m1: int

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def on_grid(self, grid: Grid) -> np.ndarray:
        out = np.zeros((self.values.shape[0], grid.size))
        out[:, grid.interior] = self.values
        return out.reshape((-1,) + grid.shape)


def stencil_matrix(grid: Grid, diffusion, drift=None, scheme: str = "upwind") -> sp.csr_matrix:
    """Linear part of one component, shape ``(n_interior, grid.size)``.

    ``drift`` is ``None`` or an array ``(grid.size, dim)`` sampled at nodes.
    Raises DiscretizationError if the resulting rows lose the positive-type
    sign pattern.
    """
    if scheme not in ("upwind", "central"):
        raise ValueError(f"unknown drift scheme {scheme!r}")
    interior = grid.interior
    nint = len(interior)
    strides = np.array([math.prod(grid.shape[k + 1:]) for k in range(grid.dim)])
    rows, cols, vals = [], [], []
    diag = np.zeros(nint)
    row_ids = np.arange(nint)
    for k in range(grid.dim):
        h = grid.spacing[k]
        a = float(diffusion[k])
        lower = np.full(nint, -a / h**2)
        upper = np.full(nint, -a / h**2)
        diag += 2 * a / h**2
        if drift is not None:
            b = drift[interior, k]
            if scheme == "upwind":
                bp, bm = np.maximum(b, 0.0), np.minimum(b, 0.0)
                lower -= bp / h
                upper += bm / h
                diag += (bp - bm) / h
            else:
                lower -= b / (2 * h)
                upper += b / (2 * h)
        rows += [row_ids, row_ids]
        cols += [interior - strides[k], interior + strides[k]]
        vals += [lower, upper]
    rows.append(row_ids)
    cols.append(interior)
    vals.append(diag)
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nint, grid.size),
    )
    _check_positive_type(grid, K, diffusion, drift)
    return K


def _check_positive_type(grid, K, diffusion, drift):
    coo = K.tocoo()
    off = grid.interior[coo.row] != coo.col
    bad = off & (coo.data > 0)
    if np.any(bad):
        i = int(coo.row[np.argmax(bad)])
        node = grid.node_index(int(grid.interior[i]))
        suggestion = ""
        if drift is not None:
            bmax = float(np.max(np.abs(drift)))
            amin = min(float(a) for a in diffusion)
            if amin > 0 and bmax > 0:
                n_needed = [int(math.ceil((hi - lo) * bmax / (2 * amin))) + 2
                            for lo, hi in grid.bounds]
                suggestion = f"; refine to at least {n_needed} nodes per axis or use upwinding"
        raise DiscretizationError(
            f"positive-type condition violated at node {node}: "
            f"positive off-diagonal weight{suggestion}"
        )
    d = K[np.arange(len(grid.interior)), grid.interior].A1
    if np.any(d < 0):
        i = int(np.argmin(d))
        raise DiscretizationError(
            f"negative diagonal weight at node {grid.node_index(int(grid.interior[i]))}")


class DiscreteSystem:
    """Finite-difference carrier of a weakly coupled operator on a grid."""

    def __init__(self, spec: OperatorSpec, grid: Grid, scheme: str = "upwind",
                 boundary_value: float = 0.0):
        sf = spec.structural_form
        if sf is None:
            raise DiscretizationError(
                f"operator {spec.name!r} has no structural_form; cannot discretize")
        if grid.dim != spec.dim:
            raise DiscretizationError(f"grid dim {grid.dim} != operator dim {spec.dim}")
        for (glo, ghi), (slo, shi) in zip(grid.bounds, spec.bounds):
            if glo < slo - 1e-12 or ghi > shi + 1e-12:
                raise DiscretizationError("grid box exceeds the operator's domain box")
        self.spec = spec
        self.grid = grid
        self.scheme = scheme
        self.boundary_value = float(boundary_value)
        self.partition = spec.partition
        pts = grid.points
        self.matrices = tuple(
            stencil_matrix(grid, sf.diffusion[j], sf.drift_at(j, pts), scheme)
            for j in range(spec.m)
        )
        self.x_interior = pts[grid.interior]
        self._interior_blocks = tuple(K[:, grid.interior].tocsc() for K in self.matrices)

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def m1(self) -> int:
        return self.partition.m1

    def diagonal(self, j: int) -> np.ndarray:
        return self.matrices[j][np.arange(self.grid.n_interior), self.grid.interior].A1

    def interior_block(self, j: int) -> sp.csc_matrix:
        return self._interior_blocks[j]

    def zeros(self) -> VectorGridFunction:
        U = VectorGridFunction.zeros(self.grid, self.partition)
        self.apply_boundary(U)
        return U

    def apply_boundary(self, U: VectorGridFunction) -> None:
        flat = U.values.reshape(U.m, -1)
        mask = ~self.grid.interior_mask.ravel()
        flat[:, mask] = self.boundary_value

    def check(self, U: VectorGridFunction) -> None:
        if U.values.shape != (self.m,) + self.grid.shape or U.m1 != self.m1:
            raise ValueError(
                f"grid function shape {U.values.shape} (m1={U.m1}) does not match "
                f"system ({self.m},)+{self.grid.shape} (m1={self.m1})")
        if not np.all(np.isfinite(U.values)):
            raise ValueError("grid function has non-finite values")
        boundary = U.flat()[:, ~self.grid.interior_mask.ravel()]
        if np.any(boundary != self.boundary_value):
            raise ValueError(
                f"boundary values differ from the Dirichlet datum {self.boundary_value}")

    def coupling(self, j: int, flat: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        """``c_j`` at interior nodes (or the subset ``idx`` of interior positions)."""
        nodes = self.grid.interior if idx is None else self.grid.interior[idx]
        x = self.x_interior if idx is None else self.x_interior[idx]
        r = flat[: self.m1, nodes].T
        s = flat[self.m1 :, nodes].T
        return np.asarray(self.spec.structural_form.coupling[j](x, r, s), dtype=float)

    def component_residual(self, j: int, flat: np.ndarray) -> np.ndarray:
        return self.matrices[j] @ flat[j] + self.coupling(j, flat)

    def residual(self, U: VectorGridFunction) -> ResidualField:
        self.check(U)
        flat = U.flat()
        vals = np.stack([self.component_residual(j, flat) for j in range(self.m)])
        if not np.all(np.isfinite(vals)):
            raise ValueError("residual is not finite")
        return ResidualField(vals, self.m1)


def discretize(spec: OperatorSpec, grid: Grid, scheme: str = "upwind",
               boundary_value: float = 0.0) -> DiscreteSystem:
    return DiscreteSystem(spec, grid, scheme=scheme, boundary_value=boundary_value)


def residual(system: DiscreteSystem, U: VectorGridFunction) -> ResidualField:
    return system.residual(U)
