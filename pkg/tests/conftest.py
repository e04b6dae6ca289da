import numpy as np
import pytest

from balqm import (
    OperatorSpec,
    Partition,
    StructuralForm,
    VectorGridFunction,
    build_barriers,
    build_grid,
    constant,
    discretize,
    gaussian_bump,
    make_competitive,
    perron_solve,
)
from balqm.perron import _block_solve

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record(number, passed, detail=""):
    ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def competitive_case(lam, alpha, beta, f=1.0, g=1.0, n=41, dim=1):
    f_fn = f if callable(f) else constant(f)
    g_fn = g if callable(g) else constant(g)
    spec = make_competitive(lam, alpha, beta, f_fn, g_fn, dim=dim)
    grid = build_grid(dim, [(0.0, 1.0)] * dim, n)
    system = discretize(spec, grid)
    return spec, grid, system, build_barriers(spec, grid, system)


@pytest.fixture(scope="session")
def symmetric_201():
    return competitive_case(1.0, 1.0, 1.0, n=201)


@pytest.fixture(scope="session")
def oracle_case():
    return competitive_case(2.0, 0.5, 0.5, f=1.0, g=2.0, n=41)


def raw_competitive(lam, alpha, beta, f=0.0, g=0.0, dim=1):
    """Competitive-form operator without parameter validation (any signs)."""

    def F1(x, r, s, p, X):
        return -np.trace(X) + lam * r[0] + alpha * max(r[0], s[0]) - f

    def F2(x, r, s, p, X):
        return -np.trace(X) + lam * s[0] + beta * max(r[0], s[0]) - g

    def c1(x, r, s):
        return lam * r[:, 0] + alpha * np.maximum(r[:, 0], s[:, 0]) - f

    def c2(x, r, s):
        return lam * s[:, 0] + beta * np.maximum(r[:, 0], s[:, 0]) - g

    form = StructuralForm(((1.0,) * dim,) * 2, (c1, c2), coupling_lipschitz=abs(lam) + 2)
    return OperatorSpec(Partition(1, 1), dim, (F1, F2), ((0.0, 1.0),) * dim, form, "raw")


def nodal_roots(system, flat, j, lo, hi, iterations=80):
    """Vectorized bisection for every interior node's own equation,
    neighbours and other components frozen at ``flat``."""
    interior = system.grid.interior
    K = system.matrices[j]
    d = system.diagonal(j)
    rest = K @ flat[j] - d * flat[j, interior]
    a, b = lo.copy(), hi.copy()
    work = flat.copy()

    def phi(t):
        work[j, interior] = t
        return d * t + rest + system.coupling(j, work)

    for _ in range(iterations):
        mid = 0.5 * (a + b)
        up = phi(mid) > 0
        b = np.where(up, mid, b)
        a = np.where(up, a, mid)
    return 0.5 * (a + b)


def _perturbed_solution(system, rng, side):
    """Solution of the same system with data pushed to one side.

    Raising f and lowering g makes the result super-sub for the original
    data (the residual shifts by the data differences); the mirror change
    gives a sub-super function.
    """
    p = system.spec.params
    spec0 = system.spec
    bump = gaussian_bump(float(rng.uniform(0.1, 2.0)), rng.random(spec0.dim),
                         float(rng.uniform(0.05, 0.4)))
    shrink = float(rng.uniform(0.0, 0.5))
    f, g = p["f"], p["g"]
    if side == "super_sub":
        f2, g2 = (lambda x: f(x) + bump(x)), (lambda x: (1 - shrink) * g(x))
    else:
        f2, g2 = (lambda x: (1 - shrink) * f(x)), (lambda x: g(x) + bump(x))
    spec = make_competitive(p["lambda"], p["alpha"], p["beta"], f2, g2,
                            dim=spec0.dim, bounds=spec0.bounds)
    other = discretize(spec, system.grid)
    U, rep = perron_solve(other, build_barriers(spec, system.grid, other))
    assert rep.converged
    return U


def random_one_sided(system, barriers, rng, side="super_sub", steps=3):
    """A random discrete super-sub (or sub-super) function.

    Starts either from the matching barrier, possibly after exact block
    solves of leading components, or from the solution of a problem with
    one-sidedly perturbed data.  Then applies damped nodal Jacobi steps with
    random per-node fractions; each step moves every component toward its
    nodal root without crossing it, which keeps the one-sided residual signs.
    """
    interior = system.grid.interior
    if rng.random() < 0.5:
        U = (barriers.z if side == "super_sub" else barriers.w).copy()
        flat = U.flat()
        # optionally begin after exact solves of leading components (never all
        # of them, which would land on the solution)
        for j in range(int(rng.integers(0, system.m))):
            flat[j, interior] = _block_solve(system, j, flat, 50)
    else:
        U = _perturbed_solution(system, rng, side)
        flat = U.flat()
    lower = barriers.lower().reshape(system.m, -1)[:, interior]
    upper = barriers.upper().reshape(system.m, -1)[:, interior]
    for _ in range(int(rng.integers(0, steps + 1))):
        old = flat.copy()
        new = flat.copy()
        for j in range(system.m):
            cur = old[j, interior]
            root = nodal_roots(system, old, j, np.minimum(lower[j], cur),
                               np.maximum(upper[j], cur))
            theta = rng.random(len(interior)) * (rng.random(len(interior)) < 0.7)
            new[j, interior] = cur + theta * (root - cur)
        flat[:] = new
    return VectorGridFunction(U.values, U.m1)
