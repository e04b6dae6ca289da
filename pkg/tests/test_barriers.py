import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balqm import (
    build_barriers,
    build_grid,
    constant,
    discretize,
    gaussian_bump,
    make_competitive,
    make_diagonal_linear,
    product_of_sines,
    solve_scalar_linear,
    solve_scalar_semilinear,
)
from balqm.barriers import BarrierError, PolicyIterationError, sandwich_ordered
from balqm.grid import stencil_matrix
from balqm.operators import Partition


def test_linear_zero_data():
    grid = build_grid(1, [0, 1], 21)
    assert np.array_equal(solve_scalar_linear(grid, 1.0, 0.0), np.zeros(21))


def test_linear_analytic_order_two():
    errs = []
    for n in (101, 201):
        grid = build_grid(1, [0, 1], n)
        x = grid.axes[0]
        exact = 1 - np.cosh(x - 0.5) / math.cosh(0.5)
        errs.append(np.max(np.abs(solve_scalar_linear(grid, 1.0, 1.0) - exact)))
    assert errs[1] < 1e-6
    assert 3 <= errs[0] / errs[1] <= 5


def test_linear_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        solve_scalar_linear(build_grid(1, [0, 1], 5), 0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.01, 10))
def test_linear_nonnegativity(seed, lam):
    grid = build_grid(2, [(0, 1), (0, 1)], (9, 9))
    data = np.random.default_rng(seed).random(grid.shape)
    assert np.all(solve_scalar_linear(grid, lam, data) >= 0)


def test_linear_residual_small():
    grid = build_grid(2, [(0, 1), (0, 1)], (33, 33))
    data = np.random.default_rng(0).random(grid.shape)
    u = solve_scalar_linear(grid, 1.5, data).ravel()
    K = stencil_matrix(grid, (1.0, 1.0))
    res = K @ u + 1.5 * u[grid.interior] - data.ravel()[grid.interior]
    assert np.max(np.abs(res)) <= 1e-12 * max(1.0, np.max(np.abs(K.data)))


def test_semilinear_zero_weight_is_linear():
    grid = build_grid(1, [0, 1], 51)
    frozen = np.random.default_rng(1).random(51)
    got = solve_scalar_semilinear(grid, 2.0, 0.0, frozen, 1.0)
    assert np.allclose(got.values, solve_scalar_linear(grid, 2.0, 1.0), atol=1e-14, rtol=0)


def test_semilinear_zero_frozen_matches_shifted_linear():
    grid = build_grid(1, [0, 1], 101)
    got = solve_scalar_semilinear(grid, 1.0, 1.5, 0.0, 1.0)
    assert np.all(got.values >= 0)
    assert np.allclose(got.values, solve_scalar_linear(grid, 2.5, 1.0), atol=1e-13, rtol=0)


def test_semilinear_symmetric_policy_count_and_residual():
    grid = build_grid(1, [0, 1], 201)
    x = grid.axes[0]
    frozen = 1 - np.cosh(x - 0.5) / math.cosh(0.5)
    got = solve_scalar_semilinear(grid, 1.0, 1.0, frozen, 1.0)
    assert got.policies <= 5
    assert got.residual <= 1e-10


def test_semilinear_policy_limit():
    grid = build_grid(1, [0, 1], 41)
    frozen = np.sin(6 * np.pi * grid.axes[0])
    with pytest.raises(PolicyIterationError) as err:
        solve_scalar_semilinear(grid, 1.0, 1.0, frozen, 1.0, max_policy_iterations=1)
    old, new = err.value.policies
    assert old.shape == new.shape == (39,)
    assert not np.array_equal(old, new)


def test_semilinear_rejects_negative_weight():
    with pytest.raises(ValueError):
        solve_scalar_semilinear(build_grid(1, [0, 1], 5), 1.0, -1.0, 0.0, 1.0)


def test_zero_data_barriers():
    spec = make_competitive(1, 1, 1, constant(0), constant(0))
    bar = build_barriers(spec, build_grid(1, [0, 1], 21))
    assert bar.ordering_verified
    assert not np.any(bar.z.values) and not np.any(bar.w.values)


def test_symmetric_barriers(symmetric_201):
    _, _, _, bar = symmetric_201
    assert bar.ordering_verified
    assert bar.z_classification.verdict == "super_sub"
    assert bar.w_classification.verdict == "sub_super"
    assert np.all(bar.z.values[0] >= bar.w.values[0])
    assert np.all(bar.z.values[1] <= bar.w.values[1])
    assert np.all(bar.z.values >= 0) and np.all(bar.w.values >= 0)
    assert all(count <= 5 for count in bar.policy_counts.values())


def test_decoupled_reduction():
    spec = make_competitive(1.5, 1, 1, constant(1), constant(2))
    spec = dataclasses.replace(spec, params={**spec.params, "alpha": 0.0, "beta": 0.0})
    grid = build_grid(1, [0, 1], 51)
    system = discretize(make_competitive(1.5, 1e-300, 1e-300, constant(1), constant(2)), grid)
    bar = build_barriers(spec, grid, system)
    assert np.max(np.abs(bar.z.values - bar.w.values)) <= 1e-10
    assert np.allclose(bar.z.values[0], solve_scalar_linear(grid, 1.5, 1.0), atol=1e-10)


def test_two_dimensional_barriers():
    spec = make_competitive(1, 1, 2, constant(1), constant(2), dim=2)
    grid = build_grid(2, [(0, 1), (0, 1)], (33, 33))
    bar = build_barriers(spec, grid)
    assert bar.ordering_verified and sandwich_ordered(bar.z, bar.w)
    summary = bar.summary()
    assert summary["group1_gap_min"] >= 0 and summary["group2_gap_min"] >= 0


def test_nonnegative_random_data():
    box = [(0.0, 1.0)]
    for amp in (0.5, 2.0):
        spec = make_competitive(0.7, 1.3, 0.4, product_of_sines(amp, box),
                                gaussian_bump(amp, [0.3], 0.1))
        bar = build_barriers(spec, build_grid(1, [0, 1], 61))
        assert np.all(bar.lower() >= 0)


def test_only_competitive_operator_supported():
    spec = make_diagonal_linear([1.0, 2.0], [constant(1)] * 2, Partition(1, 1))
    with pytest.raises(ValueError, match="competitive"):
        build_barriers(spec, build_grid(1, [0, 1], 11))


def test_barrier_error_carries_details():
    # negative data violate the nonnegativity the construction relies on
    spec = make_competitive(1, 1, 1, constant(1), constant(1))
    grid = build_grid(1, [0, 1], 41)
    x = grid.axes[0]
    bad_f = np.where(x < 0.5, 5.0, -5.0)
    spec = dataclasses.replace(spec, params={**spec.params, "f": bad_f})
    with pytest.raises(BarrierError) as err:
        build_barriers(spec, grid)
    assert {"z", "w", "u_hi_minus_u_lo_min"} <= set(err.value.details)
