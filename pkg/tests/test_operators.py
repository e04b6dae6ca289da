import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balqm import (
    Partition,
    affine,
    constant,
    evaluate,
    evaluate_structural,
    gaussian_bump,
    make_competitive,
    make_diagonal_linear,
    product_of_sines,
)

ZERO1 = np.zeros((1, 1))


def test_partition_rules():
    assert Partition(2, 1).m == 3
    assert Partition(1).m2 == 0
    with pytest.raises(ValueError):
        Partition(0, 2)
    with pytest.raises(ValueError):
        Partition(1, -1)


def test_competitive_zero_case():
    spec = make_competitive(1, 1, 1, constant(0), constant(0))
    assert evaluate(spec, 0, [0.5], [0], [0], [0], ZERO1) == 0
    assert evaluate(spec, 1, [0.5], [0], [0], [0], ZERO1) == 0


def test_competitive_direct_substitution():
    spec = make_competitive(1, 2, 1, constant(0), constant(0))
    assert evaluate(spec, 0, [0.5], [1], [3], [0], ZERO1) == 7


def test_competitive_trace_term():
    spec = make_competitive(1, 1, 1, constant(0), constant(0))
    assert evaluate(spec, 0, [0.5], [0], [0], [0], [[2.0]]) == -2


def test_competitive_second_component():
    spec = make_competitive(2, 0.5, 0.5, constant(1), constant(2))
    assert evaluate(spec, 1, [0.3], [1], [0], [0], ZERO1) == -1.5


def test_competitive_partition():
    spec = make_competitive(1, 1, 1, constant(1), constant(1))
    assert (spec.partition.m1, spec.partition.m2, spec.m) == (1, 1, 2)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
def test_competitive_rejects_nonpositive_constants(args):
    with pytest.raises(ValueError):
        make_competitive(*args, constant(1), constant(1))


def test_competitive_rejects_negative_data():
    with pytest.raises(ValueError, match="nonnegative"):
        make_competitive(1, 1, 1, affine(0.5, [-1.0]), constant(1))


def test_diagonal_linear_examples():
    spec = make_diagonal_linear([1.0], [constant(0)], Partition(1), dim=1)
    assert evaluate(spec, 0, [0.5], [0], [], [0], ZERO1) == 0
    spec = make_diagonal_linear([1.0, 3.0], [constant(0)] * 2, Partition(2), dim=1)
    assert evaluate(spec, 1, [0.5], [0, 2], [], [0], ZERO1) == 6
    with pytest.raises(ValueError):
        make_diagonal_linear([1.0, 0.0], [constant(0)] * 2, Partition(2))


def test_evaluate_validation():
    spec = make_competitive(1, 1, 1, constant(0), constant(0))
    with pytest.raises(IndexError):
        evaluate(spec, 2, [0.5], [0], [0], [0], ZERO1)
    with pytest.raises(ValueError, match="r"):
        evaluate(spec, 0, [0.5], [0, 1], [0], [0], ZERO1)
    with pytest.raises(ValueError, match="s"):
        evaluate(spec, 0, [0.5], [0], [np.nan], [0], ZERO1)
    with pytest.raises(ValueError, match="x"):
        evaluate(spec, 0, [1.5], [0], [0], [0], ZERO1)
    with pytest.raises(ValueError, match="X"):
        evaluate(spec, 0, [0.5], [0], [0], [0], np.zeros((2, 2)))
    spec2 = make_competitive(1, 1, 1, constant(0), constant(0), dim=2)
    with pytest.raises(ValueError, match="symmetric"):
        evaluate(spec2, 0, [0.5, 0.5], [0], [0], [0, 0], [[1.0, 2.0], [0.0, 1.0]])


def _specs():
    box = [(0.0, 1.0), (0.0, 1.0)]
    return [
        make_competitive(1, 1, 1, constant(1), constant(1)),
        make_competitive(2, 0.5, 1.5, product_of_sines(1.0, box), gaussian_bump(2, [0.3, 0.6], 0.2),
                         dim=2),
        make_diagonal_linear([1.0, 3.0, 2.0], [constant(1), affine(0, [1.0]), constant(-2)],
                             Partition(2, 1)),
    ]


def test_structural_form_agrees_with_direct_evaluation():
    rng = np.random.default_rng(7)
    for spec in _specs():
        d, m1, m2 = spec.dim, spec.partition.m1, spec.partition.m2
        for _ in range(10_000 // len(_specs())):
            x = rng.random(d)
            r, s = rng.uniform(-5, 5, m1), rng.uniform(-5, 5, m2)
            p = rng.uniform(-5, 5, d)
            A = rng.uniform(-5, 5, (d, d))
            X = A + A.T
            for j in range(spec.m):
                direct = evaluate(spec, j, x, r, s, p, X)
                decomposed = evaluate_structural(spec, j, x, r, s, p, X)
                assert abs(direct - decomposed) <= 1e-12


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0, 1), r=finite, s=finite, p=finite, xx=finite)
def test_evaluate_is_pure(x, r, s, p, xx):
    spec = make_competitive(1.5, 0.7, 0.2, affine(1.0, [0.5]), constant(1))
    args = ([x], [r], [s], [p], [[xx]])
    first = evaluate(spec, 0, *args)
    assert evaluate(spec, 0, *args) == first


@settings(max_examples=300, deadline=None)
@given(x=st.floats(0, 1), r=finite, s=finite, bump=st.floats(0, 5), p=finite, xx=finite)
def test_competitive_first_line_of_balanced_condition(x, r, s, bump, p, xx):
    spec = make_competitive(1, 2, 3, constant(1), constant(1))
    low = evaluate(spec, 0, [x], [r], [s], [p], [[xx]])
    high = evaluate(spec, 0, [x], [r], [s + bump], [p], [[xx]])
    assert low <= high


def test_data_catalog_shapes():
    box = [(0.0, 2.0)]
    pts = np.linspace(0, 2, 5)[:, None]
    assert np.allclose(constant(3)(pts), 3)
    assert np.allclose(affine(1, [2])(pts), 1 + 2 * pts[:, 0])
    sines = product_of_sines(1.0, box)(pts)
    assert sines[0] == 0 and abs(sines[-1]) < 1e-15 and np.isclose(sines[2], 1)
    assert np.isclose(gaussian_bump(2, [1.0], 0.5)(pts)[2], 2)
