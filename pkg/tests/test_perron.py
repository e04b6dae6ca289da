import dataclasses

import numpy as np
import pytest

from balqm import (
    SolveConfig,
    classify,
    perron_solve,
    perron_solve_dual,
    pseudo_time_oracle,
    solve_scalar_linear,
)
from balqm.barriers import BarrierPair
from balqm.perron import NodalSolveError, OracleDivergence, oracle_step_bound
from conftest import competitive_case


def _maxdiff(a, b):
    return float(np.max(np.abs(a.values - b.values)))


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=0)
    with pytest.raises(ValueError):
        SolveConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        SolveConfig(relaxation="jacobi")


def test_zero_case():
    _, _, system, bar = competitive_case(1, 1, 1, f=0.0, g=0.0, n=21)
    U, rep = perron_solve(system, bar)
    assert rep.converged and rep.sweeps == 0 and not np.any(U.values)
    V, rep_d = perron_solve_dual(system, bar)
    assert rep_d.converged and np.array_equal(U.values, V.values)
    W, rep_o = pseudo_time_oracle(system, bar.z)
    assert rep_o.converged and rep_o.sweeps == 0


def test_symmetric_case(symmetric_201):
    _, grid, system, bar = symmetric_201
    U, rep = perron_solve(system, bar)
    assert rep.converged and rep.final_residual <= 1e-8
    assert np.max(np.abs(U.values[0] - U.values[1])) <= 1e-10
    assert np.max(np.abs(U.values[0] - solve_scalar_linear(grid, 2.0, 1.0))) <= 1e-10
    V, rep_d = perron_solve_dual(system, bar)
    assert rep_d.converged and _maxdiff(U, V) <= 2e-8
    assert classify(system, U).verdict == "solution"


def test_oracle_agreement(oracle_case):
    _, _, system, bar = oracle_case
    U, rep = perron_solve(system, bar)
    O, rep_o = pseudo_time_oracle(system, bar.z)
    assert rep.converged and rep_o.converged
    assert _maxdiff(U, O) <= 1e-8
    assert rep.monotonicity_violations == 0 and rep.sandwich_violations == 0


def test_sandwich_holds_at_every_sweep(oracle_case):
    _, _, system, bar = oracle_case
    lo, hi = bar.lower(), bar.upper()
    for solver in (perron_solve, perron_solve_dual):
        _, rep = solver(system, bar, SolveConfig(snapshot_every=1))
        assert len(rep.snapshots) == rep.sweeps + 1
        prev = None
        for _, S in rep.snapshots:
            assert np.all(S.values >= lo) and np.all(S.values <= hi)
            if prev is not None:
                step = S.values - prev
                sign = 1 if solver is perron_solve else -1
                assert np.all(sign * step[0] <= 1e-12) and np.all(sign * step[1] >= -1e-12)
            prev = S.values


def test_nodal_mode_matches_block():
    _, _, system, bar = competitive_case(2.0, 0.5, 0.5, f=1.0, g=2.0, n=11)
    U, rep = perron_solve(system, bar)
    V, rep_n = perron_solve(system, bar, SolveConfig(relaxation="nodal"))
    assert rep_n.converged
    assert _maxdiff(U, V) <= 2e-8
    assert rep_n.monotonicity_violations == 0 and rep_n.sandwich_violations == 0
    W, rep_nd = perron_solve_dual(system, bar, SolveConfig(relaxation="nodal"))
    assert rep_nd.converged and _maxdiff(U, W) <= 2e-8


def test_nodal_error_names_component_and_node():
    _, _, system, bar = competitive_case(1, 1, 1, f=1.0, g=1.0, n=11)
    zero = system.zeros()
    bogus = BarrierPair(zero, zero.copy(), True)
    with pytest.raises(NodalSolveError) as err:
        perron_solve(system, bogus, SolveConfig(relaxation="nodal"))
    assert err.value.component == 0 and err.value.node == (1,)
    assert "structure" in str(err.value)


def test_unverified_barriers_rejected(oracle_case):
    _, _, system, bar = oracle_case
    with pytest.raises(ValueError, match="ordering-verified"):
        perron_solve(system, dataclasses.replace(bar, ordering_verified=False))


def test_max_sweeps_reports_nonconvergence(oracle_case):
    _, _, system, bar = oracle_case
    U, rep = perron_solve(system, bar, SolveConfig(max_sweeps=1, tol=1e-15))
    assert not rep.converged and rep.sweeps == 1 and len(rep.residual_history) == 2


def test_oracle_fixed_point_takes_no_steps(oracle_case):
    _, _, system, bar = oracle_case
    U, _ = perron_solve(system, bar)
    _, rep = pseudo_time_oracle(system, U)
    assert rep.converged and rep.sweeps == 0


def test_oracle_step_limits(oracle_case):
    _, _, system, bar = oracle_case
    bound = oracle_step_bound(system)
    with pytest.raises(ValueError, match="stability"):
        pseudo_time_oracle(system, bar.z, step=1.5 * bound)
    with pytest.raises(ValueError):
        pseudo_time_oracle(system, bar.z, step=-1.0)


def test_oracle_divergence_carries_history():
    spec, grid, system, bar = competitive_case(1, 1, 1, f=1.0, g=1.0, n=21)
    form = dataclasses.replace(spec.structural_form, coupling_lipschitz=None)
    loose = dataclasses.replace(system.spec, structural_form=form)
    system.spec = loose
    with pytest.raises(OracleDivergence) as err:
        pseudo_time_oracle(system, bar.z, step=5 * grid.spacing[0] ** 2)
    hist = err.value.history
    assert hist[-1] > 10 * min(hist)


def test_report_serialization_excludes_wall_time(oracle_case):
    _, _, system, bar = oracle_case
    _, a = perron_solve(system, bar)
    _, b = perron_solve(system, bar)
    assert a.to_dict() == b.to_dict()
    assert "wall_time" not in a.to_dict()


def test_weak_uniqueness_case_still_solves():
    # condition i' fails for these constants; the solver still converges on
    # both sides, but agreement is not something the theory promises here
    _, _, system, bar = competitive_case(0.5, 2.0, 2.0, f=1.0, g=1.0, n=41)
    U, rep = perron_solve(system, bar)
    V, rep_d = perron_solve_dual(system, bar)
    assert rep.converged and rep_d.converged
    assert classify(system, U).verdict == classify(system, V).verdict == "solution"
