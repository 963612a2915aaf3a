import unittest
from typing import Callable

import numpy as np
import pytest
import scipy.sparse as sp

from src.entity.models import (BoundaryCondition, BoundaryConfig, CollocationGrid, CollocationMatrices, NewmarkParams,
                               TimeState, WaveData)
from src.services.exceptions import InstabilityError, ParameterError
from src.services.newmark import (TrajectoryRecorder, check_stability, convergence_study,
                                  manufactured_standing_wave, oscillator_energy, reconstruct_velocity_acceleration,
                                  run, startup)
from tests.builders import make_problem

N = BoundaryCondition.neumann


def scalar_problem(omega: float, c0: float = 1.0) -> tuple[CollocationGrid, CollocationMatrices]:
    grid = CollocationGrid(nx=1, ny=1, points=np.array([[0.5, 0.5]]), interior=np.array([0]),
                           dirichlet=np.array([], dtype=np.int64), neumann=np.array([], dtype=np.int64),
                           absorbing=np.array([], dtype=np.int64), edges=((),))
    colloc = CollocationMatrices(d0=sp.csr_matrix([[1.0]]), d1=sp.csr_matrix((1, 1)),
                                 d2=sp.csr_matrix([[-omega ** 2 / c0]]))
    return grid, colloc


def bump(x, y, *args):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


class TestRun(unittest.TestCase):

    def test_zero_data_stays_zero(self):
        _, grid, colloc = make_problem(3, 3, 2)
        state, stats = run(WaveData(), grid, colloc, NewmarkParams(dt=0.1, n_steps=6))
        self.assertEqual(state.step, 6)
        np.testing.assert_array_equal(state.u, 0.0)
        self.assertEqual(stats.max_residual, 0.0)

    def test_constant_state_under_neumann(self):
        _, grid, colloc = make_problem(3, 4, 2, N)
        data = WaveData(initial_displacement=lambda x, y: np.ones_like(x))
        states = []
        run(data, grid, colloc, NewmarkParams(dt=0.05, beta=0.25, n_steps=20), observer=states.append)
        for state in states:
            np.testing.assert_allclose(state.u, 1.0, atol=1e-8)

    def test_single_step_returns_startup_pair(self):
        _, grid, colloc = make_problem(2, 3, 1)
        data = WaveData(initial_displacement=bump)
        params = NewmarkParams(dt=0.05, n_steps=1)
        u0, u1 = startup(data, grid, colloc, params)
        state, stats = run(data, grid, colloc, params)
        self.assertEqual(state.step, 1)
        np.testing.assert_array_equal(state.u, u1)
        np.testing.assert_array_equal(state.u_prev, u0)
        self.assertEqual(stats.residuals, [])

    def test_missing_step_count(self):
        _, grid, colloc = make_problem(2, 2, 1)
        with self.assertRaises(ParameterError):
            run(WaveData(), grid, colloc, NewmarkParams(dt=0.1))

    def test_horizon_sets_step_count(self):
        _, grid, colloc = make_problem(2, 2, 1)
        state, _ = run(WaveData(), grid, colloc, NewmarkParams(dt=0.1, T=0.5))
        self.assertEqual(state.step, 5)
        self.assertAlmostEqual(state.t, 0.5)

    def test_explicit_scheme_blows_up(self):
        _, grid, colloc = make_problem(3, 12, 2)
        data = WaveData(initial_displacement=bump)
        with self.assertRaises(InstabilityError) as ctx:
            run(data, grid, colloc, NewmarkParams(dt=0.1, beta=0.0, n_steps=400))
        self.assertGreater(ctx.exception.step, 1)
        self.assertTrue(ctx.exception.norm > 1e6 or not np.isfinite(ctx.exception.norm))

    def test_factorization_reused_every_step(self):
        _, grid, colloc = make_problem(2, 3, 1)
        _, stats = run(WaveData(initial_displacement=bump), grid, colloc, NewmarkParams(dt=0.1, n_steps=8))
        self.assertEqual(stats.factorization_reuse, 7)
        self.assertEqual(len(stats.residuals), 7)
        self.assertLess(stats.max_residual, 1e-8)


def test_runs_are_bit_identical():
    _, grid, colloc = make_problem(3, 3, 2, BoundaryCondition.absorbing)
    data = WaveData(initial_displacement=bump)
    params = NewmarkParams(dt=0.02, beta=0.5, n_steps=15)
    first, _ = run(data, grid, colloc, params)
    second, _ = run(data, grid, colloc, params)
    np.testing.assert_array_equal(first.u, second.u)


def test_solution_is_linear_in_the_data():
    _, grid, colloc = make_problem(3, 4, 2)

    def other(x, y, *args):
        return x * (1 - x) * y * (1 - y)

    params = NewmarkParams(dt=0.02, beta=0.25, n_steps=10)
    a, _ = run(WaveData(initial_displacement=bump), grid, colloc, params)
    b, _ = run(WaveData(initial_velocity=other), grid, colloc, params)
    both, _ = run(WaveData(initial_displacement=bump, initial_velocity=other), grid, colloc, params)
    np.testing.assert_allclose(both.u, a.u + b.u, atol=1e-12)


def doubled(func):
    return lambda *args: 2.0 * func(*args)


def test_doubling_all_data_doubles_the_trajectory():
    bc = BoundaryConfig(left=BoundaryCondition.dirichlet, right=N, bottom=BoundaryCondition.absorbing, top=N)
    _, grid, colloc = make_problem(3, 4, 2, bc)
    data = WaveData(source=lambda x, y, t: np.sin(3 * t) * x * y,
                    dirichlet=lambda x, y, t: y * (1 - y) * t,
                    neumann=lambda x, y, t, nx, ny: (nx * x + ny * y) * np.cos(t),
                    initial_displacement=bump,
                    initial_velocity=lambda x, y: x * (1 - x) * y)
    twice = WaveData(*(doubled(func) for func in (data.source, data.dirichlet, data.neumann,
                                                  data.initial_displacement, data.initial_velocity)))
    params = NewmarkParams(dt=0.02, beta=0.25, n_steps=12)
    single, second = [], []
    run(data, grid, colloc, params, observer=lambda state: single.append(state.u))
    run(twice, grid, colloc, params, observer=lambda state: second.append(state.u))
    scale = max(np.abs(u).max() for u in single)
    assert len(single) == len(second) == 12
    for u, v in zip(single, second):
        np.testing.assert_allclose(v, 2.0 * u, rtol=0, atol=1e-12 * scale)


def test_scalar_recurrence_conserves_energy():
    omega, dt = 2.0, 0.01
    grid, colloc = scalar_problem(omega)
    data = WaveData(initial_displacement=lambda x, y: np.ones_like(x))
    energies = []
    run(data, grid, colloc, NewmarkParams(dt=dt, beta=0.25, n_steps=10_000),
        observer=lambda state: energies.append(oscillator_energy(state, dt, omega)))
    energies = np.asarray(energies)
    assert len(energies) == 10_000
    assert np.max(np.abs(energies - energies[0])) <= 1e-10 * energies[0]


def test_scalar_recurrence_matches_cosine_for_small_steps():
    omega, dt = 1.5, 1e-3
    grid, colloc = scalar_problem(omega)
    data = WaveData(initial_displacement=lambda x, y: np.ones_like(x))
    state, _ = run(data, grid, colloc, NewmarkParams(dt=dt, beta=0.25, n_steps=1000))
    assert abs(state.u[0] - np.cos(omega * 1.0)) < 1e-5


def test_startup_is_second_order():
    _, grid, colloc = make_problem(6, 6, 5)
    data, exact = manufactured_standing_wave(1.0)
    x, y = grid.points.T
    errors = []
    for dt in (0.1, 0.05, 0.025):
        _, u1 = startup(data, grid, colloc, NewmarkParams(dt=dt))
        errors.append(np.max(np.abs(colloc.d0 @ u1 - exact(x, y, dt))))
    assert errors[0] / errors[1] > 3.5
    assert errors[1] / errors[2] > 3.5


def outflow_field(c0: float, c: float = 1.5, b: float = 0.4) -> tuple[WaveData, Callable]:
    """
    u = A + t B + t^2/2 C with C = c, quadratic in time and biquadratic in space.

    A and B are chosen so u_t/sqrt(c0) + du/dn = 0 on every edge of the unit
    square, so the same field serves the absorbing and the Neumann rows.
    """
    s = np.sqrt(c0)

    def q(z):
        return z * z - z

    def dq(z):
        return 2 * z - 1

    def a(x, y):
        return c / c0 * q(x) * q(y) - b / s * (q(x) + q(y))

    def bb(x, y):
        return -c / s * (q(x) + q(y)) + b

    def exact(x, y, t):
        return a(x, y) + t * bb(x, y) + 0.5 * c * t ** 2

    def flux(x, y, t, nx, ny):
        gx = c / c0 * dq(x) * q(y) - b / s * dq(x) - t * c / s * dq(x)
        gy = c / c0 * q(x) * dq(y) - b / s * dq(y) - t * c / s * dq(y)
        return nx * gx + ny * gy

    def source(x, y, t):
        laplacian = 2 * c / c0 * (q(x) + q(y)) - 4 * b / s - 4 * t * c / s
        return c - c0 * laplacian

    data = WaveData(source=source, neumann=flux, initial_displacement=a, initial_velocity=bb)
    return data, exact


@pytest.mark.parametrize("condition", [N, BoundaryCondition.absorbing])
@pytest.mark.parametrize("c0", [1.0, 2.25])
def test_startup_is_exact_for_quadratic_motion(condition, c0):
    _, grid, colloc = make_problem(3, 4, 2, condition)
    data, exact = outflow_field(c0)
    x, y = grid.points.T
    for dt in (0.1, 0.05):
        u0, u1 = startup(data, grid, colloc, NewmarkParams(dt=dt, c0=c0))
        np.testing.assert_allclose(colloc.d0 @ u0, exact(x, y, 0.0), atol=1e-12)
        np.testing.assert_allclose(colloc.d0 @ u1, exact(x, y, dt), atol=1e-11)


def test_trajectory_recorder_rows():
    _, grid, colloc = make_problem(2, 3, 1)
    recorder = TrajectoryRecorder(keep_states=True)
    _, stats = run(WaveData(initial_displacement=bump), grid, colloc, NewmarkParams(dt=0.1, n_steps=4),
                   observer=recorder)
    rows = recorder.rows(stats)
    assert [r["step"] for r in rows] == [1, 2, 3, 4]
    assert np.isnan(rows[0]["residual"])
    assert all(r["residual"] < 1e-8 for r in rows[1:])
    assert len(recorder.states) == 4
    assert rows[-1]["max_abs_u"] == pytest.approx(float(np.max(np.abs(recorder.states[-1].u))))


def test_reconstruct_quadratic_in_time():
    dt = 0.1
    u_prev, u, u_next = np.zeros(3), np.full(3, dt ** 2), np.full(3, 4 * dt ** 2)
    velocity, acceleration = reconstruct_velocity_acceleration(u_next, u, u_prev, dt)
    np.testing.assert_allclose(velocity, 2 * dt)
    np.testing.assert_allclose(acceleration, 2.0)


def test_check_stability_threshold():
    state = TimeState(step=3, t=0.3, u=np.array([1.0, -20.0]), u_prev=np.zeros(2))
    check_stability(state)
    with pytest.raises(InstabilityError):
        check_stability(state, threshold=10.0)
    with pytest.raises(InstabilityError):
        check_stability(TimeState(step=1, t=0.1, u=np.array([np.nan]), u_prev=np.zeros(1)))


def test_convergence_study_writes_trajectories(tmp_path):
    records = convergence_study(4, 4, 3, [0.1, 0.05], T=0.5, trajectory_dir=tmp_path)
    assert [r.n_steps for r in records] == [5, 10]
    assert records[0].order is None
    assert records[1].order is not None
    assert records[1].error < records[0].error
    assert (tmp_path / "trajectory_dt0.1.csv").exists()
    assert (tmp_path / "trajectory_dt0.05.csv").exists()
