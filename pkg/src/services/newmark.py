import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.conf import messages
from src.conf.config import config
from src.entity.models import (BoundaryCondition, BoundaryConfig, CollocationGrid, CollocationMatrices,
                               GeometryMap, NewmarkParams, SolveStats, SplineBasis1D, SystemMatrix, TimeState,
                               WaveData)
from src.repository import reports as repository_reports
from src.services.assembly import assemble_collocation, assemble_stiffness, build_rhs, neumann_data
from src.services.exceptions import ConfigurationError, InstabilityError, ParameterError
from src.services.grid import build_grid, edge_weights, physical_points
from src.services.splines import make_knot_vector

logger = logging.getLogger(__name__)

Observer = Callable[[TimeState], None]


def _one_sided_derivative(func: Callable, order: int, delta: float) -> Callable:
    # Second-order forward differences in t at t = 0.
    if order == 1:
        stencil = np.array([-1.5, 2.0, -0.5]) / delta
    else:
        stencil = np.array([2.0, -5.0, 4.0, -1.0]) / delta ** 2

    def derivative(x, y, t, *args):
        return sum(c * func(x, y, t + m * delta, *args) for m, c in enumerate(stencil))

    return derivative


def _factorize(matrix: sp.spmatrix, message: str):
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as err:
        raise ConfigurationError(message) from err


def startup(data: WaveData, grid: CollocationGrid, colloc: CollocationMatrices, params: NewmarkParams,
            geometry: GeometryMap | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    The startup function computes the first two coefficient vectors u_0 and u_1.

    u_0 and the initial velocity v_0 are collocated through D0. The initial
    acceleration a_0 solves the wave equation at interior points and the time
    derivatives of the boundary conditions at boundary points, then
    u_1 = u_0 + dt*v_0 + dt^2/2*a_0.

    :param data: WaveData: Source, boundary and initial data
    :param grid: CollocationGrid: Classified grid
    :param colloc: CollocationMatrices: D0, D1, D2
    :param params: NewmarkParams: Time step and Newmark parameters
    :param geometry: GeometryMap: Identity or affine map
    :return: The pair (u_0, u_1)
    """
    dt, c0 = params.dt, params.c0
    xy = physical_points(grid, geometry)
    x, y = xy[:, 0], xy[:, 1]
    mass = _factorize(colloc.d0, messages.SINGULAR_MASS)
    u0 = mass.solve(np.asarray(data.initial_displacement(x, y), dtype=float) * np.ones(grid.dof))
    v0 = mass.solve(np.asarray(data.initial_velocity(x, y), dtype=float) * np.ones(grid.dof))

    dof = grid.dof
    rhs = np.zeros(dof)
    value_rows = np.zeros(dof)
    value_rows[grid.interior] = 1.0
    value_rows[grid.dirichlet] = 1.0
    value_rows[grid.absorbing] = 1.0
    normal_rows = np.zeros(dof)
    normal_rows[grid.neumann] = 1.0
    system = sp.diags(value_rows) @ colloc.d0 + sp.diags(normal_rows) @ colloc.d1

    rows = grid.interior
    if rows.size:
        rhs[rows] = c0 * (colloc.d2 @ u0)[rows] + data.source(x[rows], y[rows], 0.0)
    rows = grid.dirichlet
    if rows.size:
        rhs[rows] = _one_sided_derivative(data.dirichlet, 2, dt)(x[rows], y[rows], 0.0)
    if grid.neumann.size or grid.absorbing.size:
        psi_t = neumann_data(data, grid, 0.0, geometry, _one_sided_derivative(data.neumann, 1, dt))
        psi_tt = neumann_data(data, grid, 0.0, geometry, _one_sided_derivative(data.neumann, 2, dt))
        rhs[grid.neumann] = psi_tt[grid.neumann]
        rows = grid.absorbing
        if rows.size:
            # Time derivative of w/sqrt(c0) * u_t + du/dn = (1 - w) Psi, solved for D0 a.
            weight = edge_weights(grid, BoundaryCondition.absorbing).sum(axis=0)[rows]
            rhs[rows] = np.sqrt(c0) / weight * (psi_t[rows] - (colloc.d1 @ v0)[rows])

    a0 = _factorize(system, messages.SINGULAR_MASS).solve(rhs)
    u1 = u0 + dt * v0 + 0.5 * dt ** 2 * a0
    return u0, u1


def check_stability(state: TimeState, threshold: float | None = None) -> None:
    threshold = config.INSTABILITY_THRESHOLD if threshold is None else threshold
    norm = float(np.max(np.abs(state.u))) if state.u.size else 0.0
    if not np.isfinite(norm) or norm > threshold:
        message = messages.UNSTABLE_RUN.format(step=state.step, t=state.t, norm=norm)
        logger.error(message)
        raise InstabilityError(message, state.step, state.t, norm)


def step(state: TimeState, system: SystemMatrix, data: WaveData, grid: CollocationGrid,
         colloc: CollocationMatrices, geometry: GeometryMap | None = None,
         stats: SolveStats | None = None) -> TimeState:
    """
    The step function advances (u_n, u_{n-1}) to (u_{n+1}, u_n) with the cached factorization.

    :param state: TimeState: Current state at t_n
    :param system: SystemMatrix: Time-stepping matrix for the same dt
    :param data: WaveData: Source and boundary data
    :param grid: CollocationGrid: Classified grid
    :param colloc: CollocationMatrices: D0, D1, D2
    :param geometry: GeometryMap: Identity or affine map
    :param stats: SolveStats: Optional collector for residuals and timings
    :return: The state at t_{n+1}
    """
    params = system.params
    t_next = (state.step + 1) * params.dt
    rhs = build_rhs(data, grid, colloc, params, state.u, state.u_prev, t_next, geometry)
    started = time.perf_counter()
    u_next = system.solve(rhs)
    elapsed = time.perf_counter() - started
    residual = float(np.max(np.abs(system.matrix @ u_next - rhs))) if rhs.size else 0.0
    if stats is not None:
        stats.record(residual, elapsed)
    new_state = TimeState(step=state.step + 1, t=t_next, u=u_next, u_prev=state.u)
    check_stability(new_state)
    return new_state


def run(data: WaveData, grid: CollocationGrid, colloc: CollocationMatrices, params: NewmarkParams,
        observer: Observer | None = None, geometry: GeometryMap | None = None,
        system: SystemMatrix | None = None) -> tuple[TimeState, SolveStats]:
    """
    The run function integrates from t_0 = 0 to T = N*dt.

    The observer is called with the startup state (step 1) and with every
    state produced afterwards.

    :param data: WaveData: Source, boundary and initial data
    :param grid: CollocationGrid: Classified grid
    :param colloc: CollocationMatrices: D0, D1, D2
    :param params: NewmarkParams: Needs n_steps (or T)
    :param observer: Callable[[TimeState], None]: Per-step callback
    :param geometry: GeometryMap: Identity or affine map
    :param system: SystemMatrix: Pre-assembled matrix, assembled from params when omitted
    :return: The final state and the solve statistics
    """
    n_steps = params.n_steps
    if n_steps is None and params.T is not None:
        n_steps = int(round(params.T / params.dt))
    if n_steps is None or n_steps < 1:
        raise ParameterError(f"Number of steps must be at least 1, got {n_steps}")

    u0, u1 = startup(data, grid, colloc, params, geometry)
    state = TimeState(step=1, t=params.dt, u=u1, u_prev=u0)
    check_stability(state)
    if observer:
        observer(state)
    system = system or assemble_stiffness(colloc, grid, params)
    stats = SolveStats()
    for _ in range(1, n_steps):
        state = step(state, system, data, grid, colloc, geometry, stats)
        if observer:
            observer(state)
    logger.info("Newmark run finished: %d steps, max residual %.3e, mean solve %.3e s",
                n_steps, stats.max_residual, stats.mean_step_time)
    return state, stats


def reconstruct_velocity_acceleration(u_next: np.ndarray, u: np.ndarray, u_prev: np.ndarray,
                                      dt: float) -> tuple[np.ndarray, np.ndarray]:
    """ Central-difference velocity and acceleration coefficients at t_n. """
    velocity = (u_next - u_prev) / (2.0 * dt)
    acceleration = (u_next - 2.0 * u + u_prev) / dt ** 2
    return velocity, acceleration


class TrajectoryRecorder:
    """ Observer keeping (step, t, max|u|) for every state it sees. """

    def __init__(self, keep_states: bool = False):
        self.records = []
        self.states = []
        self.keep_states = keep_states

    def __call__(self, state: TimeState) -> None:
        self.records.append((state.step, state.t, float(np.max(np.abs(state.u)))))
        if self.keep_states:
            self.states.append(state)

    def rows(self, stats: SolveStats | None = None) -> list[dict]:
        residuals = [float("nan")] + list(stats.residuals if stats else [])
        residuals += [float("nan")] * (len(self.records) - len(residuals))
        return [{"step": n, "t": t, "max_abs_u": norm, "residual": r}
                for (n, t, norm), r in zip(self.records, residuals)]


def manufactured_standing_wave(c0: float = 1.0) -> tuple[WaveData, Callable]:
    """
    The manufactured_standing_wave function returns homogeneous-Dirichlet data
    whose exact solution is sin(pi x) sin(pi y) cos(pi t sqrt(2 c0)).

    :param c0: float: Squared wave speed
    :return: The WaveData and the exact solution u(x, y, t)
    """
    omega = np.pi * np.sqrt(2.0 * c0)

    def exact(x, y, t):
        return np.sin(np.pi * x) * np.sin(np.pi * y) * np.cos(omega * t)

    def flux(x, y, t, nx, ny):
        gx = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
        gy = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
        return (nx * gx + ny * gy) * np.cos(omega * t)

    data = WaveData(dirichlet=exact, neumann=flux,
                    initial_displacement=lambda x, y: exact(x, y, 0.0))
    return data, exact


@dataclass(frozen=True)
class ConvergenceRecord:
    dt: float
    n_steps: int
    error: float
    order: float | None = None


def convergence_study(p: int, h_den: int, k: int, dt_values: list[float], T: float = 1.0,
                      beta: float = 0.25, gamma: float = 0.5, c0: float = 1.0,
                      trajectory_dir: str | Path | None = None) -> list[ConvergenceRecord]:
    """
    The convergence_study function runs the standing wave problem for each dt and
    reports the max error at the collocation points at time T.

    :param p: int: Degree
    :param h_den: int: Number of elements per direction
    :param k: int: Regularity
    :param dt_values: list[float]: Time steps, each dividing T
    :param T: float: Final time
    :param beta: float: Newmark beta
    :param gamma: float: Newmark gamma
    :param c0: float: Squared wave speed
    :param trajectory_dir: str | Path: When given, one trajectory CSV per dt is written there
    :return: One record per dt, with the observed order against the previous one
    """
    basis = SplineBasis1D(make_knot_vector(p, h_den, k))
    grid = build_grid(basis, basis, BoundaryConfig.uniform(BoundaryCondition.dirichlet))
    colloc = assemble_collocation(grid, basis, basis)
    data, exact = manufactured_standing_wave(c0)

    records = []
    for dt in dt_values:
        n_steps = int(round(T / dt))
        params = NewmarkParams(dt=T / n_steps, beta=beta, gamma=gamma, c0=c0, T=T, n_steps=n_steps)
        recorder = TrajectoryRecorder() if trajectory_dir else None
        state, stats = run(data, grid, colloc, params, observer=recorder)
        if recorder:
            repository_reports.write_trajectory(Path(trajectory_dir) / f"trajectory_dt{params.dt:g}.csv",
                                                recorder.rows(stats))
        error = float(np.max(np.abs(colloc.d0 @ state.u - exact(grid.points[:, 0], grid.points[:, 1], T))))
        order = None
        if records and error > 0.0 and records[-1].error > 0.0:
            order = float(np.log(records[-1].error / error) / np.log(records[-1].dt / params.dt))
        records.append(ConvergenceRecord(dt=params.dt, n_steps=n_steps, error=error, order=order))
        logger.info("dt=%g error=%.3e order=%s", params.dt, error, order)
    return records


def oscillator_energy(state: TimeState, dt: float, omega: float) -> float:
    """ Discrete energy of the scalar recurrence, conserved for beta=1/4, gamma=1/2. """
    w = (state.u - state.u_prev) / dt
    s = 0.5 * (state.u + state.u_prev)
    return float(np.sum(w ** 2 + omega ** 2 * s ** 2))
