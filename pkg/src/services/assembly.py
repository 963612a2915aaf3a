import logging

import numpy as np
import scipy.sparse as sp

from src.entity.models import (BoundaryCondition, CollocationGrid, CollocationMatrices, GeometryMap,
                               NewmarkParams, SplineBasis1D, SystemMatrix, WaveData)
from src.services.grid import EDGES, edge_weights, physical_points
from src.services.splines import collocation_factors

logger = logging.getLogger(__name__)


def _finalize(matrix) -> sp.csr_matrix:
    matrix = sp.csr_matrix(matrix)
    matrix.sort_indices()
    return matrix


def _combine(terms: list[tuple[float, sp.csr_matrix]], shape: tuple[int, int]) -> sp.csr_matrix:
    # Zero coefficients are skipped so they never leave explicit zeros behind.
    out = sp.csr_matrix(shape)
    for coefficient, matrix in terms:
        if coefficient != 0.0:
            out = out + coefficient * matrix
    return out


def _row_selector(rows: np.ndarray, dof: int, scale: np.ndarray | None = None) -> sp.csr_matrix:
    diagonal = np.zeros(dof)
    diagonal[rows] = 1.0 if scale is None else scale[rows]
    return sp.diags(diagonal, format="csr")


def assemble_collocation(grid: CollocationGrid, basis_x: SplineBasis1D, basis_y: SplineBasis1D,
                         geometry: GeometryMap | None = None) -> CollocationMatrices:
    """
    The assemble_collocation function builds the three 2D collocation matrices
    as Kronecker products of the univariate factors.

    D0 holds basis values, D2 the physical Laplacian and D1 the outward normal
    derivative (averaged over both edges at corners, zero at interior points).

    :param grid: CollocationGrid: Classified Greville grid
    :param basis_x: SplineBasis1D: Basis along xi
    :param basis_y: SplineBasis1D: Basis along eta
    :param geometry: GeometryMap: Identity or affine map
    :return: CollocationMatrices with sorted CSR storage
    """
    geometry = geometry or GeometryMap()
    gx = grid.points[:grid.nx, 0]
    gy = grid.points[::grid.nx, 1]
    bx0, bx1, bx2 = collocation_factors(basis_x, gx)
    by0, by1, by2 = collocation_factors(basis_y, gy)
    dof = grid.dof
    shape = (dof, basis_x.n_basis * basis_y.n_basis)

    d0 = sp.kron(by0, bx0, format="csr")
    d_xi = sp.kron(by0, bx1, format="csr")
    d_eta = sp.kron(by1, bx0, format="csr")

    g_xx, g_xy, g_yy = geometry.laplacian_pullback()
    d2 = _combine([(g_xx, sp.kron(by0, bx2, format="csr")),
                   (2.0 * g_xy, sp.kron(by1, bx1, format="csr")),
                   (g_yy, sp.kron(by2, bx0, format="csr"))], shape)

    weights = edge_weights(grid)
    d1 = sp.csr_matrix(shape)
    for e, edge in enumerate(EDGES):
        if not weights[e].any():
            continue
        a, b = geometry.normal_pullback(edge)
        d1 = d1 + sp.diags(weights[e], format="csr") @ _combine([(a, d_xi), (b, d_eta)], shape)

    logger.debug("collocation matrices: dof=%d nnz(D0)=%d nnz(D1)=%d nnz(D2)=%d",
                 dof, d0.nnz, d1.nnz, d2.nnz)
    return CollocationMatrices(d0=_finalize(d0), d1=_finalize(d1), d2=_finalize(d2))


def assemble_stiffness(colloc: CollocationMatrices, grid: CollocationGrid, params: NewmarkParams,
                       label: str = "") -> SystemMatrix:
    """
    The assemble_stiffness function builds the time-stepping matrix K row by row.

    Interior rows carry D0/dt^2 - c0*beta*D2, Dirichlet rows D0, Neumann rows D1
    and absorbing rows D1 + w*gamma/(dt*sqrt(c0))*D0, where w is the share of
    absorbing edges at the point.

    :param colloc: CollocationMatrices: Output of assemble_collocation
    :param grid: CollocationGrid: Grid the matrices were built on
    :param params: NewmarkParams: Time step and Newmark parameters
    :param label: str: Configuration label used in error messages
    :return: A SystemMatrix whose LU factorization is computed once on first solve
    """
    dof = colloc.dof
    d0, d1, d2 = colloc.d0, colloc.d1, colloc.d2
    interior = d0 / params.dt ** 2
    if not params.is_explicit:
        interior = interior - (params.c0 * params.beta) * d2

    absorbing_weight = edge_weights(grid, BoundaryCondition.absorbing).sum(axis=0)
    absorbing = d1 + sp.diags(absorbing_weight * params.absorbing_coefficient, format="csr") @ d0

    matrix = (_row_selector(grid.interior, dof) @ interior
              + _row_selector(grid.dirichlet, dof) @ d0
              + _row_selector(grid.neumann, dof) @ d1
              + _row_selector(grid.absorbing, dof) @ absorbing)
    matrix = _finalize(matrix)
    logger.debug("system matrix %s: dof=%d nz=%d", label, dof, matrix.nnz)
    return SystemMatrix(matrix=matrix, params=params, interior=grid.interior, dirichlet=grid.dirichlet,
                        neumann=grid.neumann, absorbing=grid.absorbing,
                        absorbing_weight=absorbing_weight, label=label)


def neumann_data(data: WaveData, grid: CollocationGrid, t: float, geometry: GeometryMap | None = None,
                 derivative=None) -> np.ndarray:
    """
    Edge-weighted Neumann data sum_e W_N[e, k] * Psi(P_k, t, n_e) at every point.

    Only edges carrying a Neumann condition contribute, which makes the Neumann
    part of a mixed Neumann/absorbing corner equal to half the edge value.
    """
    geometry = geometry or GeometryMap()
    psi = derivative or data.neumann
    xy = physical_points(grid, geometry)
    weights = edge_weights(grid, BoundaryCondition.neumann)
    out = np.zeros(grid.dof)
    for e, edge in enumerate(EDGES):
        mask = weights[e] > 0.0
        if not mask.any():
            continue
        nx, ny = geometry.normal(edge)
        out[mask] += weights[e, mask] * psi(xy[mask, 0], xy[mask, 1], t, nx, ny)
    return out


def build_rhs(data: WaveData, grid: CollocationGrid, colloc: CollocationMatrices, params: NewmarkParams,
              u_n: np.ndarray, u_prev: np.ndarray, t_next: float,
              geometry: GeometryMap | None = None) -> np.ndarray:
    """
    The build_rhs function forms the right-hand side for the step t_n -> t_{n+1}.

    :param data: WaveData: Source, boundary and initial data
    :param grid: CollocationGrid: Classified grid
    :param colloc: CollocationMatrices: D0, D1, D2
    :param params: NewmarkParams: Time step and Newmark parameters
    :param u_n: np.ndarray: Coefficients at t_n
    :param u_prev: np.ndarray: Coefficients at t_{n-1}
    :param t_next: float: Target time t_{n+1}
    :param geometry: GeometryMap: Identity or affine map
    :return: Right-hand side vector of length dof
    """
    dt, beta, gamma, c0 = params.dt, params.beta, params.gamma, params.c0
    a1, a2 = params.history_weights
    t_n, t_prev = t_next - dt, t_next - 2.0 * dt
    u_n = np.asarray(u_n, dtype=float)
    u_prev = np.asarray(u_prev, dtype=float)
    xy = physical_points(grid, geometry)
    rhs = np.zeros(grid.dof)

    rows = grid.interior
    if rows.size:
        x, y = xy[rows, 0], xy[rows, 1]
        source = (beta * data.source(x, y, t_next) + a1 * data.source(x, y, t_n)
                  + a2 * data.source(x, y, t_prev))
        history = (colloc.d0 @ (2.0 * u_n - u_prev)) / dt ** 2 + c0 * (colloc.d2 @ (a1 * u_n + a2 * u_prev))
        rhs[rows] = source + history[rows]

    rows = grid.dirichlet
    if rows.size:
        rhs[rows] = data.dirichlet(xy[rows, 0], xy[rows, 1], t_next)

    rows = np.concatenate([grid.neumann, grid.absorbing])
    if rows.size:
        rhs[rows] = neumann_data(data, grid, t_next, geometry)[rows]

    rows = grid.absorbing
    if rows.size:
        weight = edge_weights(grid, BoundaryCondition.absorbing).sum(axis=0)[rows]
        damping = colloc.d0 @ ((1.0 - 2.0 * gamma) * u_n + (gamma - 1.0) * u_prev)
        rhs[rows] -= weight * damping[rows] / (dt * np.sqrt(c0))
    return rhs
