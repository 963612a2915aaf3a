import numpy as np

from src.entity.models import (BoundaryCondition, BoundaryConfig, CollocationGrid, Edge,
                               GeometryMap, SplineBasis1D)
from src.services.splines import greville_points

EDGES = tuple(Edge)


def _point_edges(i: int, j: int, nx: int, ny: int) -> tuple[Edge, ...]:
    edges = []
    if i == 0:
        edges.append(Edge.left)
    if i == nx - 1:
        edges.append(Edge.right)
    if j == 0:
        edges.append(Edge.bottom)
    if j == ny - 1:
        edges.append(Edge.top)
    return tuple(edges)


def _classify(edges: tuple[Edge, ...], bc: BoundaryConfig) -> BoundaryCondition | None:
    if not edges:
        return None
    kinds = {bc.condition(e) for e in edges}
    # Dirichlet overrides the other conditions at corners; a Neumann/absorbing
    # corner is enforced as an absorbing row with half weight on the ABC term.
    if BoundaryCondition.dirichlet in kinds:
        return BoundaryCondition.dirichlet
    if BoundaryCondition.absorbing in kinds:
        return BoundaryCondition.absorbing
    return BoundaryCondition.neumann


def build_grid(basis_x: SplineBasis1D, basis_y: SplineBasis1D, bc: BoundaryConfig | None = None) -> CollocationGrid:
    """
    The build_grid function forms the tensor-product Greville grid and splits
    its points into interior, Dirichlet, Neumann and absorbing index sets.

    :param basis_x: SplineBasis1D: Basis along xi
    :param basis_y: SplineBasis1D: Basis along eta
    :param bc: BoundaryConfig: Per-edge boundary conditions, all Dirichlet by default
    :return: A CollocationGrid with x-fastest flattening k = j*nx + i
    """
    bc = bc or BoundaryConfig()
    gx = greville_points(basis_x.knot_vector)
    gy = greville_points(basis_y.knot_vector)
    nx, ny = len(gx), len(gy)
    xx, yy = np.meshgrid(gx, gy)
    points = np.column_stack([xx.ravel(), yy.ravel()])

    sets = {None: [], BoundaryCondition.dirichlet: [], BoundaryCondition.neumann: [],
            BoundaryCondition.absorbing: []}
    edges = []
    for k in range(nx * ny):
        i, j = k % nx, k // nx
        point_edges = _point_edges(i, j, nx, ny)
        edges.append(point_edges)
        sets[_classify(point_edges, bc)].append(k)

    index = {kind: np.asarray(members, dtype=np.int64) for kind, members in sets.items()}
    return CollocationGrid(nx=nx, ny=ny, points=points,
                           interior=index[None],
                           dirichlet=index[BoundaryCondition.dirichlet],
                           neumann=index[BoundaryCondition.neumann],
                           absorbing=index[BoundaryCondition.absorbing],
                           edges=tuple(edges), bc=bc)


def map_point(geometry: GeometryMap, xi) -> np.ndarray:
    """
    The map_point function pushes a parametric point to the physical domain.

    :param geometry: GeometryMap: Identity or affine map
    :param xi: Parametric point(s) in [0, 1]^2
    :return: Physical point(s)
    """
    return geometry.map(xi)


def physical_points(grid: CollocationGrid, geometry: GeometryMap | None = None) -> np.ndarray:
    return (geometry or GeometryMap()).map(grid.points)


def point_normals(grid: CollocationGrid, k: int, geometry: GeometryMap | None = None) -> list[np.ndarray]:
    """ Physical outward normals attached to point k (one per edge, two at corners). """
    geometry = geometry or GeometryMap()
    return [geometry.normal(e) for e in grid.edges[k]]


def edge_weights(grid: CollocationGrid, kind: BoundaryCondition | None = None) -> np.ndarray:
    """
    The edge_weights function returns the averaging weights used at boundary rows.

    weights[e, k] = 1/len(edges of k) when edge e touches point k. With a kind
    given, only edges carrying that condition count and Dirichlet points get
    no weight, since their rows never involve normal derivatives.

    :param grid: CollocationGrid: Classified grid
    :param kind: BoundaryCondition | None: Restrict to edges of this condition
    :return: Array of shape (4, dof) in Edge order
    """
    weights = np.zeros((len(EDGES), grid.dof))
    skip = set(grid.dirichlet.tolist()) if kind is not None else set()
    for k, point_edges in enumerate(grid.edges):
        if not point_edges or k in skip:
            continue
        for e in point_edges:
            if kind is None or grid.bc.condition(e) is kind:
                weights[EDGES.index(e), k] = 1.0 / len(point_edges)
    return weights
