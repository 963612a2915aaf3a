from src.entity.models import BoundaryCondition, BoundaryConfig, SplineBasis1D
from src.services.assembly import assemble_collocation
from src.services.grid import build_grid
from src.services.splines import make_knot_vector


def make_basis(p: int, n: int, k: int) -> SplineBasis1D:
    return SplineBasis1D(make_knot_vector(p, n, k))


def make_problem(p: int, n: int, k: int, bc: BoundaryConfig | BoundaryCondition = BoundaryCondition.dirichlet,
                 geometry=None):
    """ Basis, classified grid and collocation matrices on the same basis in both directions. """
    if isinstance(bc, BoundaryCondition):
        bc = BoundaryConfig.uniform(bc)
    basis = make_basis(p, n, k)
    grid = build_grid(basis, basis, bc)
    return basis, grid, assemble_collocation(grid, basis, basis, geometry)
