import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.conf import messages
from src.services.exceptions import ConfigurationError, GeometryError, ParameterError, SplineDomainError

logger = logging.getLogger(__name__)


class BoundaryCondition(enum.Enum):
    dirichlet: str = "dirichlet"
    neumann: str = "neumann"
    absorbing: str = "abc"


class Edge(enum.Enum):
    left: str = "left"
    right: str = "right"
    bottom: str = "bottom"
    top: str = "top"

    @property
    def normal(self) -> np.ndarray:
        """ Outward unit normal of the edge in the parametric square. """
        return {
            Edge.left: np.array([-1.0, 0.0]),
            Edge.right: np.array([1.0, 0.0]),
            Edge.bottom: np.array([0.0, -1.0]),
            Edge.top: np.array([0.0, 1.0]),
        }[self]


class MatrixTarget(enum.Enum):
    mass: str = "mass"
    stiffness: str = "stiffness"


class Analysis(enum.Enum):
    cond: str = "cond"
    eig: str = "eig"
    spy: str = "spy"


class Estimate(enum.Enum):
    mass_16p: str = "M-16p"
    stiffness_16p: str = "K-16p"
    mass_k0: str = "M-k0"
    mass_kmax: str = "M-kmax"
    stiffness_k0: str = "K-k0"
    stiffness_kmax: str = "K-kmax"


class GeometryKind(enum.Enum):
    identity: str = "identity"
    affine: str = "affine"


def zero_field(x, y, *args):
    return np.zeros(np.broadcast(np.asarray(x, dtype=float), np.asarray(y, dtype=float)).shape)


@dataclass(frozen=True, eq=False)
class KnotVector:
    degree: int
    regularity: int
    n_elements: int
    knots: np.ndarray

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1


@dataclass(frozen=True, eq=False)
class SplineBasis1D:
    knot_vector: KnotVector
    weights: np.ndarray | None = None

    def __post_init__(self):
        nu = self.knot_vector.n_basis
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(nu))
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (nu,) or np.any(weights <= 0.0):
            raise SplineDomainError(messages.INVALID_WEIGHTS.format(count=nu))
        object.__setattr__(self, "weights", weights)

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def knots(self) -> np.ndarray:
        return self.knot_vector.knots

    @property
    def n_basis(self) -> int:
        return self.knot_vector.n_basis

    @property
    def is_rational(self) -> bool:
        return bool(np.any(self.weights != 1.0))


@dataclass(frozen=True, eq=False)
class BasisEval:
    span: int
    values: np.ndarray
    first: np.ndarray | None = None
    second: np.ndarray | None = None

    @property
    def indices(self) -> np.ndarray:
        """ Global (0-based) indices of the p+1 basis functions carried by this evaluation. """
        p = len(self.values) - 1
        return np.arange(self.span - p, self.span + 1)


@dataclass(frozen=True, eq=False)
class GeometryMap:
    kind: GeometryKind = GeometryKind.identity
    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))
    shift: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if self.kind is GeometryKind.identity:
            object.__setattr__(self, "matrix", np.eye(2))
            object.__setattr__(self, "shift", np.zeros(2))
            return
        matrix = np.asarray(self.matrix, dtype=float).reshape(2, 2)
        det = float(np.linalg.det(matrix))
        if abs(det) <= 1e-14:
            raise GeometryError(messages.SINGULAR_MAP.format(det=abs(det)))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=float).reshape(2))

    @classmethod
    def affine(cls, matrix, shift=(0.0, 0.0)) -> "GeometryMap":
        return cls(GeometryKind.affine, np.asarray(matrix, dtype=float), np.asarray(shift, dtype=float))

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def map(self, xi: np.ndarray) -> np.ndarray:
        """
        Push parametric points forward to the physical domain.

        :param xi: np.ndarray: Parametric points, shape (2,) or (n, 2)
        :return: Physical points with the same shape
        """
        xi = np.asarray(xi, dtype=float)
        return xi @ self.matrix.T + self.shift

    def laplacian_pullback(self) -> tuple[float, float, float]:
        """
        Coefficients (g_xx, g_xy, g_yy) such that the physical Laplacian equals
        g_xx u_xixi + 2 g_xy u_xieta + g_yy u_etaeta for affine maps.
        """
        g = self.inverse @ self.inverse.T
        return float(g[0, 0]), float(g[0, 1]), float(g[1, 1])

    def normal(self, edge: Edge) -> np.ndarray:
        """ Physical outward unit normal of the image of a parametric edge. """
        n = self.inverse.T @ edge.normal
        return n / np.linalg.norm(n)

    def normal_pullback(self, edge: Edge) -> np.ndarray:
        """ Coefficients of (d/dxi, d/deta) giving the physical outward normal derivative. """
        return self.inverse @ self.normal(edge)


@dataclass(frozen=True)
class BoundaryConfig:
    left: BoundaryCondition = BoundaryCondition.dirichlet
    right: BoundaryCondition = BoundaryCondition.dirichlet
    bottom: BoundaryCondition = BoundaryCondition.dirichlet
    top: BoundaryCondition = BoundaryCondition.dirichlet

    @classmethod
    def uniform(cls, condition: BoundaryCondition) -> "BoundaryConfig":
        return cls(condition, condition, condition, condition)

    def condition(self, edge: Edge) -> BoundaryCondition:
        return getattr(self, edge.value)

    @property
    def label(self) -> str:
        kinds = {self.left, self.right, self.bottom, self.top}
        if len(kinds) == 1:
            return self.left.value
        return "-".join(self.condition(e).value for e in Edge)


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    nx: int
    ny: int
    points: np.ndarray
    interior: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    absorbing: np.ndarray
    edges: tuple[tuple[Edge, ...], ...]
    bc: BoundaryConfig = field(default_factory=BoundaryConfig)

    @property
    def dof(self) -> int:
        return self.nx * self.ny

    def flat_index(self, i: int, j: int) -> int:
        """ x-fastest flattening of the (i, j) grid position (0-based). """
        return j * self.nx + i

    def grid_indices(self, k: int) -> tuple[int, int]:
        return k % self.nx, k // self.nx

    def is_corner(self, k: int) -> bool:
        return len(self.edges[k]) == 2


@dataclass(frozen=True, eq=False)
class CollocationMatrices:
    d0: sp.csr_matrix
    d1: sp.csr_matrix
    d2: sp.csr_matrix

    @property
    def dof(self) -> int:
        return self.d0.shape[0]


@dataclass(frozen=True)
class NewmarkParams:
    dt: float
    beta: float = 0.25
    gamma: float = 0.5
    c0: float = 1.0
    T: float | None = None
    n_steps: int | None = None

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ParameterError(messages.ZERO_TIME_STEP.format(dt=self.dt))
        if self.beta < 0.0 or self.gamma < 0.0 or self.c0 <= 0.0:
            raise ParameterError(f"beta={self.beta}, gamma={self.gamma} must be >= 0 and c0={self.c0} > 0")
        if self.T is not None and self.n_steps is not None:
            if abs(self.dt * self.n_steps - self.T) > 1e-12 * abs(self.T):
                raise ParameterError(messages.INCONSISTENT_STEPS.format(product=self.dt * self.n_steps, T=self.T))
        if self.gamma != 0.5:
            logger.warning(messages.GAMMA_NOT_SECOND_ORDER.format(gamma=self.gamma))

    @classmethod
    def from_horizon(cls, T: float, n_steps: int, beta: float = 0.25, gamma: float = 0.5,
                     c0: float = 1.0) -> "NewmarkParams":
        return cls(dt=T / n_steps, beta=beta, gamma=gamma, c0=c0, T=T, n_steps=n_steps)

    @property
    def is_explicit(self) -> bool:
        return self.beta == 0.0

    @property
    def history_weights(self) -> tuple[float, float]:
        """ Weights of the t_n and t_{n-1} levels in the Newmark average. """
        return 0.5 - 2.0 * self.beta + self.gamma, 0.5 + self.beta - self.gamma

    @property
    def absorbing_coefficient(self) -> float:
        return self.gamma / (self.dt * np.sqrt(self.c0))


@dataclass(frozen=True)
class WaveData:
    source: Callable = zero_field
    dirichlet: Callable = zero_field
    neumann: Callable = zero_field
    initial_displacement: Callable = zero_field
    initial_velocity: Callable = zero_field


@dataclass(frozen=True, eq=False)
class TimeState:
    step: int
    t: float
    u: np.ndarray
    u_prev: np.ndarray


@dataclass
class SolveStats:
    residuals: list[float] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)
    factorization_reuse: int = 0

    def record(self, residual: float, seconds: float) -> None:
        self.residuals.append(residual)
        self.step_times.append(seconds)
        self.factorization_reuse += 1

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def mean_step_time(self) -> float:
        return float(np.mean(self.step_times)) if self.step_times else 0.0


@dataclass(frozen=True)
class Configuration:
    target: MatrixTarget
    p: int
    k: int
    h_den: int
    bc: BoundaryCondition | None = None
    dt: float | None = None
    beta: float | None = None
    gamma: float = 0.5
    c0: float = 1.0
    selector: str = ""

    def __post_init__(self):
        if self.target is MatrixTarget.stiffness and (self.bc is None or self.dt is None or self.beta is None):
            raise ParameterError(f"Stiffness configuration p={self.p}, k={self.k} needs bc, dt and beta")

    @property
    def h(self) -> float:
        return 1.0 / self.h_den

    @property
    def label(self) -> str:
        if self.target is MatrixTarget.mass:
            return f"mass_p{self.p}_k{self.k}_h{self.h_den}"
        return (f"stiffness_{self.bc.value}_p{self.p}_k{self.k}_h{self.h_den}"
                f"_dt{self.dt:g}_beta{self.beta:g}")


@dataclass(eq=False)
class SpectralReport:
    configuration: Configuration
    dof: int
    nz: int
    cond_est: float = float("nan")
    eigenvalues: np.ndarray | None = None
    max_re: float = float("nan")
    min_re: float = float("nan")
    max_abs_im: float = float("nan")
    row_histogram: dict[int, int] | None = None
    assembly_ms: float = 0.0
    analysis_ms: float = 0.0
    eig_skipped: bool = False

    @property
    def target(self) -> MatrixTarget:
        return self.configuration.target

    @property
    def eig_computed(self) -> bool:
        return self.eigenvalues is not None


@dataclass(frozen=True)
class SparsityStats:
    dof: int
    nz: int
    row_histogram: dict[int, int]


@dataclass(frozen=True)
class BoundCurve:
    estimate: Estimate
    p: int
    h: float
    value: float
    regime: str
    k: int | None = None
    d: int = 2


@dataclass(frozen=True)
class ScalingFit:
    mode: str
    exponent: float
    intercept: float
    n_points: int
    r_squared: float


@dataclass(eq=False)
class SystemMatrix:
    matrix: sp.csr_matrix
    params: NewmarkParams
    interior: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    absorbing: np.ndarray
    absorbing_weight: np.ndarray
    label: str = ""
    _lu: object = field(default=None, repr=False)

    @property
    def nz(self) -> int:
        return int(self.matrix.nnz)

    @property
    def dof(self) -> int:
        return self.matrix.shape[0]

    def factorization(self):
        """ Sparse LU of the matrix, computed on first use and shared afterwards. """
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as err:
                raise ConfigurationError(messages.SINGULAR_SYSTEM.format(label=self.label), self.label) from err
        return self._lu

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factorization().solve(np.asarray(rhs, dtype=float))
