import logging
import math
import time
from collections import Counter

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.conf import messages
from src.conf.config import config
from src.entity.models import (Analysis, BoundCurve, Configuration, Estimate, ScalingFit, SparsityStats,
                               SpectralReport)
from src.services.exceptions import EigenCapExceeded, EigenConvergenceError, FitError, ParameterError

logger = logging.getLogger(__name__)


def eigenvalues_dense(matrix, max_dof: int | None = None) -> np.ndarray:
    """
    The eigenvalues_dense function computes the full spectrum of a (sparse or dense)
    real square matrix with the LAPACK nonsymmetric driver: balancing, Hessenberg
    reduction and shifted QR.

    >>> np.sort(eigenvalues_dense(np.diag([3.0, -1.0])).real).tolist()
    [-1.0, 3.0]

    :param matrix: Square real matrix
    :param max_dof: int: Largest size densified, EIG_MAX_DOF by default
    :return: Complex array of dof eigenvalues, conjugate pairs bitwise conjugate
    """
    cap = config.EIG_MAX_DOF if max_dof is None else max_dof
    dof = matrix.shape[0]
    if dof > cap:
        raise EigenCapExceeded(messages.EIG_CAP_EXCEEDED.format(dof=dof, cap=cap))
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    try:
        values = scipy.linalg.eigvals(dense, overwrite_a=True)
    except scipy.linalg.LinAlgError as err:
        raise EigenConvergenceError(messages.EIG_NOT_CONVERGED.format(dof=dof)) from err
    return np.asarray(values, dtype=complex)


def cond_estimate_1norm(matrix) -> float:
    """
    The cond_estimate_1norm function estimates kappa_1(A) = ||A||_1 ||A^-1||_1.

    ||A^-1||_1 comes from the block 1-norm power iteration (two columns, at most
    five iterations) applied to solves with a sparse LU. The estimate never
    exceeds the exact value. A singular matrix gives inf.

    >>> cond_estimate_1norm(np.diag([1.0, 10.0]))
    10.0

    :param matrix: Square real matrix
    :return: The condition number estimate
    """
    matrix = sp.csc_matrix(matrix, dtype=float)
    try:
        lu = spla.splu(matrix)
    except RuntimeError:
        logger.warning("Singular matrix of size %d, condition number set to inf", matrix.shape[0])
        return math.inf
    inverse = spla.LinearOperator(matrix.shape, dtype=float,
                                  matvec=lu.solve,
                                  rmatvec=lambda x: lu.solve(x, trans="T"))
    inverse_norm = spla.onenormest(inverse, t=2, itmax=5)
    estimate = float(spla.norm(matrix, 1) * inverse_norm)
    return estimate if np.isfinite(estimate) else math.inf


def sparsity_stats(matrix) -> SparsityStats:
    """ Stored entries and the histogram of entries per row. """
    matrix = sp.csr_matrix(matrix)
    per_row = np.diff(matrix.indptr)
    histogram = dict(sorted(Counter(per_row.tolist()).items()))
    return SparsityStats(dof=matrix.shape[0], nz=int(matrix.nnz), row_histogram=histogram)


def _mass_k0(p, h, d):
    return p ** (-d / 2) * 4.0 ** (p * d), "k0"


def _mass_kmax(p, h, d):
    if h <= 1.0 / p:
        return math.exp(p * d), "h<=1/p"
    return (math.e / 4.0) ** (d / h) * (h * p) ** (-d / 2) * 4.0 ** (p * d), "h>1/p"


def _stiffness_k0(p, h, d):
    threshold = math.sqrt(p ** (2 + d / 2) * d ** (-d * p))
    if h <= threshold:
        return h ** -2 * p ** 2, "small-h"
    return p ** (-d / 2) * 4.0 ** (p * d), "large-h"


def _stiffness_kmax(p, h, d):
    if h <= math.exp(-d * p / 2):
        return h ** -2 * p, "small-h"
    if h <= 1.0 / p:
        return p * math.exp(p * d), "h<=1/p"
    return (math.e / 4.0) ** (d / h) * p ** (-d / 2) * h ** (-d / 2 - 1) * 4.0 ** (p * d), "h>1/p"


_BOUNDS = {
    Estimate.mass_k0: _mass_k0,
    Estimate.mass_kmax: _mass_kmax,
    Estimate.stiffness_k0: _stiffness_k0,
    Estimate.stiffness_kmax: _stiffness_kmax,
}


def galerkin_bound(estimate: Estimate | str, p: int, h: float, k: int | None = None, d: int = 2,
                   constant: float = 1.0) -> BoundCurve:
    """
    The galerkin_bound function evaluates the theoretical Galerkin condition number
    bounds, up to their unknown constants.

    >>> galerkin_bound("M-k0", 2, 0.5).value
    128.0

    :param estimate: Estimate: Which bound to evaluate
    :param p: int: Degree
    :param h: float: Mesh size in (0, 1]
    :param k: int: Regularity, only recorded on the curve
    :param d: int: Spatial dimension
    :param constant: float: Multiplicative constant of the 16^p bounds
    :return: A BoundCurve with the value and the regime that produced it
    """
    try:
        estimate = Estimate(estimate)
    except ValueError as err:
        raise ParameterError(messages.UNKNOWN_ESTIMATE.format(estimate=estimate)) from err
    if p < 1 or not 0.0 < h <= 1.0:
        raise ParameterError(f"Bounds need p >= 1 and 0 < h <= 1, got p={p}, h={h}")
    if estimate is Estimate.mass_16p:
        value, regime = constant * p ** 2 * 16.0 ** p, "16p"
    elif estimate is Estimate.stiffness_16p:
        value, regime = constant * p ** 8 * 16.0 ** p, "16p"
    else:
        value, regime = _BOUNDS[estimate](p, h, d)
    return BoundCurve(estimate=estimate, p=p, h=h, value=float(value), regime=regime, k=k, d=d)


def bound_series(estimate: Estimate | str, ps: list[int], hs: list[float], d: int = 2) -> list[BoundCurve]:
    """ Bound values over the product ps x hs, p-major. """
    return [galerkin_bound(estimate, p, h, d=d) for p in ps for h in hs]


def fit_scaling(series: list[tuple[float, float]], mode: str) -> ScalingFit:
    """
    The fit_scaling function fits the growth exponent of a condition number series
    by least squares.

    In "h" mode the points are (h, cond) and the fit is cond ~ h^-alpha. In "p"
    mode the points are (p, cond) and the fit is log2(cond*p)/2 ~ alpha*p + c,
    i.e. cond ~ 4^(alpha p)/p.

    >>> round(fit_scaling([(0.5, 4.0), (0.25, 16.0), (0.125, 64.0)], "h").exponent, 12)
    2.0

    :param series: list[tuple[float, float]]: At least three (x, cond) pairs
    :param mode: str: "h" or "p"
    :return: A ScalingFit with the exponent, intercept and R^2
    """
    if mode not in ("h", "p"):
        raise FitError(f"Unknown fit mode {mode!r}, expected 'h' or 'p'")
    if len(series) < 3:
        raise FitError(messages.TOO_FEW_POINTS.format(count=len(series)))
    x, cond = np.asarray(series, dtype=float).T
    if np.any(x <= 0.0) or np.any(cond <= 0.0) or not np.all(np.isfinite(cond)):
        raise FitError(messages.NON_POSITIVE_DATA)
    if mode == "h":
        abscissa, ordinate = np.log(1.0 / x), np.log(cond)
    else:
        abscissa, ordinate = x, np.log2(cond * x) / 2.0
    slope, intercept = np.polyfit(abscissa, ordinate, 1)
    predicted = slope * abscissa + intercept
    total = float(np.sum((ordinate - ordinate.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((ordinate - predicted) ** 2)) / total if total > 0.0 else 1.0
    return ScalingFit(mode=mode, exponent=float(slope), intercept=float(intercept),
                      n_points=len(series), r_squared=r_squared)


def spectral_ratio_real(eigenvalues: np.ndarray) -> float:
    """ max|Im| / max|Re|; 0 means a real spectrum. """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    largest_real = float(np.max(np.abs(eigenvalues.real))) if eigenvalues.size else 0.0
    if largest_real == 0.0:
        return 0.0 if not eigenvalues.size or not np.any(eigenvalues.imag) else math.inf
    return float(np.max(np.abs(eigenvalues.imag))) / largest_real


def analyze(matrix, configuration: Configuration, analyses, assembly_ms: float = 0.0,
            max_dof: int | None = None) -> SpectralReport:
    """
    The analyze function runs the requested analyses on one assembled matrix.

    An eigensolve above the d.o.f. cap is skipped with a warning and flagged
    on the report; the run is downgraded to cond+spy, so the condition
    estimate is computed even when it was not requested.

    :param matrix: Sparse square matrix
    :param configuration: Configuration: Parameters the matrix was built from
    :param analyses: Iterable of Analysis values
    :param assembly_ms: float: Assembly time to carry into the report
    :param max_dof: int: Eigensolve cap override
    :return: A SpectralReport
    """
    analyses = {Analysis(a) for a in analyses}
    started = time.perf_counter()
    stats = sparsity_stats(matrix)
    report = SpectralReport(configuration=configuration, dof=stats.dof, nz=stats.nz,
                            row_histogram=stats.row_histogram, assembly_ms=assembly_ms)
    if Analysis.cond in analyses:
        report.cond_est = cond_estimate_1norm(matrix)
    if Analysis.eig in analyses:
        try:
            eigenvalues = eigenvalues_dense(matrix, max_dof)
        except EigenCapExceeded as err:
            logger.warning("%s: %s", configuration.label, err)
            report.eig_skipped = True
            if Analysis.cond not in analyses:
                report.cond_est = cond_estimate_1norm(matrix)
        else:
            report.eigenvalues = eigenvalues
            report.max_re = float(eigenvalues.real.max())
            report.min_re = float(eigenvalues.real.min())
            report.max_abs_im = float(np.abs(eigenvalues.imag).max())
    report.analysis_ms = (time.perf_counter() - started) * 1000.0
    return report

