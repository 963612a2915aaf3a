import numpy as np
import scipy.sparse as sp

from src.conf import messages
from src.entity.models import BasisEval, KnotVector, SplineBasis1D
from src.services.exceptions import RegularityError, SplineDomainError

MAX_DEGREE = 20


def make_knot_vector(p: int, n_elements: int, k: int) -> KnotVector:
    """
    The make_knot_vector function builds an open uniform knot vector on [0, 1].

    Interior breakpoints j/n are repeated p-k times, so the spline space is
    C^k across every element boundary.

    :param p: int: Polynomial degree, 1 <= p <= 20
    :param n_elements: int: Number of uniform elements, h = 1/n_elements
    :param k: int: Global regularity, 0 <= k <= p-1
    :return: A KnotVector with (n_elements-1)(p-k) + p + 1 basis functions
    """
    if not 1 <= p <= MAX_DEGREE:
        raise SplineDomainError(messages.DEGREE_OUT_OF_RANGE.format(p=p))
    if n_elements < 1:
        raise SplineDomainError(messages.NO_ELEMENTS.format(n=n_elements))
    if not 0 <= k <= p - 1:
        raise RegularityError(messages.REGULARITY_OUT_OF_RANGE.format(p=p, k=k))
    breaks = np.arange(n_elements + 1) / n_elements
    interior = np.repeat(breaks[1:-1], p - k)
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(degree=p, regularity=k, n_elements=n_elements, knots=knots)


def find_span(knots: np.ndarray, p: int, x: float) -> int:
    """
    The find_span function returns the index i with knots[i] <= x < knots[i+1].

    Knots are right-continuous except at x = 1, where the last non-empty span
    is used so that the last basis function evaluates to 1.

    :param knots: np.ndarray: Open knot vector
    :param p: int: Degree
    :param x: float: Location in [0, 1]
    :return: Span index, p <= span <= nu-1
    """
    nu = len(knots) - p - 1
    if x >= knots[nu]:
        return nu - 1
    span = int(np.searchsorted(knots, x, side="right")) - 1
    return max(p, min(span, nu - 1))


def _bspline_derivatives(knots: np.ndarray, p: int, x: float, span: int, n: int) -> np.ndarray:
    # Cox-de Boor triangle with stored knot differences, derivatives by the
    # divided-difference recurrence on the lower-degree values.
    ne = min(n, p)
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu = np.empty((p + 1, p + 1))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for order in range(1, ne + 1):
            d = 0.0
            rk = r - order
            pk = p - order
            if r >= order:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = order - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, order] = -a[s1, order - 1] / ndu[pk + 1, r]
                d += a[s2, order] * ndu[r, pk]
            ders[order, r] = d
            s1, s2 = s2, s1

    factor = p
    for order in range(1, ne + 1):
        ders[order] *= factor
        factor *= p - order
    return ders


def _rationalize(ders: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # Quotient rule for R_i = N_i w_i / W up to second order.
    weighted = ders * weights
    w = weighted.sum(axis=1)
    out = np.empty_like(ders)
    out[0] = weighted[0] / w[0]
    if len(ders) > 1:
        out[1] = (weighted[1] - out[0] * w[1]) / w[0]
    if len(ders) > 2:
        out[2] = (weighted[2] - 2.0 * out[1] * w[1] - out[0] * w[2]) / w[0]
    return out


def eval_basis(basis: SplineBasis1D, xi: float, max_deriv: int = 2) -> BasisEval:
    """
    The eval_basis function evaluates the p+1 possibly nonzero NURBS basis
    functions at xi together with their first and second derivatives.

    :param basis: SplineBasis1D: Basis to evaluate
    :param xi: float: Parametric location in [0, 1]
    :param max_deriv: int: Highest derivative order requested (0, 1 or 2)
    :return: A BasisEval holding the span and the derivative rows
    """
    xi = float(xi)
    if not 0.0 <= xi <= 1.0:
        raise SplineDomainError(messages.POINT_OUTSIDE_DOMAIN.format(x=xi))
    if max_deriv not in (0, 1, 2):
        raise SplineDomainError(f"max_deriv must be 0, 1 or 2, got {max_deriv}")
    p = basis.degree
    span = find_span(basis.knots, p, xi)
    ders = _bspline_derivatives(basis.knots, p, xi, span, max_deriv)
    if basis.is_rational:
        ders = _rationalize(ders, basis.weights[span - p:span + 1])
    return BasisEval(span=span,
                     values=ders[0],
                     first=ders[1] if max_deriv >= 1 else None,
                     second=ders[2] if max_deriv >= 2 else None)


def greville_points(knot_vector: KnotVector) -> np.ndarray:
    """
    The greville_points function returns the Greville abscissae, the averages
    of p consecutive interior knots.

    :param knot_vector: KnotVector: Open knot vector
    :return: Strictly increasing array of nu points, first 0 and last 1
    """
    p = knot_vector.degree
    nu = knot_vector.n_basis
    windows = np.lib.stride_tricks.sliding_window_view(knot_vector.knots[1:nu + p], p)
    return windows.mean(axis=1)


def support_contains(knot_vector: KnotVector, i: int, x: float) -> bool:
    """ Structural support test: basis function i (0-based) is nonzero at x. """
    t = knot_vector.knots
    p = knot_vector.degree
    if x == 0.0:
        return i == 0
    if x == 1.0:
        return i == knot_vector.n_basis - 1
    return bool(t[i] < x < t[i + p + 1])


def collocation_factors(basis: SplineBasis1D, points: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """
    The collocation_factors function builds the univariate collocation matrices
    B0[a, i] = R_i(x_a), B1[a, i] = R_i'(x_a), B2[a, i] = R_i''(x_a).

    Values follow the structural support pattern; derivative matrices keep every
    entry of the span that is not exactly zero.

    :param basis: SplineBasis1D: Univariate basis
    :param points: np.ndarray: Collocation points in [0, 1]
    :return: Three CSR matrices of shape (len(points), nu)
    """
    rows = [[], [], []]
    cols = [[], [], []]
    vals = [[], [], []]
    for a, x in enumerate(np.asarray(points, dtype=float)):
        ev = eval_basis(basis, x, 2)
        for i, v0, v1, v2 in zip(ev.indices, ev.values, ev.first, ev.second):
            if support_contains(basis.knot_vector, int(i), x):
                rows[0].append(a)
                cols[0].append(i)
                vals[0].append(v0)
            for order, v in ((1, v1), (2, v2)):
                if v != 0.0:
                    rows[order].append(a)
                    cols[order].append(i)
                    vals[order].append(v)
    shape = (len(points), basis.n_basis)
    return tuple(sp.csr_matrix((vals[r], (rows[r], cols[r])), shape=shape) for r in range(3))


def spline_values(basis: SplineBasis1D, coefficients: np.ndarray, points: np.ndarray, deriv: int = 0) -> np.ndarray:
    """ Evaluate sum_i c_i R_i^(deriv)(x) at every point. """
    return collocation_factors(basis, points)[deriv] @ np.asarray(coefficients, dtype=float)
