from typing import List

from fastapi import APIRouter, HTTPException, Query, status

from src.entity.models import Estimate
from src.schemas.spectra import BoundCurveResponse
from src.services import spectra as spectra_service
from src.services.exceptions import ParameterError

router = APIRouter(prefix="/bounds", tags=["bounds"])


@router.get("/", response_model=BoundCurveResponse)
async def get_bound(estimate: Estimate,
                    p: int = Query(ge=1, le=20),
                    h_den: int = Query(ge=1),
                    k: int | None = Query(default=None, ge=0)):
    """
    The get_bound function evaluates one Galerkin condition number bound.

    :param estimate: Estimate: Bound identifier (M-k0, M-kmax, K-k0, K-kmax, M-16p, K-16p)
    :param p: int: Degree
    :param h_den: int: Number of elements, h = 1/h_den
    :param k: int: Regularity recorded on the result
    :return: The bound value and its regime
    """
    try:
        return spectra_service.galerkin_bound(estimate, p, 1.0 / h_den, k=k)
    except ParameterError as err:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(err))


@router.get("/table", response_model=List[BoundCurveResponse])
async def get_bound_table(estimate: Estimate,
                          p: List[int] = Query(),
                          h_den: List[int] = Query()):
    """
    The get_bound_table function evaluates a bound over every (p, h) pair, p-major.

    :param estimate: Estimate: Bound identifier
    :param p: List[int]: Degrees
    :param h_den: List[int]: Element counts
    :return: One bound per pair
    """
    if any(not 1 <= v <= 20 for v in p) or any(n < 1 for n in h_den):
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
                            detail="p must lie in 1..20 and h_den must be positive")
    return spectra_service.bound_series(estimate, p, [1.0 / n for n in h_den])
