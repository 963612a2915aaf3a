import tempfile

from fastapi import APIRouter, HTTPException, status

from src.conf.config import config
from src.entity.models import Analysis, Configuration, MatrixTarget
from src.schemas.spectra import FitSchema, ScalingFitResponse, SingleRunResponse, SingleRunSchema
from src.schemas.sweep import resolve_selector
from src.services import spectra as spectra_service
from src.services.exceptions import FitError
from src.services.harness import run_configuration
from src.repository.reports import sort_eigenvalues

router = APIRouter(prefix="/spectra", tags=["spectra"])


@router.post("/single", response_model=SingleRunResponse)
def run_single(body: SingleRunSchema):
    """
    The run_single function assembles and analyzes one configuration.

    Spy dumps are not produced over HTTP; eigenvalues are returned inline,
    sorted by descending modulus.

    :param body: SingleRunSchema: Configuration and requested analyses
    :return: The report row, eigenvalues and row histogram
    """
    k = resolve_selector(body.k, body.p)[0]
    if not 0 <= k <= body.p - 1:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
                            detail=f"Regularity k={k} out of range for degree p={body.p}")
    stiffness = body.target is MatrixTarget.stiffness
    configuration = Configuration(target=body.target, p=body.p, k=k, h_den=body.h_den,
                                  bc=body.bc if stiffness else None, dt=body.dt if stiffness else None,
                                  beta=body.beta if stiffness else None, gamma=body.gamma, c0=body.c0,
                                  selector=str(body.k))
    analyses = [a for a in body.analyses if a is not Analysis.spy]
    with tempfile.TemporaryDirectory() as out_dir:
        entry, report = run_configuration(configuration, analyses, out_dir, config.EIG_MAX_DOF)
    if report is None:
        raise HTTPException(status_code=status.HTTP_409_CONFLICT, detail=entry.error)
    eigenvalues = None
    if report.eigenvalues is not None:
        eigenvalues = [(float(v.real), float(v.imag)) for v in sort_eigenvalues(report.eigenvalues)]
    return SingleRunResponse(status=entry.status, row=entry.row, eigenvalues=eigenvalues,
                             row_histogram=report.row_histogram or {})


@router.post("/fit", response_model=ScalingFitResponse)
async def fit(body: FitSchema):
    """
    The fit function fits a growth exponent to (x, cond) points.

    :param body: FitSchema: Mode ("h" or "p") and points
    :return: The fitted exponent, intercept and R^2
    """
    try:
        return spectra_service.fit_scaling(body.points, body.mode)
    except FitError as err:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(err))
