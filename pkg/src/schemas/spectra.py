import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.conf.config import config
from src.entity.models import Analysis, BoundaryCondition, Estimate, MatrixTarget, SpectralReport

Status = Literal["ok", "skipped-too-large", "failed"]


class ReportRow(BaseModel):
    bc: Optional[str] = None
    p: int
    k: int
    h_den: int
    dt: Optional[float] = None
    beta: Optional[float] = None
    gamma: float
    c0: float
    target: str
    dof: int
    nz: int
    cond_est: Optional[float] = None
    max_re: Optional[float] = None
    min_re: Optional[float] = None
    max_abs_im: Optional[float] = None
    eig_computed: bool = False
    assembly_ms: float = 0.0
    analysis_ms: float = 0.0

    @classmethod
    def from_report(cls, report: SpectralReport) -> "ReportRow":
        def finite(value: float) -> float | None:
            return None if value is None or math.isnan(value) else value

        c = report.configuration
        return cls(bc=c.bc.value if c.bc else None, p=c.p, k=c.k, h_den=c.h_den, dt=c.dt, beta=c.beta,
                   gamma=c.gamma, c0=c.c0, target=c.target.value, dof=report.dof, nz=report.nz,
                   cond_est=finite(report.cond_est), max_re=finite(report.max_re),
                   min_re=finite(report.min_re), max_abs_im=finite(report.max_abs_im),
                   eig_computed=report.eig_computed, assembly_ms=report.assembly_ms,
                   analysis_ms=report.analysis_ms)


class LedgerEntry(BaseModel):
    label: str
    selector: str = ""
    status: Status
    assembly_ms: float = 0.0
    analysis_ms: float = 0.0
    outputs: list[str] = []
    error: Optional[str] = None
    row: Optional[ReportRow] = None


class RunLedger(BaseModel):
    entries: list[LedgerEntry] = []
    csv_path: Optional[str] = None

    @property
    def failed(self) -> list[LedgerEntry]:
        return [e for e in self.entries if e.status == "failed"]

    def rows(self) -> list[ReportRow]:
        return [e.row for e in self.entries if e.row is not None]


class SingleRunSchema(BaseModel):
    target: MatrixTarget = MatrixTarget.stiffness
    bc: BoundaryCondition = BoundaryCondition.dirichlet
    p: int = Field(ge=1, le=20)
    h_den: int = Field(ge=1, le=200)
    k: int | str = "min"
    dt: float = Field(default=0.1, gt=0.0)
    beta: float = Field(default=0.0, ge=0.0)
    gamma: float = Field(default=config.DEFAULT_GAMMA, ge=0.0)
    c0: float = Field(default=config.DEFAULT_C0, gt=0.0)
    analyses: list[Analysis] = [Analysis.cond]

    @field_validator("k")
    @classmethod
    def validate_selector(cls, v):
        if isinstance(v, str) and v not in ("min", "max"):
            raise ValueError(f"Regularity must be 'min', 'max' or an integer, got {v!r}")
        return v


class SingleRunResponse(BaseModel):
    status: Status
    row: Optional[ReportRow] = None
    eigenvalues: Optional[list[tuple[float, float]]] = None
    row_histogram: dict[int, int] = {}
    error: Optional[str] = None


class BoundCurveResponse(BaseModel):
    estimate: Estimate
    p: int
    h: float
    value: float
    regime: str
    k: Optional[int] = None
    d: int = 2

    model_config = ConfigDict(from_attributes=True)


class FitSchema(BaseModel):
    mode: Literal["h", "p"]
    points: list[tuple[float, float]] = Field(min_length=1)


class ScalingFitResponse(BaseModel):
    mode: str
    exponent: float
    intercept: float
    n_points: int
    r_squared: float

    model_config = ConfigDict(from_attributes=True)
