import json
from pathlib import Path
from typing import Any, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.conf import messages
from src.conf.config import config
from src.entity.models import Analysis, BoundaryCondition, MatrixTarget
from src.services.exceptions import ConfigParseError

Selector = Union[int, str]
SELECTOR_NAMES = ("min", "max", "all")


def resolve_selector(selector: Selector, p: int) -> list[int]:
    """
    The resolve_selector function turns a regularity selector into concrete k values.

    >>> resolve_selector("max", 4)
    [3]
    >>> resolve_selector("all", 3)
    [1, 2]

    :param selector: Selector: "min" (k=1), "max" (k=p-1), "all" (1..p-1) or an explicit k
    :param p: int: Degree the selector is resolved against
    :return: List of regularities
    """
    if selector == "min":
        return [1]
    if selector == "max":
        return [p - 1]
    if selector == "all":
        return list(range(1, p))
    return [int(selector)]


class SweepSpec(BaseModel):
    p: list[int] = Field(min_length=1)
    h_den: list[int] = Field(min_length=1)
    k: list[Selector] = Field(default=["min"], min_length=1)
    dt: list[float] = Field(default=[0.1, 0.01], min_length=1)
    beta: list[float] = Field(default=[0.0, 0.5], min_length=1)
    gamma: float = Field(default=config.DEFAULT_GAMMA, ge=0.0)
    c0: float = Field(default=config.DEFAULT_C0, gt=0.0)
    bc: list[BoundaryCondition] = Field(default=[BoundaryCondition.dirichlet], min_length=1)
    target: list[MatrixTarget] = Field(default=[MatrixTarget.stiffness], min_length=1)
    analyses: list[Analysis] = Field(default=[Analysis.cond], min_length=1)
    out_dir: str = config.OUTPUT_DIR

    @field_validator("p", "h_den", "k", "dt", "beta", "bc", "target", "analyses", mode="before")
    @classmethod
    def wrap_scalar(cls, v: Any):
        if isinstance(v, (list, tuple)):
            return list(v)
        return [v]

    @field_validator("p")
    @classmethod
    def validate_degrees(cls, v: list[int]):
        if any(not 1 <= p <= 20 for p in v):
            raise ValueError(messages.DEGREE_OUT_OF_RANGE.format(p=v))
        return v

    @field_validator("h_den")
    @classmethod
    def validate_elements(cls, v: list[int]):
        if any(n < 1 for n in v):
            raise ValueError(messages.NO_ELEMENTS.format(n=min(v)))
        return v

    @field_validator("dt")
    @classmethod
    def validate_steps(cls, v: list[float]):
        if any(dt <= 0.0 for dt in v):
            raise ValueError(messages.ZERO_TIME_STEP.format(dt=min(v)))
        return v

    @field_validator("k")
    @classmethod
    def validate_selectors(cls, v: list[Selector]):
        for selector in v:
            if isinstance(selector, str) and selector not in SELECTOR_NAMES:
                raise ValueError(f"Unknown regularity selector {selector!r}")
        return v

    @model_validator(mode="after")
    def validate_pairs(self):
        offenders = [(p, k) for p in self.p for selector in self.k for k in resolve_selector(selector, p)
                     if not 0 <= k <= p - 1]
        if offenders:
            raise ValueError(messages.INVALID_REGULARITY_PAIRS.format(pairs=offenders))
        return self

    def regularities(self, p: int) -> list[tuple[str, int]]:
        """ (selector name, k) pairs for degree p, in selector order. """
        return [(str(selector), k) for selector in self.k for k in resolve_selector(selector, p)]

    def resolved_k(self) -> list[int]:
        return [k for p in self.p for _, k in self.regularities(p)]


def parse_config(path: str | Path) -> SweepSpec:
    """
    The parse_config function reads a JSON sweep file into a validated SweepSpec.

    :param path: str | Path: JSON file with the SweepSpec fields as keys
    :return: The validated SweepSpec
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigParseError(messages.MALFORMED_CONFIG.format(path=path, msg=err.msg, line=err.lineno,
                                                                column=err.colno)) from err
    if not isinstance(raw, dict):
        raise ConfigParseError(messages.MALFORMED_CONFIG.format(path=path, msg="expected a JSON object",
                                                                line=1, column=1))
    try:
        return SweepSpec.model_validate(raw)
    except ValidationError as err:
        raise ConfigParseError(f"Invalid sweep file {path}: {err}") from err
