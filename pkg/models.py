import sys
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

import store

CheckName = Literal["superminimal", "lagrangian", "minimal-L", "converse", "lie"]
ModelName = Literal["FlatR4", "RoundS4", "FubiniStudyCP2"]
Classification = Literal["superminimal", "minimal-not-superminimal", "non-minimal"]
Status = Literal["pass", "fail", "error"]

MIN_GRID = 4


def _check_grid(grid: Optional[Tuple[int, int]]) -> Optional[Tuple[int, int]]:
    if grid is not None and min(grid) < MIN_GRID:
        raise ValueError(f"grid must be at least {MIN_GRID}x{MIN_GRID}, got {grid[0]}x{grid[1]}")
    return grid


# ---------------------------------------------------------------------------
# Scenario input
# ---------------------------------------------------------------------------

class SurfaceSpec(BaseModel):
    """A surface given by four coordinate formulas in u and v"""
    formulas: List[str] = Field(min_length=4, max_length=4)
    domain: Tuple[float, float, float, float]
    grid: Tuple[int, int] = (8, 8)
    name: str = "custom"

    @field_validator("domain")
    @classmethod
    def domain_not_empty(cls, v):
        u0, u1, v0, v1 = v
        if not (u1 > u0 and v1 > v0):
            raise ValueError(f"domain [{u0},{u1}]x[{v0},{v1}] is empty")
        return v

    @field_validator("grid")
    @classmethod
    def grid_large_enough(cls, v):
        return _check_grid(v)


class ScenarioConfig(BaseModel):
    model: Optional[ModelName] = None
    surface: Union[str, SurfaceSpec]
    lambdas: List[float] = Field(default_factory=lambda: list(store.DEFAULT_LAMBDAS), min_length=1)
    signs: List[Literal["+", "-"]] = Field(default_factory=lambda: list(store.DEFAULT_SIGNS), min_length=1)
    n_theta: int = Field(default=store.DEFAULT_N_THETA, ge=4)
    grid: Optional[Tuple[int, int]] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    checks: List[CheckName] = Field(default_factory=lambda: list(store.DEFAULT_CHECKS), min_length=1)

    @field_validator("lambdas")
    @classmethod
    def lambdas_positive(cls, v):
        for lam in v:
            if not lam > 0:
                raise ValueError(f"lambda values must be positive, got {lam}")
        return v

    @field_validator("grid")
    @classmethod
    def grid_large_enough(cls, v):
        return _check_grid(v)

    @field_validator("tolerances")
    @classmethod
    def tolerances_known(cls, v):
        for key, value in v.items():
            if key not in store.DEFAULT_TOLERANCES:
                raise ValueError(f"unknown tolerance key '{key}'")
            if value < sys.float_info.epsilon:
                raise ValueError(f"tolerance '{key}'={value} is below machine epsilon")
        return v

    @field_validator("checks")
    @classmethod
    def checks_unique(cls, v):
        return list(dict.fromkeys(v))

    @model_validator(mode="after")
    def custom_surface_needs_model(self):
        if isinstance(self.surface, SurfaceSpec) and self.model is None:
            raise ValueError("a formula surface needs 'model'")
        return self

    @property
    def ordered_checks(self) -> List[str]:
        return [name for name in store.CHECK_ORDER if name in self.checks]

    @property
    def merged_tolerances(self) -> Dict[str, float]:
        return store.merged_tolerances(self.tolerances)


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

class DefectValue(BaseModel):
    name: str
    value: float
    tolerance: float
    argmax: Optional[List[Any]] = None

    @property
    def passed(self) -> bool:
        return self.value < self.tolerance


class CheckResult(BaseModel):
    name: CheckName
    status: Status
    defects: List[DefectValue] = Field(default_factory=list)
    detail: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None
    elapsed_seconds: float = 0.0


class Report(BaseModel):
    schema_: str = Field(default=store.REPORT_SCHEMA, alias="schema")
    tool: str = store.TOOL_NAME
    version: str = store.VERSION
    status: Status
    config: Dict[str, Any]
    checks: List[CheckResult]
    elapsed_seconds: float = 0.0

    model_config = {"populate_by_name": True}

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "pass" else 1


class CorpusEntry(BaseModel):
    name: str
    model: ModelName
    formulas: List[str]
    domain: Tuple[float, float, float, float]
    grid: Tuple[int, int] = (8, 8)
    expected: Classification
    provenance: str
