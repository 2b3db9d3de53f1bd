"""
HTTP 요청/응답 모델
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.models.records import RunStatus, Violation


class OracleRequest(BaseModel):
    n0: float = Field(default=1.0, gt=0)
    c0: float = Field(default=1.0, gt=0)
    eps: float = Field(default=1e-3, gt=0)
    t: float = Field(ge=0)
    kappa: float = Field(ge=0)
    mu: float = Field(gt=0)


class OracleResponse(BaseModel):
    n: float
    c: float


class YParamsRequest(BaseModel):
    p: float = Field(default=2.0, gt=1)
    chi: float = Field(ge=0)
    kappa: float = Field(ge=0)
    mu: float = Field(gt=0)
    volume: float = Field(default=1.0, gt=0)
    K: float = Field(default=1.0, gt=0)
    B: Optional[float] = None


class RunRequest(BaseModel):
    """설정 파일 텍스트 (key = value)"""
    config: str = Field(min_length=1)


class RunResponse(BaseModel):
    status: RunStatus
    t: float
    wall_time: float
    records: List[Dict[str, Any]]
    violations: List[Violation]
    error: Optional[str] = None


class CheckRequest(BaseModel):
    records_csv: str = Field(min_length=1)
    config: Optional[str] = None


class CheckResponse(BaseModel):
    n_records: int
    violations: List[Violation]
