"""
진단 기록/위반/실행 결과 모델
"""
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from app.models.fields import SimState

RunStatus = Literal["clean", "invariant_violation", "solver_failure"]

# clamp_flags 비트마스크
CLAMP_N = 1
CLAMP_C = 2


class DiagnosticsRecord(BaseModel):
    """한 샘플 시각의 모든 감시량"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    t: float
    mass_n: float
    min_n: float
    max_n: float
    sup_c: float
    int_c: float
    grad_c_sq: float
    kinetic: float
    enstrophy_like: float
    F: float
    G: Optional[float] = None
    y_p: Optional[float] = None
    z_p: Optional[float] = None
    clamp_n: bool = False
    clamp_c: bool = False
    lp_exponents: Tuple[float, ...] = ()
    lp_norms_n: Tuple[float, ...] = ()
    lp_norms_u: Tuple[float, ...] = ()

    @property
    def clamp_flags(self) -> int:
        return (CLAMP_N if self.clamp_n else 0) | (CLAMP_C if self.clamp_c else 0)

    def numeric_items(self) -> Dict[str, Optional[float]]:
        items: Dict[str, Optional[float]] = {
            name: getattr(self, name)
            for name in ("t", "mass_n", "min_n", "max_n", "sup_c", "int_c", "grad_c_sq",
                         "kinetic", "enstrophy_like", "F", "G", "y_p", "z_p")
        }
        for p, value in zip(self.lp_exponents, self.lp_norms_n):
            items[f"n_L{p:g}"] = value
        for p, value in zip(self.lp_exponents, self.lp_norms_u):
            items[f"u_L{p:g}"] = value
        return items


class Violation(BaseModel):
    """불변조건 위반 한 건"""
    model_config = ConfigDict(frozen=True)

    t: float
    invariant: str
    detail: str


@dataclass
class RunResult:
    final_state: SimState
    records: List[DiagnosticsRecord]
    violations: List[Violation] = field(default_factory=list)
    wall_time: float = 0.0
    status: RunStatus = "clean"
    error: Optional[str] = None


@dataclass
class EpsilonStudyResult:
    eps_list: List[float]
    final_states: List[SimState]
    distances: Dict[str, List[float]]
    decreasing: Dict[str, bool]
    floors: Dict[str, float] = field(default_factory=dict)
    violations: List[Violation] = field(default_factory=list)
    results: List[RunResult] = field(default_factory=list)
