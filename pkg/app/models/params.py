"""
시뮬레이션 파라미터 모델

모든 파라미터 객체는 frozen pydantic 모델이다. 생성 시점(설정 파싱 시점 포함)에
각 타입의 불변조건이 검사되고, 알 수 없는 키는 거부된다.
"""
import math
from typing import Annotated, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator


def _split_csv(value):
    """설정 파일의 "64, 64" 같은 쉼표 목록을 튜플로 변환"""
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


FloatTuple = Annotated[Tuple[float, ...], BeforeValidator(_split_csv)]
IntTuple = Annotated[Tuple[int, ...], BeforeValidator(_split_csv)]


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class Domain(FrozenModel):
    """직육면체 계산 영역과 셀 분할"""
    dim: int
    lengths: FloatTuple
    cells: IntTuple

    @field_validator("dim")
    @classmethod
    def _check_dim(cls, v: int) -> int:
        if v not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        return v

    @model_validator(mode="after")
    def _check_axes(self) -> "Domain":
        if len(self.lengths) != self.dim or len(self.cells) != self.dim:
            raise ValueError(f"lengths and cells must both have {self.dim} entries")
        if any(length <= 0 for length in self.lengths):
            raise ValueError("all lengths must be > 0")
        if any(n < 4 for n in self.cells):
            raise ValueError("all cell counts must be >= 4")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.cells)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.cells))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cells)

    def face_shape(self, axis: int) -> Tuple[int, ...]:
        """axis 방향 법선 면 배열의 shape (해당 축만 N+1)"""
        shape = list(self.cells)
        shape[axis] += 1
        return tuple(shape)

    def interior_face_shape(self, axis: int) -> Tuple[int, ...]:
        shape = list(self.cells)
        shape[axis] -= 1
        return tuple(shape)

    def cell_centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells[axis]) + 0.5) * self.spacing[axis]

    def face_positions(self, axis: int) -> np.ndarray:
        return np.arange(self.cells[axis] + 1) * self.spacing[axis]

    def center_mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.cell_centers(a) for a in range(self.dim)], indexing="ij"))


class PoissonSolverConfig(FrozenModel):
    """Poisson/screened 선형계 해법 설정"""
    rel_tol: float = Field(default=1e-10, gt=0, le=1e-4)
    max_iter: int = Field(default=10000, ge=1)
    method: Literal["cg", "direct"] = "cg"


class ReactionParams(FrozenModel):
    """chi, kappa, mu, eps 와 양수성 허용오차"""
    chi: float = Field(ge=0)
    kappa: float = Field(ge=0)
    mu: float
    eps: float = Field(default=1e-3, gt=0)
    pos_tol: float = Field(default=1e-12, gt=0)

    @field_validator("mu")
    @classmethod
    def _check_mu(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("mu must be > 0 (the logistic source requires the hypothesis μ > 0)")
        return v

    @property
    def equilibrium(self) -> float:
        return self.kappa / self.mu

    @property
    def B0(self) -> float:
        return self.kappa * self.chi ** 2 / (2.0 * self.mu)


class ForcingSpec(FrozenModel):
    """부력 포텐셜 Phi 와 외력 f"""
    phi: Literal["zero", "linear"] = "zero"
    phi_gradient: FloatTuple = ()
    force: Literal["zero", "exponential"] = "zero"
    force_amplitude: float = Field(default=0.0, ge=0)
    force_decay: float = 1.0

    @model_validator(mode="after")
    def _check_profiles(self) -> "ForcingSpec":
        if self.phi == "linear" and not self.phi_gradient:
            raise ValueError("phi = linear requires phi_gradient")
        if self.force == "exponential" and not self.force_decay > 0:
            raise ValueError("force_decay (lambda) must be > 0 for an exponential force")
        return self

    def grad_phi(self, dim: int) -> Tuple[float, ...]:
        if self.phi == "zero":
            return (0.0,) * dim
        return tuple(self.phi_gradient)

    def force_factor(self, t: float) -> float:
        if self.force == "zero" or self.force_amplitude == 0.0:
            return 0.0
        return self.force_amplitude * math.exp(-self.force_decay * t)


class ProfileSpec(FrozenModel):
    """스칼라 초기 프로파일 (constant / bump / random / cosine)"""
    kind: Literal["constant", "bump", "random", "cosine"] = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    width: float = Field(default=0.1, gt=0)
    mode: int = Field(default=1, ge=1)
    seed: Optional[int] = None


class VelocitySpec(FrozenModel):
    """속도 초기 프로파일 (zero / vortex / random)"""
    kind: Literal["zero", "vortex", "random"] = "zero"
    amplitude: float = Field(default=0.0, ge=0)
    seed: Optional[int] = None


class InitialConditions(FrozenModel):
    n: ProfileSpec = ProfileSpec()
    c: ProfileSpec = ProfileSpec()
    u: VelocitySpec = VelocitySpec()


class SimParams(FrozenModel):
    """한 번의 시뮬레이션을 완전히 결정하는 파라미터"""
    domain: Domain
    reaction: ReactionParams
    forcing: ForcingSpec = ForcingSpec()
    initial: InitialConditions = InitialConditions()
    solver: PoissonSolverConfig = PoissonSolverConfig()
    dt_max: float = Field(default=0.05, gt=0)
    cfl_safety: float = Field(default=0.4, gt=0, le=1)
    t_end: float = Field(ge=0)
    sample_every: float = Field(default=0.5, gt=0)
    seed: int = 0
    y_exponent: float = Field(default=2.0, gt=1)
    energy_K: float = Field(default=1.0, gt=0)
    functional_B: Optional[float] = None
    lp_exponents: FloatTuple = (2.0, 6.0)
    implicit_diffusion: bool = False
    buoyancy_demeaned: bool = False
    substep_order: str = "ucn"
    reaction_enabled: bool = True
    burn_in: float = Field(default=1.0, ge=0)
    yz_factor: float = Field(default=1.05, ge=1)
    mass_slack: float = Field(default=0.5, gt=0, le=1)
    mass_cap_margin: float = Field(default=0.1, ge=0)
    track_energy_balance: bool = False

    @field_validator("substep_order")
    @classmethod
    def _check_order(cls, v: str) -> str:
        if sorted(v) != ["c", "n", "u"]:
            raise ValueError("substep_order must be a permutation of 'ucn'")
        return v

    @field_validator("lp_exponents")
    @classmethod
    def _check_lp(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(p < 1 for p in v):
            raise ValueError("lp exponents must be >= 1")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "SimParams":
        if self.forcing.phi == "linear" and len(self.forcing.phi_gradient) != self.domain.dim:
            raise ValueError(f"forcing.phi_gradient must have {self.domain.dim} entries")
        if self.functional_B is not None and not self.functional_B > self.reaction.B0:
            raise ValueError(f"functional_B must exceed B0 = kappa*chi^2/(2 mu) = {self.reaction.B0:g}")
        return self

    @property
    def B(self) -> float:
        """G 범함수 계수 (기본값 2*B0 + 1)"""
        if self.functional_B is not None:
            return self.functional_B
        return 2.0 * self.reaction.B0 + 1.0

    @property
    def forcing_burn_in(self) -> float:
        """F 유계성 검사를 시작하는 시각"""
        if self.forcing.force == "exponential" and self.forcing.force_amplitude > 0:
            return max(self.burn_in, 5.0 / self.forcing.force_decay)
        return self.burn_in


class RunConfig(FrozenModel):
    """SimParams + 출력 디렉터리와 저장 주기"""
    params: SimParams
    scenario: str = "custom"
    # None 이면 run() 은 파일을 쓰지 않는다. CLI 는 CHEMOFLOW_OUTPUT_DIR/<scenario> 로 채운다
    output_dir: Optional[str] = None
    snapshot_every: float = Field(default=10.0, gt=0)
    record_every: float = Field(default=1.0, gt=0)
    checkpoint_every: float = Field(default=10.0, gt=0)


class YParams(FrozenModel):
    """가중 L^p 범함수 y 와 비교해 z 의 상수"""
    p: float
    theta: float
    eta: float
    B: float
    K: float
    k1: float
    kappa: float
    chi: float
    mu: float
    volume: float
