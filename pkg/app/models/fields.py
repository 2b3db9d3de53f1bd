"""
격자 필드 컨테이너

ScalarField 는 셀 중심 값(Neumann), VectorField 는 MAC 면 값(no-slip)을 담는다.
생성 시 float64 읽기 전용 사본을 만들고 유한성/경계 조건을 검사한다.
"""
from dataclasses import dataclass, field
from typing import Iterable, Tuple

import numpy as np

from app.exceptions import NonFiniteFieldError
from app.models.params import Domain


def _frozen_copy(values, shape: Tuple[int, ...], what: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.shape != tuple(shape):
        raise ValueError(f"{what}: expected shape {tuple(shape)}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteFieldError(f"{what}: non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ScalarField:
    """셀 중심 스칼라 (n, c, P)"""
    domain: Domain
    values: np.ndarray
    bc: str = "neumann"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_copy(self.values, self.domain.shape, "ScalarField"))

    @classmethod
    def constant(cls, domain: Domain, value: float) -> "ScalarField":
        return cls(domain, np.full(domain.shape, float(value)))

    @classmethod
    def zeros(cls, domain: Domain) -> "ScalarField":
        return cls(domain, np.zeros(domain.shape))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.domain, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.domain, self.values - other.values)

    def __mul__(self, factor: float) -> "ScalarField":
        return ScalarField(self.domain, self.values * float(factor))

    __rmul__ = __mul__

    def integral(self) -> float:
        return float(self.values.sum() * self.domain.cell_volume)

    def mean(self) -> float:
        return float(self.values.mean())

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2) * self.domain.cell_volume))

    def equals(self, other: "ScalarField") -> bool:
        """비트 단위 비교"""
        return self.domain == other.domain and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """MAC 면 속도. components[i] 는 i 축 법선 면 위의 값"""
    domain: Domain
    components: Tuple[np.ndarray, ...]
    solenoidal: bool = False
    bc: str = field(default="noslip")

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.domain.dim:
            raise ValueError(f"VectorField: expected {self.domain.dim} components, got {len(comps)}")
        frozen = []
        for axis, comp in enumerate(comps):
            array = _frozen_copy(comp, self.domain.face_shape(axis), f"VectorField[{axis}]")
            first = np.take(array, 0, axis=axis)
            last = np.take(array, -1, axis=axis)
            if np.any(first != 0.0) or np.any(last != 0.0):
                raise ValueError(f"VectorField[{axis}]: boundary-normal faces must be exactly 0 (no-slip)")
            frozen.append(array)
        object.__setattr__(self, "components", tuple(frozen))

    @classmethod
    def zeros(cls, domain: Domain) -> "VectorField":
        return cls(domain, tuple(np.zeros(domain.face_shape(a)) for a in range(domain.dim)), solenoidal=True)

    @classmethod
    def from_interior(cls, domain: Domain, interiors: Iterable[np.ndarray], solenoidal: bool = False) -> "VectorField":
        """경계 면을 제외한 내부 면 값으로부터 생성"""
        comps = []
        for axis, interior in enumerate(interiors):
            full = np.zeros(domain.face_shape(axis))
            full[interior_slice(domain.dim, axis)] = interior
            comps.append(full)
        return cls(domain, tuple(comps), solenoidal=solenoidal)

    def interior(self, axis: int) -> np.ndarray:
        return self.components[axis][interior_slice(self.domain.dim, axis)]

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.domain, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.domain, tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, factor: float) -> "VectorField":
        return VectorField(self.domain, tuple(a * float(factor) for a in self.components), solenoidal=self.solenoidal)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.abs(c).max()) for c in self.components)

    def dot(self, other: "VectorField") -> float:
        """면 중점 구적에 의한 L2 내적"""
        total = sum(float(np.sum(a * b)) for a, b in zip(self.components, other.components))
        return total * self.domain.cell_volume

    def l2(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def kinetic(self) -> float:
        return 0.5 * self.dot(self)

    def cell_magnitude(self) -> np.ndarray:
        """셀 중심으로 평균한 |u|"""
        total = np.zeros(self.domain.shape)
        for axis, comp in enumerate(self.components):
            lo = [slice(None)] * self.domain.dim
            hi = [slice(None)] * self.domain.dim
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            total += (0.5 * (comp[tuple(lo)] + comp[tuple(hi)])) ** 2
        return np.sqrt(total)

    def equals(self, other: "VectorField") -> bool:
        return self.domain == other.domain and all(
            np.array_equal(a, b) for a, b in zip(self.components, other.components)
        )


def _axis_slice(dim: int, axis: int, part: slice) -> Tuple[slice, ...]:
    index = [slice(None)] * dim
    index[axis] = part
    return tuple(index)


def interior_slice(dim: int, axis: int) -> Tuple[slice, ...]:
    return _axis_slice(dim, axis, slice(1, -1))


def lower_slice(dim: int, axis: int) -> Tuple[slice, ...]:
    """axis 방향 마지막 원소 제외"""
    return _axis_slice(dim, axis, slice(None, -1))


def upper_slice(dim: int, axis: int) -> Tuple[slice, ...]:
    return _axis_slice(dim, axis, slice(1, None))


@dataclass(frozen=True, eq=False)
class SimState:
    """(n, c, u, P, t) 와 정규화 수준 eps"""
    n: ScalarField
    c: ScalarField
    u: VectorField
    P: ScalarField
    t: float
    eps: float

    def __post_init__(self):
        if not self.t >= 0:
            raise ValueError("SimState.t must be >= 0")
        if not self.eps > 0:
            raise ValueError("SimState.eps must be > 0")

    @property
    def domain(self) -> Domain:
        return self.n.domain

    def equals(self, other: "SimState") -> bool:
        return (
            self.t == other.t
            and self.eps == other.eps
            and self.n.equals(other.n)
            and self.c.equals(other.c)
            and self.u.equals(other.u)
            and self.P.equals(other.P)
        )
