"""
MAC 격자 2차 유한차분 연산자

- 스칼라: 셀 중심, 거울 고스트(Neumann)
- 속도: 면 중심, 경계 법선 면 = 0, 접선 성분은 반대칭 고스트(no-slip)
- 행렬은 축별 1차원 행렬의 Kronecker 합으로 조립하고 Domain 단위로 캐시한다.
"""
import logging
import math
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.fft import dctn, idctn
from scipy.sparse.linalg import cg, factorized

from app.exceptions import IncompatibleRHSError, NoConvergenceError
from app.models.fields import ScalarField, VectorField, lower_slice as _lo, upper_slice as _hi
from app.models.params import Domain, PoissonSolverConfig

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# 미분 연산자
# ---------------------------------------------------------------------------

def gradient_interiors(domain: Domain, values: np.ndarray) -> List[np.ndarray]:
    """내부 면에서의 중심 차분"""
    return [np.diff(values, axis=axis) / domain.spacing[axis] for axis in range(domain.dim)]


def divergence_interiors(domain: Domain, interiors: Sequence[np.ndarray]) -> np.ndarray:
    """내부 면 값(경계 면 = 0)으로부터 셀 발산"""
    out = np.zeros(domain.shape)
    for axis, inner in enumerate(interiors):
        pad = [(0, 0)] * domain.dim
        pad[axis] = (1, 1)
        out += np.diff(np.pad(inner, pad), axis=axis) / domain.spacing[axis]
    return out


def gradient_cells_to_faces(f: ScalarField) -> VectorField:
    """셀 -> 면 중심 차분. 경계 면은 0 (no-flux)"""
    return VectorField.from_interior(f.domain, gradient_interiors(f.domain, f.values))


def divergence_faces_to_cells(F: VectorField) -> ScalarField:
    """보존형 플럭스 차분"""
    domain = F.domain
    return ScalarField(domain, divergence_interiors(domain, [F.interior(axis) for axis in range(domain.dim)]))


def laplacian_neumann(f: ScalarField) -> ScalarField:
    return divergence_faces_to_cells(gradient_cells_to_faces(f))


def upwind_interiors(domain: Domain, values: np.ndarray, velocities: Sequence[np.ndarray]) -> List[np.ndarray]:
    """내부 면 속도의 부호에 따른 상류 셀 값 x 속도"""
    fluxes = []
    for axis, vel in enumerate(velocities):
        left = values[_lo(domain.dim, axis)]
        right = values[_hi(domain.dim, axis)]
        fluxes.append(vel * np.where(vel > 0, left, right))
    return fluxes


def advect_scalar_upwind(f: ScalarField, u: VectorField, conservative: bool = True) -> ScalarField:
    """div(u f_upwind)

    conservative=False 이면 f div_h(u) 를 빼서 상수 보존과 이산 최대원리를
    정확히 만족시키는 대류형을 돌려준다.
    """
    domain = f.domain
    velocities = [u.interior(axis) for axis in range(domain.dim)]
    out = divergence_interiors(domain, upwind_interiors(domain, f.values, velocities))
    if not conservative:
        out = out - f.values * divergence_interiors(domain, velocities)
    return ScalarField(domain, out)


def grad_sq_cells(f: ScalarField) -> np.ndarray:
    """면 차분 제곱을 셀로 평균한 |grad f|^2"""
    domain = f.domain
    out = np.zeros(domain.shape)
    for axis, g in enumerate(gradient_interiors(domain, f.values)):
        pad = [(0, 0)] * domain.dim
        pad[axis] = (1, 1)
        sq = np.pad(g * g, pad)
        out += 0.5 * (sq[_lo(domain.dim, axis)] + sq[_hi(domain.dim, axis)])
    return out


def scalar_dirichlet_form(f: ScalarField) -> float:
    """int |grad f|^2"""
    return float(grad_sq_cells(f).sum() * f.domain.cell_volume)


def velocity_dirichlet_form(u: VectorField) -> float:
    """int |grad u|^2 = -sum_i <u_i, D_i u_i> (no-slip 이산 라플라시안)"""
    domain = u.domain
    total = 0.0
    for axis in range(domain.dim):
        inner = u.interior(axis).ravel()
        total -= float(inner @ (dirichlet_laplacian_matrix(domain, axis) @ inner))
    return total * domain.cell_volume


# ---------------------------------------------------------------------------
# 행렬 조립
# ---------------------------------------------------------------------------

def _tridiag(n: int, h: float, end: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    main[0] = main[-1] = end
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def _kron_sum(blocks: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    sizes = [b.shape[0] for b in blocks]
    total = None
    for k, block in enumerate(blocks):
        before = sp.identity(math.prod(sizes[:k]), format="csr")
        after = sp.identity(math.prod(sizes[k + 1:]), format="csr")
        term = sp.kron(before, sp.kron(block, after))
        total = term if total is None else total + term
    return total.tocsr()


@lru_cache(maxsize=16)
def neumann_laplacian_matrix(domain: Domain) -> sp.csr_matrix:
    """셀 중심 Neumann 라플라시안 (C-order ravel)"""
    return _kron_sum([_tridiag(n, h, -1.0) for n, h in zip(domain.cells, domain.spacing)])


@lru_cache(maxsize=32)
def dirichlet_laplacian_matrix(domain: Domain, axis: int) -> sp.csr_matrix:
    """axis 성분 내부 면 위의 no-slip 라플라시안"""
    blocks = []
    for k, (n, h) in enumerate(zip(domain.cells, domain.spacing)):
        if k == axis:
            blocks.append(_tridiag(n - 1, h, -2.0))
        else:
            blocks.append(_tridiag(n, h, -3.0))
    return _kron_sum(blocks)


@lru_cache(maxsize=16)
def _negative_neumann(domain: Domain) -> sp.csr_matrix:
    return (-neumann_laplacian_matrix(domain)).tocsr()


@lru_cache(maxsize=8)
def _bordered_neumann_solver(domain: Domain):
    lap = neumann_laplacian_matrix(domain)
    ones = sp.csr_matrix(np.ones((domain.n_cells, 1)))
    bordered = sp.bmat([[lap, ones], [ones.T, None]], format="csc")
    return factorized(bordered)


@lru_cache(maxsize=32)
def _screened_matrix(domain: Domain, axis: int, coeff: float) -> sp.csr_matrix:
    lap = dirichlet_laplacian_matrix(domain, axis)
    return (sp.identity(lap.shape[0], format="csr") - coeff * lap).tocsr()


@lru_cache(maxsize=16)
def _screened_solver(domain: Domain, axis: int, coeff: float):
    return factorized(_screened_matrix(domain, axis, coeff).tocsc())


@lru_cache(maxsize=16)
def _neumann_symbol(domain: Domain) -> np.ndarray:
    """DCT-II 기저에서의 -Delta_h 고유값"""
    symbol = np.zeros(domain.shape)
    for axis, (n, h) in enumerate(zip(domain.cells, domain.spacing)):
        shape = [1] * domain.dim
        shape[axis] = n
        k = np.arange(n).reshape(shape)
        symbol = symbol + (4.0 / (h * h)) * np.sin(np.pi * k / (2.0 * n)) ** 2
    symbol.setflags(write=False)
    return symbol


# ---------------------------------------------------------------------------
# 선형 해법
# ---------------------------------------------------------------------------

def _cg(matrix, rhs: np.ndarray, cfg: PoissonSolverConfig, x0=None, what: str = "solve") -> np.ndarray:
    # 2-norm 기준 rel_tol/sqrt(N) 이면 max-norm 잔차가 rel_tol*|rhs|_inf 이하
    rtol = cfg.rel_tol / math.sqrt(rhs.size)
    x, info = cg(matrix, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=cfg.max_iter)
    if info > 0:
        raise NoConvergenceError(f"{what}: CG did not reach rel_tol={cfg.rel_tol:g} within max_iter={cfg.max_iter}")
    if info < 0:
        raise NoConvergenceError(f"{what}: CG breakdown (info={info})")
    return x


def _solve_neumann(domain: Domain, rhs: np.ndarray, cfg: PoissonSolverConfig) -> np.ndarray:
    """평균 0 우변에 대한 평균 0 해"""
    if cfg.method == "direct":
        x = _bordered_neumann_solver(domain)(np.append(rhs.ravel(), 0.0))[:-1]
    else:
        x = _cg(_negative_neumann(domain), -rhs.ravel(), cfg, what="poisson")
    x = x - x.mean()
    return x.reshape(domain.shape)


def poisson_solve_neumann(rhs: ScalarField, cfg: PoissonSolverConfig) -> ScalarField:
    """Delta_h phi = rhs (Neumann), mean(phi) = 0"""
    domain = rhs.domain
    scale = rhs.max_abs()
    if scale == 0.0:
        return ScalarField.zeros(domain)
    mean = rhs.mean()
    if abs(mean) > 1e-10 * scale:
        raise IncompatibleRHSError(f"rhs mean {mean:.3e} exceeds 1e-10 * |rhs|_inf = {1e-10 * scale:.3e}")
    return ScalarField(domain, _solve_neumann(domain, rhs.values - mean, cfg))


def divergence_tolerance(u: VectorField) -> float:
    return 1e-9 * u.max_abs() / u.domain.h_min


def project_with_potential(u: VectorField, cfg: PoissonSolverConfig) -> Tuple[VectorField, np.ndarray]:
    """u - grad(phi) 와 phi 를 함께 반환"""
    domain = u.domain
    interiors = [u.interior(axis) for axis in range(domain.dim)]
    div = divergence_interiors(domain, interiors)
    if not np.any(div):
        return VectorField(domain, u.components, solenoidal=True), np.zeros(domain.shape)
    # no-slip 면 데이터의 발산 합은 반올림 오차 수준에서만 0 이 아니다
    phi = _solve_neumann(domain, div - div.mean(), cfg)
    grads = gradient_interiors(domain, phi)
    projected = [inner - g for inner, g in zip(interiors, grads)]
    return VectorField.from_interior(domain, projected, solenoidal=True), phi


def project_divergence_free(u: VectorField, cfg: PoissonSolverConfig) -> VectorField:
    return project_with_potential(u, cfg)[0]


def screened_solve_dirichlet(u: VectorField, coeff: float, cfg: PoissonSolverConfig) -> VectorField:
    """성분별 (I - coeff Delta_h) w = u, no-slip"""
    if coeff < 0:
        raise ValueError("screening coefficient must be >= 0")
    domain = u.domain
    solved = []
    for axis in range(domain.dim):
        inner = u.interior(axis)
        b = inner.ravel()
        if coeff == 0.0 or not np.any(b):
            solved.append(inner.copy())
            continue
        if cfg.method == "direct":
            x = _screened_solver(domain, axis, float(coeff))(b)
        else:
            x = _cg(_screened_matrix(domain, axis, float(coeff)), b, cfg, x0=b.copy(), what=f"screened[{axis}]")
        solved.append(x.reshape(inner.shape))
    return VectorField.from_interior(domain, solved)


def yosida_smooth(u: VectorField, eps: float, cfg: PoissonSolverConfig) -> VectorField:
    """(1 + eps A)^{-1} u 의 이산 대용: screened solve 후 사영"""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return project_divergence_free(screened_solve_dirichlet(u, eps, cfg), cfg)


def implicit_neumann_diffusion(f: ScalarField, dt: float) -> ScalarField:
    """(I - dt Delta_h) x = f 를 DCT-II 대각화로 푼다 (Neumann)"""
    domain = f.domain
    coeffs = dctn(f.values, type=2, norm="ortho")
    x = idctn(coeffs / (1.0 + dt * _neumann_symbol(domain)), type=2, norm="ortho")
    # 질량 보정: int x = int f
    x += f.values.mean() - x.mean()
    return ScalarField(domain, x)
