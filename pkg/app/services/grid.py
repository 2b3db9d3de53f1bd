"""
계산 영역 생성과 초기 상태 구성
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from app.exceptions import InitialDataError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import Domain, PoissonSolverConfig, ProfileSpec, SimParams, VelocitySpec
from app.services.operators import (
    divergence_interiors,
    divergence_tolerance,
    project_divergence_free,
    screened_solve_dirichlet,
)

logger = logging.getLogger(__name__)

# 시드가 지정되지 않은 프로파일은 params.seed + 오프셋을 쓴다
_SEED_OFFSETS = {"n": 0, "c": 1, "u": 2}


def make_domain(dim: int, lengths: Sequence[float], cells: Sequence[int]) -> Domain:
    """Domain 생성 (검증은 모델이 수행)"""
    return Domain(dim=dim, lengths=tuple(lengths), cells=tuple(cells))


def scalar_profile(domain: Domain, spec: ProfileSpec, seed: int) -> np.ndarray:
    if spec.kind == "constant":
        return np.full(domain.shape, float(spec.value))
    if spec.kind == "random":
        rng = np.random.default_rng(seed)
        return spec.value + spec.amplitude * rng.uniform(-1.0, 1.0, size=domain.shape)
    mesh = domain.center_mesh()
    if spec.kind == "bump":
        r2 = sum((x - 0.5 * length) ** 2 for x, length in zip(mesh, domain.lengths))
        return spec.value + spec.amplitude * np.exp(-r2 / (2.0 * spec.width ** 2))
    if spec.kind == "cosine":
        return spec.value + spec.amplitude * np.cos(spec.mode * np.pi * mesh[0] / domain.lengths[0])
    raise ValueError(f"unknown profile kind: {spec.kind}")


def vortex_field(domain: Domain, amplitude: float) -> VectorField:
    """격자 절점 유선함수 psi = sin^2 sin^2 의 이산 회전. 정확히 이산 비발산"""
    if amplitude == 0.0:
        return VectorField.zeros(domain)
    h = domain.spacing
    x = domain.face_positions(0)[:, None]
    y = domain.face_positions(1)[None, :]
    psi = np.sin(np.pi * x / domain.lengths[0]) ** 2 * np.sin(np.pi * y / domain.lengths[1]) ** 2
    # sin(pi)^2 ~ 1e-32 이므로 경계 절점은 직접 0 으로 둔다
    psi[0, :] = psi[-1, :] = 0.0
    psi[:, 0] = psi[:, -1] = 0.0
    u0 = np.diff(psi, axis=1) / h[1]
    u1 = -np.diff(psi, axis=0) / h[0]
    if domain.dim == 3:
        z = np.sin(np.pi * domain.cell_centers(2) / domain.lengths[2])[None, None, :]
        comps = [u0[:, :, None] * z, u1[:, :, None] * z, np.zeros(domain.face_shape(2))]
    else:
        comps = [u0, u1]
    scale = max(float(np.abs(c).max()) for c in comps)
    return VectorField(domain, tuple(c * (amplitude / scale) for c in comps), solenoidal=True)


def random_solenoidal_field(domain: Domain, amplitude: float, seed: int, cfg: PoissonSolverConfig) -> VectorField:
    """시드 잡음 -> screened 평활화 -> 사영 -> 진폭 정규화"""
    if amplitude == 0.0:
        return VectorField.zeros(domain)
    rng = np.random.default_rng(seed)
    noise = VectorField.from_interior(
        domain,
        [rng.uniform(-1.0, 1.0, size=domain.interior_face_shape(a)) for a in range(domain.dim)],
    )
    smooth = screened_solve_dirichlet(noise, (0.1 * min(domain.lengths)) ** 2, cfg)
    projected = project_divergence_free(smooth, cfg)
    return projected * (amplitude / projected.max_abs())


def velocity_profile(domain: Domain, spec: VelocitySpec, seed: int, cfg: PoissonSolverConfig) -> VectorField:
    if spec.kind == "zero" or spec.amplitude == 0.0:
        return VectorField.zeros(domain)
    if spec.kind == "vortex":
        return vortex_field(domain, spec.amplitude)
    return random_solenoidal_field(domain, spec.amplitude, seed, cfg)


def _seed(spec_seed, params: SimParams, name: str) -> int:
    return spec_seed if spec_seed is not None else params.seed + _SEED_OFFSETS[name]


def init_state(
    domain: Domain,
    params: SimParams,
    n0_spec: ProfileSpec | None = None,
    c0_spec: ProfileSpec | None = None,
    u0_spec: VelocitySpec | None = None,
) -> SimState:
    """t = 0 상태 생성. None 으로 둔 초기값은 params.initial 을 쓴다"""
    n_spec = n0_spec or params.initial.n
    c_spec = c0_spec or params.initial.c
    u_spec = u0_spec or params.initial.u

    n0 = scalar_profile(domain, n_spec, _seed(n_spec.seed, params, "n"))
    c0 = scalar_profile(domain, c_spec, _seed(c_spec.seed, params, "c"))
    if not n0.min() > 0:
        raise InitialDataError(f"initial n must be > 0 everywhere (min = {n0.min():.6g})")
    if not c0.min() > 0:
        raise InitialDataError(f"initial c must be > 0 everywhere (min = {c0.min():.6g})")

    raw = velocity_profile(domain, u_spec, _seed(u_spec.seed, params, "u"), params.solver)
    u0 = project_divergence_free(raw, params.solver)
    div = divergence_interiors(domain, [u0.interior(a) for a in range(domain.dim)])
    tol = divergence_tolerance(raw)
    if np.abs(div).max(initial=0.0) > tol:
        raise InitialDataError(f"initial velocity divergence {np.abs(div).max():.3e} exceeds div_tol {tol:.3e}")

    logger.debug("initial state: int n = %.6g, int c = %.6g, |u|_inf = %.3g",
                 n0.sum() * domain.cell_volume, c0.sum() * domain.cell_volume, u0.max_abs())
    return SimState(
        n=ScalarField(domain, n0),
        c=ScalarField(domain, c0),
        u=u0,
        P=ScalarField.zeros(domain),
        t=0.0,
        eps=params.reaction.eps,
    )


def field_shapes(domain: Domain) -> Tuple[Tuple[int, ...], ...]:
    """스냅샷 페이로드 순서의 배열 shape 목록"""
    return (domain.shape, domain.shape) + tuple(domain.face_shape(a) for a in range(domain.dim)) + (domain.shape,)
