"""
세균 밀도 n 과 산소 농도 c 의 한 스텝

수송/확산은 보존형(상류) 차분, 반응은 점별 정확해로 분할한다.
    n: 로지스틱 닫힌 해    c: exp(-dt ln(1 + eps n)/eps)
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from app.exceptions import CFLViolationError, MonotonicityLossError, PositivityLossError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import ReactionParams
from app.services.operators import (
    advect_scalar_upwind,
    divergence_interiors,
    gradient_interiors,
    implicit_neumann_diffusion,
    laplacian_neumann,
    upwind_interiors,
)

logger = logging.getLogger(__name__)

# 이 아래에서는 ln(1+x)/eps 대신 급수 n - eps n^2/2 를 쓴다
SERIES_THRESHOLD = 1e-8


@dataclass(frozen=True)
class DensityUpdate:
    n: ScalarField
    mass_residual: float


def mobility(n_values: np.ndarray, eps: float) -> np.ndarray:
    return n_values / (1.0 + eps * n_values)


def consumption_rate(n_value: Union[float, np.ndarray], eps: float) -> Union[float, np.ndarray]:
    """ln(1 + eps n)/eps. 0 <= 결과 <= n"""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    n = np.asarray(n_value, dtype=np.float64)
    if np.any(n < 0):
        raise ValueError("consumption_rate requires n >= 0")
    x = eps * n
    out = np.where(x < SERIES_THRESHOLD, n - 0.5 * eps * n * n, np.log1p(x) / eps)
    if out.ndim == 0:
        return float(out)
    return out


def chemotactic_flux(n: ScalarField, c: ScalarField, chi: float, eps: float) -> VectorField:
    """면 플럭스 chi * upwind(n/(1+eps n)) * grad c. 경계 면은 0"""
    domain = n.domain
    grads = gradient_interiors(domain, c.values)
    # upwind_interiors 는 g * 상류값을 돌려준다
    fluxes = upwind_interiors(domain, mobility(n.values, eps), grads)
    return VectorField.from_interior(domain, [chi * f for f in fluxes])


def drift_speed(n: ScalarField, c: ScalarField, chi: float, eps: float) -> float:
    """max_faces chi |d c| / (1 + eps n_upwind)"""
    if chi == 0.0:
        return 0.0
    domain = n.domain
    grads = gradient_interiors(domain, c.values)
    weights = upwind_interiors(domain, 1.0 / (1.0 + eps * n.values), grads)
    return chi * max((float(np.abs(w).max()) for w in weights), default=0.0)


def transport_speed(state: SimState, reaction: ReactionParams) -> float:
    """sum_i max|u_i| + 화학주성 표류 속도"""
    advective = sum(float(np.abs(comp).max()) for comp in state.u.components)
    return advective + drift_speed(state.n, state.c, reaction.chi, reaction.eps)


def check_cfl(state: SimState, dt: float, reaction: ReactionParams, implicit_diffusion: bool) -> None:
    domain = state.domain
    courant = dt * transport_speed(state, reaction) / domain.h_min
    if courant > 1.0:
        raise CFLViolationError(f"transport Courant number {courant:.3f} > 1 (dt = {dt:.3e})")
    if not implicit_diffusion:
        number = dt * 2 * domain.dim / domain.h_min ** 2
        if number > 1.0:
            raise CFLViolationError(f"explicit diffusion number {number:.3f} > 1 (dt = {dt:.3e})")


def positivity_scales(initial: SimState) -> Tuple[float, float]:
    """(n, c) 의 pos_tol 기준 크기. 실행 시작 시 한 번 정하고 끝까지 유지"""
    return max(1.0, initial.n.max_abs()), max(1.0, initial.c.max_abs())


def logistic_substep(n_values: np.ndarray, dt: float, kappa: float, mu: float) -> np.ndarray:
    """n' = kappa n - mu n^2 의 dt 후 정확해"""
    if kappa == 0.0:
        return n_values / (1.0 + mu * dt * n_values)
    growth = np.exp(kappa * dt)
    return kappa * n_values * growth / (kappa + mu * n_values * np.expm1(kappa * dt))


def step_n(
    state: SimState,
    dt: float,
    params: ReactionParams,
    implicit_diffusion: bool = False,
    reaction_enabled: bool = True,
    pos_scale: Optional[float] = None,
) -> DensityUpdate:
    """pos_scale 은 초기 자료의 max(1, |n0|_inf). 없으면 입력 상태를 기준으로 삼는다"""
    check_cfl(state, dt, params, implicit_diffusion)
    domain = state.domain
    n, c, u = state.n, state.c, state.u

    chemo = chemotactic_flux(n, c, params.chi, params.eps)
    advective = upwind_interiors(domain, n.values, [u.interior(a) for a in range(domain.dim)])
    transport = divergence_interiors(domain, [chemo.interior(a) + advective[a] for a in range(domain.dim)])

    if implicit_diffusion:
        star = implicit_neumann_diffusion(ScalarField(domain, n.values - dt * transport), dt).values
    else:
        star = n.values + dt * (laplacian_neumann(n).values - transport)

    if reaction_enabled:
        new = logistic_substep(star, dt, params.kappa, params.mu)
    else:
        new = star

    if pos_scale is None:
        pos_scale = max(1.0, n.max_abs())
    pos_tol = params.pos_tol * pos_scale
    if new.min() < -pos_tol:
        raise PositivityLossError(f"min(n) = {new.min():.3e} < -pos_tol = {-pos_tol:.3e} at t = {state.t + dt:.6g}")

    vol = domain.cell_volume
    residual = abs(new.sum() * vol - n.values.sum() * vol - (new - star).sum() * vol)
    return DensityUpdate(n=ScalarField(domain, new), mass_residual=float(residual))


def step_c(
    state: SimState,
    dt: float,
    params: ReactionParams,
    implicit_diffusion: bool = False,
    pos_scale: Optional[float] = None,
) -> ScalarField:
    check_cfl(state, dt, params, implicit_diffusion)
    domain = state.domain
    n, c, u = state.n, state.c, state.u

    advective = advect_scalar_upwind(c, u, conservative=False).values
    if implicit_diffusion:
        star = implicit_neumann_diffusion(ScalarField(domain, c.values - dt * advective), dt).values
    else:
        star = c.values + dt * (laplacian_neumann(c).values - advective)

    # n >= -pos_tol 이므로 소비율 계산에는 음의 반올림 오차를 0 으로 본다
    rate = consumption_rate(np.maximum(n.values, 0.0), params.eps)
    new = star * np.exp(-dt * rate)

    if pos_scale is None:
        pos_scale = max(1.0, c.max_abs())
    pos_tol = params.pos_tol * pos_scale
    if new.min() < -pos_tol:
        raise PositivityLossError(f"min(c) = {new.min():.3e} < -pos_tol = {-pos_tol:.3e} at t = {state.t + dt:.6g}", field="c")
    c_max = c.max()
    if new.max() > c_max + 1e-12 * abs(c_max):
        raise MonotonicityLossError(f"max(c) grew from {c_max:.17g} to {new.max():.17g}")
    return ScalarField(domain, new)
