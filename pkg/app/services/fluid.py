"""
정규화 Navier-Stokes 한 스텝 (분수 단계 사영법)

    w   = Y_eps u
    u*  = (I - dt Delta_h)^{-1} (u - dt (w.grad) u) + dt (n grad Phi + f(t+dt))
    u'  = u* - grad phi,   P = -phi/dt
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List

import numpy as np

from app.exceptions import CFLViolationError
from app.models.fields import ScalarField, SimState, VectorField, interior_slice, lower_slice as _lo, upper_slice as _hi
from app.models.params import Domain, ForcingSpec, PoissonSolverConfig
from app.services.grid import vortex_field
from app.services.operators import (
    divergence_interiors,
    divergence_tolerance,
    project_with_potential,
    screened_solve_dirichlet,
    velocity_dirichlet_form,
    yosida_smooth,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentumResult:
    velocity: VectorField
    pressure: ScalarField
    divergence: float
    div_tol: float


@lru_cache(maxsize=8)
def _unit_force_profile(domain: Domain) -> VectorField:
    """|f0|_inf = 1 인 비발산 외력 형상"""
    return vortex_field(domain, 1.0)


def body_force(n: ScalarField, forcing: ForcingSpec, t: float, demeaned: bool = False) -> List[np.ndarray]:
    """내부 면 위의 n grad(Phi) + f(x, t)"""
    domain = n.domain
    values = n.values - n.mean() if demeaned else n.values
    grad = forcing.grad_phi(domain.dim)
    factor = forcing.force_factor(t)
    out = []
    for axis in range(domain.dim):
        term = 0.5 * (values[_lo(domain.dim, axis)] + values[_hi(domain.dim, axis)]) * grad[axis]
        if factor:
            term = term + factor * _unit_force_profile(domain).interior(axis)
        out.append(term)
    return out


def convective_term(w: VectorField, u: VectorField) -> List[np.ndarray]:
    """sum_j d_j (w_j u_i) 의 보존형 중심 차분 (내부 면)

    w 가 이산 비발산이면 sum_i <u_i, C_i> = 0 (반대칭).
    """
    domain = u.domain
    dim = domain.dim
    h = domain.spacing
    out = []
    for i in range(dim):
        ui = u.components[i]
        acc = np.zeros(domain.interior_face_shape(i))
        for j in range(dim):
            if j == i:
                wc = 0.5 * (w.components[i][_lo(dim, i)] + w.components[i][_hi(dim, i)])
                uc = 0.5 * (ui[_lo(dim, i)] + ui[_hi(dim, i)])
                acc += np.diff(wc * uc, axis=i) / h[i]
            else:
                wj = w.components[j]
                wj_edge = 0.5 * (wj[_lo(dim, i)] + wj[_hi(dim, i)])
                inner = ui[interior_slice(dim, i)]
                pad = [(0, 0)] * dim
                pad[j] = (1, 1)
                # 벽에서 접선 속도 = 0
                ui_edge = np.pad(0.5 * (inner[_lo(dim, j)] + inner[_hi(dim, j)]), pad)
                acc += np.diff(wj_edge * ui_edge, axis=j) / h[j]
        out.append(acc)
    return out


def momentum_step(
    state: SimState,
    dt: float,
    forcing: ForcingSpec,
    cfg: PoissonSolverConfig,
    buoyancy_demeaned: bool = False,
) -> MomentumResult:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    domain = state.domain
    u = state.u

    w = yosida_smooth(u, state.eps, cfg)
    courant = dt * sum(float(np.abs(c).max()) / h for c, h in zip(w.components, domain.spacing))
    if courant > 1.0:
        raise CFLViolationError(f"momentum step: advective Courant number {courant:.3f} > 1 (dt = {dt:.3e})")

    conv = convective_term(w, u)
    explicit = VectorField.from_interior(domain, [u.interior(a) - dt * conv[a] for a in range(domain.dim)])
    viscous = screened_solve_dirichlet(explicit, dt, cfg)

    force = body_force(state.n, forcing, state.t + dt, buoyancy_demeaned)
    u_star = VectorField.from_interior(domain, [viscous.interior(a) + dt * force[a] for a in range(domain.dim)])
    u_new, phi = project_with_potential(u_star, cfg)

    pressure = -phi / dt
    pressure -= pressure.mean()
    div = divergence_interiors(domain, [u_new.interior(a) for a in range(domain.dim)])
    return MomentumResult(
        velocity=u_new,
        pressure=ScalarField(domain, pressure),
        divergence=float(np.abs(div).max()),
        div_tol=max(divergence_tolerance(u_star), divergence_tolerance(u_new)),
    )


def kinetic_energy_balance(
    state_before: SimState,
    state_after: SimState,
    dt: float,
    forcing: ForcingSpec,
    buoyancy_demeaned: bool = False,
) -> float:
    """|d/dt (1/2)|u|^2 - (-|grad u|^2 + <n grad Phi + f, u>)| (중점 구적)"""
    domain = state_after.domain
    rate = (state_after.u.kinetic() - state_before.u.kinetic()) / dt
    dissipation = velocity_dirichlet_form(state_after.u)
    force = body_force(state_before.n, forcing, state_after.t, buoyancy_demeaned)
    work = sum(float(np.sum(f * state_after.u.interior(a))) for a, f in enumerate(force)) * domain.cell_volume
    return abs(rate - (-dissipation + work))
