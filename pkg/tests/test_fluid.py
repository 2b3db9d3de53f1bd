import math

import numpy as np
import pytest

from app.exceptions import CFLViolationError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import ForcingSpec, PoissonSolverConfig
from app.services.fluid import body_force, convective_term, kinetic_energy_balance, momentum_step
from app.services.grid import vortex_field
from app.services.operators import divergence_faces_to_cells, project_divergence_free, velocity_dirichlet_form

CG = PoissonSolverConfig()
NO_FORCING = ForcingSpec()
BUOYANCY = ForcingSpec(phi="linear", phi_gradient=(0.0, 0.1))


def make_state(domain, u=None, n_value=1.0, t=0.0):
    return SimState(
        n=ScalarField.constant(domain, n_value),
        c=ScalarField.constant(domain, 1.0),
        u=u if u is not None else VectorField.zeros(domain),
        P=ScalarField.zeros(domain),
        t=t,
        eps=1e-3,
    )


class TestBodyForce:
    """부력과 외력 테스트"""

    def test_constant_density_buoyancy(self, domain2d):
        """균일 n 의 부력 n grad(Phi) 테스트"""
        force = body_force(ScalarField.constant(domain2d, 2.0), BUOYANCY, 0.0)
        assert np.abs(force[0]).max() == 0.0
        np.testing.assert_allclose(force[1], 0.2, rtol=1e-15)

    def test_demeaned_buoyancy_vanishes_for_uniform_density(self, domain2d):
        """평균 제거 부력이 균일 n 에서 0 인지 테스트"""
        force = body_force(ScalarField.constant(domain2d, 2.0), BUOYANCY, 0.0, demeaned=True)
        assert max(np.abs(f).max() for f in force) == 0.0

    def test_exponential_force_decays(self, domain2d):
        """지수 감쇠 외력 크기 테스트"""
        forcing = ForcingSpec(force="exponential", force_amplitude=0.5, force_decay=1.0)
        zero = ScalarField.zeros(domain2d)
        at0 = max(np.abs(f).max() for f in body_force(zero, forcing, 0.0))
        at1 = max(np.abs(f).max() for f in body_force(zero, forcing, 1.0))
        assert at0 == pytest.approx(0.5, rel=1e-12)
        assert at1 == pytest.approx(0.5 * math.exp(-1.0), rel=1e-12)

    def test_force_decay_must_be_positive(self):
        """비양수 감쇠율 거부 테스트"""
        with pytest.raises(ValueError):
            ForcingSpec(force="exponential", force_amplitude=0.5, force_decay=0.0)


class TestConvection:
    """대류항 반대칭성 테스트"""

    def test_skew_symmetry(self, domain2d):
        """비발산 w 에 대해 <u, (w.grad) u> = 0"""
        w = project_divergence_free(vortex_field(domain2d, 1.0), CG)
        rng = np.random.default_rng(0)
        u = VectorField.from_interior(domain2d, [rng.normal(size=domain2d.interior_face_shape(a)) for a in range(2)])
        conv = convective_term(w, u)
        pairing = sum(float(np.sum(u.interior(a) * conv[a])) for a in range(2)) * domain2d.cell_volume
        scale = sum(float(np.sum(np.abs(u.interior(a) * conv[a]))) for a in range(2)) * domain2d.cell_volume
        assert abs(pairing) <= 1e-8 * scale


class TestMomentumStep:
    """분수 단계 사영 스텝 테스트"""

    def test_zero_state_is_fixed(self, domain2d):
        """정지 상태 유지 테스트"""
        result = momentum_step(make_state(domain2d), 0.01, NO_FORCING, CG)
        assert result.velocity.max_abs() == 0.0
        assert result.pressure.max_abs() == 0.0

    @pytest.mark.parametrize("n_value", [1.0, 0.5])
    def test_uniform_buoyancy_is_absorbed_by_pressure(self, domain2d, n_value):
        """u = 0, n 상수, Phi 선형 -> 출력 u = 0, 압력이 n grad(Phi) 를 흡수"""
        dt = 0.01
        result = momentum_step(make_state(domain2d, n_value=n_value), dt, BUOYANCY, CG)
        assert result.velocity.max_abs() <= 1e-6 * dt * 0.1
        assert abs(result.pressure.mean()) <= 1e-14
        # grad P = -n grad(Phi)
        _, y = domain2d.center_mesh()
        expected = -n_value * 0.1 * (y - y.mean())
        np.testing.assert_allclose(result.pressure.values, expected, atol=1e-8)

    def test_divergence_and_no_slip(self, domain2d):
        """스텝 후 발산 허용치와 no-slip 테스트"""
        u = project_divergence_free(vortex_field(domain2d, 0.5), CG)
        result = momentum_step(make_state(domain2d, u=u), 0.01, BUOYANCY, CG)
        assert result.divergence <= result.div_tol
        assert divergence_faces_to_cells(result.velocity).max_abs() <= result.div_tol
        for axis, comp in enumerate(result.velocity.components):
            assert np.abs(np.take(comp, [0, -1], axis=axis)).max() == 0.0

    def test_direct_matches_cg(self, domain2d):
        """직접 해법과 CG 결과 일치 테스트"""
        u = project_divergence_free(vortex_field(domain2d, 0.5), CG)
        state = make_state(domain2d, u=u)
        a = momentum_step(state, 0.01, BUOYANCY, CG)
        b = momentum_step(state, 0.01, BUOYANCY, PoissonSolverConfig(method="direct"))
        assert (a.velocity - b.velocity).max_abs() <= 1e-7 * a.velocity.max_abs()

    def test_kinetic_energy_decreases(self, domain2d):
        """f = 0, Phi = 0: 운동 에너지가 매 스텝 감소"""
        state = make_state(domain2d, u=project_divergence_free(vortex_field(domain2d, 1.0), CG))
        energies = [state.u.kinetic()]
        for k in range(10):
            result = momentum_step(state, 0.005, NO_FORCING, CG)
            state = SimState(n=state.n, c=state.c, u=result.velocity, P=result.pressure, t=state.t + 0.005, eps=state.eps)
            energies.append(state.u.kinetic())
        assert all(b < a for a, b in zip(energies, energies[1:]))

    def test_cfl_violation(self, domain2d):
        """큰 속도에서 CFLViolationError 테스트"""
        state = make_state(domain2d, u=vortex_field(domain2d, 10.0))
        with pytest.raises(CFLViolationError):
            momentum_step(state, 0.1, NO_FORCING, CG)

    def test_rejects_nonpositive_dt(self, domain2d):
        """dt = 0 거부 테스트"""
        with pytest.raises(ValueError):
            momentum_step(make_state(domain2d), 0.0, NO_FORCING, CG)


class TestKineticEnergyBalance:
    """운동 에너지 항등식 잔차 테스트"""

    def _residual(self, domain, dt):
        u = project_divergence_free(vortex_field(domain, 0.01), CG)
        before = make_state(domain, u=u)
        result = momentum_step(before, dt, NO_FORCING, CG)
        after = SimState(n=before.n, c=before.c, u=result.velocity, P=result.pressure, t=dt, eps=before.eps)
        return kinetic_energy_balance(before, after, dt, NO_FORCING)

    def test_zero_velocity(self, domain2d):
        """u = 0 에서 잔차 0 테스트"""
        state = make_state(domain2d)
        later = make_state(domain2d, t=0.01)
        assert kinetic_energy_balance(state, later, 0.01, NO_FORCING) == 0.0

    def test_first_order_in_dt(self, domain2d):
        """dt -> dt/2 에서 잔차가 대략 절반"""
        coarse = self._residual(domain2d, 2.5e-4)
        fine = self._residual(domain2d, 1.25e-4)
        assert 1.5 <= coarse / fine <= 2.5

    def test_time_integrated_dissipation(self, domain2d):
        """f = 0: sum dt int |grad u|^2 가 에너지 감소량과 5% 이내로 일치"""
        dt = 5e-4
        state = make_state(domain2d, u=project_divergence_free(vortex_field(domain2d, 0.01), CG))
        start = state.u.kinetic()
        dissipated = 0.0
        for _ in range(100):
            result = momentum_step(state, dt, NO_FORCING, CG)
            state = SimState(n=state.n, c=state.c, u=result.velocity, P=result.pressure, t=state.t + dt, eps=state.eps)
            dissipated += dt * velocity_dirichlet_form(state.u)
        assert dissipated == pytest.approx(start - state.u.kinetic(), rel=0.05)
