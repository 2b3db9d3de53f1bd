import math

import numpy as np
import pytest

from app.exceptions import CFLViolationError, PositivityLossError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import Domain, ReactionParams
from app.services.chemotaxis import (
    chemotactic_flux,
    consumption_rate,
    logistic_substep,
    mobility,
    positivity_scales,
    step_c,
    step_n,
)
from app.services.grid import vortex_field
from app.services.operators import gradient_cells_to_faces

REACTION = ReactionParams(chi=1.0, kappa=1.0, mu=2.0, eps=1e-3)
# 16x16 에서 명시적 확산수 0.5
DT = 5e-4


def make_state(domain, n, c, u=None):
    as_field = lambda v: v if isinstance(v, ScalarField) else ScalarField(domain, np.broadcast_to(v, domain.shape))
    return SimState(n=as_field(n), c=as_field(c), u=u if u is not None else VectorField.zeros(domain),
                    P=ScalarField.zeros(domain), t=0.0, eps=REACTION.eps)


def smooth_state(domain, amplitude=0.3):
    x, y = domain.center_mesh()
    n = 1.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)
    c = 1.0 + 0.4 * np.exp(-((x - 0.3) ** 2 + (y - 0.6) ** 2) / 0.02)
    return make_state(domain, n, c, vortex_field(domain, amplitude))


class TestConsumptionRate:
    """ln(1 + eps n)/eps 테스트"""

    def test_zero_density(self):
        """n = 0 이면 소비율 0 테스트"""
        assert consumption_rate(0.0, 1e-3) == 0.0

    def test_small_eps_series(self):
        """작은 eps 에서 급수 분기 정확도 테스트"""
        assert consumption_rate(1.0, 1e-10) == pytest.approx(1.0 - 5e-11, rel=1e-15)

    def test_log_branch(self):
        """eps = 1 에서 로그 분기 테스트"""
        value = consumption_rate(3.0, 1.0)
        assert value == pytest.approx(math.log(4.0), rel=1e-15)
        assert value < 3.0

    def test_bounded_by_density(self):
        """0 <= 소비율 <= n 테스트"""
        n = np.linspace(0.0, 1e4, 1001)
        for eps in (1e-12, 1e-6, 1e-2, 1.0):
            rate = consumption_rate(n, eps)
            assert np.all(rate >= 0.0) and np.all(rate <= n)

    def test_limit_rate(self):
        """|rate - n| <= eps n^2 / 2"""
        for eps in (1e-2, 1e-4, 1e-6):
            assert abs(consumption_rate(2.0, eps) - 2.0) <= eps * 4.0 / 2.0 * (1 + 1e-9)

    @pytest.mark.parametrize("n, eps", [(-1.0, 1e-3), (1.0, 0.0), (1.0, -1.0)])
    def test_rejects_invalid(self, n, eps):
        """음수 n, 비양수 eps 거부 테스트"""
        with pytest.raises(ValueError):
            consumption_rate(n, eps)


class TestChemotacticFlux:
    """상류 이동도 화학주성 플럭스 테스트"""

    def test_constant_c(self, domain2d):
        """균일 c 에서 플럭스 0 테스트"""
        n = ScalarField.constant(domain2d, 2.0)
        assert chemotactic_flux(n, ScalarField.constant(domain2d, 1.0), 1.0, 1e-3).max_abs() == 0.0

    def test_zero_density(self, domain2d):
        """n = 0 에서 플럭스 0 테스트"""
        x, _ = domain2d.center_mesh()
        flux = chemotactic_flux(ScalarField.zeros(domain2d), ScalarField(domain2d, 1.0 + x), 1.0, 1e-3)
        assert flux.max_abs() == 0.0

    def test_saturation(self, domain2d):
        """n = 1e6, eps = 1 -> 이동도 ~ 1, 플럭스 ~ chi grad c"""
        x, _ = domain2d.center_mesh()
        c = ScalarField(domain2d, 1.0 + x ** 2)
        flux = chemotactic_flux(ScalarField.constant(domain2d, 1e6), c, 2.0, 1.0)
        expected = gradient_cells_to_faces(c) * 2.0
        assert (flux - expected).max_abs() <= 1e-5 * expected.max_abs()
        assert mobility(np.array([1e6]), 1.0)[0] < 1.0


class TestLogistic:
    """정확 로지스틱 부분 스텝 테스트"""

    @pytest.mark.parametrize("dt", [1e-3, 0.1, 2.0])
    def test_closed_form(self, dt):
        """로지스틱 닫힌 형태 해 일치 테스트"""
        out = logistic_substep(np.array([1.0]), dt, 1.0, 2.0)[0]
        assert out == pytest.approx(math.exp(dt) / (2 * math.exp(dt) - 1), rel=1e-14)

    def test_no_growth(self):
        """kappa = 0 에서 순수 감소 테스트"""
        out = logistic_substep(np.array([2.0]), 0.5, 0.0, 1.0)[0]
        assert out == pytest.approx(2.0 / (1 + 0.5 * 2.0), rel=1e-15)

    def test_composition(self):
        """두 번의 dt/2 = 한 번의 dt"""
        n = np.array([0.1, 1.0, 3.0])
        half = logistic_substep(logistic_substep(n, 0.05, 1.0, 2.0), 0.05, 1.0, 2.0)
        np.testing.assert_allclose(half, logistic_substep(n, 0.1, 1.0, 2.0), rtol=1e-13)


class TestStepN:
    """세균 밀도 스텝 테스트"""

    @pytest.mark.parametrize("implicit", [False, True])
    def test_equilibrium_is_fixed(self, domain2d, implicit):
        """n = kappa/mu 평형 유지 테스트"""
        state = make_state(domain2d, 0.5, 0.7)
        update = step_n(state, DT, REACTION, implicit_diffusion=implicit)
        np.testing.assert_allclose(update.n.values, 0.5, rtol=1e-14)

    def test_uniform_logistic(self, domain2d):
        """균일 상태 한 스텝이 로지스틱 해와 일치하는지 테스트"""
        state = make_state(domain2d, 1.0, 1.0)
        dt = DT
        update = step_n(state, dt, REACTION)
        np.testing.assert_allclose(update.n.values, math.exp(dt) / (2 * math.exp(dt) - 1), rtol=1e-14)

    @pytest.mark.parametrize("implicit", [False, True])
    def test_transport_conserves_mass(self, domain2d, implicit):
        """반응 없는 수송의 질량 보존 테스트"""
        state = smooth_state(domain2d)
        update = step_n(state, DT, REACTION, implicit_diffusion=implicit, reaction_enabled=False)
        assert update.n.integral() == pytest.approx(state.n.integral(), rel=1e-13)
        assert update.mass_residual <= 1e-10 * state.n.integral()

    def test_mass_residual_with_reaction(self, domain2d):
        """반응 포함 스텝의 질량 잔차와 양성 테스트"""
        update = step_n(smooth_state(domain2d), DT, REACTION, implicit_diffusion=True)
        assert update.mass_residual <= 1e-10 * update.n.integral()
        assert update.n.min() > 0.0

    def test_positivity_loss(self):
        """확산수 1 + 화학주성 Courant 0.9 -> 벽 옆 셀이 음수"""
        domain = Domain(dim=2, lengths=(1.0, 1.0), cells=(16, 16))
        x, _ = domain.center_mesh()
        n = np.full(domain.shape, 1e-3)
        n[0, :] = 1.0
        state = make_state(domain, n, 1.0 + 57.6 * x)
        h = domain.spacing[0]
        with pytest.raises(PositivityLossError) as exc:
            step_n(state, h * h / 4, ReactionParams(chi=1.0, kappa=1.0, mu=1.0, eps=1e-3))
        assert exc.value.field == "n"

    def test_tolerance_uses_given_scale(self):
        """pos_tol 이 현재 필드가 아닌 주어진 초기 크기에 비례하는지 테스트"""
        domain = Domain(dim=2, lengths=(1.0, 1.0), cells=(16, 16))
        x, _ = domain.center_mesh()
        n = np.full(domain.shape, 1e-3)
        n[0, :] = 1.0
        state = make_state(domain, n, 1.0 + 57.6 * x)
        dt = domain.spacing[0] ** 2 / 4
        base = ReactionParams(chi=1.0, kappa=1.0, mu=1.0, eps=1e-3)
        overshoot = step_n(state, dt, base, pos_scale=1e30).n.min()
        assert overshoot < 0.0

        reaction = ReactionParams(chi=1.0, kappa=1.0, mu=1.0, eps=1e-3, pos_tol=-overshoot / 2)
        assert step_n(state, dt, reaction, pos_scale=4.0).n.min() == overshoot
        with pytest.raises(PositivityLossError):
            step_n(state, dt, reaction, pos_scale=1.0)
        with pytest.raises(PositivityLossError):
            step_n(state, dt, reaction)

    def test_positivity_scales(self, domain2d):
        """기준 크기는 max(1, |n0|_inf), max(1, |c0|_inf) 테스트"""
        assert positivity_scales(make_state(domain2d, 3.0, 0.5)) == (3.0, 1.0)
        assert positivity_scales(make_state(domain2d, 0.2, 7.5)) == (1.0, 7.5)

    def test_cfl_violation(self, domain2d):
        """큰 속도에서 CFLViolationError 테스트"""
        state = smooth_state(domain2d, amplitude=50.0)
        with pytest.raises(CFLViolationError):
            step_n(state, 0.01, REACTION, implicit_diffusion=True)

    def test_explicit_diffusion_limit(self, domain2d):
        """명시적 확산 한계 초과 dt 거부 테스트"""
        h = domain2d.h_min
        with pytest.raises(CFLViolationError):
            step_n(make_state(domain2d, 1.0, 1.0), 1.01 * h * h / 4, REACTION)

    def test_eps_consistency(self, domain2d):
        """|step_n(eps) - step_n(eps/10)|_inf 가 eps 에 대해 약 10배씩 감소"""
        state = smooth_state(domain2d)
        outputs = [
            step_n(state, DT, ReactionParams(chi=1.0, kappa=1.0, mu=2.0, eps=eps)).n.values
            for eps in (1e-2, 1e-3, 1e-4, 1e-5)
        ]
        d = [float(np.abs(a - b).max()) for a, b in zip(outputs, outputs[1:])]
        assert 8.0 <= d[0] / d[1] <= 12.0
        assert 8.0 <= d[1] / d[2] <= 12.0


class TestStepC:
    """산소 농도 스텝 테스트"""

    def test_no_consumption(self, domain2d):
        """n = 0 이면 c 불변 테스트"""
        state = make_state(domain2d, 0.0, 0.8)
        assert step_c(state, DT, REACTION).equals(state.c)

    def test_uniform_decay(self, domain2d):
        """균일 상태의 지수 감쇠 테스트"""
        state = make_state(domain2d, 2.0, 0.8)
        dt = 1e-2
        out = step_c(state, dt, REACTION, implicit_diffusion=True)
        expected = 0.8 * math.exp(-dt * math.log1p(REACTION.eps * 2.0) / REACTION.eps)
        np.testing.assert_allclose(out.values, expected, rtol=1e-14)

    @pytest.mark.parametrize("implicit", [False, True])
    def test_sup_norm_nonincreasing(self, domain2d, implicit):
        """여러 스텝 동안 sup c 비증가와 비음수 테스트"""
        state = smooth_state(domain2d)
        for _ in range(5):
            new_c = step_c(state, DT, REACTION, implicit_diffusion=implicit)
            assert new_c.max() <= state.c.max() * (1 + 1e-12)
            assert new_c.min() >= 0.0
            state = SimState(n=state.n, c=new_c, u=state.u, P=state.P, t=state.t + DT, eps=state.eps)
