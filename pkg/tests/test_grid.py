import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import InitialDataError, NonFiniteFieldError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import ProfileSpec, VelocitySpec
from app.services.grid import field_shapes, init_state, make_domain, vortex_field
from app.services.operators import divergence_faces_to_cells, divergence_tolerance


class TestMakeDomain:
    """Domain 생성/검증 테스트"""

    def test_spacing_2d(self):
        """(2, [1,1], [8,8]) -> h = 0.125"""
        domain = make_domain(2, [1, 1], [8, 8])
        assert domain.spacing == (0.125, 0.125)
        assert domain.volume == 1.0
        assert domain.n_cells == 64

    def test_spacing_3d(self):
        """3D 영역 간격과 부피 테스트"""
        domain = make_domain(3, [2, 1, 1], [16, 8, 8])
        assert domain.spacing == (0.125, 0.125, 0.125)
        assert domain.volume == 2.0

    @pytest.mark.parametrize("dim, lengths, cells", [
        (2, [1, 1], [2, 8]),
        (2, [1, -1], [8, 8]),
        (2, [1, 0], [8, 8]),
        (4, [1, 1, 1, 1], [8, 8, 8, 8]),
        (2, [1, 1, 1], [8, 8]),
    ])
    def test_rejects_invalid(self, dim, lengths, cells):
        """셀 수 < 4, 비양수 길이, 잘못된 차원은 거부"""
        with pytest.raises(ValidationError):
            make_domain(dim, lengths, cells)

    def test_face_shapes(self, domain2d):
        """면 배열과 내부 면 배열 모양 테스트"""
        assert domain2d.face_shape(0) == (17, 16)
        assert domain2d.face_shape(1) == (16, 17)
        assert domain2d.interior_face_shape(1) == (16, 15)


class TestFields:
    """필드 컨테이너 불변조건 테스트"""

    def test_values_are_read_only_copies(self, domain2d):
        """필드 값이 읽기 전용 복사본인지 테스트"""
        source = np.ones(domain2d.shape)
        f = ScalarField(domain2d, source)
        source[0, 0] = 5.0
        assert f.values[0, 0] == 1.0
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0

    def test_rejects_non_finite(self, domain2d):
        """NaN 포함 필드 거부 테스트"""
        values = np.ones(domain2d.shape)
        values[3, 3] = np.nan
        with pytest.raises(NonFiniteFieldError):
            ScalarField(domain2d, values)

    def test_rejects_wrong_shape(self, domain2d):
        """모양이 다른 배열 거부 테스트"""
        with pytest.raises(ValueError):
            ScalarField(domain2d, np.ones((8, 8)))

    def test_no_slip_is_enforced(self, domain2d):
        """경계 법선 면 값이 0 이 아니면 거부"""
        comps = [np.zeros(domain2d.face_shape(a)) for a in range(2)]
        comps[0][0, 5] = 1e-300
        with pytest.raises(ValueError):
            VectorField(domain2d, tuple(comps))

    def test_arithmetic_is_exact(self, domain2d):
        """필드 산술이 배열 산술과 비트 일치하는지 테스트"""
        rng = np.random.default_rng(3)
        a = ScalarField(domain2d, rng.normal(size=domain2d.shape))
        b = ScalarField(domain2d, rng.normal(size=domain2d.shape))
        assert np.array_equal((a + b).values, a.values + b.values)
        assert np.array_equal((2.0 * a).values, a.values * 2.0)
        u = vortex_field(domain2d, 1.0)
        assert (u - u).max_abs() == 0.0
        assert (u * 3.0).bc == "noslip"

    def test_sim_state_rejects_negative_time(self, domain2d):
        """음수 시각 상태 거부 테스트"""
        zero = ScalarField.zeros(domain2d)
        with pytest.raises(ValueError):
            SimState(n=zero, c=zero, u=VectorField.zeros(domain2d), P=zero, t=-1.0, eps=1e-3)


class TestVortexField:
    """와류 속도장 테스트"""

    @pytest.mark.parametrize("dim, lengths, cells", [
        (2, [1, 1], [16, 16]),
        (2, [1, 1], [64, 64]),
        (2, [1, 1.5], [10, 12]),
        (3, [1, 1, 1], [8, 8, 8]),
        (3, [2, 1, 1], [16, 8, 8]),
    ])
    def test_builds_on_any_domain(self, dim, lengths, cells):
        """정사각/직사각/3D 영역에서 경계 면이 정확히 0 인 비발산장 생성 테스트"""
        domain = make_domain(dim, lengths, cells)
        u = vortex_field(domain, 0.5)
        for axis, comp in enumerate(u.components):
            assert not np.take(comp, 0, axis=axis).any()
            assert not np.take(comp, -1, axis=axis).any()
        assert u.max_abs() == pytest.approx(0.5, rel=1e-12)
        assert divergence_faces_to_cells(u).max_abs() <= divergence_tolerance(u)

    def test_zero_amplitude(self, domain2d):
        """진폭 0 이면 0 속도장 테스트"""
        assert vortex_field(domain2d, 0.0).max_abs() == 0.0


class TestInitState:
    """초기 상태 구성 테스트"""

    def test_constant_profiles(self, make_params):
        """n0 = c0 = 1, u0 = 0 -> int n = volume, div u = 0"""
        params = make_params()
        state = init_state(params.domain, params)
        assert state.t == 0.0
        assert state.n.integral() == pytest.approx(params.domain.volume, rel=1e-14)
        assert divergence_faces_to_cells(state.u).max_abs() == 0.0
        assert state.P.max_abs() == 0.0
        assert state.eps == params.reaction.eps

    def test_random_profile_is_deterministic(self, make_params):
        """n0 = 1 + 0.1 xi(seed=7): min > 0.9, 같은 시드는 같은 상태"""
        params = make_params(initial={"n": {"kind": "random", "value": 1.0, "amplitude": 0.1, "seed": 7}})
        first = init_state(params.domain, params)
        second = init_state(params.domain, params)
        assert first.n.min() > 0.9
        assert first.equals(second)

    def test_seed_changes_state(self, make_params):
        """시드가 다르면 초기 상태가 다른지 테스트"""
        a = make_params(initial={"n": {"kind": "random", "amplitude": 0.1}}, seed=1)
        b = make_params(initial={"n": {"kind": "random", "amplitude": 0.1}}, seed=2)
        assert not init_state(a.domain, a).n.equals(init_state(b.domain, b).n)

    def test_rejects_nonpositive_c(self, make_params):
        """진폭 0 의 bump(value 0) 는 c0 > 0 을 만족하지 못함"""
        params = make_params()
        with pytest.raises(InitialDataError):
            init_state(params.domain, params, c0_spec=ProfileSpec(kind="bump", value=0.0, amplitude=0.0))

    def test_rejects_nonpositive_n(self, make_params):
        """0 이하 값이 섞인 n0 거부 테스트"""
        params = make_params()
        with pytest.raises(InitialDataError):
            init_state(params.domain, params, n0_spec=ProfileSpec(kind="random", value=0.05, amplitude=0.1, seed=1))

    @pytest.mark.parametrize("kind", ["vortex", "random"])
    def test_velocity_is_projected(self, make_params, kind):
        """초기 속도장 사영과 진폭 테스트"""
        params = make_params()
        state = init_state(params.domain, params, u0_spec=VelocitySpec(kind=kind, amplitude=0.1, seed=4))
        div = divergence_faces_to_cells(state.u).max_abs()
        assert div <= divergence_tolerance(state.u)
        assert state.u.max_abs() == pytest.approx(0.1, rel=1e-6)

    def test_random_velocity_3d(self, make_params):
        """3D 무작위 초기 속도장 발산 테스트"""
        params = make_params(domain={"dim": 3, "lengths": (1.0, 1.0, 1.0), "cells": (8, 8, 8)},
                             initial={"u": {"kind": "random", "amplitude": 0.1}})
        state = init_state(params.domain, params)
        assert divergence_faces_to_cells(state.u).max_abs() <= divergence_tolerance(state.u)

    def test_field_shapes_order(self, domain2d):
        """스냅샷 페이로드 배열 순서 테스트"""
        assert field_shapes(domain2d) == ((16, 16), (16, 16), (17, 16), (16, 17), (16, 16))
