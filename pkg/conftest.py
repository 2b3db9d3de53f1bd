import pytest
from dotenv import load_dotenv
from fastapi.testclient import TestClient

from app.main import app
from app.models.params import Domain, SimParams

# 환경변수 로드
load_dotenv()


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="데스크 규모 수용 실행 포함")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 데스크 규모 수용 실행 (--run-slow 필요)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="--run-slow 옵션이 필요합니다")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def client():
    """FastAPI 테스트 클라이언트"""
    return TestClient(app)


@pytest.fixture
def domain2d():
    return Domain(dim=2, lengths=(1.0, 1.0), cells=(16, 16))


@pytest.fixture
def domain3d():
    return Domain(dim=3, lengths=(1.0, 1.0, 1.0), cells=(8, 8, 8))


@pytest.fixture
def make_params():
    """중첩 dict 로 덮어쓸 수 있는 소규모 SimParams 생성기"""
    def _make(**overrides) -> SimParams:
        data = {
            "domain": {"dim": 2, "lengths": (1.0, 1.0), "cells": (16, 16)},
            "reaction": {"chi": 1.0, "kappa": 1.0, "mu": 1.0, "eps": 1e-3},
            "t_end": 1.0,
            "sample_every": 0.5,
            "implicit_diffusion": True,
        }
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return SimParams.model_validate(data)
    return _make
