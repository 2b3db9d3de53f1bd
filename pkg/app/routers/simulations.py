from fastapi import APIRouter, HTTPException

from app.exceptions import ChemoflowError, ConfigError
from app.models.api import (
    CheckRequest,
    CheckResponse,
    OracleRequest,
    OracleResponse,
    RunRequest,
    RunResponse,
    YParamsRequest,
)
from app.models.params import YParams
from app.services.simulation_service import SimulationService

router = APIRouter(tags=["Simulations"])
simulation_service = SimulationService()


@router.post("/oracle", response_model=OracleResponse)
async def oracle(request: OracleRequest):
    """
    공간 균일 해 (n(t), c(t))
    - 로지스틱 닫힌 해 + 소비 적분 구적
    """
    try:
        return await simulation_service.oracle(request)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/y-params", response_model=YParams)
async def y_params(request: YParamsRequest):
    """y 범함수 상수 (theta, eta, k1) 선택"""
    try:
        return await simulation_service.y_params(request)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/runs", response_model=RunResponse)
async def create_run(request: RunRequest):
    """
    설정 텍스트로 소규모 시뮬레이션 실행
    - 설정 오류: 422 (키 경로별 메시지)
    - 격자 크기 초과: 400
    - 해법 실패는 status = solver_failure 로 응답
    """
    try:
        return await simulation_service.run(request)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.errors or [str(e)])
    except (ValueError, ChemoflowError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/records/check", response_model=CheckResponse)
async def check_records(request: CheckRequest):
    """CSV 기록을 오프라인 불변조건으로 재검사"""
    try:
        return await simulation_service.check(request)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.errors or [str(e)])
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail="Internal server error")
