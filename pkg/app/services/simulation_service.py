"""
HTTP 계층에서 쓰는 시뮬레이션 서비스 (무거운 계산은 스레드풀에서 실행)
"""
import logging
from typing import Optional

from fastapi.concurrency import run_in_threadpool

from app.dependencies import Settings, get_settings
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
from app.services.diagnostics import check_records, select_y_params
from app.services.simulation import homogeneous_oracle, run
from app.utils.config_parser import parse_config_text
from app.utils.records_csv import parse_records

logger = logging.getLogger(__name__)


class SimulationService:
    """오라클, y 파라미터, 소규모 실행, 기록 검사"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    async def oracle(self, request: OracleRequest) -> OracleResponse:
        n, c = homogeneous_oracle(request.n0, request.c0, request.eps, request.t, request.kappa, request.mu)
        return OracleResponse(n=n, c=c)

    async def y_params(self, request: YParamsRequest) -> YParams:
        return select_y_params(request.p, request.chi, request.kappa, request.mu,
                               volume=request.volume, K=request.K, B=request.B)

    async def run(self, request: RunRequest) -> RunResponse:
        """
        설정 텍스트로 실행 (파일 출력 없음)
        - 셀 수가 CHEMOFLOW_MAX_API_CELLS 를 넘으면 거부
        """
        config = parse_config_text(request.config)
        cells = config.params.domain.n_cells
        if cells > self.settings.max_api_cells:
            raise ValueError(f"grid has {cells} cells; the API accepts at most {self.settings.max_api_cells}")
        logger.info("API run requested: scenario %s, %d cells", config.scenario, cells)
        result = await run_in_threadpool(run, config.params)
        return RunResponse(
            status=result.status,
            t=result.final_state.t if result.final_state is not None else 0.0,
            wall_time=result.wall_time,
            records=[rec.numeric_items() | {"clamp_flags": rec.clamp_flags} for rec in result.records],
            violations=result.violations,
            error=result.error,
        )

    async def check(self, request: CheckRequest) -> CheckResponse:
        records = parse_records(request.records_csv)
        params = parse_config_text(request.config).params if request.config else None
        return CheckResponse(n_records=len(records), violations=check_records(records, params))
