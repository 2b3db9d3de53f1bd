"""
전역 의존성 관리 (환경변수 설정, 로깅)
"""
import logging
import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# 환경변수 로드
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseModel):
    """프로세스 단위 설정"""
    output_dir: str = "runs"
    log_level: str = "INFO"
    max_api_cells: int = Field(default=4096, ge=16)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings(
        output_dir=os.getenv("CHEMOFLOW_OUTPUT_DIR", "runs"),
        log_level=os.getenv("CHEMOFLOW_LOG_LEVEL", "INFO"),
        max_api_cells=int(os.getenv("CHEMOFLOW_MAX_API_CELLS", "4096")),
    )


def configure_logging(level: str | None = None) -> None:
    """루트 로거에 스트림 핸들러 하나만 설치"""
    level_name = (level or get_settings().log_level).upper()
    root = logging.getLogger()
    if not any(getattr(h, "_chemoflow", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._chemoflow = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))
