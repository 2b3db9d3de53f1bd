"""
chemoflow 예외 계층

수치 스킴 오류, 선형 해법 오류, 설정/입출력 오류를 구분한다.
CLI 종료 코드와 HTTP 상태 코드는 이 분류를 기준으로 매핑된다.
"""
from typing import List, Optional


class ChemoflowError(Exception):
    """chemoflow 최상위 예외"""


class ConfigError(ChemoflowError, ValueError):
    """설정 파싱/검증 실패 (키 경로별 메시지 포함)"""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        self.errors = list(errors or [])
        if self.errors:
            message = message + "\n" + "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(message)


class InitialDataError(ChemoflowError, ValueError):
    """초기 조건이 양수성/비발산 조건을 만족하지 않음"""


class NonpositiveDensityError(ChemoflowError, ValueError):
    """G 범함수 계산 시 min(n) <= 0 (kappa > 0)"""


class InfeasibleParamsError(ChemoflowError, ValueError):
    """y 범함수 파라미터 탐색 실패"""


class SolverError(ChemoflowError):
    """선형 해법 실패"""


class IncompatibleRHSError(SolverError):
    """Neumann Poisson 우변의 평균이 0이 아님"""


class NoConvergenceError(SolverError):
    """반복 해법이 max_iter 안에 수렴하지 않음"""


class SchemeError(ChemoflowError):
    """시간 적분 스킴이 보장하는 성질이 깨짐"""


class CFLViolationError(SchemeError):
    """dt 가 안정성 한계를 넘음"""


class PositivityLossError(SchemeError):
    """n 또는 c 가 -pos_tol 아래로 내려감"""

    def __init__(self, message: str, field: str = "n"):
        super().__init__(message)
        self.field = field


class MonotonicityLossError(SchemeError):
    """max(c) 가 한 스텝 동안 증가함"""


class InvariantViolationError(ChemoflowError):
    """스텝 후 불변조건 위반 (violations 목록 포함)"""

    def __init__(self, violations):
        self.violations = list(violations)
        names = ", ".join(sorted({v.invariant for v in self.violations}))
        super().__init__(f"{len(self.violations)} invariant violation(s): {names}")


class NonFiniteFieldError(SchemeError, ValueError):
    """필드에 NaN/Inf 가 포함됨"""


class SnapshotError(ChemoflowError):
    """CHFL 스냅샷 입출력 오류"""


class SnapshotFormatError(SnapshotError):
    """매직 바이트/헤더 불일치"""


class UnsupportedVersionError(SnapshotError):
    """지원하지 않는 포맷 버전"""


class ChecksumMismatchError(SnapshotError):
    """CRC-32 불일치 또는 잘린 파일"""
