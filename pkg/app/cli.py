"""
chemoflow 명령행 진입점

    python -m app run <config>           전체 시뮬레이션
    python -m app oracle --kappa 1 ...   균일 해 출력
    python -m app eps-study <config>     eps 가족 수렴 검사
    python -m app check <records.csv>    기록 오프라인 재검사
    python -m app resume <checkpoint>    체크포인트에서 재시작
    python -m app serve                  HTTP API

종료 코드: 0 정상, 2 불변조건 위반, 3 설정 오류, 4 해법 실패
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from app.dependencies import configure_logging, get_settings
from app.exceptions import (
    ConfigError,
    InfeasibleParamsError,
    InitialDataError,
    SnapshotError,
    SolverError,
)
from app.models.params import RunConfig
from app.models.records import RunResult, Violation
from app.services.diagnostics import check_records
from app.services.simulation import epsilon_study, homogeneous_oracle, resume, run_config
from app.utils.config_parser import parse_config
from app.utils.records_csv import read_records

logger = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_VIOLATION = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4

_STATUS_CODES = {"clean": EXIT_CLEAN, "invariant_violation": EXIT_VIOLATION, "solver_failure": EXIT_SOLVER}


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemoflow", description="regularized chemotaxis-Navier-Stokes simulator")
    parser.add_argument("--log-level", default=None, help="logging level (default: CHEMOFLOW_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None, help="overrides run.output_dir (default: CHEMOFLOW_OUTPUT_DIR/<scenario>)")

    p_oracle = sub.add_parser("oracle", help="print the homogeneous oracle (n(t), c(t))")
    p_oracle.add_argument("--n0", type=float, default=1.0)
    p_oracle.add_argument("--c0", type=float, default=1.0)
    p_oracle.add_argument("--eps", type=float, default=1e-3)
    p_oracle.add_argument("--t", type=float, required=True)
    p_oracle.add_argument("--kappa", type=float, required=True)
    p_oracle.add_argument("--mu", type=float, required=True)

    p_eps = sub.add_parser("eps-study", help="run the same scenario for a decreasing eps family")
    p_eps.add_argument("config")
    p_eps.add_argument("--eps", type=_float_list, default=[1e-1, 1e-2, 1e-3, 1e-4])
    p_eps.add_argument("--workers", type=int, default=1)

    p_check = sub.add_parser("check", help="re-check a records CSV offline")
    p_check.add_argument("records")
    p_check.add_argument("--config", default=None, help="enables the parameter-dependent checks")

    p_resume = sub.add_parser("resume", help="continue a run from a checkpoint")
    p_resume.add_argument("checkpoint")

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def _print_violations(violations: Sequence[Violation]) -> None:
    for v in violations:
        print(f"VIOLATION t={v.t:.6g} {v.invariant}: {v.detail}")


def _finish(result: RunResult) -> int:
    _print_violations(result.violations)
    final = result.final_state
    if final is not None:
        print(f"status={result.status} t={final.t:.6g} samples={len(result.records)} wall={result.wall_time:.1f}s")
    else:
        print(f"status={result.status}")
    if result.error:
        print(f"error: {result.error}")
    return _STATUS_CODES[result.status]


def resolve_output_dir(config: RunConfig, override: Optional[str] = None) -> RunConfig:
    """--output-dir > run.output_dir > CHEMOFLOW_OUTPUT_DIR/<scenario>"""
    if override is not None:
        target = override
    elif config.output_dir:
        return config
    else:
        target = str(Path(get_settings().output_dir) / config.scenario)
    return config.model_copy(update={"output_dir": target})


def _cmd_run(args) -> int:
    config = resolve_output_dir(parse_config(args.config), args.output_dir)
    return _finish(run_config(config))


def _cmd_oracle(args) -> int:
    n, c = homogeneous_oracle(args.n0, args.c0, args.eps, args.t, args.kappa, args.mu)
    print(f"n = {n:.10g}")
    print(f"c = {c:.10g}")
    return EXIT_CLEAN


def _cmd_eps_study(args) -> int:
    config = parse_config(args.config)
    study = epsilon_study(config.params, args.eps, max_workers=args.workers)
    for name, values in study.distances.items():
        marker = "decreasing" if study.decreasing[name] else "NOT decreasing"
        print(f"{name}: " + " ".join(f"{d:.6e}" for d in values) + f"  ({marker}, floor {study.floors[name]:.1e})")
    _print_violations(study.violations)
    return EXIT_VIOLATION if study.violations else EXIT_CLEAN


def _cmd_check(args) -> int:
    records = read_records(args.records)
    params = parse_config(args.config).params if args.config else None
    violations = check_records(records, params)
    _print_violations(violations)
    print(f"{len(records)} records, {len(violations)} violations")
    return EXIT_VIOLATION if violations else EXIT_CLEAN


def _cmd_resume(args) -> int:
    return _finish(resume(args.checkpoint))


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_CLEAN


_COMMANDS = {
    "run": _cmd_run,
    "oracle": _cmd_oracle,
    "eps-study": _cmd_eps_study,
    "check": _cmd_check,
    "resume": _cmd_resume,
    "serve": _cmd_serve,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or get_settings().log_level)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InfeasibleParamsError, InitialDataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (SnapshotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(cli_main())
