#!/usr/bin/env python3
"""
수용 시나리오 실행 스크립트
- scenarios/*.conf 를 실행하고 각 기준의 통과 여부를 출력
- 사용: python scripts/run_acceptance.py [--only a1,a7] [--workers 4]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from app.cli import resolve_output_dir  # noqa: E402
from app.dependencies import configure_logging  # noqa: E402
from app.services.simulation import epsilon_study, homogeneous_oracle, run_config  # noqa: E402
from app.utils.config_parser import parse_config  # noqa: E402

SCENARIOS = ROOT / "scenarios"


def load(name: str):
    return resolve_output_dir(parse_config(SCENARIOS / f"{name}.conf"))


def report(label: str, ok: bool, detail: str = "") -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label} {detail}")
    return ok


def check_steady_state(name: str, check_limits: bool = True) -> bool:
    config = load(name)
    result = run_config(config)
    for v in result.violations:
        print(f"    {v.invariant} at t={v.t:.4g}: {v.detail}")
    ok = report(f"{name}: run", result.status == "clean", f"status={result.status} wall={result.wall_time:.0f}s")
    if check_limits and result.status == "clean":
        state = result.final_state
        r = config.params.reaction
        dn = float(abs(state.n.values - r.equilibrium).max())
        ok &= report(f"{name}: |n - kappa/mu|_inf <= 1e-2", dn <= 1e-2, f"({dn:.3e})")
        ok &= report(f"{name}: |c|_inf <= 1e-3", state.c.max_abs() <= 1e-3, f"({state.c.max_abs():.3e})")
        ok &= report(f"{name}: |u|_inf <= 1e-3", state.u.max_abs() <= 1e-3, f"({state.u.max_abs():.3e})")
    return ok


def oracle_errors(config):
    params = config.params
    r = params.reaction
    result = run_config(config)
    n0 = params.initial.n.value
    c0 = params.initial.c.value
    err_n = err_c = 0.0
    for rec in result.records:
        n_exact, c_exact = homogeneous_oracle(n0, c0, r.eps, rec.t, r.kappa, r.mu)
        err_n = max(err_n, abs(rec.max_n - n_exact))
        err_c = max(err_c, abs(rec.sup_c - c_exact))
    return result, err_n, err_c


def check_homogeneous() -> bool:
    config = load("a7")
    params = config.params
    dt = params.cfl_safety * params.dt_max
    coarse, err_n, err_c = oracle_errors(config)
    half = config.model_copy(update={
        "params": params.model_copy(update={"dt_max": params.dt_max / 2}),
        "output_dir": config.output_dir + "_half",
    })
    _, _, err_c_half = oracle_errors(half)
    ok = report("a7: run", coarse.status == "clean", f"status={coarse.status}")
    ok &= report("a7: max |n - oracle| <= 3 dt", err_n <= 3 * dt, f"({err_n:.3e})")
    ratio = err_c / err_c_half if err_c_half > 0 else float("inf")
    ok &= report("a7: error ratio dt -> dt/2 in [1.7, 2.3]", 1.7 <= ratio <= 2.3, f"({ratio:.3f})")
    final_n = coarse.records[-1].max_n
    ok &= report("a7: n(40) within 1e-4 of 0.5", abs(final_n - 0.5) <= 1e-4, f"({final_n:.8f})")
    return ok


def check_eps_study(workers: int) -> bool:
    config = load("a8")
    study = epsilon_study(config.params, [1e-1, 1e-2, 1e-3, 1e-4], max_workers=workers)
    ok = True
    for name, values in study.distances.items():
        ok &= report(f"a8: d_j decreasing for {name}", study.decreasing[name],
                     "(" + ", ".join(f"{d:.3e}" for d in values) + ")")
    return ok


def main() -> int:
    parser = argparse.ArgumentParser(description="run the acceptance scenarios")
    parser.add_argument("--only", default="a1,a1_3d,a7,a8,a10")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    configure_logging("WARNING")

    selected = [s.strip() for s in args.only.split(",") if s.strip()]
    ok = True
    for name in selected:
        print(f"== {name}")
        if name == "a7":
            ok &= check_homogeneous()
        elif name == "a8":
            ok &= check_eps_study(args.workers)
        elif name == "a1_3d":
            ok &= check_steady_state(name, check_limits=False)
        else:
            ok &= check_steady_state(name)
    print("ALL PASS" if ok else "SOME CRITERIA FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
