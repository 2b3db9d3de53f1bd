"""
시뮬레이션 드라이버

- cfl_dt / step / advance: u -> c -> n 분할 스텝 (순서는 params.substep_order)
- run: 샘플 주기 진단, 온라인 불변조건 검사, 스냅샷/체크포인트/재시작
- epsilon_study: 정규화 eps 가족의 L2 Cauchy 감소 검사
- homogeneous_oracle: 공간 균일 해의 준해석해
"""
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from scipy.integrate import quad

from app.exceptions import (
    InvariantViolationError,
    MonotonicityLossError,
    PositivityLossError,
    SchemeError,
    SolverError,
)
from app.models.fields import SimState
from app.models.params import RunConfig, SimParams
from app.models.records import DiagnosticsRecord, EpsilonStudyResult, RunResult, Violation
from app.services.chemotaxis import consumption_rate, positivity_scales, step_c, step_n, transport_speed
from app.services.diagnostics import InvariantMonitor, record, y_params_for
from app.services.fluid import kinetic_energy_balance, momentum_step
from app.services.grid import init_state
from app.utils.config_parser import dump_config, parse_config_text
from app.utils.records_csv import write_records
from app.utils.snapshot import read_snapshot, write_snapshot

logger = logging.getLogger(__name__)

_TINY = 1e-30
MASS_BALANCE_RTOL = 1e-10
SIDECAR_SUFFIX = ".json"
# eps 연구에서 이 배율 x 필드 크기 이하의 거리는 반올림 수준으로 본다
CAUCHY_FLOOR = 1e-12
CHECKPOINT_VERSION = 2


# ---------------------------------------------------------------------------
# 한 스텝
# ---------------------------------------------------------------------------

def cfl_dt(state: SimState, params: SimParams) -> float:
    """safety * min(h/(수송 속도), h^2/(2 dim) [명시적 확산], dt_max)"""
    domain = state.domain
    h = domain.h_min
    limits = [h / (transport_speed(state, params.reaction) + _TINY), params.dt_max]
    if not params.implicit_diffusion:
        limits.append(h * h / (2 * domain.dim))
    return params.cfl_safety * min(limits)


@dataclass
class StepResult:
    state: SimState
    dt: float
    mass_residual: float = 0.0
    violations: List[Violation] = field(default_factory=list)


def step(
    state: SimState,
    params: SimParams,
    dt: Optional[float] = None,
    pos_scales: Optional[Tuple[float, float]] = None,
) -> StepResult:
    """
    한 스텝 전진. 각 부분 스텝은 가장 최근 필드를 본다
    - pos_scales: 초기 자료에서 정한 (n, c) 양수성 허용 기준. 없으면 입력 상태로 정한다
    """
    if dt is None:
        dt = cfl_dt(state, params)
    if not dt > 0:
        raise ValueError("dt must be > 0")
    reaction = params.reaction
    t_new = state.t + dt
    n_scale, c_scale = pos_scales if pos_scales is not None else positivity_scales(state)
    violations: List[Violation] = []
    mass_residual = 0.0

    current = state
    for stage in params.substep_order:
        if stage == "u":
            result = momentum_step(current, dt, params.forcing, params.solver, params.buoyancy_demeaned)
            if result.divergence > result.div_tol:
                violations.append(Violation(t=t_new, invariant="divergence_free",
                                            detail=f"max |div u| = {result.divergence:.3e} > {result.div_tol:.3e}"))
            current = replace(current, u=result.velocity, P=result.pressure)
        elif stage == "c":
            current = replace(current, c=step_c(current, dt, reaction, params.implicit_diffusion, c_scale))
        else:
            update = step_n(current, dt, reaction, params.implicit_diffusion, params.reaction_enabled, n_scale)
            mass_residual = update.mass_residual
            current = replace(current, n=update.n)
    new_state = replace(current, t=t_new)

    mass = abs(new_state.n.integral())
    if mass_residual > MASS_BALANCE_RTOL * max(mass, _TINY):
        violations.append(Violation(t=t_new, invariant="mass_balance",
                                    detail=f"residual {mass_residual:.3e} > 1e-10 x int n = {mass:.6g}"))
    p_mean = new_state.P.mean()
    if abs(p_mean) > 1e-12 * max(1.0, new_state.P.max_abs()):
        violations.append(Violation(t=t_new, invariant="pressure_mean_zero", detail=f"mean P = {p_mean:.3e}"))
    return StepResult(state=new_state, dt=dt, mass_residual=mass_residual, violations=violations)


def advance(state: SimState, params: SimParams, violations: Optional[List[Violation]] = None) -> SimState:
    """
    cfl_dt 로 한 스텝 전진한 상태
    - 스텝 불변조건 위반은 violations 에 덧붙인다. 목록이 없고 위반이 있으면 InvariantViolationError
    - PositivityLossError 는 그대로 올라간다
    """
    result = step(state, params)
    if violations is not None:
        violations.extend(result.violations)
    elif result.violations:
        raise InvariantViolationError(result.violations)
    return result.state


# ---------------------------------------------------------------------------
# 균일 해
# ---------------------------------------------------------------------------

def homogeneous_oracle(n0: float, c0: float, eps: float, t: float, kappa: float, mu: float) -> Tuple[float, float]:
    """
    u = 0, 공간 균일 자료의 (n(t), c(t))
    - n: 로지스틱 방정식의 닫힌 해
    - c: c0 exp(-int_0^t ln(1 + eps n)/eps ds), 적응 구적 (상대 1e-12)
    """
    if not (n0 > 0 and c0 > 0):
        raise ValueError("homogeneous oracle requires n0 > 0 and c0 > 0")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if not mu > 0 or kappa < 0:
        raise ValueError("requires kappa >= 0 and mu > 0")
    if t < 0:
        raise ValueError("t must be >= 0")

    def density(s: float) -> float:
        if kappa == 0:
            return n0 / (1.0 + mu * n0 * s)
        return kappa * n0 / (mu * n0 + (kappa - mu * n0) * math.exp(-kappa * s))

    if t == 0:
        return n0, c0
    consumed, _ = quad(lambda s: consumption_rate(density(s), eps), 0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)
    return density(t), c0 * math.exp(-consumed)


# ---------------------------------------------------------------------------
# 시간 루프
# ---------------------------------------------------------------------------

def _crossed(t_prev: float, t_now: float, every: float) -> bool:
    return math.floor(t_now / every + 1e-9) > math.floor(t_prev / every + 1e-9)


class SimulationRunner:
    """상태, 모니터, 기록, 출력 주기를 묶은 시간 루프"""

    def __init__(self, params: SimParams, config: Optional[RunConfig] = None):
        self.params = params
        self.config = config
        self.output_dir = Path(config.output_dir) if config is not None and config.output_dir else None
        self.yp = y_params_for(params)
        self.state: Optional[SimState] = None
        self.pos_scales: Optional[Tuple[float, float]] = None
        self.monitor: Optional[InvariantMonitor] = None
        self.records: List[DiagnosticsRecord] = []
        self.violations: List[Violation] = []
        self.sample_index = 0
        self.steps = 0
        self.energy_residual_max = 0.0

    @property
    def n_samples(self) -> int:
        return math.ceil(self.params.t_end / self.params.sample_every - 1e-12)

    def target_time(self, index: int) -> float:
        if index >= self.n_samples:
            return self.params.t_end
        return index * self.params.sample_every

    # -- 시작 / 재시작 -----------------------------------------------------

    def start(self) -> None:
        self.state = init_state(self.params.domain, self.params)
        self.pos_scales = positivity_scales(self.state)
        self.monitor = InvariantMonitor(self.params, self.state, self.yp)
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            (self.output_dir / "config.conf").write_text(dump_config(self.config), encoding="utf-8")
        self._sample()

    def restore(self, state: SimState, sidecar: Dict[str, Any]) -> None:
        self.state = state
        self.pos_scales = tuple(sidecar["pos_scales"])
        self.monitor = InvariantMonitor(self.params, state, self.yp)
        self.monitor.load_state_dict(sidecar["monitor"])
        self.records = [DiagnosticsRecord(**r) for r in sidecar["records"]]
        self.violations = [Violation(**v) for v in sidecar["violations"]]
        self.sample_index = sidecar["sample_index"]
        self.steps = sidecar["steps"]
        self.energy_residual_max = sidecar["energy_residual_max"]

    # -- 샘플 / 스텝 --------------------------------------------------------

    def _report(self, found: List[Violation]) -> None:
        for v in found:
            logger.warning("violation at t = %.6g: %s (%s)", v.t, v.invariant, v.detail)
        self.violations.extend(found)

    def _sample(self) -> None:
        state = self.state
        anchor = self.monitor.update_anchor(state)
        rec = record(state, self.params, self.yp, anchor)
        self._report(self.monitor.observe(rec))
        self._report(self.monitor.check_oxygen_budget(state))
        self.records.append(rec)
        logger.debug("t = %.4f  int n = %.6g  sup c = %.3e  |u| = %.3e  F = %.6g",
                     rec.t, rec.mass_n, rec.sup_c, state.u.max_abs(), rec.F)

    def _step_to(self, target: float) -> None:
        params = self.params
        while self.state.t < target:
            before = self.state
            dt = cfl_dt(before, params)
            landing = dt >= target - before.t
            if landing:
                dt = target - before.t
            result = step(before, params, dt, self.pos_scales)
            after = replace(result.state, t=target) if landing else result.state
            self._report(result.violations)

            dissipating = after if params.implicit_diffusion else before
            self._report(self.monitor.accumulate_step(before.t, dt, before, dissipating))
            if params.track_energy_balance:
                residual = kinetic_energy_balance(before, after, dt, params.forcing, params.buoyancy_demeaned)
                self.energy_residual_max = max(self.energy_residual_max, residual)
            self.state = after
            self.steps += 1

    def _write_outputs(self, t_prev: float) -> None:
        if self.output_dir is None:
            return
        t = self.state.t
        last = self.sample_index >= self.n_samples
        if last or _crossed(t_prev, t, self.config.record_every):
            write_records(self.records, self.output_dir / "records.csv", self.params.lp_exponents)
        if _crossed(t_prev, t, self.config.snapshot_every):
            write_snapshot(self.state, self.output_dir / f"snapshot_{self.sample_index:06d}.chfl")
        if not last and _crossed(t_prev, t, self.config.checkpoint_every):
            self.write_checkpoint(self.output_dir / f"checkpoint_{self.sample_index:06d}.chfl")

    def write_checkpoint(self, path: Path) -> None:
        write_snapshot(self.state, path)
        sidecar = {
            "version": CHECKPOINT_VERSION,
            "config": dump_config(self.config),
            "sample_index": self.sample_index,
            "steps": self.steps,
            "energy_residual_max": self.energy_residual_max,
            "pos_scales": list(self.pos_scales),
            "records": [r.model_dump() for r in self.records],
            "violations": [v.model_dump() for v in self.violations],
            "monitor": self.monitor.state_dict(),
        }
        Path(str(path) + SIDECAR_SUFFIX).write_text(json.dumps(sidecar), encoding="utf-8")
        logger.info("checkpoint written: %s (t = %.6g)", path, self.state.t)

    def loop(self) -> None:
        while self.sample_index < self.n_samples:
            t_prev = self.state.t
            self._step_to(self.target_time(self.sample_index + 1))
            self.sample_index += 1
            self._sample()
            self._write_outputs(t_prev)

    # -- 전체 실행 -----------------------------------------------------------

    def execute(self, resumed: bool = False) -> RunResult:
        started = time.perf_counter()
        status, error = "clean", None
        label = self.config.scenario if self.config is not None else "custom"
        logger.info("run %s %s: cells %s, eps = %g, t_end = %g", label, "resumed" if resumed else "started",
                    "x".join(map(str, self.params.domain.cells)), self.params.reaction.eps, self.params.t_end)
        try:
            if not resumed:
                self.start()
            self.loop()
        except (PositivityLossError, MonotonicityLossError) as exc:
            status, error = "invariant_violation", str(exc)
            name = f"positivity_{exc.field}" if isinstance(exc, PositivityLossError) else "scheme_error"
            self._abort(Violation(t=self._time(), invariant=name, detail=str(exc)))
        except (SolverError, SchemeError) as exc:
            status, error = "solver_failure", str(exc)
            self._abort(Violation(t=self._time(), invariant="solver_failure", detail=f"{type(exc).__name__}: {exc}"))

        if status == "clean" and self.violations:
            status = "invariant_violation"
        if self.output_dir is not None and self.state is not None and status != "solver_failure":
            write_snapshot(self.state, self.output_dir / "final.chfl")
        if self.params.track_energy_balance:
            logger.info("max kinetic energy balance residual: %.3e", self.energy_residual_max)
        wall = time.perf_counter() - started
        logger.info("run %s finished: status %s, %d steps, %d samples, %d violations, %.1fs",
                    label, status, self.steps, len(self.records), len(self.violations), wall)
        return RunResult(final_state=self.state, records=list(self.records), violations=list(self.violations),
                         wall_time=wall, status=status, error=error)

    def _time(self) -> float:
        return self.state.t if self.state is not None else 0.0

    def _abort(self, violation: Violation) -> None:
        logger.error("run aborted at t = %.6g: %s", violation.t, violation.detail)
        self.violations.append(violation)
        if self.output_dir is not None and self.state is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            write_snapshot(self.state, self.output_dir / "postmortem.chfl")
            if self.records:
                write_records(self.records, self.output_dir / "records.csv", self.params.lp_exponents)


def run(params: SimParams, *, config: Optional[RunConfig] = None) -> RunResult:
    """config 가 있으면 그 출력 디렉터리에 기록/스냅샷/체크포인트를 남긴다"""
    if config is not None and config.params != params:
        raise ValueError("config.params must match params")
    return SimulationRunner(params, config).execute()


def run_config(config: RunConfig) -> RunResult:
    return run(config.params, config=config)


def resume(checkpoint: Union[str, Path]) -> RunResult:
    """체크포인트(.chfl + .chfl.json)에서 이어서 실행"""
    path = Path(checkpoint)
    sidecar = json.loads(Path(str(path) + SIDECAR_SUFFIX).read_text(encoding="utf-8"))
    if sidecar.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint sidecar version {sidecar.get('version')}")
    config = parse_config_text(sidecar["config"])
    config = config.model_copy(update={"output_dir": str(path.parent)})
    runner = SimulationRunner(config.params, config)
    runner.restore(read_snapshot(path), sidecar)
    return runner.execute(resumed=True)


# ---------------------------------------------------------------------------
# eps 가족
# ---------------------------------------------------------------------------

def with_eps(params: SimParams, eps: float) -> SimParams:
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return params.model_copy(update={"reaction": params.reaction.model_copy(update={"eps": float(eps)})})


def field_distance(a: SimState, b: SimState, name: str) -> float:
    return (getattr(a, name) - getattr(b, name)).l2()


def field_norm(state: SimState, name: str) -> float:
    return getattr(state, name).l2()


def epsilon_study(params: SimParams, eps_list: Sequence[float], max_workers: int = 1) -> EpsilonStudyResult:
    """
    같은 시나리오를 eps 마다 실행하고 d_j = |X(eps_j) - X(eps_{j+1})|_2 (X = n, c, u)
    - eps_list 가 순감소일 때 d_j 순감소를 불변조건 epsilon_cauchy_<X> 로 검사
    - floor_X = CAUCHY_FLOOR x max(|X(0)|_2, max_j |X(eps_j)|_2) 이하의 d_j 는 수렴으로 본다
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("eps_list needs at least 3 entries")
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be non-increasing")
    family = [with_eps(params, e) for e in eps_list]

    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, family))
    else:
        results = [run(p) for p in family]

    for eps, result in zip(eps_list, results):
        if result.status == "solver_failure":
            raise SolverError(f"eps = {eps:g}: {result.error}")

    states = [r.final_state for r in results]
    distances = {name: [field_distance(a, b, name) for a, b in zip(states, states[1:])] for name in ("n", "c", "u")}
    initial = init_state(params.domain, params)
    floors = {
        name: CAUCHY_FLOOR * max(field_norm(s, name) for s in [initial, *states])
        for name in ("n", "c", "u")
    }
    decreasing = {
        name: all(later < earlier or later <= floors[name] for earlier, later in zip(d, d[1:]))
        for name, d in distances.items()
    }

    violations: List[Violation] = []
    for eps, result in zip(eps_list, results):
        violations.extend(
            Violation(t=v.t, invariant=v.invariant, detail=f"eps = {eps:g}: {v.detail}") for v in result.violations
        )
    strictly = all(b < a for a, b in zip(eps_list, eps_list[1:]))
    for name, ok in decreasing.items():
        logger.info("eps study %s distances: %s", name, ", ".join(f"{d:.3e}" for d in distances[name]))
        if strictly and not ok:
            detail = f"distances not strictly decreasing above {floors[name]:.1e}: {distances[name]}"
            violations.append(Violation(t=params.t_end, invariant=f"epsilon_cauchy_{name}", detail=detail))
    return EpsilonStudyResult(eps_list=eps_list, final_states=states, distances=distances,
                              decreasing=decreasing, floors=floors, violations=violations, results=results)
