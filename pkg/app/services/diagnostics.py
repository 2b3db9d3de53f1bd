"""
진단 엔진

샘플 시각마다 DiagnosticsRecord 를 만들고, InvariantMonitor 가 단조성/비교
구조를 온라인으로 검사한다. check_records 는 CSV 기록을 오프라인으로 재검사한다.
"""
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import InfeasibleParamsError, NonpositiveDensityError
from app.models.fields import SimState
from app.models.params import ReactionParams, SimParams, YParams
from app.models.records import DiagnosticsRecord, Violation
from app.services.chemotaxis import consumption_rate
from app.services.operators import grad_sq_cells, scalar_dirichlet_form, velocity_dirichlet_form

logger = logging.getLogger(__name__)

FLOOR_FACTOR = 1e-14
_TINY = float(np.finfo(np.float64).tiny)


# ---------------------------------------------------------------------------
# 파라미터 선택
# ---------------------------------------------------------------------------

def _sufficient(theta: float, p: float, chi: float) -> bool:
    lhs = 4 * p * p * theta + 4 * p * p * theta * chi * (p - 1) + chi * chi * p * p * (p - 1) ** 2 * theta
    return lhs < 2 * p * (p - 1)


def _feasible_pair(theta: float, eta: float, p: float, chi: float) -> bool:
    lhs = (2 * p * theta + chi * p * (p - 1) * eta) ** 2
    rhs = 4 * p * (p - 1) * theta * (1 + theta - chi * p * eta)
    return lhs < rhs


def select_y_params(
    p: float,
    chi: float,
    kappa: float,
    mu: float,
    volume: float = 1.0,
    K: float = 1.0,
    B: Optional[float] = None,
    max_halvings: int = 64,
) -> YParams:
    """theta = 조건을 만족하는 가장 큰 2^-k, eta = min(1, theta, 1/(2 p chi))/2"""
    if not p > 1:
        raise ValueError("p must be > 1")
    if not mu > 0:
        raise ValueError("mu must be > 0")
    for k in range(max_halvings + 1):
        theta = 2.0 ** (-k)
        if _sufficient(theta, p, chi):
            break
    else:
        raise InfeasibleParamsError(f"no theta = 2^-k (k <= {max_halvings}) satisfies the y-functional condition for p = {p:g}")

    eta = 0.5 if chi == 0 else 0.5 * min(1.0, theta, 1.0 / (2 * p * chi))
    if not _feasible_pair(theta, eta, p, chi):
        raise InfeasibleParamsError(f"selected (theta, eta) = ({theta:g}, {eta:g}) fails the feasibility inequality")

    B0 = kappa * chi ** 2 / (2 * mu)
    if B is None:
        B = 2 * B0 + 1
    elif not B > B0:
        raise InfeasibleParamsError(f"B = {B:g} must exceed B0 = {B0:g}")
    k1 = p * mu * (eta ** theta / (2 ** theta * volume)) ** (1.0 / p)
    return YParams(p=p, theta=theta, eta=eta, B=B, K=K, k1=k1, kappa=kappa, chi=chi, mu=mu, volume=volume)


def y_params_for(params: SimParams) -> YParams:
    r = params.reaction
    return select_y_params(params.y_exponent, r.chi, r.kappa, r.mu, volume=params.domain.volume,
                           K=params.energy_K, B=params.B)


# ---------------------------------------------------------------------------
# 범함수
# ---------------------------------------------------------------------------

def functional_F(
    state: SimState,
    chi: float,
    K: float = 1.0,
    floors: Optional[Tuple[float, float]] = None,
) -> Tuple[float, Tuple[bool, bool]]:
    """int n ln n + (chi/2) int |grad c|^2/c + K chi int |u|^2, 하한 적용 여부"""
    n = state.n.values
    c = state.c.values
    vol = state.domain.cell_volume
    if floors is None:
        floors = (FLOOR_FACTOR * max(state.n.max_abs(), _TINY), FLOOR_FACTOR * max(state.c.max_abs(), _TINY))
    n_floor, c_floor = floors

    clamp_n = bool(np.any(n < n_floor))
    n_eff = np.maximum(n, n_floor)
    entropy = float(np.sum(n_eff * np.log(n_eff))) * vol

    clamp_c = bool(np.any(c < c_floor))
    fisher = 0.5 * chi * float(np.sum(grad_sq_cells(state.c) / np.maximum(c, c_floor))) * vol

    kinetic = K * chi * 2.0 * state.u.kinetic()
    return entropy + fisher + kinetic, (clamp_n, clamp_c)


def functional_G(state: SimState, B: float, reaction: ReactionParams) -> float:
    """int n - (kappa/mu) int ln(mu n/kappa) + (B/2) int c^2"""
    n = state.n.values
    vol = state.domain.cell_volume
    value = float(n.sum()) * vol + 0.5 * B * float(np.sum(state.c.values ** 2)) * vol
    if reaction.kappa > 0:
        if not n.min() > 0:
            raise NonpositiveDensityError(f"G requires min(n) > 0 (min = {n.min():.3e})")
        ratio = reaction.kappa / reaction.mu
        value -= ratio * float(np.sum(np.log(n / ratio))) * vol
    return value


def functional_y(state: SimState, yp: YParams) -> Optional[float]:
    """int n^p/(eta - c)^theta. |c|_inf > eta/2 이면 None"""
    if state.c.max_abs() > 0.5 * yp.eta:
        return None
    n = np.maximum(state.n.values, 0.0)
    return float(np.sum(n ** yp.p / (yp.eta - state.c.values) ** yp.theta)) * state.domain.cell_volume


def comparison_z(t: float, T: float, yT: float, yp: YParams) -> float:
    """z' = kappa p z - k1 z^{1+1/p}, z(T) = yT 의 닫힌 해"""
    if t < T:
        raise ValueError("comparison_z requires t >= T")
    if not yT > 0:
        raise ValueError("comparison_z requires y(T) > 0")
    start = yT ** (-1.0 / yp.p)
    if yp.kappa == 0:
        return (start + yp.k1 * (t - T) / yp.p) ** (-yp.p)
    a = yp.k1 / (yp.kappa * yp.p)
    return ((start - a) * math.exp(-yp.kappa * (t - T)) + a) ** (-yp.p)


def comparison_z_envelope(t: float, T: float, yp: YParams) -> float:
    """초기값 무한대에서 출발한 z (모든 y(T) 에 대한 상계)"""
    if t < T:
        raise ValueError("comparison_z_envelope requires t >= T")
    if t == T:
        return math.inf
    if yp.kappa == 0:
        return (yp.k1 * (t - T) / yp.p) ** (-yp.p)
    a = yp.k1 / (yp.kappa * yp.p)
    return (a * -math.expm1(-yp.kappa * (t - T))) ** (-yp.p)


def mass_bounds(initial_state: SimState, params: SimParams) -> Tuple[Optional[float], float]:
    """(Jensen 하한 또는 None, 로지스틱 상한)"""
    r = params.reaction
    V = params.domain.volume
    vol = params.domain.cell_volume
    n0 = initial_state.n.values
    int_n0 = float(n0.sum()) * vol
    upper = max(int_n0, r.kappa * V / r.mu * (1.0 + params.mass_cap_margin))
    if r.kappa == 0 or not n0.min() > 0:
        return None, upper
    ratio = r.kappa / r.mu
    c0_sq = float(np.sum(initial_state.c.values ** 2)) * vol
    log_term = ratio * float(np.sum(np.log(n0 / ratio))) * vol
    k1 = r.mu / (V * r.kappa) * (-int_n0 - 0.5 * params.B * c0_sq + log_term)
    return V * ratio * math.exp(k1), upper


def lp_norm(values: np.ndarray, p: float, cell_volume: float) -> float:
    return float(np.sum(np.abs(values) ** p) * cell_volume) ** (1.0 / p)


def record(
    state: SimState,
    params: SimParams,
    yp: YParams,
    anchor: Optional[Tuple[float, float]] = None,
) -> DiagnosticsRecord:
    """상태의 순수 읽기. 범함수 오류는 None 필드로 표시"""
    domain = state.domain
    vol = domain.cell_volume
    F, (clamp_n, clamp_c) = functional_F(state, params.reaction.chi, params.energy_K)
    try:
        G: Optional[float] = functional_G(state, params.B, params.reaction)
    except NonpositiveDensityError:
        G = None
    y = functional_y(state, yp)
    z = comparison_z(state.t, anchor[0], anchor[1], yp) if anchor is not None else None
    speed = state.u.cell_magnitude()
    return DiagnosticsRecord(
        t=state.t,
        mass_n=state.n.integral(),
        min_n=state.n.min(),
        max_n=state.n.max(),
        sup_c=state.c.max_abs(),
        int_c=state.c.integral(),
        grad_c_sq=scalar_dirichlet_form(state.c),
        kinetic=state.u.kinetic(),
        enstrophy_like=velocity_dirichlet_form(state.u),
        F=F,
        G=G,
        y_p=y,
        z_p=z,
        clamp_n=clamp_n,
        clamp_c=clamp_c,
        lp_exponents=tuple(params.lp_exponents),
        lp_norms_n=tuple(lp_norm(state.n.values, p, vol) for p in params.lp_exponents),
        lp_norms_u=tuple(lp_norm(speed, p, vol) for p in params.lp_exponents),
    )


# ---------------------------------------------------------------------------
# 불변조건 검사
# ---------------------------------------------------------------------------

def dissipation_scale(rec: DiagnosticsRecord, params: SimParams) -> float:
    """G 감소율의 상계 규모: mu int (n - kappa/mu)^2 + B int |grad c|^2 + int |grad u|^2"""
    r = params.reaction
    spread = max((rec.max_n - r.equilibrium) ** 2, (rec.min_n - r.equilibrium) ** 2)
    return r.mu * params.domain.volume * spread + params.B * rec.grad_c_sq + rec.enstrophy_like


def _all_finite(rec: DiagnosticsRecord) -> List[str]:
    return [name for name, value in rec.numeric_items().items() if value is not None and not math.isfinite(value)]


def _pairwise_checks(
    prev: DiagnosticsRecord,
    rec: DiagnosticsRecord,
    sup_c_slack: float,
    int_c_slack: float,
) -> List[Violation]:
    found = []
    if not rec.t > prev.t:
        found.append(Violation(t=rec.t, invariant="time_increasing", detail=f"t = {rec.t!r} after {prev.t!r}"))
    if rec.sup_c > prev.sup_c + sup_c_slack:
        found.append(Violation(t=rec.t, invariant="sup_c_nonincreasing",
                               detail=f"sup_c rose from {prev.sup_c:.17g} to {rec.sup_c:.17g}"))
    if rec.int_c > prev.int_c + int_c_slack:
        found.append(Violation(t=rec.t, invariant="int_c_nonincreasing",
                               detail=f"int_c rose from {prev.int_c:.17g} to {rec.int_c:.17g}"))
    return found


def _g_checks(prev: Optional[DiagnosticsRecord], rec: DiagnosticsRecord, params: SimParams) -> List[Violation]:
    found = []
    if rec.G is None:
        return found
    r = params.reaction
    bound = r.kappa * params.domain.volume / r.mu
    if rec.min_n > 0 and rec.G < bound - 1e-12 * max(1.0, abs(bound)):
        found.append(Violation(t=rec.t, invariant="g_lower_bound",
                               detail=f"G = {rec.G:.17g} < kappa V/mu = {bound:.17g}"))
    if prev is not None and prev.G is not None and prev.t >= params.burn_in:
        g_tol = 1e-8 * abs(prev.G) + 1e-3 * (rec.t - prev.t) * dissipation_scale(prev, params)
        if rec.G > prev.G + g_tol:
            found.append(Violation(t=rec.t, invariant="g_nonincreasing",
                                   detail=f"G rose from {prev.G:.17g} to {rec.G:.17g} (g_tol {g_tol:.3e})"))
    return found


def _yz_check(rec: DiagnosticsRecord, factor: float) -> List[Violation]:
    if rec.y_p is None or rec.z_p is None:
        return []
    if rec.y_p > factor * rec.z_p:
        return [Violation(t=rec.t, invariant="y_below_z", detail=f"y = {rec.y_p:.6g} > {factor:g} z = {factor * rec.z_p:.6g}")]
    return []


class InvariantMonitor:
    """샘플/스텝 단위 온라인 불변조건 검사기. state_dict 로 체크포인트 가능"""

    def __init__(self, params: SimParams, initial_state: SimState, yp: YParams):
        self.params = params
        self.yp = yp
        self.mass_low, self.mass_up = mass_bounds(initial_state, params)
        self.sup_c0 = initial_state.c.max_abs()
        self.int_c0 = abs(initial_state.c.integral())
        self.half_c0_sq = 0.5 * float(np.sum(initial_state.c.values ** 2)) * initial_state.domain.cell_volume
        self.anchor: Optional[Tuple[float, float]] = None
        self.previous: Optional[DiagnosticsRecord] = None
        self.burn_max_F: Optional[float] = None
        self.oxygen_dissipation = 0.0
        self.window_index = 0
        self.window_sum = 0.0
        self.closed_windows: List[float] = []
        self.violations: List[Violation] = []

    # -- 스텝 누적 ---------------------------------------------------------

    def accumulate_step(self, t0: float, dt: float, before: SimState, c_dissipating: SimState) -> List[Violation]:
        """한 스텝의 산소 소산량과 int n c 창 합을 누적"""
        self.oxygen_dissipation += 0.5 * dt * scalar_dirichlet_form(c_dissipating.c)
        rate = consumption_rate(np.maximum(before.n.values, 0.0), self.params.reaction.eps)
        consumed = dt * float(np.sum(before.n.values * rate * before.c.values)) * before.domain.cell_volume
        index = int(math.floor(t0))
        found: List[Violation] = []
        while index > self.window_index:
            found.extend(self._close_window())
        self.window_sum += consumed
        self.violations.extend(found)
        return found

    def _close_window(self) -> List[Violation]:
        closed = self.window_sum
        k = self.window_index
        found = []
        if self.closed_windows and k - 1 >= self.params.burn_in:
            previous = self.closed_windows[-1]
            if closed > previous * (1.0 + 1e-6) + _TINY:
                found.append(Violation(t=float(k + 1), invariant="consumption_window_decay",
                                       detail=f"window [{k}, {k + 1}) sum {closed:.6g} > previous {previous:.6g}"))
        self.closed_windows.append(closed)
        self.window_index += 1
        self.window_sum = 0.0
        return found

    # -- 샘플 검사 ---------------------------------------------------------

    def observe(self, rec: DiagnosticsRecord) -> List[Violation]:
        params = self.params
        found: List[Violation] = []

        bad = _all_finite(rec)
        if bad:
            found.append(Violation(t=rec.t, invariant="finite_entries", detail=f"non-finite: {', '.join(bad)}"))

        if self.previous is not None:
            found.extend(_pairwise_checks(self.previous, rec, 1e-12 * self.sup_c0, 1e-12 * self.int_c0))
        found.extend(_g_checks(self.previous, rec, params))

        if rec.mass_n > self.mass_up * (1.0 + 1e-12):
            found.append(Violation(t=rec.t, invariant="mass_upper_bound",
                                   detail=f"int n = {rec.mass_n:.17g} > {self.mass_up:.17g}"))
        if self.mass_low is not None and rec.mass_n < params.mass_slack * self.mass_low:
            found.append(Violation(t=rec.t, invariant="mass_lower_bound",
                                   detail=f"int n = {rec.mass_n:.6g} < {params.mass_slack:g} x {self.mass_low:.6g}"))

        found.extend(_yz_check(rec, params.yz_factor))

        burn_end = params.forcing_burn_in
        if rec.t <= burn_end:
            self.burn_max_F = rec.F if self.burn_max_F is None else max(self.burn_max_F, rec.F)
        elif self.burn_max_F is not None:
            cap = self.burn_max_F + max(abs(self.burn_max_F), 1e-9 * params.domain.volume)
            if rec.F > cap:
                found.append(Violation(t=rec.t, invariant="quasi_energy_bounded",
                                       detail=f"F = {rec.F:.6g} > {cap:.6g}"))

        self.previous = rec
        self.violations.extend(found)
        return found

    def check_oxygen_budget(self, state: SimState) -> List[Violation]:
        """(1/2) int c^2 + (1/2) sum dt int |grad c|^2 <= (1/2) int c0^2"""
        half_c_sq = 0.5 * float(np.sum(state.c.values ** 2)) * state.domain.cell_volume
        total = half_c_sq + self.oxygen_dissipation
        if total > self.half_c0_sq * (1.0 + 1e-9) + _TINY:
            found = [Violation(t=state.t, invariant="oxygen_dissipation_budget",
                               detail=f"{total:.17g} > {self.half_c0_sq:.17g}")]
            self.violations.extend(found)
            return found
        return []

    def update_anchor(self, state: SimState) -> Optional[Tuple[float, float]]:
        """c 가 처음으로 eta/2 이하가 된 샘플 시각을 비교 기준점으로 고정"""
        if self.anchor is None:
            y = functional_y(state, self.yp)
            if y is not None and y > 0:
                self.anchor = (state.t, y)
                logger.info("y-functional regime entered at t = %.6g (y = %.6g)", state.t, y)
        return self.anchor

    # -- 체크포인트 --------------------------------------------------------

    def state_dict(self) -> Dict[str, Any]:
        return {
            "mass_low": self.mass_low,
            "mass_up": self.mass_up,
            "sup_c0": self.sup_c0,
            "int_c0": self.int_c0,
            "half_c0_sq": self.half_c0_sq,
            "anchor": list(self.anchor) if self.anchor is not None else None,
            "previous": self.previous.model_dump() if self.previous is not None else None,
            "burn_max_F": self.burn_max_F,
            "oxygen_dissipation": self.oxygen_dissipation,
            "window_index": self.window_index,
            "window_sum": self.window_sum,
            "closed_windows": list(self.closed_windows),
            "violations": [v.model_dump() for v in self.violations],
        }

    def load_state_dict(self, data: Dict[str, Any]) -> None:
        self.mass_low = data["mass_low"]
        self.mass_up = data["mass_up"]
        self.sup_c0 = data["sup_c0"]
        self.int_c0 = data["int_c0"]
        self.half_c0_sq = data["half_c0_sq"]
        self.anchor = tuple(data["anchor"]) if data["anchor"] is not None else None
        self.previous = DiagnosticsRecord(**data["previous"]) if data["previous"] is not None else None
        self.burn_max_F = data["burn_max_F"]
        self.oxygen_dissipation = data["oxygen_dissipation"]
        self.window_index = data["window_index"]
        self.window_sum = data["window_sum"]
        self.closed_windows = list(data["closed_windows"])
        self.violations = [Violation(**v) for v in data["violations"]]


def check_records(
    records: Sequence[DiagnosticsRecord],
    params: Optional[SimParams] = None,
    yz_factor: float = 1.05,
) -> List[Violation]:
    """기록만으로 재검사 가능한 불변조건. params 가 있으면 G/질량 검사 추가"""
    found: List[Violation] = []
    if not records:
        return found
    first = records[0]
    sup_slack = 1e-12 * abs(first.sup_c)
    int_slack = 1e-12 * abs(first.int_c)
    factor = params.yz_factor if params is not None else yz_factor
    mass_up = None
    if params is not None:
        r = params.reaction
        mass_up = max(first.mass_n, r.kappa * params.domain.volume / r.mu * (1.0 + params.mass_cap_margin))

    prev: Optional[DiagnosticsRecord] = None
    for rec in records:
        bad = _all_finite(rec)
        if bad:
            found.append(Violation(t=rec.t, invariant="finite_entries", detail=f"non-finite: {', '.join(bad)}"))
        if prev is not None:
            found.extend(_pairwise_checks(prev, rec, sup_slack, int_slack))
        found.extend(_yz_check(rec, factor))
        if params is not None:
            found.extend(_g_checks(prev, rec, params))
            if rec.mass_n > mass_up * (1.0 + 1e-12):
                found.append(Violation(t=rec.t, invariant="mass_upper_bound",
                                       detail=f"int n = {rec.mass_n:.17g} > {mass_up:.17g}"))
        prev = rec
    return found
