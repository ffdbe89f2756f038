import dataclasses
import logging
import math
import cvxpy as cp
import numpy as np
from dataclasses import dataclass
from typing import Optional, Tuple
from .conic import (
    BisectionConfig,
    BisectionError,
    BisectionStatus,
    ConicProblem,
    FractionalPoint,
    SolverFailure,
    SolverSettings,
    bisect,
    fractional_step,
    solve,
)
from .direct import dt_result, eve_power_bound, worst_mismatch_dt
from .jamming import (
    cj_result,
    jamming_power_bound,
    null_steering_jammer,
    worst_mismatch_cj,
)
from .linalg import HermitianMatrix, clamp_psd, gram, null_projector, quad_form
from .model import (
    ChannelSet,
    MismatchPair,
    SchemeResult,
    SchemeStatus,
    SystemParams,
    bob_sinr,
)

logger = logging.getLogger(__name__)

EVE_SLACK = 1e-7
DENOMINATOR_FLOOR = 1e-9
DINKELBACH_STEPS = 8


class QosOutage(ValueError):
    """The Bob SINR target cannot be met within the power budget."""


@dataclass(frozen=True)
class _CjDesign:
    q_x: HermitianMatrix
    q_z: HermitianMatrix
    ratio: float
    iterations: int
    status: BisectionStatus
    widths: Tuple[float, ...]


def _check_target(ch: ChannelSet, params: SystemParams) -> None:
    ch.check(params)
    if params.gamma_t <= 0.0:
        raise ValueError(f"QoS target must be positive, got {params.gamma_t}")
    if params.p_total <= 0.0:
        raise ValueError(f"QoS designs need P > 0, got {params.p_total}")


def _unreachable(ch: ChannelSet, params: SystemParams) -> bool:
    best = params.p_total * float(np.vdot(ch.h_b, ch.h_b).real)
    return params.gamma_t * params.sigma_sq > best


def _bob_constraint(
    q: cp.Expression, ch: ChannelSet, params: SystemParams
) -> cp.Constraint:
    return (
        cp.real(cp.trace(q @ gram(ch.h_b)))
        >= params.sigma_sq * params.gamma_t
    )


def _meet_target(
    ch: ChannelSet,
    params: SystemParams,
    q_x: HermitianMatrix,
    q_z: HermitianMatrix,
) -> HermitianMatrix:
    """Scale ``q_x`` up when solver tolerance leaves Bob just short of the
    target and the budget still allows it."""
    q_x = clamp_psd(q_x)
    sinr = bob_sinr(ch, q_x, q_z, params.sigma_sq)
    if sinr <= 0.0 or sinr >= params.gamma_t:
        return q_x
    factor = params.gamma_t / sinr
    room = params.p_total - float(np.real(np.trace(q_z)))
    if factor * float(np.real(np.trace(q_x))) <= room * (1.0 + 1e-9):
        q_x = q_x * factor
    return q_x


def _outage(scheme: str, params: SystemParams, message: str) -> SchemeResult:
    logger.debug("%s in outage: %s", scheme, message)
    return SchemeResult.failed(scheme, params, SchemeStatus.OUTAGE, message)


def _minimum_eve_power(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings],
) -> Tuple[HermitianMatrix, float]:
    """Two stages on the estimated Eve channel: the smallest Eve power
    meeting the target, then the smallest trace achieving it.

    Raises:
        QosOutage: If the target is infeasible under ``tr Q <= P``.
        SolverFailure: If a conic solve errors.
    """
    n = ch.n_a
    first = ConicProblem("qos_dt_eve_power")
    q = first.hermitian("q_x", n, psd=True)
    first.add_linear("bob_target", _bob_constraint(q, ch, params))
    first.add_linear("budget", cp.real(cp.trace(q)) <= params.p_total)
    first.minimize(cp.real(cp.trace(q @ gram(ch.h_e_est))))
    sol = solve(first, settings).require()
    if not sol.feasible:
        raise QosOutage(f"Eve-power stage not feasible: {sol.message}")
    eve_star = max(sol.objective_value, 0.0)

    second = ConicProblem("qos_dt_min_trace")
    q2 = second.hermitian("q_x", n, psd=True)
    second.add_linear("bob_target", _bob_constraint(q2, ch, params))
    second.add_linear("budget", cp.real(cp.trace(q2)) <= params.p_total)
    second.add_linear(
        "eve_level",
        cp.real(cp.trace(q2 @ gram(ch.h_e_est)))
        <= eve_star + EVE_SLACK * (1.0 + eve_star),
    )
    second.minimize(cp.real(cp.trace(q2)))
    sol2 = solve(second, settings).require()
    if not sol2.feasible:
        logger.debug("Minimal-trace stage fell back to the first stage.")
        return clamp_psd(sol.value("q_x")), eve_star
    return clamp_psd(sol2.value("q_x")), eve_star


def solve_qos_dt_nonrobust(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Minimum Eve power on the estimated channel subject to Bob's SINR
    target, at the smallest trace that achieves it.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_total``, ``gamma_t``, ``eps_h_sq``
        and ``sigma_sq``.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Evaluated at the worst-case error of its own
        covariance; status ``outage`` when the target is unreachable.
    """
    scheme = "qos_dt_nonrobust"
    _check_target(ch, params)
    if _unreachable(ch, params):
        return _outage(scheme, params, "target above full-power MRT SINR")
    try:
        q_x, eve_star = _minimum_eve_power(ch, params, settings)
        q_x = _meet_target(ch, params, q_x, np.zeros((ch.n_h, ch.n_h)))
        wm = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
    except QosOutage as exc:
        return _outage(scheme, params, str(exc))
    except SolverFailure as exc:
        logger.warning("%s failed: %s", scheme, exc)
        return SchemeResult.failed(
            scheme, params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return dt_result(
        scheme, ch, params, q_x, wm.e, design_value=eve_star / params.sigma_sq
    )


def solve_qos_dt_robust(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Minimize the S-procedure bound on worst-case Eve power subject to
    ``tr(Q h_b^H h_b) >= sigma^2 gamma_t`` and ``tr Q <= P``; one SDP.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_total``, ``gamma_t``, ``eps_h_sq``
        and ``sigma_sq``.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: ``design_value`` is the worst-case Eve SNR bound.
    """
    scheme = "qos_dt_robust"
    _check_target(ch, params)
    if _unreachable(ch, params):
        return _outage(scheme, params, "target above full-power MRT SINR")
    prob = ConicProblem("qos_dt_robust")
    q = prob.hermitian("q_x", ch.n_a, psd=True)
    prob.add_linear("bob_target", _bob_constraint(q, ch, params))
    prob.add_linear("budget", cp.real(cp.trace(q)) <= params.p_total)
    prob.minimize(eve_power_bound(prob, q, ch.h_e_est, params.eps_h))
    try:
        sol = solve(prob, settings).require()
        if not sol.feasible:
            return _outage(scheme, params, sol.message)
        q_x = _meet_target(
            ch, params, sol.value("q_x"), np.zeros((ch.n_h, ch.n_h))
        )
        wm = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
    except SolverFailure as exc:
        logger.warning("%s failed: %s", scheme, exc)
        return SchemeResult.failed(
            scheme, params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return dt_result(
        scheme,
        ch,
        params,
        q_x,
        wm.e,
        design_value=sol.objective_value / params.sigma_sq,
    )


def relaxed_zf_qos(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Rank-one beam along ``(I - P_he) h_b^H``, zero-forcing the estimated
    Eve channel, scaled so Bob's SINR equals the target exactly.

    Outage when ``N_a = 1``, when ``h_b`` and the Eve estimate are parallel
    or when the required power exceeds ``P``.
    """
    scheme = "qos_relaxed_zf"
    _check_target(ch, params)
    if ch.n_a == 1:
        return _outage(scheme, params, "no null space with one antenna")
    w = null_projector(ch.h_e_est) @ ch.h_b.conj()
    norm = float(np.linalg.norm(w))
    if norm <= 1e-9 * float(np.linalg.norm(ch.h_b)):
        return _outage(scheme, params, "Bob and Eve channels are parallel")
    w = w / norm
    q_unit = np.outer(w, w.conj())
    gain = quad_form(ch.h_b, q_unit)
    power = params.sigma_sq * params.gamma_t / gain
    if power > params.p_total * (1.0 + 1e-12):
        return _outage(
            scheme,
            params,
            f"needs power {power:.6g} above the budget {params.p_total:.6g}",
        )
    q_x = power * q_unit
    try:
        wm = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
    except SolverFailure as exc:
        return SchemeResult.failed(
            scheme, params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return dt_result(scheme, ch, params, q_x, wm.e, design_value=0.0)


@dataclass
class _FractionalProblem:
    problem: ConicProblem
    t: cp.Parameter
    num: cp.Expression
    den: cp.Expression

    def step(
        self, value: float, settings: Optional[SolverSettings]
    ) -> Optional[FractionalPoint]:
        return fractional_step(
            self.problem, self.t, self.num, self.den, value, settings
        )


def _qos_cj_problem(
    ch: ChannelSet, params: SystemParams
) -> _FractionalProblem:
    """``min num - t den`` over the joint budget and Bob's target; full-power
    MRT with ``Q_z = 0`` is feasible whenever the target is reachable."""
    prob = ConicProblem("qos_cj_ratio")
    q_x = prob.hermitian("q_x", ch.n_a, psd=True)
    q_z = prob.hermitian("q_z", ch.n_h, psd=True)
    t = prob.parameter("t", value=1.0)
    num = eve_power_bound(prob, q_x, ch.h_e_est, params.eps_h, tag="_x")
    den = params.sigma_sq + jamming_power_bound(
        prob, q_z, ch.g_e_est, params.eps_g, tag="_z"
    )
    prob.add_linear("denominator", den >= DENOMINATOR_FLOOR)
    prob.add_linear(
        "budget",
        cp.real(cp.trace(q_x)) + cp.real(cp.trace(q_z)) <= params.p_total,
    )
    prob.add_linear(
        "bob_target",
        cp.real(cp.trace(q_x @ gram(ch.h_b)))
        >= params.gamma_t
        * (cp.real(cp.trace(q_z @ gram(ch.g_b))) + params.sigma_sq),
    )
    prob.minimize(num - t * den)
    return _FractionalProblem(prob, t, num, den)


def _split_budget(
    q_x: HermitianMatrix, q_z: HermitianMatrix, budget: float
) -> Tuple[HermitianMatrix, HermitianMatrix]:
    q_x, q_z = clamp_psd(q_x), clamp_psd(q_z)
    total = float(np.real(np.trace(q_x) + np.trace(q_z)))
    if total > budget > 0.0:
        q_x, q_z = q_x * (budget / total), q_z * (budget / total)
    return q_x, q_z


def _qos_cj_upper_bound(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings],
) -> float:
    inflation = (
        (float(np.linalg.norm(ch.h_e_est)) + params.eps_h) ** 2
        * params.p_total
        / params.sigma_sq
    )
    nominal = params.model_copy(update={"eps_h_sq": 0.0, "eps_g_sq": 0.0})
    baseline = solve_qos_cj_nonrobust(ch, nominal, settings)
    base = baseline.eve_metric if baseline.ok else 0.0
    return base + inflation


def _solve_fractional(
    ch: ChannelSet,
    params: SystemParams,
    delta: float,
    max_iter: int,
    settings: Optional[SolverSettings],
) -> _CjDesign:
    fp = _qos_cj_problem(ch, params)

    def oracle(t: float) -> Optional[FractionalPoint]:
        return fp.step(t, settings)

    upper = _qos_cj_upper_bound(ch, params, settings)
    result = bisect(
        oracle,
        BisectionConfig(
            lower=0.0,
            upper=max(upper, delta),
            tolerance=delta,
            max_iter=max_iter,
        ),
    )
    point: FractionalPoint = result.witness
    q_x, q_z = point.value("q_x"), point.value("q_z")
    ratio = min(point.ratio, result.value)
    if not result.lower_feasible:
        for _ in range(DINKELBACH_STEPS):
            candidate = fp.step(ratio, settings)
            if candidate is None or not candidate.ratio < ratio:
                break
            improvement = ratio - candidate.ratio
            q_x, q_z = candidate.value("q_x"), candidate.value("q_z")
            ratio = candidate.ratio
            if improvement <= 1e-12 * max(1.0, ratio):
                break
    q_x, q_z = _split_budget(q_x, q_z, params.p_total)
    return _CjDesign(
        q_x=q_x,
        q_z=q_z,
        ratio=ratio,
        iterations=result.iterations,
        status=result.status,
        widths=result.widths,
    )


def solve_qos_cj_robust(
    ch: ChannelSet,
    params: SystemParams,
    delta: float = 1e-4,
    max_iter: int = 60,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Jointly design ``Q_x`` and ``Q_z`` under ``tr Q_x + tr Q_z <= P`` to
    minimize the worst-case Eve SINR subject to Bob's SINR target.

    The linear-fractional objective (S-procedure Eve power over noise plus
    the S-procedure jamming lower bound) is minimized by bisection on ``t``
    from ``l = 0``, then refined by Dinkelbach steps. No zero-forcing
    constraint is placed on ``Q_z``; jamming at Bob enters the target.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_total``, ``gamma_t``, both radii
        and ``sigma_sq``.
        delta (float): Bisection tolerance on the SINR ratio.
        max_iter (int): Bisection step cap.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Status ``outage`` when the target is out of reach.
    """
    scheme = "qos_cj_robust"
    _check_target(ch, params)
    if _unreachable(ch, params):
        return _outage(scheme, params, "target above full-power MRT SINR")
    try:
        design = _solve_fractional(ch, params, delta, max_iter, settings)
        q_x = _meet_target(ch, params, design.q_x, design.q_z)
        wm_h = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
        wm_g = worst_mismatch_cj(
            design.q_z, ch.g_e_est, params.eps_g, settings
        )
    except (SolverFailure, BisectionError) as exc:
        logger.warning("%s failed: %s", scheme, exc)
        return SchemeResult.failed(
            scheme, params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    status = (
        SchemeStatus.MAX_ITER
        if design.status is BisectionStatus.MAX_ITER
        else SchemeStatus.OPTIMAL
    )
    return cj_result(
        scheme,
        ch,
        params,
        q_x,
        design.q_z,
        MismatchPair(wm_h.e, wm_g.e),
        iterations=design.iterations,
        status=status,
        trace=design.widths,
        design_value=design.ratio,
    )


def solve_qos_cj_nonrobust(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Non-robust DT QoS covariance at minimal trace, with the residual
    power ``P - tr Q_x`` spent on the null-steering jammer."""
    scheme = "qos_cj_nonrobust"
    dt = solve_qos_dt_nonrobust(ch, params, settings)
    if not dt.ok:
        return dataclasses.replace(dt, scheme=scheme)
    residual = max(params.p_total - float(np.real(np.trace(dt.q_x))), 0.0)
    q_z = null_steering_jammer(ch, residual)
    try:
        wm_g = worst_mismatch_cj(q_z, ch.g_e_est, params.eps_g, settings)
    except SolverFailure as exc:
        return SchemeResult.failed(
            scheme, params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    mm = MismatchPair(dt.worst_mismatch.e_h, wm_g.e)
    return cj_result(scheme, ch, params, dt.q_x, q_z, mm)


def qos_met(result: SchemeResult, gamma_t: float, tol: float = 1e-6) -> bool:
    """Whether a non-outage result meets the Bob SINR target."""
    if result.status is SchemeStatus.OUTAGE:
        return True
    return not math.isnan(result.bob_metric) and (
        result.bob_metric >= gamma_t - tol
    )
