import dataclasses
import logging
import math
import cvxpy as cp
import numpy as np
import numpy.typing as npt
from dataclasses import dataclass
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Callable, List, Optional, Tuple
from .config_loader import solver_from_env
from .conic import SolverFailure, SolverSettings
from .jamming import Numerator, nonrobust_cj, robust_cj
from .linalg import as_hermitian, quad_form
from .model import (
    ChannelSet,
    MismatchPair,
    SchemeResult,
    SchemeStatus,
    SystemParams,
)

logger = logging.getLogger(__name__)

InnerStep = Callable[[ChannelSet, SystemParams], SchemeResult]

NORMALIZATION_TOL = 1e-9
P_MIN_FRACTION = 1e-8
SNAP_FRACTION = 1e-6


class PowerSplit(BaseModel):
    """Alice power ``p1`` and Helper power ``p2`` under the budget ``P``."""

    model_config = ConfigDict(frozen=True)

    p1: float = Field(ge=0.0)
    p2: float = Field(ge=0.0)
    budget: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _within_budget(self) -> "PowerSplit":
        if self.p1 + self.p2 > self.budget + 1e-9:
            raise ValueError(
                f"Split ({self.p1:.6g}, {self.p2:.6g}) exceeds the budget "
                f"{self.budget:.6g}"
            )
        return self

    @property
    def jamming_fraction(self) -> float:
        return self.p2 / self.budget if self.budget > 0.0 else 0.0


@dataclass(frozen=True)
class ChannelConstants:
    """``c1 = h_b Qx h_b^H``, ``c2`` the Eve-side counterpart and ``c3`` the
    jamming power at Eve, all for unit-trace covariances."""

    c1: float
    c2: float
    c3: float


@dataclass(frozen=True)
class CondensationState:
    """Monomial under-estimator of the numerator posynomial at ``point``.

    The numerator ``f = p1 p2 c1 c3 + p1 c1 s + p2 c3 s + s^2`` (``s`` the
    noise power) is replaced by ``prod (u_i / alpha_i)^alpha_i`` with
    weights ``alpha_i = u_i / f`` evaluated at the expansion point.
    """

    constants: ChannelConstants
    sigma_sq: float
    point: Tuple[float, float]
    alpha: Tuple[float, float, float, float]

    def coefficients(self) -> Tuple[float, float, float, float]:
        c, s = self.constants, self.sigma_sq
        return (c.c1 * c.c3, c.c1 * s, c.c3 * s, s * s)

    @property
    def exponents(self) -> Tuple[float, float]:
        a = self.alpha
        return (a[0] + a[1], a[0] + a[2])

    def scale(self) -> float:
        log_k = 0.0
        for coef, weight in zip(self.coefficients(), self.alpha):
            if weight > 0.0:
                log_k += weight * (math.log(coef) - math.log(weight))
        return math.exp(log_k)

    def monomial(self, p1: float, p2: float) -> float:
        e1, e2 = self.exponents
        value = self.scale()
        if e1 > 0.0:
            value *= p1**e1
        if e2 > 0.0:
            value *= p2**e2
        return value


@dataclass(frozen=True)
class CondensationRun:
    split: PowerSplit
    trace: Tuple[float, ...]
    iterations: int
    status: SchemeStatus
    message: str = ""


def compute_constants(
    ch: ChannelSet,
    q_x_norm: npt.ArrayLike,
    q_z_norm: npt.ArrayLike,
    mm: MismatchPair,
) -> ChannelConstants:
    """Quadratic forms of the unit-trace covariances on Bob's channel and
    on the mismatched Eve channels.

    ``q_z_norm`` may be the zero matrix when no jamming direction exists,
    giving ``c3 = 0``.

    Raises:
        ValueError: If a covariance is not trace-normalized.
    """
    qx = as_hermitian(q_x_norm)
    qz = as_hermitian(q_z_norm)
    tr_x = float(np.real(np.trace(qx)))
    tr_z = float(np.real(np.trace(qz)))
    if abs(tr_x - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"Information covariance has trace {tr_x}, not 1.")
    if abs(tr_z - 1.0) > NORMALIZATION_TOL and abs(tr_z) > NORMALIZATION_TOL:
        raise ValueError(f"Jamming covariance has trace {tr_z}, not 1 or 0.")
    return ChannelConstants(
        c1=max(quad_form(ch.h_b, qx), 0.0),
        c2=max(quad_form(ch.h_e_est + mm.e_h, qx), 0.0),
        c3=max(quad_form(ch.g_e_est + mm.e_g, qz), 0.0),
    )


def objective_ratio(
    s: PowerSplit, c: ChannelConstants, sigma_sq: float
) -> float:
    """``(p1 c1 + s)(p2 c3 + s) / (p1 c2 + p2 c3 + s)`` with ``s`` the noise
    power; the secrecy rate is ``log2`` of this ratio over ``s``."""
    numerator = (
        s.p1 * s.p2 * c.c1 * c.c3
        + s.p1 * c.c1 * sigma_sq
        + s.p2 * c.c3 * sigma_sq
        + sigma_sq**2
    )
    return numerator / (s.p1 * c.c2 + s.p2 * c.c3 + sigma_sq)


def condense(
    s: PowerSplit, c: ChannelConstants, sigma_sq: float
) -> CondensationState:
    """Arithmetic-geometric weights of the numerator posynomial at ``s``.

    Raises:
        ValueError: If the numerator is not positive.
    """
    terms = (
        s.p1 * s.p2 * c.c1 * c.c3,
        s.p1 * c.c1 * sigma_sq,
        s.p2 * c.c3 * sigma_sq,
        sigma_sq**2,
    )
    total = sum(terms)
    if total <= 0.0:
        raise ValueError(f"Posynomial value must be positive, got {total}")
    alpha = tuple(t / total for t in terms)
    return CondensationState(
        constants=c,
        sigma_sq=sigma_sq,
        point=(s.p1, s.p2),
        alpha=alpha,  # type: ignore[arg-type]
    )


def _jamming_useless(c: ChannelConstants) -> bool:
    return c.c2 == 0.0 or (c.c3 == 0.0 and c.c1 > c.c2)


def solve_condensed_gp(
    state: CondensationState,
    budget: float,
    sigma_sq: float,
    solver: Optional[str] = None,
) -> PowerSplit:
    """Solve ``min (p1 c2 + p2 c3 + s) / f~(p1, p2)`` s.t. ``p1 + p2 <= P``
    as a geometric program in log-variables.

    Powers are floored at ``1e-8 P`` inside the GP; the polished result may
    snap a negligible power to zero when that does not lower the true
    ratio. When jamming cannot help (``c2 = 0``, or ``c3 = 0`` with
    ``c1 > c2``) the whole budget goes to Alice.

    Raises:
        SolverFailure: If the GP backend errors or ends without an optimum.
    """
    c = state.constants
    if budget <= 0.0:
        return PowerSplit(p1=0.0, p2=0.0, budget=budget)
    if _jamming_useless(c):
        return PowerSplit(p1=budget, p2=0.0, budget=budget)

    p_min = P_MIN_FRACTION * budget
    p1 = cp.Variable(pos=True, name="p1")
    p2 = cp.Variable(pos=True, name="p2")
    denominator = sigma_sq
    for coef, var in ((c.c2, p1), (c.c3, p2)):
        if coef > 0.0:
            denominator = denominator + coef * var
    e1, e2 = state.exponents
    monomial = state.scale()
    if e1 > 0.0:
        monomial = monomial * p1**e1
    if e2 > 0.0:
        monomial = monomial * p2**e2
    problem = cp.Problem(
        cp.Minimize(denominator / monomial),
        [p1 + p2 <= budget, p1 >= p_min, p2 >= p_min],
    )
    status = _solve_gp(problem, solver)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverFailure(f"Condensed GP ended with status {status}")
    return _polish(float(p1.value), float(p2.value), c, budget, sigma_sq)


def _solve_gp(problem: cp.Problem, solver: Optional[str]) -> str:
    try:
        problem.solve(gp=True, solver=solver or solver_from_env())
    except (cp.error.SolverError, cp.error.DGPError) as exc:
        raise SolverFailure(f"Condensed GP failed: {exc}") from exc
    return str(problem.status)


def _polish(
    p1: float,
    p2: float,
    c: ChannelConstants,
    budget: float,
    sigma_sq: float,
) -> PowerSplit:
    total = p1 + p2
    if total > budget:
        p1, p2 = p1 * budget / total, p2 * budget / total
    best = PowerSplit(p1=p1, p2=p2, budget=budget)
    best_value = objective_ratio(best, c, sigma_sq)
    snap = SNAP_FRACTION * budget
    candidates: List[PowerSplit] = []
    if p2 < snap:
        candidates.append(PowerSplit(p1=budget, p2=0.0, budget=budget))
    if p1 < snap:
        candidates.append(PowerSplit(p1=0.0, p2=p2, budget=budget))
    for cand in candidates:
        value = objective_ratio(cand, c, sigma_sq)
        if value >= best_value - 1e-12 * abs(best_value):
            best, best_value = cand, value
    return best


def single_condensation_loop(
    initial: PowerSplit,
    c: ChannelConstants,
    sigma_sq: float,
    tol: float = 1e-5,
    max_iter: int = 50,
    solver: Optional[str] = None,
) -> CondensationRun:
    """Successive condensation for the global power split.

    Each iteration condenses the numerator at the current split and solves
    the resulting GP; a new split is accepted only if it raises the true
    ratio, so the recorded objective sequence never decreases.

    Args:
        initial (PowerSplit): Feasible starting split.
        c (ChannelConstants): Channel constants of the normalized
        covariances.
        sigma_sq (float): Noise power.
        tol (float): Relative objective change declaring convergence.
        max_iter (int): Iteration cap.
        solver (str, optional): cvxpy solver for the GP.

    Returns:
        CondensationRun: Best split, objective trace and status
        (``max_iter`` when the cap is hit before convergence,
        ``solver_failure`` with the trace so far when a GP fails).
    """
    current = initial
    value = objective_ratio(current, c, sigma_sq)
    trace = [value]
    for iteration in range(1, max_iter + 1):
        state = condense(current, c, sigma_sq)
        try:
            candidate = solve_condensed_gp(
                state, initial.budget, sigma_sq, solver
            )
        except SolverFailure as exc:
            logger.warning("Condensation step %d failed: %s", iteration, exc)
            return CondensationRun(
                current,
                tuple(trace),
                iteration,
                SchemeStatus.SOLVER_FAILURE,
                str(exc),
            )
        cand_value = objective_ratio(candidate, c, sigma_sq)
        change = 0.0
        if cand_value > value:
            change = (cand_value - value) / abs(cand_value)
            current, value = candidate, cand_value
        trace.append(value)
        if change < tol:
            return CondensationRun(
                current, tuple(trace), iteration, SchemeStatus.OPTIMAL
            )
    return CondensationRun(
        current, tuple(trace), max_iter, SchemeStatus.MAX_ITER
    )


def _normalized(q: npt.ArrayLike) -> Optional[np.ndarray]:
    mat = np.asarray(q, dtype=np.complex128)
    trace = float(np.real(np.trace(mat)))
    if trace <= 1e-12:
        return None
    return mat / trace


def _alternate(
    scheme: str,
    ch: ChannelSet,
    params: SystemParams,
    inner: InnerStep,
    use_worst_case: bool,
    outer_tol: float,
    outer_max: int,
    loop_tol: float,
    loop_max_iter: int,
    solver: Optional[str],
) -> SchemeResult:
    budget = params.p_total
    if budget <= 0.0:
        raise ValueError(f"Global allocation needs P > 0, got {budget}")
    p1 = p2 = budget / 2.0
    best: Optional[SchemeResult] = None
    best_split = (p1, p2)
    trace: List[float] = []
    qz_bar_last: Optional[np.ndarray] = None
    previous = -math.inf
    iteration = 0
    converged = False
    for iteration in range(1, outer_max + 1):
        result = inner(ch, params.with_budgets(p1, p2))
        if not result.ok:
            logger.warning(
                "%s inner step failed at iteration %d: %s",
                scheme,
                iteration,
                result.message,
            )
            return SchemeResult.failed(
                scheme,
                params,
                SchemeStatus.SOLVER_FAILURE,
                result.message,
                trace=tuple(trace),
            )
        rate = result.secrecy_rate_bits
        if best is None or rate >= best.secrecy_rate_bits:
            best, best_split = result, (p1, p2)
        trace.append(best.secrecy_rate_bits)
        logger.debug(
            "%s outer %d: split (%.4g, %.4g) rate %.6f",
            scheme,
            iteration,
            p1,
            p2,
            rate,
        )
        if abs(rate - previous) < outer_tol:
            converged = True
            break
        previous = rate

        qx_bar = _normalized(result.q_x)
        if qx_bar is None:
            converged = True
            break
        qz_bar = _normalized(result.q_z)
        if qz_bar is None:
            qz_bar = qz_bar_last
        else:
            qz_bar_last = qz_bar
        if qz_bar is None:
            qz_bar = np.zeros((ch.n_h, ch.n_h), dtype=np.complex128)
        mm = (
            result.worst_mismatch
            if use_worst_case
            else MismatchPair.zero(ch.n_a, ch.n_h)
        )
        constants = compute_constants(ch, qx_bar, qz_bar, mm)
        run = single_condensation_loop(
            PowerSplit(p1=p1, p2=p2, budget=budget),
            constants,
            params.sigma_sq,
            tol=loop_tol,
            max_iter=loop_max_iter,
            solver=solver,
        )
        if run.status is SchemeStatus.SOLVER_FAILURE:
            return SchemeResult.failed(
                scheme,
                params,
                SchemeStatus.SOLVER_FAILURE,
                run.message,
                trace=tuple(trace),
            )
        p1, p2 = run.split.p1, run.split.p2

    assert best is not None
    status = best.status
    if not converged and status is SchemeStatus.OPTIMAL:
        status = SchemeStatus.MAX_ITER
    return dataclasses.replace(
        best,
        scheme=scheme,
        iterations=iteration,
        status=status,
        trace=tuple(trace),
        p1=best_split[0],
        p2=best_split[1],
    )


def joint_optimize_global(
    ch: ChannelSet,
    params: SystemParams,
    delta: float = 1e-4,
    outer_tol: float = 1e-4,
    outer_max: int = 30,
    loop_tol: float = 1e-5,
    loop_max_iter: int = 50,
    numerator: Numerator = "printed",
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Robust CJ under the global budget ``p1 + p2 <= P``.

    Starting from ``p1 = p2 = P/2``, alternates the robust CJ design at the
    current split (refreshing both covariances and worst-case errors) with
    the condensation loop on the normalized covariances, until the
    worst-case rate changes by less than ``outer_tol``. Only improving
    designs are kept, so the rate trace is non-decreasing.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_total``, both radii and
        ``sigma_sq``.
        delta (float): Bisection tolerance of the inner design.
        outer_tol (float): Rate change (bits) declaring convergence.
        outer_max (int): Outer iteration cap.
        loop_tol (float): Condensation loop tolerance.
        loop_max_iter (int): Condensation loop cap.
        numerator (str): Information-covariance ratio variant.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Best design with ``p1``/``p2`` set to its split.
    """
    ch.check(params)
    settings = settings or SolverSettings()

    def inner(c: ChannelSet, p: SystemParams) -> SchemeResult:
        return robust_cj(
            c, p, delta=delta, numerator=numerator, settings=settings
        )

    return _alternate(
        "joint_global",
        ch,
        params,
        inner,
        use_worst_case=True,
        outer_tol=outer_tol,
        outer_max=outer_max,
        loop_tol=loop_tol,
        loop_max_iter=loop_max_iter,
        solver=settings.solver,
    )


def joint_optimize_global_nonrobust(
    ch: ChannelSet,
    params: SystemParams,
    outer_tol: float = 1e-4,
    outer_max: int = 30,
    loop_tol: float = 1e-5,
    loop_max_iter: int = 50,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Non-robust counterpart of :func:`joint_optimize_global`: null-steering
    jammer and GEV beamformer on the estimated channels, split by the same
    condensation loop with zero assumed error, rate evaluated at the
    worst-case errors of the final covariances."""
    ch.check(params)
    settings = settings or SolverSettings()

    def inner(c: ChannelSet, p: SystemParams) -> SchemeResult:
        return nonrobust_cj(c, p, settings=settings)

    return _alternate(
        "nonrobust_global",
        ch,
        params,
        inner,
        use_worst_case=False,
        outer_tol=outer_tol,
        outer_max=outer_max,
        loop_tol=loop_tol,
        loop_max_iter=loop_max_iter,
        solver=settings.solver,
    )


def fixed_split_cj(
    ch: ChannelSet,
    params: SystemParams,
    fraction: float,
    delta: float = 1e-4,
    numerator: Numerator = "printed",
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Robust CJ with ``P_S = fraction P`` and ``P_J = (1 - fraction) P``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"Split fraction must lie in [0, 1], got {fraction}")
    budget = params.p_total
    split_params = params.with_budgets(
        fraction * budget, (1.0 - fraction) * budget
    )
    result = robust_cj(
        ch, split_params, delta=delta, numerator=numerator, settings=settings
    )
    return dataclasses.replace(result, scheme="fixed_split")
