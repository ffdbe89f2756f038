import logging
import math
import cvxpy as cp
import numpy as np
import numpy.typing as npt
from dataclasses import dataclass
from scipy.linalg import eigh
from scipy.optimize import brentq
from typing import Callable, List, Optional, Tuple
from .conic import (
    BisectionConfig,
    BisectionError,
    BisectionResult,
    BisectionStatus,
    ConicProblem,
    FractionalPoint,
    SolverFailure,
    SolverSettings,
    bisect,
    fractional_step,
    solve,
)
from .linalg import (
    ComplexVector,
    HermitianMatrix,
    PencilPair,
    as_hermitian,
    as_vector,
    clamp_psd,
    gram,
    max_generalized_eigvec,
    pseudo_inverse,
    quad_form,
)
from .model import (
    ChannelSet,
    MismatchPair,
    SchemeResult,
    SchemeStatus,
    SystemParams,
    bob_sinr,
    eve_sinr,
    secrecy_rate_dt,
)

logger = logging.getLogger(__name__)

DINKELBACH_STEPS = 8
INTERIOR_TOL = 1e-6


@dataclass(frozen=True)
class WorstMismatch:
    """Extremal channel error for a fixed covariance.

    ``lam`` and ``gamma`` are the trust-region dual multiplier and the dual
    objective; ``value`` is the quadratic form at ``center + e``.
    """

    e: ComplexVector
    lam: float
    gamma: float
    value: float


@dataclass(frozen=True)
class InformationDesign:
    q_x: HermitianMatrix
    ratio: float
    bisection: BisectionResult
    polish_steps: int


def eve_power_bound(
    prob: ConicProblem,
    q: cp.Expression,
    h_e_est: ComplexVector,
    eps_h: float,
    tag: str = "",
) -> cp.Expression:
    """Affine upper bound on the worst-case Eve power ``max (h+e)Q(h+e)^H``.

    Declares the S-procedure multiplier ``mu`` and the slack matrix ``psi``
    with the LMI ``[[psi, Q], [Q, mu I - Q]] >= 0`` and returns
    ``mu eps^2 + tr((Q + psi) h^H h)``. With ``eps_h == 0`` the bound is the
    nominal power and no auxiliary variables are declared.
    """
    gram_e = gram(h_e_est)
    nominal = cp.real(cp.trace(q @ gram_e))
    if eps_h == 0.0:
        return nominal
    n = h_e_est.size
    psi = prob.hermitian(f"psi{tag}", n)
    mu = prob.scalar(f"mu{tag}", nonneg=True)
    prob.add_lmi(
        f"eve_sprocedure{tag}",
        cp.bmat([[psi, q], [q, mu * np.eye(n) - q]]),
    )
    return mu * eps_h**2 + nominal + cp.real(cp.trace(psi @ gram_e))


@dataclass
class _RatioProblem:
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


def _ratio_problem(
    h_b: ComplexVector,
    h_e_est: ComplexVector,
    eps_h: float,
    budget: float,
    eve_noise: float,
    bob_noise: float,
) -> _RatioProblem:
    """``min num - t den`` over ``tr Q <= budget``; ``Q = 0`` is always
    feasible."""
    n = h_b.size
    prob = ConicProblem("dt_ratio")
    q = prob.hermitian("q_x", n, psd=True)
    t = prob.parameter("t", value=1.0)
    num = eve_noise + eve_power_bound(prob, q, h_e_est, eps_h)
    den = bob_noise + cp.real(cp.trace(q @ gram(h_b)))
    prob.add_linear("budget", cp.real(cp.trace(q)) <= budget)
    prob.minimize(num - t * den)
    return _RatioProblem(prob, t, num, den)


def initial_upper_bound(
    h_b: ComplexVector,
    h_e_est: ComplexVector,
    eps_h: float,
    budget: float,
    eve_noise: float,
    bob_noise: float,
) -> float:
    """Ratio attained by the isotropic covariance ``(P/N) I``.

    Uses ``mu0 = P`` and ``psi0 = Q0 (mu0 I - Q0)^+ Q0``; with a single
    antenna ``mu0 = 2P`` so that ``mu0 I - Q0`` stays nonsingular.
    """
    n = h_b.size
    q0 = (budget / n) * np.eye(n, dtype=np.complex128)
    mu0 = budget if n > 1 else 2.0 * budget
    psi0 = q0 @ pseudo_inverse(mu0 * np.eye(n) - q0) @ q0
    eve = quad_form(h_e_est, q0)
    if eps_h > 0.0:
        eve += mu0 * eps_h**2 + quad_form(h_e_est, psi0)
    return (eve_noise + eve) / (bob_noise + quad_form(h_b, q0))


def _trim_to_budget(q: npt.ArrayLike, budget: float) -> HermitianMatrix:
    out = clamp_psd(q)
    trace = float(np.real(np.trace(out)))
    if trace > budget > 0.0:
        out = out * (budget / trace)
    return out


def solve_information_covariance(
    h_b: ComplexVector,
    h_e_est: ComplexVector,
    eps_h: float,
    budget: float,
    eve_noise: float,
    bob_noise: float,
    delta: float = 1e-4,
    max_iter: int = 60,
    settings: Optional[SolverSettings] = None,
) -> InformationDesign:
    """Minimize the worst-case ratio ``(eve_noise + Eve) / (bob_noise + Bob)``
    over ``tr Q <= budget``.

    Bisection tests each level ``t`` with ``min num - t den``, which is
    always feasible; ``t`` is kept when the optimum is nonpositive. A
    backend error inside the bracket leaves ``t`` uncertified and moves
    the lower end up. Dinkelbach steps on the same problem then refine the
    bisection witness.

    Raises:
        BisectionError: If neither the analytic nor the widened upper
        bound is certified.
    """
    rp = _ratio_problem(h_b, h_e_est, eps_h, budget, eve_noise, bob_noise)

    def oracle(t: float) -> Optional[FractionalPoint]:
        return rp.step(t, settings)

    lower = eve_noise / (bob_noise + budget * float(np.vdot(h_b, h_b).real))
    upper = initial_upper_bound(
        h_b, h_e_est, eps_h, budget, eve_noise, bob_noise
    )
    upper = max(upper, lower + delta)
    try:
        result = bisect(
            oracle,
            BisectionConfig(
                lower=lower, upper=upper, tolerance=delta, max_iter=max_iter
            ),
        )
    except BisectionError as exc:
        widened = max(upper, eve_noise / bob_noise) * (1.0 + 1e-3)
        logger.info("%s Retrying with u=%.6g.", exc, widened)
        result = bisect(
            oracle,
            BisectionConfig(
                lower=lower, upper=widened, tolerance=delta, max_iter=max_iter
            ),
        )

    point: FractionalPoint = result.witness
    q, ratio = point.value("q_x"), min(point.ratio, result.value)
    steps = 0
    for _ in range(DINKELBACH_STEPS):
        candidate = rp.step(ratio, settings)
        if candidate is None:
            break
        steps += 1
        if not candidate.ratio < ratio:
            break
        improvement = ratio - candidate.ratio
        q, ratio = candidate.value("q_x"), candidate.ratio
        if improvement <= 1e-12 * max(1.0, ratio):
            break
    return InformationDesign(
        q_x=_trim_to_budget(q, budget),
        ratio=ratio,
        bisection=result,
        polish_steps=steps,
    )


def robust_dt_feasible(
    ch: ChannelSet,
    params: SystemParams,
    t: float,
    settings: Optional[SolverSettings] = None,
) -> bool:
    """Whether some covariance reaches worst-case ratio ``t``."""
    ch.check(params)
    rp = _ratio_problem(
        ch.h_b,
        ch.h_e_est,
        params.eps_h,
        params.p_s,
        params.sigma_sq,
        params.sigma_sq,
    )
    return rp.step(t, settings) is not None


def sprocedure_eve_bound(
    q_x: npt.ArrayLike,
    h_e_est: npt.ArrayLike,
    eps_h: float,
    settings: Optional[SolverSettings] = None,
) -> float:
    """Smallest S-procedure bound on the worst-case Eve power of a fixed
    covariance."""
    q = as_hermitian(q_x)
    h = as_vector(h_e_est)
    if eps_h == 0.0:
        return quad_form(h, q)
    prob = ConicProblem("eve_bound")
    prob.minimize(eve_power_bound(prob, q, h, eps_h))
    sol = solve(prob, settings).require()
    if not sol.feasible:
        raise SolverFailure(f"Eve power bound not solved: {sol.message}")
    return sol.objective_value


def _trs_maximizer(
    q: HermitianMatrix, h: ComplexVector, eps: float
) -> Tuple[float, ComplexVector]:
    vals, vecs = eigh(q)
    coeff = vals * (vecs.conj().T @ h.conj())
    d_max = vals[-1]
    b_norm = float(np.linalg.norm(coeff))
    if b_norm == 0.0:
        return d_max, (eps * vecs[:, -1]).conj()

    top = vals >= d_max - 1e-10 * max(1.0, abs(d_max))
    s_top = float(np.linalg.norm(coeff[top]))
    if s_top > 1e-12 * b_norm:
        def gap(lam: float) -> float:
            return float(np.linalg.norm(coeff / (lam - vals))) - eps

        lo, hi = d_max + s_top / eps, d_max + b_norm / eps
        lam = _root(gap, lo, hi)
        return lam, (vecs @ (coeff / (lam - vals))).conj()

    rest = ~top
    x_rest = coeff[rest] / (d_max - vals[rest])
    r = float(np.linalg.norm(x_rest))
    if r >= eps:
        def gap_rest(lam: float) -> float:
            x = coeff[rest] / (lam - vals[rest])
            return float(np.linalg.norm(x)) - eps

        lam = _root(gap_rest, d_max, d_max + b_norm / eps)
        x = vecs[:, rest] @ (coeff[rest] / (lam - vals[rest]))
        return lam, x.conj()
    tau = math.sqrt(eps**2 - r**2)
    x = vecs[:, rest] @ x_rest + tau * vecs[:, -1]
    return d_max, x.conj()


def _root(gap: Callable[[float], float], lo: float, hi: float) -> float:
    if gap(lo) <= 0.0:
        return lo
    if gap(hi) >= 0.0:
        return hi
    return float(brentq(gap, lo, hi, xtol=1e-15, maxiter=500))


def _onto_sphere(
    e: ComplexVector, eps: float, fallback: ComplexVector
) -> ComplexVector:
    norm = float(np.linalg.norm(e))
    if norm > 0.0:
        return e * (eps / norm)
    return fallback * (eps / float(np.linalg.norm(fallback)))


def worst_mismatch_dt(
    q_x: npt.ArrayLike,
    h_e_est: npt.ArrayLike,
    eps_h: float,
    settings: Optional[SolverSettings] = None,
) -> WorstMismatch:
    """Channel error in the ball ``||e|| <= eps_h`` maximizing Eve's power
    ``(h + e) Q (h + e)^H``.

    The trust-region dual ``min gamma`` subject to
    ``[[lam I - Q, Q h^H], [h Q, gamma - h Q h^H - lam eps^2]] >= 0`` is
    solved first; the maximizer ``e = h Q (lam I - Q)^+`` is then refined by
    a secular-equation root for ``lam`` and checked against its rescaling
    to the sphere.

    Args:
        q_x (array): Transmit covariance, PSD.
        h_e_est (array): Estimated Alice-to-Eve channel.
        eps_h (float): Mismatch radius.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        WorstMismatch: The maximizing error, dual multipliers and value.
    """
    if eps_h < 0.0:
        raise ValueError(f"Mismatch radius must be nonnegative: {eps_h}")
    q = as_hermitian(q_x)
    h = as_vector(h_e_est)
    if q.shape[0] != h.size:
        raise ValueError(
            f"Covariance of size {q.shape[0]} does not match channel of "
            f"size {h.size}."
        )
    nominal = quad_form(h, q)
    if eps_h == 0.0 or not np.any(np.abs(q) > 0.0):
        return WorstMismatch(np.zeros_like(h), 0.0, nominal, nominal)

    n = h.size
    prob = ConicProblem("worst_mismatch_dt")
    lam = prob.scalar("lam", nonneg=True)
    gamma = prob.scalar("gamma")
    off = (q @ h.conj()).reshape(n, 1)
    corner = cp.reshape(gamma - nominal - lam * eps_h**2, (1, 1), order="F")
    prob.add_lmi(
        "trs_dual",
        cp.bmat([[lam * np.eye(n) - q, off], [off.conj().T, corner]]),
    )
    prob.minimize(gamma)
    sol = solve(prob, settings).require()

    lam_star, e_star = _trs_maximizer(q, h, eps_h)
    candidates: List[ComplexVector] = [e_star]
    gamma_value = math.nan
    if sol.feasible:
        gamma_value = sol.value("gamma")
        lam_sdp = sol.value("lam")
        recovered = (pseudo_inverse(lam_sdp * np.eye(n) - q) @ q @ h.conj())
        candidates.append(recovered.conj())

    # the maximizer of a convex form lies on the sphere
    top = eigh(q)[1][:, -1].conj()
    for i, cand in enumerate(list(candidates)):
        norm = float(np.linalg.norm(cand))
        if norm > eps_h:
            candidates[i] = cand * (eps_h / norm)
        elif norm < eps_h - INTERIOR_TOL:
            candidates.append(_onto_sphere(cand, eps_h, top))
    values = [quad_form(h + c, q) for c in candidates]
    pick = int(np.argmax(values))
    if math.isnan(gamma_value):
        gamma_value = values[pick]
    return WorstMismatch(candidates[pick], lam_star, gamma_value, values[pick])


def pencil_beamformer(
    h_b: ComplexVector,
    h_e: ComplexVector,
    budget: float,
    bob_noise: float,
    eve_noise: float,
) -> HermitianMatrix:
    n = h_b.size
    pencil = PencilPair(
        a=bob_noise * np.eye(n) + budget * gram(h_b),
        b=eve_noise * np.eye(n) + budget * gram(h_e),
    )
    _, w = max_generalized_eigvec(pencil)
    return budget * np.outer(w, w.conj())


def dt_result(
    scheme: str,
    ch: ChannelSet,
    params: SystemParams,
    q_x: HermitianMatrix,
    e_h: ComplexVector,
    **kwargs: object,
) -> SchemeResult:
    """Package a DT covariance evaluated at the error ``e_h``."""
    q_z = np.zeros((ch.n_h, ch.n_h), dtype=np.complex128)
    mm = MismatchPair(as_vector(e_h), np.zeros(ch.n_h, dtype=np.complex128))
    return SchemeResult(
        scheme=scheme,
        q_x=q_x,
        q_z=q_z,
        worst_mismatch=mm,
        secrecy_rate_bits=secrecy_rate_dt(ch, q_x, mm.e_h, params.sigma_sq),
        eve_metric=eve_sinr(ch, q_x, q_z, mm, params.sigma_sq),
        bob_metric=bob_sinr(ch, q_x, q_z, params.sigma_sq),
        **kwargs,  # type: ignore[arg-type]
    )


def gev_beamformer_dt(
    ch: ChannelSet,
    params: SystemParams,
    e_h: Optional[npt.ArrayLike] = None,
) -> SchemeResult:
    """Rank-one covariance along the top generalized eigenvector of
    ``(sigma^2 I + P h_b^H h_b, sigma^2 I + P h_e^H h_e)``, with
    ``h_e = h_e_est + e_h``.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_s`` and ``sigma_sq``.
        e_h (array, optional): Assumed Eve channel error. Defaults to zero,
        the non-robust design on the estimate.

    Returns:
        SchemeResult: The beamformer evaluated at ``e_h``.
    """
    ch.check(params)
    if params.p_s <= 0.0:
        raise ValueError(f"GEV beamforming needs P_S > 0, got {params.p_s}")
    err = np.zeros(ch.n_a, dtype=np.complex128)
    if e_h is not None:
        err = as_vector(e_h)
    q = pencil_beamformer(
        ch.h_b, ch.h_e_est + err, params.p_s, params.sigma_sq, params.sigma_sq
    )
    return dt_result("gev_dt", ch, params, q, err)


def nonrobust_dt(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """GEV beamformer designed on the estimated channel, evaluated at the
    worst-case error of its own covariance."""
    design = gev_beamformer_dt(ch, params)
    try:
        wm = worst_mismatch_dt(design.q_x, ch.h_e_est, params.eps_h, settings)
    except SolverFailure as exc:
        return SchemeResult.failed(
            "nonrobust_dt_gev", params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return dt_result("nonrobust_dt_gev", ch, params, design.q_x, wm.e)


def solve_robust_dt(
    ch: ChannelSet,
    params: SystemParams,
    delta: float = 1e-4,
    max_iter: int = 60,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Covariance maximizing the worst-case secrecy rate without a helper.

    Bisection starts from ``l = sigma^2 / (sigma^2 + P ||h_b||^2)`` and the
    isotropic-covariance upper bound; the reported rate is evaluated at the
    worst-case error of the returned covariance.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_s``, ``eps_h_sq`` and ``sigma_sq``.
        delta (float): Bisection tolerance on the ratio.
        max_iter (int): Bisection step cap.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Status ``solver_failure`` if any conic solve errors.
    """
    ch.check(params)
    if params.p_s <= 0.0:
        raise ValueError(f"Robust DT needs P_S > 0, got {params.p_s}")
    try:
        design = solve_information_covariance(
            ch.h_b,
            ch.h_e_est,
            params.eps_h,
            params.p_s,
            params.sigma_sq,
            params.sigma_sq,
            delta=delta,
            max_iter=max_iter,
            settings=settings,
        )
        wm = worst_mismatch_dt(design.q_x, ch.h_e_est, params.eps_h, settings)
    except (SolverFailure, BisectionError) as exc:
        logger.warning("robust_dt failed: %s", exc)
        return SchemeResult.failed(
            "robust_dt", params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    status = (
        SchemeStatus.MAX_ITER
        if design.bisection.status is BisectionStatus.MAX_ITER
        else SchemeStatus.OPTIMAL
    )
    return dt_result(
        "robust_dt",
        ch,
        params,
        design.q_x,
        wm.e,
        iterations=design.bisection.iterations + design.polish_steps,
        status=status,
        trace=design.bisection.widths,
        design_value=design.ratio,
    )
