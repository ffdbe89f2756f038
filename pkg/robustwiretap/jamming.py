import logging
import math
import cvxpy as cp
import numpy as np
import numpy.typing as npt
from dataclasses import dataclass
from scipy.linalg import eigh
from scipy.optimize import brentq
from typing import List, Literal, Optional, Tuple
from .conic import (
    BisectionError,
    BisectionStatus,
    ConicProblem,
    SolverFailure,
    SolverSettings,
    solve,
)
from .direct import (
    WorstMismatch,
    solve_information_covariance,
    worst_mismatch_dt,
    pencil_beamformer,
)
from .linalg import (
    ComplexVector,
    HermitianMatrix,
    as_hermitian,
    as_vector,
    clamp_psd,
    eigenvalues,
    gram,
    null_projector,
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
    secrecy_rate_cj,
)

logger = logging.getLogger(__name__)

Numerator = Literal["printed", "direct"]

ZF_SLACK = 1e-9
RANK_ONE_SNAP = 1e-4


@dataclass(frozen=True)
class JammingSolution:
    q_z: HermitianMatrix
    objective: float


def jamming_power_bound(
    prob: ConicProblem,
    q: cp.Expression,
    g_e_est: ComplexVector,
    eps_g: float,
    tag: str = "",
) -> cp.Expression:
    """Affine lower bound on the worst-case jamming power at Eve,
    ``min (g+e)Q(g+e)^H`` over the ball.

    Declares ``nu`` and ``phi`` with ``[[phi, Q], [Q, nu I + Q]] >= 0`` and
    returns ``tr((Q - phi) g^H g) - nu eps^2``.
    """
    gram_e = gram(g_e_est)
    nominal = cp.real(cp.trace(q @ gram_e))
    if eps_g == 0.0:
        return nominal
    n = g_e_est.size
    phi = prob.hermitian(f"phi{tag}", n)
    nu = prob.scalar(f"nu{tag}", nonneg=True)
    prob.add_lmi(
        f"jam_sprocedure{tag}",
        cp.bmat([[phi, q], [q, nu * np.eye(n) + q]]),
    )
    return nominal - cp.real(cp.trace(phi @ gram_e)) - nu * eps_g**2


def solve_robust_jamming(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> JammingSolution:
    """Zero-forcing jamming covariance maximizing the worst-case jamming
    power at Eve.

    A single SDP: maximize ``tr((Qz - phi) g^H g) - nu eps_g^2`` subject
    to the S-procedure LMI, ``tr Qz <= P_J`` and ``g_b Qz g_b^H = 0``. The
    returned covariance is projected onto the null space of ``g_b``. With
    exact Eve CSI, or when its tail spectrum is below solver accuracy, it
    is collapsed onto its top eigenvector, at full budget when
    ``eps_g = 0``.

    Raises:
        ValueError: If ``g_b`` is the zero vector.
        SolverFailure: If the SDP is not solved.
    """
    ch.check(params)
    if not np.any(ch.g_b):
        raise ValueError("Helper-to-Bob channel is zero; ZF is undefined.")
    n = ch.n_h
    if params.p_j <= 0.0 or n == 1:
        return JammingSolution(np.zeros((n, n), dtype=np.complex128), 0.0)

    prob = ConicProblem("robust_jamming")
    q = prob.hermitian("q_z", n, psd=True)
    prob.add_linear("budget", cp.real(cp.trace(q)) <= params.p_j)
    prob.add_linear(
        "zero_forcing", cp.real(cp.trace(q @ gram(ch.g_b))) <= ZF_SLACK
    )
    prob.maximize(jamming_power_bound(prob, q, ch.g_e_est, params.eps_g))
    sol = solve(prob, settings).require()
    if not sol.feasible:
        raise SolverFailure(f"Jamming SDP not solved: {sol.message}")

    proj = null_projector(ch.g_b)
    q_z = clamp_psd(proj @ sol.value("q_z") @ proj)
    trace = float(np.real(np.trace(q_z)))
    if trace > params.p_j:
        q_z = q_z * (params.p_j / trace)
        trace = params.p_j
    vals = eigenvalues(q_z)
    if vals[-1] <= 0.0:
        return JammingSolution(q_z, sol.objective_value)
    if params.eps_g == 0.0:
        # linear objective: the optimum is the full budget on one direction
        q_z = _dominant_component(q_z, params.p_j)
        objective = float(np.real(np.trace(q_z @ gram(ch.g_e_est))))
        return JammingSolution(q_z, objective)
    if max(vals[-2], 0.0) <= RANK_ONE_SNAP * vals[-1]:
        q_z = _dominant_component(q_z, trace)
    return JammingSolution(q_z, sol.objective_value)


def _dominant_component(q: HermitianMatrix, power: float) -> HermitianMatrix:
    """``power v v^H`` for the unit top eigenvector ``v`` of ``q``."""
    _, vecs = eigh(q)
    return power * gram(vecs[:, -1].conj())


def _secular_minimizer(
    q: HermitianMatrix, g: ComplexVector, eps: float
) -> Tuple[float, ComplexVector]:
    vals, vecs = eigh(q)
    vals = np.clip(vals, 0.0, None)
    coeff = vals * (vecs.conj().T @ g.conj())
    scale = max(float(vals[-1]), 1.0)
    active = vals > 1e-12 * scale
    x0 = np.zeros_like(coeff)
    x0[active] = coeff[active] / vals[active]
    if np.linalg.norm(x0) <= eps:
        return 0.0, (-(vecs @ x0)).conj()

    def gap(lam: float) -> float:
        x = coeff[active] / (lam + vals[active])
        return float(np.linalg.norm(x)) - eps

    hi = float(np.linalg.norm(coeff)) / eps
    if gap(hi) >= 0.0:
        lam = hi
    else:
        lam = float(brentq(gap, 0.0, hi, xtol=1e-15, maxiter=500))
    x = np.zeros_like(coeff)
    x[active] = coeff[active] / (lam + vals[active])
    return lam, (-(vecs @ x)).conj()


def _inverse_recovery(
    q: HermitianMatrix, g: ComplexVector, lam: float
) -> ComplexVector:
    n = g.size
    shifted = lam * np.eye(n) + q
    rhs = q @ g.conj()
    if np.linalg.cond(shifted) < 1e12:
        x = -np.linalg.solve(shifted, rhs)
    else:
        x = -np.linalg.pinv(shifted, hermitian=True) @ rhs
    return x.conj()


def worst_mismatch_cj(
    q_z: npt.ArrayLike,
    g_e_est: npt.ArrayLike,
    eps_g: float,
    settings: Optional[SolverSettings] = None,
) -> WorstMismatch:
    """Channel error in the ball ``||e|| <= eps_g`` minimizing the jamming
    power at Eve ``(g + e) Q (g + e)^H``.

    The dual ``max gamma`` subject to
    ``[[lam I + Q, Q g^H], [g Q, g Q g^H - gamma - lam eps^2]] >= 0`` gives
    the multiplier; the minimizer ``e = -g Q (lam I + Q)^{-1}`` is refined
    by a secular-equation root, with ``lam = 0`` when the unconstrained
    minimizer already lies in the ball.

    Args:
        q_z (array): Jamming covariance, PSD.
        g_e_est (array): Estimated Helper-to-Eve channel.
        eps_g (float): Mismatch radius.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        WorstMismatch: The minimizing error, dual multipliers and value.
    """
    if eps_g < 0.0:
        raise ValueError(f"Mismatch radius must be nonnegative: {eps_g}")
    q = as_hermitian(q_z)
    g = as_vector(g_e_est)
    if q.shape[0] != g.size:
        raise ValueError(
            f"Covariance of size {q.shape[0]} does not match channel of "
            f"size {g.size}."
        )
    nominal = quad_form(g, q)
    if eps_g == 0.0 or not np.any(np.abs(q) > 0.0):
        return WorstMismatch(np.zeros_like(g), 0.0, nominal, nominal)

    n = g.size
    prob = ConicProblem("worst_mismatch_cj")
    lam = prob.scalar("lam", nonneg=True)
    gamma = prob.scalar("gamma")
    off = (q @ g.conj()).reshape(n, 1)
    corner = cp.reshape(nominal - gamma - lam * eps_g**2, (1, 1), order="F")
    prob.add_lmi(
        "trs_dual",
        cp.bmat([[lam * np.eye(n) + q, off], [off.conj().T, corner]]),
    )
    prob.maximize(gamma)
    sol = solve(prob, settings).require()

    lam_star, e_star = _secular_minimizer(q, g, eps_g)
    candidates: List[ComplexVector] = [e_star]
    gamma_value = math.nan
    if sol.feasible:
        gamma_value = sol.value("gamma")
        recovered = _inverse_recovery(q, g, sol.value("lam"))
        norm = float(np.linalg.norm(recovered))
        if norm > eps_g:
            recovered = recovered * (eps_g / norm)
        candidates.append(recovered)
    values = [quad_form(g + c, q) for c in candidates]
    pick = int(np.argmin(values))
    if math.isnan(gamma_value):
        gamma_value = values[pick]
    return WorstMismatch(candidates[pick], lam_star, gamma_value, values[pick])


def null_steering(g_b: npt.ArrayLike, g_e: npt.ArrayLike) -> ComplexVector:
    """Unit beamformer ``(I - P_gb) g_e^H / ||(I - P_gb) g_e^H||``.

    Raises:
        ValueError: If ``g_e`` lies in the span of ``g_b`` (degenerate
        jammer).
    """
    ge = as_vector(g_e)
    w = null_projector(g_b) @ ge.conj()
    norm = float(np.linalg.norm(w))
    if norm <= 1e-9 * float(np.linalg.norm(ge)):
        raise ValueError(
            "Helper channels to Bob and Eve are parallel; null steering "
            "has no jamming direction."
        )
    return w / norm


def verify_rank_one(q_z: npt.ArrayLike, tol: float = 1e-6) -> bool:
    """True iff the second eigenvalue is at most ``tol`` times the first."""
    vals = eigenvalues(q_z)[::-1]
    if vals[0] <= 0.0:
        return False
    if vals.size == 1:
        return True
    return bool(max(vals[1], 0.0) / vals[0] <= tol)


def effective_noise(
    ch: ChannelSet,
    q_z: npt.ArrayLike,
    e_g: npt.ArrayLike,
    sigma_sq: float,
) -> float:
    """``sigma_z^2 = sigma^2 + (g_e + e_g) Qz (g_e + e_g)^H``."""
    return sigma_sq + max(quad_form(ch.g_e_est + as_vector(e_g), q_z), 0.0)


def cj_result(
    scheme: str,
    ch: ChannelSet,
    params: SystemParams,
    q_x: HermitianMatrix,
    q_z: HermitianMatrix,
    mm: MismatchPair,
    **kwargs: object,
) -> SchemeResult:
    """Package a CJ covariance pair evaluated at the errors ``mm``."""
    return SchemeResult(
        scheme=scheme,
        q_x=q_x,
        q_z=q_z,
        worst_mismatch=mm,
        secrecy_rate_bits=secrecy_rate_cj(ch, q_x, q_z, mm, params.sigma_sq),
        eve_metric=eve_sinr(ch, q_x, q_z, mm, params.sigma_sq),
        bob_metric=bob_sinr(ch, q_x, q_z, params.sigma_sq),
        **kwargs,  # type: ignore[arg-type]
    )


def solve_qx_given_jamming(
    ch: ChannelSet,
    params: SystemParams,
    q_z: npt.ArrayLike,
    e_g: npt.ArrayLike,
    delta: float = 1e-4,
    max_iter: int = 60,
    numerator: Numerator = "printed",
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Robust information covariance for a fixed jamming covariance.

    With ``numerator="printed"`` the jamming noise
    ``sigma_z^2 = sigma^2 + (g_e + e_g) Qz (g_e + e_g)^H`` joins Bob's side
    of the ratio and Eve's side keeps ``sigma^2``; ``"direct"`` swaps them,
    which is the ratio the secrecy rate itself yields under ZF jamming.
    Only ``"direct"`` reproduces the pencil of :func:`gev_beamformer_cj`
    at zero mismatch; ``"printed"`` weights the jamming noise against Bob
    and so returns a covariance whose rate there is at most the pencil's.
    The reported rate is evaluated at the worst-case errors of both
    covariances.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_s``, both radii and ``sigma_sq``.
        q_z (array): Jamming covariance.
        e_g (array): Helper-to-Eve error used in ``sigma_z^2``.
        delta (float): Bisection tolerance.
        max_iter (int): Bisection step cap.
        numerator (str): ``"printed"`` or ``"direct"``.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Status ``solver_failure`` if any conic solve errors.
    """
    ch.check(params)
    if numerator not in ("printed", "direct"):
        raise ValueError(
            f"Unknown numerator '{numerator}'. "
            "Available: ['printed', 'direct']"
        )
    qz = as_hermitian(q_z)
    sigma_z = effective_noise(ch, qz, e_g, params.sigma_sq)
    if numerator == "printed":
        eve_noise, bob_noise = params.sigma_sq, sigma_z
    else:
        eve_noise, bob_noise = sigma_z, params.sigma_sq
    try:
        if params.p_s <= 0.0:
            q_x = np.zeros((ch.n_a, ch.n_a), dtype=np.complex128)
            iterations, widths, ratio = 0, (), 1.0
            status = SchemeStatus.OPTIMAL
        else:
            design = solve_information_covariance(
                ch.h_b,
                ch.h_e_est,
                params.eps_h,
                params.p_s,
                eve_noise,
                bob_noise,
                delta=delta,
                max_iter=max_iter,
                settings=settings,
            )
            q_x = design.q_x
            iterations = design.bisection.iterations + design.polish_steps
            status = (
                SchemeStatus.MAX_ITER
                if design.bisection.status is BisectionStatus.MAX_ITER
                else SchemeStatus.OPTIMAL
            )
            widths, ratio = design.bisection.widths, design.ratio
        wm_h = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
        wm_g = worst_mismatch_cj(qz, ch.g_e_est, params.eps_g, settings)
    except (SolverFailure, BisectionError) as exc:
        logger.warning("Information covariance given jamming failed: %s", exc)
        return SchemeResult.failed(
            "robust_cj", params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return cj_result(
        "robust_cj",
        ch,
        params,
        q_x,
        qz,
        MismatchPair(wm_h.e, wm_g.e),
        iterations=iterations,
        status=status,
        trace=widths,
        design_value=ratio,
    )


def gev_beamformer_cj(
    ch: ChannelSet,
    params: SystemParams,
    q_z: npt.ArrayLike,
    e_g: Optional[npt.ArrayLike] = None,
) -> SchemeResult:
    """Information beamformer for a fixed jammer: top generalized
    eigenvector of ``(sigma^2 I + P h_b^H h_b, sigma_z^2 I + P h_e^H h_e)``
    on the estimated Eve channel, evaluated at ``(0, e_g)``."""
    ch.check(params)
    if params.p_s <= 0.0:
        raise ValueError(f"GEV beamforming needs P_S > 0, got {params.p_s}")
    qz = as_hermitian(q_z)
    err = np.zeros(ch.n_h, dtype=np.complex128)
    if e_g is not None:
        err = as_vector(e_g)
    sigma_z = effective_noise(ch, qz, err, params.sigma_sq)
    q_x = pencil_beamformer(
        ch.h_b, ch.h_e_est, params.p_s, params.sigma_sq, sigma_z
    )
    mm = MismatchPair(np.zeros(ch.n_a, dtype=np.complex128), err)
    return cj_result("gev_cj", ch, params, q_x, qz, mm)


def null_steering_jammer(ch: ChannelSet, power: float) -> HermitianMatrix:
    """``power * w w^H`` along the null-steering direction, or zero when
    no ZF jamming direction exists."""
    n = ch.n_h
    if power <= 0.0 or n == 1:
        return np.zeros((n, n), dtype=np.complex128)
    try:
        w = null_steering(ch.g_b, ch.g_e_est)
    except ValueError:
        return np.zeros((n, n), dtype=np.complex128)
    return power * np.outer(w, w.conj())


def nonrobust_cj(
    ch: ChannelSet,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Null-steering jammer at full ``P_J`` and the GEV information
    beamformer, both designed on the estimated channels and evaluated at
    the worst-case errors of their own covariances."""
    q_z = null_steering_jammer(ch, params.p_j)
    q_x = gev_beamformer_cj(ch, params, q_z).q_x
    try:
        wm_h = worst_mismatch_dt(q_x, ch.h_e_est, params.eps_h, settings)
        wm_g = worst_mismatch_cj(q_z, ch.g_e_est, params.eps_g, settings)
    except SolverFailure as exc:
        return SchemeResult.failed(
            "nonrobust_cj", params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return cj_result(
        "nonrobust_cj", ch, params, q_x, q_z, MismatchPair(wm_h.e, wm_g.e)
    )


def robust_cj(
    ch: ChannelSet,
    params: SystemParams,
    delta: float = 1e-4,
    max_iter: int = 60,
    numerator: Numerator = "printed",
    settings: Optional[SolverSettings] = None,
) -> SchemeResult:
    """Robust cooperative jamming with individual budgets: jamming SDP,
    its worst-case error, then the information covariance given both.

    Args:
        ch (ChannelSet): Channel draw.
        params (SystemParams): Uses ``p_s``, ``p_j``, both radii and
        ``sigma_sq``.
        delta (float): Bisection tolerance.
        max_iter (int): Bisection step cap.
        numerator (str): ``"printed"`` or ``"direct"``.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        SchemeResult: Status ``solver_failure`` if any conic solve errors.
    """
    try:
        jam = solve_robust_jamming(ch, params, settings)
        wm_g = worst_mismatch_cj(jam.q_z, ch.g_e_est, params.eps_g, settings)
    except SolverFailure as exc:
        logger.warning("robust_cj jamming step failed: %s", exc)
        return SchemeResult.failed(
            "robust_cj", params, SchemeStatus.SOLVER_FAILURE, str(exc)
        )
    return solve_qx_given_jamming(
        ch,
        params,
        jam.q_z,
        wm_g.e,
        delta=delta,
        max_iter=max_iter,
        numerator=numerator,
        settings=settings,
    )
