import dataclasses
import logging
import math
import numpy as np
from dataclasses import dataclass
from pydantic import validate_call
from typing import List, Optional
from .conic import SolverSettings
from .direct import (
    gev_beamformer_dt,
    solve_robust_dt,
    sprocedure_eve_bound,
    worst_mismatch_dt,
)
from .jamming import solve_robust_jamming, verify_rank_one, worst_mismatch_cj
from .model import SchemeStatus, SystemParams, sample_channels
from .oracles import (
    brute_force_dt,
    brute_force_jamming,
    power_grid_search,
    worst_eve_power,
)
from .power import ChannelConstants, PowerSplit, single_condensation_loop
from .qos import (
    qos_met,
    relaxed_zf_qos,
    solve_qos_dt_nonrobust,
    solve_qos_dt_robust,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    instances: int
    worst: float
    tolerance: float
    detail: str = ""


def _random_psd(rng: np.random.Generator, n: int, trace: float) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q = a @ a.conj().T
    return trace * q / np.real(np.trace(q))


def _random_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.normal(size=n) + 1j * rng.normal(size=n)) / math.sqrt(2.0)


def _check(
    name: str,
    errors: List[float],
    tolerance: float,
    detail: str = "",
) -> CheckResult:
    worst = max(errors) if errors else 0.0
    return CheckResult(
        name=name,
        passed=bool(worst <= tolerance),
        instances=len(errors),
        worst=worst,
        tolerance=tolerance,
        detail=detail,
    )


def check_trust_region_duality(
    count: int, seed: int, settings: Optional[SolverSettings] = None
) -> CheckResult:
    """Primal worst-case values against the dual ``gamma`` of both
    trust-region problems."""
    rng = np.random.default_rng(seed)
    errors: List[float] = []
    for _ in range(count):
        eps = float(rng.uniform(0.3, 1.5))
        h = _random_vector(rng, 4)
        q = _random_psd(rng, 4, 1.0)
        for wm in (
            worst_mismatch_dt(q, h, eps, settings),
            worst_mismatch_cj(q, h, eps, settings),
        ):
            errors.append(abs(wm.value - wm.gamma) / max(1.0, abs(wm.value)))
    return _check("trust-region duality", errors, 1e-5)


def check_sprocedure_sampling(
    count: int, seed: int, settings: Optional[SolverSettings] = None
) -> CheckResult:
    """S-procedure Eve power bound against ball sampling at ``N_a = 2``."""
    rng = np.random.default_rng(seed)
    errors: List[float] = []
    for i in range(count):
        eps = float(rng.uniform(0.3, 1.5))
        h = _random_vector(rng, 2)
        q = _random_psd(rng, 2, 1.0)
        bound = sprocedure_eve_bound(q, h, eps, settings)
        sampled = worst_eve_power(q, h, eps, seed=seed + i)
        errors.append(abs(bound - sampled) / max(sampled, 1e-9))
    return _check("S-procedure vs sampling", errors, 1e-2)


def check_rank_one_jamming(
    count: int, seed: int, settings: Optional[SolverSettings] = None
) -> CheckResult:
    """Zero-forcing jamming designed with exact Eve CSI is rank one."""
    params = SystemParams(n_a=4, n_h=4, p_j=10.0, eps_g_sq=0.0)
    errors: List[float] = []
    for i in range(count):
        ch = sample_channels(params, seed + i)
        q_z = solve_robust_jamming(ch, params, settings).q_z
        errors.append(0.0 if verify_rank_one(q_z) else 1.0)
    return _check("rank-one jamming at eps_g = 0", errors, 0.0)


def check_condensation_grid(count: int, seed: int, n: int) -> CheckResult:
    """Successive condensation against an ``n x n`` power grid."""
    rng = np.random.default_rng(seed)
    errors: List[float] = []
    monotone = True
    for _ in range(count):
        c = ChannelConstants(*(float(x) for x in rng.exponential(2.0, 3)))
        budget = float(rng.uniform(1.0, 20.0))
        run = single_condensation_loop(
            PowerSplit(p1=budget / 2, p2=budget / 2, budget=budget), c, 1.0
        )
        if run.status is SchemeStatus.SOLVER_FAILURE:
            errors.append(1.0)
            continue
        monotone &= all(b >= a for a, b in zip(run.trace, run.trace[1:]))
        _, grid_value = power_grid_search(c, 1.0, budget, n)
        errors.append(max(grid_value - run.trace[-1], 0.0) / grid_value)
    detail = "" if monotone else "objective trace decreased"
    result = _check("condensation vs power grid", errors, 1e-3, detail)
    if not monotone:
        result = dataclasses.replace(result, passed=False)
    return result


def check_dt_brute_force(
    count: int,
    seed: int,
    resolution: int = 8,
    settings: Optional[SolverSettings] = None,
) -> CheckResult:
    """Robust DT rate at ``N_a = 2`` against covariance grid search."""
    params = SystemParams(n_a=2, n_h=2, p_s=3.0, eps_h_sq=0.2)
    errors: List[float] = []
    for i in range(count):
        ch = sample_channels(params, seed + i)
        solved = solve_robust_dt(ch, params, settings=settings)
        _, oracle = brute_force_dt(ch, params, resolution)
        errors.append(
            abs(solved.secrecy_rate_bits - oracle) / max(oracle, 1e-2)
        )
    return _check("robust DT vs brute force", errors, 2e-2)


def check_zero_mismatch(
    count: int, seed: int, settings: Optional[SolverSettings] = None
) -> CheckResult:
    """Robust DT at zero mismatch against the closed-form GEV rate."""
    errors: List[float] = []
    for i in range(count):
        power_db = (0.0, 5.0, 10.0)[i % 3]
        params = SystemParams(p_s=10.0 ** (power_db / 10.0))
        ch = sample_channels(params, seed + i)
        robust = solve_robust_dt(ch, params, settings=settings)
        closed = gev_beamformer_dt(ch, params)
        errors.append(abs(robust.secrecy_rate_bits - closed.secrecy_rate_bits))
    return _check("zero-mismatch DT vs GEV", errors, 1e-3)


def check_jamming_brute_force(
    count: int,
    seed: int,
    resolution: int = 8,
    settings: Optional[SolverSettings] = None,
) -> CheckResult:
    """Worst-case jamming power at Eve at ``N_h = 2`` against a grid over
    the null space of ``g_b``."""
    params = SystemParams(n_a=2, n_h=2, p_j=3.0, eps_g_sq=0.2)
    errors: List[float] = []
    for i in range(count):
        ch = sample_channels(params, seed + i)
        jam = solve_robust_jamming(ch, params, settings)
        solved = worst_mismatch_cj(
            jam.q_z, ch.g_e_est, params.eps_g, settings
        ).value
        _, oracle = brute_force_jamming(ch, params, resolution)
        errors.append(abs(solved - oracle) / max(oracle, 1e-2))
    return _check("robust jamming vs brute force", errors, 2e-2)


def check_qos_designs(
    count: int, seed: int, settings: Optional[SolverSettings] = None
) -> List[CheckResult]:
    """Robust DT leaks no more worst-case Eve SNR than the non-robust
    design, and every non-outage QoS beam meets Bob's target."""
    params = SystemParams(
        n_a=4, n_h=4, p_total=10.0, gamma_t=3.0, eps_h_sq=0.5
    )
    leak: List[float] = []
    missed: List[float] = []
    for i in range(count):
        ch = sample_channels(params, seed + i)
        robust = solve_qos_dt_robust(ch, params, settings)
        nominal = solve_qos_dt_nonrobust(ch, params, settings)
        zf = relaxed_zf_qos(ch, params, settings)
        if robust.ok and nominal.ok:
            excess = robust.eve_metric - nominal.eve_metric
            leak.append(max(excess, 0.0) / max(nominal.eve_metric, 1e-6))
        for result in (robust, nominal, zf):
            failed = result.status is SchemeStatus.SOLVER_FAILURE
            met = qos_met(result, params.gamma_t, tol=1e-4 * params.gamma_t)
            missed.append(0.0 if met and not failed else 1.0)
    return [
        _check("robust vs non-robust QoS Eve SNR", leak, 1e-3),
        _check("QoS targets met", missed, 0.0),
    ]


@validate_call(config={"arbitrary_types_allowed": True})
def verify(
    full: bool = False,
    seed: int = 0,
    settings: Optional[SolverSettings] = None,
) -> List[CheckResult]:
    """Run the oracle suites.

    Args:
        full (bool): Use the full instance counts instead of the quick
        ones.
        seed (int): Base seed for random instances.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        list: One CheckResult per suite.
    """
    scale = 1 if full else 0
    counts = {
        "duality": (10, 100)[scale],
        "sprocedure": (10, 100)[scale],
        "rank": (10, 100)[scale],
        "grid": (10, 100)[scale],
        "brute": (2, 20)[scale],
        "zero": (6, 50)[scale],
        "jamming": (2, 20)[scale],
        "qos": (5, 50)[scale],
    }
    results = [
        check_trust_region_duality(counts["duality"], seed, settings),
        check_sprocedure_sampling(counts["sprocedure"], seed, settings),
        check_rank_one_jamming(counts["rank"], seed, settings),
        check_condensation_grid(counts["grid"], seed, (200, 400)[scale]),
        check_dt_brute_force(counts["brute"], seed, settings=settings),
        check_zero_mismatch(counts["zero"], seed, settings),
        check_jamming_brute_force(counts["jamming"], seed, settings=settings),
        *check_qos_designs(counts["qos"], seed, settings),
    ]
    for r in results:
        logger.info(
            "%s: %s (worst %.3g, tol %.3g)",
            r.name,
            "pass" if r.passed else "FAIL",
            r.worst,
            r.tolerance,
        )
    return results
