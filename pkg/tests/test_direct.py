import math
import numpy as np
import pytest
from _pytest.monkeypatch import MonkeyPatch
from robustwiretap import conic
from robustwiretap.direct import (
    gev_beamformer_dt,
    nonrobust_dt,
    robust_dt_feasible,
    solve_robust_dt,
    sprocedure_eve_bound,
    worst_mismatch_dt,
)
from robustwiretap.linalg import eigenvalues, quad_form
from robustwiretap.model import SchemeStatus, SystemParams, sample_channels
from typing import List, Optional


def _random_covariance(seed: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q = a @ a.conj().T
    return q / np.real(np.trace(q))


def test_worst_mismatch_rank_one_closed_form() -> None:
    q = np.diag([1.0, 0.0]).astype(complex)
    h = np.array([1.0, 0.5])
    wm = worst_mismatch_dt(q, h, 0.5)
    assert wm.value == pytest.approx(2.25, rel=1e-6)
    assert wm.gamma == pytest.approx(2.25, rel=1e-5)
    assert np.linalg.norm(wm.e) == pytest.approx(0.5, rel=1e-6)


def test_worst_mismatch_zero_radius() -> None:
    q = _random_covariance(0, 3)
    h = np.array([1.0, 1j, -1.0])
    wm = worst_mismatch_dt(q, h, 0.0)
    assert np.allclose(wm.e, 0.0)
    assert wm.value == pytest.approx(quad_form(h, q))


def test_worst_mismatch_invalid_inputs() -> None:
    q = np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        worst_mismatch_dt(q, np.ones(2), -0.1)
    with pytest.raises(ValueError):
        worst_mismatch_dt(q, np.ones(3), 0.1)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_sprocedure_bound_matches_trust_region(seed: int) -> None:
    q = _random_covariance(seed, 3)
    h = sample_channels(SystemParams(n_a=3, n_h=3), seed).h_e_est
    wm = worst_mismatch_dt(q, h, 0.8)
    bound = sprocedure_eve_bound(q, h, 0.8)
    assert bound == pytest.approx(wm.value, rel=1e-5)
    assert wm.gamma == pytest.approx(wm.value, rel=1e-5)


def test_gev_beamformer_is_rank_one_full_power() -> None:
    params = SystemParams(p_s=3.0)
    ch = sample_channels(params, 11)
    result = gev_beamformer_dt(ch, params)
    vals = eigenvalues(result.q_x)
    assert vals[-1] == pytest.approx(3.0)
    assert vals[-2] == pytest.approx(0.0, abs=1e-9)
    iso = (3.0 / 4) * np.eye(4)
    bob = 1 + quad_form(ch.h_b, iso)
    eve = 1 + quad_form(ch.h_e_est, iso)
    assert result.secrecy_rate_bits >= max(0.0, math.log2(bob / eve))


def test_gev_requires_power() -> None:
    params = SystemParams(p_s=0.0)
    with pytest.raises(ValueError):
        gev_beamformer_dt(sample_channels(params, 0), params)
    with pytest.raises(ValueError):
        solve_robust_dt(sample_channels(params, 0), params)


@pytest.mark.parametrize("seed", [4, 5])
def test_robust_dt_zero_mismatch_matches_gev(seed: int) -> None:
    params = SystemParams(p_s=10 ** 0.5)
    ch = sample_channels(params, seed)
    robust = solve_robust_dt(ch, params)
    closed = gev_beamformer_dt(ch, params)
    assert robust.status is SchemeStatus.OPTIMAL
    assert robust.secrecy_rate_bits == pytest.approx(
        closed.secrecy_rate_bits, abs=1e-3
    )


def test_robust_dt_beats_nonrobust_under_mismatch() -> None:
    params = SystemParams(p_s=10 ** 0.5, eps_h_sq=1.5)
    for seed in (6, 7):
        ch = sample_channels(params, seed)
        robust = solve_robust_dt(ch, params)
        naive = nonrobust_dt(ch, params)
        assert robust.ok
        assert robust.secrecy_rate_bits >= naive.secrecy_rate_bits - 1e-3
        assert robust.p1 <= params.p_s + 1e-6
        assert robust.worst_mismatch.within(params.eps_h, 0.0, tol=1e-6)


def test_robust_dt_rate_matches_design_ratio() -> None:
    params = SystemParams(p_s=5.0, eps_h_sq=0.5)
    ch = sample_channels(params, 9)
    result = solve_robust_dt(ch, params)
    expected = max(0.0, -math.log2(result.design_value))
    assert result.secrecy_rate_bits == pytest.approx(expected, abs=2e-3)
    assert result.iterations > 0
    widths = result.trace
    assert all(b <= a for a, b in zip(widths, widths[1:]))


def test_robust_dt_feasibility_is_monotone() -> None:
    params = SystemParams(p_s=5.0, eps_h_sq=0.5)
    ch = sample_channels(params, 9)
    result = solve_robust_dt(ch, params)
    assert robust_dt_feasible(ch, params, result.design_value * 1.05)
    lower = 1.0 / (1.0 + params.p_s * np.linalg.norm(ch.h_b) ** 2)
    assert not robust_dt_feasible(ch, params, 0.5 * lower)


@pytest.mark.parametrize("power_db", [0.0, 5.0, 10.0])
def test_robust_dt_solves_large_mismatch(power_db: float) -> None:
    params = SystemParams(p_s=10 ** (power_db / 10), eps_h_sq=1.5)
    for seed in (0, 1):
        result = solve_robust_dt(sample_channels(params, seed), params)
        assert result.status is SchemeStatus.OPTIMAL, result.message
        assert result.secrecy_rate_bits >= 0.0
        assert 0.0 < result.design_value


def test_robust_dt_tolerates_backend_errors_inside_bracket(
    monkeypatch: MonkeyPatch,
) -> None:
    params = SystemParams(p_s=10 ** 0.5, eps_h_sq=1.5)
    ch = sample_channels(params, 3)
    clean = solve_robust_dt(ch, params)
    real_solve = conic.solve
    calls: List[str] = []

    def flaky(
        problem: conic.ConicProblem,
        settings: Optional[conic.SolverSettings] = None,
    ) -> conic.ConicSolution:
        calls.append(problem.name)
        # the two bracket ends are calls 1 and 2
        if problem.name == "dt_ratio" and len(calls) % 3 == 0:
            return conic.ConicSolution(
                status=conic.SolveStatus.ERROR, message="stalled"
            )
        return real_solve(problem, settings)

    monkeypatch.setattr(conic, "solve", flaky)
    result = solve_robust_dt(ch, params)
    assert result.status is SchemeStatus.OPTIMAL
    assert len(calls) > 3
    assert result.secrecy_rate_bits <= clean.secrecy_rate_bits + 1e-3
    assert result.secrecy_rate_bits >= 0.0


def test_robust_dt_rate_non_increasing_in_mismatch() -> None:
    for seed in (2, 8):
        rates = []
        for eps_sq in (0.0, 0.5, 1.5):
            params = SystemParams(p_s=10 ** 0.5, eps_h_sq=eps_sq)
            result = solve_robust_dt(sample_channels(params, seed), params)
            assert result.ok
            rates.append(result.secrecy_rate_bits)
        assert all(b <= a + 1e-3 for a, b in zip(rates, rates[1:]))
