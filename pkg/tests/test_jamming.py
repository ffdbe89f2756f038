import numpy as np
import pytest
from robustwiretap.direct import solve_robust_dt
from robustwiretap.jamming import (
    effective_noise,
    gev_beamformer_cj,
    nonrobust_cj,
    null_steering,
    null_steering_jammer,
    robust_cj,
    solve_qx_given_jamming,
    solve_robust_jamming,
    verify_rank_one,
    worst_mismatch_cj,
)
from robustwiretap.linalg import gram, null_projector, quad_form
from robustwiretap.model import (
    ChannelSet,
    SchemeStatus,
    SystemParams,
    bob_sinr,
    sample_channels,
)


@pytest.fixture
def params() -> SystemParams:
    return SystemParams(n_a=3, n_h=3, p_s=3.0, p_j=3.0)


def test_jamming_zero_forces_bob(params: SystemParams) -> None:
    ch = sample_channels(params, 1)
    jam = solve_robust_jamming(ch, params)
    assert quad_form(ch.g_b, jam.q_z) == pytest.approx(0.0, abs=1e-7)
    assert np.real(np.trace(jam.q_z)) <= params.p_j + 1e-7
    # exact Eve CSI: the whole budget on the projected Eve direction
    proj = null_projector(ch.g_b)
    best = params.p_j * np.linalg.norm(proj @ ch.g_e_est.conj()) ** 2
    assert jam.objective == pytest.approx(best, rel=1e-4)
    assert verify_rank_one(jam.q_z)


def test_jamming_degenerate_cases(params: SystemParams) -> None:
    single = SystemParams(n_a=3, n_h=1, p_j=3.0)
    ch = sample_channels(single, 0)
    assert np.allclose(solve_robust_jamming(ch, single).q_z, 0.0)
    ch = sample_channels(params, 0)
    zero = ChannelSet(ch.h_b, np.zeros(3), ch.h_e_est, ch.g_e_est)
    with pytest.raises(ValueError):
        solve_robust_jamming(zero, params)


def test_worst_mismatch_cj_closed_forms() -> None:
    q = np.diag([1.0, 0.0]).astype(complex)
    g = np.array([1.0, 0.0])
    inside = worst_mismatch_cj(q, g, 2.0)
    assert inside.value == pytest.approx(0.0, abs=1e-9)
    boundary = worst_mismatch_cj(q, g, 0.5)
    assert boundary.value == pytest.approx(0.25, rel=1e-6)
    assert boundary.gamma == pytest.approx(0.25, rel=1e-5)
    with pytest.raises(ValueError):
        worst_mismatch_cj(q, g, -1.0)


def test_null_steering_direction() -> None:
    g_b = np.array([1.0, 1j, 0.0])
    g_e = np.array([0.5, 1.0, 2.0])
    w = null_steering(g_b, g_e)
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert abs(g_b @ w) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        null_steering(g_b, 2.0 * g_b)


def test_verify_rank_one() -> None:
    assert verify_rank_one(gram(np.array([1.0, 2.0])))
    assert not verify_rank_one(np.eye(2))
    assert not verify_rank_one(np.zeros((2, 2)))


def test_effective_noise(params: SystemParams) -> None:
    ch = sample_channels(params, 2)
    q_z = null_steering_jammer(ch, 2.0)
    noise = effective_noise(ch, q_z, np.zeros(3), 1.0)
    assert noise == pytest.approx(1.0 + quad_form(ch.g_e_est, q_z))
    assert noise > 1.0


def test_nonrobust_cj_spends_full_budget(params: SystemParams) -> None:
    ch = sample_channels(params, 3)
    result = nonrobust_cj(ch, params)
    assert result.status is SchemeStatus.OPTIMAL
    assert result.p2 == pytest.approx(params.p_j)
    assert result.p1 == pytest.approx(params.p_s)
    gev = gev_beamformer_cj(ch, params, result.q_z)
    assert np.allclose(gev.q_x, result.q_x)


def test_robust_cj_improves_on_robust_dt() -> None:
    params = SystemParams(
        n_a=3, n_h=3, p_s=3.0, p_j=3.0, eps_h_sq=0.5, eps_g_sq=0.5
    )
    for seed in (4, 5):
        ch = sample_channels(params, seed)
        cj = robust_cj(ch, params, numerator="direct")
        dt = solve_robust_dt(ch, params)
        assert cj.ok and dt.ok
        assert cj.secrecy_rate_bits >= dt.secrecy_rate_bits - 1e-3
        assert quad_form(ch.g_b, cj.q_z) == pytest.approx(0.0, abs=1e-7)


def test_solve_qx_rejects_unknown_numerator(params: SystemParams) -> None:
    ch = sample_channels(params, 0)
    with pytest.raises(ValueError):
        solve_qx_given_jamming(
            ch,
            params,
            np.zeros((3, 3)),
            np.zeros(3),
            numerator="other",  # type: ignore[arg-type]
        )


@pytest.mark.parametrize("seed", [2, 3])
def test_jamming_rank_one_with_exact_eve_csi(seed: int) -> None:
    params = SystemParams(n_a=4, n_h=4, p_s=10.0, p_j=10.0)
    ch = sample_channels(params, seed)
    jam = solve_robust_jamming(ch, params)
    assert verify_rank_one(jam.q_z)
    assert np.real(np.trace(jam.q_z)) == pytest.approx(params.p_j)
    assert quad_form(ch.g_b, jam.q_z) == pytest.approx(0.0, abs=1e-9)
    steered = null_steering_jammer(ch, params.p_j)
    assert jam.objective == pytest.approx(
        quad_form(ch.g_e_est, steered), rel=1e-5
    )


def test_direct_numerator_matches_jamming_pencil() -> None:
    power = 10.0**0.5
    params = SystemParams(n_a=4, n_h=4, p_s=power, p_j=power)
    for seed in (0, 1):
        ch = sample_channels(params, seed)
        cj = robust_cj(ch, params, numerator="direct")
        jam = solve_robust_jamming(ch, params)
        gev = gev_beamformer_cj(ch, params, jam.q_z)
        assert cj.ok
        assert cj.secrecy_rate_bits == pytest.approx(
            gev.secrecy_rate_bits, abs=1e-3
        )


def test_printed_numerator_keeps_budgets_and_zero_forcing() -> None:
    params = SystemParams(
        n_a=3, n_h=3, p_s=3.0, p_j=3.0, eps_h_sq=0.5, eps_g_sq=0.5
    )
    ch = sample_channels(params, 6)
    cj = robust_cj(ch, params)
    assert cj.ok
    assert quad_form(ch.g_b, cj.q_z) == pytest.approx(0.0, abs=1e-7)
    assert np.real(np.trace(cj.q_x)) <= params.p_s + 1e-6
    assert np.real(np.trace(cj.q_z)) <= params.p_j + 1e-6
    gev = gev_beamformer_cj(ch, params, cj.q_z, cj.worst_mismatch.e_g)
    assert cj.secrecy_rate_bits <= gev.secrecy_rate_bits + 1e-3


def test_silent_jammer_reduces_to_direct_transmission() -> None:
    params = SystemParams(
        n_a=3, n_h=3, p_s=3.0, p_j=3.0, eps_h_sq=0.5, eps_g_sq=0.5
    )
    ch = sample_channels(params, 7)
    silent = np.zeros((3, 3), dtype=np.complex128)
    dt = solve_robust_dt(ch, params)
    for numerator in ("printed", "direct"):
        cj = solve_qx_given_jamming(
            ch, params, silent, np.zeros(3), numerator=numerator
        )
        assert cj.ok and dt.ok
        assert cj.secrecy_rate_bits == pytest.approx(
            dt.secrecy_rate_bits, abs=1e-3
        )


@pytest.mark.parametrize("eps_g_sq", [0.0, 0.5])
def test_bob_sinr_unaffected_by_zero_forced_jamming(eps_g_sq: float) -> None:
    params = SystemParams(
        n_a=3, n_h=3, p_s=3.0, p_j=3.0, eps_h_sq=0.5, eps_g_sq=eps_g_sq
    )
    ch = sample_channels(params, 4)
    cj = robust_cj(ch, params)
    assert cj.ok
    silent = np.zeros_like(cj.q_z)
    assert bob_sinr(ch, cj.q_x, cj.q_z, params.sigma_sq) == pytest.approx(
        bob_sinr(ch, cj.q_x, silent, params.sigma_sq), rel=1e-6
    )
