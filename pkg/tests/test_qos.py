import numpy as np
import pytest
from robustwiretap.linalg import quad_form
from robustwiretap.model import (
    ChannelSet,
    SchemeStatus,
    SystemParams,
    sample_channels,
)
from robustwiretap.qos import (
    qos_met,
    relaxed_zf_qos,
    solve_qos_cj_nonrobust,
    solve_qos_cj_robust,
    solve_qos_dt_nonrobust,
    solve_qos_dt_robust,
)


@pytest.fixture
def params() -> SystemParams:
    return SystemParams(
        n_a=3,
        n_h=3,
        p_total=10.0,
        gamma_t=10 ** 0.5,
        eps_h_sq=0.5,
        eps_g_sq=0.5,
    )


def test_relaxed_zf_meets_target_exactly(params: SystemParams) -> None:
    ch = sample_channels(params, 0)
    result = relaxed_zf_qos(ch, params)
    assert result.status is SchemeStatus.OPTIMAL
    assert result.bob_metric == pytest.approx(params.gamma_t)
    assert quad_form(ch.h_e_est, result.q_x) == pytest.approx(0.0, abs=1e-9)
    assert result.p1 <= params.p_total


def test_relaxed_zf_outages(params: SystemParams) -> None:
    single = params.model_copy(update={"n_a": 1})
    assert (
        relaxed_zf_qos(sample_channels(single, 0), single).status
        is SchemeStatus.OUTAGE
    )
    ch = sample_channels(params, 0)
    parallel = ChannelSet(ch.h_b, ch.g_b, 2.0 * ch.h_b, ch.g_e_est)
    assert (
        relaxed_zf_qos(parallel, params).status is SchemeStatus.OUTAGE
    )
    greedy = params.model_copy(update={"gamma_t": 1e6})
    assert relaxed_zf_qos(ch, greedy).status is SchemeStatus.OUTAGE


def test_unreachable_target_is_outage(params: SystemParams) -> None:
    greedy = params.model_copy(update={"gamma_t": 1e6})
    ch = sample_channels(greedy, 1)
    for design in (
        solve_qos_dt_nonrobust,
        solve_qos_dt_robust,
        solve_qos_cj_robust,
        solve_qos_cj_nonrobust,
    ):
        result = design(ch, greedy)
        assert result.status is SchemeStatus.OUTAGE
        assert qos_met(result, greedy.gamma_t)


def test_invalid_target(params: SystemParams) -> None:
    zero = params.model_copy(update={"gamma_t": 0.0})
    ch = sample_channels(zero, 0)
    with pytest.raises(ValueError):
        solve_qos_dt_robust(ch, zero)
    with pytest.raises(ValueError):
        relaxed_zf_qos(ch, zero)


def test_zero_mismatch_nulls_eve(params: SystemParams) -> None:
    exact = params.model_copy(update={"eps_h_sq": 0.0, "eps_g_sq": 0.0})
    ch = sample_channels(exact, 2)
    for design in (solve_qos_dt_nonrobust, solve_qos_dt_robust):
        result = design(ch, exact)
        assert result.ok
        assert result.eve_metric <= 1e-6
        assert qos_met(result, exact.gamma_t)


def test_robust_dt_bounds_nonrobust(params: SystemParams) -> None:
    for seed in (3, 4):
        ch = sample_channels(params, seed)
        robust = solve_qos_dt_robust(ch, params)
        naive = solve_qos_dt_nonrobust(ch, params)
        assert robust.ok and naive.ok
        assert qos_met(robust, params.gamma_t)
        assert qos_met(naive, params.gamma_t)
        assert robust.eve_metric <= naive.eve_metric * (1 + 1e-4) + 1e-6
        assert robust.p1 <= params.p_total + 1e-6


def test_robust_cj_not_worse_than_robust_dt(params: SystemParams) -> None:
    for seed in (5, 6):
        ch = sample_channels(params, seed)
        cj = solve_qos_cj_robust(ch, params)
        dt = solve_qos_dt_robust(ch, params)
        assert cj.ok and dt.ok
        assert qos_met(cj, params.gamma_t)
        assert cj.eve_metric <= dt.eve_metric * (1 + 1e-3) + 2e-4
        assert cj.p1 + cj.p2 <= params.p_total + 1e-6


def test_nonrobust_cj_spends_residual_power(params: SystemParams) -> None:
    ch = sample_channels(params, 7)
    result = solve_qos_cj_nonrobust(ch, params)
    assert result.ok
    assert result.p1 + result.p2 == pytest.approx(params.p_total)
    assert quad_form(ch.g_b, result.q_z) == pytest.approx(0.0, abs=1e-9)
    assert qos_met(result, params.gamma_t)
    dt = solve_qos_dt_nonrobust(ch, params)
    assert np.allclose(result.q_x, dt.q_x)
