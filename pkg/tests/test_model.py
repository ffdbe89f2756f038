import math
import numpy as np
import pytest
from pydantic import ValidationError
from robustwiretap.linalg import gram
from robustwiretap.model import (
    ChannelSet,
    Direction,
    MismatchPair,
    SchemeResult,
    SchemeStatus,
    SystemParams,
    bob_sinr,
    eve_sinr,
    sample_channels,
    secrecy_rate_cj,
    secrecy_rate_dt,
    worst_mismatch_sampled,
)


@pytest.fixture
def channels() -> ChannelSet:
    return ChannelSet(
        h_b=np.array([2.0, 0.0]),
        g_b=np.array([1.0, 0.0]),
        h_e_est=np.array([0.0, 1.0]),
        g_e_est=np.array([0.0, 1.0]),
    )


def test_params_validation() -> None:
    with pytest.raises(ValidationError):
        SystemParams(sigma_sq=0.0)
    with pytest.raises(ValidationError):
        SystemParams(eps_h_sq=-1.0)
    params = SystemParams(eps_h_sq=0.25)
    assert params.eps_h == pytest.approx(0.5)
    assert params.with_budgets(3.0, 4.0).p_j == 4.0


def test_sample_channels_is_deterministic() -> None:
    params = SystemParams(n_a=3, n_h=2)
    a = sample_channels(params, 7)
    b = sample_channels(params, 7)
    c = sample_channels(params, 8)
    assert np.array_equal(a.h_b, b.h_b)
    assert np.array_equal(a.g_e_est, b.g_e_est)
    assert not np.array_equal(a.h_b, c.h_b)
    assert a.n_a == 3 and a.n_h == 2


def test_channel_dimension_mismatch() -> None:
    with pytest.raises(ValueError):
        ChannelSet(np.ones(2), np.ones(2), np.ones(3), np.ones(2))
    ch = sample_channels(SystemParams(n_a=2, n_h=2), 0)
    with pytest.raises(ValueError):
        ch.check(SystemParams(n_a=4, n_h=2))


def test_sinr_and_rates(channels: ChannelSet) -> None:
    q_x = np.diag([1.0, 0.0]).astype(complex)
    q_z = np.diag([0.0, 1.0]).astype(complex)
    zero = MismatchPair.zero(2, 2)
    assert bob_sinr(channels, q_x, q_z, 1.0) == pytest.approx(4.0)
    assert eve_sinr(channels, q_x, q_z, zero, 1.0) == pytest.approx(0.0)
    rate = secrecy_rate_cj(channels, q_x, q_z, zero, 1.0)
    assert rate == pytest.approx(math.log2(5.0))
    # Eve's estimate aligned with Alice's beam gives zero secrecy
    leak = secrecy_rate_dt(channels, q_x, np.array([2.0, -1.0]), 1.0)
    assert leak == pytest.approx(0.0)


def test_scheme_result_defaults(channels: ChannelSet) -> None:
    q_x = gram(np.array([1.0, 1.0]))
    result = SchemeResult(
        scheme="demo",
        q_x=q_x,
        q_z=np.zeros((2, 2), dtype=complex),
        worst_mismatch=MismatchPair.zero(2, 2),
        secrecy_rate_bits=1.0,
        eve_metric=0.0,
        bob_metric=1.0,
    )
    assert result.p1 == pytest.approx(2.0)
    assert result.p2 == pytest.approx(0.0)
    assert result.qx_eigenvalues[0] == pytest.approx(2.0)
    assert result.ok
    failed = SchemeResult.failed(
        "demo", SystemParams(n_a=2, n_h=2), SchemeStatus.OUTAGE
    )
    assert not failed.ok
    assert math.isnan(failed.secrecy_rate_bits)


def test_worst_mismatch_sampled_aligns_with_center() -> None:
    center = np.array([1.0, 0.0])
    e, value = worst_mismatch_sampled(
        Direction.MAXIMIZE_EVE, center, 0.5, n_samples=200
    )
    assert np.linalg.norm(e) == pytest.approx(0.5)
    assert value == pytest.approx(2.25)
    e, value = worst_mismatch_sampled(
        Direction.MINIMIZE_JAMMING, center, 2.0, n_samples=200
    )
    assert value == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        worst_mismatch_sampled(Direction.MAXIMIZE_EVE, center, -1.0)
