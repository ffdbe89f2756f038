from _pytest.monkeypatch import MonkeyPatch
from robustwiretap import verification
from robustwiretap.verification import (
    CheckResult,
    check_condensation_grid,
    check_jamming_brute_force,
    check_qos_designs,
    check_rank_one_jamming,
    check_sprocedure_sampling,
    check_trust_region_duality,
    check_zero_mismatch,
)


def test_duality_certificates() -> None:
    result = check_trust_region_duality(3, seed=0)
    assert result.instances == 6
    assert result.passed, result


def test_sprocedure_against_sampling() -> None:
    assert check_sprocedure_sampling(3, seed=1).passed


def test_rank_one_jamming() -> None:
    assert check_rank_one_jamming(2, seed=2).passed


def test_condensation_grid() -> None:
    result = check_condensation_grid(5, seed=3, n=200)
    assert result.passed, result
    assert result.detail == ""


def test_zero_mismatch() -> None:
    assert check_zero_mismatch(2, seed=4).passed


def test_jamming_against_brute_force() -> None:
    result = check_jamming_brute_force(2, seed=5)
    assert result.instances == 2
    assert result.passed, result


def test_qos_designs() -> None:
    leak, targets = check_qos_designs(3, seed=6)
    assert leak.passed, leak
    assert targets.instances == 9
    assert targets.passed, targets


def test_verify_runs_every_suite(monkeypatch: MonkeyPatch) -> None:
    monkeypatch.setattr(
        verification,
        "check_dt_brute_force",
        lambda count, seed, settings=None: CheckResult(
            "robust DT vs brute force", True, count, 0.0, 2e-2
        ),
    )
    results = verification.verify(seed=7)
    names = [r.name for r in results]
    assert len(names) == len(set(names)) == 8
    assert "robust jamming vs brute force" in names
    assert "QoS targets met" in names
