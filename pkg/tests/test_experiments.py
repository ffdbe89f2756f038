import math
import numpy as np
import pytest
from _pytest.monkeypatch import MonkeyPatch
from robustwiretap.config_loader import (
    KNOWN_SCHEMES,
    ExperimentConfig,
    load_experiment_config,
)
from robustwiretap.experiments import (
    SCHEME_REGISTRY,
    TrialContext,
    TrialRecord,
    context_for,
    from_db,
    params_for,
    run_experiment,
    run_scheme,
    summarize,
    to_db,
)
from robustwiretap.model import (
    ChannelSet,
    SchemeResult,
    SchemeStatus,
    SystemParams,
)


def _config(**kwargs: object) -> ExperimentConfig:
    base = {
        "experiment": "rate_vs_power",
        "trials": 2,
        "n_a": 2,
        "n_h": 2,
        "sweep": [0.0, 5.0],
        "schemes": ["robust_dt", "nonrobust_dt_gev"],
        "workers": 1,
    }
    base.update(kwargs)
    return load_experiment_config(None, base)


def _record(scheme: str, status: str, rate: float) -> TrialRecord:
    return TrialRecord(
        trial_id=0,
        scheme=scheme,
        sweep_value=0.0,
        worst_secrecy_rate_bits=rate,
        p1=1.0,
        p2=1.0,
        eve_metric_db=0.0,
        bob_metric_db=10.0,
        status=status,
        iterations=1,
        runtime_ms=0.0,
    )


def test_registry_covers_known_schemes() -> None:
    assert set(SCHEME_REGISTRY) == set(KNOWN_SCHEMES)


def test_db_conversions() -> None:
    assert from_db(10.0) == pytest.approx(10.0)
    assert to_db(100.0) == pytest.approx(20.0)
    assert math.isnan(to_db(math.nan))
    assert to_db(0.0) == pytest.approx(-300.0)


def test_params_for_each_family() -> None:
    power = params_for(_config(), 10.0)
    assert power.p_s == pytest.approx(10.0)
    assert power.p_j == pytest.approx(10.0)
    assert power.eps_h_sq == pytest.approx(1.5)

    split_cfg = _config(experiment="rate_vs_split", sweep=[0.25])
    split = params_for(split_cfg, 0.25)
    assert split.p_total == pytest.approx(10.0)
    assert split.p_s == pytest.approx(2.5)
    assert context_for(split_cfg, 0.25).split == pytest.approx(0.25)
    assert context_for(split_cfg, 0.25).global_budget

    qos = params_for(_config(experiment="sinr_vs_qos", sweep=[20.0]), 20.0)
    assert qos.gamma_t == pytest.approx(100.0)
    assert qos.eps_h_sq == pytest.approx(0.5)

    mism = _config(experiment="sinr_vs_mismatch", sweep=[1.0])
    assert params_for(mism, 1.0).eps_g_sq == pytest.approx(1.0)
    assert params_for(mism, 1.0).gamma_t == pytest.approx(10.0)


def test_single_trial_record() -> None:
    cfg = _config(trials=1, sweep=[5.0], schemes=["robust_dt"])
    run = run_experiment(cfg)
    assert len(run.records) == 1
    record = run.records[0]
    assert record.status == "optimal"
    assert record.runtime_ms == 0.0
    assert run.failure_rate == 0.0
    assert len(run.summary) == 1
    assert run.summary[0].n_ok == 1


def test_runs_are_deterministic_and_ordered() -> None:
    cfg = _config()
    first = run_experiment(cfg)
    second = run_experiment(cfg)
    assert first.records == second.records
    keys = [
        (
            cfg.sweep.index(r.sweep_value),
            r.trial_id,
            cfg.schemes.index(r.scheme),
        )
        for r in first.records
    ]
    assert keys == sorted(keys)
    assert len(first.records) == 2 * 2 * 2


def test_run_scheme_matches_trial() -> None:
    cfg = _config(trials=1, sweep=[5.0], schemes=["nonrobust_dt_gev"])
    result = run_scheme(cfg, "nonrobust_dt_gev", 0, 0)
    record = run_experiment(cfg).records[0]
    assert result.scheme == "nonrobust_dt_gev"
    assert result.secrecy_rate_bits == pytest.approx(
        record.worst_secrecy_rate_bits
    )
    with pytest.raises(ValueError):
        run_scheme(cfg, "bogus", 0, 0)


def test_summary_excludes_failures() -> None:
    cfg = _config(sweep=[0.0], schemes=["robust_dt"])
    records = [
        _record("robust_dt", "optimal", 1.0),
        _record("robust_dt", "max_iter", 3.0),
        _record("robust_dt", "outage", math.nan),
        _record("robust_dt", "solver_failure", math.nan),
    ]
    (row,) = summarize(cfg, records)
    assert row.mean_rate_bits == pytest.approx(2.0)
    assert row.mean_jamming_fraction == pytest.approx(0.5)
    assert row.mean_bob_db == pytest.approx(10.0)
    assert (row.n_ok, row.n_outage, row.n_failed) == (2, 1, 1)


def _crashing_scheme(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    raise np.linalg.LinAlgError("Singular matrix")


def test_scheme_exception_recorded_as_failure(
    monkeypatch: MonkeyPatch,
) -> None:
    monkeypatch.setitem(SCHEME_REGISTRY, "robust_dt", _crashing_scheme)
    cfg = _config(sweep=[5.0])
    run = run_experiment(cfg)
    statuses = {(r.scheme, r.trial_id): r.status for r in run.records}
    assert statuses == {
        ("robust_dt", 0): "solver_failure",
        ("robust_dt", 1): "solver_failure",
        ("nonrobust_dt_gev", 0): "optimal",
        ("nonrobust_dt_gev", 1): "optimal",
    }
    assert run.failure_rate == pytest.approx(0.5)
    rows = {row.scheme: row for row in run.summary}
    assert (rows["robust_dt"].n_ok, rows["robust_dt"].n_failed) == (0, 2)
    assert rows["nonrobust_dt_gev"].n_ok == 2
    result = run_scheme(cfg, "robust_dt", 0, 0)
    assert result.status is SchemeStatus.SOLVER_FAILURE
    assert "Singular matrix" in result.message
