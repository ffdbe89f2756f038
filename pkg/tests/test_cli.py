import os
import pytest
import tempfile
from robustwiretap import ResultStore, cli
from robustwiretap.verification import CheckResult
from typing import Any, List
from _pytest.monkeypatch import MonkeyPatch


@pytest.fixture
def out_dir() -> Any:
    with tempfile.TemporaryDirectory() as tmp:
        yield tmp


def _run_args(out_dir: str) -> List[str]:
    return [
        "run",
        "--experiment",
        "rate_vs_power",
        "--trials",
        "1",
        "--sweep",
        "5",
        "--schemes",
        "nonrobust_dt_gev,nonrobust_cj",
        "--out-dir",
        out_dir,
        "--workers",
        "1",
    ]


def test_run_writes_outputs(out_dir: str) -> None:
    db = os.path.join(out_dir, "records.sqlite")
    assert cli.main(_run_args(out_dir) + ["--db", db]) == cli.EXIT_OK
    for name in ("records.csv", "summary.csv", "rate_vs_power.svg"):
        assert os.path.exists(os.path.join(out_dir, name))
    store = ResultStore(db)
    assert len(store.read()) == 2
    store.engine.dispose()


def test_config_errors_exit_2(out_dir: str) -> None:
    missing = os.path.join(out_dir, "missing.yaml")
    assert cli.main(["run", "--config", missing]) == cli.EXIT_CONFIG
    args = _run_args(out_dir)
    args[args.index("nonrobust_dt_gev,nonrobust_cj")] = "bogus"
    assert cli.main(args) == cli.EXIT_CONFIG
    bad_yaml = os.path.join(out_dir, "bad.yaml")
    with open(bad_yaml, "w") as f:
        f.write("experiment: [unclosed\n")
    assert cli.main(["run", "--config", bad_yaml]) == cli.EXIT_CONFIG


def test_single_prints_design() -> None:
    args = [
        "single",
        "--experiment",
        "rate_vs_power",
        "--sweep",
        "5",
        "--scheme",
        "nonrobust_dt_gev",
    ]
    assert cli.main(args) == cli.EXIT_OK
    assert cli.main(args + ["--sweep-index", "3"]) == cli.EXIT_CONFIG


def test_verify_exit_code(monkeypatch: MonkeyPatch) -> None:
    def fake_verify(**kwargs: Any) -> List[CheckResult]:
        return [CheckResult("demo", kwargs["full"], 1, 0.0, 1e-3)]

    monkeypatch.setattr(cli, "verify", fake_verify)
    assert cli.main(["verify", "--full"]) == cli.EXIT_OK
    assert cli.main(["verify"]) == cli.EXIT_SOLVER


def test_parser_requires_subcommand() -> None:
    with pytest.raises(SystemExit):
        cli.main([])


def test_unwritable_database_exit_2(out_dir: str) -> None:
    db = os.path.join(out_dir, "no_such_dir", "records.sqlite")
    assert cli.main(_run_args(out_dir) + ["--db", db]) == cli.EXIT_CONFIG
    assert os.path.exists(os.path.join(out_dir, "records.csv"))
