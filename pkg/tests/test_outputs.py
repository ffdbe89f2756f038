import csv
import os
import pytest
import tempfile
from robustwiretap.config_loader import load_experiment_config
from robustwiretap.experiments import (
    ExperimentRun,
    SummaryRow,
    TrialRecord,
    summarize,
)
from robustwiretap.outputs import emit_outputs, write_records_csv
from typing import Any, List


def _records() -> List[TrialRecord]:
    records = []
    for value in (0.0, 5.0, 10.0):
        for scheme, rate in (("robust_dt", 1.0), ("robust_cj", 1.5)):
            records.append(
                TrialRecord(
                    trial_id=0,
                    scheme=scheme,
                    sweep_value=value,
                    worst_secrecy_rate_bits=rate + value / 10,
                    p1=1.0,
                    p2=0.0,
                    eve_metric_db=-3.0,
                    bob_metric_db=7.25,
                    status="optimal",
                    iterations=12,
                    runtime_ms=0.0,
                )
            )
    return records


@pytest.fixture
def run() -> ExperimentRun:
    cfg = load_experiment_config(
        None,
        {
            "experiment": "rate_vs_power",
            "trials": 1,
            "sweep": [0.0, 5.0, 10.0],
            "schemes": ["robust_dt", "robust_cj"],
            "workers": 1,
        },
    )
    records = tuple(_records())
    return ExperimentRun(cfg, records, tuple(summarize(cfg, records)))


@pytest.fixture
def out_dir() -> Any:
    with tempfile.TemporaryDirectory() as tmp:
        yield tmp


def test_emit_outputs(run: ExperimentRun, out_dir: str) -> None:
    paths = emit_outputs(run, out_dir)
    assert set(paths) == {"records", "summary", "plot", "notes"}
    assert paths["plot"].endswith("rate_vs_power.svg")
    with open(paths["records"], encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == TrialRecord.columns()
    assert len(rows) == 1 + 6
    assert rows[1][3] == "1"
    assert rows[1][7] == "7.25"
    with open(paths["summary"], encoding="utf-8") as f:
        summary = list(csv.reader(f))
    assert len(summary) == 1 + 6
    with open(paths["plot"], encoding="utf-8") as f:
        svg = f.read()
    assert "robust_dt" in svg and "robust_cj" in svg


def test_outputs_are_byte_identical(run: ExperimentRun, out_dir: str) -> None:
    first = emit_outputs(run, os.path.join(out_dir, "a"))
    second = emit_outputs(run, os.path.join(out_dir, "b"))
    for key in first:
        with open(first[key], "rb") as f, open(second[key], "rb") as g:
            assert f.read() == g.read()


def test_empty_records_give_header_only(out_dir: str) -> None:
    path = os.path.join(out_dir, "records.csv")
    write_records_csv([], path)
    with open(path, encoding="utf-8") as f:
        assert f.read() == ",".join(TrialRecord.columns()) + "\n"


def test_unwritable_directory(run: ExperimentRun, out_dir: str) -> None:
    blocker = os.path.join(out_dir, "file")
    with open(blocker, "w") as f:
        f.write("x")
    with pytest.raises(ValueError, match="file"):
        emit_outputs(run, os.path.join(blocker, "sub"))


def test_summary_row_fields() -> None:
    assert [f for f in SummaryRow.__dataclass_fields__][:2] == [
        "sweep_value",
        "scheme",
    ]
