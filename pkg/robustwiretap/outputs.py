import csv
import logging
import math
import os
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from dataclasses import astuple, fields  # noqa: E402
from typing import Any, Dict, List, Sequence  # noqa: E402
from .config_loader import ExperimentKind  # noqa: E402
from .experiments import ExperimentRun, SummaryRow, TrialRecord  # noqa: E402

logger = logging.getLogger(__name__)

X_LABELS: Dict[ExperimentKind, str] = {
    ExperimentKind.RATE_VS_POWER: "P_S = P_J (dB)",
    ExperimentKind.RATE_VS_SPLIT: "p_s / P",
    ExperimentKind.RATE_VS_MISMATCH: "eps^2",
    ExperimentKind.SINR_VS_QOS: "gamma_t (dB)",
    ExperimentKind.SINR_VS_MISMATCH: "eps^2",
}

NOTES = (
    "Worst-case metrics of every scheme, robust or not, are evaluated at\n"
    "the channel errors that are worst for that scheme's own covariances.\n"
    "Averages exclude trials that ended in outage or solver failure; the\n"
    "counts are listed per sweep point in summary.csv.\n"
)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    return str(value)


def _write_rows(path: str, header: List[str], rows: Sequence[Any]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in astuple(row)])
    except OSError as exc:
        raise ValueError(f"Cannot write '{path}': {exc}") from exc


def write_records_csv(records: Sequence[TrialRecord], path: str) -> None:
    """One row per (sweep point, trial, scheme); header-only when empty."""
    _write_rows(path, TrialRecord.columns(), records)


def write_summary_csv(summary: Sequence[SummaryRow], path: str) -> None:
    _write_rows(path, [f.name for f in fields(SummaryRow)], summary)


def plot_summary(
    kind: ExperimentKind, summary: Sequence[SummaryRow], path: str
) -> None:
    """Mean curve per scheme over the sweep, as a deterministic SVG."""
    sinr = kind in (
        ExperimentKind.SINR_VS_QOS,
        ExperimentKind.SINR_VS_MISMATCH,
    )
    schemes: List[str] = []
    for row in summary:
        if row.scheme not in schemes:
            schemes.append(row.scheme)

    plt.rcParams["svg.hashsalt"] = "robustwiretap"
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in schemes:
        rows = [r for r in summary if r.scheme == scheme]
        xs = [r.sweep_value for r in rows]
        ys = [r.mean_eve_db if sinr else r.mean_rate_bits for r in rows]
        ax.plot(xs, ys, marker="o", label=scheme)
    ax.set_xlabel(X_LABELS[kind])
    if sinr:
        ax.set_ylabel("Worst-case Eve SINR (dB)")
    else:
        ax.set_ylabel("Worst-case secrecy rate (bits)")
    ax.grid(True, linestyle=":")
    if schemes:
        ax.legend()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ValueError(f"Cannot write '{path}': {exc}") from exc
    finally:
        plt.close(fig)


def write_notes(path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(NOTES)
    except OSError as exc:
        raise ValueError(f"Cannot write '{path}': {exc}") from exc


def emit_outputs(run: ExperimentRun, out_dir: str) -> Dict[str, str]:
    """Write ``records.csv``, ``summary.csv``, ``<experiment>.svg`` and
    ``notes.txt`` into ``out_dir``.

    Args:
        run (ExperimentRun): Completed experiment.
        out_dir (str): Output directory, created if missing.

    Returns:
        dict: Output kind to written path.

    Raises:
        ValueError: If the directory or a file cannot be written.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"Cannot create '{out_dir}': {exc}") from exc
    kind = run.config.experiment
    paths = {
        "records": os.path.join(out_dir, "records.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "plot": os.path.join(out_dir, f"{kind.value}.svg"),
        "notes": os.path.join(out_dir, "notes.txt"),
    }
    write_records_csv(run.records, paths["records"])
    write_summary_csv(run.summary, paths["summary"])
    plot_summary(kind, run.summary, paths["plot"])
    write_notes(paths["notes"])
    logger.info("Wrote outputs to %s", out_dir)
    return paths
