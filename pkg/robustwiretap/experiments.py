import logging
import math
import time
import warnings
import numpy as np
from dataclasses import asdict, dataclass, fields, replace
from tqdm import TqdmExperimentalWarning
from tqdm.contrib.concurrent import process_map
from tqdm.rich import tqdm
from typing import Any, Callable, Dict, List, Sequence, Tuple
from .config_loader import ExperimentConfig, ExperimentKind, Tolerances
from .conic import SolverSettings
from .direct import nonrobust_dt, solve_robust_dt
from .jamming import nonrobust_cj, robust_cj
from .model import (
    ChannelSet,
    SchemeResult,
    SchemeStatus,
    SystemParams,
    sample_channels,
)
from .power import (
    fixed_split_cj,
    joint_optimize_global,
    joint_optimize_global_nonrobust,
)
from .qos import (
    relaxed_zf_qos,
    solve_qos_cj_nonrobust,
    solve_qos_cj_robust,
    solve_qos_dt_nonrobust,
    solve_qos_dt_robust,
)

warnings.filterwarnings("ignore", category=TqdmExperimentalWarning)

logger = logging.getLogger(__name__)

METRIC_FLOOR = 1e-30


@dataclass(frozen=True)
class TrialContext:
    """Per-call settings handed to every registered scheme."""

    tolerances: Tolerances
    sweep_value: float
    split: float
    global_budget: bool

    @property
    def settings(self) -> SolverSettings:
        return SolverSettings(solver=self.tolerances.solver)


SchemeFn = Callable[[ChannelSet, SystemParams, TrialContext], SchemeResult]


def _dt_params(params: SystemParams, ctx: TrialContext) -> SystemParams:
    if ctx.global_budget:
        return params.with_budgets(params.p_total, 0.0)
    return params


def _robust_dt(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return solve_robust_dt(
        ch,
        _dt_params(params, ctx),
        delta=tol.bisection_tol,
        max_iter=tol.bisection_max_iter,
        settings=ctx.settings,
    )


def _nonrobust_dt(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    return nonrobust_dt(ch, _dt_params(params, ctx), ctx.settings)


def _robust_cj(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return robust_cj(
        ch,
        params,
        delta=tol.bisection_tol,
        max_iter=tol.bisection_max_iter,
        numerator=tol.numerator,
        settings=ctx.settings,
    )


def _nonrobust_cj(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    return nonrobust_cj(ch, params, ctx.settings)


def _joint_global(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return joint_optimize_global(
        ch,
        params,
        delta=tol.bisection_tol,
        outer_tol=tol.outer_tol,
        outer_max=tol.outer_max,
        loop_tol=tol.loop_tol,
        loop_max_iter=tol.loop_max_iter,
        numerator=tol.numerator,
        settings=ctx.settings,
    )


def _nonrobust_global(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return joint_optimize_global_nonrobust(
        ch,
        params,
        outer_tol=tol.outer_tol,
        outer_max=tol.outer_max,
        loop_tol=tol.loop_tol,
        loop_max_iter=tol.loop_max_iter,
        settings=ctx.settings,
    )


def _fixed_split(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return fixed_split_cj(
        ch,
        params,
        ctx.split,
        delta=tol.bisection_tol,
        numerator=tol.numerator,
        settings=ctx.settings,
    )


def _qos_cj_robust(
    ch: ChannelSet, params: SystemParams, ctx: TrialContext
) -> SchemeResult:
    tol = ctx.tolerances
    return solve_qos_cj_robust(
        ch,
        params,
        delta=tol.bisection_tol,
        max_iter=tol.bisection_max_iter,
        settings=ctx.settings,
    )


def _settings_only(
    fn: Callable[..., SchemeResult],
) -> SchemeFn:
    def call(
        ch: ChannelSet, params: SystemParams, ctx: TrialContext
    ) -> SchemeResult:
        return fn(ch, params, ctx.settings)

    return call


SCHEME_REGISTRY: Dict[str, SchemeFn] = {
    "robust_dt": _robust_dt,
    "nonrobust_dt_gev": _nonrobust_dt,
    "robust_cj": _robust_cj,
    "nonrobust_cj": _nonrobust_cj,
    "joint_global": _joint_global,
    "nonrobust_global": _nonrobust_global,
    "fixed_split": _fixed_split,
    "qos_dt_nonrobust": _settings_only(solve_qos_dt_nonrobust),
    "qos_dt_robust": _settings_only(solve_qos_dt_robust),
    "qos_relaxed_zf": _settings_only(relaxed_zf_qos),
    "qos_cj_robust": _qos_cj_robust,
    "qos_cj_nonrobust": _settings_only(solve_qos_cj_nonrobust),
}


def _lookup_scheme(name: str) -> SchemeFn:
    scheme_fn = SCHEME_REGISTRY.get(name)
    if scheme_fn is None:
        raise ValueError(
            f"Scheme '{name}' not found in registry. "
            f"Available: {list(SCHEME_REGISTRY.keys())}"
        )
    return scheme_fn


def from_db(value: float) -> float:
    return 10.0 ** (value / 10.0)


def to_db(value: float) -> float:
    if math.isnan(value):
        return math.nan
    return 10.0 * math.log10(max(value, METRIC_FLOOR))


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    scheme: str
    sweep_value: float
    worst_secrecy_rate_bits: float
    p1: float
    p2: float
    eve_metric_db: float
    bob_metric_db: float
    status: str
    iterations: int
    runtime_ms: float

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def ok(self) -> bool:
        return self.status in (
            SchemeStatus.OPTIMAL.value,
            SchemeStatus.MAX_ITER.value,
        )


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: float
    scheme: str
    mean_rate_bits: float
    mean_p1: float
    mean_p2: float
    mean_jamming_fraction: float
    mean_eve_db: float
    mean_bob_db: float
    n_ok: int
    n_outage: int
    n_failed: int


@dataclass(frozen=True)
class ExperimentRun:
    config: ExperimentConfig
    records: Tuple[TrialRecord, ...]
    summary: Tuple[SummaryRow, ...]

    @property
    def failures(self) -> int:
        return sum(
            r.status == SchemeStatus.SOLVER_FAILURE.value
            for r in self.records
        )

    @property
    def failure_rate(self) -> float:
        if not self.records:
            return 0.0
        return self.failures / len(self.records)


def is_global(kind: ExperimentKind) -> bool:
    return kind in (
        ExperimentKind.RATE_VS_SPLIT,
        ExperimentKind.RATE_VS_MISMATCH,
    )


def params_for(cfg: ExperimentConfig, value: float) -> SystemParams:
    """System parameters of one sweep point.

    Powers and SINR targets in the config are in dB relative to the noise
    power; mismatch radii are given as ``eps^2``.
    """
    kind = cfg.experiment
    eps_sq = cfg.default("eps_sq")
    power = from_db(cfg.default("power_db")) * cfg.sigma_sq
    gamma_db = cfg.default("gamma_t_db")
    split = cfg.split
    if kind is ExperimentKind.RATE_VS_POWER:
        p = from_db(value) * cfg.sigma_sq
        return SystemParams(
            n_a=cfg.n_a,
            n_h=cfg.n_h,
            sigma_sq=cfg.sigma_sq,
            eps_h_sq=eps_sq,
            eps_g_sq=eps_sq,
            p_s=p,
            p_j=p,
            p_total=2.0 * p,
            gamma_t=from_db(gamma_db),
        )
    if kind is ExperimentKind.RATE_VS_SPLIT:
        split = value
    elif kind is ExperimentKind.SINR_VS_QOS:
        gamma_db = value
    else:
        eps_sq = value
    return SystemParams(
        n_a=cfg.n_a,
        n_h=cfg.n_h,
        sigma_sq=cfg.sigma_sq,
        eps_h_sq=eps_sq,
        eps_g_sq=eps_sq,
        p_s=split * power,
        p_j=(1.0 - split) * power,
        p_total=power,
        gamma_t=from_db(gamma_db),
    )


def context_for(cfg: ExperimentConfig, value: float) -> TrialContext:
    split = cfg.split
    if cfg.experiment is ExperimentKind.RATE_VS_SPLIT:
        split = value
    return TrialContext(
        tolerances=cfg.tolerances,
        sweep_value=value,
        split=split,
        global_budget=is_global(cfg.experiment),
    )


def to_record(
    result: SchemeResult,
    scheme: str,
    trial_id: int,
    value: float,
    runtime_ms: float,
) -> TrialRecord:
    return TrialRecord(
        trial_id=trial_id,
        scheme=scheme,
        sweep_value=value,
        worst_secrecy_rate_bits=result.secrecy_rate_bits,
        p1=result.p1,
        p2=result.p2,
        eve_metric_db=to_db(result.eve_metric),
        bob_metric_db=to_db(result.bob_metric),
        status=result.status.value,
        iterations=result.iterations,
        runtime_ms=runtime_ms,
    )


def _call_scheme(
    scheme_fn: SchemeFn,
    name: str,
    ch: ChannelSet,
    params: SystemParams,
    ctx: TrialContext,
) -> SchemeResult:
    """Run one scheme; an exception becomes a ``solver_failure`` result
    so the remaining schemes and trials still run."""
    try:
        return scheme_fn(ch, params, ctx)
    except Exception as exc:
        logger.warning(
            "Scheme %s raised %s: %s", name, type(exc).__name__, exc
        )
        return SchemeResult.failed(
            name, params, SchemeStatus.SOLVER_FAILURE, f"{exc}"
        )


def run_scheme(
    cfg: ExperimentConfig, scheme: str, sweep_index: int, trial_id: int
) -> SchemeResult:
    """One scheme on the channel draw of ``trial_id`` at one sweep point."""
    value = cfg.sweep[sweep_index]
    params = params_for(cfg, value)
    ch = sample_channels(params, cfg.seed + trial_id)
    scheme_fn = _lookup_scheme(scheme)
    ctx = context_for(cfg, value)
    result = _call_scheme(scheme_fn, scheme, ch, params, ctx)
    if result.scheme != scheme:
        result = replace(result, scheme=scheme)
    return result


def run_trial(
    cfg: ExperimentConfig, sweep_index: int, trial_id: int
) -> List[TrialRecord]:
    """All configured schemes on one channel draw (paired comparison).

    The draw is seeded by ``seed + trial_id`` and shared by every scheme
    and every sweep point.
    """
    value = cfg.sweep[sweep_index]
    params = params_for(cfg, value)
    ch = sample_channels(params, cfg.seed + trial_id)
    ctx = context_for(cfg, value)
    records: List[TrialRecord] = []
    for name in cfg.schemes:
        scheme_fn = _lookup_scheme(name)
        start = time.perf_counter()
        result = _call_scheme(scheme_fn, name, ch, params, ctx)
        elapsed = (time.perf_counter() - start) * 1e3
        runtime = elapsed if cfg.record_runtime else 0.0
        if not result.ok:
            logger.debug(
                "Trial %d, %s at %g: %s (%s)",
                trial_id,
                name,
                value,
                result.status.value,
                result.message,
            )
        records.append(to_record(result, name, trial_id, value, runtime))
    return records


def _run_task(task: Tuple[ExperimentConfig, int, int]) -> List[TrialRecord]:
    cfg, sweep_index, trial_id = task
    return run_trial(cfg, sweep_index, trial_id)


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def summarize(
    cfg: ExperimentConfig, records: Sequence[TrialRecord]
) -> List[SummaryRow]:
    """Per sweep point and scheme averages over non-failed trials.

    Metrics are averaged in linear scale and reported in dB.
    """
    rows: List[SummaryRow] = []
    for value in cfg.sweep:
        for scheme in cfg.schemes:
            group = [
                r
                for r in records
                if r.scheme == scheme and r.sweep_value == value
            ]
            good = [r for r in group if r.ok]
            outages = sum(
                r.status == SchemeStatus.OUTAGE.value for r in group
            )
            fractions = [
                r.p2 / (r.p1 + r.p2) for r in good if r.p1 + r.p2 > 0.0
            ]
            rows.append(
                SummaryRow(
                    sweep_value=value,
                    scheme=scheme,
                    mean_rate_bits=_mean(
                        [r.worst_secrecy_rate_bits for r in good]
                    ),
                    mean_p1=_mean([r.p1 for r in good]),
                    mean_p2=_mean([r.p2 for r in good]),
                    mean_jamming_fraction=_mean(fractions),
                    mean_eve_db=to_db(
                        _mean([from_db(r.eve_metric_db) for r in good])
                    ),
                    mean_bob_db=to_db(
                        _mean([from_db(r.bob_metric_db) for r in good])
                    ),
                    n_ok=len(good),
                    n_outage=outages,
                    n_failed=len(group) - len(good) - outages,
                )
            )
    return rows


def run_experiment(cfg: ExperimentConfig) -> ExperimentRun:
    """Run every (sweep point, trial) task and aggregate the records.

    Tasks run in a process pool when ``cfg.workers > 1``; records are
    ordered by sweep point, trial and configured scheme order regardless of
    completion order.

    Args:
        cfg (ExperimentConfig): Validated experiment configuration.

    Returns:
        ExperimentRun: Records, per-point summary and failure counts.
    """
    tasks = [
        (cfg, sweep_index, trial_id)
        for sweep_index in range(len(cfg.sweep))
        for trial_id in range(cfg.trials)
    ]
    logger.info(
        "Running %s: %d sweep points x %d trials x %d schemes",
        cfg.experiment.value,
        len(cfg.sweep),
        cfg.trials,
        len(cfg.schemes),
    )
    if cfg.workers > 1:
        batches = process_map(
            _run_task,
            tasks,
            max_workers=cfg.workers,
            chunksize=1,
            tqdm_class=tqdm,
            desc="Running trials",
            unit="trial",
        )
    else:
        batches = [
            _run_task(task)
            for task in tqdm(tasks, desc="Running trials", unit="trial")
        ]
    records = tuple(r for batch in batches for r in batch)
    summary = tuple(summarize(cfg, records))
    run = ExperimentRun(config=cfg, records=records, summary=summary)
    if run.failures:
        logger.warning(
            "%d of %d records ended in solver failure",
            run.failures,
            len(records),
        )
    return run
