from .config_loader import load_config, load_experiment_config
from .direct import gev_beamformer_dt, nonrobust_dt, solve_robust_dt
from .experiments import run_experiment
from .jamming import nonrobust_cj, robust_cj, solve_robust_jamming
from .model import ChannelSet, SchemeResult, SystemParams, sample_channels
from .outputs import emit_outputs
from .power import (
    fixed_split_cj,
    joint_optimize_global,
    single_condensation_loop,
)
from .qos import (
    relaxed_zf_qos,
    solve_qos_cj_nonrobust,
    solve_qos_cj_robust,
    solve_qos_dt_nonrobust,
    solve_qos_dt_robust,
)
from .store import ResultStore
from .verification import verify

__all__ = [
    "load_config",
    "load_experiment_config",
    "gev_beamformer_dt",
    "nonrobust_dt",
    "solve_robust_dt",
    "run_experiment",
    "nonrobust_cj",
    "robust_cj",
    "solve_robust_jamming",
    "ChannelSet",
    "SchemeResult",
    "SystemParams",
    "sample_channels",
    "emit_outputs",
    "fixed_split_cj",
    "joint_optimize_global",
    "single_condensation_loop",
    "relaxed_zf_qos",
    "solve_qos_cj_nonrobust",
    "solve_qos_cj_robust",
    "solve_qos_dt_nonrobust",
    "solve_qos_dt_robust",
    "ResultStore",
    "verify",
]
__version__ = "0.1.0"
