import os
import yaml
from dotenv import load_dotenv
from enum import Enum
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    validate_call,
)
from typing import Any, Dict, List, Literal, Optional, cast


load_dotenv()


DEFAULT_SOLVER = "CLARABEL"

KNOWN_SCHEMES = (
    "robust_dt",
    "nonrobust_dt_gev",
    "robust_cj",
    "nonrobust_cj",
    "joint_global",
    "nonrobust_global",
    "fixed_split",
    "qos_dt_nonrobust",
    "qos_dt_robust",
    "qos_relaxed_zf",
    "qos_cj_robust",
    "qos_cj_nonrobust",
)


def solver_from_env() -> str:
    return os.getenv("WIRETAP_SOLVER", DEFAULT_SOLVER).upper()


def workers_from_env() -> int:
    raw = os.getenv("WIRETAP_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(f"WIRETAP_WORKERS must be an integer, got '{raw}'")
    if workers < 1:
        raise ValueError(f"WIRETAP_WORKERS must be at least 1, got {workers}")
    return workers


def log_level_from_env() -> str:
    return os.getenv("WIRETAP_LOG_LEVEL", "INFO").upper()


class ExperimentKind(str, Enum):
    RATE_VS_POWER = "rate_vs_power"
    RATE_VS_SPLIT = "rate_vs_split"
    RATE_VS_MISMATCH = "rate_vs_mismatch"
    SINR_VS_QOS = "sinr_vs_qos"
    SINR_VS_MISMATCH = "sinr_vs_mismatch"


# (eps_sq, power_db, gamma_t_db) used when the config leaves them out
EXPERIMENT_DEFAULTS: Dict[ExperimentKind, Dict[str, float]] = {
    ExperimentKind.RATE_VS_POWER: {"eps_sq": 1.5, "power_db": 5.0},
    ExperimentKind.RATE_VS_SPLIT: {"eps_sq": 1.5, "power_db": 10.0},
    ExperimentKind.RATE_VS_MISMATCH: {"eps_sq": 0.0, "power_db": 5.0},
    ExperimentKind.SINR_VS_QOS: {
        "eps_sq": 0.5,
        "power_db": 10.0,
        "gamma_t_db": 10.0,
    },
    ExperimentKind.SINR_VS_MISMATCH: {
        "eps_sq": 0.0,
        "power_db": 10.0,
        "gamma_t_db": 10.0,
    },
}


# sweep grid and scheme list used when neither the file nor the CLI sets them
DEFAULT_SWEEPS: Dict[ExperimentKind, List[float]] = {
    ExperimentKind.RATE_VS_POWER: [0.0, 2.5, 5.0, 7.5, 10.0],
    ExperimentKind.RATE_VS_SPLIT: [0.1, 0.3, 0.5, 0.7, 0.9],
    ExperimentKind.RATE_VS_MISMATCH: [0.0, 0.5, 1.0, 1.5, 2.0],
    ExperimentKind.SINR_VS_QOS: [0.0, 5.0, 10.0, 15.0, 20.0],
    ExperimentKind.SINR_VS_MISMATCH: [0.0, 0.5, 1.0, 1.5, 2.0],
}

DEFAULT_SCHEMES: Dict[ExperimentKind, List[str]] = {
    ExperimentKind.RATE_VS_POWER: [
        "robust_dt",
        "nonrobust_dt_gev",
        "robust_cj",
        "nonrobust_cj",
    ],
    ExperimentKind.RATE_VS_SPLIT: ["joint_global", "fixed_split"],
    ExperimentKind.RATE_VS_MISMATCH: [
        "robust_dt",
        "joint_global",
        "nonrobust_global",
    ],
    ExperimentKind.SINR_VS_QOS: [
        "qos_dt_nonrobust",
        "qos_dt_robust",
        "qos_relaxed_zf",
        "qos_cj_robust",
        "qos_cj_nonrobust",
    ],
    ExperimentKind.SINR_VS_MISMATCH: [
        "qos_dt_nonrobust",
        "qos_dt_robust",
        "qos_relaxed_zf",
        "qos_cj_robust",
        "qos_cj_nonrobust",
    ],
}


class Tolerances(BaseModel):
    """Solver, bisection and loop settings shared by every scheme."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    solver: str = Field(default_factory=solver_from_env)
    bisection_tol: float = Field(default=1e-4, gt=0.0)
    bisection_max_iter: int = Field(default=60, ge=1)
    loop_tol: float = Field(default=1e-5, gt=0.0)
    loop_max_iter: int = Field(default=50, ge=1)
    outer_tol: float = Field(default=1e-4, gt=0.0)
    outer_max: int = Field(default=30, ge=1)
    numerator: Literal["printed", "direct"] = "printed"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentKind
    trials: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    n_a: int = Field(default=4, ge=1)
    n_h: int = Field(default=4, ge=1)
    sigma_sq: float = Field(default=1.0, gt=0.0)
    sweep: List[float] = Field(min_length=1)
    schemes: List[str] = Field(min_length=1)
    eps_sq: Optional[float] = Field(default=None, ge=0.0)
    power_db: Optional[float] = None
    gamma_t_db: Optional[float] = None
    split: float = Field(default=0.5, gt=0.0, lt=1.0)
    workers: int = Field(default_factory=workers_from_env, ge=1)
    record_runtime: bool = False
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, schemes: List[str]) -> List[str]:
        for name in schemes:
            if name not in KNOWN_SCHEMES:
                raise ValueError(
                    f"Unknown scheme '{name}'. "
                    f"Available: {list(KNOWN_SCHEMES)}"
                )
        if len(set(schemes)) != len(schemes):
            raise ValueError(f"Duplicate scheme names in {schemes}")
        return schemes

    def default(self, key: str) -> float:
        value = getattr(self, key)
        if value is not None:
            return float(value)
        return EXPERIMENT_DEFAULTS[self.experiment].get(key, 0.0)


@validate_call
def load_config(path: str) -> Dict[str, Any]:
    """
    Load a YAML configuration file and return its contents as a dictionary.
    Args:
        path (str): The file path to the YAML configuration file.
    Returns:
        dict: The contents of the YAML file as a dictionary.
    """
    with open(path, "r") as f:
        data = yaml.safe_load(f)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError(
            "Configuration file does not contain a mapping at top level: "
            + path
        )
    return cast(Dict[str, Any], data)


@validate_call
def load_experiment_config(
    path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """
    Build an experiment configuration from a YAML file and CLI overrides.
    Args:
        path (str, optional): YAML file with an ``experiment:`` mapping, or
        with the experiment keys at top level.
        overrides (dict, optional): Values that replace file entries; None
        values are ignored.
    Returns:
        ExperimentConfig: The validated configuration.
    """
    raw: Dict[str, Any] = {}
    if path:
        cfg = load_config(path)
        block = cfg.get("experiment", cfg)
        if isinstance(block, str):
            block = {k: v for k, v in cfg.items()}
        if not isinstance(block, dict):
            raise ValueError(
                "'experiment' should be a mapping in the config file"
            )
        raw.update(block)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    kind = raw.get("experiment")
    if kind is not None:
        try:
            kind = ExperimentKind(kind)
        except ValueError:
            raise ValueError(
                f"Experiment '{kind}' not found. "
                f"Available: {[k.value for k in ExperimentKind]}"
            )
        raw.setdefault("sweep", list(DEFAULT_SWEEPS[kind]))
        raw.setdefault("schemes", list(DEFAULT_SCHEMES[kind]))
    return ExperimentConfig.model_validate(raw)
