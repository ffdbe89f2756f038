import math
import numpy as np
import numpy.typing as npt
from dataclasses import dataclass, field
from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, validate_call
from typing import Optional, Tuple
from .linalg import (
    ComplexVector,
    HermitianMatrix,
    as_vector,
    eigenvalues,
    quad_form,
)


class SystemParams(BaseModel):
    """Antenna counts, noise power, mismatch radii and budgets (all linear
    units)."""

    model_config = ConfigDict(frozen=True)

    n_a: int = Field(default=4, ge=1)
    n_h: int = Field(default=4, ge=1)
    sigma_sq: float = Field(default=1.0, gt=0.0)
    eps_h_sq: float = Field(default=0.0, ge=0.0)
    eps_g_sq: float = Field(default=0.0, ge=0.0)
    p_s: float = Field(default=1.0, ge=0.0)
    p_j: float = Field(default=1.0, ge=0.0)
    p_total: float = Field(default=2.0, ge=0.0)
    gamma_t: float = Field(default=1.0, ge=0.0)

    @property
    def eps_h(self) -> float:
        return math.sqrt(self.eps_h_sq)

    @property
    def eps_g(self) -> float:
        return math.sqrt(self.eps_g_sq)

    def with_budgets(self, p_s: float, p_j: float) -> "SystemParams":
        return self.model_copy(update={"p_s": p_s, "p_j": p_j})


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Perfectly known links to Bob and estimated links to Eve."""

    h_b: ComplexVector
    g_b: ComplexVector
    h_e_est: ComplexVector
    g_e_est: ComplexVector

    def __post_init__(self) -> None:
        for name in ("h_b", "g_b", "h_e_est", "g_e_est"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        if self.h_b.size != self.h_e_est.size:
            raise ValueError("Alice's channels to Bob and Eve differ in size.")
        if self.g_b.size != self.g_e_est.size:
            raise ValueError(
                "Helper's channels to Bob and Eve differ in size."
            )

    @property
    def n_a(self) -> int:
        return int(self.h_b.size)

    @property
    def n_h(self) -> int:
        return int(self.g_b.size)

    def check(self, params: SystemParams) -> None:
        if (self.n_a, self.n_h) != (params.n_a, params.n_h):
            raise ValueError(
                f"Channel dimensions ({self.n_a}, {self.n_h}) do not match "
                f"parameters ({params.n_a}, {params.n_h})."
            )


@dataclass(frozen=True, eq=False)
class MismatchPair:
    e_h: ComplexVector
    e_g: ComplexVector

    @classmethod
    def zero(cls, n_a: int, n_h: int) -> "MismatchPair":
        return cls(
            np.zeros(n_a, dtype=np.complex128),
            np.zeros(n_h, dtype=np.complex128),
        )

    def within(self, eps_h: float, eps_g: float, tol: float = 1e-9) -> bool:
        return bool(
            np.linalg.norm(self.e_h) <= eps_h + tol
            and np.linalg.norm(self.e_g) <= eps_g + tol
        )


class SchemeStatus(str, Enum):
    OPTIMAL = "optimal"
    OUTAGE = "outage"
    MAX_ITER = "max_iter"
    SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True, eq=False)
class SchemeResult:
    """Outcome of one transmission scheme on one channel draw.

    ``eve_metric`` and ``bob_metric`` are linear SNR/SINR values evaluated
    at ``worst_mismatch``; ``p1``/``p2`` are the power allocation (the
    covariance traces unless an allocation step set them).
    """

    scheme: str
    q_x: HermitianMatrix
    q_z: HermitianMatrix
    worst_mismatch: MismatchPair
    secrecy_rate_bits: float
    eve_metric: float
    bob_metric: float
    iterations: int = 0
    status: SchemeStatus = SchemeStatus.OPTIMAL
    trace: Tuple[float, ...] = ()
    design_value: float = math.nan
    p1: float = math.nan
    p2: float = math.nan
    message: str = ""
    qx_eigenvalues: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if math.isnan(self.p1):
            object.__setattr__(self, "p1", float(np.real(np.trace(self.q_x))))
        if math.isnan(self.p2):
            object.__setattr__(self, "p2", float(np.real(np.trace(self.q_z))))
        if not self.qx_eigenvalues and self.q_x.size:
            vals = eigenvalues(self.q_x)[::-1]
            object.__setattr__(
                self, "qx_eigenvalues", tuple(float(v) for v in vals)
            )

    @property
    def ok(self) -> bool:
        return self.status in (SchemeStatus.OPTIMAL, SchemeStatus.MAX_ITER)

    @classmethod
    def failed(
        cls,
        scheme: str,
        params: SystemParams,
        status: SchemeStatus,
        message: str = "",
        trace: Tuple[float, ...] = (),
    ) -> "SchemeResult":
        return cls(
            scheme=scheme,
            q_x=np.zeros((params.n_a, params.n_a), dtype=np.complex128),
            q_z=np.zeros((params.n_h, params.n_h), dtype=np.complex128),
            worst_mismatch=MismatchPair.zero(params.n_a, params.n_h),
            secrecy_rate_bits=math.nan,
            eve_metric=math.nan,
            bob_metric=math.nan,
            status=status,
            trace=trace,
            message=message,
        )


@validate_call
def sample_channels(params: SystemParams, seed: int) -> ChannelSet:
    """Draw the four channel vectors i.i.d. circular complex Gaussian with
    unit per-entry variance from a PCG64 stream seeded by ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))

    def draw(n: int) -> ComplexVector:
        scale = math.sqrt(0.5)
        return rng.normal(0.0, scale, n) + 1j * rng.normal(0.0, scale, n)

    return ChannelSet(
        h_b=draw(params.n_a),
        g_b=draw(params.n_h),
        h_e_est=draw(params.n_a),
        g_e_est=draw(params.n_h),
    )


def _log_ratio(num: float, den: float) -> float:
    return math.log2(num) - math.log2(den)


def bob_sinr(
    ch: ChannelSet,
    q_x: HermitianMatrix,
    q_z: HermitianMatrix,
    sigma_sq: float,
) -> float:
    signal = max(quad_form(ch.h_b, q_x), 0.0)
    interference = max(quad_form(ch.g_b, q_z), 0.0)
    return signal / (interference + sigma_sq)


def eve_sinr(
    ch: ChannelSet,
    q_x: HermitianMatrix,
    q_z: HermitianMatrix,
    mm: MismatchPair,
    sigma_sq: float,
) -> float:
    signal = max(quad_form(ch.h_e_est + mm.e_h, q_x), 0.0)
    jamming = max(quad_form(ch.g_e_est + mm.e_g, q_z), 0.0)
    return signal / (jamming + sigma_sq)


def secrecy_rate_dt(
    ch: ChannelSet,
    q_x: HermitianMatrix,
    e_h: ComplexVector,
    sigma_sq: float,
) -> float:
    """Secrecy rate in bits per channel use without jamming, clamped at
    zero."""
    bob = max(quad_form(ch.h_b, q_x), 0.0)
    eve = max(quad_form(ch.h_e_est + e_h, q_x), 0.0)
    return max(0.0, _log_ratio(1.0 + bob / sigma_sq, 1.0 + eve / sigma_sq))


def secrecy_rate_cj(
    ch: ChannelSet,
    q_x: HermitianMatrix,
    q_z: HermitianMatrix,
    mm: MismatchPair,
    sigma_sq: float,
) -> float:
    """Secrecy rate in bits per channel use with a helper's jamming,
    clamped at zero."""
    bob = bob_sinr(ch, q_x, q_z, sigma_sq)
    eve = eve_sinr(ch, q_x, q_z, mm, sigma_sq)
    return max(0.0, _log_ratio(1.0 + bob, 1.0 + eve))


class Direction(str, Enum):
    MAXIMIZE_EVE = "maximize_eve"
    MINIMIZE_JAMMING = "minimize_jamming"


def _sphere(
    rng: np.random.Generator, n: int, dim: int, radius: float
) -> npt.NDArray[np.complex128]:
    pts = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    return radius * pts / norms


def worst_mismatch_sampled(
    objective: Direction,
    center: npt.ArrayLike,
    radius: float,
    quad: Optional[npt.ArrayLike] = None,
    n_samples: int = 10_000,
    seed: int = 0,
) -> Tuple[ComplexVector, float]:
    """Brute-force extremizer of ``(c + e) Q (c + e)^H`` over ``||e|| <= r``.

    Random points on the sphere are complemented by the aligned candidates
    ``+-r unit(c Q)`` and, for minimization, by interior stationary points
    ``-c Q (lam I + Q)^+`` over a grid of multipliers, scaled into the ball.
    """
    objective = Direction(objective)
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    if radius < 0.0:
        raise ValueError(f"Mismatch radius must be nonnegative: {radius}")
    c = as_vector(center)
    q = np.eye(c.size) if quad is None else np.asarray(quad, np.complex128)
    if radius == 0.0:
        zero = np.zeros_like(c)
        return zero, quad_form(c, q)

    rng = np.random.Generator(np.random.PCG64(seed))
    candidates = [_sphere(rng, n_samples, c.size, radius)]
    grad = c @ q
    grad_norm = np.linalg.norm(grad)
    if grad_norm > 0.0:
        direction = grad / grad_norm
        candidates.append(np.vstack([radius * direction, -radius * direction]))
    if objective is Direction.MINIMIZE_JAMMING:
        stationary = []
        for lam in np.concatenate([[0.0], np.logspace(-6, 4, 200)]):
            point = -grad @ np.linalg.pinv(lam * np.eye(c.size) + q)
            norm = np.linalg.norm(point)
            if norm > radius:
                point = point * (radius / norm)
            stationary.append(point)
        candidates.append(np.asarray(stationary))

    pts = np.vstack(candidates)
    shifted = c[None, :] + pts
    values = np.real(np.einsum("ij,jk,ik->i", shifted, q, shifted.conj()))
    pick = (
        int(np.argmax(values))
        if objective is Direction.MAXIMIZE_EVE
        else int(np.argmin(values))
    )
    return pts[pick], float(values[pick])
