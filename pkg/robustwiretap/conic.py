import logging
import cvxpy as cp
import numpy as np
from dataclasses import dataclass, field
from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple
from .config_loader import solver_from_env

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-7


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INACCURATE = "inaccurate"
    ERROR = "error"


_STATUS_MAP: Dict[str, SolveStatus] = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolveStatus.INACCURATE,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
}


class SolverFailure(RuntimeError):
    """Raised by scheme code when a conic solve ends in an error status."""


class BisectionError(ValueError):
    """An initial bisection bound failed its feasibility check."""


class SolverSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    solver: str = Field(default_factory=solver_from_env)
    verbose: bool = False
    options: Dict[str, Any] = Field(default_factory=dict)


def embed_block(block: Any) -> cp.Expression:
    """Real symmetric form of a Hermitian block expression.

    Complex blocks become ``[[Re, -Im], [Im, Re]]``; the result is
    symmetrized so the PSD cone sees an exactly symmetric argument.
    """
    expr = block
    if not isinstance(block, cp.Expression):
        expr = cp.Constant(block)
    if expr.ndim == 0:
        expr = cp.reshape(expr, (1, 1), order="F")
    if expr.ndim != 2 or expr.shape[0] != expr.shape[1]:
        raise ValueError(f"LMI block is not square: shape {expr.shape}")
    if not expr.is_real():
        re, im = cp.real(expr), cp.imag(expr)
        expr = cp.bmat([[re, -im], [im, re]])
    return (expr + expr.T) / 2


class ConicProblem:
    """An LMI-constrained problem assembled variable by variable.

    Every variable, parameter and constraint is registered under a unique
    name; the cvxpy problem is compiled once and re-solved when parameter
    values change.
    """

    def __init__(self, name: str = "problem"):
        self.name = name
        self.variables: Dict[str, cp.Variable] = {}
        self.parameters: Dict[str, cp.Parameter] = {}
        self.lmis: Dict[str, cp.Expression] = {}
        self.linear: Dict[str, cp.Constraint] = {}
        self.sense = "feasibility"
        self.objective: cp.Expression = cp.Constant(0.0)
        self._constraints: Dict[str, cp.Constraint] = {}
        self._compiled: Optional[cp.Problem] = None

    def _claim(self, name: str) -> None:
        taken = (
            name in self.variables
            or name in self.parameters
            or name in self._constraints
        )
        if taken:
            raise ValueError(
                f"Name '{name}' is already declared in problem '{self.name}'."
            )
        self._compiled = None

    def scalar(self, name: str, nonneg: bool = False) -> cp.Variable:
        self._claim(name)
        var = cp.Variable(name=name)
        self.variables[name] = var
        if nonneg:
            self.add_linear(f"{name}_nonneg", var >= 0)
        return var

    def hermitian(self, name: str, n: int, psd: bool = False) -> cp.Variable:
        if n < 1:
            raise ValueError(f"Matrix variable '{name}' needs n >= 1, got {n}")
        self._claim(name)
        var = cp.Variable((n, n), hermitian=True, name=name)
        self.variables[name] = var
        if psd:
            self.add_lmi(f"{name}_psd", var)
        return var

    def parameter(
        self, name: str, value: Optional[float] = None, nonneg: bool = True
    ) -> cp.Parameter:
        self._claim(name)
        param = cp.Parameter(nonneg=nonneg, name=name, value=value)
        self.parameters[name] = param
        return param

    def add_lmi(self, name: str, block: Any) -> None:
        self._claim(name)
        embedded = embed_block(block)
        self.lmis[name] = embedded
        self._constraints[name] = embedded >> 0

    def add_linear(self, name: str, constraint: cp.Constraint) -> None:
        self._claim(name)
        self.linear[name] = constraint
        self._constraints[name] = constraint

    def minimize(self, expr: Any) -> None:
        self.sense = "minimize"
        self.objective = expr
        self._compiled = None

    def maximize(self, expr: Any) -> None:
        self.sense = "maximize"
        self.objective = expr
        self._compiled = None

    def compiled(self) -> cp.Problem:
        if self._compiled is None:
            if self.sense == "maximize":
                objective = cp.Maximize(self.objective)
            else:
                objective = cp.Minimize(self.objective)
            self._compiled = cp.Problem(
                objective, list(self._constraints.values())
            )
        return self._compiled


@dataclass(frozen=True)
class ConicSolution:
    status: SolveStatus
    values: Dict[str, Any] = field(default_factory=dict)
    duals: Dict[str, Any] = field(default_factory=dict)
    objective_value: float = float("nan")
    residual: float = float("nan")
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.INACCURATE)

    def __bool__(self) -> bool:
        return self.feasible

    def value(self, name: str) -> Any:
        if name not in self.values:
            raise ValueError(
                f"No value for '{name}'. Available: {list(self.values)}"
            )
        return self.values[name]

    def require(self) -> "ConicSolution":
        if self.status is SolveStatus.ERROR:
            raise SolverFailure(self.message or "conic solver error")
        return self


def _max_violation(constraints: List[cp.Constraint]) -> float:
    worst = 0.0
    for con in constraints:
        try:
            viol = con.violation()
        except (ValueError, TypeError):
            return float("inf")
        worst = max(worst, float(np.max(np.atleast_1d(viol))))
    return worst


def _read_value(var: cp.Variable) -> Any:
    if var.value is None:
        return None
    if var.ndim == 0:
        return float(np.real(var.value))
    return np.array(var.value)


def solve(
    problem: ConicProblem, settings: Optional[SolverSettings] = None
) -> ConicSolution:
    """Solve a conic problem and report an honest status.

    Args:
        problem (ConicProblem): The assembled problem.
        settings (SolverSettings, optional): Backend choice and options.
        Defaults to the environment-configured solver.

    Returns:
        ConicSolution: Status, variable values, constraint duals, the
        objective value and the largest constraint violation.
    """
    settings = settings or SolverSettings()
    compiled = problem.compiled()
    try:
        compiled.solve(
            solver=settings.solver,
            verbose=settings.verbose,
            **settings.options,
        )
    except cp.error.SolverError as exc:
        logger.debug("Solver error on '%s': %s", problem.name, exc)
        return ConicSolution(status=SolveStatus.ERROR, message=str(exc))

    status = _STATUS_MAP.get(compiled.status, SolveStatus.ERROR)
    if status not in (SolveStatus.OPTIMAL, SolveStatus.INACCURATE):
        return ConicSolution(
            status=status, message=f"backend status: {compiled.status}"
        )

    residual = _max_violation(list(problem._constraints.values()))
    if status is SolveStatus.OPTIMAL and residual > RESIDUAL_TOL:
        status = SolveStatus.INACCURATE
    values = {
        name: _read_value(var) for name, var in problem.variables.items()
    }
    duals = {
        name: con.dual_value for name, con in problem._constraints.items()
    }
    objective = compiled.value
    return ConicSolution(
        status=status,
        values=values,
        duals=duals,
        objective_value=float(objective) if objective is not None else 0.0,
        residual=residual,
        message=f"backend status: {compiled.status}",
    )


class BisectionStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"


class BisectionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    tolerance: float = Field(default=1e-4, gt=0.0)
    max_iter: int = Field(default=60, ge=1)

    @model_validator(mode="after")
    def _check_interval(self) -> "BisectionConfig":
        if not self.lower < self.upper:
            raise ValueError(
                f"Bisection needs lower < upper, got [{self.lower}, "
                f"{self.upper}]"
            )
        return self


@dataclass(frozen=True)
class BisectionResult:
    value: float
    witness: Any
    iterations: int
    status: BisectionStatus
    lower_feasible: bool = False
    widths: Tuple[float, ...] = ()


def bisect(
    oracle: Callable[[float], Any], cfg: BisectionConfig
) -> BisectionResult:
    """Locate the feasibility threshold of a monotone oracle.

    ``oracle(t)`` is feasible when its return value is truthy; the last
    truthy return is kept as the witness of the reported ``t``. Each step
    evaluates the midpoint and keeps the half that still brackets the
    threshold, so the interval width after ``k`` steps is ``(u-l)/2^k``.

    Args:
        oracle (Callable): Feasibility test, monotone in ``t``.
        cfg (BisectionConfig): Initial bracket, tolerance and step cap.

    Returns:
        BisectionResult: The smallest known feasible ``t`` and its witness.

    Raises:
        BisectionError: If the upper bound is infeasible.
    """
    upper_witness = oracle(cfg.upper)
    if not upper_witness:
        raise BisectionError(
            f"Upper bound u={cfg.upper:.6g} is infeasible; the threshold "
            "lies above the bracket."
        )
    lower_witness = oracle(cfg.lower)
    if lower_witness:
        logger.debug("Lower bound l=%.6g is already feasible.", cfg.lower)
        return BisectionResult(
            value=cfg.lower,
            witness=lower_witness,
            iterations=0,
            status=BisectionStatus.CONVERGED,
            lower_feasible=True,
            widths=(cfg.upper - cfg.lower,),
        )

    lo, hi, witness = cfg.lower, cfg.upper, upper_witness
    widths = [hi - lo]
    iterations = 0
    status = BisectionStatus.CONVERGED
    while hi - lo > cfg.tolerance:
        if iterations >= cfg.max_iter:
            status = BisectionStatus.MAX_ITER
            break
        mid = 0.5 * (lo + hi)
        outcome = oracle(mid)
        iterations += 1
        if outcome:
            hi, witness = mid, outcome
        else:
            lo = mid
        widths.append(hi - lo)
    return BisectionResult(
        value=hi,
        witness=witness,
        iterations=iterations,
        status=status,
        widths=tuple(widths),
    )


@dataclass(frozen=True)
class FractionalPoint:
    """Variable values at which ``num / den`` was certified ``<= t``."""

    values: Dict[str, Any]
    ratio: float

    def value(self, name: str) -> Any:
        if name not in self.values:
            raise ValueError(
                f"No value for '{name}'. Available: {list(self.values)}"
            )
        return self.values[name]


def fractional_step(
    problem: ConicProblem,
    t: cp.Parameter,
    num: cp.Expression,
    den: cp.Expression,
    value: float,
    settings: Optional[SolverSettings] = None,
) -> Optional[FractionalPoint]:
    """One parametric step of a linear-fractional program.

    ``problem`` must minimize ``num - t den`` over a set that is never
    empty, so the backend is not asked to certify infeasibility. The level
    ``value`` is reachable iff the optimum is ``<= 0``.

    Args:
        problem (ConicProblem): Problem minimizing ``num - t den``.
        t (cp.Parameter): The level parameter of ``problem``.
        num (cp.Expression): Numerator, nonnegative on the feasible set.
        den (cp.Expression): Denominator, positive on the feasible set.
        value (float): Level to test.
        settings (SolverSettings, optional): Conic backend settings.

    Returns:
        FractionalPoint: The minimizer and its ratio, or None when the
        level is not certified reachable. A backend error counts as not
        certified.
    """
    t.value = value
    sol = solve(problem, settings)
    if sol.status is SolveStatus.ERROR:
        logger.debug(
            "'%s' at t=%.9g errored: %s", problem.name, value, sol.message
        )
        return None
    if not sol.feasible or sol.objective_value > 0.0:
        return None
    den_value = float(np.real(den.value))
    if den_value <= 0.0:
        return None
    ratio = max(float(np.real(num.value)), 0.0) / den_value
    return FractionalPoint(values=dict(sol.values), ratio=ratio)


def _coordinates(var: cp.Variable) -> Iterator[np.ndarray]:
    if var.ndim == 0:
        yield np.array(1.0)
        return
    n = var.shape[0]
    for i in range(n):
        unit = np.zeros((n, n), dtype=np.complex128)
        unit[i, i] = 1.0
        yield unit
    for i in range(n):
        for j in range(i + 1, n):
            unit = np.zeros((n, n), dtype=np.complex128)
            unit[i, j] = unit[j, i] = 1.0
            yield unit
    for i in range(n):
        for j in range(i + 1, n):
            unit = np.zeros((n, n), dtype=np.complex128)
            unit[i, j], unit[j, i] = 1j, -1j
            yield unit


def _zero(var: cp.Variable) -> Any:
    if var.ndim == 0:
        return np.array(0.0)
    return np.zeros(var.shape, dtype=np.complex128)


def _snapshot(problem: ConicProblem) -> Tuple[float, List[np.ndarray]]:
    obj = 0.0
    if problem.sense != "feasibility":
        obj = float(np.real((cp.Constant(0.0) + problem.objective).value))
    blocks = [np.asarray(expr.value, dtype=np.float64)
              for expr in problem.lmis.values()]
    scalars: List[float] = []
    for con in problem.linear.values():
        gap = float(np.real(np.sum(con.expr.value)))
        if isinstance(con, cp.constraints.Equality):
            scalars.extend([gap, -gap])
        else:
            scalars.append(-gap)
    blocks.append(np.diag(scalars) if scalars else np.zeros((0, 0)))
    return obj, blocks


def dump_sdpa(problem: ConicProblem, path: str) -> None:
    """Write the real-embedded problem in SDPA sparse format.

    The dump is ``min c.x  s.t.  sum_k x_k F_k - F_0 >= 0`` over the real
    coordinates of all variables (diagonal, real upper and imaginary upper
    entries of each Hermitian variable). Linear constraints form one
    diagonal block.

    Raises:
        ValueError: If a parameter has no value or the path is unwritable.
    """
    for name, param in problem.parameters.items():
        if param.value is None:
            raise ValueError(f"Parameter '{name}' has no value to dump.")
    saved = {name: var.value for name, var in problem.variables.items()}
    try:
        for var in problem.variables.values():
            var.value = _zero(var)
        obj0, base = _snapshot(problem)
        columns: List[Tuple[float, List[np.ndarray]]] = []
        for var in problem.variables.values():
            for unit in _coordinates(var):
                var.value = unit if var.ndim else unit.item()
                obj, blocks = _snapshot(problem)
                columns.append(
                    (obj - obj0, [b - b0 for b, b0 in zip(blocks, base)])
                )
            var.value = _zero(var)
    finally:
        for name, var in problem.variables.items():
            var.value = saved[name]

    sign = -1.0 if problem.sense == "maximize" else 1.0
    sizes = [b.shape[0] for b in base[:-1]]
    n_linear = base[-1].shape[0]
    if n_linear:
        sizes.append(-n_linear)
    lines = [
        f"* {problem.name}: {len(columns)} coordinates",
        str(len(columns)),
        str(len(sizes)),
        " ".join(str(s) for s in sizes),
        " ".join(f"{sign * c:.17g}" for c, _ in columns),
    ]

    def entries(mat_no: int, blocks: List[np.ndarray], scale: float) -> None:
        for blk_no, block in enumerate(blocks, start=1):
            if block.size == 0:
                continue
            rows, cols = np.nonzero(np.abs(block) > 1e-15)
            for i, j in zip(rows, cols):
                if i <= j:
                    lines.append(
                        f"{mat_no} {blk_no} {i + 1} {j + 1} "
                        f"{scale * block[i, j]:.17g}"
                    )

    entries(0, [b for b in base if b.size], -1.0)
    for k, (_, blocks) in enumerate(columns, start=1):
        entries(k, [b for b in blocks if b.size], 1.0)
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ValueError(f"Cannot write SDPA dump to {path}: {exc}") from exc
