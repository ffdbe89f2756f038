import itertools
import logging
import math
import numpy as np
import numpy.typing as npt
from typing import Callable, Iterator, List, Tuple
from .model import ChannelSet, SystemParams
from .power import ChannelConstants, PowerSplit

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]

REFINE_ROUNDS = 6


def _quad(rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("ij,jk,ik->i", rows, q, rows.conj()))


def _project_ball(points: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return points * scale


def ball_extremum(
    center: npt.ArrayLike,
    quad: npt.ArrayLike,
    radius: float,
    maximize: bool = True,
    n_samples: int = 256,
    steps: int = 60,
    seed: int = 0,
) -> Tuple[np.ndarray, float]:
    """Extremum of ``(c + e) Q (c + e)^H`` over ``||e|| <= radius``.

    Samples the sphere, keeps the best few points and refines them by
    projected gradient steps of size ``1 / (2 ||Q||)``.
    """
    c = np.asarray(center, dtype=np.complex128).reshape(-1)
    q = np.asarray(quad, dtype=np.complex128)
    if radius <= 0.0:
        return np.zeros_like(c), float(_quad(c[None, :], q)[0])
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_samples, c.size)) + 1j * rng.normal(
        size=(n_samples, c.size)
    )
    pts = radius * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    grad = c @ q
    extra = [np.zeros_like(c)]
    if np.linalg.norm(grad) > 0.0:
        unit = grad / np.linalg.norm(grad)
        extra += [radius * unit, -radius * unit]
    pts = np.vstack([pts, np.asarray(extra)])

    sign = 1.0 if maximize else -1.0
    values = sign * _quad(c[None, :] + pts, q)
    keep = pts[np.argsort(values)[-8:]]
    norm_q = float(np.linalg.norm(q, 2))
    if norm_q > 0.0:
        eta = 0.5 / norm_q
        for _ in range(steps):
            keep = _project_ball(keep + sign * eta * ((c + keep) @ q), radius)
            if maximize:
                norms = np.linalg.norm(keep, axis=1, keepdims=True)
                keep = radius * keep / np.maximum(norms, 1e-300)
    final = sign * _quad(c[None, :] + keep, q)
    pick = int(np.argmax(final))
    return keep[pick], float(sign * final[pick])


def _covariance(
    power: float, split: float, theta: float, phi: float
) -> np.ndarray:
    u = np.array(
        [
            [math.cos(theta), -np.exp(-1j * phi) * math.sin(theta)],
            [np.exp(1j * phi) * math.sin(theta), math.cos(theta)],
        ]
    )
    d = np.diag([power * split, power * (1.0 - split)])
    return u @ d @ u.conj().T


def _clip(point: Tuple[float, ...], power: float) -> Tuple[float, ...]:
    s = min(max(point[0], 0.0), power)
    if len(point) == 1:
        return (s,)
    f = min(max(point[1], 0.0), 1.0)
    return (s, f, point[2], point[3])


def _build(point: Tuple[float, ...]) -> np.ndarray:
    if len(point) == 1:
        return np.array([[point[0]]], dtype=np.complex128)
    return _covariance(*point)


def _grid(
    dimension: int, power: float, resolution: int
) -> Iterator[Tuple[float, ...]]:
    levels = np.linspace(0.0, power, resolution + 1)
    if dimension == 1:
        for s in levels:
            yield (float(s),)
        return
    splits = np.linspace(0.5, 1.0, resolution // 2 + 1)
    thetas = np.linspace(0.0, math.pi / 2, resolution + 1)
    phis = np.linspace(0.0, 2 * math.pi, 2 * resolution, endpoint=False)
    yield (0.0, 1.0, 0.0, 0.0)
    for s, f, t, p in itertools.product(levels[1:], splits, thetas, phis):
        yield (float(s), float(f), float(t), float(p))


def grid_covariance_search(
    objective: Objective,
    dimension: int,
    power: float,
    resolution: int = 8,
) -> Tuple[np.ndarray, float]:
    """Exhaustive maximization of ``objective`` over PSD matrices with
    ``tr Q <= power`` in dimension 1 or 2.

    Two-dimensional matrices are parameterized by trace, eigenvalue split
    and a unitary angle pair; the best grid point is then refined by a
    pattern search with halving steps.

    Args:
        objective (Callable): Function of the covariance to maximize.
        dimension (int): 1 or 2.
        power (float): Trace budget.
        resolution (int): Grid points per unit axis.

    Returns:
        tuple: Best covariance and its objective value.

    Raises:
        ValueError: If ``dimension`` is not 1 or 2.
    """
    if dimension not in (1, 2):
        raise ValueError(
            "Covariance grid search supports dimension 1 or 2, "
            f"got {dimension}"
        )
    if power < 0.0:
        raise ValueError(f"Power must be nonnegative, got {power}")
    if resolution < 1:
        raise ValueError(f"Resolution must be at least 1, got {resolution}")

    best_point: Tuple[float, ...] = (
        (0.0,) if dimension == 1 else (0.0, 1.0, 0.0, 0.0)
    )
    best_value = -math.inf
    evaluations = 0
    for point in _grid(dimension, power, resolution):
        value = objective(_build(point))
        evaluations += 1
        if value > best_value:
            best_point, best_value = point, value

    steps: List[float] = [power / resolution]
    if dimension == 2:
        steps += [
            0.5 / resolution,
            math.pi / (2 * resolution),
            math.pi / resolution,
        ]
    for _ in range(REFINE_ROUNDS):
        steps = [s / 2 for s in steps]
        improved = True
        while improved:
            improved = False
            for offsets in itertools.product((-1, 0, 1), repeat=len(steps)):
                if not any(offsets):
                    continue
                point = _clip(
                    tuple(
                        x + o * s
                        for x, o, s in zip(best_point, offsets, steps)
                    ),
                    power,
                )
                value = objective(_build(point))
                evaluations += 1
                if value > best_value + 1e-12 * max(1.0, abs(best_value)):
                    best_point, best_value = point, value
                    improved = True
    logger.debug("Covariance grid search used %d evaluations.", evaluations)
    return _build(best_point), best_value


def power_grid_search(
    c: ChannelConstants, sigma_sq: float, budget: float, n: int = 400
) -> Tuple[PowerSplit, float]:
    """Best split of ``(p1 c1 + s)(p2 c3 + s) / (p1 c2 + p2 c3 + s)`` on an
    ``n x n`` grid over ``p1 + p2 <= budget``; ties go to the larger
    ``p1``."""
    if n < 2:
        raise ValueError(f"Grid resolution must be at least 2, got {n}")
    grid = np.linspace(0.0, budget, n)
    p1, p2 = np.meshgrid(grid, grid, indexing="ij")
    feasible = p1 + p2 <= budget * (1.0 + 1e-12)
    value = (p1 * c.c1 + sigma_sq) * (p2 * c.c3 + sigma_sq) / (
        p1 * c.c2 + p2 * c.c3 + sigma_sq
    )
    value = np.where(feasible, value, -np.inf)
    # flat argmax scans p2 fastest, so reversed p1 rows prefer larger p1
    flipped = value[::-1, :]
    i, j = np.unravel_index(int(np.argmax(flipped)), flipped.shape)
    i = n - 1 - i
    a, b = float(grid[i]), float(grid[j])
    if a + b > budget:
        b = max(budget - a, 0.0)
    return PowerSplit(p1=a, p2=b, budget=budget), float(value[i, j])


def rayleigh_quotient_max(
    a: npt.ArrayLike,
    b: npt.ArrayLike,
    n_samples: int = 20_000,
    steps: int = 200,
    seed: int = 0,
) -> Tuple[np.ndarray, float]:
    """Largest ``x^H A x / x^H B x`` by sampling followed by power
    iteration on ``B^{-1} A``."""
    a_m = np.asarray(a, dtype=np.complex128)
    b_m = np.asarray(b, dtype=np.complex128)
    n = a_m.shape[0]
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=(n_samples, n)) + 1j * rng.normal(size=(n_samples, n))

    def quotient(rows: np.ndarray) -> np.ndarray:
        num = np.real(np.einsum("ij,jk,ik->i", rows.conj(), a_m, rows))
        den = np.real(np.einsum("ij,jk,ik->i", rows.conj(), b_m, rows))
        return num / den

    values = quotient(xs)
    x = xs[int(np.argmax(values))]
    for _ in range(steps):
        x = np.linalg.solve(b_m, a_m @ x)
        x = x / np.linalg.norm(x)
    return x, float(quotient(x[None, :])[0])


def worst_eve_power(
    q: np.ndarray, h_e_est: np.ndarray, eps_h: float, seed: int = 0
) -> float:
    return ball_extremum(h_e_est, q, eps_h, maximize=True, seed=seed)[1]


def worst_jamming_power(
    q: np.ndarray, g_e_est: np.ndarray, eps_g: float, seed: int = 0
) -> float:
    return ball_extremum(g_e_est, q, eps_g, maximize=False, seed=seed)[1]


def brute_force_dt(
    ch: ChannelSet, params: SystemParams, resolution: int = 8
) -> Tuple[np.ndarray, float]:
    """Worst-case DT secrecy rate maximized over a covariance grid, for
    ``N_a <= 2``."""
    sigma = params.sigma_sq

    def rate(q: np.ndarray) -> float:
        bob = float(np.real(ch.h_b @ q @ ch.h_b.conj()))
        eve = worst_eve_power(q, ch.h_e_est, params.eps_h)
        return math.log2(sigma + bob) - math.log2(sigma + max(eve, 0.0))

    q, value = grid_covariance_search(rate, ch.n_a, params.p_s, resolution)
    return q, max(value, 0.0)


def _null_basis(g_b: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(g_b.reshape(1, -1))
    return vh[1:].conj().T


def brute_force_jamming(
    ch: ChannelSet, params: SystemParams, resolution: int = 8
) -> Tuple[np.ndarray, float]:
    """Zero-forcing jamming covariance maximizing the worst-case jamming
    power at Eve, by grid search inside the null space of ``g_b``
    (``N_h <= 3``)."""
    n = ch.n_h
    if n == 1 or params.p_j <= 0.0:
        return np.zeros((n, n), dtype=np.complex128), 0.0
    if n > 3:
        raise ValueError(f"Jamming brute force supports N_h <= 3, got {n}")
    basis = _null_basis(ch.g_b)

    def power(s: np.ndarray) -> float:
        q = basis @ s @ basis.conj().T
        return worst_jamming_power(q, ch.g_e_est, params.eps_g)

    s, value = grid_covariance_search(power, n - 1, params.p_j, resolution)
    return basis @ s @ basis.conj().T, value
