import numpy as np
import numpy.typing as npt
from dataclasses import dataclass
from scipy.linalg import eigh, eigvalsh
from typing import Tuple

ComplexVector = npt.NDArray[np.complex128]
HermitianMatrix = npt.NDArray[np.complex128]
RealMatrix = npt.NDArray[np.float64]

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8
RANK_TOL = 1e-9
DEFINITE_TOL = 1e-10


def as_vector(v: npt.ArrayLike) -> ComplexVector:
    """Return ``v`` as a finite one-dimensional complex array."""
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    if arr.size < 1:
        raise ValueError("Vector must have at least one entry.")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"Vector has non-finite entries: {arr}")
    return arr


def as_hermitian(
    m: npt.ArrayLike, tol: float = HERMITIAN_TOL
) -> HermitianMatrix:
    """Validate a square conjugate-symmetric matrix and return its exactly
    Hermitian part.

    Raises:
        ValueError: If the matrix is not square or deviates from its
        conjugate transpose by more than ``tol`` (max entrywise).
    """
    arr = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"Matrix is not square: shape {arr.shape}")
    asym = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
    if asym > tol:
        raise ValueError(
            f"Matrix is not Hermitian: max |A - A^H| = {asym:.3e}"
        )
    return 0.5 * (arr + arr.conj().T)


def gram(v: npt.ArrayLike) -> HermitianMatrix:
    """Outer product ``v^H v`` of a row vector ``v``."""
    row = as_vector(v)
    return np.outer(row.conj(), row)


def quad_form(v: npt.ArrayLike, m: npt.ArrayLike) -> float:
    """Real quadratic form ``v M v^H`` of a row vector and a Hermitian
    matrix."""
    row = np.asarray(v, dtype=np.complex128).reshape(-1)
    return float(np.real(row @ np.asarray(m) @ row.conj()))


def eigenvalues(m: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Ascending real spectrum of a Hermitian matrix."""
    return np.asarray(eigvalsh(as_hermitian(m)), dtype=np.float64)


def psd_check(m: npt.ArrayLike, tol: float = PSD_TOL) -> bool:
    """True iff the smallest eigenvalue of Hermitian ``m`` is >= -tol."""
    return bool(eigenvalues(m)[0] >= -tol)


def clamp_psd(m: npt.ArrayLike, tol: float = PSD_TOL) -> HermitianMatrix:
    """Zero the eigenvalues in ``[-tol, 0)`` of a solver output.

    Eigenvalues below ``-tol`` are kept, so a genuinely indefinite matrix
    still fails :func:`psd_check` afterwards.
    """
    herm = as_hermitian(m, tol=max(HERMITIAN_TOL, tol))
    vals, vecs = eigh(herm)
    vals = np.where((vals < 0) & (vals >= -tol), 0.0, vals)
    out = (vecs * vals) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def pseudo_inverse(
    m: npt.ArrayLike, rank_tol: float = RANK_TOL
) -> HermitianMatrix:
    """Moore-Penrose pseudo-inverse of a Hermitian matrix.

    Eigenvalues with ``|lambda| <= rank_tol * |lambda_max|`` are treated as
    zero; the zero matrix maps to the zero matrix.
    """
    herm = as_hermitian(m)
    vals, vecs = eigh(herm)
    scale = np.max(np.abs(vals)) if vals.size else 0.0
    if scale == 0.0:
        return np.zeros_like(herm)
    keep = np.abs(vals) > rank_tol * scale
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    out = (vecs * inv) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def null_projector(v: npt.ArrayLike) -> HermitianMatrix:
    """Projector ``I - v^H (v v^H)^{-1} v`` onto the orthogonal complement
    of ``span(v^H)``.

    Raises:
        ValueError: If ``v`` is the zero vector.
    """
    row = as_vector(v)
    norm_sq = float(np.real(np.vdot(row, row)))
    if norm_sq <= 0.0:
        raise ValueError("Projection onto the complement of 0 is undefined.")
    return np.eye(row.size, dtype=np.complex128) - gram(row) / norm_sq


def fix_phase(v: npt.ArrayLike, tol: float = 1e-12) -> ComplexVector:
    """Rotate ``v`` so that its first nonzero entry is real-positive."""
    vec = as_vector(v)
    nz = np.flatnonzero(np.abs(vec) > tol * max(1.0, np.max(np.abs(vec))))
    if nz.size == 0:
        return vec
    first = vec[nz[0]]
    return vec * (np.abs(first) / first)


def unit(v: npt.ArrayLike) -> ComplexVector:
    vec = as_vector(v)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("Cannot normalize the zero vector.")
    return vec / norm


@dataclass(frozen=True)
class PencilPair:
    """Hermitian matrix pencil ``(A, B)`` with ``B`` positive definite."""

    a: HermitianMatrix
    b: HermitianMatrix

    def __post_init__(self) -> None:
        a = as_hermitian(self.a)
        b = as_hermitian(self.b)
        if a.shape != b.shape:
            raise ValueError(
                f"Pencil dimensions differ: {a.shape} vs {b.shape}"
            )
        min_eig = eigvalsh(b)[0]
        if min_eig <= DEFINITE_TOL:
            raise ValueError(
                "Pencil denominator is not positive definite: "
                f"min eigenvalue {min_eig:.3e}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def max_generalized_eigvec(p: PencilPair) -> Tuple[float, ComplexVector]:
    """Largest generalized eigenpair of ``A v = lambda B v``.

    Returns:
        Tuple of the eigenvalue and a unit-norm eigenvector whose first
        nonzero entry is real-positive.
    """
    vals, vecs = eigh(p.a, p.b)
    return float(vals[-1]), fix_phase(unit(vecs[:, -1]))


def complex_to_real_embed(m: npt.ArrayLike) -> RealMatrix:
    """Real symmetric embedding ``[[A, -B], [B, A]]`` of ``M = A + iB``.

    The embedding is PSD iff ``M`` is, and each eigenvalue of ``M`` appears
    twice in its spectrum.
    """
    herm = as_hermitian(m)
    re, im = herm.real, herm.imag
    return np.block([[re, -im], [im, re]])
