import numpy as np
import pytest
from robustwiretap.linalg import (
    PencilPair,
    as_hermitian,
    as_vector,
    clamp_psd,
    complex_to_real_embed,
    eigenvalues,
    fix_phase,
    gram,
    max_generalized_eigvec,
    null_projector,
    pseudo_inverse,
    psd_check,
    quad_form,
)


def test_as_vector_rejects_empty_and_nan() -> None:
    with pytest.raises(ValueError):
        as_vector([])
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])


def test_as_hermitian_rejects_asymmetric() -> None:
    with pytest.raises(ValueError):
        as_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        as_hermitian(np.ones((2, 3)))


def test_gram_and_quad_form_agree() -> None:
    v = np.array([1.0 + 1j, 2.0 - 0.5j])
    m = gram(v)
    assert np.allclose(m, m.conj().T)
    # v (v^H v) v^H = ||v||^4
    assert quad_form(v, m) == pytest.approx(np.linalg.norm(v) ** 4)


def test_psd_check_and_clamp() -> None:
    m = np.diag([1.0, -1e-10])
    assert psd_check(m)
    assert eigenvalues(clamp_psd(m))[0] == pytest.approx(0.0)
    indefinite = np.diag([1.0, -1e-3])
    assert not psd_check(clamp_psd(indefinite))


def test_pseudo_inverse_of_rank_one() -> None:
    v = np.array([3.0, 4.0j])
    pinv = pseudo_inverse(gram(v))
    assert np.allclose(pinv, gram(v) / 625.0)
    assert np.allclose(pseudo_inverse(np.zeros((2, 2))), 0.0)


def test_null_projector_annihilates_vector() -> None:
    v = np.array([1.0, 1j, -2.0])
    proj = null_projector(v)
    assert np.allclose(proj @ v.conj(), 0.0)
    assert np.allclose(proj @ proj, proj)
    with pytest.raises(ValueError):
        null_projector(np.zeros(3))


def test_max_generalized_eigvec_identity_denominator() -> None:
    a = np.diag([1.0, 5.0, 2.0])
    value, vec = max_generalized_eigvec(PencilPair(a, np.eye(3)))
    assert value == pytest.approx(5.0)
    assert np.allclose(vec, [0.0, 1.0, 0.0])


def test_pencil_requires_definite_denominator() -> None:
    with pytest.raises(ValueError):
        PencilPair(np.eye(2), np.diag([1.0, 0.0]))


def test_fix_phase_makes_first_entry_real() -> None:
    v = fix_phase(np.array([0.0, 1j, 1.0]))
    assert v[1].imag == pytest.approx(0.0)
    assert v[1].real > 0.0


def test_real_embedding_doubles_spectrum() -> None:
    m = np.array([[2.0, 1j], [-1j, 2.0]])
    vals = np.linalg.eigvalsh(complex_to_real_embed(m))
    assert np.allclose(vals, [1.0, 1.0, 3.0, 3.0])
