import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higgshym import fields as F
from higgshym.errors import NotHermitianError


def _rand(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _metric(rng, r, m=()):
    a = _rand(rng, m + (r, r))
    return a @ F.dagger(a) + 0.5 * np.eye(r)


def _h_hermitian(rng, h):
    """``X h^-1`` with ``X`` Hermitian is ``h``-Hermitian."""
    x = _rand(rng, h.shape)
    return (x + F.dagger(x)) @ F.inv(h)


def test_identity_and_units():
    rng = np.random.default_rng(0)
    A = _rand(rng, (4, 3, 3))
    assert np.array_equal(F.endo_product(A, F.identity_field((4,), 3)), A)
    E12, E21, E11 = (np.zeros((2, 2)) for _ in range(3))
    E12[0, 1] = E21[1, 0] = E11[0, 0] = 1
    assert np.array_equal(F.endo_product(E12, E21), E11)


def test_hermitian_p_is_self_adjoint_for_inner():
    rng = np.random.default_rng(1)
    h = _metric(rng, 3, (5,))
    P = _h_hermitian(rng, h)
    A, B = _rand(rng, (5, 3, 3)), _rand(rng, (5, 3, 3))
    # brute-force pairing: sum over basis pairs of h(e_i A, e_j B-type) written out
    def pair(X, Y):
        hi = np.linalg.inv(h)
        return np.array([sum(X[k, i, a] * h[k, a, b] * np.conj(Y[k, j, b]) * hi[k, j, i]
                             for i in range(3) for j in range(3) for a in range(3) for b in range(3))
                         for k in range(5)])
    assert np.allclose(pair(P @ A, B), pair(A, P @ B), atol=1e-10)
    assert np.allclose(F.inner(P @ A, B, h), pair(P @ A, B), atol=1e-10)


def test_eig_bounds_trivial_cases():
    rng = np.random.default_rng(2)
    h = _metric(rng, 2, (3,))
    lo, hi = F.herm_eig_bounds(2.5 * F.identity_field((3,), 2), h)
    assert np.allclose(lo, 2.5) and np.allclose(hi, 2.5)
    lo, hi = F.herm_eig_bounds(np.diag([1.0, 3.0]).astype(complex)[None], None)
    assert lo[0] == pytest.approx(1) and hi[0] == pytest.approx(3)


def test_eigvals_against_characteristic_polynomial():
    rng = np.random.default_rng(3)
    h = _metric(rng, 3)
    A = _h_hermitian(rng, h)
    roots = np.sort(np.real(np.roots(np.poly(A))))
    assert np.allclose(F.herm_eigvals(A, h), roots, atol=1e-10)


def test_non_hermitian_rejected():
    rng = np.random.default_rng(4)
    with pytest.raises(NotHermitianError):
        F.herm_eig_bounds(_rand(rng, (2, 2)), np.eye(2))
    with pytest.raises(NotHermitianError):
        F.check_metric(np.diag([1.0, -1.0]))
    with pytest.raises(NotHermitianError):
        F.check_metric(np.array([[1.0, 0.5], [0.1, 1.0]]))


def test_exp_log_examples():
    assert np.allclose(F.matrix_exp(np.zeros((3, 2, 2))), np.eye(2))
    s = np.array([[[0.7]]])
    assert F.matrix_exp(s)[0, 0, 0] * F.matrix_exp(-s)[0, 0, 0] == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1), st.floats(0.1, 2.0))
def test_log_exp_roundtrip(r, seed, size):
    rng = np.random.default_rng(seed)
    h = _metric(rng, r, (3,))
    S = _h_hermitian(rng, h)
    S *= size / F.sup_norm(S, h)
    E = F.matrix_exp(S, h)
    assert np.max(np.abs(F.matrix_log(E, h) - S)) < 1e-10
    assert F.hermitian_defect(E @ h) < 1e-12
    assert np.min(F.herm_eig_bounds(E, h)[0]) > 0


def test_operator_norm_trivial():
    rng = np.random.default_rng(5)
    h = _metric(rng, 3, (4,))
    assert np.allclose(F.operator_norm(np.zeros((4, 3, 3)), h), 0)
    assert np.allclose(F.operator_norm(F.identity_field((4,), 3), h), 1)


def test_operator_norm_power_iteration_oracle():
    rng = np.random.default_rng(6)
    h = _metric(rng, 3)
    A = _rand(rng, (3, 3))
    Astar = h @ F.dagger(A) @ np.linalg.inv(h)
    M = A @ Astar                                  # h(s M, s) = |s A|_h^2
    s = _rand(rng, (3,))
    for _ in range(500):
        s = s @ M
        s /= np.sqrt(np.real(s @ h @ np.conj(s)))
    est = np.sqrt(np.real((s @ A) @ h @ np.conj(s @ A)))
    assert F.operator_norm(A, h) == pytest.approx(est, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_adjoint_properties(r, seed):
    rng = np.random.default_rng(seed)
    h = _metric(rng, r, (2,))
    A, B = _rand(rng, (2, r, r)), _rand(rng, (2, r, r))
    adj = F.h_adjoint
    assert np.allclose(adj(adj(A, h), h), A, atol=1e-9)
    assert np.allclose(adj(A @ B, h), adj(B, h) @ adj(A, h), atol=1e-9)
    # h(s A, t) = h(s, t A*)
    s, t = _rand(rng, (2, r)), _rand(rng, (2, r))
    lhs = np.einsum("ka,kab,kb->k", np.einsum("ka,kab->kb", s, A), h, np.conj(t))
    rhs = np.einsum("ka,kab,kb->k", s, h, np.conj(np.einsum("ka,kab->kb", t, adj(A, h))))
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_symmetric_frame_roundtrip():
    rng = np.random.default_rng(7)
    h = _metric(rng, 3, (4,))
    A = _h_hermitian(rng, h)
    B = F.symmetric_frame(A, h)
    assert F.hermitian_defect(B) < 1e-12
    assert np.allclose(F.from_symmetric_frame(B, h), A)
    s, si = F.sqrt_metric(h)
    assert np.allclose(s @ s, h) and np.allclose(s @ si, np.eye(3))
