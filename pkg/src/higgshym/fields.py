"""Pointwise linear algebra on matrix-valued fields.

Matrices act on row vectors: an endomorphism field ``A`` sends a section
``s`` to ``s @ A`` and composition is ordinary matrix multiplication.  A
metric ``h`` pairs sections as ``h(s, t) = s h t^H``; the adjoint with respect
to ``h`` is therefore ``A* = h A^H h^-1`` and ``A`` is ``h``-Hermitian exactly
when ``A h`` is a Hermitian matrix.  Spectral operations (eigenvalues, exp,
log, operator norm) go through the conjugate ``h^{-1/2} A h^{1/2}``, which is
Hermitian in that case.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import NotHermitianError

HERMITIAN_TOL = 1e-12


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def identity_field(shape: tuple, r: int) -> np.ndarray:
    return np.broadcast_to(np.eye(r, dtype=complex), tuple(shape) + (r, r)).copy()


def inv(a: np.ndarray) -> np.ndarray:
    return kernels.inv(a)


def mm(*mats: np.ndarray) -> np.ndarray:
    """Pointwise product ``m0 m1 ...`` of matrix fields (numpy broadcasting)."""
    out = mats[0]
    for m in mats[1:]:
        out = kernels.matmul(out, m)
    return out


def endo_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise composition ``a . b`` (apply ``a`` first, row convention)."""
    return mm(a, b)


def hermitian_defect(a: np.ndarray) -> float:
    """``max |a - a^H| / max(1, max |a|)``."""
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return float(np.max(np.abs(a - dagger(a)))) / scale if a.size else 0.0


def check_metric(h: np.ndarray, name: str = "metric", tol: float = HERMITIAN_TOL) -> None:
    """Raise ``NotHermitianError`` unless ``h`` is Hermitian positive definite."""
    if not np.all(np.isfinite(h)):
        raise NotHermitianError(f"{name} has non-finite entries")
    d = hermitian_defect(h)
    if d > tol:
        raise NotHermitianError(f"{name} is not Hermitian (defect {d:.2e})")
    w, _ = kernels.eigh(hermitian_part(h))
    if np.min(w) <= 0:
        raise NotHermitianError(f"{name} is not positive definite (min eigenvalue {np.min(w):.3e})")


def sqrt_metric(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(h^{1/2}, h^{-1/2})`` of a Hermitian positive definite field."""
    w, v = kernels.eigh(hermitian_part(h))
    if np.min(w) <= 0:
        raise NotHermitianError("metric is not positive definite")
    vh = dagger(v)
    sw = np.sqrt(w)
    return mm(v * sw[..., None, :], vh), mm(v / sw[..., None, :], vh)


def h_adjoint(a: np.ndarray, h: np.ndarray, h_inv: np.ndarray | None = None) -> np.ndarray:
    """Adjoint ``h a^H h^-1`` with respect to the metric ``h``."""
    if h_inv is None:
        h_inv = inv(h)
    return mm(h, dagger(a), h_inv)


def symmetric_frame(a: np.ndarray, h: np.ndarray | None = None, roots=None) -> np.ndarray:
    """``h^{-1/2} a h^{1/2}``; Hermitian iff ``a`` is ``h``-Hermitian."""
    if h is None and roots is None:
        return a
    s, si = roots if roots is not None else sqrt_metric(h)
    return mm(si, a, s)


def from_symmetric_frame(b: np.ndarray, h: np.ndarray | None = None, roots=None) -> np.ndarray:
    if h is None and roots is None:
        return b
    s, si = roots if roots is not None else sqrt_metric(h)
    return mm(s, b, si)


def h_hermitian_part(a: np.ndarray, h: np.ndarray | None = None, roots=None) -> np.ndarray:
    """``(a + a*) / 2`` with ``a*`` the ``h``-adjoint."""
    if roots is None and h is not None:
        roots = sqrt_metric(h)
    return from_symmetric_frame(hermitian_part(symmetric_frame(a, None, roots)), None, roots)


def h_hermitian_defect(a: np.ndarray, h: np.ndarray | None = None, roots=None) -> float:
    """Sup of the anti-Hermitian part of ``a`` in the ``h``-symmetric frame."""
    b = symmetric_frame(a, h, roots)
    return float(np.max(np.abs(b - dagger(b)))) / 2 if b.size else 0.0


def _sym_checked(a, h, roots, tol):
    b = symmetric_frame(a, h, roots)
    d = hermitian_defect(b)
    if d > tol:
        raise NotHermitianError(f"endomorphism is not Hermitian for the given metric (defect {d:.2e})")
    return hermitian_part(b)


def herm_eig_bounds(a: np.ndarray, h: np.ndarray | None = None, tol: float = 1e-8,
                    roots=None) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise smallest and largest eigenvalue of an ``h``-Hermitian field."""
    w, _ = kernels.eigh(_sym_checked(a, h, roots, tol))
    return w[..., 0], w[..., -1]


def herm_eigvals(a: np.ndarray, h: np.ndarray | None = None, tol: float = 1e-8, roots=None) -> np.ndarray:
    w, _ = kernels.eigh(_sym_checked(a, h, roots, tol))
    return w


def herm_function(a: np.ndarray, fn, h: np.ndarray | None = None, tol: float = 1e-8,
                  roots=None) -> np.ndarray:
    """Apply ``fn`` spectrally to an ``h``-Hermitian endomorphism field."""
    if roots is None and h is not None:
        roots = sqrt_metric(h)
    b = _sym_checked(a, None, roots, tol)
    return from_symmetric_frame(kernels.herm_apply(b, fn), None, roots)


def matrix_exp(a: np.ndarray, h: np.ndarray | None = None, tol: float = 1e-8, roots=None) -> np.ndarray:
    """Exponential of an ``h``-Hermitian field (result is positive, ``h``-Hermitian)."""
    return herm_function(a, np.exp, h, tol, roots)


def matrix_log(a: np.ndarray, h: np.ndarray | None = None, tol: float = 1e-8, roots=None) -> np.ndarray:
    """Logarithm of a positive ``h``-Hermitian field."""
    lo, _ = herm_eig_bounds(a, h, tol, roots)
    if np.min(lo) <= 0:
        raise NotHermitianError(f"matrix_log needs a positive field (min eigenvalue {np.min(lo):.3e})")
    return herm_function(a, np.log, h, tol, roots)


def operator_norm(a: np.ndarray, h: np.ndarray | None = None, roots=None) -> np.ndarray:
    """Pointwise operator norm of ``a`` on ``(E, h)``."""
    b = symmetric_frame(a, h, roots)
    w, _ = kernels.eigh(mm(dagger(b), b))
    return np.sqrt(np.maximum(w[..., -1], 0.0))


def sup_norm(a: np.ndarray, h: np.ndarray | None = None, roots=None) -> float:
    """Maximum over the grid of the pointwise operator norm."""
    return float(np.max(operator_norm(a, h, roots)))


def inner(a: np.ndarray, b: np.ndarray, h: np.ndarray | None = None,
          h_inv: np.ndarray | None = None) -> np.ndarray:
    """Pointwise ``<a, b>_h = tr(a h b^H h^-1)`` (Frobenius when ``h`` is None)."""
    if h is None:
        return np.einsum("...ij,...ij->...", a, np.conj(b))
    if h_inv is None:
        h_inv = inv(h)
    return np.einsum("...ii->...", mm(a, h, dagger(b), h_inv))


def trace(a: np.ndarray) -> np.ndarray:
    return np.einsum("...ii->...", a)
