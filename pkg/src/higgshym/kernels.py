"""Batched small-matrix kernels.

Every field in the package stores an ``r x r`` complex matrix per grid point,
so the hot loops are pointwise products, inverses and Hermitian
eigendecompositions over arrays shaped ``(..., r, r)``.  Two backends are
provided:

* ``numba``: ``@njit`` loops (complex Jacobi sweeps, Gauss-Jordan elimination),
* ``numpy``: ``np.matmul`` / ``np.linalg.eigh`` / ``np.linalg.inv``.

The backend is chosen once at import time.  Set ``HIGGSHYM_NO_NUMBA=1`` to
force the numpy path (also used automatically when numba cannot be imported).
"""

from __future__ import annotations

import os
from typing import Callable, NamedTuple

import numpy as np

try:
    import numba
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("HIGGSHYM_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")
BACKEND = "numba" if (_HAVE_NUMBA and not _DISABLED) else "numpy"


# ---------------------------------------------------------------------------
# numpy backend


def _eigh_numpy(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(a)


def _inv_numpy(a: np.ndarray) -> np.ndarray:
    return np.linalg.inv(a)


def _matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.matmul(a, b)


# ---------------------------------------------------------------------------
# numba backend

if _HAVE_NUMBA:

    @njit(cache=True)
    def _jacobi_one(a, w, v):
        r = a.shape[0]
        for i in range(r):
            for j in range(r):
                v[i, j] = 1.0 if i == j else 0.0
        scale = 0.0
        for i in range(r):
            for j in range(r):
                scale += abs(a[i, j]) ** 2
        tol = 1e-32 * scale + 1e-300
        for _sweep in range(60):
            off = 0.0
            for p in range(r):
                for q in range(p + 1, r):
                    off += abs(a[p, q]) ** 2
            if off <= tol:
                break
            for p in range(r):
                for q in range(p + 1, r):
                    apq = a[p, q]
                    mag = abs(apq)
                    if mag == 0.0:
                        continue
                    phase = apq / mag
                    tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    jpq = s * phase
                    jqp = -s * np.conj(phase)
                    # a <- a J, columns p and q
                    for k in range(r):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = akp * c + akq * jqp
                        a[k, q] = akp * jpq + akq * c
                    # a <- J^H a, rows p and q
                    for k in range(r):
                        apk = a[p, k]
                        aqk = a[q, k]
                        a[p, k] = c * apk + np.conj(jqp) * aqk
                        a[q, k] = np.conj(jpq) * apk + c * aqk
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(r):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = vkp * c + vkq * jqp
                        v[k, q] = vkp * jpq + vkq * c
        for i in range(r):
            w[i] = a[i, i].real
        # insertion sort, ascending
        for i in range(1, r):
            j = i
            while j > 0 and w[j - 1] > w[j]:
                tmp = w[j - 1]
                w[j - 1] = w[j]
                w[j] = tmp
                for k in range(r):
                    tv = v[k, j - 1]
                    v[k, j - 1] = v[k, j]
                    v[k, j] = tv
                j -= 1

    @njit(cache=True)
    def _eigh_batch(a):
        m, r, _ = a.shape
        w = np.empty((m, r))
        v = np.empty((m, r, r), dtype=np.complex128)
        work = np.empty((r, r), dtype=np.complex128)
        for b in range(m):
            for i in range(r):
                for j in range(r):
                    # symmetrize so round-off in the input cannot bias the sweep
                    work[i, j] = 0.5 * (a[b, i, j] + np.conj(a[b, j, i]))
            _jacobi_one(work, w[b], v[b])
        return w, v

    @njit(cache=True)
    def _inv_batch(a):
        m, r, _ = a.shape
        out = np.empty((m, r, r), dtype=np.complex128)
        work = np.empty((r, 2 * r), dtype=np.complex128)
        singular = False
        for b in range(m):
            for i in range(r):
                for j in range(r):
                    work[i, j] = a[b, i, j]
                    work[i, r + j] = 1.0 if i == j else 0.0
            for col in range(r):
                piv = col
                best = abs(work[col, col])
                for i in range(col + 1, r):
                    if abs(work[i, col]) > best:
                        best = abs(work[i, col])
                        piv = i
                if best == 0.0:
                    singular = True
                    break
                if piv != col:
                    for j in range(2 * r):
                        tmp = work[col, j]
                        work[col, j] = work[piv, j]
                        work[piv, j] = tmp
                d = 1.0 / work[col, col]
                for j in range(2 * r):
                    work[col, j] *= d
                for i in range(r):
                    if i != col:
                        f = work[i, col]
                        if f != 0.0:
                            for j in range(2 * r):
                                work[i, j] -= f * work[col, j]
            for i in range(r):
                for j in range(r):
                    out[b, i, j] = work[i, r + j]
        return out, singular

    @njit(cache=True)
    def _matmul_batch(a, b, out):
        # operands are repeated cyclically, which is numpy broadcasting over leading axes
        m, r, s = out.shape
        ma, mb, q = a.shape[0], b.shape[0], a.shape[2]
        for p in range(m):
            pa = p % ma
            pb = p % mb
            for i in range(r):
                for k in range(s):
                    acc = 0j
                    for j in range(q):
                        acc += a[pa, i, j] * b[pb, j, k]
                    out[p, i, k] = acc

    def _matmul_numba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a)
        b = np.asarray(b)
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            return np.matmul(a, b)
        try:
            batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError:
            return np.matmul(a, b)    # let numpy raise
        for sh in (a.shape[:-2], b.shape[:-2]):
            core = sh[next((k for k, d in enumerate(sh) if d != 1), len(sh)):]
            if core != batch[len(batch) - len(core):]:
                return np.matmul(a, b)    # general broadcasting
        if min(a.size, b.size) == 0:
            return np.matmul(a, b)
        fa = np.ascontiguousarray(a, dtype=np.complex128).reshape(-1, a.shape[-2], a.shape[-1])
        fb = np.ascontiguousarray(b, dtype=np.complex128).reshape(-1, b.shape[-2], b.shape[-1])
        out = np.empty(batch + (a.shape[-2], b.shape[-1]), dtype=np.complex128)
        _matmul_batch(fa, fb, out.reshape(-1, a.shape[-2], b.shape[-1]))
        return out

    def _eigh_numba(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        shape = a.shape
        flat = np.ascontiguousarray(a, dtype=np.complex128).reshape(-1, shape[-1], shape[-1])
        w, v = _eigh_batch(flat)
        return w.reshape(shape[:-1]), v.reshape(shape)

    def _inv_numba(a: np.ndarray) -> np.ndarray:
        shape = a.shape
        flat = np.ascontiguousarray(a, dtype=np.complex128).reshape(-1, shape[-1], shape[-1])
        out, singular = _inv_batch(flat)
        if singular:
            raise np.linalg.LinAlgError("Singular matrix")
        return out.reshape(shape)


class Backend(NamedTuple):
    eigh: Callable
    inv: Callable
    matmul: Callable


IMPLEMENTATIONS = {"numpy": Backend(_eigh_numpy, _inv_numpy, _matmul_numpy)}
if _HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = Backend(_eigh_numba, _inv_numba, _matmul_numba)


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a stack of Hermitian matrices.

    Returns ascending eigenvalues ``w`` (shape ``(..., r)``) and unitary
    eigenvectors ``v`` with ``a = v @ diag(w) @ v^H``.
    """
    return IMPLEMENTATIONS[BACKEND].eigh(a)


def inv(a: np.ndarray) -> np.ndarray:
    """Inverse of a stack of square complex matrices."""
    return IMPLEMENTATIONS[BACKEND].inv(a)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise matrix product with numpy broadcasting semantics."""
    return IMPLEMENTATIONS[BACKEND].matmul(a, b)


def herm_apply(a: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a stack of Hermitian matrices spectrally."""
    w, v = eigh(a)
    return matmul(v * fn(w)[..., None, :], np.conj(np.swapaxes(v, -1, -2)))
