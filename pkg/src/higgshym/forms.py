"""Differential forms of low degree with scalar or matrix coefficients.

A :class:`Form` stores its coefficients in the basis ``dz^i`` / ``dzbar^j``
built from complex coordinates:

======  ======================  ====================================
key     shape                   form
======  ======================  ====================================
``z``     ``(n, *grid, ...)``     ``sum_i z[i] dz^i``
``zb``    ``(n, *grid, ...)``     ``sum_j zb[j] dzbar^j``
``zzb``   ``(n, n, *grid, ...)``  ``sum_ij zzb[i, j] dz^i ^ dzbar^j``
``zz``    ``(n, n, *grid, ...)``  ``sum_{i<k} zz[i, k] dz^i ^ dz^k``
``zbzb``  ``(n, n, *grid, ...)``  ``sum_{j<l} zbzb[j, l] dzbar^j ^ dzbar^l``
======  ======================  ====================================

``zz`` and ``zbzb`` are stored as full antisymmetric arrays.  Degree-zero
objects are bare arrays.  Products use ``@`` for matrix coefficients and
``*`` for scalars; the sign rules of the exterior algebra are applied to the
basis one-forms, never to the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from . import kernels
from .grid import GridSpec, gradients

KEYS_1 = ("z", "zb")
KEYS_2 = ("zz", "zzb", "zbzb")


@dataclass
class Form:
    comps: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        if not self.comps:
            return -1
        degs = {1 if k in KEYS_1 else 2 for k in self.comps}
        if len(degs) != 1:
            raise ValueError("mixed-degree form")
        return degs.pop()

    def get(self, key):
        return self.comps.get(key)

    def __add__(self, other: "Form") -> "Form":
        out = dict(self.comps)
        for k, v in other.comps.items():
            out[k] = out[k] + v if k in out else v
        return Form(out)

    def __neg__(self) -> "Form":
        return Form({k: -v for k, v in self.comps.items()})

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, c) -> "Form":
        return Form({k: c * v for k, v in self.comps.items()})

    def map(self, fn) -> "Form":
        """Apply ``fn`` to every coefficient array."""
        return Form({k: fn(v) for k, v in self.comps.items()})


def _mul(a, b, matrix: bool):
    return kernels.matmul(a, b) if matrix else a * b


def _deg(p) -> int:
    return 0 if isinstance(p, np.ndarray) else p.degree


def wedge(p, q, matrix: bool = True):
    """Product ``p . q`` of forms of total degree at most 2."""
    dp, dq = _deg(p), _deg(q)
    if dp == 0 and dq == 0:
        return _mul(p, q, matrix)
    if dp == 0:
        return Form({k: _mul(p[None, ...] if k in KEYS_1 else p[None, None, ...], v, matrix)
                     for k, v in q.comps.items()})
    if dq == 0:
        return Form({k: _mul(v, q[None, ...] if k in KEYS_1 else q[None, None, ...], matrix)
                     for k, v in p.comps.items()})
    if dp != 1 or dq != 1:
        raise ValueError("wedge supports total degree <= 2")
    out = {}
    pz, pzb, qz, qzb = p.get("z"), p.get("zb"), q.get("z"), q.get("zb")
    n = next(iter(p.comps.values())).shape[0]
    if pz is not None and qz is not None:
        out["zz"] = _antisym(pz, qz, n, matrix)
    if pzb is not None and qzb is not None:
        out["zbzb"] = _antisym(pzb, qzb, n, matrix)
    if pz is not None and qzb is not None:
        # P_i dz^i ^ Q_j dzbar^j
        out["zzb"] = _outer(pz, qzb, n, matrix)
    if pzb is not None and qz is not None:
        # P_j dzbar^j ^ Q_i dz^i = -P_j Q_i dz^i ^ dzbar^j
        mixed = out.get("zzb")
        if mixed is None:
            mixed = out["zzb"] = _outer(qz, pzb, n, matrix, lambda x, y: -_mul(y, x, matrix))
        else:
            for i in range(n):
                for j in range(n):
                    mixed[i, j] -= _mul(pzb[j], qz[i], matrix)
    return Form(out)


def _outer(a, b, n, matrix, op=None):
    """``out[i, j] = a[i] b[j]`` (or ``op(a[i], b[j])``), filled in place."""
    op = op or (lambda x, y: _mul(x, y, matrix))
    out = None
    for i in range(n):
        for j in range(n):
            t = op(a[i], b[j])
            if out is None:
                out = np.empty((n, n) + t.shape, dtype=np.result_type(t, complex))
            out[i, j] = t
    return out


def _antisym(a, b, n, matrix):
    """``out[i, j] = a[i] b[j] - a[j] b[i]``."""
    out = None
    for i in range(n):
        for j in range(n):
            t = _mul(a[i], b[j], matrix) - _mul(a[j], b[i], matrix) if i != j else None
            if out is None:
                shape = _mul(a[0], b[0], matrix).shape if t is None else t.shape
                out = np.zeros((n, n) + shape, dtype=complex)
            if t is not None:
                out[i, j] = t
    return out


def _swap(t):
    return np.swapaxes(t, 0, 1)


def _grad_stack(arr, grid, which):
    """Gradients of each slice ``arr[i]``: result ``[i, k]`` = d_k arr[i]."""
    out = np.empty((arr.shape[0], grid.n) + arr.shape[1:], dtype=complex)
    for i in range(arr.shape[0]):
        out[i] = gradients(arr[i], grid, which)
    return out


def _minus_transpose(g):
    """``out[a, b] = g[b, a] - g[a, b]`` without a second full temporary."""
    out = np.empty_like(g)
    for a in range(g.shape[0]):
        for b in range(g.shape[1]):
            np.subtract(g[b, a], g[a, b], out=out[a, b])
    return out


def dbar(p, grid: GridSpec):
    """Antiholomorphic exterior derivative of a form of degree <= 1."""
    if _deg(p) == 0:
        return Form({"zb": gradients(p, grid, "zbar")})
    out = {}
    if p.get("z") is not None:
        g = _grad_stack(p.get("z"), grid, "zbar")  # g[i, j] = dbar_j P_i
        out["zzb"] = -g
    if p.get("zb") is not None:
        g = _grad_stack(p.get("zb"), grid, "zbar")  # g[l, j] = dbar_j P_l
        out["zbzb"] = _minus_transpose(g)
    return Form(out)


def d(p, grid: GridSpec):
    """Holomorphic exterior derivative of a form of degree <= 1."""
    if _deg(p) == 0:
        return Form({"z": gradients(p, grid, "z")})
    out = {}
    if p.get("z") is not None:
        g = _grad_stack(p.get("z"), grid, "z")  # g[k, i] = d_i P_k
        out["zz"] = _minus_transpose(g)
    if p.get("zb") is not None:
        g = _grad_stack(p.get("zb"), grid, "z")  # g[j, i] = d_i P_j
        out["zzb"] = _swap(g)
    return Form(out)


def constant_one_form(coeffs, grid_ndim: int, key: str) -> Form:
    """Grid-constant one-form from an ``(n, ...)`` coefficient array."""
    c = np.asarray(coeffs)
    return Form({key: c.reshape(c.shape[:1] + (1,) * grid_ndim + c.shape[1:])})


# --- top-degree products on complex surfaces -----------------------------

_CANON = ("z0", "zb0", "z1", "zb1")


def _perm_sign(seq) -> int:
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    idx = [_CANON.index(s) for s in seq]
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign


def _two_form_terms(p: Form):
    """Yield ``(basis pair, coefficient)`` for a 2-form on a surface."""
    if p.get("zz") is not None:
        yield ("z0", "z1"), p.get("zz")[0, 1]
    if p.get("zbzb") is not None:
        yield ("zb0", "zb1"), p.get("zbzb")[0, 1]
    if p.get("zzb") is not None:
        for i in range(2):
            for j in range(2):
                yield (f"z{i}", f"zb{j}"), p.get("zzb")[i, j]


def top_coefficient(p: Form, q: Form, matrix: bool = True):
    """Coefficient of ``dz^1 ^ dzbar^1 ^ dz^2 ^ dzbar^2`` in ``p . q`` (n = 2)."""
    acc = None
    for bp, cp in _two_form_terms(p):
        for bq, cq in _two_form_terms(q):
            s = _perm_sign(bp + bq)
            if s:
                t = s * _mul(cp, cq, matrix)
                acc = t if acc is None else acc + t
    return acc


# integral of dz^1 ^ dzbar^1 ^ dz^2 ^ dzbar^2 against dx1 dy1 dx2 dy2
TOP_BASIS_DENSITY = -4.0

