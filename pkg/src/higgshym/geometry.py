"""Hermitian base metrics on a flat complex torus.

The metric is stored as a field of ``n x n`` Hermitian matrices
``G[i, j] = g_{i jbar}``; the fundamental form is
``omega = sqrt(-1) sum g_{i jbar} dz^i ^ dzbar^j``.  With ``Ginv = G^-1`` the
inverse metric is ``g^{i jbar} = Ginv[j, i]``.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatchError, NotHermitianError
from .forms import _perm_sign
from .grid import GridSpec, gradients, invert_laplacian

CLASSIFY_TOL = 1e-8


class BaseMetric:
    """Hermitian metric ``g`` on the base torus.

    Parameters
    ----------
    grid : GridSpec
    G : ndarray
        Either a constant ``(n, n)`` matrix or a field ``(*grid, n, n)``.
    """

    def __init__(self, grid: GridSpec, G):
        G = np.asarray(G, dtype=complex)
        n = grid.n
        if G.shape == (n, n):
            self.constant = True
            G = np.broadcast_to(G, grid.shape + (n, n))
        elif G.shape == grid.shape + (n, n):
            self.constant = bool(np.allclose(G, G.reshape(-1, n, n)[0], rtol=0, atol=1e-14))
        else:
            raise GridMismatchError(f"metric shape {G.shape} does not fit grid {grid.shape} with n={n}")
        if np.max(np.abs(G - np.conj(np.swapaxes(G, -1, -2)))) > 1e-12 * max(1.0, np.max(np.abs(G))):
            raise NotHermitianError("base metric is not Hermitian")
        w = np.linalg.eigvalsh(G.reshape(-1, n, n))
        if np.min(w) <= 0:
            raise NotHermitianError("base metric is not positive definite")
        self.grid = grid
        self.G = np.ascontiguousarray(G)
        self.Ginv = np.linalg.inv(self.G)
        self._classification = None

    # ---- constructors -----------------------------------------------------

    @classmethod
    def flat(cls, grid: GridSpec, G=None) -> "BaseMetric":
        return cls(grid, np.eye(grid.n) if G is None else G)

    @classmethod
    def conformal(cls, grid: GridSpec, u: np.ndarray, G0=None) -> "BaseMetric":
        """``g = exp(u) g0`` with ``u`` a real scalar field."""
        grid.check(u, "conformal factor")
        G0 = np.eye(grid.n) if G0 is None else np.asarray(G0, dtype=complex)
        return cls(grid, np.exp(np.real(u))[..., None, None] * G0)

    # ---- basic quantities ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def constant_matrix(self) -> np.ndarray:
        if not self.constant:
            raise ValueError("metric is not constant")
        return self.G.reshape(-1, self.n, self.n)[0]

    def volume_density(self) -> np.ndarray:
        """Density of ``omega^n / n!`` against ``dx1 dy1 ... dxn dyn``."""
        return np.real(np.linalg.det(self.G)) * 2.0 ** self.n

    def total_volume(self) -> float:
        return float(np.mean(self.volume_density()) * self.grid.volume)

    def lambda_contract(self, F: np.ndarray) -> np.ndarray:
        """Contraction ``sum g^{i jbar} F[i, j]`` of a (1,1) coefficient array.

        ``F`` has shape ``(n, n, *grid, ...)``; ``F[i, j]`` multiplies
        ``dz^i ^ dzbar^j``.  For a 2-form ``F`` this is ``Lambda(sqrt(-1) F)``.
        """
        n, nd = self.n, self.grid.ndim
        extra = F.ndim - 2 - nd
        out = 0
        for i in range(n):
            for j in range(n):
                gij = self.Ginv[..., j, i].reshape(self.grid.shape + (1,) * extra)
                out = out + gij * F[i, j]
        return out

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """``sum g^{i jbar} d_i dbar_j f`` for a scalar or matrix field."""
        dzb = gradients(f, self.grid, "zbar")
        ddb = np.stack([gradients(dzb[j], self.grid, "z") for j in range(self.n)])  # [j, i]
        return self.lambda_contract(np.swapaxes(ddb, 0, 1))

    def invert_laplacian(self, f: np.ndarray) -> np.ndarray:
        if not self.constant:
            raise ValueError("invert_laplacian needs a constant base metric")
        return invert_laplacian(f, self.grid, self.constant_matrix)

    # ---- torsion and classification ---------------------------------------

    def metric_gradients(self):
        """``(dG[k], dbarG[k])``: derivatives of ``G`` along ``z_k`` / ``zbar_k``."""
        return gradients(self.G, self.grid)

    def torsion(self) -> np.ndarray:
        """``Theta[k, i, j] = g^{k lbar} (d_i g_{j lbar} - d_j g_{i lbar})``."""
        n = self.n
        dG, _ = self.metric_gradients()
        theta = np.zeros((n, n, n) + self.grid.shape, dtype=complex)
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for l in range(n):
                        acc = acc + self.Ginv[..., l, k] * (dG[i][..., j, l] - dG[j][..., i, l])
                    theta[k, i, j] = acc
        return theta

    def torsion_one_form(self) -> np.ndarray:
        """``tau_k = sum_a Theta[a, k, a]``; the (1,0)-form appearing in the
        adjoint of ``Lambda dbar`` on a non-Kahler base."""
        th = self.torsion()
        return np.stack([sum(th[a, k, a] for a in range(self.n)) for k in range(self.n)])

    def kahler_defect(self) -> float:
        """``sup |d omega|`` measured through the (2,1) part ``d_i g_{j lbar} - d_j g_{i lbar}``."""
        if self.constant:
            return 0.0
        dG, _ = self.metric_gradients()
        n = self.n
        worst = 0.0
        for i in range(n):
            for j in range(n):
                worst = max(worst, float(np.max(np.abs(dG[i][..., j, :] - dG[j][..., i, :]))))
        return worst

    def gauduchon_defect(self) -> float:
        """``sup |d dbar omega^{n-1}|`` (identically zero for ``n = 1``)."""
        if self.n == 1 or self.constant:
            return 0.0
        # n = 2: coefficient of dz1 dzb1 dz2 dzb2 in sqrt(-1) d_k dbar_l g_{ijbar}
        _, dbG = self.metric_gradients()
        ddb = [[gradients(dbG[l], self.grid, "z")[k] for l in range(2)] for k in range(2)]
        acc = np.zeros(self.grid.shape, dtype=complex)
        for k in range(2):
            for l in range(2):
                for i in range(2):
                    for j in range(2):
                        s = _perm_sign((f"z{k}", f"zb{l}", f"z{i}", f"zb{j}"))
                        if s:
                            acc = acc + s * 1j * ddb[k][l][..., i, j]
        return float(np.max(np.abs(acc)))

    def classify(self, tol: float = CLASSIFY_TOL) -> str:
        """``"kahler"``, ``"gauduchon"`` or ``"hermitian"``.

        The defects are compared with ``tol`` times the size of ``G``.
        """
        scale = max(1.0, float(np.max(np.abs(self.G))))
        if self.kahler_defect() <= tol * scale:
            return "kahler"
        if self.gauduchon_defect() <= tol * scale:
            return "gauduchon"
        return "hermitian"


def twist_curvature(grid: GridSpec, degree: int) -> np.ndarray:
    """Constant curvature ``diag(t_i)`` of a degree-``degree`` line bundle factor.

    The weight ``exp(-sum t_i |z_i|^2)`` with ``t_i = pi d / (Lx_i Ly_i)``
    descends to a line bundle of first Chern class ``d`` on every coordinate
    factor.  Its curvature coefficient matrix is ``diag(t_i)``.
    """
    if int(degree) != degree:
        raise ValueError("twist degree must be an integer")
    return np.diag([np.pi * degree / grid.complex_area(i) for i in range(grid.n)]).astype(complex)
