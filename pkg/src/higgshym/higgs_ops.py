"""Bundle-level operators for a Higgs bundle with a global trivialization.

Conventions (row vectors, see :mod:`higgshym.fields`):

* Chern connection form ``omega_h = d h . h^-1`` (a (1,0)-form), so that
  ``nabla s = ds + s omega``.
* Chern curvature ``R_{i jbar} = -dbar_j(omega_i)`` as the coefficient of
  ``dz^i ^ dzbar^j``; for a line bundle ``h = exp(-phi)`` this gives
  ``Lambda(sqrt(-1) R) = Delta_g phi``.
* ``theta`` is a constant ``(n, r, r)`` array, ``theta[i]`` the coefficient
  of ``dz^i``; its adjoint ``theta*`` is the (0,1)-form with coefficients
  ``h theta_i^H h^-1``.
* A degree-``p`` endomorphism-valued form ``P`` is acted on by
  ``theta(P) = (-1)^p P.theta - theta.P`` and similarly for ``theta*`` and
  for the connection form.

An optional ``twist`` (``n x n`` matrix, see
:func:`higgshym.geometry.twist_curvature`) adds the curvature of a line
bundle factor ``twist[i, j] Id`` to every Chern curvature.
"""

from __future__ import annotations

import numpy as np

from . import fields as F
from .errors import GridMismatchError, HypothesisError
from .forms import Form, d, dbar, wedge
from .geometry import BaseMetric
from .grid import GridSpec, gradients

HOLOMORPHIC_TOL = 1e-8
INTEGRABLE_TOL = 1e-12


class HiggsField:
    """Constant Higgs field ``theta = sum theta_i dz^i`` on a trivial bundle.

    Parameters
    ----------
    theta : array_like
        ``(n, r, r)`` constant matrices.
    require_integrable : bool
        Raise ``HypothesisError("θ∧θ=0")`` when the components do not commute.
    """

    def __init__(self, theta, require_integrable: bool = False):
        theta = np.asarray(theta, dtype=complex)
        if theta.ndim != 3 or theta.shape[1] != theta.shape[2]:
            raise ValueError(f"theta must have shape (n, r, r), got {theta.shape}")
        self.theta = theta
        self.integrability_defect = _commutator_defect(theta)
        if require_integrable:
            self.require_integrable()

    @classmethod
    def zero(cls, n: int, r: int) -> "HiggsField":
        return cls(np.zeros((n, r, r), dtype=complex))

    @classmethod
    def from_field(cls, grid: GridSpec, values, require_integrable: bool = False) -> "HiggsField":
        """Validate grid-valued components ``(n, *grid, r, r)`` and keep the constants.

        Holomorphicity is checked first; on a torus with trivial bundle it
        forces every component to be constant.
        """
        values = np.asarray(values, dtype=complex)
        if values.shape[0] != grid.n or values.shape[1:1 + grid.ndim] != grid.shape:
            raise GridMismatchError(f"Higgs field shape {values.shape} does not fit the grid")
        scale = max(1.0, float(np.max(np.abs(values))))
        for i in range(grid.n):
            db = gradients(values[i], grid, "zbar")
            if np.max(np.abs(db)) > HOLOMORPHIC_TOL * scale:
                raise HypothesisError("∂̄θ=0", f"component {i} is not holomorphic")
        flat = values.reshape((grid.n, -1) + values.shape[-2:])
        if np.max(np.abs(flat - flat[:, :1])) > HOLOMORPHIC_TOL * scale:
            raise HypothesisError("∂̄θ=0", "non-constant Higgs field on a trivial bundle")
        return cls(flat[:, 0], require_integrable)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def r(self) -> int:
        return self.theta.shape[1]

    @property
    def is_integrable(self) -> bool:
        return self.integrability_defect <= INTEGRABLE_TOL

    def require_integrable(self) -> None:
        if not self.is_integrable:
            raise HypothesisError("θ∧θ=0", f"max |[θ_i, θ_j]| = {self.integrability_defect:.3e}")

    def grid_array(self, ndim: int) -> np.ndarray:
        """``theta`` reshaped to broadcast against ``(n, *grid, r, r)``."""
        return self.theta.reshape((self.n,) + (1,) * ndim + (self.r, self.r))

    def form(self, ndim: int) -> Form:
        return Form({"z": self.grid_array(ndim)})


def _commutator_defect(theta: np.ndarray) -> float:
    worst = 0.0
    for i in range(theta.shape[0]):
        for j in range(i + 1, theta.shape[0]):
            c = theta[i] @ theta[j] - theta[j] @ theta[i]
            worst = max(worst, float(np.max(np.abs(c))))
    return worst


def _as_higgs(theta) -> HiggsField:
    return theta if isinstance(theta, HiggsField) else HiggsField(theta)


def _check_rank(theta: HiggsField, h: np.ndarray) -> None:
    if h.shape[-1] != theta.r:
        raise GridMismatchError(f"rank mismatch: theta has r={theta.r}, metric has r={h.shape[-1]}")


# ---------------------------------------------------------------------------
# adjoints and connection


def higgs_adjoint(theta, h: np.ndarray, h_inv: np.ndarray | None = None) -> np.ndarray:
    """Components ``theta*_j = h theta_j^H h^-1``, shape ``(n, *grid, r, r)``."""
    theta = _as_higgs(theta)
    _check_rank(theta, h)
    if h_inv is None:
        h_inv = F.inv(h)
    out = np.empty((theta.n,) + h.shape, dtype=complex)
    for j in range(theta.n):
        out[j] = F.mm(h, F.dagger(theta.theta[j]), h_inv)
    return out


def higgs_adjoint_form(theta, h: np.ndarray, h_inv: np.ndarray | None = None) -> Form:
    return Form({"zb": higgs_adjoint(theta, h, h_inv)})


def adjoint_transform_check(theta, h0: np.ndarray, h: np.ndarray) -> float:
    """Relative sup-norm of ``theta*_h - H theta*_{h0} H^-1`` with ``H = h h0^-1``."""
    theta = _as_higgs(theta)
    H = F.mm(h, F.inv(h0))
    lhs = higgs_adjoint(theta, h)
    rhs = F.mm(H[None], higgs_adjoint(theta, h0), F.inv(H)[None])
    scale = max(1.0, float(np.max(np.abs(lhs))))
    return float(np.max(np.abs(lhs - rhs))) / scale


def chern_connection(h: np.ndarray, grid: GridSpec, h_inv: np.ndarray | None = None) -> np.ndarray:
    """``omega_i = d_i h . h^-1``, shape ``(n, *grid, r, r)``."""
    grid.check(h, "metric")
    if h_inv is None:
        h_inv = F.inv(h)
    return F.mm(gradients(h, grid, "z"), h_inv)


def chern_curvature(h: np.ndarray, grid: GridSpec, twist=None, h_inv: np.ndarray | None = None) -> np.ndarray:
    """(1,1) coefficients ``R[i, j]`` of the Chern curvature, ``(n, n, *grid, r, r)``."""
    R = dbar(Form({"z": chern_connection(h, grid, h_inv)}), grid).get("zzb")
    if twist is not None:
        R = R + _twist_term(twist, grid, h.shape[-1])
    return R


def _twist_term(twist, grid: GridSpec, r: int) -> np.ndarray:
    t = np.asarray(twist, dtype=complex)
    return t.reshape(t.shape + (1,) * grid.ndim + (1, 1)) * np.eye(r)


def higgs_commutator_term(theta, theta_star: np.ndarray, ndim: int) -> np.ndarray:
    """(1,1) coefficients of ``theta.theta* + theta*.theta``."""
    theta = _as_higgs(theta)
    return wedge(theta.form(ndim), Form({"zb": theta_star})).get("zzb") + \
        wedge(Form({"zb": theta_star}), theta.form(ndim)).get("zzb")


def hym_higgs_tensor(h: np.ndarray, theta, g: BaseMetric, twist=None) -> np.ndarray:
    """``S^h = Lambda sqrt(-1) (R^h - (theta.theta* + theta*.theta))``."""
    theta = _as_higgs(theta)
    grid = g.grid
    h_inv = F.inv(h)
    R = chern_curvature(h, grid, twist, h_inv)
    if np.any(theta.theta):
        R = R - higgs_commutator_term(theta, higgs_adjoint(theta, h, h_inv), grid.ndim)
    return g.lambda_contract(R)


# ---------------------------------------------------------------------------
# D' and D'' on endomorphism-valued forms


def _degree(P) -> int:
    if isinstance(P, np.ndarray):
        return 0
    deg = P.degree
    if deg != 1:
        raise ValueError(f"unsupported form degree {deg}; only p <= 1")
    return 1


def _act(P, A: Form, p: int):
    """``(-1)^p P.A - A.P`` for a one-form ``A``."""
    left = wedge(P, A)
    right = wedge(A, P)
    return (left if p % 2 == 0 else -left) - right


def dsecond(P, theta, grid: GridSpec):
    """``D'' P = dbar P + (-1)^p P.theta - theta.P``."""
    theta = _as_higgs(theta)
    p = _degree(P)
    out = dbar(P, grid)
    if np.any(theta.theta):
        out = out + _act(P, theta.form(grid.ndim), p)
    return out


def chern_dprime(P, omega: np.ndarray, grid: GridSpec):
    """``d^h P = dP + (-1)^p P.omega - omega.P`` with the connection form ``omega``."""
    p = _degree(P)
    return d(P, grid) + _act(P, Form({"z": omega}), p)


def dprime(P, h0: np.ndarray, theta, grid: GridSpec, h0_inv: np.ndarray | None = None,
           omega0: np.ndarray | None = None, theta_star: np.ndarray | None = None):
    """``D'^{h0} P = d^{h0} P + (-1)^p P.theta* - theta*.P``."""
    theta = _as_higgs(theta)
    p = _degree(P)
    if h0_inv is None:
        h0_inv = F.inv(h0)
    if omega0 is None:
        omega0 = chern_connection(h0, grid, h0_inv)
    out = chern_dprime(P, omega0, grid)
    if np.any(theta.theta):
        if theta_star is None:
            theta_star = higgs_adjoint(theta, h0, h0_inv)
        out = out + _act(P, Form({"zb": theta_star}), p)
    return out


def curvature_difference(H: np.ndarray, h0: np.ndarray, theta, g: BaseMetric) -> np.ndarray:
    """``Lambda sqrt(-1) D''(D'^{h0} H . H^-1)``; equals ``S^{H h0} - S^{h0}``."""
    grid = g.grid
    Q = wedge(dprime(H, h0, theta, grid), F.inv(H))
    return g.lambda_contract(dsecond(Q, theta, grid).get("zzb"))


def f_theta(H: np.ndarray, h0: np.ndarray, theta, g: BaseMetric, path: str = "direct") -> np.ndarray:
    """``F_theta(H) = Lambda sqrt(-1) theta(theta*_{h0}(H) . H^-1)``.

    ``path="direct"`` composes the form operators; ``path="expanded"`` uses
    the multiplied-out four-term formula for ``F_theta(H) . H`` and divides
    by ``H`` on the right.
    """
    theta = _as_higgs(theta)
    grid = g.grid
    H_inv = F.inv(H)
    ts = higgs_adjoint(theta, h0)
    if path == "direct":
        tsf = Form({"zb": ts})
        B = wedge(_act(H, tsf, 0), H_inv)
        return g.lambda_contract(_act(B, theta.form(grid.ndim), 1).get("zzb"))
    if path == "expanded":
        n = theta.n
        th = [theta.theta[i] for i in range(n)]
        coef = np.empty((n, n) + H.shape, dtype=complex)
        for i in range(n):
            for j in range(n):
                coef[i, j] = (F.mm(H, ts[j], H_inv, th[i], H) - F.mm(th[i], H, ts[j])
                              - F.mm(ts[j], th[i], H) + F.mm(th[i], ts[j], H))
        return F.mm(g.lambda_contract(coef), H_inv)
    raise ValueError(f"unknown path {path!r}")


# ---------------------------------------------------------------------------
# full curvature of the Higgs connection


def full_higgs_curvature(h: np.ndarray, theta, g: BaseMetric, twist=None) -> Form:
    """All bidegree parts of the curvature of ``D = nabla^h + theta + theta*``.

    Computed from the total connection form ``A = omega + theta + theta*`` as
    ``dA - A.A`` (row convention).  Requires an integrable ``theta``.
    """
    theta = _as_higgs(theta)
    theta.require_integrable()
    grid = g.grid
    h_inv = F.inv(h)
    A = Form({"z": chern_connection(h, grid, h_inv) + theta.grid_array(grid.ndim),
              "zb": higgs_adjoint(theta, h, h_inv)})
    # accumulate in place: on surfaces each part is n^2 full matrix fields
    R = d(A, grid)
    Rb = dbar(A, grid)
    R.comps["zzb"] = R.comps["zzb"] + Rb.comps.pop("zzb")
    R.comps["zbzb"] = Rb.comps.pop("zbzb")
    del Rb
    Az, Azb = Form({"z": A.get("z")}), Form({"zb": A.get("zb")})
    R.comps["zz"] -= wedge(Az, Az).get("zz")
    R.comps["zbzb"] -= wedge(Azb, Azb).get("zbzb")
    R.comps["zzb"] -= wedge(Az, Azb).get("zzb")
    R.comps["zzb"] -= wedge(Azb, Az).get("zzb")
    if twist is not None:
        R.comps["zzb"] += _twist_term(twist, grid, h.shape[-1])
    return R


def curvature_adjoint_residual(R: Form, h: np.ndarray) -> float:
    """Relative defect of ``R^{(2,0)} = (R^{(0,2)})*`` (coefficient of dz1^dz2)."""
    n = R.get("zz").shape[0]
    if n < 2:
        return 0.0
    a = R.get("zz")[0, 1]
    b = F.h_adjoint(R.get("zbzb")[0, 1], h)
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - b))) / scale


# ---------------------------------------------------------------------------
# Bochner-Kodaira pairing


def _row_apply(s: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("...a,...ab->...b", s, A)


def _pair(u: np.ndarray, v: np.ndarray, h0: np.ndarray) -> np.ndarray:
    return np.einsum("...a,...ab,...b->...", u, h0, np.conj(v))


def bochner_kodaira_pairings(s: np.ndarray, t10: np.ndarray, t01: np.ndarray, h0: np.ndarray,
                             theta, g: BaseMetric) -> dict:
    """The three global pairings of the Bochner-Kodaira identity.

    For a section ``s`` (shape ``(*grid, r)``, row vectors) and an E-valued
    one-form ``t = t10_i dz^i + t01_j dzbar^j``:

    ``lhs = (s, sqrt(-1) Lambda D'' t)``,
    ``dprime = (D'^{h0} s, t)`` and ``torsion = (tau s, t)``.
    """
    theta = _as_higgs(theta)
    grid = g.grid
    n = grid.n
    Gi = g.Ginv
    vol = g.volume_density()
    dbt = np.stack([gradients(t10[i], grid, "zbar") for i in range(n)])  # [i, j] = dbar_j t_i
    Ldt = 0
    for i in range(n):
        for j in range(n):
            term = -dbt[i, j] + _row_apply(t01[j], theta.theta[i])
            Ldt = Ldt + Gi[..., j, i][..., None] * term
    lhs = np.sum(_pair(s, Ldt, h0) * vol)
    omega0 = chern_connection(h0, grid)
    ds = gradients(s, grid, "z")
    d10 = [ds[i] + _row_apply(s, omega0[i]) for i in range(n)]
    ts = higgs_adjoint(theta, h0)
    d01 = [_row_apply(s, ts[j]) for j in range(n)]
    tau = g.torsion_one_form()
    dp, tor = 0, 0
    for i in range(n):
        for j in range(n):
            gij = Gi[..., i, j]
            dp = dp + np.sum(gij * _pair(d10[j], t10[i], h0) * vol)
            dp = dp + np.sum(gij * _pair(d01[i], t01[j], h0) * vol)
            tor = tor + np.sum(gij * _pair(tau[j][..., None] * s, t10[i], h0) * vol)
    w = grid.volume / np.prod(grid.shape)
    return {"lhs": complex(lhs * w), "dprime": complex(dp * w), "torsion": complex(tor * w)}


def bochner_kodaira_residual(s: np.ndarray, t10: np.ndarray, t01: np.ndarray, h0: np.ndarray,
                             theta, g: BaseMetric, include_torsion: bool = True) -> float:
    """Relative imbalance ``|lhs - dprime - torsion| / max(|terms|)``."""
    p = bochner_kodaira_pairings(s, t10, t01, h0, theta, g)
    rhs = p["dprime"] + (p["torsion"] if include_torsion else 0.0)
    scale = max(abs(p["lhs"]), abs(p["dprime"]), abs(p["torsion"]), 1e-300)
    return abs(p["lhs"] - rhs) / scale
