"""Post-solve verification: comparison principle and Chern-Weil identities.

Top-degree integrals on complex surfaces use the basis
``dz^1 ^ dzbar^1 ^ dz^2 ^ dzbar^2``, which integrates to ``-4`` times the
coordinate measure.  ``omega^n`` has density ``n! 2^n det(G)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import fields as F
from . import higgs_ops as ho
from .errors import HypothesisError
from .forms import TOP_BASIS_DENSITY, Form, top_coefficient
from .geometry import BaseMetric
from .grid import integrate


# ---------------------------------------------------------------------------
# comparison principle


@dataclass
class ComparisonVerdict:
    """Outcome of ``h <= scale * h0``.

    ``status`` is ``"pass"``, ``"fail"`` or ``"hypothesis-not-met"``.
    ``max_eigenvalue`` is ``sup kappa`` with ``kappa(x)`` the largest
    eigenvalue of ``H = h h0^-1`` relative to ``h0``.
    """

    max_eigenvalue: float
    passed: bool
    tol: float
    status: str
    scale: float = 1.0
    hypothesis_margin: float = float("nan")
    omega_min_eig: float = float("nan")
    kappa: np.ndarray | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {"max_eigenvalue": self.max_eigenvalue, "passed": self.passed, "tol": self.tol,
                "status": self.status, "scale": self.scale,
                "hypothesis_margin": self.hypothesis_margin, "omega_min_eig": self.omega_min_eig}


def comparison_check(h: np.ndarray, h0: np.ndarray, theta, g: BaseMetric, tol: float = 1e-6,
                     scale: float = 1.0, twist=None, hypothesis_tol: float = 1e-12) -> ComparisonVerdict:
    """Verify the ordering ``h <= scale h0`` under its hypotheses.

    Hypotheses: ``Omega = S^{h0}`` is positive definite and
    ``Phi = S^h . H <= scale * Omega`` in the ``h0`` order, i.e. the Hermitian
    tensors satisfy ``S^h h <= scale S^{h0} h0``.  When they fail the verdict
    is ``"hypothesis-not-met"`` rather than a failure.
    """
    roots0 = F.sqrt_metric(h0)
    H = h @ F.inv(h0)
    kappa = F.herm_eigvals(H, roots=roots0)[..., -1]
    lam = float(np.max(kappa))
    # the discrete tensor is h0-Hermitian only up to truncation error
    Omega = F.h_hermitian_part(ho.hym_higgs_tensor(h0, theta, g, twist), roots=roots0)
    om_min = float(np.min(F.herm_eig_bounds(Omega, roots=roots0)[0]))
    Phi = F.h_hermitian_part(ho.hym_higgs_tensor(h, theta, g, twist) @ H, roots=roots0)
    gap = scale * Omega - Phi
    margin = float(np.min(F.herm_eig_bounds(gap, roots=roots0)[0]))
    passed = lam <= scale * (1 + tol)
    if om_min <= 0 or margin < -hypothesis_tol:
        status = "hypothesis-not-met"
    else:
        status = "pass" if passed else "fail"
    return ComparisonVerdict(lam, passed, tol, status, scale, margin, om_min, kappa)


# ---------------------------------------------------------------------------
# Chern-Weil forms


def _require_kahler_integrable(theta, g: BaseMetric, need_surface: bool = False) -> None:
    theta = ho._as_higgs(theta)
    theta.require_integrable()
    if not g.constant:
        raise HypothesisError("dω=0", "Chern-Weil checks are gated on a constant base metric")
    if need_surface and g.n != 2:
        raise HypothesisError("n=2", "the identity needs complex dimension 2")


def _tr_form(R: Form) -> Form:
    return R.map(lambda a: np.einsum("...ii->...", a))


@dataclass
class ChernForms:
    """Chern-Weil representatives.

    ``c1`` and ``c1_tilde`` are scalar 2-forms.  ``c2`` and ``c2_tilde`` are
    coefficient fields of ``dz^1 ^ dzbar^1 ^ dz^2 ^ dzbar^2`` (``None`` when
    ``n = 1``).  ``c1_sq`` / ``c1_tilde_sq`` likewise.
    """

    c1: Form
    c1_tilde: Form
    c2: np.ndarray | None
    c2_tilde: np.ndarray | None
    c1_sq: np.ndarray | None
    c1_tilde_sq: np.ndarray | None
    curvature: Form


def chern_forms(h: np.ndarray, theta, g: BaseMetric, twist=None) -> ChernForms:
    _require_kahler_integrable(theta, g)
    R = ho.full_higgs_curvature(h, theta, g, twist)
    R11 = Form({"zzb": R.get("zzb")})
    c = 1j / (2 * np.pi)
    trR, trR11 = _tr_form(R), _tr_form(R11)
    c1, c1t = trR.scale(c), trR11.scale(c)
    c2 = c2t = c1sq = c1tsq = None
    if g.n == 2:
        def second(P, trP):
            rr = np.einsum("...ii->...", top_coefficient(P, P))
            return -(top_coefficient(trP, trP, matrix=False) - rr) / (8 * np.pi ** 2)
        c2, c2t = second(R, trR), second(R11, trR11)
        c1sq = top_coefficient(c1, c1, matrix=False)
        c1tsq = top_coefficient(c1t, c1t, matrix=False)
    return ChernForms(c1, c1t, c2, c2t, c1sq, c1tsq, R)


def integrate_top(coeff: np.ndarray, g: BaseMetric) -> complex:
    """Integral of ``coeff dz^1 ^ dzbar^1 ^ dz^2 ^ dzbar^2``."""
    return complex(integrate(coeff, g.grid) * TOP_BASIS_DENSITY)


def integrate_omega_n(f: np.ndarray, g: BaseMetric) -> complex:
    """Integral of ``f omega^n``."""
    return complex(integrate(f, g.grid, g.volume_density()) * factorial(g.n))


def c1_degree(forms: ChernForms, g: BaseMetric) -> complex:
    """``int c1 ^ omega^{n-1}``; only the (1,1) part contributes."""
    # c1 ^ omega^{n-1} = ((n-1)!/n!) tr_g(c1) omega^n, tr_g of sqrt(-1) a is Lambda(a)
    a = forms.c1.get("zzb") / 1j
    return integrate_omega_n(g.lambda_contract(a), g) / g.n


# ---------------------------------------------------------------------------
# scalar invariants


def _raise_both(A: np.ndarray, g: BaseMetric) -> np.ndarray:
    """``W[p, q] = sum_ij g^{i pbar} A[i, j] conj(g^{j qbar})`` (form indices only)."""
    n = g.n
    Gi = g.Ginv
    extra = A.ndim - 2 - g.grid.ndim
    W = np.zeros_like(A)
    for p in range(n):
        for q in range(n):
            for i in range(n):
                for j in range(n):
                    c = (Gi[..., p, i] * Gi[..., j, q]).reshape(g.grid.shape + (1,) * extra)
                    W[p, q] += c * A[i, j]
    return W


def _frob(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", a, np.conj(b))


@dataclass
class CurvatureData:
    """Everything the surface identities need, computed from one curvature pass.

    Endomorphism quantities are stored in the ``h``-symmetric frame
    ``h^{-1/2} A h^{1/2}`` where the ``h`` inner product is Frobenius.
    """

    h: np.ndarray
    R: Form
    S: np.ndarray
    s: np.ndarray
    ric1: np.ndarray
    ric1_sq: np.ndarray
    ric2_sq: np.ndarray
    r11_sq: np.ndarray
    R11_sym: np.ndarray
    S_sym: np.ndarray


def curvature_data(h: np.ndarray, theta, g: BaseMetric, twist=None, R: Form | None = None) -> CurvatureData:
    if R is None:
        R = ho.full_higgs_curvature(h, theta, g, twist)
    R11 = R.get("zzb")
    sq, sqi = F.sqrt_metric(h)
    R11s = sqi[None, None] @ R11 @ sq[None, None]
    S = g.lambda_contract(R11)
    Ss = g.lambda_contract(R11s)
    ric1 = np.einsum("...ii->...", R11)
    s = np.einsum("...ii->...", S)
    return CurvatureData(
        h=h, R=R, S=S, s=s, ric1=ric1,
        ric1_sq=np.sum(_raise_both(ric1, g) * np.conj(ric1), axis=(0, 1)),
        ric2_sq=_frob(Ss, Ss),
        r11_sq=np.sum(_frob(_raise_both(R11s, g), R11s), axis=(0, 1)),
        R11_sym=R11s, S_sym=Ss,
    )


def scalar_invariants(h: np.ndarray, R11: np.ndarray, g: BaseMetric) -> dict:
    """``s_h``, ``|Ric1|^2``, ``|Ric2|^2`` and ``|R11|^2`` pointwise."""
    cd = curvature_data(h, None, g, R=Form({"zzb": R11}))
    return {"s": cd.s, "ric1_sq": cd.ric1_sq, "ric2_sq": cd.ric2_sq, "r11_sq": cd.r11_sq,
            "ric1": cd.ric1, "ric2": cd.S}


def _rel(a: complex, b: complex, scale: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), scale, 1e-300)


def chern_identity_check(h: np.ndarray, theta, g: BaseMetric, twist=None,
                         data: CurvatureData | None = None, forms: ChernForms | None = None) -> dict:
    """Both sides of the c1-squared and c2 integral identities on a surface.

    Left sides come from wedge products of forms, right sides from scalar
    curvature invariants.  Residuals are relative to the larger of the two
    sides and the integral of the absolute integrand.
    """
    _require_kahler_integrable(theta, g, need_surface=True)
    if forms is None:
        forms = chern_forms(h, theta, g, twist)
    cd = data if data is not None else curvature_data(h, theta, g, twist, forms.curvature)
    n = g.n
    norm = 1.0 / (4 * np.pi ** 2 * n * (n - 1))
    lhs1 = integrate_top(forms.c1_tilde_sq, g)
    rhs1 = norm * integrate_omega_n(cd.s ** 2 - cd.ric1_sq, g)
    sc1 = norm * integrate_omega_n(np.abs(cd.s) ** 2 + np.abs(cd.ric1_sq), g).real
    lhs2 = integrate_top(forms.c2_tilde, g)
    rhs2 = 0.5 * norm * integrate_omega_n(cd.s ** 2 - cd.ric1_sq - cd.ric2_sq + cd.r11_sq, g)
    sc2 = 0.5 * norm * integrate_omega_n(np.abs(cd.s) ** 2 + np.abs(cd.ric1_sq) + np.abs(cd.ric2_sq)
                                         + np.abs(cd.r11_sq), g).real
    return {"c1_lhs": lhs1, "c1_rhs": rhs1, "c1_residual": _rel(lhs1, rhs1, sc1),
            "c2_lhs": lhs2, "c2_rhs": rhs2, "c2_residual": _rel(lhs2, rhs2, sc2),
            "max_imag": max(abs(lhs1.imag), abs(rhs1.imag), abs(lhs2.imag), abs(rhs2.imag))}


def t_tensor(cd: CurvatureData, g: BaseMetric) -> np.ndarray:
    """Trace-free part ``T`` of the (1,1) curvature, in the ``h``-symmetric frame."""
    n, r = g.n, cd.h.shape[-1]
    Id = np.eye(r)
    T = np.empty_like(cd.R11_sym)
    for i in range(n):
        for j in range(n):
            gij = g.G[..., i, j][..., None, None]
            T[i, j] = (cd.R11_sym[i, j] - gij * cd.S_sym / n - cd.ric1[i, j][..., None, None] * Id / r
                       + gij * cd.s[..., None, None] * Id / (n * r))
    return T


def t_norm_sq(cd: CurvatureData, g: BaseMetric) -> np.ndarray:
    T = t_tensor(cd, g)
    return np.sum(_frob(_raise_both(T, g), T), axis=(0, 1))


def t_tensor_check(h: np.ndarray, theta, g: BaseMetric, twist=None, data: CurvatureData | None = None) -> dict:
    """``|T|^2`` built explicitly versus the closed formula; pointwise max gap."""
    cd = data if data is not None else curvature_data(h, theta, g, twist)
    n, r = g.n, h.shape[-1]
    direct = t_norm_sq(cd, g)
    formula = cd.r11_sq - cd.ric2_sq / n - cd.ric1_sq / r + cd.s ** 2 / (n * r)
    return {"residual": float(np.max(np.abs(direct - formula))),
            "scale": float(np.max(np.abs(direct))), "T_sq": direct}


def spread_check(S: np.ndarray, h: np.ndarray | None, a: float, b: float, roots=None) -> dict:
    """Pointwise ``s^2 - r|S|^2 = -sum_{i<j}(l_i - l_j)^2 >= -r(r-1)(a-b)^2/2``."""
    lam = F.herm_eigvals(S, h, roots=roots)
    r = lam.shape[-1]
    pairs = np.zeros(lam.shape[:-1])
    for i in range(r):
        for j in range(i + 1, r):
            pairs = pairs + (lam[..., i] - lam[..., j]) ** 2
    s = np.sum(lam, axis=-1)
    lhs = s ** 2 - r * np.sum(lam ** 2, axis=-1)
    bound = -0.5 * r * (r - 1) * (a - b) ** 2
    scale = max(1.0, float(np.max(lam ** 2)))
    return {"identity_residual": float(np.max(np.abs(lhs + pairs))) / scale,
            "violation": float(max(0.0, np.max(bound - lhs))) / scale,
            "min_slack": float(np.min(lhs - bound))}


@dataclass
class ChernReport:
    values: dict
    verdicts: dict

    def summary(self) -> dict:
        out = {}
        for k, v in self.values.items():
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        out["verdicts"] = {k: bool(v) for k, v in self.verdicts.items()}
        return out


def chern_inequality_check(h0: np.ndarray, theta, g: BaseMetric, twist=None, tol: float = 1e-7,
                           eta_tol: float = 1e-9, forms: ChernForms | None = None,
                           data: CurvatureData | None = None) -> ChernReport:
    """Full pipeline of the Chern number inequality on a surface."""
    _require_kahler_integrable(theta, g, need_surface=True)
    n, r = g.n, h0.shape[-1]
    if forms is None:
        forms = chern_forms(h0, theta, g, twist)
    cd = data if data is not None else curvature_data(h0, theta, g, twist, forms.curvature)
    R = forms.curvature
    lam = F.herm_eigvals(cd.S_sym)
    a, b = float(np.min(lam)), float(np.max(lam))
    lhs = integrate_top((r - 1) * forms.c1_sq - 2 * r * forms.c2, g)
    lhs_t = integrate_top((r - 1) * forms.c1_tilde_sq - 2 * r * forms.c2_tilde, g)
    Id = np.eye(r)
    e20 = R.get("zz")[0, 1]
    e02 = R.get("zbzb")[0, 1]
    e20 = e20 - np.einsum("...ii->...", e20)[..., None, None] * Id / r
    e02 = e02 - np.einsum("...ii->...", e02)[..., None, None] * Id / r
    eta = integrate_top(np.einsum("...ii->...", top_coefficient(Form({"zz": _pad(e20)}),
                                                                Form({"zbzb": _pad(e02)}))), g)
    eta_scale = abs(integrate_top(np.abs(np.einsum("...ij,...ji->...", e20, e02)), g))
    c_scale = abs(integrate_top(np.abs(forms.c1_sq) + np.abs(forms.c1_tilde_sq)
                                + 2 * r * (np.abs(forms.c2) + np.abs(forms.c2_tilde)), g))
    eta_identity = _rel(lhs - lhs_t, -r / (2 * np.pi ** 2) * eta,
                        max(r / (2 * np.pi ** 2) * eta_scale, c_scale))
    T_sq = t_norm_sq(cd, g)
    spread_field = cd.s ** 2 - r * cd.ric2_sq
    t_side = integrate_omega_n(r * T_sq + (n - 1) / n * spread_field, g) / (4 * np.pi ** 2 * n * (n - 1))
    t_scale = integrate_omega_n(r * np.abs(T_sq) + np.abs(cd.s) ** 2 + r * np.abs(cd.ric2_sq), g).real \
        / (4 * np.pi ** 2 * n * (n - 1))
    t_identity = _rel(-lhs_t, t_side, t_scale)
    vol = integrate_omega_n(np.ones(g.grid.shape), g).real
    rhs = r * (r - 1) * (b - a) ** 2 / (8 * np.pi ** 2 * n ** 2) * vol
    spread = spread_check(cd.S_sym, None, a, b)
    values = {"a": a, "b": b, "lhs": lhs, "lhs_tilde": lhs_t, "eta_integral": eta, "rhs": rhs,
              "eta_identity_residual": eta_identity, "t_identity_residual": t_identity,
              "spread_identity_residual": spread["identity_residual"],
              "spread_violation": spread["violation"],
              "c1_omega": c1_degree(forms, g), "c1_sq_integral": integrate_top(forms.c1_sq, g),
              "c2_integral": integrate_top(forms.c2, g)}
    verdicts = {"eta_nonnegative": eta.real >= -eta_tol,
                "inequality": lhs.real <= rhs + tol,
                "spread": spread["violation"] <= 1e-12}
    return ChernReport(values, verdicts)


def chern_suite(h: np.ndarray, theta, g: BaseMetric, twist=None) -> dict:
    """Identity, T-tensor and inequality checks sharing one curvature evaluation."""
    _require_kahler_integrable(theta, g, need_surface=True)
    forms = chern_forms(h, theta, g, twist)
    cd = curvature_data(h, theta, g, twist, forms.curvature)
    ident = chern_identity_check(h, theta, g, twist, data=cd, forms=forms)
    tt = t_tensor_check(h, theta, g, twist, data=cd)
    ineq = chern_inequality_check(h, theta, g, twist, forms=forms, data=cd)
    return {"identities": ident, "t_tensor": {"residual": tt["residual"], "scale": tt["scale"]},
            "inequality": ineq}


def _pad(a: np.ndarray) -> np.ndarray:
    """Antisymmetric ``(2, 2, ...)`` storage for a single surface 2-form coefficient."""
    z = np.zeros_like(a)
    return np.stack([np.stack([z, a]), np.stack([-a, z])])
