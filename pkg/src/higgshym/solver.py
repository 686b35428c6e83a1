"""Prescribed Hermitian-Yang-Mills-Higgs tensor solver.

Unknown: an endomorphism ``H`` that is Hermitian positive definite for the
reference metric ``h0``; the metric is ``h = H h0`` (``h0(s H, t) = h(s, t)``).
Given the target ``Phi`` (an ``h0``-Hermitian field) the equation is

    S^{H h0} . H = Phi,

where ``S`` is the HYM-Higgs tensor.  At ``H = Id`` the left side is
``Omega = S^{h0}``, so prescribing the tensor ``P`` at the solution means
``Phi = P . H``.

Newton's method linearizes along ``H -> exp(t Psi) H`` with ``Psi``
Hermitian for ``h1 = H h0``:

    d/dt (S^{H_t h0} H_t) = L1(Psi) H,
    L1(Psi) = Lambda sqrt(-1) D''(D'^{h1} Psi) + Omega1 . Psi,

and the correction solves ``L1(Psi) = -residual . H^-1`` by GMRES in the
``h1``-symmetric frame, where all iterates are Hermitian matrices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import fields as F
from . import higgs_ops as ho
from .errors import HypothesisError, NumericalError
from .forms import Form, dbar, wedge
from .geometry import BaseMetric, twist_curvature
from .grid import apply_symbol, integrate, laplacian_symbol

log = logging.getLogger(__name__)

PD_MARGIN = 1e-8
ALPHAS = tuple(2.0 ** -k for k in range(9))
ARMIJO_C = 1e-4


@dataclass
class ProblemSpec:
    """Everything that defines one solve.

    Parameters
    ----------
    g : BaseMetric
    theta : HiggsField
    h0 : ndarray
        Reference metric, ``(*grid, r, r)``.
    target : ndarray or None
        ``Phi``; defaults to ``Omega`` (so ``H = Id`` solves).
    twist_degree : int
        Degree of the constant-curvature line bundle factor (0 = none).

    ``omega_defect`` records the anti-Hermitian part removed from ``Omega``
    (a measure of how well the grid resolves ``h0``).
    """

    g: BaseMetric
    theta: ho.HiggsField
    h0: np.ndarray
    target: np.ndarray | None = None
    twist_degree: int = 0
    residual_tol: float = 1e-10
    newton_max_iter: int = 30
    krylov_tol: float = 1e-12
    krylov_maxiter: int = 400
    parametrization: str = "exp"
    _omega: np.ndarray | None = field(default=None, repr=False)
    omega_defect: float = field(default=float("nan"), repr=False)

    def __post_init__(self):
        if self.parametrization != "exp":
            raise ValueError(f"unsupported parametrization {self.parametrization!r}")
        self.grid.check(self.h0, "h0")
        if self.h0.shape[-1] != self.theta.r:
            raise ValueError("rank of h0 and theta differ")
        F.check_metric(self.h0, "h0")
        self.h0_inv = F.inv(self.h0)
        self.h0_roots = F.sqrt_metric(self.h0)
        self.twist = twist_curvature(self.grid, self.twist_degree) if self.twist_degree else None
        if self.target is None:
            self.target = self.omega.copy()
        else:
            self.grid.check(self.target, "target")

    @property
    def grid(self):
        return self.g.grid

    @property
    def r(self) -> int:
        return self.theta.r

    @property
    def omega(self) -> np.ndarray:
        if self._omega is None:
            raw = ho.hym_higgs_tensor(self.h0, self.theta, self.g, self.twist)
            self.omega_defect = F.h_hermitian_defect(raw, roots=self.h0_roots)
            self._omega = F.h_hermitian_part(raw, roots=self.h0_roots)
        return self._omega

    def identity(self) -> np.ndarray:
        return F.identity_field(self.grid.shape, self.r)

    def min_eig(self, A: np.ndarray) -> float:
        """Smallest eigenvalue of an ``h0``-Hermitian field."""
        lo, _ = F.herm_eig_bounds(A, roots=self.h0_roots)
        return float(np.min(lo))

    def validate(self, require_omega: bool = True) -> None:
        """Check the positivity hypotheses on ``Omega`` and the target."""
        if require_omega:
            m = self.min_eig(self.omega)
            if m < PD_MARGIN:
                raise HypothesisError("Ω>0", f"min eigenvalue of Omega is {m:.3e}")
        m = self.min_eig(self.target)
        if m < PD_MARGIN:
            raise HypothesisError("P>0", f"min eigenvalue of the target is {m:.3e}")


# ---------------------------------------------------------------------------
# target recipes


def target_from_metric(spec: ProblemSpec, H_true: np.ndarray) -> np.ndarray:
    """``Phi = S^{H_true h0} . H_true`` so that ``H_true`` is the exact solution."""
    S = ho.hym_higgs_tensor(H_true @ spec.h0, spec.theta, spec.g, spec.twist)
    return S @ H_true


def target_manufactured(spec: ProblemSpec, S_true: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Target and exact solution ``H_true = exp(S_true)`` (``S_true`` h0-Hermitian)."""
    H_true = F.matrix_exp(S_true, roots=spec.h0_roots)
    return target_from_metric(spec, H_true), H_true


def target_conformal(spec: ProblemSpec, f: np.ndarray) -> np.ndarray:
    """Target whose solution is ``H = exp(-f) Id``: ``(Omega + Delta f) exp(-f)``."""
    lap = np.real(spec.g.laplacian(f))
    Id = np.eye(spec.r)
    return (spec.omega + lap[..., None, None] * Id) * np.exp(-f)[..., None, None]


def target_omega_shift(spec: ProblemSpec, eps: float, bump: np.ndarray | None = None) -> np.ndarray:
    """``Omega - eps * bump`` with ``bump`` positive and ``h0``-Hermitian (Id by default)."""
    if bump is None:
        bump = spec.identity()
    return spec.omega - eps * bump


# ---------------------------------------------------------------------------
# residual


def residual(H: np.ndarray, spec: ProblemSpec, path: str = "curvature", check: bool = False) -> np.ndarray:
    """Defect ``S^{H h0} . H - Phi``, projected onto ``h0``-Hermitian fields.

    On a grid ``S^h . h`` is Hermitian only up to discretization error; that
    anti-Hermitian remainder (see :func:`discretization_defect`) is dropped
    so that the iterations can drive the residual to round-off.

    ``path="equation"`` evaluates the same quantity from the split form
    ``Omega H + F_theta(H) H + Lambda sqrt(-1) dbar(d^{h0} H . H^-1) H - Phi``.
    """
    if check:
        lo, _ = F.herm_eig_bounds(H, roots=spec.h0_roots)
        if np.min(lo) <= 0:
            raise NumericalError("H lost positivity")
    if path == "curvature":
        S = ho.hym_higgs_tensor(H @ spec.h0, spec.theta, spec.g, spec.twist)
        return F.h_hermitian_part(S @ H - spec.target, roots=spec.h0_roots)
    if path == "equation":
        grid = spec.grid
        H_inv = F.inv(H)
        omega0 = ho.chern_connection(spec.h0, grid, spec.h0_inv)
        A = wedge(ho.chern_dprime(H, omega0, grid), H_inv)
        lap = spec.g.lambda_contract(dbar(A, grid).get("zzb"))
        Ft = ho.f_theta(H, spec.h0, spec.theta, spec.g)
        omega = ho.hym_higgs_tensor(spec.h0, spec.theta, spec.g, spec.twist)
        return F.h_hermitian_part((omega + Ft + lap) @ H - spec.target, roots=spec.h0_roots)
    raise ValueError(f"unknown path {path!r}")


def discretization_defect(H: np.ndarray, spec: ProblemSpec) -> float:
    """Anti-Hermitian part of ``S^{H h0} . H`` that :func:`residual` discards."""
    S = ho.hym_higgs_tensor(H @ spec.h0, spec.theta, spec.g, spec.twist)
    return F.h_hermitian_defect(S @ H, roots=spec.h0_roots)


def residual_norm(res: np.ndarray, spec: ProblemSpec) -> float:
    return F.sup_norm(res, roots=spec.h0_roots)


# ---------------------------------------------------------------------------
# linearization


@dataclass
class LinearizationState:
    H: np.ndarray
    h1: np.ndarray
    h1_inv: np.ndarray
    roots: tuple
    omega_conn: np.ndarray
    theta_star: np.ndarray
    Omega1: np.ndarray


def linearization_state(H: np.ndarray, spec: ProblemSpec) -> LinearizationState:
    h1 = F.hermitian_part(H @ spec.h0)
    h1_inv = F.inv(h1)
    roots = F.sqrt_metric(h1)
    Omega1 = F.h_hermitian_part(ho.hym_higgs_tensor(h1, spec.theta, spec.g, spec.twist), roots=roots)
    return LinearizationState(
        H=H, h1=h1, h1_inv=h1_inv, roots=roots,
        omega_conn=ho.chern_connection(h1, spec.grid, h1_inv),
        theta_star=ho.higgs_adjoint(spec.theta, h1, h1_inv),
        Omega1=Omega1,
    )


def linearized_apply(Psi: np.ndarray, state: LinearizationState, spec: ProblemSpec) -> np.ndarray:
    """``L1(Psi) = Lambda sqrt(-1) D''(D'^{h1} Psi) + Omega1 . Psi`` at ``h1 = H h0``."""
    grid = spec.grid
    Q = ho.dprime(Psi, state.h1, spec.theta, grid, h0_inv=state.h1_inv,
                  omega0=state.omega_conn, theta_star=state.theta_star)
    lap = spec.g.lambda_contract(ho.dsecond(Q, spec.theta, grid).get("zzb"))
    return lap + state.Omega1 @ Psi


def _herm_pack(B: np.ndarray) -> np.ndarray:
    r = B.shape[-1]
    iu = np.triu_indices(r, 1)
    parts = [np.real(np.diagonal(B, axis1=-2, axis2=-1)),
             np.real(B[..., iu[0], iu[1]]) * np.sqrt(2),
             np.imag(B[..., iu[0], iu[1]]) * np.sqrt(2)]
    return np.concatenate(parts, axis=-1).reshape(-1)


def _herm_unpack(v: np.ndarray, shape: tuple, r: int) -> np.ndarray:
    v = v.reshape(shape + (r * r,))
    iu = np.triu_indices(r, 1)
    m = len(iu[0])
    B = np.zeros(shape + (r, r), dtype=complex)
    idx = np.arange(r)
    B[..., idx, idx] = v[..., :r]
    off = (v[..., r:r + m] + 1j * v[..., r + m:]) / np.sqrt(2)
    B[..., iu[0], iu[1]] = off
    B[..., iu[1], iu[0]] = np.conj(off)
    return B


@dataclass
class KrylovResult:
    Psi: np.ndarray
    iterations: int
    info: int
    hermitian_defect: float


def krylov_solve(rhs: np.ndarray, state: LinearizationState, spec: ProblemSpec, rtol: float) -> KrylovResult:
    """Solve ``L1(Psi) = rhs`` for ``h1``-Hermitian ``Psi`` (``rhs`` ``h1``-Hermitian)."""
    shape, r = spec.grid.shape, spec.r
    s, si = state.roots
    defect = [0.0]

    def op(v):
        B = _herm_unpack(v, shape, r)
        out = si @ linearized_apply(s @ B @ si, state, spec) @ s
        scale = max(float(np.max(np.abs(out))), 1e-300)
        defect[0] = max(defect[0], float(np.max(np.abs(out - F.dagger(out)))) / scale)
        return _herm_pack(out)

    # entrywise (-Delta + shift)^{-1} with a flat metric of the mean size
    Gm = np.mean(spec.g.G.reshape(-1, spec.grid.n, spec.grid.n), axis=0)
    shift = max(float(np.real(np.mean(F.trace(state.Omega1)))) / r, 1e-3)
    sym = 1.0 / (np.real(-laplacian_symbol(spec.grid, Gm)) + shift)
    def prec(v):
        return _herm_pack(apply_symbol(_herm_unpack(v, shape, r), spec.grid, sym))

    nvar = int(np.prod(shape)) * r * r
    A = spla.LinearOperator((nvar, nvar), matvec=op, dtype=float)
    M = spla.LinearOperator((nvar, nvar), matvec=prec, dtype=float)
    b = _herm_pack(F.hermitian_part(si @ rhs @ s))
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(A, b, rtol=rtol, atol=0.0, restart=60, maxiter=spec.krylov_maxiter,
                         M=M, callback=cb, callback_type="pr_norm")
    B = _herm_unpack(x, shape, r)
    return KrylovResult(Psi=s @ B @ si, iterations=count[0], info=int(info), hermitian_defect=defect[0])


# ---------------------------------------------------------------------------
# reports and solvers


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list
    H: np.ndarray
    diagnostics: dict
    wall_time: float
    message: str = ""

    def summary(self) -> dict:
        d = {"converged": bool(self.converged), "iterations": int(self.iterations),
             "residual_history": [float(x) for x in self.residual_history],
             "final_residual": float(self.residual_history[-1]) if self.residual_history else None,
             "message": self.message}
        d.update({k: v for k, v in self.diagnostics.items() if not isinstance(v, np.ndarray)})
        return d


def c1_proxy(H: np.ndarray, spec: ProblemSpec) -> float:
    """``sup |d^{h0} H . H^-1|_h`` with ``h = H h0``."""
    grid = spec.grid
    omega0 = ho.chern_connection(spec.h0, grid, spec.h0_inv)
    A = wedge(ho.chern_dprime(H, omega0, grid), F.inv(H)).get("z")
    h = H @ spec.h0
    h_inv = F.inv(h)
    acc = 0
    for i in range(grid.n):
        for j in range(grid.n):
            acc = acc + spec.g.Ginv[..., i, j] * F.inner(A[j], A[i], h, h_inv)
    return float(np.sqrt(np.max(np.abs(acc))))


def _final_diagnostics(H: np.ndarray, spec: ProblemSpec) -> dict:
    lo, hi = F.herm_eig_bounds(H, roots=spec.h0_roots)
    return {"H_min_eig": float(np.min(lo)), "H_max_eig": float(np.max(hi)),
            "c1_proxy": c1_proxy(H, spec), "discretization_defect": discretization_defect(H, spec)}


def newton_solve(spec: ProblemSpec, H_init: np.ndarray | None = None) -> SolveReport:
    """Damped Newton-Krylov iteration in exponential coordinates.

    The update is ``H <- exp(alpha Psi) H`` (exponential taken for ``h1``),
    with ``alpha`` backtracked over ``1, 1/2, ..., 2^-8`` until the residual
    sup-norm decreases by the Armijo factor.
    """
    t0 = time.perf_counter()
    H = spec.identity() if H_init is None else H_init.copy()
    res = residual(H, spec)
    rn = residual_norm(res, spec)
    hist = [rn]
    diag = {"alpha": [], "krylov_iterations": [], "omega1_min_eig": [], "L_identity_check": [],
            "hermitian_defect": [], "omega1_positivity_lost": False}
    converged = rn <= spec.residual_tol
    message = "converged" if converged else ""
    it = 0
    while not converged and it < spec.newton_max_iter:
        it += 1
        st = linearization_state(H, spec)
        lid = linearized_apply(spec.identity(), st, spec)
        diag["L_identity_check"].append(float(np.max(np.abs(lid - st.Omega1))))
        lo, _ = F.herm_eig_bounds(st.Omega1, roots=st.roots)
        m = float(np.min(lo))
        diag["omega1_min_eig"].append(m)
        if m < PD_MARGIN:
            diag["omega1_positivity_lost"] = True
            log.warning("Omega1 not positive at iteration %d (min eig %.3e)", it, m)
        rhs = -res @ F.inv(H)
        kr = krylov_solve(rhs, st, spec, rtol=max(spec.krylov_tol, min(1e-3, rn)))
        diag["krylov_iterations"].append(kr.iterations)
        diag["hermitian_defect"].append(kr.hermitian_defect)
        accepted = False
        for alpha in ALPHAS:
            Hn = F.matrix_exp(alpha * kr.Psi, roots=st.roots) @ H
            rn_new = residual_norm(residual(Hn, spec), spec)
            if np.isfinite(rn_new) and rn_new <= (1 - ARMIJO_C * alpha) * rn:
                accepted = True
                break
        if not accepted:
            message = "line search failed"
            break
        diag["alpha"].append(alpha)
        H = Hn
        res = residual(H, spec)
        rn = residual_norm(res, spec)
        hist.append(rn)
        log.info("newton %d: residual %.3e alpha %g krylov %d", it, rn, alpha, kr.iterations)
        converged = rn <= spec.residual_tol
    if converged:
        message = "converged"
    elif not message:
        message = "max iterations exceeded"
    diag.update(_final_diagnostics(H, spec))
    return SolveReport(converged, it, hist, H, diag, time.perf_counter() - t0, message)


def stable_step_estimate(spec: ProblemSpec, H: np.ndarray | None = None) -> float:
    """``1.8 / lambda_max`` from the symbol of the principal part plus zeroth-order bounds."""
    grid = spec.grid
    flat = np.max(np.abs(laplacian_symbol(grid)))
    gmax = float(np.max(np.linalg.eigvalsh(spec.g.Ginv.reshape(-1, grid.n, grid.n))))
    H = spec.identity() if H is None else H
    S = ho.hym_higgs_tensor(H @ spec.h0, spec.theta, spec.g, spec.twist)
    zeroth = F.sup_norm(S, H @ spec.h0) + 4 * gmax * sum(np.linalg.norm(t, 2) ** 2 for t in spec.theta.theta)
    return 1.8 / (flat * gmax + zeroth)


def heat_flow_solve(spec: ProblemSpec, dt: float | None = None, max_steps: int = 20000,
                    dt_min: float = 1e-8, H_init: np.ndarray | None = None) -> SolveReport:
    """Explicit relaxation ``H <- exp(-dt Y) H``, ``Y`` the residual carried to ``h``.

    A step whose residual more than doubles is rejected and ``dt`` halved;
    the halvings are recorded in ``diagnostics["dt_halvings"]``.
    """
    t0 = time.perf_counter()
    H = spec.identity() if H_init is None else H_init.copy()
    if dt is None:
        dt = stable_step_estimate(spec, H)
    res = residual(H, spec)
    rn = residual_norm(res, spec)
    hist = [rn]
    halvings = []
    converged = rn <= spec.residual_tol
    message = ""
    step = 0
    while not converged and step < max_steps:
        h = H @ spec.h0
        roots = F.sqrt_metric(F.hermitian_part(h))
        Y = F.from_symmetric_frame(F.hermitian_part(F.symmetric_frame(res @ F.inv(H), roots=roots)),
                                   roots=roots)
        Hn = F.matrix_exp(-dt * Y, roots=roots) @ H
        res_n = residual(Hn, spec)
        rn_n = residual_norm(res_n, spec)
        if not np.isfinite(rn_n) or rn_n > 2 * rn:
            dt *= 0.5
            halvings.append({"step": step, "dt": dt, "residual": float(rn_n)})
            if dt < dt_min:
                message = "step size fell below dt_min"
                break
            continue
        step += 1
        H, res, rn = Hn, res_n, rn_n
        hist.append(rn)
        converged = rn <= spec.residual_tol
    if converged:
        message = "converged"
    elif not message:
        message = "max steps exceeded"
    diag = {"dt_final": dt, "dt_halvings": halvings}
    diag.update(_final_diagnostics(H, spec))
    return SolveReport(converged, step, hist, H, diag, time.perf_counter() - t0, message)


def gauduchon_normalize(spec: ProblemSpec) -> tuple[np.ndarray, float, np.ndarray]:
    """Conformally rescale ``h0`` so the smallest eigenvalue of ``S`` is constant.

    Returns ``(h_tilde, lambda0, f)`` with ``h_tilde = exp(-f) h0`` and
    ``kappa_{h_tilde} = lambda0``.
    """
    g = spec.g
    if not g.constant:
        raise ValueError("gauduchon_normalize is only implemented for constant base metrics")
    kappa, _ = F.herm_eig_bounds(spec.omega, roots=spec.h0_roots)
    vol = g.volume_density()
    lam0 = float(np.real(integrate(kappa, g.grid, vol)) / np.real(integrate(np.ones(g.grid.shape), g.grid, vol)))
    if lam0 <= 1e-12 * max(1.0, float(np.max(np.abs(kappa)))):
        raise HypothesisError("∫κ>0", f"integral of kappa is {lam0 * g.total_volume():.3e}")
    rhs = lam0 - kappa
    rhs = rhs - np.mean(rhs)
    f = np.real(g.invert_laplacian(rhs))
    h_t = np.exp(-f)[..., None, None] * spec.h0
    S_t = F.h_hermitian_part(ho.hym_higgs_tensor(h_t, spec.theta, g, spec.twist), h_t)
    lo, _ = F.herm_eig_bounds(S_t, h_t)
    if np.min(lo) < PD_MARGIN:
        raise HypothesisError("Ω>0", "normalized tensor is not positive definite")
    return h_t, lam0, f
