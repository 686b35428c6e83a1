import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higgshym import fields as F
from higgshym import higgs_ops as ho
from higgshym import instances as inst
from higgshym import solver as sv
from higgshym.errors import HypothesisError
from higgshym.geometry import BaseMetric
from higgshym.grid import GridSpec


def _spec(N=16, r=2, seed=0, d=13, amp=0.3, **kw):
    grid = GridSpec.square(1, N)
    g = BaseMetric.flat(grid)
    h0 = inst.random_metric(grid, r, inst.stream(seed, "h0"), amp)
    th = ho.HiggsField(inst.random_commuting_theta(1, r, inst.stream(seed, "theta"), 0.3))
    return sv.ProblemSpec(g, th, h0, twist_degree=d, **kw)


def _manufactured(N=16, seed=0, size=0.5, **kw):
    base = _spec(N=N, seed=seed, **kw)
    S = inst.random_endomorphism(base.grid, base.r, inst.stream(seed, "S"), base.h0, size)
    target, H_true = sv.target_manufactured(base, S)
    spec = sv.ProblemSpec(base.g, base.theta, base.h0, target=target, twist_degree=base.twist_degree, **kw)
    return spec, H_true


# ---- problem setup and residual---------------------------------------------------------


def test_hypotheses_named():
    with pytest.raises(HypothesisError) as e:
        _spec(d=0).validate()
    assert e.value.hypothesis == "Ω>0"
    spec = _spec()
    bad = sv.ProblemSpec(spec.g, spec.theta, spec.h0, target=-spec.omega, twist_degree=13)
    with pytest.raises(HypothesisError) as e:
        bad.validate()
    assert e.value.hypothesis == "P>0"


def test_residual_vanishes_at_reference():
    spec = _spec()
    assert sv.residual_norm(sv.residual(spec.identity(), spec), spec) < 1e-14


def test_residual_conformal_target():
    spec = _spec(N=32)
    f = inst.random_scalar(spec.grid, inst.stream(0, "f"), 0.3)
    t = sv.ProblemSpec(spec.g, spec.theta, spec.h0, target=sv.target_conformal(spec, f), twist_degree=13)
    H = np.exp(-f)[..., None, None] * spec.identity()
    assert sv.residual_norm(sv.residual(H, t), t) < 1e-10


def test_residual_paths_and_brute_force():
    spec, H_true = _manufactured(N=32, size=0.3)
    H = F.matrix_exp(inst.random_endomorphism(spec.grid, 2, inst.stream(1, "H"), spec.h0, 0.3), spec.h0)
    a = sv.residual(H, spec, "curvature")
    b = sv.residual(H, spec, "equation")
    assert np.max(np.abs(a - b)) < 1e-8
    h = H @ spec.h0
    R = ho.full_higgs_curvature(h, spec.theta, spec.g, spec.twist)
    brute = spec.g.lambda_contract(R.get("zzb")) @ H - spec.target
    assert np.max(np.abs(brute - a)) < 1e-8


# ---- linearization --------------------------------------------------------------


def test_linearization_of_identity():
    spec = _spec()
    st_ = sv.linearization_state(spec.identity(), spec)
    assert np.max(np.abs(sv.linearized_apply(spec.identity(), st_, spec) - st_.Omega1)) < 1e-12


@pytest.mark.parametrize("mode", [(1, 0), (0, 2), (1, -1), (3, 2)])
def test_linearization_fourier_symbol(mode):
    grid = GridSpec(1, 16, (2 * np.pi, 2.0))
    spec = sv.ProblemSpec(BaseMetric.flat(grid), ho.HiggsField.zero(1, 2),
                          F.identity_field(grid.shape, 2), twist_degree=4)
    x, y = grid.coords()
    kx, ky = 2 * np.pi * mode[0] / grid.periods[0], 2 * np.pi * mode[1] / grid.periods[1]
    M = np.array([[1.0, 0.3 - 0.2j], [0.3 + 0.2j, -0.5]])
    Psi = np.cos(kx * x + ky * y)[..., None, None] * M
    st_ = sv.linearization_state(spec.identity(), spec)
    t = np.pi * 4 / (2 * np.pi * 2.0)
    expected = (t + (kx ** 2 + ky ** 2) / 4) * Psi
    assert np.max(np.abs(sv.linearized_apply(Psi, st_, spec) - expected)) < 1e-12


def test_linearization_preserves_hermiticity_and_matches_derivative():
    spec, _ = _manufactured(N=32, size=0.3)
    H = F.matrix_exp(inst.random_endomorphism(spec.grid, 2, inst.stream(2, "H"), spec.h0, 0.3), spec.h0)
    st_ = sv.linearization_state(H, spec)
    Psi = inst.random_endomorphism(spec.grid, 2, inst.stream(2, "Psi"), st_.h1, 0.2)
    L = sv.linearized_apply(Psi, st_, spec)
    assert F.hermitian_defect(L @ st_.h1) < 1e-10
    r0 = sv.residual(H, spec)
    exact = L @ H
    errs = []
    for t in (1e-2, 5e-3, 2.5e-3):
        Ht = F.matrix_exp(t * Psi, st_.h1) @ H
        errs.append(np.max(np.abs((sv.residual(Ht, spec) - r0) / t - exact)))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(1.8 < q < 2.2 for q in ratios)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_hermitian_packing(r, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(5, r, r)) + 1j * rng.normal(size=(5, r, r))
    B = a + F.dagger(a)
    v = sv._herm_pack(B)
    assert v.shape == (5 * r * r,)
    assert np.allclose(sv._herm_unpack(v, (5,), r), B)
    assert np.dot(v, v) == pytest.approx(np.sum(np.abs(B) ** 2))


# ---- solvers ---------------------------------------------------------------------


def test_newton_trivial_target():
    spec = _spec()
    rep = sv.newton_solve(spec)
    assert rep.converged and rep.iterations == 0


def test_newton_manufactured():
    spec, H_true = _manufactured(N=32, size=0.5)
    spec.validate()
    rep = sv.newton_solve(spec)
    assert rep.converged and rep.iterations <= 15
    assert rep.residual_history[-1] <= 1e-10
    assert np.max(F.operator_norm(rep.H - H_true, spec.h0)) < 1e-6
    assert not rep.diagnostics["omega1_positivity_lost"]
    assert max(rep.diagnostics["L_identity_check"]) < 1e-10
    s = rep.summary()
    assert s["converged"] and s["final_residual"] <= 1e-10


def test_newton_conformal_target():
    spec = _spec(N=16)
    f = inst.random_scalar(spec.grid, inst.stream(3, "f"), 0.3)
    t = sv.ProblemSpec(spec.g, spec.theta, spec.h0, target=sv.target_conformal(spec, f), twist_degree=13)
    rep = sv.newton_solve(t)
    assert rep.converged
    assert np.max(np.abs(rep.H - np.exp(-f)[..., None, None] * np.eye(2))) < 1e-6


def test_heat_flow():
    spec, H_true = _manufactured(N=8, size=0.2)
    assert sv.heat_flow_solve(_spec(N=8)).iterations == 0
    rep = sv.heat_flow_solve(spec)
    assert rep.converged
    nrep = sv.newton_solve(spec)
    assert np.max(F.operator_norm(rep.H - nrep.H, spec.h0)) < 1e-6


def test_heat_flow_oversized_dt_is_halved():
    spec, _ = _manufactured(N=8, size=0.2)
    rep = sv.heat_flow_solve(spec, dt=50 * sv.stable_step_estimate(spec), max_steps=50)
    halvings = rep.diagnostics["dt_halvings"]
    assert len(halvings) >= 3
    assert all(b["dt"] < a["dt"] for a, b in zip(halvings, halvings[1:]))


# ---- Gauduchon normalization ----------------------------------------------------------


def test_gauduchon_constant_kappa():
    spec = _spec(N=8, amp=0.0)
    h_t, lam0, f = sv.gauduchon_normalize(spec)
    assert np.max(np.abs(f)) < 1e-12
    assert lam0 == pytest.approx(float(np.min(F.herm_eig_bounds(spec.omega, spec.h0)[0])))


def test_gauduchon_cosine_example():
    grid = GridSpec(1, 32, (2 * np.pi, 2.0))
    x = grid.coords()[0]
    phi = -1.2 * np.cos(x) * np.ones(grid.shape)       # Delta phi = 0.3 cos(x)
    spec = sv.ProblemSpec(BaseMetric.flat(grid), ho.HiggsField.zero(1, 1),
                          np.exp(-phi)[..., None, None] + 0j, twist_degree=4)
    assert np.max(np.abs(spec.omega[..., 0, 0] - (1 + 0.3 * np.cos(x)))) < 1e-12
    h_t, lam0, f = sv.gauduchon_normalize(spec)
    assert lam0 == pytest.approx(1.0, abs=1e-12)
    kappa = ho.hym_higgs_tensor(h_t, spec.theta, spec.g, spec.twist)[..., 0, 0]
    assert np.max(np.abs(kappa - 1.0)) < 1e-7


def test_gauduchon_zero_integral_rejected():
    spec = _spec(N=8, r=1, d=0)
    with pytest.raises(HypothesisError) as e:
        sv.gauduchon_normalize(spec)
    assert e.value.hypothesis == "∫κ>0"
