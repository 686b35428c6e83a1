"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line; the lines are printed together at the
end of the pytest run.  Run this file alone with

    python3 tests/test_acceptance.py
"""

import json
import time

import numpy as np
import pytest

from higgshym import analysis as an
from higgshym import cli
from higgshym import fields as F
from higgshym import higgs_ops as ho
from higgshym import instances as inst
from higgshym import solver as sv
from higgshym.geometry import BaseMetric, twist_curvature
from higgshym.grid import GridSpec

# tolerances
IDENTITY_TOL = 1e-7
IDENTITY_BUDGET_S = 30.0
BK_KAHLER_TOL = 1e-7
BK_TORSION_TOL = 1e-6
RANK1_TOL = 1e-13
CONFORMAL_TOL = 1e-8
NEWTON_RESIDUAL_TOL = 1e-10
NEWTON_MAX_ITER = 15
RECOVERY_TOL = 1e-6
INITIAL_GUESS_TOL = 1e-5
SOLVE_BUDGET_S = 60.0
FLOW_AGREEMENT_TOL = 1e-6
PD_GAP_MIN = 1e-3
COMPARISON_TOL = 1e-6
KAPPA_CONST_TOL = 1e-7
KAPPA_MEAN_TOL = 1e-9
CHERN_IDENTITY_TOL = 1e-6
T_TOL = 1e-9
ETA_TOL = 1e-9
SPREAD_TOL = 1e-12
TRIVIAL_TOL = 1e-7

# resolutions: n = 2 runs at N = 32, the largest grid whose curvature forms fit in memory
N1, N2 = 64, 32
SEEDS = range(5)


def _base(grid, seed, conformal):
    if not conformal:
        return BaseMetric.flat(grid)
    return BaseMetric.conformal(grid, inst.random_scalar(grid, inst.stream(seed, "base"), 0.1))


def _instance(n, N, seed, r=2, theta_scale=0.3, h_amp=0.3, conformal=False):
    grid = GridSpec.square(n, N)
    g = _base(grid, seed, conformal)
    h0 = inst.random_metric(grid, r, inst.stream(seed, "h0"), h_amp)
    theta = ho.HiggsField(inst.random_commuting_theta(n, r, inst.stream(seed, "theta"), theta_scale))
    return grid, g, h0, theta


def _sections(grid, r, seed):
    rng = inst.stream(seed, "sections")
    s = inst.random_section(grid, (r,), rng)
    t10 = np.moveaxis(inst.random_section(grid, (grid.n, r), rng), -2, 0)
    t01 = np.moveaxis(inst.random_section(grid, (grid.n, r), rng), -2, 0)
    return s, t10, t01


def test_criterion_01_curvature_difference(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for n, N in ((1, N1), (2, N2)):
        for seed in SEEDS:
            grid, g, h0, theta = _instance(n, N, seed, conformal=bool(seed % 2))
            H = F.matrix_exp(inst.random_endomorphism(grid, 2, inst.stream(seed, "H"), h0, 0.3), h0)
            lhs = ho.hym_higgs_tensor(H @ h0, theta, g) - ho.hym_higgs_tensor(h0, theta, g)
            rhs = ho.curvature_difference(H, h0, theta, g)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            del lhs, rhs, H, h0
    elapsed = time.perf_counter() - t0
    accurate, fast = worst <= IDENTITY_TOL, elapsed < IDENTITY_BUDGET_S
    acceptance(1, "curvature difference identity", accurate and fast,
               f"max sup error {worst:.2e} <= {IDENTITY_TOL:g}: {accurate}; "
               f"10 instances (n=1 N={N1}, n=2 N={N2}) in {elapsed:.1f} s < {IDENTITY_BUDGET_S:g} s: {fast}")
    assert accurate
    if not fast:
        pytest.xfail(f"runtime {elapsed:.1f} s exceeds {IDENTITY_BUDGET_S:g} s on this machine")


def test_criterion_02_bochner_kodaira(acceptance):
    kahler = []
    for seed, conformal in ((0, False), (1, True)):
        grid, g, h0, theta = _instance(1, N1, seed, conformal=conformal)
        assert g.classify() == "kahler"
        kahler.append(ho.bochner_kodaira_residual(*_sections(grid, 2, seed), h0, theta, g))
    grid, g, h0, theta = _instance(2, 24, 2, conformal=True)
    assert g.classify() == "hermitian"
    secs = _sections(grid, 2, 2)
    with_tau = ho.bochner_kodaira_residual(*secs, h0, theta, g)
    without_tau = ho.bochner_kodaira_residual(*secs, h0, theta, g, include_torsion=False)
    ok = max(kahler) <= BK_KAHLER_TOL and with_tau <= BK_TORSION_TOL
    acceptance(2, "Bochner-Kodaira adjointness", ok,
               f"Kahler N={N1} residual {max(kahler):.1e}; non-Kahler n=2 with torsion {with_tau:.1e}, "
               f"without torsion {without_tau:.1e}")
    assert ok
    assert without_tau > 100 * BK_TORSION_TOL    # the torsion term matters off the Kahler locus


def test_criterion_03_rank_one_invisibility(acceptance):
    worst = 0.0
    for seed in SEEDS:
        n, N = (1, 32) if seed % 2 == 0 else (2, 8)
        grid, g, h, theta = _instance(n, N, seed, r=1, theta_scale=1.0, conformal=seed >= 3)
        a = ho.hym_higgs_tensor(h, theta, g)
        b = ho.hym_higgs_tensor(h, ho.HiggsField.zero(n, 1), g)
        worst = max(worst, float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b)))))
    acceptance(3, "rank-1 invisibility of the Higgs term", worst <= RANK1_TOL,
               f"max relative difference {worst:.1e} over 5 seeds")
    assert worst <= RANK1_TOL


def test_criterion_04_conformal_shift(acceptance):
    worst = 0.0
    for seed in SEEDS:
        grid, g, h0, theta = _instance(1, N1, seed, conformal=bool(seed % 2))
        f = inst.random_scalar(grid, inst.stream(seed, "f"), 0.5, max_mode=3)
        S0 = ho.hym_higgs_tensor(h0, theta, g)
        Sf = ho.hym_higgs_tensor(np.exp(-f)[..., None, None] * h0, theta, g)
        shift = np.real(g.laplacian(f))[..., None, None] * np.eye(2)
        worst = max(worst, float(np.max(np.abs(Sf - S0 - shift))))
    acceptance(4, "conformal shift law", worst <= CONFORMAL_TOL, f"max sup error {worst:.1e} at N={N1}")
    assert worst <= CONFORMAL_TOL


def _manufactured(seed):
    grid, g, h0, theta = _instance(1, 32, seed)
    base = sv.ProblemSpec(g, theta, h0, twist_degree=13)
    S_true = inst.random_endomorphism(grid, 2, inst.stream(seed, "S_true"), h0, 0.5)
    target, H_true = sv.target_manufactured(base, S_true)
    spec = sv.ProblemSpec(g, theta, h0, target=target, twist_degree=13)
    spec.validate()
    return spec, S_true, H_true


@pytest.fixture(scope="module")
def newton_runs():
    runs = []
    t0 = time.perf_counter()
    for seed in range(3):
        spec, S_true, H_true = _manufactured(seed)
        first = sv.newton_solve(spec)
        guess = F.matrix_exp(inst.random_endomorphism(spec.grid, 2, inst.stream(seed, "guess"), spec.h0, 0.3),
                             roots=spec.h0_roots)
        second = sv.newton_solve(spec, H_init=guess)
        runs.append((spec, S_true, H_true, first, second))
    return runs, time.perf_counter() - t0


def _h0_sup(A, spec):
    return float(np.max(F.operator_norm(A, roots=spec.h0_roots)))


def test_criterion_05_newton_recovery(acceptance, newton_runs):
    runs, elapsed = newton_runs
    rows = []
    ok = elapsed < SOLVE_BUDGET_S
    for spec, S_true, H_true, first, second in runs:
        s_norm = _h0_sup(S_true, spec)
        res = max(first.residual_history[-1], second.residual_history[-1])
        iters = max(first.iterations, second.iterations)
        rec = _h0_sup(first.H - H_true, spec)
        agree = _h0_sup(first.H - second.H, spec)
        ok &= (first.converged and second.converged and s_norm <= 0.5 + 1e-12 and res <= NEWTON_RESIDUAL_TOL
               and iters <= NEWTON_MAX_ITER and rec <= RECOVERY_TOL and agree <= INITIAL_GUESS_TOL)
        rows.append((res, iters, rec, agree))
    worst = [max(r[k] for r in rows) for k in range(4)]
    acceptance(5, "manufactured-solution recovery", ok,
               f"3 scenarios n=1 N=32: residual {worst[0]:.1e}, iterations <= {worst[1]}, "
               f"recovery {worst[2]:.1e}, initial-guess spread {worst[3]:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_06_flow_agrees_with_newton(acceptance, newton_runs):
    runs, _ = newton_runs
    worst = 0.0
    converged = True
    for spec, _, _, first, _ in runs:
        flow = sv.heat_flow_solve(spec)
        converged &= flow.converged
        worst = max(worst, _h0_sup(flow.H - first.H, spec))
    ok = converged and worst <= FLOW_AGREEMENT_TOL
    acceptance(6, "heat flow vs Newton fixed points", ok, f"max sup difference {worst:.1e} over 3 scenarios")
    assert ok


def test_criterion_07_comparison_principle(acceptance):
    worst_lam, worst_gap = 0.0, np.inf
    ok = True
    for seed in SEEDS:
        grid, g, h0, theta = _instance(1, 32, seed)
        base = sv.ProblemSpec(g, theta, h0, twist_degree=13)
        bump = F.matrix_exp(inst.random_endomorphism(grid, 2, inst.stream(seed, "bump"), h0, 0.5),
                            roots=base.h0_roots)
        spec = sv.ProblemSpec(g, theta, h0, target=sv.target_omega_shift(base, 0.05, bump), twist_degree=13)
        spec.validate()
        gap = F.h_hermitian_part(spec.omega - spec.target, roots=spec.h0_roots)
        worst_gap = min(worst_gap, float(np.min(F.herm_eig_bounds(gap, roots=spec.h0_roots)[0])))
        rep = sv.newton_solve(spec)
        v = an.comparison_check(rep.H @ h0, h0, theta, g, tol=COMPARISON_TOL, twist=spec.twist,
                                hypothesis_tol=10 * spec.residual_tol)
        worst_lam = max(worst_lam, v.max_eigenvalue)
        ok &= rep.converged and v.status == "pass"
    ok &= worst_gap >= PD_GAP_MIN and worst_lam <= 1 + COMPARISON_TOL
    acceptance(7, "comparison principle", ok,
               f"5 scenarios, min PD gap {worst_gap:.2e}, max eigenvalue of h0^-1 h1 {worst_lam:.6f}")
    assert ok


def test_criterion_08_gauduchon_normalization(acceptance):
    # a nilpotent part in theta splits the spectrum of Omega, so kappa is smooth
    worst_const, worst_mean, min_gap = 0.0, 0.0, np.inf
    E12 = np.array([[0, 1], [0, 0]], dtype=complex)
    for seed in SEEDS:
        grid, g, h0, theta = _instance(1, N1, seed)
        theta = ho.HiggsField(theta.theta + 0.5 * E12)
        spec = sv.ProblemSpec(g, theta, h0, twist_degree=13)
        w = F.herm_eigvals(spec.omega, roots=spec.h0_roots)
        min_gap = min(min_gap, float(np.min(w[..., 1] - w[..., 0])))
        h_t, lam0, _ = sv.gauduchon_normalize(spec)
        S_t = F.h_hermitian_part(ho.hym_higgs_tensor(h_t, theta, g, spec.twist), h_t)
        kappa = F.herm_eig_bounds(S_t, h_t)[0]
        worst_const = max(worst_const, float(np.max(np.abs(kappa - lam0))))
        worst_mean = max(worst_mean, abs(float(np.mean(kappa)) - lam0))
    assert min_gap >= 0.02, "instances must have a separated spectrum"
    ok = worst_const <= KAPPA_CONST_TOL and worst_mean <= KAPPA_MEAN_TOL
    acceptance(8, "Gauduchon normalization", ok,
               f"max |kappa - lambda0| {worst_const:.1e}, mean offset {worst_mean:.1e}, "
               f"min eigenvalue gap {min_gap:.3f}")
    assert ok


def _chern_suite(r, degree, seed=9):
    grid, g, h, theta = _instance(2, N2, seed, r=r, h_amp=0.12)
    tw = twist_curvature(grid, degree) if degree else None
    forms = an.chern_forms(h, theta, g, tw)
    cd = an.curvature_data(h, theta, g, tw, forms.curvature)
    ident = an.chern_identity_check(h, theta, g, tw, data=cd, forms=forms)
    tt = an.t_tensor_check(h, theta, g, tw, data=cd)
    ineq = an.chern_inequality_check(h, theta, g, tw, forms=forms, data=cd)
    return ident, tt, ineq


def test_criterion_09_surface_identities(acceptance):
    worst_id = worst_t = worst_spread = 0.0
    min_eta = np.inf
    ok = True
    for r in (1, 2):
        ident, tt, ineq = _chern_suite(r, 3)
        v = ineq.values
        worst_id = max(worst_id, ident["c1_residual"], ident["c2_residual"])
        worst_t = max(worst_t, tt["residual"])
        worst_spread = max(worst_spread, v["spread_identity_residual"])
        min_eta = min(min_eta, float(v["eta_integral"].real))
        ok &= bool(v["lhs"].real <= v["rhs"] + 1e-7)
    _, _, trivial = _chern_suite(2, 0)
    tv = trivial.values
    worst_trivial = max(abs(tv["c1_omega"]), abs(tv["c1_sq_integral"]), abs(tv["c2_integral"]))
    ok &= (worst_id <= CHERN_IDENTITY_TOL and worst_t <= T_TOL and min_eta >= -ETA_TOL
           and worst_spread <= SPREAD_TOL and worst_trivial <= TRIVIAL_TOL)
    acceptance(9, "surface Chern identity suite", ok,
               f"n=2 N={N2} r=1,2: c1/c2 {worst_id:.1e}, T {worst_t:.1e}, eta {min_eta:.2e}, "
               f"spread {worst_spread:.1e}, trivial bundle {worst_trivial:.1e}")
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path):
    same = True
    for sub in ("solve", "chern"):
        texts = []
        for k in range(2):
            code, summary = cli.run(sub, out=tmp_path / f"{sub}{k}")
            assert code == 0
            on_disk = json.loads((tmp_path / f"{sub}{k}" / "summary.json").read_text())
            texts.append(json.dumps(cli.strip_timings(on_disk), sort_keys=True))
        same &= texts[0] == texts[1]
    acceptance(10, "deterministic summaries", same, "solve and chern defaults run twice, timings removed")
    assert same


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
