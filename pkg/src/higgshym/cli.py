"""Command-line entry point: ``higgshym <subcommand> --config FILE``.

Exit status: 0 all verdicts pass, 1 a verdict fails, 2 configuration error,
3 a mathematical hypothesis is violated, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import fields as F
from . import higgs_ops as ho
from . import instances as inst
from . import solver as sv
from .config import SUBCOMMANDS, ScenarioConfig, from_dict, load, parse_terms, tomllib
from .errors import ConfigError, GridMismatchError, HiggsHYMError, HypothesisError, NotHermitianError
from .fieldio import write_field
from .geometry import twist_curvature
from .grid import trig_polynomial

SCHEMA_VERSION = 1
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERICAL = range(5)

log = logging.getLogger("higgshym")


@dataclass
class Result:
    values: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)   # file name -> (header, rows)
    fields: dict = field(default_factory=dict)   # file stem -> array
    timings: dict = field(default_factory=dict)
    failure: str | None = None                   # numerical failure message


def _verdict(res: Result, name: str, value: float, tol: float) -> None:
    res.values[name] = value
    res.verdicts[name] = bool(np.isfinite(value) and value <= tol)


# ---------------------------------------------------------------------------
# shared construction


def build_instance(cfg: ScenarioConfig) -> tuple:
    """``(g, theta, h0)``; invalid inputs surface as configuration errors."""
    try:
        return cfg.base_metric(), cfg.theta(), cfg.h0()
    except (GridMismatchError, NotHermitianError, ValueError) as e:
        raise ConfigError(str(e)) from e


def build_spec(cfg: ScenarioConfig, recipe_default: str | None = None) -> tuple[sv.ProblemSpec, np.ndarray | None]:
    """``ProblemSpec`` for the configured target recipe, plus the exact ``H`` if known."""
    g, theta, h0 = build_instance(cfg)
    s = cfg.table("solver")
    opts = {k: s[k] for k in ("residual_tol", "newton_max_iter", "krylov_tol", "krylov_maxiter") if k in s}
    try:
        spec = sv.ProblemSpec(g, theta, h0, twist_degree=cfg.twist_degree, **opts)
    except (NotHermitianError, ValueError) as e:
        raise ConfigError(str(e)) from e
    recipe = cfg.recipe or recipe_default
    H_true = None
    if recipe == "file":
        target = cfg.target_file()
    elif recipe == "conformal":
        f = cfg.target_scalar("conformal")
        target = sv.target_conformal(spec, f)
        H_true = np.exp(-f)[..., None, None] * spec.identity()
    elif recipe == "manufactured":
        t = cfg.raw["target"]["manufactured"]
        if "terms" in t:
            B = trig_polynomial(cfg.grid, parse_terms(t["terms"], cfg.grid, cfg.rank,
                                                      "target.manufactured.terms"), (cfg.rank, cfg.rank))
            S_true = F.from_symmetric_frame(F.hermitian_part(B), roots=spec.h0_roots)
        else:
            S_true = inst.random_endomorphism(cfg.grid, cfg.rank, inst.stream(cfg.seed, "S_true"), h0,
                                              float(t.get("amplitude", 0.5)))
        target, H_true = sv.target_manufactured(spec, S_true)
    elif recipe == "omega-shift":
        t = cfg.raw.get("target", {}).get("omega-shift", cfg.table("compare"))
        target = sv.target_omega_shift(spec, float(t.get("eps", 0.05)), _bump(cfg, spec, t))
    else:
        target = None
    if target is not None:
        try:
            spec = sv.ProblemSpec(g, theta, h0, target=target, twist_degree=cfg.twist_degree, **opts)
        except (GridMismatchError, NotHermitianError, ValueError) as e:
            raise ConfigError(str(e)) from e
    return spec, H_true


def _bump(cfg: ScenarioConfig, spec: sv.ProblemSpec, t: dict) -> np.ndarray:
    amp = float(t.get("bump_amplitude", 0.0))
    if amp == 0:
        return spec.identity()
    B = inst.random_endomorphism(cfg.grid, cfg.rank, inst.stream(cfg.seed, "bump"), spec.h0, amp)
    return F.matrix_exp(B, roots=spec.h0_roots)


def _h0_error(A: np.ndarray, B: np.ndarray, spec: sv.ProblemSpec) -> float:
    """``sup |A - B|`` in the ``h0`` operator norm."""
    return float(np.max(F.operator_norm(A - B, roots=spec.h0_roots)))


def _history_table(rep: sv.SolveReport) -> tuple:
    alphas = rep.diagnostics.get("alpha", [])
    kry = rep.diagnostics.get("krylov_iterations", [])
    rows = []
    for k, r in enumerate(rep.residual_history):
        a = alphas[k - 1] if 0 < k <= len(alphas) else ""
        it = kry[k - 1] if 0 < k <= len(kry) else ""
        rows.append([k, repr(float(r)), a, it])
    return ["iteration", "residual", "alpha", "krylov_iterations"], rows


def _solve_fields(res: Result, rep: sv.SolveReport, spec: sv.ProblemSpec) -> None:
    res.fields["H"] = rep.H
    res.fields["h"] = rep.H @ spec.h0
    res.fields["residual"] = sv.residual(rep.H, spec)


# ---------------------------------------------------------------------------
# pipelines


def run_solve(cfg: ScenarioConfig) -> Result:
    res = Result()
    spec, H_true = build_spec(cfg)
    spec.validate()
    rep = sv.newton_solve(spec)
    res.timings["newton"] = rep.wall_time
    res.values["solve"] = rep.summary()
    res.verdicts["converged"] = bool(rep.converged)
    if not rep.converged:
        res.failure = f"Newton iteration did not converge: {rep.message}"
    if H_true is not None:
        _verdict(res, "recovery_error", _h0_error(rep.H, H_true, spec), float(cfg.get("solver", "recovery_tol", 1e-6)))
    res.tables["residuals.csv"] = _history_table(rep)
    _solve_fields(res, rep, spec)
    return res


def run_flow(cfg: ScenarioConfig) -> Result:
    res = Result()
    spec, H_true = build_spec(cfg)
    spec.validate()
    t = cfg.table("flow")
    rep = sv.heat_flow_solve(spec, dt=t.get("dt"), max_steps=int(t.get("max_steps", 20000)),
                             dt_min=float(t.get("dt_min", 1e-8)))
    res.timings["flow"] = rep.wall_time
    summ = rep.summary()
    summ["residual_history"] = summ["residual_history"][-1:]
    summ["dt_halvings"] = len(rep.diagnostics["dt_halvings"])
    res.values["flow"] = summ
    res.verdicts["converged"] = bool(rep.converged)
    if not rep.converged:
        res.failure = f"heat flow did not converge: {rep.message}"
    if H_true is not None:
        _verdict(res, "recovery_error", _h0_error(rep.H, H_true, spec), float(cfg.get("solver", "recovery_tol", 1e-6)))
    if t.get("compare_newton", True):
        nrep = sv.newton_solve(spec)
        res.timings["newton"] = nrep.wall_time
        if not nrep.converged:
            res.failure = f"Newton iteration did not converge: {nrep.message}"
        _verdict(res, "newton_agreement", _h0_error(rep.H, nrep.H, spec), float(t.get("agreement_tol", 1e-6)))
    hist = rep.residual_history
    res.tables["residuals.csv"] = (["step", "residual"], [[k, repr(float(r))] for k, r in enumerate(hist)])
    _solve_fields(res, rep, spec)
    return res


def run_compare(cfg: ScenarioConfig) -> Result:
    res = Result()
    spec, _ = build_spec(cfg, recipe_default="omega-shift")
    spec.validate()
    rep = sv.newton_solve(spec)
    res.timings["newton"] = rep.wall_time
    res.values["solve"] = rep.summary()
    res.verdicts["converged"] = bool(rep.converged)
    if not rep.converged:
        res.failure = f"Newton iteration did not converge: {rep.message}"
        return res
    tol = float(cfg.get("compare", "tol", 1e-6))
    h1 = rep.H @ spec.h0
    v = an.comparison_check(h1, spec.h0, spec.theta, spec.g, tol=tol, twist=spec.twist,
                            hypothesis_tol=10 * spec.residual_tol)
    res.values["comparison"] = v.summary()
    if v.status == "hypothesis-not-met":
        raise HypothesisError("P≤Ω", f"min eigenvalue of Omega - P is {v.hypothesis_margin:.3e}")
    res.verdicts["comparison"] = v.status == "pass"
    res.tables["residuals.csv"] = _history_table(rep)
    _solve_fields(res, rep, spec)
    res.fields["kappa"] = v.kappa
    return res


def run_verify(cfg: ScenarioConfig) -> Result:
    res = Result()
    t = cfg.table("verify")
    g, theta, h0 = build_instance(cfg)
    grid, r = cfg.grid, cfg.rank
    twist = twist_curvature(grid, cfg.twist_degree) if cfg.twist_degree else None
    res.values["base_metric_class"] = g.classify()
    B = inst.random_endomorphism(grid, r, inst.stream(cfg.seed, "H"), h0, float(t.get("H_amplitude", 0.3)))
    H = F.matrix_exp(B, h0)
    h = H @ h0
    S0 = ho.hym_higgs_tensor(h0, theta, g, twist)
    S1 = ho.hym_higgs_tensor(h, theta, g, twist)

    diff = ho.curvature_difference(H, h0, theta, g)
    _verdict(res, "curvature_difference", float(np.max(np.abs(S1 - S0 - diff))),
             float(t.get("curvature_difference_tol", 1e-7)))
    ft = np.max(np.abs(ho.f_theta(H, h0, theta, g, "direct") - ho.f_theta(H, h0, theta, g, "expanded")))
    _verdict(res, "f_theta_paths", float(ft), float(t.get("f_theta_tol", 1e-10)))
    _verdict(res, "adjoint_transform", ho.adjoint_transform_check(theta, h0, h), float(t.get("adjoint_tol", 1e-12)))
    _verdict(res, "tensor_hermitian", F.hermitian_defect(S1 @ h), float(t.get("hermitian_tol", 1e-10)))

    f = inst.random_scalar(grid, inst.stream(cfg.seed, "conformal"), 0.3)
    Sf = ho.hym_higgs_tensor(np.exp(-f)[..., None, None] * h0, theta, g, twist)
    lap = np.real(g.laplacian(f))[..., None, None] * np.eye(r)
    _verdict(res, "conformal_shift", float(np.max(np.abs(Sf - S0 - lap))),
             float(t.get("conformal_shift_tol", 1e-8)))
    if r == 1:
        S_free = ho.hym_higgs_tensor(h0, ho.HiggsField.zero(grid.n, 1), g, twist)
        _verdict(res, "rank1_invisibility", float(np.max(np.abs(S0 - S_free))), float(t.get("rank1_tol", 1e-12)))

    rng = inst.stream(cfg.seed, "sections")
    s = inst.random_section(grid, (r,), rng)
    t10 = np.moveaxis(inst.random_section(grid, (grid.n, r), rng), -2, 0)
    t01 = np.moveaxis(inst.random_section(grid, (grid.n, r), rng), -2, 0)
    _verdict(res, "bochner_kodaira", ho.bochner_kodaira_residual(s, t10, t01, h0, theta, g),
             float(t.get("bochner_kodaira_tol", 1e-7)))
    res.values["bochner_kodaira_without_torsion"] = ho.bochner_kodaira_residual(
        s, t10, t01, h0, theta, g, include_torsion=False)
    if theta.is_integrable:
        R = ho.full_higgs_curvature(h, theta, g, twist)
        _verdict(res, "curvature_adjoint", ho.curvature_adjoint_residual(R, h),
                 float(t.get("curvature_adjoint_tol", 1e-10)))
        S_R = g.lambda_contract(R.get("zzb"))
        _verdict(res, "curvature_trace", float(np.max(np.abs(S_R - S1))),
                 float(t.get("curvature_difference_tol", 1e-7)))
    rows = [[k, repr(float(res.values[k])), res.verdicts[k]] for k in res.verdicts]
    res.tables["identities.csv"] = (["check", "residual", "pass"], rows)
    res.fields["S"] = S1
    return res


def run_chern(cfg: ScenarioConfig) -> Result:
    res = Result()
    t = cfg.table("chern")
    g, theta, h0 = build_instance(cfg)
    twist = twist_curvature(cfg.grid, cfg.twist_degree) if cfg.twist_degree else None
    t0 = time.perf_counter()
    forms = an.chern_forms(h0, theta, g, twist)
    cd = an.curvature_data(h0, theta, g, twist, forms.curvature)
    ident = an.chern_identity_check(h0, theta, g, twist, data=cd, forms=forms)
    tt = an.t_tensor_check(h0, theta, g, twist, data=cd)
    ineq = an.chern_inequality_check(h0, theta, g, twist, forms=forms, data=cd)
    res.timings["chern"] = time.perf_counter() - t0
    res.values["identities"] = ident
    res.values["t_tensor"] = {"residual": tt["residual"], "scale": tt["scale"]}
    res.values["inequality"] = ineq.summary()
    itol = float(t.get("identity_tol", 1e-6))
    _verdict(res, "c1_identity", ident["c1_residual"], itol)
    _verdict(res, "c2_identity", ident["c2_residual"], itol)
    _verdict(res, "t_identity", tt["residual"], float(t.get("t_tol", 1e-9)))
    _verdict(res, "spread_identity", ineq.values["spread_identity_residual"], float(t.get("spread_tol", 1e-12)))
    res.verdicts["eta_nonnegative"] = bool(ineq.values["eta_integral"].real >= -float(t.get("eta_tol", 1e-9)))
    res.verdicts["inequality"] = bool(ineq.values["lhs"].real <= ineq.values["rhs"]
                                      + float(t.get("inequality_tol", 1e-7)))
    res.verdicts["spread"] = bool(ineq.verdicts["spread"])
    if cfg.twist_degree == 0:
        trivial = max(abs(ineq.values["c1_sq_integral"]), abs(ineq.values["c2_integral"]),
                      abs(ineq.values["c1_omega"]))
        _verdict(res, "trivial_bundle_integrals", float(trivial), 1e-7)
    if t.get("eigen_csv", False):
        lam = F.herm_eigvals(cd.S_sym).reshape(-1, cfg.rank)
        res.tables["eigenvalues.csv"] = (["point"] + [f"lambda{i}" for i in range(cfg.rank)],
                                         [[k] + [repr(float(x)) for x in row] for k, row in enumerate(lam)])
    return res


PIPELINES = {"solve": run_solve, "verify-identities": run_verify, "compare": run_compare,
             "chern": run_chern, "flow": run_flow}


# ---------------------------------------------------------------------------
# reporting


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(float(v.real)), _jsonable(float(v.imag))]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def exit_code(res: Result) -> int:
    if res.failure:
        return EXIT_NUMERICAL
    return EXIT_PASS if all(res.verdicts.values()) else EXIT_FAIL


def write_outputs(out: Path, summary: dict, res: Result | None, cfg: ScenarioConfig | None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True,
                                                 ensure_ascii=False) + "\n", encoding="utf-8")
    if res is None or cfg is None:
        return
    o = cfg.table("output")
    if o.get("csv", True):
        for name, (header, rows) in res.tables.items():
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
    if o.get("dump_fields", False):
        for name, f in res.fields.items():
            write_field(out / f"{name}.hymf", f, cfg.grid)


def default_config(subcommand: str) -> dict:
    name = subcommand.replace("-", "_") + ".toml"
    text = resources.files("higgshym").joinpath("configs", name).read_text(encoding="utf-8")
    return tomllib.loads(text)


def run(subcommand: str, config_path=None, out=None, seed: int | None = None,
        grid_n: int | None = None) -> tuple[int, dict]:
    """Execute one scenario; returns ``(exit status, summary)`` and writes reports to ``out``."""
    t0 = time.perf_counter()
    summary = {"schema_version": SCHEMA_VERSION, "version": __version__, "subcommand": subcommand,
               "values": {}, "verdicts": {}, "error": None}
    cfg = res = None
    try:
        if config_path is None:
            cfg = from_dict(default_config(subcommand), subcommand, seed, grid_n)
        else:
            cfg = load(config_path, subcommand, seed, grid_n)
        summary.update(seed=cfg.seed, config=cfg.raw,
                       grid={"n": cfg.grid.n, "N": cfg.grid.N, "periods": list(cfg.grid.periods)},
                       rank=cfg.rank, twist_degree=cfg.twist_degree)
        res = PIPELINES[subcommand](cfg)
        code = exit_code(res)
        if res.failure:
            summary["error"] = {"kind": "numerical", "message": res.failure}
        summary.update(values=res.values, verdicts=res.verdicts)
    except ConfigError as e:
        code, summary["error"] = EXIT_CONFIG, {"kind": "config", "message": str(e)}
    except HypothesisError as e:
        code = EXIT_HYPOTHESIS
        summary["error"] = {"kind": "hypothesis", "hypothesis": e.hypothesis, "message": str(e)}
    except (HiggsHYMError, FloatingPointError, np.linalg.LinAlgError) as e:
        # anything past construction is a breakdown of the numerics
        code, summary["error"] = EXIT_NUMERICAL, {"kind": "numerical", "message": str(e)}
    summary["status"] = "pass" if code == EXIT_PASS else "fail"
    summary["exit_code"] = code
    summary["timings"] = dict(res.timings if res else {}, total=time.perf_counter() - t0)
    if out is not None:
        write_outputs(Path(out), summary, res, cfg)
    return code, summary


def strip_timings(summary: dict) -> dict:
    """Copy of a summary without the timing fields (for determinism checks)."""
    return {k: v for k, v in summary.items() if k != "timings"}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="higgshym", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="scenario TOML file (default: the built-in example)")
    p.add_argument("--out", type=Path, help="output directory for summary.json, CSV and field dumps")
    p.add_argument("--seed", type=_u64, help="override the scenario seed")
    p.add_argument("--grid-n", type=int, help="override grid points per axis")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    code, summary = run(args.subcommand, args.config, args.out, args.seed, args.grid_n)
    line = {"subcommand": args.subcommand, "status": summary["status"], "exit_code": code,
            "verdicts": summary.get("verdicts", {})}
    if summary["error"]:
        line["error"] = summary["error"]
    print(json.dumps(_jsonable(line), ensure_ascii=False))
    return code


if __name__ == "__main__":
    sys.exit(main())
