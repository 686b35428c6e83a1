"""Scenario configuration: TOML parsing, validation and instance construction.

A scenario file has the tables ``grid``, ``base_metric``, ``bundle``,
``h0``, ``target``, ``solver`` plus one optional table per subcommand
(``verify``, ``compare``, ``chern``, ``flow``) and ``output``.  Every table
is optional except ``grid`` and ``bundle``.  Complex entries may be written
as numbers, ``[re, im]`` pairs or strings such as ``"0.3-0.1j"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import fields as F
from . import instances as inst
from .errors import ConfigError
from .fieldio import read_field
from .geometry import BaseMetric
from .grid import GridSpec, trig_polynomial
from .higgs_ops import HiggsField

SUBCOMMANDS = ("solve", "verify-identities", "compare", "chern", "flow")
RECIPES = ("file", "conformal", "manufactured", "omega-shift")

_ALLOWED = {
    "": {"subcommand", "seed", "grid", "base_metric", "bundle", "h0", "target", "solver",
         "verify", "compare", "chern", "flow", "output"},
    "grid": {"n", "N", "periods"},
    "base_metric": {"family", "G", "terms", "amplitude"},
    "bundle": {"rank", "twist_degree", "theta", "theta_random"},
    "h0": {"family", "terms", "amplitude"},
    "target": set(RECIPES),
    "solver": {"residual_tol", "newton_max_iter", "krylov_tol", "krylov_maxiter", "recovery_tol"},
    "verify": {"H_amplitude", "curvature_difference_tol", "f_theta_tol", "adjoint_tol",
               "bochner_kodaira_tol", "conformal_shift_tol", "rank1_tol", "hermitian_tol",
               "curvature_adjoint_tol"},
    "compare": {"tol", "eps", "bump_amplitude"},
    "chern": {"identity_tol", "t_tol", "eta_tol", "inequality_tol", "spread_tol", "eigen_csv"},
    "flow": {"dt", "max_steps", "dt_min", "compare_newton", "agreement_tol"},
    "output": {"dump_fields", "csv"},
    "target.file": {"path"},
    "target.conformal": {"terms", "amplitude"},
    "target.manufactured": {"terms", "amplitude"},
    "target.omega-shift": {"eps", "bump_amplitude"},
}


# ---------------------------------------------------------------------------
# value parsing


def parse_complex(v, where: str = "value") -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        s = v.replace(" ", "")
        for cand in (s, s.replace("i", "j")):
            try:
                return complex(cand)
            except ValueError:
                pass
    raise ConfigError(f"{where}: cannot read {v!r} as a complex number")


def parse_matrix(v, r: int | None = None, where: str = "matrix") -> np.ndarray:
    """A list of rows; scalars are accepted as ``v * Id`` when ``r`` is known."""
    if r is not None and not isinstance(v, list):
        return parse_complex(v, where) * np.eye(r, dtype=complex)
    if (not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v)
            or len({len(row) for row in v}) != 1):
        raise ConfigError(f"{where}: expected a list of equal-length rows")
    m = np.array([[parse_complex(x, where) for x in row] for row in v], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (r is not None and m.shape[0] != r):
        raise ConfigError(f"{where}: expected a square {r or ''} matrix, got shape {m.shape}")
    return m


def parse_terms(terms, grid: GridSpec, r: int | None, where: str) -> list:
    """Trig-polynomial terms with scalar (``r=None``) or matrix coefficients."""
    if not isinstance(terms, list):
        raise ConfigError(f"{where}: terms must be a list of tables")
    out = []
    for k, t in enumerate(terms):
        w = f"{where}[{k}]"
        if not isinstance(t, dict) or "mode" not in t or set(t) - {"mode", "cos", "sin"}:
            raise ConfigError(f"{w}: each term needs 'mode' and optional 'cos'/'sin'")
        mode = t["mode"]
        if not isinstance(mode, list) or len(mode) != grid.ndim or not all(isinstance(m, int) for m in mode):
            raise ConfigError(f"{w}: mode must list {grid.ndim} integers")
        term = {"mode": tuple(mode)}
        for key in ("cos", "sin"):
            if key in t:
                term[key] = parse_complex(t[key], w) if r is None else parse_matrix(t[key], r, w)
        out.append(term)
    return out


# ---------------------------------------------------------------------------
# scenario


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``raw`` keeps the parsed tables."""

    subcommand: str
    seed: int
    grid: GridSpec
    rank: int
    twist_degree: int
    raw: dict
    base_dir: Path = field(default=Path("."))

    def table(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def get(self, table: str, key: str, default):
        return self.raw.get(table, {}).get(key, default)

    @property
    def recipe(self) -> str | None:
        t = self.raw.get("target", {})
        return next(iter(t)) if t else None

    # ---- instance construction --------------------------------------------

    def base_metric(self) -> BaseMetric:
        t = self.table("base_metric")
        family = t.get("family", "flat")
        G0 = parse_matrix(t["G"], self.grid.n, "base_metric.G") if "G" in t else None
        try:
            if family == "flat":
                return BaseMetric.flat(self.grid, G0)
            if family == "conformal":
                if "terms" in t:
                    u = np.real(trig_polynomial(self.grid, parse_terms(t["terms"], self.grid, None,
                                                                       "base_metric.terms")))
                else:
                    u = inst.random_scalar(self.grid, inst.stream(self.seed, "base_metric"),
                                           float(t.get("amplitude", 0.1)))
                return BaseMetric.conformal(self.grid, u, G0)
        except ValueError as e:
            raise ConfigError(f"base_metric: {e}") from e
        raise ConfigError(f"base_metric.family must be 'flat' or 'conformal', got {family!r}")

    def theta(self) -> HiggsField:
        t = self.table("bundle")
        n, r = self.grid.n, self.rank
        if "theta" in t and "theta_random" in t:
            raise ConfigError("bundle: give either theta or theta_random, not both")
        if "theta_random" in t:
            th = inst.random_commuting_theta(n, r, inst.stream(self.seed, "theta"), float(t["theta_random"]))
        elif "theta" in t:
            mats = t["theta"]
            if not isinstance(mats, list) or len(mats) != n:
                raise ConfigError(f"bundle.theta must list {n} matrices")
            th = np.stack([parse_matrix(m, r, f"bundle.theta[{i}]") for i, m in enumerate(mats)])
        else:
            th = np.zeros((n, r, r), dtype=complex)
        return HiggsField(th)

    def h0(self) -> np.ndarray:
        t = self.table("h0")
        family = t.get("family", "identity")
        r = self.rank
        if family == "identity":
            return F.identity_field(self.grid.shape, r)
        if family == "exp_trig":
            B = trig_polynomial(self.grid, parse_terms(t.get("terms", []), self.grid, r, "h0.terms"), (r, r))
            if F.hermitian_defect(B) > 1e-12:
                raise ConfigError("h0.terms must have Hermitian coefficients")
            return F.matrix_exp(F.hermitian_part(B))
        if family == "random":
            return inst.random_metric(self.grid, r, inst.stream(self.seed, "h0"), float(t.get("amplitude", 0.3)))
        raise ConfigError(f"h0.family must be 'identity', 'exp_trig' or 'random', got {family!r}")

    def target_scalar(self, key: str) -> np.ndarray:
        t = self.raw["target"][key]
        if "terms" in t:
            return np.real(trig_polynomial(self.grid, parse_terms(t["terms"], self.grid, None,
                                                                  f"target.{key}.terms")))
        return inst.random_scalar(self.grid, inst.stream(self.seed, "target"), float(t.get("amplitude", 0.3)))

    def target_file(self) -> np.ndarray:
        path = self.base_dir / self.raw["target"]["file"]["path"]
        f, _ = read_field(path, self.grid)
        if f.shape != self.grid.shape + (self.rank, self.rank):
            raise ConfigError(f"target file {path} holds shape {f.shape}, expected rank {self.rank}")
        return f


def _check_keys(d: dict, table: str) -> None:
    extra = set(d) - _ALLOWED[table]
    if extra:
        raise ConfigError(f"unknown key(s) in [{table or 'top level'}]: {', '.join(sorted(extra))}")


def _int(v, where: str, lo: int = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{where} must be an integer >= {lo}, got {v!r}")
    return v


def from_dict(raw: dict, subcommand: str, seed: int | None = None, grid_n: int | None = None,
              base_dir: Path = Path(".")) -> ScenarioConfig:
    """Validate ``raw`` and apply command-line overrides."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    _check_keys(raw, "")
    for name in _ALLOWED[""] - {"subcommand", "seed"}:
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(raw[name], name)
    if raw.get("subcommand", subcommand) != subcommand:
        raise ConfigError(f"config is for {raw['subcommand']!r}, not {subcommand!r}")
    target = raw.get("target", {})
    if len(target) > 1:
        raise ConfigError(f"target recipes are mutually exclusive, got {', '.join(sorted(target))}")
    for key, sub in target.items():
        if not isinstance(sub, dict):
            raise ConfigError(f"[target.{key}] must be a table")
        _check_keys(sub, f"target.{key}")
    if "file" in target:
        if "path" not in target["file"]:
            raise ConfigError("target.file needs a path")
        if not (base_dir / target["file"]["path"]).is_file():
            raise ConfigError(f"target file {target['file']['path']!r} does not exist")
    if "grid" not in raw or "bundle" not in raw:
        raise ConfigError("config needs [grid] and [bundle] tables")
    g = raw["grid"]
    n = _int(g.get("n", 1), "grid.n", 1)
    N = _int(grid_n if grid_n is not None else g.get("N", 32), "grid.N", 4)
    periods = g.get("periods", [2 * np.pi] * (2 * n))
    try:
        grid = GridSpec(n, N, tuple(float(p) for p in periods))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from e
    b = raw["bundle"]
    rank = _int(b.get("rank", 1), "bundle.rank", 1)
    twist = _int(b.get("twist_degree", 0), "bundle.twist_degree", 0)
    s = seed if seed is not None else raw.get("seed", 0)
    s = _int(s, "seed", 0)
    if s >= 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    return ScenarioConfig(subcommand, s, grid, rank, twist, raw, base_dir)


def load(path, subcommand: str, seed: int | None = None, grid_n: int | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return from_dict(raw, subcommand, seed, grid_n, path.parent)
