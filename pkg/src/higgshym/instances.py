"""Seeded random test instances.

Every generator draws from a named stream: ``stream(seed, "h0")`` and
``stream(seed, "theta")`` are independent, and adding a new stream never
perturbs existing ones.  Streams use the counter-based Philox bit generator.
"""

from __future__ import annotations

import zlib

import numpy as np

from . import fields as F
from .grid import GridSpec, trig_polynomial


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), key])))


def _random_modes(rng, grid: GridSpec, max_mode: int, n_terms: int) -> list:
    modes = []
    while len(modes) < n_terms:
        m = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, size=grid.ndim))
        if any(m) and m not in modes:
            modes.append(m)
    return modes


def _herm(rng, r):
    a = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    return 0.5 * (a + a.conj().T)


def random_scalar(grid: GridSpec, rng, amplitude: float = 0.3, max_mode: int = 1,
                  n_terms: int = 3) -> np.ndarray:
    """Real zero-mean trigonometric polynomial with sup-norm ``amplitude``."""
    terms = [dict(mode=m, cos=rng.normal(), sin=rng.normal())
             for m in _random_modes(rng, grid, max_mode, n_terms)]
    f = np.real(trig_polynomial(grid, terms))
    return amplitude * f / np.max(np.abs(f))


def random_hermitian(grid: GridSpec, r: int, rng, amplitude: float = 0.3, max_mode: int = 1,
                     n_terms: int = 3, constant: bool = True) -> np.ndarray:
    """Hermitian trig-polynomial matrix field with sup operator norm ``amplitude``."""
    terms = [dict(mode=m, cos=_herm(rng, r), sin=_herm(rng, r))
             for m in _random_modes(rng, grid, max_mode, n_terms)]
    if constant:
        terms.append(dict(mode=(0,) * grid.ndim, cos=_herm(rng, r)))
    S = F.hermitian_part(trig_polynomial(grid, terms, (r, r)))
    return amplitude * S / F.sup_norm(S)


def random_metric(grid: GridSpec, r: int, rng, amplitude: float = 0.3, **kw) -> np.ndarray:
    """``exp`` of a random Hermitian field: smooth, periodic, positive definite."""
    return F.matrix_exp(random_hermitian(grid, r, rng, amplitude, **kw))


def random_endomorphism(grid: GridSpec, r: int, rng, h: np.ndarray, amplitude: float = 0.3,
                        **kw) -> np.ndarray:
    """Random ``h``-Hermitian field with sup ``h``-operator norm ``amplitude``."""
    B = random_hermitian(grid, r, rng, amplitude, **kw)
    return F.from_symmetric_frame(B, h)


def random_commuting_theta(n: int, r: int, rng, scale: float = 0.3) -> np.ndarray:
    """Constant commuting Higgs components: polynomials in one random matrix."""
    a = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    a *= scale / max(np.linalg.norm(a, 2), 1e-300)
    theta = [a]
    for _ in range(1, n):
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        theta.append(0.5 * (c[0] * a + c[1] * (a @ a) / max(scale, 1e-300)))
    return np.stack(theta)


def random_section(grid: GridSpec, shape: tuple, rng, amplitude: float = 0.3, max_mode: int = 1,
                   n_terms: int = 3) -> np.ndarray:
    """Complex trig-polynomial field with values of shape ``shape``."""
    def c():
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)
    terms = [dict(mode=m, cos=c(), sin=c()) for m in _random_modes(rng, grid, max_mode, n_terms)]
    terms.append(dict(mode=(0,) * grid.ndim, cos=c()))
    f = trig_polynomial(grid, terms, shape)
    return amplitude * f / np.max(np.abs(f))
