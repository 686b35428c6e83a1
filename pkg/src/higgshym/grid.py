"""Periodic grids on flat complex tori and spectral calculus.

Fields are plain numpy arrays whose leading ``2n`` axes are the real grid
axes ``(x1, y1, ..., xn, yn)``; anything after that (matrix indices, form
indices) is carried along untouched.  Complex coordinates are
``z_i = x_i + sqrt(-1) y_i`` so that

    d/dz_i    = (d/dx_i - sqrt(-1) d/dy_i) / 2
    d/dzbar_i = (d/dx_i + sqrt(-1) d/dy_i) / 2.

First derivatives drop the Nyquist mode.  This keeps
``conj(partial_z f) == partial_zbar(conj f)`` exact on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError

ZERO_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``C^n / Lambda`` with a rectangular lattice.

    Parameters
    ----------
    n : int
        Complex dimension, 1 or 2.
    N : int
        Points per real axis (even, at least 4).
    periods : tuple of float
        Real periods ``(Lx1, Ly1, ..., Lxn, Lyn)``.
    """

    n: int
    N: int
    periods: tuple

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be even and >= 4, got {self.N}")
        per = tuple(float(p) for p in self.periods)
        if len(per) != 2 * self.n or min(per) <= 0:
            raise ValueError(f"need {2 * self.n} positive periods, got {self.periods}")
        object.__setattr__(self, "periods", per)

    @classmethod
    def square(cls, n: int, N: int, period: float = 2 * np.pi) -> "GridSpec":
        return cls(n, N, (period,) * (2 * n))

    @property
    def ndim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.ndim

    @property
    def volume(self) -> float:
        """Coordinate volume ``prod(periods)``."""
        return float(np.prod(self.periods))

    def axis_coords(self, a: int) -> np.ndarray:
        return np.arange(self.N) * (self.periods[a] / self.N)

    def coords(self) -> list:
        """Broadcastable coordinate arrays, one per real axis."""
        out = []
        for a in range(self.ndim):
            shp = [1] * self.ndim
            shp[a] = self.N
            out.append(self.axis_coords(a).reshape(shp))
        return out

    def wavenumbers(self, nyquist: bool = True) -> list:
        """Broadcastable angular wavenumbers; Nyquist entry zeroed if asked."""
        out = []
        for a in range(self.ndim):
            k = 2 * np.pi * sfft.fftfreq(self.N, d=self.periods[a] / self.N)
            if not nyquist:
                k[self.N // 2] = 0.0
            shp = [1] * self.ndim
            shp[a] = self.N
            out.append(k.reshape(shp))
        return out

    def check(self, f: np.ndarray, name: str = "field") -> None:
        if f.shape[: self.ndim] != self.shape:
            raise GridMismatchError(
                f"{name} has leading shape {f.shape[: self.ndim]}, grid expects {self.shape}"
            )

    def complex_area(self, i: int) -> float:
        """Area of the i-th complex coordinate factor, ``Lx_i * Ly_i``."""
        return self.periods[2 * i] * self.periods[2 * i + 1]


def _axes(grid: GridSpec) -> tuple:
    return tuple(range(grid.ndim))


def _expand(sym: np.ndarray, f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sym.reshape(sym.shape + (1,) * (f.ndim - grid.ndim))


def _derivative_symbols(grid: GridSpec) -> tuple[list, list]:
    k = grid.wavenumbers(nyquist=False)
    dz, dzb = [], []
    for i in range(grid.n):
        kx, ky = k[2 * i], k[2 * i + 1]
        dz.append(0.5 * (1j * kx + ky))
        dzb.append(0.5 * (1j * kx - ky))
    return dz, dzb


def gradients(f: np.ndarray, grid: GridSpec, which: str = "both"):
    """Holomorphic and antiholomorphic gradients from one forward transform.

    Parameters
    ----------
    f : ndarray
        Field with leading grid axes.
    which : {"both", "z", "zbar"}

    Returns
    -------
    ndarray or tuple of ndarray
        Arrays of shape ``(n,) + f.shape``; index 0 selects the coordinate.
    """
    grid.check(f)
    axes = _axes(grid)
    fh = sfft.fftn(f, axes=axes)
    dz_sym, dzb_sym = _derivative_symbols(grid)
    res = []
    for key, syms in (("z", dz_sym), ("zbar", dzb_sym)):
        if which in ("both", key):
            out = np.empty((grid.n,) + f.shape, dtype=complex)
            for i, s in enumerate(syms):
                out[i] = sfft.ifftn(fh * _expand(np.broadcast_to(s, grid.shape), f, grid), axes=axes,
                                    overwrite_x=True)
            res.append(out)
    if which == "both":
        return res[0], res[1]
    if not res:
        raise ValueError(f"unknown gradient selector {which!r}")
    return res[0]


def partial_z(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``d f / d z_i`` for every i, stacked on a new leading axis."""
    return gradients(f, grid, "z")


def partial_zbar(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``d f / d zbar_i`` for every i, stacked on a new leading axis."""
    return gradients(f, grid, "zbar")


def integrate(f: np.ndarray, grid: GridSpec, volume_form=None) -> np.ndarray:
    """Integral over the torus of ``f * volume_form`` w.r.t. ``dx1 dy1 ...``.

    Trailing (non-grid) axes of ``f`` are preserved.  The rectangle rule is
    spectrally accurate for smooth periodic integrands.
    """
    grid.check(f)
    if volume_form is not None:
        vol = np.asarray(volume_form)
        if vol.ndim:
            grid.check(vol, "volume_form")
            vol = vol.reshape(vol.shape + (1,) * (f.ndim - vol.ndim))
        f = f * vol
    return np.mean(f, axis=_axes(grid)) * grid.volume


def mean(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    grid.check(f)
    return np.mean(f, axis=_axes(grid))


def laplacian_symbol(grid: GridSpec, gmat=None) -> np.ndarray:
    """Fourier symbol of ``sum g^{i jbar} d_i dbar_j`` for constant ``g``.

    ``gmat`` is the ``n x n`` Hermitian matrix ``G[i, j] = g_{i jbar}``
    (identity by default).  The Nyquist mode keeps its true second-derivative
    value here.
    """
    G = np.eye(grid.n) if gmat is None else np.asarray(gmat, dtype=complex)
    Ginv = np.linalg.inv(G)
    k = grid.wavenumbers(nyquist=True)
    s = [0.5 * (1j * k[2 * i] + k[2 * i + 1]) for i in range(grid.n)]
    sb = [0.5 * (1j * k[2 * i] - k[2 * i + 1]) for i in range(grid.n)]
    sym = np.zeros(grid.shape, dtype=complex)
    for i in range(grid.n):
        for j in range(grid.n):
            sym = sym + Ginv[j, i] * s[i] * sb[j]
    return sym


def apply_symbol(f: np.ndarray, grid: GridSpec, sym: np.ndarray) -> np.ndarray:
    axes = _axes(grid)
    return sfft.ifftn(sfft.fftn(f, axes=axes) * _expand(sym, f, grid), axes=axes)


def invert_laplacian(f: np.ndarray, grid: GridSpec, gmat=None) -> np.ndarray:
    """Zero-mean solution ``u`` of ``Delta u = f`` for a constant metric.

    Raises
    ------
    ValueError
        If ``f`` has non-zero mean (relative tolerance ``1e-10``).
    """
    grid.check(f)
    m = mean(f, grid)
    scale = max(1.0, float(np.max(np.abs(f))))
    if np.max(np.abs(m)) > ZERO_MEAN_TOL * scale:
        raise ValueError(f"right-hand side has mean {np.max(np.abs(m)):.3e}; Laplacian is not invertible")
    sym = laplacian_symbol(grid, gmat)
    inv = np.zeros_like(sym)
    nz = np.abs(sym) > 0
    inv[nz] = 1.0 / sym[nz]
    return apply_symbol(f, grid, inv)


def trig_polynomial(grid: GridSpec, terms: Sequence, value_shape: tuple = ()) -> np.ndarray:
    """Evaluate ``sum_m c_m cos(phase_m) + s_m sin(phase_m)``.

    Parameters
    ----------
    terms : sequence of dict
        Each entry has ``mode`` (2n integers, one per real axis) and optional
        ``cos`` / ``sin`` coefficients, scalars or arrays of ``value_shape``.
        The phase is ``sum_a 2 pi m_a x_a / L_a``.
    """
    out = np.zeros(grid.shape + tuple(value_shape), dtype=complex)
    xs = grid.coords()
    pad = (1,) * len(value_shape)
    for t in terms:
        mode = list(t["mode"])
        if len(mode) != grid.ndim:
            raise ValueError(f"mode {mode} needs {grid.ndim} entries")
        phase = sum(2 * np.pi * m * x / L for m, x, L in zip(mode, xs, grid.periods))
        phase = np.broadcast_to(phase, grid.shape).reshape(grid.shape + pad)
        if "cos" in t:
            out = out + np.cos(phase) * np.asarray(t["cos"], dtype=complex)
        if "sin" in t:
            out = out + np.sin(phase) * np.asarray(t["sin"], dtype=complex)
    return out
