import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from higgshym.forms import TOP_BASIS_DENSITY, Form, d, dbar, top_coefficient, wedge
from higgshym.grid import GridSpec, trig_polynomial

# real components (dx1, dy1, dx2, dy2) of the complex basis one-forms
_BASIS = {"z0": [1, 1j, 0, 0], "zb0": [1, -1j, 0, 0], "z1": [0, 0, 1, 1j], "zb1": [0, 0, 1, -1j]}


def _wedge4(names):
    return np.linalg.det(np.array([_BASIS[k] for k in names]))


def _scalar_field(grid, seed):
    rng = np.random.default_rng(seed)
    terms = [dict(mode=tuple(rng.integers(-1, 2, grid.ndim)), cos=complex(*rng.normal(size=2)),
                  sin=complex(*rng.normal(size=2))) for _ in range(4)]
    return trig_polynomial(grid, terms)


def test_top_basis_density_matches_determinant():
    assert _wedge4(["z0", "zb0", "z1", "zb1"]) == pytest.approx(TOP_BASIS_DENSITY)


def _unit_two_form(pair, shape=()):
    a, b = pair
    n = 2
    z = np.zeros((n, n) + shape, dtype=complex)
    i, j = int(a[-1]), int(b[-1])
    c = z.copy()
    if a.startswith("zb") and b.startswith("zb"):
        c[i, j], c[j, i] = 1, -1
        return Form({"zbzb": c})
    if a.startswith("zb"):
        c[j, i] = -1
        return Form({"zzb": c})
    if b.startswith("zb"):
        c[i, j] = 1
        return Form({"zzb": c})
    c[i, j], c[j, i] = 1, -1
    return Form({"zz": c})


@pytest.mark.parametrize("p,q", list(itertools.product(itertools.permutations(_BASIS, 2), repeat=2)))
def test_top_coefficient_signs(p, q):
    canon = _wedge4(["z0", "zb0", "z1", "zb1"])
    expected = _wedge4(list(p) + list(q)) / canon
    got = top_coefficient(_unit_two_form(p), _unit_two_form(q), matrix=False)
    got = 0 if got is None else complex(got)
    assert got == pytest.approx(expected, abs=1e-12)


def test_matrix_wedge_order():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    B = np.array([[0, 0], [1, 0]], dtype=complex)
    a = Form({"z": A[None]})
    b = Form({"zb": B[None]})
    assert np.array_equal(wedge(a, b).get("zzb")[0, 0], A @ B)
    assert np.array_equal(wedge(b, a).get("zzb")[0, 0], -B @ A)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_d_squared_vanishes(seed):
    grid = GridSpec.square(2, 8)
    f = _scalar_field(grid, seed)
    assert np.max(np.abs(d(d(f, grid), grid).get("zz"))) < 1e-12
    assert np.max(np.abs(dbar(dbar(f, grid), grid).get("zbzb"))) < 1e-12
    mixed = d(dbar(f, grid), grid).get("zzb") + dbar(d(f, grid), grid).get("zzb")
    assert np.max(np.abs(mixed)) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_scalar_one_forms_anticommute(seed):
    grid = GridSpec.square(2, 4)
    rng = np.random.default_rng(seed)
    mk = lambda: rng.normal(size=(2,) + grid.shape) + 0j
    a = Form({"z": mk(), "zb": mk()})
    b = Form({"z": mk(), "zb": mk()})
    ab, ba = wedge(a, b, matrix=False), wedge(b, a, matrix=False)
    for k in ("zz", "zzb", "zbzb"):
        assert np.allclose(ab.get(k), -ba.get(k))
    aa = wedge(a, a, matrix=False)
    for k in ("zz", "zzb", "zbzb"):
        assert np.allclose(aa.get(k), 0)


def test_form_arithmetic():
    a = Form({"z": np.ones((1, 2))})
    b = Form({"zb": np.ones((1, 2))})
    c = (a + b).scale(2) - a
    assert np.allclose(c.get("z"), 1) and np.allclose(c.get("zb"), 2)
    assert c.degree == 1
    with pytest.raises(ValueError):
        Form({"z": np.ones(1), "zz": np.ones((1, 1))}).degree
