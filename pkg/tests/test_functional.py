import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st_

from helpers import curve, mesh
from hqwillmore import functional as fn
from hqwillmore import structure as st
from hqwillmore.curve import dual_curve, generic_projection, vanishing_orders
from hqwillmore.domain import DomainMesh, constant_field, integrate
from hqwillmore.errors import NonIntegral

FOUR_PI = 4 * math.pi


def hopf(name, depth=3):
    return st.hopf_fields(curve(name, depth).S(mesh(depth)))


def constant_hopf():
    S0 = curve("round_sphere", 2).S(mesh(2)).sample(mesh(2))[0]
    return st.hopf_fields(constant_field(S0))


def test_round_sphere_energy_zero():
    assert abs(fn.willmore_energy(hopf("round_sphere"), mesh(3))) <= 1e-8


def test_twistor_cubic_energy_zero():
    assert abs(fn.willmore_energy(hopf("twistor_cubic"), mesh(3))) <= 1e-6


def test_dual_cubic_energy_quantized_by_degree():
    m = mesh(4)
    W = fn.willmore_energy(hopf("dual_cubic", 4), m)
    deg = fn.degree(hopf("twistor_cubic", 4), m)
    k, off = fn.quantization_check(W)
    assert k == abs(deg.rounded) > 0
    assert off <= 0.005 * FOUR_PI


def test_constant_structure_functionals():
    h, m = constant_hopf(), mesh(2)
    assert fn.energy_functional(h, m) == (0.0, 0.0)
    d = fn.degree(h, m)
    assert d.raw == 0.0 and d.rounded == 0


def test_twistor_cubic_energy_from_degree():
    h, m = hopf("twistor_cubic"), mesh(3)
    E, _ = fn.energy_functional(h, m)
    deg = fn.degree(h, m)
    assert abs(E + FOUR_PI * deg.raw) <= 1e-4 * abs(E)


@pytest.mark.parametrize("name", ["twistor_cubic", "dual_cubic", "round_sphere", "planar_ends", "non_willmore"])
def test_energy_paths_agree(name):
    h, m = hopf(name), mesh(3)
    direct, split = fn.energy_functional(h, m)
    assert abs(direct - split) <= 1e-8 * max(1.0, abs(direct))


def test_energy_paths_agree_on_random_projection(rng):
    m = mesh(3)
    c = generic_projection(curve("twistor_quintic", 3), rng.normal(size=6) + 1j * rng.normal(size=6))
    h = st.hopf_fields(c.S(m))
    direct, split = fn.energy_functional(h, m)
    assert abs(direct - split) <= 1e-8 * abs(direct)


@pytest.mark.parametrize("name", ["twistor_cubic", "dual_cubic", "round_sphere", "ramified", "twistor_quintic",
                                  "non_willmore"])
def test_energy_bookkeeping(name):
    h, m = hopf(name), mesh(3)
    E, _ = fn.energy_functional(h, m)
    deg = fn.degree(h, m)
    W = fn.willmore_energy(h, m)
    assert abs(E + FOUR_PI * deg.raw - 2 * W) <= 1e-9 * max(E, 1.0)


def test_round_sphere_degree_and_pluecker():
    m = mesh(3)
    c = curve("round_sphere", 3)
    deg = fn.degree(hopf("round_sphere"), m)
    deg_L = fn.chern_degree(c.osculating()[0], m)
    assert deg.rounded == 0 and deg_L.rounded == -1
    assert fn.pluecker_residual(1, deg, deg_L, 0)[0] == 0


def test_twistor_cubic_degree_integral():
    d = fn.degree(hopf("twistor_cubic"), mesh(3))
    assert d.gap <= 1e-3 and d.rounded == -4


@pytest.mark.parametrize("name", ["twistor_cubic", "ramified"])
def test_pluecker_closes(name):
    m = mesh(3)
    c = curve(name, 3)
    deg = fn.degree(hopf(name), m)
    deg_L = fn.chern_degree(c.osculating()[0], m)
    ord_H = vanishing_orders(c, m).ord_H
    res, raw = fn.pluecker_residual(c.n, deg, deg_L, ord_H)
    assert res == 0 and raw <= 0.1
    assert (ord_H > 0) == (name == "ramified")


def test_non_integral_degree_raises():
    with pytest.raises(NonIntegral):
        fn._rounded(2.3, "test")


@pytest.mark.parametrize("name", ["twistor_cubic", "ramified", "twistor_quintic"])
def test_degree_additivity(name):
    m = mesh(3)
    c = curve(name, 3)
    parts = fn.quotient_degrees(c.osculating(), m)
    assert all(p.gap <= 0.05 for p in parts)
    assert sum(p.rounded for p in parts) == fn.degree(hopf(name), m).rounded


@pytest.mark.parametrize("name", ["twistor_cubic", "ramified"])
def test_dual_degree_remark(name):
    m = mesh(3)
    c = curve(name, 3)
    deg_L = fn.chern_degree(c.osculating()[0], m).rounded
    deg_Ls = fn.chern_degree(dual_curve(c, m).osculating()[0], m).rounded
    total = sum(o for *_, o in vanishing_orders(c, m).zeros)
    assert fn.dual_degree_check(c.n, deg_L, deg_Ls, total) == 0


def test_harmonicity_twistor_zero():
    assert fn.harmonicity_residual(hopf("twistor_cubic"), mesh(3))[0] <= 1e-10


def test_harmonicity_converges_on_dual():
    r = [fn.harmonicity_residual(hopf("dual_cubic", d), mesh(d))[0] for d in (3, 4)]
    assert math.log2(r[0] / r[1]) >= 2


def test_harmonicity_bounded_below_off_willmore():
    r = [fn.harmonicity_residual(hopf("non_willmore", d), mesh(d))[0] for d in (3, 4)]
    assert min(r) > 10 and r[1] > 0.5 * r[0]


def test_quantization_examples():
    assert fn.quantization_check(0.0) == (0, 0.0)
    k, off = fn.quantization_check(2 * math.pi)
    assert off == pytest.approx(2 * math.pi) and off > 0.005 * FOUR_PI
    with pytest.raises(ValueError):
        fn.quantization_check(-1.0)


@given(st_.integers(0, 20), st_.floats(-0.4, 0.4))
def test_quantization_nearest_multiple(k, frac):
    got_k, off = fn.quantization_check(FOUR_PI * (k + frac) if k + frac >= 0 else 0.0)
    if k + frac >= 0:
        assert got_k == k and off == pytest.approx(abs(frac) * FOUR_PI, abs=1e-9)


def test_dual_cubic_quantization_offset():
    W = fn.willmore_energy(hopf("dual_cubic"), mesh(3))
    assert fn.quantization_check(W)[1] <= 0.005 * FOUR_PI


def test_dual_energy_difference_is_degree():
    m = mesh(3)
    W = fn.willmore_energy(hopf("twistor_cubic"), m)
    Wd = fn.willmore_energy(hopf("dual_cubic"), m)
    deg = fn.degree(hopf("twistor_cubic"), m)
    assert abs(W - Wd - FOUR_PI * deg.raw) <= 1e-9 * Wd


@pytest.mark.parametrize("name", ["twistor_cubic", "dual_cubic"])
def test_mesh_invariance(name):
    vals = []
    for d in (4, 5):
        h, m = hopf(name, d), mesh(d)
        vals.append(np.array([fn.willmore_energy(h, m), fn.energy_functional(h, m)[0], fn.degree(h, m).raw]))
    assert np.all(np.abs(vals[1] - vals[0]) <= 1e-3 * np.maximum(np.abs(vals[1]), 1.0))


@given(st_.integers(0, 2**32 - 1))
def test_integration_order_independent(seed):
    m = mesh(3)
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=m.size) * 10.0 ** rng.integers(-8, 8, size=m.size)
    perm = rng.permutation(m.size)
    pm = DomainMesh(m.depth, m.chart[perm], m.x[perm], m.y[perm], m.weight[perm], m.h)
    a, b = integrate(vals, m), integrate(vals[perm], pm)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_report_roundtrip_nan_to_null():
    r = fn.Report(spec="x", label="x", n=1, depth=3, W_f=0.0, W_dual=float("nan"), E_S=0.0, E_S_split=0.0,
                  deg_VS=0.0, deg_VS_int=0, deg_VS_abs=0, deg_L=-1.0, deg_L_int=-1, ord_H=0,
                  pluecker_residual=0, pluecker_residual_raw=0.0, harmonicity_residual=0.0,
                  harmonicity_residual_Q=0.0, bookkeeping_residual=0.0, dual_energy_residual=float("nan"),
                  quantization_multiple=0, quantization_offset=0.0, quantization_multiple_dual=0,
                  quantization_offset_dual=float("nan"), square_residual=0.0, checks={"a": True})
    j = r.to_json()
    assert j["W_dual"] is None and j["schema"] == 1 and r.passed
    assert "depth" not in r.scalars() and "W_f" in r.scalars()
