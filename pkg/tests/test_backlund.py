import numpy as np
import pytest

from helpers import curve, mesh
from hqwillmore import backlund as bk
from hqwillmore.curve import build_curve, dual_curve, twistor_spec
from hqwillmore.errors import NoBackwardTransform, NoForwardTransform
from hqwillmore.qalg import frame_matrix

D = 3


@pytest.fixture(scope="module")
def cubic_backward():
    return bk.backward_backlund(curve("twistor_cubic", D), mesh(D))


@pytest.fixture(scope="module")
def dual_forward():
    return bk.forward_backlund(curve("dual_cubic", D), mesh(D))


def embedded_lines(res, line_field):
    Uc = frame_matrix(res.ambient)
    P = line_field.sample(mesh(D))
    return Uc @ P @ Uc.conj().T


def test_backward_of_twistor_cubic(cubic_backward):
    res, m = cubic_backward, mesh(D)
    assert res.kind == "curve" and res.rank == 2
    assert res.residuals["ambient_constancy"] <= 1e-7
    assert bk.minus_s_residual(res, m)["minus_S"] <= 1e-6
    assert bk.ba_residual(res, m) <= 1e-6


def test_backward_verification_table(cubic_backward):
    checks = bk.verify_backlund(cubic_backward, mesh(D))
    for name in ("minus_S", "bA", "energy", "involution"):
        assert checks[name]["pass"], (name, checks[name])
    assert set(checks) >= {"harmonicity", "minus_S", "bA", "energy", "involution"}


def test_no_backward_when_Q_vanishes():
    with pytest.raises(NoBackwardTransform):
        bk.backward_backlund(curve("dual_cubic", D), mesh(D))


@pytest.mark.parametrize("name", ["twistor_cubic", "round_sphere"])
def test_no_forward_when_A_vanishes(name):
    with pytest.raises(NoForwardTransform):
        bk.forward_backlund(curve(name, D), mesh(D))


def test_forward_of_dual_cubic(dual_forward):
    res, m = dual_forward, mesh(D)
    assert res.kind == "curve"
    assert bk.fq_residual(res, m) <= 1e-5
    checks = bk.verify_backlund(res, m)
    for name in ("minus_S", "fQ", "energy", "involution"):
        assert checks[name]["pass"], (name, checks[name])


def test_forward_energy_matches_source(dual_forward):
    m = mesh(D)
    W_f = bk.willmore_energy(bk._hopf(dual_forward.source, m), m)
    W_t_star = bk.willmore_energy(bk._hopf(dual_forward.curve.meta["dual"], m), m)
    assert abs(W_t_star - W_f) <= 0.005 * W_f


def test_transform_of_dual_is_dual_of_backward(cubic_backward, dual_forward):
    m = mesh(D)
    lhs = embedded_lines(dual_forward, dual_forward.curve.line)
    dual_back = dual_curve(cubic_backward.curve, m, check=False)
    rhs = embedded_lines(cubic_backward, dual_back.line)
    assert np.abs(lhs - rhs).max() <= 1e-6


def test_n1_sphere_transforms_are_the_same_point():
    m = mesh(D)
    c = curve("planar_ends", D)
    back, fwd = bk.backward_backlund(c, m), bk.forward_backlund(c, m)
    assert back.kind == fwd.kind == "constant-point"
    # the forward point is stored as (ker A)^perp, the annihilator of L_hat = ker A
    eye = np.eye(len(back.point))
    assert np.abs(back.point + fwd.point - eye).max() <= 1e-6
    # A Q = 0 pointwise
    h = bk._hopf(c, m)
    A, Q = h.A.sample(m)[:, 0], h.Q.sample(m)[:, 0]
    assert np.abs(A @ Q).max() <= 1e-8 * np.abs(A).max() * np.abs(Q).max()


def test_constant_point_verification():
    m = mesh(D)
    res = bk.backward_backlund(curve("planar_ends", D), m)
    checks = bk.verify_backlund(res, m)
    assert set(checks) == {"point_constancy", "energy"}
    assert checks["point_constancy"]["pass"]
    assert checks["energy"]["informational"] and checks["energy"]["value"] > 0
    assert bk.checks_passed(checks)


def test_sequence_n1():
    m = mesh(D)
    seq = bk.sphere_sequence(curve("planar_ends", D), m)
    assert len(seq) == 1 and seq[-1].kind == "constant-point"
    seq = bk.sphere_sequence(curve("twistor_cubic", D), m)
    assert 1 <= len(seq) <= 1


def test_sequence_quintic_bound():
    m = mesh(D)
    c = curve("twistor_quintic", D)
    seq = bk.sphere_sequence(c, m)
    assert 1 <= len(seq) <= c.n
    dims = [c.n] + [r.curve.n for r in seq if r.curve is not None]
    assert all(b <= a for a, b in zip(dims, dims[1:]))


def test_sequence_of_constant_curve_is_empty():
    c = build_curve(twistor_spec([[1], [0.5], [0.2j], [1]]), mesh(2))
    assert bk.sphere_sequence(c, mesh(2)) == []


@pytest.mark.parametrize("name", ["twistor_cubic", "dual_cubic", "round_sphere", "planar_ends", "twistor_quintic"])
def test_flag_lemma(name):
    assert bk.flag_lemma_residual(curve(name, D), mesh(D)) <= 1e-6


def test_kernel_holomorphicity_converges():
    vals = []
    for d in (3, 4):
        res = bk.forward_backlund(curve("dual_cubic", d), mesh(d))
        vals.append(bk.kernel_holomorphicity(res, mesh(d), "fd"))
    assert bk.kernel_holomorphicity(bk.forward_backlund(curve("dual_cubic", D), mesh(D)), mesh(D)) <= 1e-10
    assert vals[1] <= vals[0] / 4 or vals[1] <= 1e-10


def test_serialisation(cubic_backward):
    d = bk.result_to_json(cubic_backward, mesh(D), curve("twistor_cubic", D).spec)
    assert d["kind"] == "backlund-of" and d["direction"] == "backward" and d["transform_kind"] == "curve"
    assert len(d["ambient"]) == cubic_backward.rank
