"""The shipped example curves.

Most members are twistor projections given by a handful of polynomial
coefficients.  The exception is a Willmore sphere that is not a twistor
projection: a complete minimal surface in R^3 with four planar ends, found by
solving the period and regularity conditions of its Weierstrass data with
``scipy.optimize.least_squares`` and written as an explicit polynomial
section in ``z`` and ``zbar`` for each chart.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import least_squares

from .curve import CurveSpec, twistor_spec
from .qalg import quaternionic_frame

A0 = np.array([1.0, 1.0j, 0.0])


# -- twistor members -------------------------------------------------------------

def twistor_cubic() -> CurveSpec:
    return twistor_spec([[1], [0, 1], [0, 0, 1], [0, 0, 0, 1]], "twistor-cubic")


def round_sphere() -> CurveSpec:
    return twistor_spec([[1], [0, 1], [0], [0]], "round-sphere")


def ramified() -> CurveSpec:
    return twistor_spec([[1], [0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 0, 0, 1]], "ramified")


def twistor_quintic() -> CurveSpec:
    """Rational normal curve of degree five in CP^5 (n = 2)."""
    return twistor_spec([[0] * k + [1] for k in range(6)], "twistor-quintic")


def osculant_example(z0: complex = 0.3 + 0.2j) -> CurveSpec:
    """W_1 meets W_1 j at z0: the twistor construction breaks down there."""
    u = P.polyfromroots([z0])
    return twistor_spec([[1], list(P.polymul(u, u)), list(u), list(P.polymul(P.polymul(u, u), u))],
                        "osculant")


def not_full_example() -> CurveSpec:
    return twistor_spec([[1], [0], [0, 1], [0]], "not-full")


def dual_of(spec: CurveSpec, label: str = "") -> CurveSpec:
    return CurveSpec("dual-of", spec.n, parent=spec, label=label or f"dual-{spec.label}")


def non_willmore_projection(seed: int = 7) -> CurveSpec:
    """Projection of the dual twistor quintic along a random quaternionic line.

    Projections of twistor curves stay twistor, so the dual is used: its
    Hopf field A is nonzero and a generic projection destroys harmonicity.
    """
    rng = np.random.default_rng(seed)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    parent = dual_of(twistor_quintic())
    return CurveSpec("projection-of", 1, parent=parent, kernel=quaternionic_frame(v[:, None]),
                     label="non-willmore")


# -- minimal sphere with planar ends ----------------------------------------------

def _planar_end_residual(params: np.ndarray, k: int) -> np.ndarray:
    """Double-pole and regularity conditions for Phi = A0 + sum a_k / (z - p_k)^2.

    ``params`` holds (Re, Im) of the residue vectors and then of the poles.
    Phi . Phi vanishes identically iff a.a, a.b and a.c vanish at every pole,
    with b and c the constant and linear Taylor terms of the other summands.
    """
    a = (params[: 3 * k] + 1j * params[3 * k: 6 * k]).reshape(k, 3)
    p = params[6 * k: 7 * k] + 1j * params[7 * k:]
    out = []
    for i in range(k):
        b = A0.copy()
        c = np.zeros(3, complex)
        for l in range(k):
            if l != i:
                b += a[l] / (p[i] - p[l]) ** 2
                c += -2 * a[l] / (p[i] - p[l]) ** 3
        out += [a[i] @ a[i], a[i] @ b, a[i] @ c]
    out = np.array(out)
    return np.concatenate([out.real, out.imag])


def _weierstrass_residues(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Null residues a_k = e^u (1 - g^2, i(1 + g^2), 2g) with g = e^s, and the poles."""
    u = x[:k] + 1j * x[k: 2 * k]
    g = np.exp(x[2 * k: 3 * k] + 1j * x[3 * k: 4 * k])
    p = x[4 * k: 5 * k] + 1j * x[5 * k:]
    a = np.exp(u)[:, None] * np.stack([1 - g * g, 1j * (1 + g * g), 2 * g], axis=1)
    return a, p


def _weierstrass_residual(x: np.ndarray, k: int) -> np.ndarray:
    a, p = _weierstrass_residues(x, k)
    params = np.concatenate([a.real.ravel(), a.imag.ravel(), p.real, p.imag])
    return np.concatenate([_planar_end_residual(params, k)[: 6 * k], [np.sum(np.abs(p) ** 2) - k]])


def planar_end_data(k: int = 3, seed: int = 216, tries: int = 400) -> tuple[np.ndarray, np.ndarray]:
    """Residues a_k (shape (k, 3)) and poles p_k of a regular planar-end minimal sphere.

    The residues are written through their Gauss map values so that a null
    vector is automatic; box bounds on the logarithms keep the solver away
    from the degenerate planar family (g = 0) and from vanishing residues.
    """
    lo, hi = np.full(6 * k, -np.inf), np.full(6 * k, np.inf)
    lo[:k], hi[:k] = -3.0, 3.0
    lo[2 * k: 3 * k], hi[2 * k: 3 * k] = -2.0, 2.0
    for attempt in range(tries):
        x0 = np.random.default_rng(seed + attempt).normal(size=6 * k)
        x0[:k] = np.clip(x0[:k], -2.9, 2.9)
        x0[2 * k: 3 * k] = np.clip(x0[2 * k: 3 * k], -1.9, 1.9)
        sol = least_squares(_weierstrass_residual, x0, args=(k,), bounds=(lo, hi),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=3000)
        a, p = _weierstrass_residues(sol.x, k)
        interior = (np.abs(sol.x[:k]).max() < 2.9) and (np.abs(sol.x[2 * k: 3 * k]).max() < 1.9)
        gaps = [abs(p[i] - p[j]) for i in range(k) for j in range(i)]
        if (interior and np.abs(sol.fun).max() < 1e-12 and min(gaps) > 0.2 and np.abs(p).min() > 0.2
                and _min_abs_phi(a, p) > 0.3):
            return a, p
    raise RuntimeError("no regular planar-end solution found")


def _min_abs_phi(a: np.ndarray, p: np.ndarray) -> float:
    """Smallest |Phi| on a polar grid of the extended plane (branch-point guard)."""
    r = np.concatenate([np.linspace(0, 1, 60), 1 / np.linspace(1, 0.02, 60)])
    t = np.linspace(0, 2 * np.pi, 120, endpoint=False)
    z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    z = z[np.min(np.abs(z[:, None] - p[None, :]), axis=1) > 0.05]
    phi = A0[None, :] + sum(a[i][None, :] / (z[:, None] - p[i]) ** 2 for i in range(len(p)))
    return float(np.linalg.norm(phi, axis=1).min())


def _real_part(M: np.ndarray) -> np.ndarray:
    return (M + np.conj(M.T)) / 2


def _chart_section(const: np.ndarray, lin: np.ndarray, poles: np.ndarray, res: np.ndarray) -> np.ndarray:
    """Coefficients of psi = (f, 1)(1 - f) D in z^i zbar^j for one chart.

    F = const + lin w + sum res_j / (w - poles_j), f = Re F, and
    D = prod |w - poles_j|^2 clears the denominators.
    """
    q = P.polyfromroots(poles)
    N = []
    for comp in range(3):
        acc = P.polyadd(const[comp] * q, lin[comp] * P.polymulx(q))
        for j, s in enumerate(poles):
            quo, rem = P.polydiv(q, P.polyfromroots([s]))
            acc = P.polyadd(acc, res[j][comp] * quo)
        N.append(acc)
    width = max(len(c) for c in N)
    N = [np.pad(c, (0, width - len(c))) for c in N]
    NN = P.polyadd(P.polyadd(P.polymul(N[0], N[0]), P.polymul(N[1], N[1])), P.polymul(N[2], N[2]))
    FFq, rem = P.polydiv(NN, q)
    if np.abs(rem).max() > 1e-9 * max(1.0, np.abs(NN).max()):
        raise ValueError("F.F has a double pole: residues are not null")
    size = max(len(q), len(FFq), width)
    q, FFq = np.pad(q, (0, size - len(q))), np.pad(FFq, (0, size - len(FFq)))
    N = [np.pad(c, (0, size - width)) for c in N]
    D = np.outer(q, np.conj(q))
    fD = [_real_part(np.outer(c, np.conj(q))) for c in N]
    ff = np.outer(FFq, np.conj(q))
    nn = sum(np.outer(c, np.conj(c)) for c in N)
    normD = (ff + np.conj(ff.T) + 2 * nn) / 4
    # quaternion entries (q0, q1, q2, q3) -> complex pair (q0 + i q1, q2 - i q3)
    e1 = (normD, fD[0], fD[1], fD[2])
    e2 = (D, -fD[0], -fD[1], -fD[2])
    a = [e[0] + 1j * e[1] for e in (e1, e2)]
    b = [e[2] - 1j * e[3] for e in (e1, e2)]
    out = np.stack([a[0], a[1], b[0], b[1]])
    out[np.abs(out) < 1e-14 * np.abs(out).max()] = 0
    return out


def planar_end_sphere(k: int = 3, seed: int = 216) -> CurveSpec:
    """Minimal sphere with k + 1 planar ends (one at infinity); W = 4 pi k, not a twistor projection."""
    a, p = planar_end_data(k, seed)
    chart0 = _chart_section(np.zeros(3, complex), A0, p, -a)
    const1 = (a / p[:, None]).sum(axis=0)
    poles1 = np.concatenate([[0.0], 1 / p])
    res1 = np.concatenate([A0[None, :], a / p[:, None] ** 2])
    chart1 = _chart_section(const1, np.zeros(3, complex), poles1, res1)
    return CurveSpec("direct", 1, charts=[chart0, chart1], label="planar-ends",
                     extra={"poles": [[float(z.real), float(z.imag)] for z in p]})


def corpus() -> dict[str, CurveSpec]:
    """Every shipped example keyed by file stem."""
    cubic, quintic = twistor_cubic(), twistor_quintic()
    return {
        "twistor_cubic": cubic,
        "round_sphere": round_sphere(),
        "ramified": ramified(),
        "dual_cubic": dual_of(cubic),
        "twistor_quintic": quintic,
        "dual_quintic": dual_of(quintic),
        "planar_ends": planar_end_sphere(),
        "non_willmore": non_willmore_projection(),
        "osculant": osculant_example(),
        "not_full": not_full_example(),
    }
