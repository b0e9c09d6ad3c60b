"""Flags, complex structures and the Hopf field decomposition.

All objects are :class:`~hqwillmore.domain.Field` instances holding complex
``2m x 2m`` matrices (the complex representation of quaternionic
endomorphisms).  One-forms carry a leading axis of length two holding the
values on ``d/dx`` and ``d/dy`` of the node's chart.
"""
from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import minimize

from .domain import DomainMesh, Field, differentiate, jet, node_norm, partial
from .errors import NonFrenet, NotFull


def omega_j(dim: int) -> jax.Array:
    m = dim // 2
    z, e = jnp.zeros((m, m)), jnp.eye(m)
    return jnp.block([[z, -e], [e, z]]).astype(complex)


def jconj(P: jax.Array) -> jax.Array:
    """Matrix of X -> (P X) j in terms of X j, i.e. Omega conj(P) Omega^T."""
    om = omega_j(P.shape[-1])
    return om @ jnp.conj(P) @ om.T


def jvec(v: jax.Array) -> jax.Array:
    return omega_j(v.shape[0]) @ jnp.conj(v)


def dagger(B: jax.Array) -> jax.Array:
    return jnp.conj(jnp.swapaxes(B, -1, -2))


def line_projector(psi: jax.Array) -> jax.Array:
    """Orthogonal projector onto the quaternionic line psi H."""
    pj = jvec(psi)
    return (jnp.outer(psi, jnp.conj(psi)) + jnp.outer(pj, jnp.conj(pj))) / jnp.vdot(psi, psi).real


def image_projector_q1(B: jax.Array) -> jax.Array:
    """Projector onto the image of a quaternionic rank-one map."""
    BB = B @ dagger(B)
    return 2 * BB / jnp.trace(BB).real


def image_projector_c1(X: jax.Array) -> jax.Array:
    """Projector onto the image of a complex rank-one map."""
    XX = X @ dagger(X)
    return XX / jnp.trace(XX).real


def frame_projector(F: jax.Array) -> jax.Array:
    """Orthogonal projector onto the column span of a full-rank complex matrix."""
    return F @ jnp.linalg.solve(dagger(F) @ F, dagger(F))


def quaternionic_span_projector(W: jax.Array) -> jax.Array:
    """Projector onto W + W j for a complex frame W."""
    return frame_projector(jnp.concatenate([W, omega_j(W.shape[0]) @ jnp.conj(W)], axis=1))


def structure_from_plus_space(PE: jax.Array) -> jax.Array:
    """S = i on E and -i on E j, from the orthogonal projector onto E."""
    dim = PE.shape[-1]
    eye = jnp.eye(dim)
    PF = jconj(PE)
    K = (eye - PF) @ PE + (eye - PE)
    Pi = PE @ jnp.linalg.solve(K, eye - PF)
    return 1j * (2 * Pi - eye)


def plus_space_gap(PE: jax.Array) -> jax.Array:
    """Smallest singular value of K; zero exactly when E meets E j."""
    dim = PE.shape[-1]
    eye = jnp.eye(dim)
    PF = jconj(PE)
    K = (eye - PF) @ PE + (eye - PE)
    return jnp.linalg.svd(K, compute_uv=False)[-1]


# ---------------------------------------------------------------------------
# local minimisation of a scalar field near its smallest node values
# ---------------------------------------------------------------------------

def refine_minimum(scalar: Field, mesh: DomainMesh, values: np.ndarray, starts: int = 3) -> float:
    """Polish the smallest node values of a scalar field with Nelder-Mead."""
    best = float(np.nanmin(values))
    order = np.argsort(np.where(np.isfinite(values), values, -np.inf))[:starts]
    for i in order:
        c = int(mesh.chart[i])
        f = scalar._compiled_for(c)

        def obj(p, f=f):
            v = float(np.asarray(f(jnp.array([p[0]]), jnp.array([p[1]])))[0])
            return v if np.isfinite(v) else 0.0

        res = minimize(obj, x0=[mesh.x[i], mesh.y[i]], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400,
                                "initial_simplex": [[mesh.x[i], mesh.y[i]],
                                                    [mesh.x[i] + mesh.h, mesh.y[i]],
                                                    [mesh.x[i], mesh.y[i] + mesh.h]]})
        best = min(best, float(res.fun))
    return best


# ---------------------------------------------------------------------------
# osculating spaces and the canonical complex structure
# ---------------------------------------------------------------------------

def complex_line(L: Field) -> Field:
    """+i eigenline of the induced complex structure J on L (orthogonal projector).

    J is determined by d/dy P L = (d/dx P L) J on L; the regularised normal
    equations give J on L and zero on the complement.
    """
    vd = jet(L)

    def fn(x, y, c):
        P, d = vd(x, y, c)
        eye = jnp.eye(P.shape[-1])
        Dx = (eye - P) @ d[0] @ P
        Dy = (eye - P) @ d[1] @ P
        J = jnp.linalg.solve(dagger(Dx) @ Dx + eye - P, dagger(Dx) @ Dy)
        return 0.5 * (P - 1j * J)

    return Field(fn, "ell", L.analytic)


def osculating_step(E: Field) -> Field:
    """E + image of (1 - P_E) d/dz P_E on E, for a complex subbundle E."""
    vd = jet(E)

    def fn(x, y, c):
        P, d = vd(x, y, c)
        eye = jnp.eye(P.shape[-1])
        X = (eye - P) @ (0.5 * (d[0] - 1j * d[1])) @ P
        return P + image_projector_c1(X)

    return Field(fn, E.name + "+", E.analytic)


def osculating_chain(L: Field, n: int) -> list[Field]:
    """Complex osculating spaces E_0 ⊂ ... ⊂ E_n of the +i line of L."""
    chain = [complex_line(L)]
    for _ in range(n):
        chain.append(osculating_step(chain[-1]))
    return chain


def structure_field(E_top: Field) -> Field:
    fn = E_top.fn
    return Field(lambda x, y, c: structure_from_plus_space(fn(x, y, c)), "S", E_top.analytic)


def canonical_structure(L: Field, mesh: DomainMesh, n: int, tol: float = 1e-7,
                        chain: list[Field] | None = None) -> Field:
    """Canonical complex structure of a holomorphic curve L in HP^n.

    Built as S = i on E_n and -i on E_n j, with E_n the n-th complex osculating
    space of the +i line of L.  Raises NonFrenet if E_n meets E_n j somewhere
    (checked on nodes and polished by local minimisation).
    """
    chain = chain or osculating_chain(L, n)
    top = chain[-1]
    gap = Field(lambda x, y, c: plus_space_gap(top.fn(x, y, c)), "gap")
    vals = gap.sample(mesh)
    if not np.all(np.isfinite(vals)):
        raise NonFrenet("osculating space undefined at some node")
    low = refine_minimum(gap, mesh, vals)
    if low < tol:
        raise NonFrenet(f"osculating space meets its j-image (gap {low:.2e})")
    S = structure_field(top)
    sq = square_residual(S, mesh)
    if sq > 1e-6:
        raise NonFrenet(f"S^2 + 1 residual {sq:.2e}")
    return S


def square_residual(S: Field, mesh: DomainMesh) -> float:
    v = S.sample(mesh)
    eye = np.eye(v.shape[-1])
    return float(np.abs(v @ v + eye).max())


# ---------------------------------------------------------------------------
# Frenet flag
# ---------------------------------------------------------------------------

@dataclass
class FlagField:
    spaces: list[Field]   # projectors onto V_0, ..., V_n
    deltas: list[Field]   # one-forms (1 - P_k) dP_k P_k, k = 0..n-1

    @property
    def n(self) -> int:
        return len(self.spaces) - 1


def _flag_delta(V: Field, method: str, mesh: DomainMesh) -> Field:
    dV = differentiate(V, mesh, method)
    Pfn, dfn = V.fn, dV.fn

    def fn(x, y, c):
        P = Pfn(x, y, c)
        d = dfn(x, y, c)
        eye = jnp.eye(P.shape[-1])
        return jnp.stack([(eye - P) @ d[0] @ P, (eye - P) @ d[1] @ P])

    return Field(fn, "delta", V.analytic and method != "fd")


def flag_step(V: Field) -> Field:
    vd = jet(V)

    def fn(x, y, c):
        P, d = vd(x, y, c)
        eye = jnp.eye(P.shape[-1])
        X = (eye - P) @ d[0] @ P
        return P + image_projector_q1(X)

    return Field(fn, V.name + "+", V.analytic)


def flag_chain(L: Field, n: int) -> list[Field]:
    spaces = [L]
    for _ in range(n):
        spaces.append(flag_step(spaces[-1]))
    return spaces


def frenet_flag(L: Field, mesh: DomainMesh, n: int, spaces: list[Field] | None = None,
                tol: float = 1e-9) -> FlagField:
    """Frenet flag V_0 = L ⊂ V_1 ⊂ ... ⊂ V_n with V_{k+1} = V_k + Im delta_k.

    ``spaces`` may supply closed-form projectors; otherwise the recursion is
    differentiated with AD.  Raises NotFull if some delta_k vanishes on every
    node.
    """
    if spaces is None:
        spaces = flag_chain(L, n)
    deltas = []
    for k in range(n):
        dk = _flag_delta(spaces[k], "analytic", mesh)
        norms = node_norm(dk.sample(mesh))
        if not np.all(np.isfinite(norms)) and k > 0:
            norms = np.nan_to_num(norms)
        if np.nanmax(norms) <= tol:
            raise NotFull(f"delta_{k} vanishes identically: curve lies in a proper subspace")
        deltas.append(dk)
    top = spaces[-1].sample(mesh)
    if n > 0 and np.abs(top - np.eye(top.shape[-1])).max() > 1e-6:
        raise NotFull("flag does not reach the ambient space")
    return FlagField(spaces, deltas)


def flag_residuals(flag: FlagField, S: Field, mesh: DomainMesh, method: str = "analytic") -> dict:
    """Containment and type residuals of the flag derivatives."""
    Sv = S.sample(mesh)
    out = {"containment": 0.0, "type_left": 0.0, "type_right": 0.0}
    for k in range(flag.n):
        Vk = flag.spaces[k].sample(mesh)
        Vk1 = flag.spaces[k + 1].sample(mesh)
        d = _flag_delta(flag.spaces[k], method, mesh).sample(mesh)
        eye = np.eye(Vk.shape[-1])
        scale = max(float(np.median(node_norm(d))), 1e-300)
        out["containment"] = max(out["containment"], float(np.abs((eye - Vk1) @ d[:, 0]).max()) / scale)
        left = d[:, 1] - (eye - Vk) @ Sv @ d[:, 0]
        right = d[:, 1] - d[:, 0] @ Sv @ Vk
        out["type_left"] = max(out["type_left"], float(np.abs(left).max()) / scale)
        out["type_right"] = max(out["type_right"], float(np.abs(right).max()) / scale)
    return out


# ---------------------------------------------------------------------------
# Hopf fields
# ---------------------------------------------------------------------------

@dataclass
class HopfFields:
    S: Field
    A: Field
    Q: Field
    dS: Field


def hopf_fields(S: Field, mesh: DomainMesh | None = None, method: str = "analytic") -> HopfFields:
    """A and Q from 4*A = S*dS - dS and 4*Q = S*dS + dS."""
    if method == "analytic":
        dS = partial(S)
        vd = jet(S)
    else:
        dS = differentiate(S, mesh, method)
        Sfn, dfn = S.fn, dS.fn

        def vd(x, y, c):
            return Sfn(x, y, c), dfn(x, y, c)

    def A(x, y, c):
        s, d = vd(x, y, c)
        ax = (s @ d[0] + d[1]) / 4
        return jnp.stack([ax, s @ ax])

    def Q(x, y, c):
        s, d = vd(x, y, c)
        qx = (s @ d[0] - d[1]) / 4
        return jnp.stack([qx, -s @ qx])

    an = S.analytic and method == "analytic"
    return HopfFields(S, Field(A, "A", an), Field(Q, "Q", an), dS)


def type_residuals(hopf: HopfFields, mesh: DomainMesh) -> dict:
    """*A = SA, SA = -AS, *Q = -SQ, SQ = -QS as max node residuals."""
    S = hopf.S.sample(mesh)[:, None]
    A = hopf.A.sample(mesh)
    Q = hopf.Q.sample(mesh)
    starA = np.stack([A[:, 1], -A[:, 0]], axis=1)
    starQ = np.stack([Q[:, 1], -Q[:, 0]], axis=1)
    return {
        "starA": float(np.abs(starA - S @ A).max()),
        "anticommA": float(np.abs(S @ A + A @ S).max()),
        "starQ": float(np.abs(starQ + S @ Q).max()),
        "anticommQ": float(np.abs(S @ Q + Q @ S).max()),
    }


def reconstruction_residual(hopf: HopfFields, mesh: DomainMesh, method: str = "fd") -> dict:
    """Compare stored A, Q with 4*A = S*dS - dS, 4*Q = S*dS + dS using an independent dS."""
    dS = differentiate(hopf.S, mesh, method).sample(mesh)
    S = hopf.S.sample(mesh)
    A = hopf.A.sample(mesh)
    Q = hopf.Q.sample(mesh)
    star_dS = np.stack([dS[:, 1], -dS[:, 0]], axis=1)
    Sb = S[:, None]
    rhsA = Sb @ star_dS - dS
    rhsQ = Sb @ star_dS + dS
    starA = 4 * np.stack([A[:, 1], -A[:, 0]], axis=1)
    starQ = 4 * np.stack([Q[:, 1], -Q[:, 0]], axis=1)
    return {"A": float(np.abs(starA - rhsA).max()), "Q": float(np.abs(starQ - rhsQ).max())}


def _curvature_field(conn: Field, mesh: DomainMesh, method: str) -> Field:
    d = differentiate(conn, mesh, method)
    cfn, dfn = conn.fn, d.fn

    def fn(x, y, c):
        w = cfn(x, y, c)
        dw = dfn(x, y, c)
        return dw[0, 1] - dw[1, 0] + w[0] @ w[1] - w[1] @ w[0]

    return Field(fn, "R", False)


def curvature_check(hopf: HopfFields, mesh: DomainMesh, method: str = "fd") -> float:
    """Max node distance between R of d - (A+Q) and 2S(A_x^2 - Q_x^2)."""
    Afn, Qfn = hopf.A.fn, hopf.Q.fn
    conn = Field(lambda x, y, c: -(Afn(x, y, c) + Qfn(x, y, c)), "w", hopf.A.analytic)
    R = _curvature_field(conn, mesh, method).sample(mesh)
    S = hopf.S.sample(mesh)
    A = hopf.A.sample(mesh)[:, 0]
    Q = hopf.Q.sample(mesh)[:, 0]
    rhs = 2 * S @ (A @ A - Q @ Q)
    return float(np.abs(R - rhs).max())


def curvature_wedge_form(hopf: HopfFields, mesh: DomainMesh) -> float:
    """Max difference between -(Q^Q + A^A) and 2S(A_x^2 - Q_x^2)."""
    S = hopf.S.sample(mesh)
    A = hopf.A.sample(mesh)
    Q = hopf.Q.sample(mesh)
    ww = -(Q[:, 0] @ Q[:, 1] - Q[:, 1] @ Q[:, 0] + A[:, 0] @ A[:, 1] - A[:, 1] @ A[:, 0])
    rhs = 2 * S @ (A[:, 0] @ A[:, 0] - Q[:, 0] @ Q[:, 0])
    return float(np.abs(ww - rhs).max())


def associated_family_flatness(hopf: HopfFields, theta: float, mesh: DomainMesh, method: str = "fd") -> float:
    """Curvature of d + (lambda - 1)A with lambda = cos(theta) + sin(theta) S."""
    Afn, Sfn = hopf.A.fn, hopf.S.fn
    c0, s0 = float(np.cos(theta)) - 1.0, float(np.sin(theta))

    def conn(x, y, c):
        a = Afn(x, y, c)
        s = Sfn(x, y, c)
        return c0 * a + s0 * (s @ a)

    w = Field(conn, "lambda-A", hopf.A.analytic)
    # the full connection is d + w: curvature of the trivial part vanishes
    R = _curvature_field(w, mesh, method).sample(mesh)
    return float(np.abs(R).max())


def conformality_residual(hopf: HopfFields, mesh: DomainMesh) -> float:
    """<*dS, *dS> vs <dS, dS> as symmetric bilinear form values."""
    d = hopf.dS.sample(mesh)
    xx = np.real(np.trace(d[:, 0] @ d[:, 0], axis1=-2, axis2=-1)) / 2
    yy = np.real(np.trace(d[:, 1] @ d[:, 1], axis1=-2, axis2=-1)) / 2
    xy = np.real(np.trace(d[:, 0] @ d[:, 1], axis1=-2, axis2=-1)) / 2
    return float(max(np.abs(xx - yy).max(), np.abs(xy).max()))
