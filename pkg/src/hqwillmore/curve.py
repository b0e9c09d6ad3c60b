"""Curve specifications and their realisation as fields on the sphere.

A :class:`CurveSpec` is declarative JSON data.  :func:`build_curve` turns it
into a :class:`Curve`: the projector field of the line bundle ``L`` plus
whatever closed-form data the construction provides (complex structure,
flag, complex osculating spaces).  Missing pieces are computed from ``L``
by the gauge-free recursions in :mod:`hqwillmore.structure`.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from . import structure as st
from .domain import DomainMesh, Field
from .errors import (FlagUnavailable, NotFull, NotStable, QuaternionicOsculant, RankOne,
                     SpecParse, UnresolvedZero)
from .qalg import frame_matrix, quaternionic_frame

SCHEMA = 1
KINDS = ("twistor", "dual-of", "projection-of", "backlund-of", "direct")


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

def _parse_complex(c) -> complex:
    if isinstance(c, (int, float)):
        return complex(c)
    if isinstance(c, (list, tuple)) and len(c) == 2 and all(isinstance(t, (int, float)) for t in c):
        return complex(c[0], c[1])
    raise SpecParse(f"bad complex coefficient {c!r}; expected [re, im]")


def _encode_complex(c: complex) -> list[float]:
    return [float(np.real(c)), float(np.imag(c))]


@dataclass
class CurveSpec:
    kind: str
    n: int
    polynomials: list[list[complex]] | None = None     # twistor
    charts: list[np.ndarray] | None = None              # direct: per chart (2m, dz, dzbar)
    parent: "CurveSpec | None" = None
    parent_path: str | None = None
    kernel: np.ndarray | None = None                    # projection-of: complex 2m x r frame
    direction: str | None = None                        # backlund-of
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.n + 1

    # -- serialisation ----------------------------------------------------
    def to_json(self, inline_parent: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {"schema": SCHEMA, "kind": self.kind, "n": self.n}
        if self.label:
            d["label"] = self.label
        if self.kind == "twistor":
            d["polynomials"] = [[_encode_complex(c) for c in p] for p in self.polynomials]
        elif self.kind == "direct":
            d["charts"] = [[[[_encode_complex(c) for c in row] for row in entry] for entry in ch]
                           for ch in self.charts]
        else:
            if self.parent_path and not inline_parent:
                d["parent"] = self.parent_path
            else:
                d["parent"] = self.parent.to_json()
            if self.kind == "projection-of":
                d["kernel"] = [[_encode_complex(c) for c in col] for col in self.kernel.T]
            if self.kind == "backlund-of":
                d["direction"] = self.direction
        d.update(self.extra)
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


SPEC_KEYS = {"schema", "kind", "n", "label", "polynomials", "charts", "parent", "kernel", "direction"}


def parse_spec(data: Any, base: Path | None = None) -> CurveSpec:
    """Validate a spec document; keys outside the schema are kept as annotations."""
    spec = _parse_spec(data, base)
    spec.extra = {k: v for k, v in data.items() if k not in SPEC_KEYS}
    return spec


def _parse_spec(data: Any, base: Path | None = None) -> CurveSpec:
    if not isinstance(data, dict):
        raise SpecParse("curve spec must be a JSON object")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise SpecParse(f"unsupported schema {schema!r}")
    kind = data.get("kind")
    if kind not in KINDS:
        raise SpecParse(f"unknown curve kind {kind!r}")
    label = str(data.get("label", ""))
    if kind in ("twistor", "direct"):
        n = data.get("n")
        if not isinstance(n, int) or n < 1:
            raise SpecParse("field 'n' must be a positive integer")
    if kind == "twistor":
        polys = data.get("polynomials")
        if not isinstance(polys, list) or len(polys) != 2 * n + 2:
            raise SpecParse(f"twistor spec needs {2 * n + 2} polynomials")
        parsed = []
        for p in polys:
            if not isinstance(p, list) or not p:
                raise SpecParse("each polynomial must be a non-empty coefficient list")
            parsed.append([_parse_complex(c) for c in p])
        if all(abs(c) == 0 for p in parsed for c in p):
            raise SpecParse("twistor polynomials are all zero")
        return CurveSpec("twistor", n, polynomials=parsed, label=label)
    if kind == "direct":
        charts = data.get("charts")
        if not isinstance(charts, list) or len(charts) != 2:
            raise SpecParse("direct spec needs coefficient arrays for both charts")
        arrs = []
        for ch in charts:
            if not isinstance(ch, list) or len(ch) != 2 * n + 2:
                raise SpecParse(f"direct spec needs {2 * n + 2} entries per chart")
            try:
                entries = [np.array([[_parse_complex(c) for c in row] for row in e], dtype=complex) for e in ch]
            except (TypeError, ValueError) as exc:
                raise SpecParse(f"bad direct coefficient array: {exc}") from None
            dz = max(e.shape[0] for e in entries)
            dzb = max(e.shape[1] for e in entries)
            arr = np.zeros((len(entries), dz, dzb), complex)
            for i, e in enumerate(entries):
                arr[i, : e.shape[0], : e.shape[1]] = e
            arrs.append(arr)
        return CurveSpec("direct", n, charts=arrs, label=label)
    # derived kinds
    raw_parent = data.get("parent")
    parent_path = None
    if isinstance(raw_parent, str):
        path = Path(raw_parent)
        if not path.is_absolute() and base is not None:
            path = base / path
        parent_path = raw_parent
        parent = load_spec(path)
    elif isinstance(raw_parent, dict):
        parent = parse_spec(raw_parent, base)
    else:
        raise SpecParse("derived spec needs a 'parent' path or object")
    if kind == "dual-of":
        return CurveSpec(kind, parent.n, parent=parent, parent_path=parent_path, label=label)
    if kind == "projection-of":
        ker = data.get("kernel")
        if not isinstance(ker, list) or not ker:
            raise SpecParse("projection spec needs a non-empty 'kernel' list of vectors")
        cols = np.array([[_parse_complex(c) for c in col] for col in ker], dtype=complex).T
        if cols.shape[0] != 2 * parent.m:
            raise SpecParse("kernel vectors must have length 2(n+1) of the parent")
        frame = quaternionic_frame(cols)
        return CurveSpec(kind, parent.n - frame.shape[1], parent=parent, parent_path=parent_path,
                         kernel=frame, label=label)
    direction = data.get("direction")
    if direction not in ("forward", "backward"):
        raise SpecParse("backlund-of spec needs direction 'forward' or 'backward'")
    return CurveSpec(kind, parent.n, parent=parent, parent_path=parent_path, direction=direction, label=label)


def load_spec(path: str | os.PathLike) -> CurveSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise SpecParse(f"spec file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SpecParse(f"malformed JSON in {path}: {exc}") from None
    return parse_spec(data, path.parent)


def twistor_spec(polys, label: str = "") -> CurveSpec:
    polys = [[complex(c) for c in p] for p in polys]
    if len(polys) % 2:
        raise SpecParse("need an even number of polynomials")
    return CurveSpec("twistor", len(polys) // 2 - 1, polynomials=polys, label=label)


# ---------------------------------------------------------------------------
# runtime curves
# ---------------------------------------------------------------------------

@dataclass
class Curve:
    """A holomorphic curve realised as fields.

    ``flag_spaces`` and ``chain`` are closed-form lists when available and are
    otherwise filled lazily by the structure recursions.
    """
    n: int
    line: Field
    structure: Field | None = None
    flag_spaces: list[Field] | None = None
    chain: list[Field] | None = None
    spec: CurveSpec | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.n + 1

    def osculating(self) -> list[Field]:
        if self.chain is None:
            self.chain = st.osculating_chain(self.line, self.n)
        return self.chain

    def S(self, mesh: DomainMesh) -> Field:
        if self.structure is None:
            self.structure = st.canonical_structure(self.line, mesh, self.n, chain=self.osculating())
        return self.structure

    def flag(self, mesh: DomainMesh) -> st.FlagField:
        f = st.frenet_flag(self.line, mesh, self.n, spaces=self.flag_spaces)
        self.flag_spaces = f.spaces
        return f


# -- polynomial data ----------------------------------------------------------

def _coeff_matrix(polys: list[list[complex]]) -> np.ndarray:
    d = max(len(p) for p in polys)
    C = np.zeros((len(polys), d), complex)
    for i, p in enumerate(polys):
        C[i, : len(p)] = p
    # strip trailing zero columns
    while C.shape[1] > 1 and not np.any(C[:, -1]):
        C = C[:, :-1]
    return C


def _derivative_matrices(C: np.ndarray, k: int) -> list[np.ndarray]:
    out = [C]
    for _ in range(k):
        D = out[-1]
        if D.shape[1] <= 1:
            out.append(np.zeros_like(D[:, :1]))
            continue
        out.append(D[:, 1:] * np.arange(1, D.shape[1]))
    return out


def _polyval(C: jnp.ndarray, z):
    powers = z ** jnp.arange(C.shape[1])
    return C @ powers


def quaternionic_rank(C: np.ndarray, tol: float = 1e-10) -> int:
    """Quaternionic rank of the span of the columns of a complex 2m x k matrix."""
    if not np.any(C):
        return 0
    return quaternionic_frame(C, tol=tol).shape[1]


def _completion(v: np.ndarray) -> np.ndarray:
    """Complex m-frame E containing v with E ∩ E j = 0."""
    dim = v.shape[0]
    cand = np.concatenate([v[:, None], np.eye(dim, dtype=complex)], axis=1)
    return quaternionic_frame(cand, rank=dim // 2)


def twistor_project(spec: CurveSpec, mesh: DomainMesh, osculant_tol: float = 1e-6) -> Curve:
    """Twistor projection of the complex curve h in CP^{2n+1}.

    Returns a curve with closed-form line, canonical structure (S = i on the
    osculating space W_n and -i on W_n j), Frenet flag and complex osculating
    spaces.  Both charts use the same projective data: chart 1 evaluates the
    reversed coefficient lists w^d h(1/w).
    """
    if spec.kind != "twistor":
        raise ValueError("twistor_project needs a twistor spec")
    n, dim = spec.n, 2 * spec.m
    C = _coeff_matrix(spec.polynomials)
    if C.shape[0] != dim:
        raise SpecParse("polynomial count does not match n")
    qr = quaternionic_rank(C)
    constant = C.shape[1] == 1
    if not constant and qr < spec.m:
        raise NotFull(f"polynomials span a quaternionic subspace of rank {qr} < {spec.m}")
    charts = [C, C[:, ::-1].copy()]
    ders = [[jnp.asarray(D) for D in _derivative_matrices(Cc, n)] for Cc in charts]

    def W(x, y, c, k):
        z = x + 1j * y
        mats = ders[0] if c == 0 else ders[1]
        return jnp.stack([_polyval(mats[j], z) for j in range(k + 1)], axis=1)

    if constant:
        E = jnp.asarray(_completion(C[:, 0]))
        PE = E @ E.conj().T
        S0 = st.structure_from_plus_space(PE)
        line = Field(lambda x, y, c: st.line_projector(jnp.asarray(C[:, 0])) + 0 * x, "L")
        S = Field(lambda x, y, c: S0 + 0 * x, "S")
        return Curve(n, line, S, None, None, spec, spec.label or "twistor", {"constant": True})

    line = Field(lambda x, y, c: st.line_projector(W(x, y, c, 0)[:, 0]), "L")
    S = Field(lambda x, y, c: _twistor_S(W(x, y, c, n)), "S")
    flag = [Field(lambda x, y, c, k=k: st.quaternionic_span_projector(W(x, y, c, k)), f"V{k}")
            for k in range(n + 1)]
    chain = [Field(lambda x, y, c, k=k: st.frame_projector(W(x, y, c, k)), f"E{k}") for k in range(n + 1)]
    _check_osculant(Field(lambda x, y, c: _osculant_measure(W(x, y, c, n)), "osc"), mesh, osculant_tol)
    return Curve(n, line, S, flag, chain, spec, spec.label or "twistor")


def _twistor_S(Wn):
    dim = Wn.shape[0]
    F = jnp.concatenate([Wn, st.omega_j(dim) @ jnp.conj(Wn)], axis=1)
    m = dim // 2
    D = jnp.concatenate([jnp.full(m, 1j), jnp.full(m, -1j)])
    return (F * D[None, :]) @ jnp.linalg.inv(F)


def _osculant_measure(Wn):
    """|det [Q, Q j]| for an orthonormal basis Q of W_n: 1 when W ⊥ Wj, 0 when they meet."""
    Qm, _ = jnp.linalg.qr(Wn)
    F = jnp.concatenate([Qm, st.omega_j(Wn.shape[0]) @ jnp.conj(Qm)], axis=1)
    return jnp.abs(jnp.linalg.det(F))


def _check_osculant(measure: Field, mesh: DomainMesh, tol: float) -> None:
    vals = measure.sample(mesh)
    if not np.all(np.isfinite(vals)):
        raise QuaternionicOsculant("osculating frame is singular at a node")
    low = st.refine_minimum(measure, mesh, vals)
    if low < tol:
        raise QuaternionicOsculant(f"W_n meets W_n j: direct-sum determinant {low:.2e}")


def osculant_determinant(spec: CurveSpec, z: complex) -> float:
    """Scale-free direct-sum determinant of W_n and W_n j at a chart-0 point."""
    C = _coeff_matrix(spec.polynomials)
    mats = _derivative_matrices(C, spec.n)
    Wn = np.stack([M @ (z ** np.arange(M.shape[1])) for M in mats], axis=1)
    return float(_osculant_measure(jnp.asarray(Wn)))


# -- direct data ---------------------------------------------------------------

def _direct_section(arr: np.ndarray):
    A = jnp.asarray(arr)
    iz = jnp.arange(arr.shape[1])
    izb = jnp.arange(arr.shape[2])

    def psi(x, y):
        z = x + 1j * y
        pz = z**iz
        pzb = jnp.conj(z) ** izb
        return jnp.einsum("eij,i,j->e", A, pz, pzb)

    return psi


def direct_curve(spec: CurveSpec) -> Curve:
    sections = [_direct_section(a) for a in spec.charts]
    line = Field(lambda x, y, c: st.line_projector(sections[c](x, y)), "L")
    return Curve(spec.n, line, None, None, None, spec, spec.label or "direct")


# -- dual curve ----------------------------------------------------------------

def dual_curve(curve: Curve, mesh: DomainMesh, check: bool = True) -> Curve:
    """L* = V_{n-1}^⊥ with S* = S^H and flag V*_k = V_{n-1-k}^⊥.

    With ``check=False`` nothing is sampled: the flag is built by the
    recursion and S is resolved on first evaluation of S*.
    """
    n = curve.n
    if check:
        try:
            spaces = curve.flag(mesh).spaces
        except NotFull as exc:
            raise FlagUnavailable(str(exc)) from exc
        S = curve.S(mesh)
    else:
        spaces = curve.flag_spaces or st.flag_chain(curve.line, n)
        S = curve.structure or st.structure_field(curve.osculating()[-1])

    def perp(F: Field, name: str) -> Field:
        fn = F.fn
        return Field(lambda x, y, c: jnp.eye(2 * curve.m) - fn(x, y, c), name, F.analytic)

    dual_spaces = [perp(spaces[n - 1 - k], f"V*{k}") for k in range(n)]
    dual_spaces.append(Field(lambda x, y, c: jnp.eye(2 * curve.m, dtype=complex) + 0 * x, f"V*{n}"))
    Sfn = S.fn
    Sstar = Field(lambda x, y, c: st.dagger(Sfn(x, y, c)), "S*", S.analytic)
    return Curve(n, dual_spaces[0], Sstar, dual_spaces, None,
                 CurveSpec("dual-of", n, parent=curve.spec) if curve.spec else None,
                 f"dual({curve.label})")


# -- projections ---------------------------------------------------------------

def restrict_projector(P, U):
    """Quaternionic rank-one projector U^H P U renormalised (U: frame matrix)."""
    R = st.dagger(U) @ P @ U
    return 2 * R / jnp.trace(R).real


def restricted_curve(curve: Curve, U: np.ndarray, n_new: int, label: str, spec: CurveSpec | None = None,
                     structure: Field | None = None) -> Curve:
    """Curve L restricted to (or projected onto) the span of a quaternionic frame."""
    Uc = jnp.asarray(frame_matrix(U))
    Lfn = curve.line.fn
    line = Field(lambda x, y, c: restrict_projector(Lfn(x, y, c), Uc), "L", curve.line.analytic)
    return Curve(n_new, line, structure, None, None, spec, label)


def project_curve(curve: Curve, mesh: DomainMesh, kernel: np.ndarray, stable_tol: float = 1e-6,
                  zero_tol: float = 1e-8) -> Curve:
    """Projection of L to V / Vhat with Vhat spanned by the quaternionic frame ``kernel``."""
    dim = 2 * curve.m
    kernel = np.asarray(kernel, dtype=complex).reshape(dim, -1)
    if kernel.shape[1] == 0 or not np.any(kernel):
        return curve
    K = quaternionic_frame(kernel)
    S = curve.S(mesh).sample(mesh)
    Kc = frame_matrix(K)
    leak = (np.eye(dim) - Kc @ Kc.conj().T) @ S @ Kc
    if np.abs(leak).max() > stable_tol * max(1.0, np.abs(S).max()):
        raise NotStable(f"kernel is not S-stable (leak {np.abs(leak).max():.2e})")
    r = curve.m - K.shape[1]
    if r < 1:
        raise RankOne("projection kills everything")
    comp = quaternionic_frame(np.concatenate([K, np.eye(dim, dtype=complex)], axis=1), rank=curve.m)[:, K.shape[1]:]
    if r == 1:
        raise RankOne("quotient has quaternionic rank one: the projection is a flat line bundle")
    spec = CurveSpec("projection-of", r - 1, parent=curve.spec, kernel=K) if curve.spec else None
    out = restricted_curve(curve, comp, r - 1, f"proj({curve.label})", spec)
    vals = np.asarray(Field(lambda x, y, c: jnp.trace(st.dagger(jnp.asarray(frame_matrix(comp))) @ curve.line.fn(x, y, c)
                                                        @ jnp.asarray(frame_matrix(comp))).real, "nz").sample(mesh))
    if vals.min() < zero_tol:
        out.meta["zero_nodes"] = int(np.sum(vals < zero_tol))
    return out


def generic_projection(curve: Curve, kernel: np.ndarray) -> Curve:
    """Projection along an arbitrary (not necessarily S-stable) constant subspace."""
    dim = 2 * curve.m
    K = quaternionic_frame(np.asarray(kernel, complex).reshape(dim, -1))
    r = curve.m - K.shape[1]
    comp = quaternionic_frame(np.concatenate([K, np.eye(dim, dtype=complex)], axis=1), rank=curve.m)[:, K.shape[1]:]
    spec = CurveSpec("projection-of", r - 1, parent=curve.spec, kernel=K) if curve.spec else None
    return restricted_curve(curve, comp, r - 1, f"proj({curve.label})", spec)


# ---------------------------------------------------------------------------
# building curves from specs
# ---------------------------------------------------------------------------

def build_curve(spec: CurveSpec, mesh: DomainMesh) -> Curve:
    if spec.kind == "twistor":
        return twistor_project(spec, mesh)
    if spec.kind == "direct":
        return direct_curve(spec)
    parent = build_curve(spec.parent, mesh)
    if spec.kind == "dual-of":
        out = dual_curve(parent, mesh)
        out.spec = spec
        return out
    if spec.kind == "projection-of":
        out = generic_projection(parent, spec.kernel)
        out.spec = spec
        return out
    from .backlund import backward_backlund, forward_backlund  # local import: backlund builds on curve
    res = (forward_backlund if spec.direction == "forward" else backward_backlund)(parent, mesh)
    if res.curve is None:
        raise RankOne("Baecklund transform is a constant point, not a curve")
    res.curve.spec = spec
    return res.curve


# ---------------------------------------------------------------------------
# vanishing orders of the flag derivatives
# ---------------------------------------------------------------------------

@dataclass
class VanishingOrderReport:
    zeros: list[tuple[complex, int, int, int]]   # (center, chart, i, order)
    n: int

    @property
    def ord_H(self) -> int:
        return sum((self.n - i) * o for _, _, i, o in self.zeros)

    def orders(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for _, _, i, o in self.zeros:
            out[i] = out.get(i, 0) + o
        return out

    def to_json(self) -> dict:
        return {"ord_H": self.ord_H,
                "zeros": [{"center": _encode_complex(z), "chart": ch, "index": i, "order": o}
                          for z, ch, i, o in self.zeros]}


def _cluster(points: np.ndarray, radius: float) -> list[np.ndarray]:
    clusters: list[list[int]] = []
    centers: list[complex] = []
    for k, p in enumerate(points):
        for c, ctr in zip(clusters, centers):
            if abs(p - ctr) < radius:
                c.append(k)
                break
        else:
            clusters.append([k])
            centers.append(p)
    return [np.array(c) for c in clusters]


def _winding(values: np.ndarray) -> int:
    ang = np.angle(values)
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(np.rint(d.sum() / (2 * np.pi)))


def _coefficient_field(curve: Curve, mesh: DomainMesh, i: int):
    """Complex scalar c with delta_i(d/dx) u_i = u_{i+1} c mod (V_i, u_{i+1} j).

    u_k is a smooth unit vector of E_k ⊖ E_{k-1}; the choice P v0 with a
    fixed v0 is smooth and nonzero near any point where P v0 != 0.  Returns
    an evaluator ``(x, y, chart, v0_i, v0_next) -> c`` compiled once.
    """
    chain = curve.osculating()
    flag = curve.flag(mesh).spaces
    Efn = [E.fn for E in chain]
    Vfn = flag[i].fn

    def unit(x, y, c, k, v0):
        P = Efn[k](x, y, c)
        if k > 0:
            P = P - Efn[k - 1](x, y, c)
        u = P @ v0
        return u / jnp.linalg.norm(u)

    def fn(x, y, c, v0i, v0n):
        dui = jax_jvp_x(lambda t: unit(t, y, c, i, v0i), x)
        un = unit(x, y, c, i + 1, v0n)
        V = Vfn(x, y, c)
        # least squares on [u_n, u_n j, V_i] avoids a (non-smooth) orthonormal basis of V_i
        M = jnp.concatenate([un[:, None], st.jvec(un)[:, None], V], axis=1)
        coef, *_ = jnp.linalg.lstsq(M, dui)
        return coef[0]

    batched = jax.jit(jax.vmap(fn, in_axes=(0, 0, None, None, None)), static_argnums=2)
    return lambda x, y, chart, v0i, v0n: np.asarray(batched(jnp.asarray(x), jnp.asarray(y), chart,
                                                            jnp.asarray(v0i), jnp.asarray(v0n)))


def jax_jvp_x(f, x):
    return jax.jvp(f, (x,), (jnp.ones_like(x),))[1]


def _local_minima(norms: np.ndarray, mesh: DomainMesh, cand: np.ndarray, radius: float) -> np.ndarray:
    """Members of ``cand`` whose norm is minimal among same-chart nodes within ``radius``."""
    keep = []
    for chart in (0, 1):
        sel = np.nonzero(mesh.chart == chart)[0]
        tree = cKDTree(np.stack([mesh.x[sel], mesh.y[sel]], axis=1))
        for k in cand[mesh.chart[cand] == chart]:
            nb = sel[tree.query_ball_point([mesh.x[k], mesh.y[k]], radius)]
            if norms[k] <= norms[nb].min():
                keep.append(k)
    return np.array(sorted(keep), dtype=int)


def _polish_zero(delta: Field, chart: int, start: complex, step: float) -> tuple[complex, float]:
    """Nelder-Mead on |delta| from a node; returns the minimiser and the minimum."""
    f = delta._compiled_for(chart)

    def obj(p):
        v = np.asarray(f(jnp.array([p[0]]), jnp.array([p[1]])))
        n = float(np.sqrt(np.sum(np.abs(v) ** 2)))
        return n if np.isfinite(n) else 0.0

    x0 = [start.real, start.imag]
    res = minimize(obj, x0=x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 600,
                            "initial_simplex": [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]]})
    return complex(res.x[0], res.x[1]), float(res.fun)


def vanishing_orders(curve: Curve, mesh: DomainMesh, tol: float = 0.25, zero_tol: float = 1e-6,
                     radii: tuple[float, float] = (8.0, 16.0), samples: int = 64,
                     spacing: float | None = None) -> VanishingOrderReport:
    """Locate zeros of delta_i and estimate their orders by winding numbers.

    Candidates are local minima of |delta_i| below ``tol`` times its median.
    Each is polished off-mesh and kept only if |delta_i| drops below
    ``zero_tol`` times the median; its order is the winding number of the
    coefficient field on circles of radius ``radii * spacing`` (``spacing``
    defaults to an eighth of the cell size), which must agree.
    """
    spacing = mesh.h / 8 if spacing is None else spacing
    flag = curve.flag(mesh)
    zeros: list[tuple[complex, int, int, int]] = []
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    # chart ownership: chart 0 owns |z| <= 1, chart 1 owns |w| < 1
    r = np.abs(mesh.z)
    owned = np.where(mesh.chart == 0, r <= 1.0, r < 1.0)
    for i, d in enumerate(flag.deltas):
        norms = np.nan_to_num(_delta_norm(d, mesh), nan=0.0)
        med = float(np.median(norms))
        low = np.nonzero((norms < tol * med) & owned)[0]
        cand = _local_minima(norms, mesh, low, 0.5 * mesh.h) if low.size else low
        coef = None
        for chart in (0, 1):
            idx = cand[mesh.chart[cand] == chart]
            for cl in _cluster(mesh.z[idx], 32 * spacing):
                members = idx[cl]
                start = complex(mesh.z[members[np.argmin(norms[members])]])
                center, value = _polish_zero(d, chart, start, mesh.h / 4)
                if value > zero_tol * med or (abs(center) > 1.0 if chart == 0 else abs(center) >= 1.0):
                    continue
                coef = coef or _coefficient_field(curve, mesh, i)
                v0i, v0n = _reference_vectors(curve, chart, center, i)
                orders = []
                for rad in radii:
                    pts = center + rad * spacing * np.exp(1j * th)
                    orders.append(_winding(coef(pts.real, pts.imag, chart, v0i, v0n)))
                if orders[0] != orders[1] or orders[0] <= 0:
                    raise UnresolvedZero(f"delta_{i} near {center:.4f} (chart {chart}): windings {orders}")
                zeros.append((center, chart, i, orders[0]))
    return VanishingOrderReport(zeros, curve.n)


def _delta_norm(delta: Field, mesh: DomainMesh) -> np.ndarray:
    v = delta.sample(mesh)
    return np.sqrt(np.sum(np.abs(v.reshape(v.shape[0], -1)) ** 2, axis=1))


def _reference_vectors(curve: Curve, chart: int, z: complex, i: int):
    chain = curve.osculating()
    def top_vec(k):
        P = np.asarray(chain[k].evaluate(np.array([z.real]), np.array([z.imag]), chart))[0]
        if k > 0:
            P = P - np.asarray(chain[k - 1].evaluate(np.array([z.real]), np.array([z.imag]), chart))[0]
        w, V = np.linalg.eigh((P + P.conj().T) / 2)
        return V[:, -1]
    return top_vec(i), top_vec(i + 1)
