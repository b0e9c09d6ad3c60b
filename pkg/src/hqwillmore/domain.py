"""The Riemann sphere as two stereographic charts.

Chart 0 uses the coordinate ``z``; chart 1 uses ``w = 1/z``.  Each chart is
covered by a polar tensor grid of Gauss-Legendre cells on ``|z| <= 1.05``.  A
smooth partition of unity in ``log |z|`` glues the charts; because the bump is
odd-symmetric in ``log |z|`` the same blend function serves both charts.

Fields are jax functions ``f(x, y, chart)`` that can be evaluated anywhere in
a chart.  Derivatives come either from forward-mode AD (``jax.jvp``) or from a
fourth-order central difference with the mesh cell size.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import BoundaryStencil, ConfigError

BAND = 1.05
CHART_RADIUS = 2.5
GAUSS_POINTS = 4
CHUNK = int(os.environ.get("QW_CHUNK", "8192"))


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 (t <= -1) to 1 (t >= 1) with s(t) + s(-t) = 1."""
    t = np.clip(t, -1.0, 1.0)

    def g(u):
        return np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)

    a, b = g(1 + t), g(1 - t)
    return a / (a + b)


def blend(r: np.ndarray) -> np.ndarray:
    """Weight of chart 0 at radius ``r`` (1 inside, 0 beyond the band)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        t = np.log(np.maximum(r, 1e-300)) / math.log(BAND)
    return 1.0 - _smooth_step(t)


@dataclass(frozen=True)
class DomainMesh:
    depth: int
    chart: np.ndarray
    x: np.ndarray
    y: np.ndarray
    weight: np.ndarray
    h: float
    points: int = GAUSS_POINTS
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.y

    @property
    def fd_step(self) -> float:
        """Finite-difference step: the mean Gauss sub-cell width h / p."""
        return self.h / self.points

    @property
    def size(self) -> int:
        return int(self.x.size)

    @property
    def round_weight(self) -> np.ndarray:
        """Quadrature weights carrying the round conformal factor 4/(1+|z|^2)^2."""
        return self.weight * 4.0 / (1.0 + np.abs(self.z) ** 2) ** 2

    def chart_indices(self, chart: int) -> np.ndarray:
        if chart not in self._index:
            self._index[chart] = np.nonzero(self.chart == chart)[0]
        return self._index[chart]

    def global_z(self) -> np.ndarray:
        """Node positions in the chart-0 coordinate (inf for w = 0 never occurs)."""
        z = self.z.copy()
        one = self.chart == 1
        z[one] = 1.0 / z[one]
        return z

    def overlap(self, margin: float = 0.05) -> np.ndarray:
        """Indices of chart-0 nodes inside the blending band."""
        r = np.abs(self.z)
        return np.nonzero((self.chart == 0) & (r > 1 - margin))[0]

    def swapped(self) -> "DomainMesh":
        """Same nodes with the chart labels exchanged (a relabelling)."""
        order = np.concatenate([self.chart_indices(1), self.chart_indices(0)])
        return DomainMesh(self.depth, 1 - self.chart[order], self.x[order], self.y[order],
                          self.weight[order], self.h, self.points)


def _gauss_cells(edges: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    g, w = leggauss(p)
    a, b = edges[:-1, None], edges[1:, None]
    return ((a + b) / 2 + (b - a) / 2 * g).ravel(), ((b - a) / 2 * w).ravel()


def build_mesh(depth: int, gauss_points: int = GAUSS_POINTS) -> DomainMesh:
    """Two-chart polar Gauss-Legendre mesh; ``32 * 4**depth`` nodes for p = 4."""
    if not isinstance(depth, (int, np.integer)) or not 1 <= depth <= 10:
        raise ConfigError(f"mesh depth must be an integer in [1, 10], got {depth!r}")
    inner = 1.0 / BAND
    n_r = 2 ** (depth - 1)
    n_theta = 2**depth
    edges = np.concatenate([np.linspace(0.0, inner, n_r + 1), np.linspace(inner, BAND, n_r + 1)[1:]])
    r, wr = _gauss_cells(edges, gauss_points)
    t, wt = _gauss_cells(np.linspace(0.0, 2 * np.pi, n_theta + 1), gauss_points)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    ww = np.outer(wr * r * blend(r), wt)
    x = (rr * np.cos(tt)).ravel()
    y = (rr * np.sin(tt)).ravel()
    w = ww.ravel()
    n = x.size
    return DomainMesh(
        depth=int(depth),
        chart=np.concatenate([np.zeros(n, np.int8), np.ones(n, np.int8)]),
        x=np.concatenate([x, x]),
        y=np.concatenate([y, y]),
        weight=np.concatenate([w, w]),
        h=inner / n_r,
        points=int(gauss_points),
    )


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

FieldFn = Callable[[jax.Array, jax.Array, int], jax.Array]


class Field:
    """A pointwise jax function ``fn(x, y, chart)`` sampled on meshes.

    ``analytic`` marks fields whose AD derivative is trustworthy (all
    polynomial/rational data and everything composed from it).
    """

    def __init__(self, fn: FieldFn, name: str = "field", analytic: bool = True):
        # a jit boundary per field lets jax reuse traced jaxprs across nesting levels
        self.fn = jax.jit(fn, static_argnums=2)
        self.name = name
        self.analytic = analytic
        self._compiled: dict[int, Callable] = {}
        self._cache: dict[tuple, np.ndarray] = {}

    def __call__(self, x, y, chart: int):
        return self.fn(x, y, chart)

    def _compiled_for(self, chart: int):
        if chart not in self._compiled:
            fn = self.fn
            self._compiled[chart] = jax.jit(jax.vmap(lambda x, y: fn(x, y, chart)))
        return self._compiled[chart]

    def evaluate(self, x: np.ndarray, y: np.ndarray, chart: int) -> np.ndarray:
        f = self._compiled_for(chart)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0:
            probe = np.asarray(f(jnp.zeros(1), jnp.zeros(1)))
            return np.zeros((0,) + probe.shape[1:], probe.dtype)
        parts = [np.asarray(f(jnp.asarray(x[i:i + CHUNK]), jnp.asarray(y[i:i + CHUNK])))
                 for i in range(0, x.size, CHUNK)]
        return np.concatenate(parts, axis=0)

    def sample(self, mesh: DomainMesh) -> np.ndarray:
        key = (mesh.depth, mesh.size, float(mesh.x[:8].sum()), int(mesh.chart[0]))
        if key not in self._cache:
            out = None
            for c in (0, 1):
                idx = mesh.chart_indices(c)
                vals = self.evaluate(mesh.x[idx], mesh.y[idx], c)
                if out is None:
                    out = np.empty((mesh.size,) + vals.shape[1:], vals.dtype)
                out[idx] = vals
            self._cache[key] = out
        return self._cache[key]

    def map(self, g: Callable, name: str | None = None) -> "Field":
        fn = self.fn
        return Field(lambda x, y, c: g(fn(x, y, c)), name or self.name, self.analytic)


def constant_field(value, name: str = "constant") -> Field:
    v = jnp.asarray(value)
    return Field(lambda x, y, c: v, name)


def coordinate_field() -> Field:
    """The chart coordinate itself as a complex scalar."""
    return Field(lambda x, y, c: x + 1j * y, "z")


# one-forms are fields whose value has a leading axis of length 2: (dx, dy)

def jet(F: Field) -> FieldFn:
    """``(x, y, c) -> (value, (d/dx, d/dy))`` from a single linearisation.

    Sharing the primal between both directions keeps nested derivatives
    (derivatives of fields built from derivatives) from tracing the inner
    field three times per level.
    """
    fn = F.fn

    def vd(x, y, c):
        p = jnp.stack([x, y])
        val, lin = jax.linearize(lambda q: fn(q[0], q[1], c), p)
        return val, jax.vmap(lin)(jnp.eye(2, dtype=p.dtype))

    return vd


def partial(F: Field) -> Field:
    """Exact partial derivatives via forward-mode AD, stacked as (d/dx, d/dy)."""
    vd = jet(F)
    return Field(lambda x, y, c: vd(x, y, c)[1], f"d{F.name}", F.analytic)


def fd_partial(F: Field, h: float) -> Field:
    """Fourth-order central differences with step ``h`` in each chart direction."""
    fn = F.fn
    h = float(h)
    steps = jnp.array([2 * h, h, -h, -2 * h])
    coef = jnp.array([-1.0, 8.0, -8.0, 1.0]) / (12 * h)
    zeros = jnp.zeros(4)
    # one vmapped trace over the eight stencil points instead of eight traces
    dx = jnp.concatenate([steps, zeros])
    dy = jnp.concatenate([zeros, steps])

    def d(x, y, c):
        vals = jax.vmap(lambda a, b: fn(x + a, y + b, c))(dx, dy)
        w = coef.reshape((4,) + (1,) * (vals.ndim - 1))
        return jnp.stack([(w * vals[:4]).sum(0), (w * vals[4:]).sum(0)])

    return Field(d, f"D{F.name}", False)


def check_stencil(mesh: DomainMesh, reach: float) -> None:
    r = np.abs(mesh.z).max() + reach
    if r > CHART_RADIUS:
        raise BoundaryStencil(f"stencil reaches |z| = {r:.3f} beyond chart radius {CHART_RADIUS}")


def differentiate(F: Field, mesh: DomainMesh, method: str = "auto") -> Field:
    """Derivative one-form of ``F``: AD when the field is analytic, else finite differences."""
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown differentiation method {method!r}")
    if method == "analytic" or (method == "auto" and F.analytic):
        return partial(F)
    check_stencil(mesh, 2 * mesh.fd_step)
    return fd_partial(F, mesh.fd_step)


def star(omega: Field) -> Field:
    """Hodge star on one-forms: (*w)(dx) = w(dy), (*w)(dy) = -w(dx)."""
    fn = omega.fn
    return Field(lambda x, y, c: (lambda v: jnp.stack([v[1], -v[0]]))(fn(x, y, c)), f"*{omega.name}", omega.analytic)


def star_values(omega: np.ndarray) -> np.ndarray:
    return np.stack([omega[:, 1], -omega[:, 0]], axis=1)


def wedge_values(omega: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """(w ^ n)(dx, dy) = w_x n_y - w_y n_x with matrix products, node-wise."""
    if omega.ndim == 2:
        return omega[:, 0] * eta[:, 1] - omega[:, 1] * eta[:, 0]
    return omega[:, 0] @ eta[:, 1] - omega[:, 1] @ eta[:, 0]


def wedge(omega: Field, eta: Field) -> Field:
    f, g = omega.fn, eta.fn

    def w(x, y, c):
        a, b = f(x, y, c), g(x, y, c)
        if a.ndim == 1:
            return a[0] * b[1] - a[1] * b[0]
        return a[0] @ b[1] - a[1] @ b[0]

    return Field(w, f"{omega.name}^{eta.name}", omega.analytic and eta.analytic)


def dnabla(omega: Field, mesh: DomainMesh, method: str = "fd", connection: Field | None = None) -> Field:
    """Exterior derivative of an End-valued one-form, value on (dx, dy).

    With ``connection`` (a one-form ``a``) this is ``d w + a ^ w + w ^ a``,
    the covariant derivative on End-valued forms for the connection ``d + a``.
    """
    D = differentiate(omega, mesh, method)
    dfn = D.fn
    afn = connection.fn if connection is not None else None
    ofn = omega.fn

    def d(x, y, c):
        dv = dfn(x, y, c)  # dv[i, j] = d_i omega_j
        out = dv[0, 1] - dv[1, 0]
        if afn is not None:
            a, w = afn(x, y, c), ofn(x, y, c)
            out = out + a[0] @ w[1] - a[1] @ w[0] + w[0] @ a[1] - w[1] @ a[0]
        return out

    return Field(d, f"d{omega.name}", False)


def integrate(values: np.ndarray, mesh: DomainMesh) -> float:
    """Blended quadrature of a 2-form density given on (dx, dy) of each chart."""
    values = np.asarray(values)
    if values.shape != (mesh.size,):
        raise ValueError(f"expected one real value per node, got shape {values.shape}")
    if np.iscomplexobj(values):
        values = values.real
    return math.fsum((values * mesh.weight).tolist())


def round_density(mesh: DomainMesh) -> np.ndarray:
    return 4.0 / (1.0 + np.abs(mesh.z) ** 2) ** 2


def line_bundle_density(mesh: DomainMesh, k: int) -> np.ndarray:
    """Pull-back of the Fubini-Study form under z -> z^k (total 2 pi k)."""
    r2 = np.abs(mesh.z) ** 2
    return 2 * k**2 * r2 ** (k - 1) / (1 + r2**k) ** 2


def chart_jacobian(z: np.ndarray) -> np.ndarray:
    """Complex derivative of the transition z -> 1/z."""
    return -1.0 / z**2


def transport_oneform(omega_w: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Express a one-form given on (du, dv) of chart 1 on (dx, dy) of chart 0."""
    c = chart_jacobian(z)
    a, b = c.real, c.imag
    shape = (-1,) + (1,) * (omega_w.ndim - 2)
    a, b = a.reshape(shape), b.reshape(shape)
    wu, wv = omega_w[:, 0], omega_w[:, 1]
    return np.stack([a * wu + b * wv, -b * wu + a * wv], axis=1)


def chart_mismatch(F: Field, mesh: DomainMesh, kind: str = "point", margin: float = 0.05) -> float:
    """Largest disagreement of the two charts' values on the overlap band."""
    idx = mesh.overlap(margin)
    z = mesh.z[idx]
    v0 = F.evaluate(z.real, z.imag, 0)
    w = 1.0 / z
    v1 = F.evaluate(w.real, w.imag, 1)
    if kind == "oneform":
        v1 = transport_oneform(v1, z)
    elif kind == "density":
        v1 = v1 * np.abs(chart_jacobian(z)).reshape((-1,) + (1,) * (v1.ndim - 1)) ** 2
    elif kind != "point":
        raise ValueError(kind)
    return float(np.abs(v0 - v1).max()) if idx.size else 0.0


def node_norm(values: np.ndarray) -> np.ndarray:
    """Frobenius norm per node over all trailing axes."""
    return np.sqrt(np.sum(np.abs(values.reshape(values.shape[0], -1)) ** 2, axis=1))
