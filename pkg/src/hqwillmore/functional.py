"""Energies, degrees and the identities tying them together."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import jax.numpy as jnp
import numpy as np

from .domain import DomainMesh, Field, dnabla, integrate, jet, node_norm, star
from .errors import NonIntegral
from .qalg import bracket
from .structure import HopfFields

FOUR_PI = 4 * math.pi
INTEGRALITY_GAP = 0.05
GENUS = 0


def canonical_degree() -> int:
    """deg K = 2g - 2 for the sphere."""
    return 2 * GENUS - 2


def _sq_density(form: np.ndarray) -> np.ndarray:
    """<w ^ *w> on (dx, dy) = -<w_x^2 + w_y^2>."""
    return -(bracket(form[:, 0] @ form[:, 0]) + bracket(form[:, 1] @ form[:, 1]))


def willmore_density(hopf: HopfFields, mesh: DomainMesh) -> np.ndarray:
    return _sq_density(hopf.A.sample(mesh))


def willmore_energy(hopf: HopfFields, mesh: DomainMesh) -> float:
    """W = 2 ∫ <A ^ *A>."""
    return 2 * integrate(willmore_density(hopf, mesh), mesh)


def energy_functional(hopf: HopfFields, mesh: DomainMesh) -> tuple[float, float]:
    """E(S) = 1/2 ∫ <dS ^ *dS>, and the same value as 2 ∫ (<Q^*Q> + <A^*A>)."""
    direct = 0.5 * integrate(_sq_density(hopf.dS.sample(mesh)), mesh)
    split = 2 * (integrate(_sq_density(hopf.Q.sample(mesh)), mesh)
                 + integrate(_sq_density(hopf.A.sample(mesh)), mesh))
    return direct, split


@dataclass
class DegreeResult:
    raw: float
    rounded: int

    @property
    def gap(self) -> float:
        return abs(self.raw - self.rounded)


def _rounded(raw: float, what: str, gap: float = INTEGRALITY_GAP) -> DegreeResult:
    k = int(round(raw))
    if not math.isfinite(raw) or abs(raw - k) > gap:
        raise NonIntegral(f"{what} = {raw:.6f} is not within {gap} of an integer")
    return DegreeResult(raw, k)


def degree(hopf: HopfFields, mesh: DomainMesh, gap: float = INTEGRALITY_GAP) -> DegreeResult:
    """deg(V, S) = (1/2π) ∫ <A^*A> - <Q^*Q>."""
    a = integrate(_sq_density(hopf.A.sample(mesh)), mesh)
    q = integrate(_sq_density(hopf.Q.sample(mesh)), mesh)
    return _rounded((a - q) / (2 * math.pi), "deg(V,S)", gap)


def degree_from_curvature(hopf: HopfFields, mesh: DomainMesh, curvature: np.ndarray) -> float:
    """(1/2π) ∫ <S R> for a sampled curvature 2-form R of d - (A + Q)."""
    S = hopf.S.sample(mesh)
    return integrate(bracket(S @ curvature), mesh) / (2 * math.pi)


def chern_density(P: Field) -> Field:
    """Curvature density of the complex subbundle with orthogonal projector P."""
    vd = jet(P)

    def fn(x, y, c):
        p, d = vd(x, y, c)
        return jnp.real(1j * jnp.trace(p @ (d[0] @ d[1] - d[1] @ d[0]))) / (2 * math.pi)

    return Field(fn, "c1", P.analytic)


def chern_degree(P: Field, mesh: DomainMesh, gap: float = INTEGRALITY_GAP) -> DegreeResult:
    """Degree of a complex subbundle of the trivial bundle by Chern quadrature."""
    return _rounded(integrate(chern_density(P).sample(mesh), mesh), "Chern degree", gap)


def quotient_degrees(chain: list[Field], mesh: DomainMesh, gap: float = INTEGRALITY_GAP) -> list[DegreeResult]:
    """deg V_k / V_{k-1} with complex structure S, as deg E_k - deg E_{k-1}."""
    totals = [chern_degree(E, mesh, gap) for E in chain]
    out = [totals[0]]
    for a, b in zip(totals[:-1], totals[1:]):
        out.append(_rounded(b.raw - a.raw, "quotient degree", gap))
    return out


def pluecker_residual(n: int, deg_VS: DegreeResult, deg_L: DegreeResult, ord_H: int,
                      genus: int = GENUS) -> tuple[int, float]:
    """deg(V,S) - (n+1)(n(1-g) + deg L) - ord H, rounded and raw."""
    rounded = deg_VS.rounded - (n + 1) * (n * (1 - genus) + deg_L.rounded) - ord_H
    raw = deg_VS.raw - (n + 1) * (n * (1 - genus) + deg_L.raw) - ord_H
    return abs(rounded), abs(raw)


def harmonicity_field(hopf: HopfFields, mesh: DomainMesh, which: str = "A", method: str = "fd") -> Field:
    form = hopf.A if which == "A" else hopf.Q
    return dnabla(star(form), mesh, method)


def harmonicity_residual(hopf: HopfFields, mesh: DomainMesh, method: str = "fd") -> tuple[float, float]:
    """Max node norm of d*A and of d*Q (they agree as 2-forms)."""
    a = node_norm(harmonicity_field(hopf, mesh, "A", method).sample(mesh))
    q = node_norm(harmonicity_field(hopf, mesh, "Q", method).sample(mesh))
    return float(a.max()), float(q.max())


def quantization_check(W: float, tol: float = 1e-6) -> tuple[int, float]:
    """Nearest multiple of 4π and the distance to it."""
    if W < -tol:
        raise ValueError(f"Willmore energy must be non-negative, got {W}")
    k = int(round(W / FOUR_PI))
    return k, abs(W - FOUR_PI * k)


def dual_degree_check(n: int, deg_L: int, deg_Lstar: int, total_ord: int) -> int:
    """deg L* - (n deg K - deg L - Σ ord δ_i)."""
    return deg_Lstar - (n * canonical_degree() - deg_L - total_ord)


@dataclass
class Report:
    spec: str
    label: str
    n: int
    depth: int
    W_f: float
    W_dual: float
    E_S: float
    E_S_split: float
    deg_VS: float
    deg_VS_int: int
    deg_VS_abs: int
    deg_L: float
    deg_L_int: int
    ord_H: int
    pluecker_residual: int
    pluecker_residual_raw: float
    harmonicity_residual: float
    harmonicity_residual_Q: float
    bookkeeping_residual: float
    dual_energy_residual: float
    quantization_multiple: int
    quantization_offset: float
    quantization_multiple_dual: int
    quantization_offset_dual: float
    square_residual: float
    reconstruction_residual: float = math.nan
    curvature_residual: float = math.nan
    flatness_residual: float = math.nan
    adjoint_residual: float = math.nan
    conformality_residual: float = math.nan
    tolerances: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    zeros: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = {"schema": 1}
        for k, v in asdict(self).items():
            d[k] = None if isinstance(v, float) and not math.isfinite(v) else v
        return d

    def scalars(self) -> dict:
        """Numeric fields only, in declaration order (the sweep columns)."""
        return {k: v for k, v in asdict(self).items()
                if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "depth"}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())
