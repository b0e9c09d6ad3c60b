"""Quaternionic linear algebra on top of complex 2m-vectors.

Conventions
-----------
Quaternionic vector spaces are right vector spaces.  A vector
``v in H^m`` is written ``v = a + j b`` with ``a, b in C^m`` and stored as
the complex array ``concat(a, b)`` of length ``2m``.  Right multiplication by
a complex scalar is ordinary complex scalar multiplication, and right
multiplication by ``j`` is the antilinear map ``(a, b) -> (-conj(b), conj(a))``.

A right-linear map ``B = B1 + j B2`` (``B1, B2`` complex ``m x m``) acts by the
complex ``2m x 2m`` matrix ``[[B1, -conj(B2)], [B2, conj(B1)]]``.  All heavy
numerics in the package use this complex representation; the 4m x 4m real
embedding is only used for rank decisions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTolerance

DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __mul__(self, other):
        if not isinstance(other, Quaternion):
            other = Quaternion(float(other))
        return qmul(self, other)

    def __rmul__(self, other):
        return qmul(Quaternion(float(other)), self)

    def __add__(self, other):
        return Quaternion(self.w + other.w, self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other):
        return Quaternion(self.w - other.w, self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def complex_pair(self) -> tuple[complex, complex]:
        """Return ``(a, b)`` with ``q = a + j b``."""
        return complex(self.w, self.x), complex(self.y, -self.z)

    @classmethod
    def from_complex_pair(cls, a: complex, b: complex) -> "Quaternion":
        return cls(a.real, a.imag, b.real, -b.imag)

    def isclose(self, other: "Quaternion", tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), atol=tol, rtol=0))


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def qmul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product with i*j = k."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def left_matrix(q: Quaternion) -> np.ndarray:
    """Real 4x4 matrix of ``p -> q p`` on (w, x, y, z)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array([[w, -x, -y, -z],
                     [x, w, -z, y],
                     [y, z, w, -x],
                     [z, -y, x, w]])


# ---------------------------------------------------------------------------
# quaternion arrays  <->  complex representation
# ---------------------------------------------------------------------------

def quat_array_to_complex(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an array of quaternions (last axis w,x,y,z) into a + j b."""
    q = np.asarray(q, dtype=float)
    return q[..., 0] + 1j * q[..., 1], q[..., 2] - 1j * q[..., 3]


def complex_to_quat_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([a.real, a.imag, b.real, -b.imag], axis=-1)


def qvector(entries) -> np.ndarray:
    """Complex 2m-representation of a list of Quaternion entries."""
    arr = np.array([e.as_array() if isinstance(e, Quaternion) else e for e in entries], dtype=float)
    a, b = quat_array_to_complex(arr)
    return np.concatenate([a, b])


def qvector_entries(v: np.ndarray) -> list[Quaternion]:
    a, b = complex_split(v)
    return [Quaternion.from_complex_pair(complex(x), complex(y)) for x, y in zip(a, b)]


def qmatrix(entries) -> np.ndarray:
    """Complex 2m x 2m representation of an m x m array of quaternions (m, m, 4)."""
    arr = np.asarray(entries, dtype=float)
    if arr.dtype == object or arr.ndim != 3:
        arr = np.array([[e.as_array() for e in row] for row in entries], dtype=float)
    b1, b2 = quat_array_to_complex(arr)
    return np.block([[b1, -b2.conj()], [b2, b1.conj()]])


def qmatrix_entries(M: np.ndarray) -> np.ndarray:
    """Inverse of :func:`qmatrix`; returns an (m, m, 4) real array."""
    m = M.shape[-1] // 2
    return complex_to_quat_array(M[..., :m, :m], M[..., m:, :m])


def complex_split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a, b)`` with ``v = a + j b``."""
    v = np.asarray(v)
    m = v.shape[-1] // 2
    return v[..., :m], v[..., m:]


def complex_join(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(a), np.asarray(b)], axis=-1)


def omega(m: int) -> np.ndarray:
    """Matrix with ``v * j == omega(m) @ conj(v)``."""
    z = np.zeros((m, m))
    e = np.eye(m)
    return np.block([[z, -e], [e, z]]).astype(complex)


def jmul(v: np.ndarray) -> np.ndarray:
    """Right multiplication by j, vectorised over leading axes (columns if 2-D)."""
    v = np.asarray(v)
    m = v.shape[0] // 2
    return np.concatenate([-v[m:].conj(), v[:m].conj()], axis=0)


def is_quaternionic(M: np.ndarray, tol: float = 1e-10) -> bool:
    """True if the complex matrix commutes with right multiplication by j."""
    m = M.shape[-1] // 2
    om = omega(m)
    return bool(np.abs(M @ om - om @ M.conj()).max() <= tol * max(1.0, np.abs(M).max()))


def bracket(B: np.ndarray) -> np.ndarray:
    """``<B> = tr_R(B)/4`` = sum of real parts of the quaternionic diagonal."""
    return np.real(np.trace(B, axis1=-2, axis2=-1)) / 2


def real_embedding(M: np.ndarray) -> np.ndarray:
    """4m x 4m real matrix of the complex 2m x 2m representation."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def real_trace(M: np.ndarray) -> float:
    return float(np.trace(real_embedding(M)))


# ---------------------------------------------------------------------------
# frames and projectors
# ---------------------------------------------------------------------------

def frame_matrix(U: np.ndarray) -> np.ndarray:
    """Complex 2m x 2r matrix [U, U j] of a quaternionic frame U (2m x r)."""
    return np.concatenate([U, jmul(U)], axis=1)


def frame_projector(U: np.ndarray) -> np.ndarray:
    F = frame_matrix(U)
    return F @ F.conj().T


def quaternionic_frame(vectors: np.ndarray, rank: int | None = None, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal quaternionic frame (2m x r) for the H-span of the columns."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    cols: list[np.ndarray] = []
    scale = max(np.linalg.norm(vectors, axis=0).max(initial=0.0), 1e-300)
    order = np.argsort(-np.linalg.norm(vectors, axis=0))
    for idx in order:
        v = vectors[:, idx].copy()
        for _ in range(2):
            for u in cols:
                v = v - u * (u.conj() @ v)
                uj = jmul(u)
                v = v - uj * (uj.conj() @ v)
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            cols.append(v / nv)
        if rank is not None and len(cols) == rank:
            break
    if not cols:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    return np.stack(cols, axis=1)


def projector_distance(P1: np.ndarray, P2: np.ndarray) -> float:
    """Spectral-norm distance between two orthogonal projectors."""
    return float(np.linalg.norm(P1 - P2, ord=2))


def kernel_image(B: np.ndarray, tol: float = DEFAULT_RANK_TOL):
    """Quaternionic kernel, image and rank of a right-linear map.

    ``B`` is in complex representation.  The rank decision uses the real
    4m x 4m embedding; every quaternionic singular value shows up four times
    there, which is asserted.  Returns ``(kernel, image, rank)`` where kernel
    and image are orthonormal quaternionic frames (2m x r complex arrays).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    B = np.asarray(B, dtype=complex)
    m = B.shape[0] // 2
    R = real_embedding(B)
    U, s, Vt = np.linalg.svd(R)
    groups = s.reshape(m, 4)
    smax = s[0]
    if smax == 0.0:
        full = quaternionic_frame(np.eye(2 * m, dtype=complex)[:, :m])
        return full, np.zeros((2 * m, 0), dtype=complex), 0
    spread = np.abs(groups - groups.mean(axis=1, keepdims=True)).max()
    if spread > 1e-9 * smax:
        raise DegenerateTolerance(f"singular values not 4-fold degenerate (spread {spread:.2e})")
    sq = groups[:, 0]
    rank = int(np.sum(sq > tol * smax))
    above = sq[rank - 1] if rank > 0 else None
    below = sq[rank] if rank < m else None
    if above is not None and below is not None and below > 0 and above / below < 10.0:
        raise DegenerateTolerance(f"no spectral gap at rank {rank}: {above:.3e} vs {below:.3e}")

    def to_complex(vecs: np.ndarray) -> np.ndarray:
        return vecs[: 2 * m] + 1j * vecs[2 * m:]

    image = quaternionic_frame(to_complex(U[:, : 4 * rank]), rank=rank) if rank else np.zeros((2 * m, 0), complex)
    kernel = quaternionic_frame(to_complex(Vt[4 * rank:].T), rank=m - rank) if rank < m else np.zeros((2 * m, 0), complex)
    return kernel, image, rank


def random_qvector(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.normal(size=2 * m) + 1j * rng.normal(size=2 * m)


def random_qmatrix(rng: np.random.Generator, m: int) -> np.ndarray:
    return qmatrix(rng.normal(size=(m, m, 4)))
