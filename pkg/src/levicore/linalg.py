"""Small dense complex linear algebra.

Everything here works on tiny matrices (dimension <= 16): Hermitian
eigendecomposition by cyclic Jacobi rotations, Gram-Schmidt rank revelation,
principal angles and tolerance-aware subspace intersection, plus the maps that
put real tangent vectors and type (1,0) vectors into the complexified tangent
space.

Complexified frames are ordered ``(d/dz_1, ..., d/dz_n, d/dzbar_1, ..., d/dzbar_n)``
and real coordinates ``(x_1, y_1, ..., x_n, y_n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_ATOL = 1e-12
DEFAULT_INTERSECT_TOL = 1e-8


class HermitianMatrix:
    """Square complex matrix checked to be Hermitian at construction."""

    def __init__(self, entries, atol: float = HERMITIAN_ATOL):
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        if np.max(np.abs(a - a.conj().T), initial=0.0) > atol:
            raise ValueError("matrix is not Hermitian")
        # symmetrize so downstream code sees exact Hermitian data
        self.entries = 0.5 * (a + a.conj().T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2)) if self.dim else 0.0

    def __repr__(self):
        return f"HermitianMatrix(dim={self.dim})"


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (columns of ``vectors``) of a subspace of C^d.

    The zero subspace has ``vectors.shape == (d, 0)``.
    """

    ambient_dim: int
    vectors: np.ndarray = field(repr=False)
    tol: float = DEFAULT_INTERSECT_TOL

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim == 1:
            v = v.reshape(-1, 1) if v.size else np.zeros((self.ambient_dim, 0), complex)
        if v.shape[0] != self.ambient_dim:
            raise ValueError(f"vectors have length {v.shape[0]}, expected {self.ambient_dim}")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def zero(cls, ambient_dim: int, tol: float = DEFAULT_INTERSECT_TOL) -> "SubspaceBasis":
        return cls(ambient_dim, np.zeros((ambient_dim, 0), complex), tol)

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T

    def transform(self, unitary: np.ndarray) -> "SubspaceBasis":
        """Image under a unitary map (orthonormality is preserved)."""
        return SubspaceBasis(self.ambient_dim, unitary @ self.vectors, self.tol)


# ---------------------------------------------------------------------------
# eigendecomposition


def _jacobi_batch(a: np.ndarray, max_sweeps: int = 60):
    """Cyclic complex Jacobi on a stack of Hermitian matrices of shape (B, d, d)."""
    a = np.array(a, dtype=complex)
    nb, d, _ = a.shape
    v = np.broadcast_to(np.eye(d, dtype=complex), a.shape).copy()
    if d < 2:
        return a.diagonal(axis1=1, axis2=2).real.copy(), v
    scale = np.maximum(np.linalg.norm(a, axis=(1, 2)), np.finfo(float).tiny)
    iu = np.triu_indices(d, 1)
    rows = np.arange(nb)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[:, iu[0], iu[1]]) ** 2, axis=1))
        if np.all(off <= 1e-15 * scale):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                b = np.abs(apq)
                active = b > 1e-300
                if not active.any():
                    continue
                phase = np.where(active, apq / np.where(active, b, 1.0), 1.0)
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                theta = 0.5 * np.arctan2(2.0 * b, aqq - app)
                c = np.cos(theta)
                s = np.sin(theta)
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]] in the (p, q) plane
                u = np.broadcast_to(np.eye(d, dtype=complex), a.shape).copy()
                u[rows, p, p] = c
                u[rows, p, q] = s
                u[rows, q, p] = -s * phase.conj()
                u[rows, q, q] = c * phase.conj()
                a = u.conj().transpose(0, 2, 1) @ a @ u
                v = v @ u
    w = a.diagonal(axis1=1, axis2=2).real
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v


def eigh_batch(stack) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvector frames for a stack of Hermitian matrices."""
    a = np.asarray(stack, dtype=complex)
    if a.ndim == 2:
        a = a[None]
    a = 0.5 * (a + a.conj().transpose(0, 2, 1))
    if a.shape[-1] > 16:
        raise ValueError("hermitian_eigen supports dimension <= 16")
    return _jacobi_batch(a)


def hermitian_eigen(h: HermitianMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and an orthonormal eigenvector frame (columns)."""
    if not isinstance(h, HermitianMatrix):
        h = HermitianMatrix(h)
    if h.dim == 0:
        return np.zeros(0), np.zeros((0, 0), complex)
    w, v = eigh_batch(h.entries)
    return w[0], v[0]


# ---------------------------------------------------------------------------
# subspaces


def orthonormalize(vectors, tol: float = DEFAULT_INTERSECT_TOL, ambient_dim: int | None = None) -> SubspaceBasis:
    """Modified Gram-Schmidt (two passes); residuals of norm <= tol are dropped.

    ``vectors`` is a sequence of 1-d vectors or a 2-d array whose columns are the
    vectors.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        cols = [vectors[:, j] for j in range(vectors.shape[1])]
        d = vectors.shape[0]
    else:
        cols = [np.asarray(v, dtype=complex) for v in vectors]
        d = len(cols[0]) if cols else ambient_dim
    if d is None:
        raise ValueError("ambient_dim required for empty input")
    basis: list[np.ndarray] = []
    for v in cols:
        r = np.array(v, dtype=complex)
        for _ in range(2):
            for q in basis:
                r = r - q * np.vdot(q, r)
        nr = np.linalg.norm(r)
        if nr > tol and len(basis) < d:
            basis.append(r / nr)
    mat = np.column_stack(basis) if basis else np.zeros((d, 0), complex)
    return SubspaceBasis(d, mat, tol)


def principal_angles(a: SubspaceBasis, b: SubspaceBasis) -> np.ndarray:
    """Cosines of the principal angles, descending, clamped to [0, 1]."""
    if a.ambient_dim != b.ambient_dim:
        raise ValueError("ambient dimensions differ")
    if a.dim == 0 or b.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(a.vectors.conj().T @ b.vectors, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def subspace_intersect(a: SubspaceBasis, b: SubspaceBasis, tol: float = DEFAULT_INTERSECT_TOL) -> SubspaceBasis:
    """Directions shared by ``a`` and ``b``: principal vectors with cosine >= 1 - tol.

    Each returned direction is the normalized mean of the paired principal
    vectors, which makes the result symmetric in its arguments.
    """
    if a.ambient_dim != b.ambient_dim:
        raise ValueError("ambient dimensions differ")
    d = a.ambient_dim
    if a.dim == 0 or b.dim == 0:
        return SubspaceBasis.zero(d, tol)
    u, s, vh = np.linalg.svd(a.vectors.conj().T @ b.vectors, full_matrices=False)
    keep = s >= 1.0 - tol
    if not keep.any():
        return SubspaceBasis.zero(d, tol)
    pa = a.vectors @ u[:, keep]
    pb = b.vectors @ vh.conj().T[:, keep]
    # align phases before averaging; the SVD already pairs them up to rounding
    ph = np.sum(pa.conj() * pb, axis=0)
    ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    mid = 0.5 * (pa + pb * ph.conj())
    return orthonormalize(mid, tol=0.5, ambient_dim=d)


def intersection_dim_oracle(a: SubspaceBasis, b: SubspaceBasis, tol: float = 1e-8) -> int:
    """dim(A cap B) as the nullity of the stacked complementary projectors."""
    d = a.ambient_dim
    eye = np.eye(d)
    stacked = np.vstack([eye - a.projector(), eye - b.projector()])
    return d - int(np.linalg.matrix_rank(stacked, tol=tol))


# ---------------------------------------------------------------------------
# tangent embeddings


def embed_real_tangent(v) -> np.ndarray:
    """Real vector in (x_1, y_1, ..., x_n, y_n) -> coefficients (c, conj c) in C^{2n}.

    Uses d/dx = d/dz + d/dzbar and d/dy = i (d/dz - d/dzbar), scaled by 1/2:
    ``c_j = (v_xj + i v_yj) / 2``.  Accepts a stack of vectors along the last axis.
    """
    v = np.asarray(v, dtype=float)
    c = 0.5 * (v[..., 0::2] + 1j * v[..., 1::2])
    return np.concatenate([c, c.conj()], axis=-1)


def embed_holomorphic(x) -> np.ndarray:
    """Type (1,0) vector in C^n -> (X, 0) in C^{2n}."""
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x, np.zeros_like(x)], axis=-1)


def complexify(real_basis: np.ndarray, tol: float = DEFAULT_INTERSECT_TOL) -> SubspaceBasis:
    """Complex span of real tangent vectors (columns of ``real_basis``) in C^{2n}."""
    real_basis = np.asarray(real_basis, dtype=float)
    d = real_basis.shape[0]
    if real_basis.ndim == 1:
        real_basis = real_basis[:, None]
    cols = embed_real_tangent(real_basis.T)
    return orthonormalize(list(cols), tol=tol, ambient_dim=d)
