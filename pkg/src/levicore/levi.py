"""Levi form analysis for an arbitrary defining function.

The Levi matrix at a boundary point is the complex Hessian of rho restricted
to the complex tangent space, divided by |d rho|.  With the Hessian convention
``H[j, k] = d^2 rho / dz_j dzbar_k`` the form is ``L(X) = sum H[j,k] X_j conj(X_k)``
and its matrix in an orthonormal tangent basis B is ``B^* conj(H) B``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import NonPseudoconvexError, PreconditionError
from .linalg import SubspaceBasis, eigh_batch

DEFAULT_EPS_REL = 1e-6
BOUNDARY_TOL = 1e-9


class Classification(str, Enum):
    STRONGLY = "strongly_pseudoconvex"
    WEAKLY = "weakly_pseudoconvex"


@dataclass
class DefiningFunctionOracle:
    """``evaluate(points)`` maps an (N, n) array to (rho, grad, hess) arrays."""

    n: int
    evaluate: Callable

    def __call__(self, points):
        rho, grad, hess = self.evaluate(np.atleast_2d(np.asarray(points, complex)))
        return np.atleast_1d(rho), np.atleast_2d(grad), np.asarray(hess).reshape(-1, self.n, self.n)


def sphere_oracle(n: int, radius: float = 1.0, scale: float = 1.0) -> DefiningFunctionOracle:
    """scale * (|z|^2 - radius^2) in C^n."""

    def evaluate(p):
        rho = scale * (np.sum(np.abs(p) ** 2, axis=1) - radius**2)
        grad = scale * np.conj(p)
        hess = np.broadcast_to(scale * np.eye(n, dtype=complex), (len(p), n, n))
        return rho, grad, hess

    return DefiningFunctionOracle(n, evaluate)


@dataclass
class LeviAnalysis:
    point: np.ndarray
    tangent_basis: SubspaceBasis
    levi_matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    grad_norm: float
    classification: Classification | None = None

    def scale(self) -> float:
        return max(1.0, float(np.linalg.norm(self.levi_matrix, 2)) if self.levi_matrix.size else 0.0)


def _tangent_frames(grad: np.ndarray) -> np.ndarray:
    """Batched orthonormal bases of {X : sum grad_j X_j = 0}, shape (N, n, n-1).

    Householder reflector sending e_1 to the unit normal conj(grad)/|grad|; its
    remaining columns span the orthogonal complement.
    """
    nb, n = grad.shape
    v = np.conj(grad) / np.linalg.norm(grad, axis=1, keepdims=True)
    a1 = np.abs(v[:, 0])
    ph = np.where(a1 > 0, v[:, 0] / np.where(a1 > 0, a1, 1.0), 1.0)
    u = v.copy()
    u[:, 0] += ph
    un = np.sum(np.abs(u) ** 2, axis=1)
    hh = np.eye(n)[None] - 2 * u[:, :, None] * np.conj(u)[:, None, :] / un[:, None, None]
    return hh[:, :, 1:]


def complex_tangent_basis(grad) -> SubspaceBasis:
    """Orthonormal basis of the complex tangent space {X : sum (d rho/dz_j) X_j = 0}."""
    grad = np.asarray(grad, complex)
    if not np.any(grad):
        raise PreconditionError("zero gradient: not a boundary defining function here")
    return SubspaceBasis(len(grad), _tangent_frames(grad[None])[0])


def levi_form_batch(oracle: DefiningFunctionOracle, points) -> list[LeviAnalysis]:
    pts = np.atleast_2d(np.asarray(points, complex))
    rho, grad, hess = oracle(pts)
    return levi_from_derivatives(pts, rho, grad, hess)


def levi_from_derivatives(pts, rho, grad, hess) -> list[LeviAnalysis]:
    pts = np.atleast_2d(pts)
    gn = np.linalg.norm(grad, axis=1)
    if np.any(gn == 0):
        raise PreconditionError("defining function has vanishing gradient at a boundary point")
    if np.any(np.abs(rho) > BOUNDARY_TOL):
        i = int(np.argmax(np.abs(rho)))
        raise PreconditionError(f"point {i} is off the boundary (|rho| = {abs(rho[i]):.3g})")
    frames = _tangent_frames(grad)
    mats = np.conj(frames).transpose(0, 2, 1) @ np.conj(hess) @ frames / gn[:, None, None]
    w, v = eigh_batch(mats)
    n = grad.shape[1]
    out = []
    for i in range(len(pts)):
        out.append(LeviAnalysis(pts[i], SubspaceBasis(n, frames[i]), mats[i], w[i], v[i], float(gn[i])))
    return out


def levi_form(oracle: DefiningFunctionOracle, p) -> LeviAnalysis:
    """Levi analysis at a single boundary point (no classification applied)."""
    return levi_form_batch(oracle, np.asarray(p, complex)[None])[0]


def null_space(analysis: LeviAnalysis, eps_rel: float = DEFAULT_EPS_REL) -> SubspaceBasis:
    """Span in C^n of eigenvectors whose eigenvalue is within eps_rel * scale of 0."""
    keep = np.abs(analysis.eigenvalues) <= eps_rel * analysis.scale()
    vecs = analysis.tangent_basis.vectors @ analysis.eigenvectors[:, keep]
    return SubspaceBasis(analysis.tangent_basis.ambient_dim, vecs)


def classify(analysis: LeviAnalysis, eps_rel: float = DEFAULT_EPS_REL) -> Classification:
    if analysis.eigenvalues.size == 0:
        return Classification.STRONGLY
    lo = float(analysis.eigenvalues[0])
    tol = eps_rel * analysis.scale()
    if lo < -tol:
        raise NonPseudoconvexError(f"Levi eigenvalue {lo:.3g} < 0 at {analysis.point}")
    cls = Classification.STRONGLY if lo > tol else Classification.WEAKLY
    analysis.classification = cls
    return cls
