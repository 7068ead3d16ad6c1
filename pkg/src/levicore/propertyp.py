"""Executable Property (P) witnesses on planar compact sets.

A witness for level M is a C^2 function lambda on a neighborhood U of K with
0 <= lambda <= 1 and complex Hessian >= M * Id.  Verification is done on a
grid inside U: it is falsifiable evidence, not a proof, and it cannot check
smoothness of externally supplied data.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .linalg import eigh_batch
from .sets2d import FiniteSet, PlanarCompactSet

DEFAULT_GRID_H = 1e-3
# relative slack for exact witnesses that touch their bounds (lambda = 1 on the rim)
BOUND_RTOL = 1e-12
K_PROBES = 2000
SMOOTHNESS_NOTE = "grid check of bounds and Hessian only; C^2 smoothness of lambda is not verified"


class NotCoveredError(PreconditionError):
    """K is not contained in the candidate's neighborhood U."""


class AdmissibilityError(PreconditionError):
    """finite_witness cannot separate the points at this M."""

    def __init__(self, message, min_M: float):
        super().__init__(message)
        self.min_M = min_M


@dataclass
class Balls:
    """Open neighborhood: union of open disks B(center, radius)."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_1d(np.asarray(self.centers, complex))
        self.radii = np.broadcast_to(np.asarray(self.radii, float), self.centers.shape).copy()

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, complex)
        return np.any(np.abs(z[..., None] - self.centers) < self.radii, axis=-1)

    def grid(self, h: float) -> np.ndarray:
        """Lattice points h * (i + i j) inside U, ball by ball, row-major, without repeats."""
        out, seen = [], None
        for c, r in zip(self.centers, self.radii):
            i0, i1 = math.floor((c.real - r) / h), math.ceil((c.real + r) / h)
            j0, j1 = math.floor((c.imag - r) / h), math.ceil((c.imag + r) / h)
            jj, ii = np.mgrid[j0 : j1 + 1, i0 : i1 + 1]
            z = (ii * h + 1j * jj * h).ravel()
            z = z[np.abs(z - c) < r]
            if seen is not None and len(out):
                z = z[~seen.contains(z)]
            out.append(z)
            seen = Balls(np.array([c]), np.array([r])) if seen is None else Balls(
                np.append(seen.centers, c), np.append(seen.radii, r))
        return np.concatenate(out) if out else np.zeros(0, complex)

    def describe(self) -> dict:
        return {"kind": "balls", "centers": [[float(c.real), float(c.imag)] for c in self.centers],
                "radii": [float(r) for r in self.radii]}


@dataclass
class GridRegion:
    """Neighborhood given by grid samples: union of the closed h-cells centered at ``points``."""

    points: np.ndarray
    h: float

    def __post_init__(self):
        self.points = np.asarray(self.points, complex)

    def contains(self, z) -> np.ndarray:
        from scipy.spatial import cKDTree

        z = np.atleast_1d(np.asarray(z, complex))
        tree = cKDTree(np.column_stack([self.points.real, self.points.imag]))
        d, _ = tree.query(np.column_stack([z.real, z.imag]), p=np.inf)
        return d <= 0.5 * self.h

    def grid(self, h: float | None = None) -> np.ndarray:
        return self.points

    def describe(self) -> dict:
        return {"kind": "grid", "n_points": int(len(self.points)), "h": float(self.h)}


@dataclass
class WitnessCandidate:
    """Candidate lambda at level M on neighborhood U.

    ``evaluator(z)`` takes a complex array of shape (N,) and returns
    ``(lam, hess)`` with ``lam`` of shape (N,) and ``hess`` of shape (N,) or (N, n, n).
    """

    U: Balls | GridRegion
    M: float
    evaluator: Callable
    name: str = "candidate"

    def __post_init__(self):
        if not self.M > 0:
            raise PreconditionError("M must be positive")


@dataclass
class WitnessVerdict:
    passed: bool
    reason: str | None
    point: complex | None
    M: float
    grid_h: float | None
    n_points: int
    min_lambda: float
    max_lambda: float
    min_hessian_eig: float
    notes: list = field(default_factory=lambda: [SMOOTHNESS_NOTE])

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "reason": self.reason,
            "point": None if self.point is None else [float(self.point.real), float(self.point.imag)],
            "M": float(self.M),
            "grid_h": self.grid_h,
            "n_points": self.n_points,
            "min_lambda": self.min_lambda,
            "max_lambda": self.max_lambda,
            "min_hessian_eig": self.min_hessian_eig,
            "notes": list(self.notes),
        }


def _k_probes(K: PlanarCompactSet) -> np.ndarray:
    if isinstance(K, FiniteSet):
        return np.array(K.points, complex)
    return np.asarray(K.sample(K_PROBES, seed=0), complex)


def witness_verify(c: WitnessCandidate, K: PlanarCompactSet, h: float = DEFAULT_GRID_H,
                   M: float | None = None) -> WitnessVerdict:
    """Check 0 <= lambda <= 1 and min eig(Hessian) >= M at every grid point of U.

    ``M`` overrides the candidate's level.  Raises :class:`NotCoveredError`
    when a probe point of K lies outside U.
    """
    M = float(c.M if M is None else M)
    probes = _k_probes(K)
    inside = c.U.contains(probes)
    if not np.all(inside):
        z = probes[np.argmin(inside)]
        raise NotCoveredError(f"K is not contained in U (point {z:.6g} outside)")
    z = c.U.grid(h)
    if not len(z):
        raise PreconditionError("neighborhood has no grid points at this spacing")
    lam, hess = c.evaluator(z)
    lam = np.asarray(lam, float)
    hess = np.asarray(hess, complex)
    if hess.ndim == 1:
        hess = hess[:, None, None]
    eig = eigh_batch(hess)[0][:, 0]
    bad_lo = lam < -BOUND_RTOL
    bad_hi = lam > 1 + BOUND_RTOL
    bad_h = eig < M * (1 - BOUND_RTOL)
    bad = bad_lo | bad_hi | bad_h | ~np.isfinite(lam)
    grid_h = float(getattr(c.U, "h", h))
    stats = dict(min_lambda=float(lam.min()), max_lambda=float(lam.max()), min_hessian_eig=float(eig.min()))
    if not bad.any():
        return WitnessVerdict(True, None, None, M, grid_h, len(z), **stats)
    k = int(np.argmax(bad))
    if bad_lo[k] or bad_hi[k] or not np.isfinite(lam[k]):
        reason = f"lambda = {lam[k]:.17g} outside [0, 1]"
    else:
        reason = f"Hessian eigenvalue {eig[k]:.17g} < M = {M:.17g}"
    return WitnessVerdict(False, reason, complex(z[k]), M, grid_h, len(z), **stats)


def finite_witness(K: FiniteSet, M: float) -> WitnessCandidate:
    """lambda = M |z - p|^2 on B(p, 1/sqrt(M)) for each p in K.

    The open balls must be disjoint, i.e. separation >= 2 / sqrt(M);
    otherwise :class:`AdmissibilityError` reports the smallest admissible M.
    """
    if not isinstance(K, FiniteSet):
        raise PreconditionError("finite_witness needs a FiniteSet")
    if not M > 0:
        raise PreconditionError("M must be positive")
    sep = K.min_separation()
    if math.isfinite(sep) and M * sep * sep < 4.0 * (1 - BOUND_RTOL):
        min_M = (2.0 / sep) ** 2
        raise AdmissibilityError(f"separation {sep:.6g} < 2/sqrt(M) = {2 / math.sqrt(M):.6g}; need M >= {min_M:.6g}",
                                 min_M)
    centers = np.array(K.points, complex)
    r = 1.0 / math.sqrt(M)

    def evaluator(z):
        z = np.asarray(z, complex)
        d2 = np.min(np.abs(z[:, None] - centers[None, :]) ** 2, axis=1)
        return M * d2, np.full(len(z), M, complex)

    return WitnessCandidate(Balls(centers, np.full(len(centers), r)), float(M), evaluator, "finite_witness")


def candidate_from_grid(path, M: float) -> WitnessCandidate:
    """Candidate from a CSV with columns x, y, lambda, hess_re, hess_im (one complex variable).

    U is the union of the grid cells; the spacing is the smallest positive
    coordinate step in the file.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise PreconditionError(f"{path}: no rows")
    need = {"x", "y", "lambda", "hess_re", "hess_im"}
    if not need <= set(rows[0]):
        raise PreconditionError(f"{path}: columns must include {sorted(need)}")
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    lam = np.array([float(r["lambda"]) for r in rows])
    hess = np.array([complex(float(r["hess_re"]), float(r["hess_im"])) for r in rows])
    if np.max(np.abs(hess.imag)) > 1e-12 * max(1.0, np.max(np.abs(hess.real))):
        raise PreconditionError("Hessian of a single complex variable must be real")
    steps = np.concatenate([np.diff(np.unique(x)), np.diff(np.unique(y))])
    steps = steps[steps > 0]
    h = float(steps.min()) if steps.size else 1.0
    z = x + 1j * y
    order = np.lexsort((x, y))
    z, lam, hess = z[order], lam[order], hess[order]
    index = {complex(v): k for k, v in enumerate(z)}

    def evaluator(q):
        k = np.array([index[complex(v)] for v in np.asarray(q, complex)], int)
        return lam[k], hess[k]

    return WitnessCandidate(GridRegion(z, h), float(M), evaluator, str(path))
