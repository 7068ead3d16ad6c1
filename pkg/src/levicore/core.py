"""Derived Levi-null distributions on sampled boundaries.

Stage 0 is the Levi null distribution N on the sampled boundary.  Stage a+1
keeps, at each point p of the stage-a support, the vectors of N_p that lie in
the complexified tangent space of that support; tangent spaces of the (usually
non-smooth) supports are estimated by multi-scale local PCA.  Iteration stops
when two consecutive stages agree in point set and per-point dimension.

Tangent estimates are a lower bound: a finite sample can never show more
directions than the true tangent cone of the support.  Estimates are projected
onto the boundary tangent space T_p(b Omega), which is known exactly from the
defining function; a full-dimensional estimate is replaced by T_p(b Omega).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvariantBreach, NonStabilizationError, PreconditionError
from .hartogs import BoundarySample, HartogsDomain, PotentialField
from .levi import DEFAULT_EPS_REL, _tangent_frames, NonPseudoconvexError
from .linalg import (
    DEFAULT_INTERSECT_TOL,
    SubspaceBasis,
    complexify,
    eigh_batch,
    embed_holomorphic,
    principal_angles,
    subspace_intersect,
)

log = logging.getLogger(__name__)

MIN_POINTS = 30
MIN_Z_NEIGHBORS = 10
MAX_POINTS_PER_SCALE = 4000
ARC_STEPS = 12
LOW_CONFIDENCE_FRACTION = 0.05


@dataclass
class CoreParams:
    n_z: int = 256
    n_theta: int = 8
    k_samples: int = 0
    seed: int = 0
    eps_rel: float = DEFAULT_EPS_REL
    intersect_tol: float = DEFAULT_INTERSECT_TOL
    tau: float = 0.2
    scale_window: tuple = (2, 7)
    max_iter: int = 8

    @property
    def scales(self) -> list[float]:
        lo, hi = self.scale_window
        return [2.0**-k for k in range(lo, hi + 1)]


# ---------------------------------------------------------------------------
# boundary analysis


@dataclass
class BoundaryAnalysis:
    """Levi data for every sample point, stored as arrays aligned with the sample."""

    domain: HartogsDomain
    sample: BoundarySample
    grad: np.ndarray
    eigenvalues: np.ndarray
    scale: np.ndarray
    weak: np.ndarray
    null_bases: dict
    dist_K: np.ndarray
    band: np.ndarray
    eps_rel: float

    @property
    def support_index(self) -> np.ndarray:
        return np.flatnonzero(self.weak)

    def real_tangent(self, i: int) -> np.ndarray:
        """Orthonormal basis (columns) of T_p(b Omega) in R^{2n}."""
        g = self.grad[i]
        normal = np.empty(2 * len(g))
        normal[0::2] = 2 * g.real
        normal[1::2] = -2 * g.imag
        q, _ = np.linalg.qr(np.column_stack([normal, np.eye(len(normal))]))
        return q[:, 1:]


def analyze_boundary(domain: HartogsDomain, sample: BoundarySample, eps_rel: float = DEFAULT_EPS_REL) -> BoundaryAnalysis:
    """Levi eigenvalues, classification and null spaces at all sample points."""
    rho, grad, hess = domain.defining_function(sample.z, sample.w, sample.phi, sample.phi_z)
    gn = np.linalg.norm(grad, axis=1)
    if np.any(np.abs(rho) > 1e-9):
        raise PreconditionError("sample contains off-boundary points")
    frames = _tangent_frames(grad)
    mats = np.conj(frames).transpose(0, 2, 1) @ np.conj(hess) @ frames / gn[:, None, None]
    w, v = eigh_batch(mats)
    scale = np.maximum(1.0, np.linalg.norm(mats, ord=2, axis=(1, 2)))
    tol = eps_rel * scale
    if np.any(w[:, 0] < -tol):
        i = int(np.argmin(w[:, 0] + tol))
        raise NonPseudoconvexError(f"negative Levi eigenvalue {w[i, 0]:.3g} at z={sample.z[i]:.6g}")
    weak = w[:, 0] <= tol
    null = {}
    for i in np.flatnonzero(weak):
        keep = np.abs(w[i]) <= tol[i]
        null[int(i)] = SubspaceBasis(grad.shape[1], frames[i] @ v[i][:, keep])
    if domain.K is not None:
        dist = np.asarray(domain.K.distance(sample.z), float)
        h = domain.potential.h if isinstance(domain.potential, PotentialField) else 0.0
        band = (dist > 0) & (dist < h)
    else:
        dist = np.full(len(sample), np.inf)
        band = np.zeros(len(sample), bool)
    return BoundaryAnalysis(domain, sample, grad, w, scale, weak, null, dist, band, eps_rel)


# ---------------------------------------------------------------------------
# tangent estimation


@dataclass
class TangentEstimate:
    point: np.ndarray
    scales: list
    dims: list
    spreads: list
    plateau_dim: int | None
    real_basis: np.ndarray | None
    tangent: np.ndarray | None
    complex_basis: SubspaceBasis | None

    @property
    def resolved(self) -> bool:
        return self.plateau_dim is not None


def _plateau(dims: list) -> tuple[int | None, list[int]]:
    """Longest run (>= 3) of consecutive equal, defined dimensions.

    Among runs of equal length the larger dimension wins (a finite sample can
    only under-report tangent directions), then the finer run.
    """
    runs: list[list[int]] = []
    run: list[int] = []
    for i, d in enumerate(dims):
        if d is not None and run and dims[run[-1]] == d:
            run.append(i)
        else:
            run = [i] if d is not None else []
        if len(run) >= 3:
            runs.append(list(run))
    if not runs:
        return None, []
    best = max(runs, key=lambda r: (len(r), dims[r[0]], r[-1]))
    return dims[best[0]], best


def zariski_tangent_estimate(cloud, p, scales, tau: float = 0.2, ambient_tangent: np.ndarray | None = None,
                             min_points: int = MIN_POINTS) -> TangentEstimate:
    """Multi-scale PCA estimate of the tangent space of a point set at p.

    ``cloud`` is an (M, m) array or a callable ``r -> points within r of p``.
    At scale r the dimension is the number of principal spreads (singular
    value / sqrt(count)) that reach ``tau * r``.  ``scales`` are sorted
    largest first.
    """
    p = np.asarray(p, float)
    scales = sorted(scales, reverse=True)
    if callable(cloud):
        fetch = cloud
    else:
        pts_all = np.asarray(cloud, float)
        d_all = np.linalg.norm(pts_all - p, axis=1)

        def fetch(r):
            return pts_all[d_all <= r]

    dims, spreads, bases = [], [], []
    for k, r in enumerate(scales):
        pts = fetch(r)
        if pts is None or len(pts) < min_points:
            dims.append(None)
            spreads.append(None)
            bases.append(None)
            continue
        if len(pts) > MAX_POINTS_PER_SCALE:
            pts = pts[:: int(math.ceil(len(pts) / MAX_POINTS_PER_SCALE))]
        c = pts - pts.mean(axis=0)
        _, s, vt = np.linalg.svd(c, full_matrices=False)
        sp = s / math.sqrt(len(pts))
        d = int(np.sum(sp >= tau * r))
        dims.append(d)
        spreads.append(sp)
        bases.append(vt[:d].T)
    if dims[0] is None:
        return TangentEstimate(p, scales, dims, spreads, None, None, None, None)
    dim, run = _plateau(dims)
    if dim is None:
        return TangentEstimate(p, scales, dims, spreads, None, None, None, None)
    raw = bases[run[-1]]
    tangent = raw
    if ambient_tangent is not None:
        at = np.asarray(ambient_tangent, float)
        if dim >= at.shape[1]:
            tangent = at
        elif dim > 0:
            q, _ = np.linalg.qr(at @ (at.T @ raw))
            tangent = q[:, :dim]
    cb = complexify(tangent) if tangent.shape[1] else SubspaceBasis.zero(2 * (len(p) // 2))
    return TangentEstimate(p, scales, dims, spreads, dim, raw, tangent, cb)


class _SymmetricSupport:
    """Local clouds of a rotation-invariant support {(z, e^{-phi(z)/2 + i t})}.

    The stored support is a set of base points z (all of whose circles are in
    the support); at scale r the circle direction is resampled with arc step
    r / ARC_STEPS so every scale sees it.
    """

    def __init__(self, z: np.ndarray, phi: np.ndarray):
        self.z = z
        self.rw = np.exp(-0.5 * phi)
        self.tree = cKDTree(np.column_stack([z.real, z.imag]))

    def provider(self, j: int, max_z: int = 300) -> Callable:
        z0 = self.z[j]
        p = np.array([z0.real, z0.imag, self.rw[j], 0.0])

        def fetch(r):
            nb = np.asarray(self.tree.query_ball_point([z0.real, z0.imag], r), int)
            if len(nb) < MIN_Z_NEIGHBORS:
                return None
            nb.sort()
            if len(nb) > max_z:
                nb = nb[:: int(math.ceil(len(nb) / max_z))]
            dt = (r / ARC_STEPS) / self.rw[j]
            t = dt * np.arange(-ARC_STEPS - 1, ARC_STEPS + 2)
            zz = np.repeat(self.z[nb], len(t))
            ww = np.repeat(self.rw[nb], len(t)) * np.exp(1j * np.tile(t, len(nb)))
            pts = np.column_stack([zz.real, zz.imag, ww.real, ww.imag])
            return pts[np.linalg.norm(pts - p, axis=1) <= r]

        return fetch, p


# ---------------------------------------------------------------------------
# the chain


@dataclass
class SupportCloud:
    """Support of one derived distribution: sample indices and per-point bases in C^n."""

    stage: int
    index: np.ndarray
    bases: dict
    resolution: float
    unresolved: int = 0
    low_confidence: bool = False

    def __len__(self):
        return len(self.index)

    def dims(self) -> np.ndarray:
        return np.array([self.bases[int(i)].dim for i in self.index], int)

    def same_as(self, other: "SupportCloud") -> bool:
        return np.array_equal(self.index, other.index) and np.array_equal(self.dims(), other.dims())

    def dim_histogram(self) -> dict:
        vals, counts = np.unique(self.dims(), return_counts=True)
        return {str(int(v)): int(c) for v, c in zip(vals, counts)}


@dataclass
class IntersectionRecord:
    """Outcome of one intersection step at one point."""

    tangent_dim: int | None
    cosines: np.ndarray
    new_dim: int
    resolved: bool


@dataclass
class CoreChain:
    stages: list
    records: list
    stabilized: bool
    analysis: BoundaryAnalysis | None = None

    @property
    def core(self) -> SupportCloud:
        return self.stages[-1]

    @property
    def stabilized_stage(self) -> int:
        return self.stages[-1].stage


def stage_zero(analysis: BoundaryAnalysis) -> SupportCloud:
    idx = analysis.support_index
    bases = {int(i): analysis.null_bases[int(i)] for i in idx}
    bases = {i: b for i, b in bases.items() if b.dim >= 1}
    idx = np.array(sorted(bases), int)
    return SupportCloud(0, idx, bases, _resolution(analysis))


def _resolution(analysis: BoundaryAnalysis) -> float:
    return float(analysis.sample.step)


def _rotation_invariant(cloud: SupportCloud, sample: BoundarySample) -> bool:
    """Every base point of the cloud carries its full circle of sampled angles."""
    z = sample.z[cloud.index]
    _, counts = np.unique(z, return_counts=True)
    return bool(np.all(counts == sample.n_theta))


def _tangent_estimates(cloud: SupportCloud, analysis: BoundaryAnalysis, params: CoreParams) -> dict:
    """Tangent estimate per sample index in the cloud."""
    sample = analysis.sample
    out: dict = {}
    if not len(cloud):
        return out
    if isinstance(analysis.domain, HartogsDomain) and _rotation_invariant(cloud, sample):
        zs, first = np.unique(sample.z[cloud.index], return_index=True)
        reps = cloud.index[first]
        sym = _SymmetricSupport(zs, sample.phi[reps])
        for j, rep in enumerate(reps):
            fetch, p = sym.provider(j)
            jac = analysis.domain.chart_jacobian(zs[j], sample.phi_z[rep], 0.0)
            t_amb = _orthonormal_columns(jac)
            est = zariski_tangent_estimate(fetch, p, params.scales, params.tau, t_amb)
            out[("z", complex(zs[j]))] = est
        return out
    pts = sample.real_coords()[cloud.index]
    tree = cKDTree(pts)
    for k, i in enumerate(cloud.index):
        p = pts[k]

        def fetch(r, p=p):
            nb = tree.query_ball_point(p, r)
            return pts[np.sort(np.asarray(nb, int))] if len(nb) else None

        out[int(i)] = zariski_tangent_estimate(fetch, p, params.scales, params.tau, analysis.real_tangent(int(i)))
    return out


def _orthonormal_columns(a: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(a)
    return q


def _rotate_real(basis: np.ndarray, theta: float) -> np.ndarray:
    """Rotate the w-plane coordinates of real tangent vectors by theta."""
    c, s = math.cos(theta), math.sin(theta)
    out = basis.copy()
    out[2] = c * basis[2] - s * basis[3]
    out[3] = s * basis[2] + c * basis[3]
    return out


def derive_next(cloud: SupportCloud, analysis: BoundaryAnalysis, params: CoreParams | None = None,
                form: str = "direct", estimates: dict | None = None):
    """Next derived distribution: N^{a+1}_p = CT_p(S_{N^a}) cap N_p.

    ``form="recursive"`` intersects with N^a_p instead of the original N_p
    (the two agree; computing both is a consistency check).  Points whose
    tangent estimate is unresolved keep their current basis.  Returns
    ``(next_cloud, records)`` with one :class:`IntersectionRecord` per input point.
    """
    params = params or CoreParams()
    if form not in ("direct", "recursive"):
        raise ValueError(form)
    if not len(cloud):
        return SupportCloud(cloud.stage + 1, cloud.index.copy(), {}, cloud.resolution), {}
    if estimates is None:
        estimates = _tangent_estimates(cloud, analysis, params)
    sample = analysis.sample
    n = analysis.grad.shape[1]
    new_bases, records = {}, {}
    unresolved = 0
    for i in cloud.index:
        i = int(i)
        key = ("z", complex(sample.z[i]))
        if key in estimates:
            est = estimates[key]
            tangent = None if est.tangent is None else _rotate_real(est.tangent, float(sample.theta[i]))
        else:
            est = estimates[i]
            tangent = est.tangent
        target = analysis.null_bases[i] if form == "direct" else cloud.bases[i]
        if tangent is None:
            unresolved += 1
            new_bases[i] = cloud.bases[i]
            records[i] = IntersectionRecord(None, np.zeros(0), cloud.bases[i].dim, False)
            continue
        tb = complexify(tangent) if tangent.shape[1] else SubspaceBasis.zero(2 * n)
        nb = SubspaceBasis(2 * n, embed_holomorphic(target.vectors.T).T)
        cos = principal_angles(tb, nb)
        inter = subspace_intersect(tb, nb, params.intersect_tol)
        hol = SubspaceBasis(n, inter.vectors[:n]) if inter.dim else SubspaceBasis.zero(n)
        new_bases[i] = hol
        records[i] = IntersectionRecord(est.plateau_dim, cos, hol.dim, True)
    keep = np.array(sorted(i for i, b in new_bases.items() if b.dim >= 1), int)
    nxt = SupportCloud(cloud.stage + 1, keep, {int(i): new_bases[int(i)] for i in keep}, cloud.resolution,
                       unresolved, unresolved > LOW_CONFIDENCE_FRACTION * len(cloud))
    if nxt.low_confidence:
        log.warning("stage %d: %d of %d tangent estimates unresolved", nxt.stage, unresolved, len(cloud))
    return nxt, records


def compute_core(domain: HartogsDomain, params: CoreParams | None = None, analysis: BoundaryAnalysis | None = None,
                 form: str = "direct") -> CoreChain:
    """Iterate derive_next from the Levi null distribution until it stabilizes."""
    params = params or CoreParams()
    if analysis is None:
        sample = domain.boundary_sample(params.n_z, params.n_theta, params.k_samples, params.seed)
        analysis = analyze_boundary(domain, sample, params.eps_rel)
    stages = [stage_zero(analysis)]
    records: list = []
    if not len(stages[0]):
        return CoreChain(stages, records, True, analysis)
    for _ in range(params.max_iter):
        nxt, rec = derive_next(stages[-1], analysis, params, form)
        records.append(rec)
        if nxt.same_as(stages[-1]):
            nxt.stage = stages[-1].stage + 1
            stages.append(nxt)
            return CoreChain(stages, records, True, analysis)
        stages.append(nxt)
        if not len(nxt):
            return CoreChain(stages, records, True, analysis)
    chain = CoreChain(stages, records, False, analysis)
    raise NonStabilizationError(f"chain did not stabilize within {params.max_iter} steps", chain)


# ---------------------------------------------------------------------------
# partition and certificates

STRONG = -1
CORE = -2


@dataclass
class PartitionLabeling:
    """Per-sample label: -1 for K_{-1}, a >= 0 for K_a, CORE (-2) for the core support."""

    labels: np.ndarray

    def name(self, i: int) -> str:
        lab = int(self.labels[i])
        return "core" if lab == CORE else f"K_{lab}"

    def counts(self) -> dict:
        vals, cnt = np.unique(self.labels, return_counts=True)
        return {("core" if v == CORE else f"K_{int(v)}"): int(c) for v, c in zip(vals, cnt)}


def partition_boundary(chain: CoreChain, analysis: BoundaryAnalysis | None = None) -> PartitionLabeling:
    """Label every sample: strongly pseudoconvex, dropped at stage a, or core."""
    analysis = analysis or chain.analysis
    if not chain.stabilized:
        raise PreconditionError("partition requires a stabilized chain")
    n = len(analysis.sample)
    hits = np.zeros(n, int)
    labels = np.full(n, -99, int)
    strong = ~analysis.weak
    hits[strong] += 1
    labels[strong] = STRONG
    members = [np.zeros(n, bool) for _ in chain.stages]
    for k, st in enumerate(chain.stages):
        members[k][st.index] = True
    for k in range(len(chain.stages) - 1):
        dropped = members[k] & ~members[k + 1]
        hits[dropped] += 1
        labels[dropped] = chain.stages[k].stage
    core = members[-1]
    hits[core] += 1
    labels[core] = CORE
    # weak samples that never entered stage 0 (zero null space) cannot occur
    if np.any(hits != 1):
        bad = np.flatnonzero(hits != 1)
        raise InvariantBreach(f"{len(bad)} samples labeled {sorted(set(hits[bad].tolist()))} times")
    return PartitionLabeling(labels)


@dataclass
class DropCertificate:
    index: int
    stage: int
    tangent_dim: int
    cosines: np.ndarray
    max_cosine: float
    intersection_dim: int


def certify_drop(index: int, chain: CoreChain, eps: float = DEFAULT_INTERSECT_TOL,
                 labels: PartitionLabeling | None = None) -> DropCertificate:
    """Principal-angle evidence that CT_p(S_{N^a}) cap N_p = {0} at the drop stage a."""
    labels = labels or partition_boundary(chain)
    lab = int(labels.labels[index])
    if lab < 0:
        raise PreconditionError(f"sample {index} is labeled {labels.name(index)}; only dropped points are certified")
    rec = chain.records[lab][index]
    if not rec.resolved:
        raise InvariantBreach(f"sample {index} dropped without a resolved tangent estimate")
    cos = np.asarray(rec.cosines)
    mx = float(cos.max()) if cos.size else 0.0
    dim = int(np.sum(cos >= 1.0 - eps))
    return DropCertificate(index, lab, int(rec.tangent_dim), cos, mx, dim)
