"""Complete Hartogs domains {(z, w): |z| < 1, |w|^2 < exp(-phi(z))} in C^2.

The weight ``phi`` is the logarithmic potential of a density ``g >= 0`` that
vanishes exactly on a compact set K, so ``phi_{z zbar} = g``.  With
``g = exp(-s / dist(z, K))`` the Levi form of the boundary degenerates exactly
over K.

All computations live on the patch |z| <= 3/4.  Complexified vectors use the
frame ``(d/dz, d/dw, d/dzbar, d/dwbar)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.signal import fftconvolve

from . import sets2d
from .errors import PreconditionError

PATCH_RADIUS = 0.75
DEFAULT_H = 2.0**-9
DEFAULT_SHARPNESS = 0.01
FLUSH = 1e-300


@numba.njit(cache=True)
def _direct_sum(z, nodes, wts, cell_radius):
    n = len(z)
    phi = np.empty(n)
    phiz = np.empty(n, np.complex128)
    r2 = cell_radius * cell_radius
    inner = math.log(cell_radius) - 0.5
    for i in range(n):
        s = 0.0
        sz = 0j
        zi = z[i]
        for j in range(len(nodes)):
            o = zi - nodes[j]
            d2 = o.real * o.real + o.imag * o.imag
            if d2 >= r2:
                s += 0.5 * math.log(d2) * wts[j]
                sz += wts[j] * o.conjugate() / d2
            else:
                s += (inner + d2 / (2 * r2)) * wts[j]
                sz += wts[j] * o.conjugate() / r2
        phi[i] = 2 / math.pi * s
        phiz[i] = sz / math.pi
    return phi, phiz


def _is_pow2(x: float) -> bool:
    m, _ = math.frexp(x)
    return x > 0 and m == 0.5


class AnalyticPotential:
    """Weight given by closed-form callables ``phi``, ``phi_z``, ``phi_zzbar``."""

    def __init__(self, phi: Callable, phi_z: Callable, phi_zzbar: Callable, name: str = "analytic"):
        self._phi, self._phi_z, self._phi_zzbar = phi, phi_z, phi_zzbar
        self.name = name

    def phi(self, z):
        return np.asarray(self._phi(np.asarray(z, complex)), float)

    def phi_z(self, z):
        return np.asarray(self._phi_z(np.asarray(z, complex)), complex)

    def phi_zzbar(self, z):
        return np.asarray(self._phi_zzbar(np.asarray(z, complex)), float)

    def g(self, z):
        return self.phi_zzbar(z)


def ball_potential() -> AnalyticPotential:
    """phi = -log(1 - |z|^2): the Hartogs form of the unit ball."""
    return AnalyticPotential(
        lambda z: -np.log1p(-np.abs(z) ** 2),
        lambda z: np.conj(z) / (1 - np.abs(z) ** 2),
        lambda z: 1.0 / (1 - np.abs(z) ** 2) ** 2,
        name="ball",
    )


class PotentialField:
    """Logarithmic potential of a lattice density on {|z| <= 3/4}.

    ``phi(z) = (2/pi) sum_cells K(z - zeta) g(zeta) h^2`` where K is log|.|
    averaged over the disk of area h^2 centred at each node (equal to log|.|
    outside that disk), so phi is C^1 and ``phi_z`` is its exact derivative.
    Values at lattice nodes come from an FFT convolution; other points are
    summed directly.
    """

    def __init__(self, weight: Callable, h: float = DEFAULT_H, radius: float = PATCH_RADIUS, K=None, sharpness=None):
        if not _is_pow2(h):
            raise PreconditionError(f"grid spacing must be a power of two, got {h}")
        self.h = float(h)
        self.radius = float(radius)
        self.K = K
        self.sharpness = sharpness
        self._weight = weight
        m = int(round(radius / h))
        self.m = m
        self.coords = (np.arange(2 * m + 1) - m) * h
        x, y = np.meshgrid(self.coords, self.coords, indexing="ij")
        zz = x + 1j * y
        inside = np.abs(zz) <= radius
        g = np.zeros(zz.shape)
        g[inside] = weight(zz[inside])
        g[g < FLUSH] = 0.0
        self.g_grid = g
        self.cell_radius = h / math.sqrt(math.pi)
        nz = g > 0
        self._nodes = zz[nz]
        self._wts = g[nz] * h * h
        self._phi_grid, self._phiz_grid = self._convolve()

    # -- quadrature kernels
    def _kernels(self, offsets: np.ndarray):
        d = np.abs(offsets)
        big = d >= self.cell_radius
        r2 = self.cell_radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(big, np.log(np.where(big, d, 1.0)), math.log(self.cell_radius) - 0.5 + d * d / (2 * r2))
            kz = np.where(big, 1.0 / np.where(big, offsets, 1.0), np.conj(offsets) / r2)
        return k, kz

    def _convolve(self):
        n = 2 * self.m + 1
        off = (np.arange(2 * n - 1) - (n - 1)) * self.h
        ox, oy = np.meshgrid(off, off, indexing="ij")
        k, kz = self._kernels(ox + 1j * oy)
        w = self.g_grid * self.h * self.h
        sl = slice(n - 1, 2 * n - 1)
        phi = (2 / math.pi) * fftconvolve(w, k, mode="full")[sl, sl]
        phiz = (1 / math.pi) * fftconvolve(w.astype(complex), kz, mode="full")[sl, sl]
        return phi, phiz

    # -- lookup
    def _node_index(self, z: np.ndarray):
        """Integer lattice indices for points that are exactly nodes, else -1."""
        fx = z.real / self.h + self.m
        fy = z.imag / self.h + self.m
        ix, iy = np.rint(fx), np.rint(fy)
        ok = (fx == ix) & (fy == iy) & (ix >= 0) & (iy >= 0) & (ix <= 2 * self.m) & (iy <= 2 * self.m)
        return np.where(ok, ix, -1).astype(int), np.where(ok, iy, -1).astype(int), ok

    def _direct(self, z: np.ndarray):
        flat = np.ascontiguousarray(np.ravel(z), dtype=complex)
        phi, phiz = _direct_sum(flat, self._nodes, self._wts, self.cell_radius)
        return phi.reshape(np.shape(z)), phiz.reshape(np.shape(z))

    def _eval(self, z):
        z = np.asarray(z, complex)
        ix, iy, ok = self._node_index(z)
        phi = np.empty(z.shape, float)
        phiz = np.empty(z.shape, complex)
        phi[ok] = self._phi_grid[ix[ok], iy[ok]]
        phiz[ok] = self._phiz_grid[ix[ok], iy[ok]]
        if (~ok).any():
            p, pz = self._direct(z[~ok])
            phi[~ok] = p
            phiz[~ok] = pz
        return phi, phiz

    def phi(self, z):
        return self._eval(z)[0]

    def phi_z(self, z):
        return self._eval(z)[1]

    def phi_and_phi_z(self, z):
        return self._eval(z)

    def g(self, z):
        z = np.asarray(z, complex)
        v = np.asarray(self._weight(z), float)
        return np.where(v < FLUSH, 0.0, v)

    def phi_zzbar(self, z):
        return self.g(z)

    def export_rows(self):
        """Rows (x, y, g, phi, re phi_z, im phi_z) for every lattice node in the disk."""
        x, y = np.meshgrid(self.coords, self.coords, indexing="ij")
        inside = np.abs(x + 1j * y) <= self.radius
        return np.column_stack([
            x[inside], y[inside], self.g_grid[inside], self._phi_grid[inside],
            self._phiz_grid[inside].real, self._phiz_grid[inside].imag,
        ])


def _largest_gap(K) -> float | None:
    """Largest first-generation removed gap of the Cantor factors of K, after rescaling."""
    if isinstance(K, sets2d.Rescale):
        inner = _largest_gap(K.inner)
        return None if inner is None else abs(K.scale) * inner
    if isinstance(K, sets2d.CantorProduct):
        return min(float(K.first.schedule[0]), float(K.second.schedule[0]))
    if isinstance(K, sets2d.CantorLine):
        return float(K.schedule[0])
    if isinstance(K, sets2d.Union):
        gaps = [g for g in (_largest_gap(m) for m in K.members) if g is not None]
        return min(gaps) if gaps else None
    return None


def build_weight(K, h: float = DEFAULT_H, sharpness: float = DEFAULT_SHARPNESS) -> PotentialField:
    """Potential field with density g = exp(-s / dist(K, z)), g = 0 on K."""
    if h > 2.0**-7:
        raise PreconditionError(f"grid spacing {h} exceeds 2^-7")
    if sharpness <= 0:
        raise PreconditionError("sharpness must be positive")
    gap = _largest_gap(K)
    if gap is not None and h > gap / 2:
        raise PreconditionError(
            f"grid spacing {h} does not resolve the first-generation gap {gap:.3g} of K; use h <= {gap / 2:.3g}"
        )
    s = float(sharpness)

    def weight(z):
        d = np.asarray(K.distance(z), float)
        with np.errstate(divide="ignore"):
            return np.where(d > 0, np.exp(-s / np.where(d > 0, d, 1.0)), 0.0)

    return PotentialField(weight, h, K=K, sharpness=s)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    z: complex
    theta: float
    w: complex

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.z, self.w])

    @property
    def real_coords(self) -> np.ndarray:
        return np.array([self.z.real, self.z.imag, self.w.real, self.w.imag])


@dataclass
class BoundarySample:
    """Boundary points in chart form, stored as parallel arrays.

    ``lattice`` marks points from the (x, y, theta) lattice; the rest come from
    sampling K directly.  Order: lattice rows by (ix, iy, itheta), then K samples
    by (sample index, itheta).
    """

    z: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    phi_z: np.ndarray
    lattice: np.ndarray
    n_theta: int
    step: float = float("nan")

    def __len__(self):
        return len(self.z)

    def points(self) -> list[BoundaryPoint]:
        return [BoundaryPoint(complex(a), float(t), complex(b)) for a, t, b in zip(self.z, self.theta, self.w)]

    def real_coords(self) -> np.ndarray:
        return np.column_stack([self.z.real, self.z.imag, self.w.real, self.w.imag])


class HartogsDomain:
    """Complete Hartogs domain over the unit disk built from a compact set K.

    ``potential`` may be a :class:`PotentialField` (built from K) or an
    :class:`AnalyticPotential`; K is ``None`` for analytic weights with no
    degenerate locus (e.g. the ball).
    """

    def __init__(self, K, potential, patch_radius: float = PATCH_RADIUS, name: str = "hartogs"):
        if K is not None and not sets2d.contained_in_half_disk(K):
            raise PreconditionError("K must lie in the disk |z| < 1/2")
        self.K = K
        self.potential = potential
        self.patch_radius = patch_radius
        self.name = name
        self.n = 2

    @classmethod
    def from_set(cls, K, h: float = DEFAULT_H, sharpness: float = DEFAULT_SHARPNESS, name="hartogs"):
        return cls(K, build_weight(K, h, sharpness), name=name)

    # -- geometry
    def _check_patch(self, z):
        if np.any(np.abs(z) > self.patch_radius + 1e-15):
            raise PreconditionError("point outside the working patch |z| <= 3/4")

    def boundary_w(self, z, theta):
        return np.exp(-0.5 * self.potential.phi(z) + 1j * np.asarray(theta, float))

    def boundary_point(self, z: complex, theta: float) -> BoundaryPoint:
        self._check_patch(z)
        return BoundaryPoint(complex(z), float(theta), complex(self.boundary_w(np.array([z]), theta)[0]))

    def defining_function(self, z, w, phi=None, phi_z=None):
        """rho = |w|^2 - exp(-phi(z)), its (1,0) gradient and complex Hessian.

        Vectorized: returns arrays of shape (N,), (N, 2), (N, 2, 2) with
        ``H[..., j, k] = d^2 rho / dz_j dzbar_k``.
        """
        z = np.atleast_1d(np.asarray(z, complex))
        w = np.atleast_1d(np.asarray(w, complex))
        self._check_patch(z)
        if phi is None or phi_z is None:
            if isinstance(self.potential, PotentialField):
                phi, phi_z = self.potential.phi_and_phi_z(z)
            else:
                phi, phi_z = self.potential.phi(z), self.potential.phi_z(z)
        e = np.exp(-phi)
        rho = np.abs(w) ** 2 - e
        grad = np.stack([phi_z * e, np.conj(w)], axis=-1)
        hess = np.zeros(z.shape + (2, 2), complex)
        hess[..., 0, 0] = e * (self.potential.phi_zzbar(z) - np.abs(phi_z) ** 2)
        hess[..., 1, 1] = 1.0
        return rho, grad, hess

    def oracle(self):
        from .levi import DefiningFunctionOracle

        def evaluate(points):
            pts = np.atleast_2d(np.asarray(points, complex))
            return self.defining_function(pts[:, 0], pts[:, 1])

        return DefiningFunctionOracle(2, evaluate)

    def on_K(self, z) -> np.ndarray:
        if self.K is None:
            return np.zeros(np.shape(z), bool)
        return np.asarray(self.K.distance(z)) == 0.0

    def analytic_null_frame(self, z, theta) -> np.ndarray:
        """Unit vector proportional to (1, -phi_z(z) w) in C^2 for z in K."""
        z = np.atleast_1d(np.asarray(z, complex))
        if not np.all(self.on_K(z)):
            raise PreconditionError("analytic null frame requires z in K")
        w = self.boundary_w(z, theta)
        v = np.stack([np.ones_like(z), -self.potential.phi_z(z) * w], axis=-1)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def example_tangent_frame(self, p: BoundaryPoint, check_K: bool = True) -> np.ndarray:
        """Columns X_p, Y_p, Z_p (unnormalized) in the frame (dz, dw, dzbar, dwbar).

        X_p is the derivative along the w-circle, Y_p along the imaginary z
        direction and Z_p along the real z direction, each lifted to the boundary.
        """
        if check_K and not bool(self.on_K(np.array([p.z]))[0]):
            raise PreconditionError("tangent frame requires z in K")
        pz = complex(self.potential.phi_z(np.array([p.z]))[0])
        phi = float(self.potential.phi(np.array([p.z]))[0])
        a = math.exp(-phi / 2)
        wp = a * np.exp(1j * p.theta)
        wm = a * np.exp(-1j * p.theta)
        cy = -0.5j * pz + 0.5j * np.conj(pz)
        cx = -0.5 * pz - 0.5 * np.conj(pz)
        X = np.array([0, 1j * wp, 0, -1j * wm])
        Y = np.array([1j, wp * cy, -1j, wm * cy])
        Z = np.array([1, wp * cx, 1, wm * cx])
        return np.column_stack([X, Y, Z])

    def chart_jacobian(self, z, phi_z=None, theta=0.0) -> np.ndarray:
        """Columns d/dx, d/dy, d/dtheta of (x, y, theta) -> (Re z, Im z, Re w, Im w)."""
        z = complex(z)
        if phi_z is None:
            phi_z = complex(self.potential.phi_z(np.array([z]))[0])
        w = complex(self.boundary_w(np.array([z]), theta)[0])
        phi_x = 2 * phi_z.real
        phi_y = -2 * phi_z.imag
        cols = []
        for dw, dz in ((-0.5 * phi_x * w, 1), (-0.5 * phi_y * w, 1j), (1j * w, 0)):
            cols.append([complex(dz).real, complex(dz).imag, dw.real, dw.imag])
        return np.array(cols).T

    def boundary_sample(self, n_z: int, n_theta: int = 1, k_samples: int = 0, seed: int = 0) -> BoundarySample:
        """Deterministic (x, y, theta) lattice over the patch, plus optional points of K.

        Lattice: x, y in {-3/4 + i * 3/(2 n_z)}, theta in {2 pi j / n_theta}.
        """
        if n_z < 8 or n_theta < 1:
            raise PreconditionError("need n_z >= 8 and n_theta >= 1")
        step = 1.5 / n_z
        xs = -self.patch_radius + step * np.arange(n_z)
        x, y = np.meshgrid(xs, xs, indexing="ij")
        zl = (x + 1j * y).ravel()
        zl = zl[np.abs(zl) <= self.patch_radius]
        zs = [zl]
        flags = [np.ones(len(zl), bool)]
        if k_samples and self.K is not None:
            zk = np.asarray(self.K.sample(k_samples, seed), complex)
            zs.append(zk)
            flags.append(np.zeros(len(zk), bool))
        zu = np.concatenate(zs)
        lat = np.concatenate(flags)
        if isinstance(self.potential, PotentialField):
            phi, phiz = self.potential.phi_and_phi_z(zu)
        else:
            phi, phiz = self.potential.phi(zu), self.potential.phi_z(zu)
        thetas = 2 * np.pi * np.arange(n_theta) / n_theta
        z = np.repeat(zu, n_theta)
        th = np.tile(thetas, len(zu))
        ph = np.repeat(phi, n_theta)
        w = np.exp(-0.5 * ph + 1j * th)
        return BoundarySample(z, th, w, ph, np.repeat(phiz, n_theta), np.repeat(lat, n_theta), n_theta, step)


def ball_domain() -> HartogsDomain:
    """The unit ball |z|^2 + |w|^2 < 1 written as a Hartogs domain."""
    return HartogsDomain(None, ball_potential(), name="ball")


def rotation(theta: float) -> np.ndarray:
    """Action of (z, w) -> (z, e^{i theta} w) on the frame (dz, dw, dzbar, dwbar)."""
    e = np.exp(1j * theta)
    return np.diag([1, e, 1, np.conj(e)])
