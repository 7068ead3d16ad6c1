import math

import numpy as np
import pytest

from levicore import sets2d
from levicore.errors import PreconditionError
from levicore.hartogs import (
    AnalyticPotential,
    BoundaryPoint,
    HartogsDomain,
    PotentialField,
    ball_domain,
    build_weight,
    rotation,
)
from levicore.levi import levi_form_batch
from levicore.linalg import complexify, orthonormalize, principal_angles


def quartic_domain():
    """phi = |z|^4 + Re(z^2) / 4: analytic weight with phi_{z zbar} = 4 |z|^2."""
    pot = AnalyticPotential(
        lambda z: np.abs(z) ** 4 + 0.25 * (z * z).real,
        lambda z: 2 * np.abs(z) ** 2 * np.conj(z) + 0.25 * z,
        lambda z: 4 * np.abs(z) ** 2,
        name="quartic",
    )
    return HartogsDomain(None, pot, name="quartic")


# -- potential field


def test_disk_potential_matches_closed_form(rng):
    a = 0.5
    pf = PotentialField(lambda z: (np.abs(z) <= a).astype(float), 2.0**-9)
    z = rng.uniform(-0.52, 0.52, 200) + 1j * rng.uniform(-0.52, 0.52, 200)
    r = np.abs(z)
    # logarithmic potential of the uniform unit-density disk, times 2/pi
    ref = np.where(r >= a, 2 * a * a * np.log(r), r * r - a * a + 2 * a * a * math.log(a))
    assert np.max(np.abs(pf.phi(z) - ref) / np.abs(ref)) <= 1e-3
    # lattice nodes go through the FFT path
    zn = (pf.coords[::29][:, None] + 1j * pf.coords[::31][None, :]).ravel()
    zn = zn[np.abs(zn) <= 0.74]
    rn = np.abs(zn)
    refn = np.where(rn >= a, 2 * a * a * np.log(rn), rn * rn - a * a + 2 * a * a * math.log(a))
    assert np.max(np.abs(pf.phi(zn) - refn) / np.abs(refn)) <= 1e-3


def test_fft_nodes_agree_with_direct_sum():
    K = sets2d.cantor_square("1/4")
    f = build_weight(K, 2.0**-7)
    zn = (f.coords[::7][:, None] + 1j * f.coords[::5][None, :]).ravel()
    zn = zn[np.abs(zn) <= 0.75]
    p_fft, pz_fft = f.phi_and_phi_z(zn)
    p_dir, pz_dir = f._direct(zn)
    assert np.max(np.abs(p_fft - p_dir)) < 1e-12
    assert np.max(np.abs(pz_fft - pz_dir)) < 1e-12


def test_phi_z_vs_finite_differences(fat_domain, rng):
    f, K = fat_domain.potential, fat_domain.K
    z = rng.uniform(-0.7, 0.7, 400) + 1j * rng.uniform(-0.7, 0.7, 400)
    z = z[(np.abs(z) <= 0.74) & (K.distance(z) > 0)][:100]
    e = 1e-6
    px = (f.phi(z + e) - f.phi(z - e)) / (2 * e)
    py = (f.phi(z + 1j * e) - f.phi(z - 1j * e)) / (2 * e)
    fd = (px - 1j * py) / 2
    assert np.max(np.abs(fd - f.phi_z(z)) / np.abs(f.phi_z(z))) <= 1e-4


def _gauss_edge(p, q, pieces=64, order=32):
    t, w = np.polynomial.legendre.leggauss(order)
    s = np.linspace(0, 1, pieces + 1)
    u = ((s[:-1] + s[1:]) / 2)[:, None] + ((s[1:] - s[:-1]) / 2)[:, None] * t
    wt = ((s[1:] - s[:-1]) / 2)[:, None] * w * abs(q - p)
    return (p + (q - p) * u).ravel(), wt.ravel()


def test_phi_zzbar_is_g_in_flux_form():
    """(1/4) * outward flux of grad phi through a box = sum of cell masses g h^2 inside it."""
    h = 2.0**-7
    f = build_weight(sets2d.cantor_square("1/4"), h)
    # box edges on cell midlines split every boundary cell evenly
    x0, x1, y0, y1 = -12.5 * h, 19.5 * h, -6.5 * h, 25.5 * h
    corners = [x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1]
    flux = 0.0
    for k in range(4):
        p, q = corners[k], corners[(k + 1) % 4]
        pts, wts = _gauss_edge(p, q)
        normal = -1j * (q - p) / abs(q - p)
        pz = f.phi_z(pts)
        grad = 2 * pz.real - 2j * pz.imag
        flux += np.sum((grad * np.conj(normal)).real * wts)
    x, y = np.meshgrid(f.coords, f.coords, indexing="ij")
    inside = (x > x0) & (x < x1) & (y > y0) & (y < y1)
    mass = f.g_grid[inside].sum() * h * h
    assert abs(flux / 4 - mass) <= 2e-4 * mass
    # against the continuum integral only the Riemann-sum error of g remains
    m = 1500
    xs = x0 + (np.arange(m) + 0.5) * (x1 - x0) / m
    ys = y0 + (np.arange(m) + 0.5) * (y1 - y0) / m
    gx, gy = np.meshgrid(xs, ys)
    cont = f.g(gx + 1j * gy).mean() * (x1 - x0) * (y1 - y0)
    assert abs(flux / 4 - cont) <= 2e-2 * cont


def test_g_vanishes_exactly_on_K(fat_domain):
    K = fat_domain.K
    z = K.sample(1000, seed=1)
    assert np.all(fat_domain.potential.phi_zzbar(z) == 0)
    f = fat_domain.potential
    x, y = np.meshgrid(f.coords, f.coords, indexing="ij")
    zz = x + 1j * y
    disk = np.abs(zz) <= f.radius
    on = K.distance(zz[disk]) == 0
    assert np.all(f.g_grid[disk][on] == 0)
    assert np.all(f.g_grid[disk][~on] >= 0)


def test_build_weight_rejects_coarse_grid():
    K = sets2d.cantor_square("1/4")
    with pytest.raises(PreconditionError):
        build_weight(K, 2.0**-6)
    with pytest.raises(PreconditionError):
        build_weight(K, 2.0**-9, sharpness=0)
    with pytest.raises(PreconditionError):
        PotentialField(lambda z: np.ones(np.shape(z)), 0.003)


def test_export_rows_columns(fat_domain):
    rows = fat_domain.potential.export_rows()
    assert rows.shape[1] == 6
    assert np.all(rows[:, 2] >= 0)


# -- defining function


def _fd_derivatives(dom, z, w, e=1e-4, hessian=True):
    """Gradient and complex Hessian of rho by central finite differences in (x1, y1, x2, y2)."""

    def rho(v):
        return dom.defining_function(np.array([v[0] + 1j * v[1]]), np.array([v[2] + 1j * v[3]]))[0][0]

    v0 = np.array([z.real, z.imag, w.real, w.imag])
    eye = np.eye(4) * e
    d1 = np.array([(rho(v0 + eye[i]) - rho(v0 - eye[i])) / (2 * e) for i in range(4)])
    grad = np.array([(d1[0] - 1j * d1[1]) / 2, (d1[2] - 1j * d1[3]) / 2])
    if not hessian:
        return grad, None
    d2 = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            d2[i, j] = (rho(v0 + eye[i] + eye[j]) - rho(v0 + eye[i] - eye[j]) - rho(v0 - eye[i] + eye[j])
                        + rho(v0 - eye[i] - eye[j])) / (4 * e * e)
    hess = np.empty((2, 2), complex)
    for a in range(2):
        for b in range(2):
            xa, ya, xb, yb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1
            hess[a, b] = (d2[xa, xb] + d2[ya, yb] + 1j * (d2[xa, yb] - d2[ya, xb])) / 4
    return grad, hess


@pytest.mark.parametrize("make", [ball_domain, quartic_domain])
def test_defining_function_vs_finite_differences(make, rng):
    dom = make()
    z = 0.6 * np.sqrt(rng.random(100)) * np.exp(2j * np.pi * rng.random(100))
    th = 2 * np.pi * rng.random(100)
    w = dom.boundary_w(z, th)
    rho, grad, hess = dom.defining_function(z, w)
    assert np.max(np.abs(rho)) <= 1e-12
    assert np.all(hess[:, 1, 1] == 1) and np.all(hess[:, 0, 1] == 0)
    for k in range(100):
        g_fd, h_fd = _fd_derivatives(dom, z[k], w[k])
        assert np.max(np.abs(g_fd - grad[k])) <= 1e-4 * np.abs(grad[k]).max()
        assert np.max(np.abs(h_fd - hess[k])) <= 1e-4 * np.abs(hess[k]).max()


def test_quadrature_defining_function_first_derivatives(fat_domain, rng):
    z = rng.uniform(-0.6, 0.6, 30) + 1j * rng.uniform(-0.6, 0.6, 30)
    w = fat_domain.boundary_w(z, rng.random(30))
    _, grad, _ = fat_domain.defining_function(z, w)
    for k in range(30):
        g_fd, _ = _fd_derivatives(fat_domain, z[k], w[k], e=1e-6, hessian=False)
        assert np.max(np.abs(g_fd - grad[k])) <= 1e-4 * np.abs(grad[k]).max()


def test_patch_violation():
    with pytest.raises(PreconditionError):
        ball_domain().defining_function(np.array([0.8 + 0j]), np.array([0.1 + 0j]))


def test_K_outside_half_disk_rejected():
    with pytest.raises(PreconditionError):
        HartogsDomain.from_set(sets2d.Circle(0j, 0.6), 2.0**-7)


# -- samples


def test_boundary_sample_on_boundary(fat_domain):
    s = fat_domain.boundary_sample(64, 3)
    rho, _, _ = fat_domain.defining_function(s.z, s.w, s.phi, s.phi_z)
    assert np.max(np.abs(rho)) <= 1e-12
    xs = -0.75 + 1.5 / 64 * np.arange(64)
    expected = np.sum(np.abs(xs[:, None] + 1j * xs[None, :]) <= 0.75) * 3
    assert len(s) == expected
    s1 = fat_domain.boundary_sample(64, 1)
    assert np.all(s1.theta == 0)


def test_sample_includes_all_K_nodes(fat_domain):
    s = fat_domain.boundary_sample(256, 1)
    xs = -0.75 + 1.5 / 256 * np.arange(256)
    zz = (xs[:, None] + 1j * xs[None, :]).ravel()
    zz = zz[np.abs(zz) <= 0.75]
    onK = zz[fat_domain.K.distance(zz) == 0]
    assert len(onK) == 2304
    assert set(onK.tolist()) <= set(s.z.tolist())


def test_rotation_symmetry_of_levi_eigenvalues(fat_domain, rng):
    z = rng.uniform(-0.5, 0.5, 50) + 1j * rng.uniform(-0.5, 0.5, 50)
    t = rng.uniform(0, 2 * np.pi)
    ev = []
    for th in (0.0, t):
        w = fat_domain.boundary_w(z, th)
        res = levi_form_batch(fat_domain.oracle(), np.column_stack([z, w]))
        ev.append(np.array([r.eigenvalues[0] for r in res]))
    assert np.max(np.abs(ev[0] - ev[1])) <= 1e-10


# -- analytic frames


def test_null_frame_central_point():
    dom = HartogsDomain.from_set(sets2d.FiniteSet((0j,)), 2.0**-8)
    v = dom.analytic_null_frame(np.array([0j]), 0.3)[0]
    assert abs(v[0]) == pytest.approx(1) and abs(v[1]) < 1e-12


def test_null_frame_requires_K(fat_domain):
    with pytest.raises(PreconditionError):
        fat_domain.analytic_null_frame(np.array([0.7 + 0j]), 0.0)


def test_null_frame_levi_form_vanishes(fat_domain, rng):
    z = fat_domain.K.sample(1000, seed=5)
    th = 2 * np.pi * rng.random(1000)
    v = fat_domain.analytic_null_frame(z, th)
    w = fat_domain.boundary_w(z, th)
    _, grad, hess = fat_domain.defining_function(z, w)
    tangency = np.abs(np.sum(grad * v, axis=1))
    levi = np.einsum("nj,njk,nk->n", v, hess, np.conj(v)).real / np.linalg.norm(grad, axis=1)
    assert np.max(tangency) <= 1e-12
    assert np.max(np.abs(levi)) <= 1e-8


def test_example_frame_x_pattern(fat_domain):
    z = complex(fat_domain.K.sample(1, seed=2)[0])
    p = fat_domain.boundary_point(z, 0.0)
    X = fat_domain.example_tangent_frame(p)[:, 0]
    a = math.exp(-0.5 * float(fat_domain.potential.phi(np.array([z]))[0]))
    # d/dtheta of (z, a e^{i theta}) at theta = 0: i a (d/dw - d/dwbar)
    assert np.allclose(X, [0, 1j * a, 0, -1j * a])
    # matches the real circle tangent (0, 0, 0, a) embedded
    assert np.allclose(complexify(np.array([[0], [0], [0], [a]])).projector() @ X, X)


def test_example_frame_spans_complex_tangent(fat_domain):
    K = fat_domain.K
    z = K.sample(1000, seed=7)
    th = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    for k in range(0, 1000, 10):
        p = BoundaryPoint(complex(z[k]), float(th[k]), complex(fat_domain.boundary_w(np.array([z[k]]), th[k])[0]))
        fr = fat_domain.example_tangent_frame(p)
        assert np.linalg.matrix_rank(fr, tol=1e-10) == 3
        _, grad, _ = fat_domain.defining_function(np.array([p.z]), np.array([p.w]))
        normal = np.array([2 * grad[0, 0].real, -2 * grad[0, 0].imag, 2 * grad[0, 1].real, -2 * grad[0, 1].imag])
        q, _ = np.linalg.qr(np.column_stack([normal, np.eye(4)]))
        ct = complexify(q[:, 1:])
        cos = principal_angles(orthonormalize(fr, tol=1e-10), ct)
        assert len(cos) == 3 and cos.min() >= 1 - 1e-8


def test_rotation_matrix_conjugates_frames(fat_domain):
    z = complex(fat_domain.K.sample(1, seed=3)[0])
    t = 0.7
    f0 = fat_domain.example_tangent_frame(fat_domain.boundary_point(z, 0.0))
    ft = fat_domain.example_tangent_frame(fat_domain.boundary_point(z, t))
    assert np.allclose(rotation(t) @ f0, ft)
