import numpy as np
import pytest
from scipy.stats import special_ortho_group

from der_lab.clifford import norm2, re_inner, spin_lift, vector_mul
from der_lab.geometry import GeometryError
from der_lab.lattice import FourierMode, LatticeGeometry, build_lattice_metric, random_metric_spec
from der_lab.liegroup import LieGroupGeometry
from der_lab.spinors import (bg_transport, covariant_derivative, dirac, penrose, penrose_trace, plane_wave,
                             random_spinor_field, sl_residual, spin_connection)
from der_lab.variation import dirac_matrix

from conftest import random_spd, random_spinor, random_sym


def lattice(spec, N, order=4):
    return LatticeGeometry(build_lattice_metric(spec, N, stencil_order=order))


def test_flat_connection_and_constant_spinor():
    g = lattice({"kind": "flat"}, 8)
    assert np.all(spin_connection(g) == 0)
    psi = np.broadcast_to(np.array([1.0, 2j]), g.grid_shape + (2,)).copy()
    assert np.allclose(covariant_derivative(g, psi), 0)
    assert np.allclose(dirac(g, psi), 0)
    assert np.allclose(penrose(g, psi), 0)


def test_su2_round_killing(su2, rng):
    gam = su2.clifford.gamma
    for _ in range(3):
        psi = random_spinor(rng)
        nab = covariant_derivative(su2, psi)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            assert np.allclose(nab[i], 0.5 * gam[j] @ gam[k] @ psi, atol=1e-14)
            assert np.allclose(nab[i] + 0.5 * gam[i] @ psi, 0, atol=1e-14)
        assert np.allclose(dirac(su2, psi), 1.5 * psi, atol=1e-14)
        assert np.allclose(penrose(su2, psi), 0, atol=1e-14)
    assert np.min(np.abs(np.linalg.eigvals(dirac_matrix(su2)))) == pytest.approx(1.5, abs=1e-12)


def test_conformal_spin_connection_oracle():
    mode = FourierMode((1, 1, 0), 0.1, 0.3)
    for N, tol in ((16, 2e-3), (32, 2e-4)):
        g = lattice({"kind": "conformal", "modes": [{"k": [1, 1, 0], "amplitude": 0.1, "phase": 0.3}]}, N)
        x = g.points
        u, du = mode.value(x), mode.grad(x)
        eye = np.eye(3)
        # Gamma_abc = exp(-u) (delta_ac d_b u - delta_ab d_c u) for the frame exp(-u) d_i
        oracle = np.exp(-u)[..., None, None, None] * (
            np.einsum("ac,...b->...abc", eye, du) - np.einsum("ab,...c->...abc", eye, du))
        w = spin_connection(g)
        assert np.allclose(w, -np.swapaxes(w, -1, -2), atol=1e-14)
        assert np.max(np.abs(w - oracle)) < tol


def test_plane_wave_derivative_and_dirac_block():
    g = lattice({"kind": "flat"}, 8)
    k = np.array([1, -2, 1])
    s = np.array([0.3, 1j])
    psi = plane_wave(g, k, s)
    nab = covariant_derivative(g, psi)
    # order-4 stencil symbol for a mode with 2 pi k_j h
    h = 1 / 8
    th = 2 * np.pi * k * h
    sym = (2 / 3 * np.sin(th) * 2 - 1 / 12 * np.sin(2 * th) * 2) / h
    assert np.allclose(nab, 1j * sym[:, None] * psi[..., None, :], atol=1e-12)
    # continuum block: D on exp(2 pi i k.x) s is 2 pi i k.gamma; eigenvalues +-2 pi |k|
    block = 2j * np.pi * np.einsum("j,jab->ab", k, g.clifford.gamma)
    assert np.allclose(np.sort(np.linalg.eigvalsh(block)), [-2 * np.pi * np.linalg.norm(k), 2 * np.pi * np.linalg.norm(k)])
    discrete = 1j * np.einsum("j,jab->ab", sym, g.clifford.gamma)
    Dpsi = dirac(g, psi)
    assert np.allclose(Dpsi, plane_wave(g, k, discrete @ s), atol=1e-11)
    fine = lattice({"kind": "flat"}, 64)
    Df = dirac(fine, plane_wave(fine, k, s))
    assert np.allclose(Df, plane_wave(fine, k, block @ s), atol=1e-3)


def test_dirac_self_adjoint_lie(rng):
    for name in ("su2", "heisenberg"):
        g = LieGroupGeometry.named(name, random_spd(rng))
        M = dirac_matrix(g)
        assert np.allclose(M, M.conj().T, atol=1e-13)


def test_dirac_self_adjoint_lattice_converges(rng):
    spec = random_metric_spec(np.random.default_rng(1))
    gaps = []
    for N in (8, 16, 32):
        g = lattice(spec, N)
        r = np.random.default_rng(2)
        psi, phi = random_spinor_field(g, r), random_spinor_field(g, r)
        gaps.append(abs(g.integrate(re_inner(dirac(g, psi), phi)) - g.integrate(re_inner(psi, dirac(g, phi)))))
    assert gaps[-1] < 1e-5
    assert gaps[0] / gaps[2] > 2 ** (2 * 3.5)


@pytest.mark.parametrize("group", ["su2", "heisenberg", "abelian"])
def test_sl_lie_exact(group, rng):
    for _ in range(5):
        g = LieGroupGeometry.named(group, random_spd(rng))
        assert np.max(np.abs(sl_residual(g, random_spinor(rng)))) < 1e-10


def _sl_probe(g):
    return (plane_wave(g, [0, 0, 0], [1, 0.5j]) + plane_wave(g, [1, 0, 0], [0.3, 0.2])
            + plane_wave(g, [0, 1, 1], [0.1j, 0.3]))


def test_sl_flat_lattice_at_roundoff():
    # D^2 and nabla^* nabla are built from the same composed stencils on a flat grid
    for N in (8, 16):
        g = lattice({"kind": "flat"}, N)
        assert np.max(np.abs(sl_residual(g, _sl_probe(g)))) < 1e-12


def test_sl_conformal_order2_converges():
    spec = {"kind": "conformal", "modes": [{"k": [1, 0, 0], "amplitude": 0.1}, {"k": [0, 1, 0], "amplitude": 0.05}]}
    grids = (16, 32, 64)
    errs = [np.max(np.abs(sl_residual(g, _sl_probe(g)))) for g in (lattice(spec, N, 2) for N in grids)]
    assert -np.polyfit(np.log(grids), np.log(errs), 1)[0] >= 1.8


def test_leibniz_lie(rng):
    g = LieGroupGeometry.named("heisenberg", random_spd(rng))
    psi = random_spinor(rng)
    gam = g.clifford.gamma
    nab = covariant_derivative(g, psi)
    Gam = g.connection
    for b in range(3):
        lhs = covariant_derivative(g, gam[b] @ psi)
        rhs = np.einsum("ac,cij,j->ai", Gam[:, b, :], gam, psi) + np.einsum("ij,aj->ai", gam[b], nab)
        assert np.allclose(lhs, rhs, atol=1e-13)


def test_leibniz_lattice(rng):
    spec = random_metric_spec(np.random.default_rng(4))
    errs = []
    for N in (16, 32):
        g = lattice(spec, N)
        psi = random_spinor_field(g, np.random.default_rng(5))
        Y = np.stack([FourierMode((1, 0, 0), 1.0).value(g.points), np.ones(g.grid_shape),
                      FourierMode((0, 1, 1), 0.5).value(g.points)], axis=-1)
        lhs = covariant_derivative(g, vector_mul(g.clifford, Y, psi))
        nabY = g.cov(Y, 1)  # [..., a, c]
        rhs = (np.einsum("...ac,cij,...j->...ai", nabY, g.clifford.gamma, psi)
               + np.einsum("...b,bij,...aj->...ai", Y, g.clifford.gamma, covariant_derivative(g, psi)))
        errs.append(np.max(np.abs(lhs - rhs)))
    # exact up to the stencil's product-rule error
    assert errs[1] < 1e-2 and np.log2(errs[0] / errs[1]) > 3.5


def test_penrose_trace_free(rng):
    g = lattice(random_metric_spec(rng), 8)
    psi = random_spinor_field(g, rng)
    assert np.max(np.abs(penrose_trace(g, psi))) < 1e-12
    X = rng.normal(size=3)
    Xf = np.broadcast_to(X, g.grid_shape + (3,))
    assert np.allclose(penrose(g, psi, Xf), np.einsum("k,...ka->...a", X, penrose(g, psi)))


def test_bg_transport(rng):
    spec = random_metric_spec(rng)
    g0 = lattice(spec, 8)
    psi = random_spinor_field(g0, rng)
    assert np.array_equal(bg_transport(g0, g0, psi), psi)
    h = build_lattice_metric(random_metric_spec(rng, amplitude=0.3), 8).samples - np.eye(3)
    g1 = g0.deformed(h, 0.5)
    fwd = bg_transport(g0, g1, psi)
    assert np.allclose(norm2(fwd), norm2(psi), atol=1e-12)
    back = bg_transport(g1, g0, fwd)
    assert np.allclose(back, psi, atol=1e-12)
    # a frame that differs by a rotation picks up the spin lift, still isometric
    R = special_ortho_group.rvs(3, random_state=3)
    g1r = g1.rotated(np.broadcast_to(R, g1.grid_shape + (3, 3)))
    out = bg_transport(g0, g1r, psi)
    assert np.allclose(norm2(out), norm2(psi), atol=1e-12)
    assert np.allclose(bg_transport(g1r, g0, out), psi, atol=1e-10)
    with pytest.raises(GeometryError):
        bg_transport(g0, lattice(spec, 16), psi)


def test_gauge_covariance(rng):
    g = LieGroupGeometry.named("heisenberg", random_spd(rng))
    psi = random_spinor(rng)
    R = special_ortho_group.rvs(3, random_state=7)
    S = spin_lift(g.clifford, R)
    assert np.allclose(dirac(g.rotated(R), S @ psi), S @ dirac(g, psi), atol=1e-12)


def test_backend_mismatch():
    g = lattice({"kind": "flat"}, 8)
    with pytest.raises(GeometryError):
        dirac(g, np.ones(2))


def test_sl_needs_quarter_factor(monkeypatch, rng):
    from der_lab import spinors

    g = LieGroupGeometry.named("heisenberg", random_spd(rng))
    psi = random_spinor(rng)
    assert np.max(np.abs(spinors.sl_residual(g, psi))) < 1e-12
    # the unnormalized sum_ij Gamma_kij e_i e_j breaks D^2 = nabla^*nabla + R/4
    monkeypatch.setattr(spinors, "_omega_matrices",
                        lambda geom: np.einsum("...kij,ijab->...kab", geom.connection, geom.clifford.pairs))
    assert np.max(np.abs(spinors.sl_residual(g, psi))) > 1e-1
