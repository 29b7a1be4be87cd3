import numpy as np
import pytest

from der_lab.geometry import GeometryError, NotPositiveDefinite
from der_lab.liegroup import (LieGroupGeometry, abelian_constants, check_structure_constants, curvature_tensors,
                              heisenberg_constants, koszul_connection, su2_constants)

from conftest import random_spd, random_sym


def koszul_oracle(c, G):
    """Loop-level Koszul formula for left-invariant fields in a G-orthonormal frame."""
    n = len(G)
    L = np.linalg.cholesky(G)
    B = np.linalg.inv(L).T  # columns: frame vectors in algebra basis
    # bracket of frame vectors, expressed in the algebra basis
    def br(u, v):
        return np.array([sum(c[k, i, j] * u[i] * v[j] for i in range(n) for j in range(n)) for k in range(n)])

    def g(u, v):
        return u @ G @ v

    e = [B[:, a] for a in range(n)]
    Gam = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            for cc in range(n):
                Gam[a, b, cc] = 0.5 * (g(br(e[a], e[b]), e[cc]) - g(br(e[b], e[cc]), e[a])
                                       + g(br(e[cc], e[a]), e[b]))
    return Gam


def curvature_oracle(c, G):
    """Rm, Ric, R from the oracle connection: R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z."""
    n = len(G)
    Gam = koszul_oracle(c, G)
    L = np.linalg.cholesky(G)
    B = np.linalg.inv(L).T
    C = np.einsum("ia,jb,kij,kl,lc->abc", B, B, c, G, B)  # g([e_a,e_b], e_c)
    Rg = np.zeros((n,) * 4)
    for a in range(n):
        for b in range(n):
            for k in range(n):
                for d in range(n):
                    s = 0.0
                    for e in range(n):
                        s += Gam[b, k, e] * Gam[a, e, d] - Gam[a, k, e] * Gam[b, e, d] - C[a, b, e] * Gam[e, k, d]
                    Rg[a, b, k, d] = s
    Rm = -Rg
    Ric = np.einsum("ijil->jl", Rm)
    return Rm, Ric, np.trace(Ric)


def test_abelian_flat():
    g = LieGroupGeometry(abelian_constants(), random_spd(np.random.default_rng(0)))
    assert np.allclose(koszul_connection(g), 0)
    cur = curvature_tensors(g)
    assert np.allclose(cur.Rm, 0) and cur.R == 0


def test_su2_round_connection(su2):
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[i, j, k] = s
    assert np.allclose(su2.connection, eps, atol=1e-12)
    cur = su2.curvature
    assert cur.R == pytest.approx(6.0, abs=1e-12)
    assert np.allclose(cur.Ric, 2 * np.eye(3), atol=1e-12)
    assert np.allclose(cur.Ric - cur.R / 3 * np.eye(3), 0, atol=1e-12)


@pytest.mark.parametrize("name,c", [("su2", su2_constants()), ("heisenberg", heisenberg_constants())])
def test_berger_and_random_against_oracle(name, c, rng):
    for G in (np.diag([4.0, 1.0, 1.0]), random_spd(rng)):
        g = LieGroupGeometry(c, G)
        assert np.max(np.abs(g.connection - koszul_oracle(c, G))) < 1e-12
        Rm, Ric, R = curvature_oracle(c, G)
        cur = g.curvature
        assert np.max(np.abs(cur.Rm - Rm)) < 1e-11
        assert cur.R == pytest.approx(R, abs=1e-11)


def test_heisenberg_milnor():
    cur = LieGroupGeometry.named("heisenberg").curvature
    assert np.allclose(cur.Ric, np.diag([-0.5, -0.5, 0.5]), atol=1e-12)
    assert cur.R == pytest.approx(-0.5)


@pytest.mark.parametrize("name", ["su2", "heisenberg", "abelian"])
def test_connection_and_curvature_invariants(name, rng):
    g = LieGroupGeometry.named(name, random_spd(rng))
    Gam = g.connection
    assert np.allclose(Gam, -np.swapaxes(Gam, 1, 2), atol=1e-12)
    # torsion-free: Gamma_abc - Gamma_bac = g([e_a, e_b], e_c)
    assert np.allclose(Gam - np.swapaxes(Gam, 0, 1), g.structure, atol=1e-12)
    Rm = g.curvature.Rm
    assert np.allclose(Rm, -np.swapaxes(Rm, 0, 1), atol=1e-10)
    assert np.allclose(Rm, -np.swapaxes(Rm, 2, 3), atol=1e-10)
    assert np.allclose(Rm, np.transpose(Rm, (2, 3, 0, 1)), atol=1e-10)
    bianchi = Rm + np.transpose(Rm, (1, 2, 0, 3)) + np.transpose(Rm, (2, 0, 1, 3))
    assert np.max(np.abs(bianchi)) < 1e-10
    assert np.allclose(g.curvature.Ric, g.curvature.Ric.T, atol=1e-12)


def test_scaling_divides_R(su2):
    assert su2.scaled(4.0).curvature.R == pytest.approx(6.0 / 4, abs=1e-12)


def test_tensor_calculus_identities(su2, rng):
    G = random_spd(rng)
    for g in (su2, LieGroupGeometry.named("heisenberg", G)):
        eye = np.eye(3)
        assert np.allclose(g.lichnerowicz(eye), 0, atol=1e-12)
        assert np.allclose(g.divergence_delta(eye), 0, atol=1e-12)
        assert np.trace(eye) == 3
        h, T = random_sym(rng), random_sym(rng)
        assert np.sum((h @ T) * h) == pytest.approx(np.sum((T @ h) * h))
    for _ in range(5):
        assert np.allclose(su2.divergence_delta(random_sym(rng)), 0, atol=1e-12)
    flat = LieGroupGeometry.named("abelian")
    h = random_sym(rng)
    assert np.allclose(flat.lichnerowicz(h), 0) and np.allclose(flat.curvature_action(h), 0)


def test_structure_constant_validation():
    c = su2_constants()
    bad = c.copy()
    bad[0, 1, 2] += 1
    with pytest.raises(GeometryError):
        check_structure_constants(bad)
    # non-unimodular: [e1, e2] = e2 (the ax+b algebra times R)
    nu = np.zeros((3, 3, 3))
    nu[1, 0, 1], nu[1, 1, 0] = 1, -1
    with pytest.raises(GeometryError):
        check_structure_constants(nu)
    # Jacobi violation
    jv = np.zeros((3, 3, 3))
    jv[2, 0, 1], jv[2, 1, 0] = 1, -1
    jv[0, 1, 2], jv[0, 2, 1] = 1, -1
    jv[0, 0, 2], jv[0, 2, 0] = 1, -1
    with pytest.raises(GeometryError):
        check_structure_constants(jv)


def test_indefinite_metric_rejected():
    with pytest.raises(NotPositiveDefinite):
        LieGroupGeometry.named("su2", np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(GeometryError):
        LieGroupGeometry.named("su2", np.array([[1.0, 2.0, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(GeometryError):
        LieGroupGeometry.named("nope")
