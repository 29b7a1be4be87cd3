import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from der_lab.clifford import (build_clifford, clifford_module, clifford_mul, hermitian_inner, norm2,
                              re_inner, spin_lift, vector_mul)

DIMS = range(2, 7)
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def spinor(rng, N):
    return rng.normal(size=N) + 1j * rng.normal(size=N)


@pytest.mark.parametrize("n", DIMS)
def test_anticommutators(n):
    alg = build_clifford(n)
    assert alg.N == 2 ** (n // 2)
    eye = np.eye(alg.N)
    for i in range(n):
        for j in range(n):
            anti = alg.gamma[i] @ alg.gamma[j] + alg.gamma[j] @ alg.gamma[i]
            assert np.max(np.abs(anti + 2 * (i == j) * eye)) < 1e-12


@pytest.mark.parametrize("n", DIMS)
def test_antihermitian_unitary(n):
    for g in build_clifford(n).gamma:
        assert np.allclose(g.conj().T, -g, atol=1e-12)
        assert np.allclose(g.conj().T @ g, np.eye(len(g)), atol=1e-12)


def test_n2_relations():
    g = build_clifford(2).gamma
    assert np.allclose(g[0] @ g[1], -g[1] @ g[0])
    assert np.allclose(g[0] @ g[0], -np.eye(2))


@pytest.mark.parametrize("n,vol", [(3, 1), (5, 1j)])
def test_volume_element_recorded(n, vol):
    alg = build_clifford(n)
    prod = np.linalg.multi_dot(list(alg.gamma))
    assert alg.volume == vol
    assert np.allclose(prod, vol * np.eye(alg.N), atol=1e-12)


def test_deterministic():
    assert np.array_equal(build_clifford(5).gamma, build_clifford(5).gamma)


@pytest.mark.parametrize("n", [1, 7, 2.5])
def test_dimension_range(n):
    with pytest.raises(ValueError):
        build_clifford(n)


@pytest.mark.parametrize("n", [7, 9])
def test_uncapped_module_for_pointwise_checks(n):
    alg = clifford_module(n)
    eye = np.eye(alg.N)
    for i in range(n):
        assert np.allclose(alg.gamma[i] @ alg.gamma[i], -eye)
        for j in range(i):
            assert np.allclose(alg.gamma[i] @ alg.gamma[j], -alg.gamma[j] @ alg.gamma[i])


@pytest.mark.parametrize("n", DIMS)
def test_vector_action_identities(n, rng):
    alg = build_clifford(n)
    psi = spinor(rng, alg.N)
    X, Y = rng.normal(size=n), rng.normal(size=n)
    assert abs(re_inner(vector_mul(alg, X / np.linalg.norm(X), psi), psi)) < 1e-12
    lhs = re_inner(vector_mul(alg, X, psi), vector_mul(alg, Y, psi))
    assert lhs == pytest.approx(X @ Y * norm2(psi), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", DIMS)
def test_hermitian_inner(n, rng):
    alg = build_clifford(n)
    psi, phi = spinor(rng, alg.N), spinor(rng, alg.N)
    assert hermitian_inner(psi, psi).imag == 0 or abs(hermitian_inner(psi, psi).imag) < 1e-14
    assert hermitian_inner(psi, psi).real >= 0
    assert np.isclose(hermitian_inner(psi, phi), np.conj(hermitian_inner(phi, psi)))
    X = rng.normal(size=n)
    lhs = re_inner(vector_mul(alg, X, psi), vector_mul(alg, X, phi))
    assert lhs == pytest.approx(X @ X * re_inner(psi, phi), rel=1e-12, abs=1e-12)


def test_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        hermitian_inner(np.ones(2), np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), arrays(float, 6, elements=finite), arrays(float, 16, elements=finite))
def test_skew_adjoint_and_isometry(n, X, z):
    alg = build_clifford(n)
    X = X[:n]
    N = alg.N
    psi, phi = z[:N] + 1j * z[N:2 * N], z[2 * N - 1::-1][:N] * 1j + 0.5
    a = hermitian_inner(vector_mul(alg, X, psi), phi)
    b = -hermitian_inner(psi, vector_mul(alg, X, phi))
    scale = 1 + np.linalg.norm(X) * np.linalg.norm(psi) * np.linalg.norm(phi)
    assert abs(a - b) <= 1e-12 * scale
    assert abs(norm2(vector_mul(alg, X, psi)) - (X @ X) * norm2(psi)) <= 1e-12 * (1 + X @ X * norm2(psi))


@pytest.mark.parametrize("n", DIMS)
def test_form_actions(n, rng):
    alg = build_clifford(n)
    psi = spinor(rng, alg.N)
    assert np.allclose(clifford_mul(alg, np.zeros((n, n)), psi), 0)
    X = rng.normal(size=n)
    assert np.allclose(clifford_mul(alg, X, psi), vector_mul(alg, X, psi))
    w = rng.normal(size=(n, n))
    w = w - w.T
    expect = sum(w[i, j] * alg.gamma[i] @ alg.gamma[j] @ psi for i in range(n) for j in range(i + 1, n))
    assert np.allclose(clifford_mul(alg, w, psi), expect)
    if n >= 3:
        t = np.zeros((n, n, n))
        for p, s in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1),
                     ((2, 1, 0), -1)):
            t[p] = s
        g = alg.gamma
        assert np.allclose(clifford_mul(alg, t, psi), g[0] @ g[1] @ g[2] @ psi)


def test_form_rejects_bad_input():
    alg = build_clifford(3)
    with pytest.raises(ValueError):
        clifford_mul(alg, np.ones((3, 3)), np.ones(2))
    with pytest.raises(ValueError):
        clifford_mul(alg, np.ones((3, 3, 3, 3)), np.ones(2))


@pytest.mark.parametrize("n", DIMS)
def test_symmetric_contraction_is_minus_trace(n, rng):
    alg = build_clifford(n)
    h = rng.normal(size=(n, n))
    h = h + h.T
    psi = spinor(rng, alg.N)
    out = np.einsum("ij,ijab,b->a", h, alg.pairs, psi)
    assert np.allclose(out, -np.trace(h) * psi, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_spin_lift_covers_rotation(n, rng):
    from scipy.stats import special_ortho_group

    alg = build_clifford(n)
    R = special_ortho_group.rvs(n, random_state=int(rng.integers(1 << 30)))
    S = spin_lift(alg, R)
    assert np.allclose(S.conj().T @ S, np.eye(alg.N), atol=1e-10)
    for a in range(n):
        lhs = S @ alg.gamma[a] @ np.linalg.inv(S)
        rhs = np.einsum("b,bij->ij", R[a], alg.gamma)
        assert np.allclose(lhs, rhs, atol=1e-10)
