"""Spin connection, Dirac-type operators and spinor transport on frame geometries."""

from __future__ import annotations

import numpy as np

from .clifford import spin_lift
from .geometry import FrameGeometry, GeometryError, inv_sqrt_spd


def spin_connection(geom: FrameGeometry):
    """Coefficients ``omega[..., k, i, j] = Gamma_kij`` (antisymmetric in ``i, j``)."""
    return geom.connection


def _omega_matrices(geom):
    # Omega_k = 1/4 sum_ij Gamma_kij e_i e_j, acting on spinor components
    return 0.25 * np.einsum("...kij,ijab->...kab", geom.connection, geom.clifford.pairs)


def covariant_derivative(geom: FrameGeometry, psi, direction=None):
    """``nabla_{e_k} psi = e_k(psi) + 1/4 sum_ij Gamma_kij e_i e_j psi``.

    Without ``direction`` returns all directions, shape ``grid + (n, N)``.
    """
    psi = geom.check_spinor(psi)
    out = geom.d(psi) + np.einsum("...kab,...b->...ka", _omega_matrices(geom), psi)
    if direction is None:
        return out
    return out[..., direction, :]


def _dirac_from(geom, nabla):
    return np.einsum("iab,...ib->...a", geom.clifford.gamma, nabla)


def dirac(geom: FrameGeometry, psi):
    """``D psi = sum_i e_i . nabla_{e_i} psi``."""
    return _dirac_from(geom, covariant_derivative(geom, psi))


def connection_laplacian(geom: FrameGeometry, psi):
    """``nabla^* nabla psi = -sum_a (nabla_a nabla_a psi - nabla_{nabla_a e_a} psi)``."""
    nab = covariant_derivative(geom, psi)  # (..., b, N)
    second = geom.d(nab)  # (..., a, b, N)
    second = second + np.einsum("...aij,...bj->...abi", _omega_matrices(geom), nab)
    second = second - np.einsum("...abc,...ci->...abi", geom.connection, nab)
    return -np.einsum("...aai->...i", second)


def sl_residual(geom: FrameGeometry, psi):
    """Pointwise ``D^2 psi - (nabla^* nabla psi + R/4 psi)``."""
    R = geom.curvature.R
    return (dirac(geom, dirac(geom, psi)) - connection_laplacian(geom, psi)
            - 0.25 * R[..., None] * psi)


def penrose(geom: FrameGeometry, psi, X=None):
    """``P_X psi = nabla_X psi + (1/n) X . D psi``; all frame directions when ``X`` is None."""
    nab = covariant_derivative(geom, psi)
    Dpsi = _dirac_from(geom, nab)
    gam = geom.clifford.gamma
    P = nab + np.einsum("kab,...b->...ka", gam, Dpsi) / geom.n
    if X is None:
        return P
    return np.einsum("...k,...ka->...a", X, P)


def penrose_trace(geom, psi):
    """``sum_i e_i . P_{e_i} psi`` (identically zero)."""
    return np.einsum("iab,...ib->...a", geom.clifford.gamma, penrose(geom, psi))


def bg_transport(g0: FrameGeometry, g1: FrameGeometry, psi):
    """Bourguignon-Gauduchon push-forward of ``psi`` from ``g0`` to ``g1``.

    The reference frame on ``g1`` is ``e0 (b0^T g1 b0)^{-1/2}``; components are
    kept in that frame and converted to the actual frame of ``g1`` by the spin
    lift of the rotation between the two (identity for geometries produced by
    :meth:`FrameGeometry.deformed`).
    """
    if not g0.same_manifold(g1):
        raise GeometryError("bg_transport requires geometries on the same manifold and grid")
    psi = np.array(g0.check_spinor(psi), copy=True)
    B0 = g0.frame
    gram = np.einsum("...ma,...mv,...vb->...ab", B0, g1.metric, B0)
    ref = B0 @ inv_sqrt_spd(gram)
    rot = np.linalg.solve(ref, g1.frame)  # g1.frame = ref @ rot
    eye = np.eye(g0.n)
    dev = np.abs(rot - eye).max(axis=(-2, -1))
    if np.all(dev < 1e-13):
        return psi
    alg = g0.clifford
    flat_rot = rot.reshape(-1, g0.n, g0.n)
    flat_psi = psi.reshape(-1, alg.N)
    for p in np.flatnonzero(dev.reshape(-1) >= 1e-13):
        flat_psi[p] = spin_lift(alg, flat_rot[p]) @ flat_psi[p]
    return flat_psi.reshape(psi.shape)


def plane_wave(geom, k, spinor, phase=0.0):
    """``spinor * exp(2 pi i k.x + i phase)`` on a lattice geometry."""
    x = geom.points
    arg = 2 * np.pi * np.tensordot(np.asarray(k, dtype=float), x, axes=([0], [0])) + phase
    return np.exp(1j * arg)[..., None] * np.asarray(spinor, dtype=complex)


def random_spinor_field(geom, rng, modes=2, kmax=1, amplitude=1.0):
    """Smooth random spinor: a constant plus ``modes`` low Fourier modes per component."""
    N = geom.clifford.N
    base = rng.normal(size=N) + 1j * rng.normal(size=N)
    if not geom.grid_shape:
        return amplitude * base
    psi = np.broadcast_to(base, geom.grid_shape + (N,)).astype(complex)
    for _ in range(modes):
        k = rng.integers(-kmax, kmax + 1, size=geom.n)
        c = 0.3 * (rng.normal(size=N) + 1j * rng.normal(size=N))
        psi = psi + plane_wave(geom, k, c, rng.uniform(0, 2 * np.pi))
    return amplitude * psi
