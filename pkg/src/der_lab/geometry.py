"""Orthonormal-frame calculus shared by the Lie-group and lattice backends.

All tensors are stored by their components in an orthonormal frame
``e_a = sum_mu frame[..., mu, a] d_mu``; field arrays carry the grid axes first
(no grid axes in Lie-group mode) and tensor indices last.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .clifford import CliffordAlgebra, build_clifford


class GeometryError(ValueError):
    pass


class NotPositiveDefinite(GeometryError):
    pass


@dataclass(frozen=True)
class CurvatureData:
    """``Rm[i,j,k,l] = -g(R(e_i,e_j)e_k, e_l)``, ``Ric[j,l] = sum_i Rm[i,j,i,l]``."""

    Rm: np.ndarray
    Ric: np.ndarray
    R: np.ndarray


def sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def check_symmetric(h, name="tensor", atol=1e-12):
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != h.shape[-2] or not np.allclose(h, np.swapaxes(h, -1, -2), atol=atol, rtol=0):
        raise GeometryError(f"{name} must be symmetric")
    return h


def inv_sqrt_spd(A, tol=1e-14, maxiter=100):
    """Principal inverse square root of a stack of SPD matrices (scaled Denman-Beavers)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n), A.shape)
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not positive definite") from None
    Y = A.copy()
    Z = eye.copy()
    for _ in range(maxiter):
        detY = np.linalg.det(Y)
        detZ = np.linalg.det(Z)
        mu = np.abs(detY * detZ) ** (-1.0 / (2 * n))
        mu = mu[..., None, None]
        Yi = np.linalg.inv(Y)
        Zi = np.linalg.inv(Z)
        Y_new = sym(0.5 * (mu * Y + Zi / mu))
        Z_new = sym(0.5 * (mu * Z + Yi / mu))
        delta = np.max(np.abs(Z_new - Z)) / max(1.0, np.max(np.abs(Z_new)))
        Y, Z = Y_new, Z_new
        if delta < tol:
            break
    else:
        raise NotPositiveDefinite("inverse square root iteration did not converge")
    # one Newton-Schulz polish step restores the last digits: Z <- Z (3I - A Z^2) / 2
    Z = sym(0.5 * Z @ (3 * eye - A @ Z @ Z))
    return Z


class FrameGeometry:
    """Riemannian geometry described by an orthonormal frame field."""

    n: int
    grid_shape: tuple
    metric: np.ndarray
    frame: np.ndarray

    def _partial(self, f):
        """Coordinate derivatives, shape ``grid + (n,) + comp``."""
        raise NotImplementedError

    def _bracket_constants(self):
        """Structure constants ``c[k,i,j]`` of the coordinate fields, or ``None``."""
        return None

    def integrate(self, f):
        raise NotImplementedError

    def with_metric(self, metric, frame):
        raise NotImplementedError

    # ------------------------------------------------------------------ frames
    @cached_property
    def clifford(self) -> CliffordAlgebra:
        return build_clifford(self.n)

    @cached_property
    def frame_inv(self):
        return np.linalg.inv(self.frame)

    @cached_property
    def volume_density(self):
        return np.sqrt(np.linalg.det(self.metric))

    def d(self, f):
        """Frame derivatives ``e_a(f)``; result shape ``grid + (n,) + comp``."""
        f = np.asarray(f)
        g = len(self.grid_shape)
        comp = f.shape[g:]
        p = self._partial(f)
        flat = p.reshape(self.grid_shape + (self.n, -1))
        out = np.einsum("...ma,...mc->...ac", self.frame, flat)
        return out.reshape(self.grid_shape + (self.n,) + comp)

    @cached_property
    def structure(self):
        """``C[a,b,c] = g([e_a, e_b], e_c)``."""
        B, Binv = self.frame, self.frame_inv
        C = np.zeros(self.grid_shape + (self.n,) * 3)
        consts = self._bracket_constants()
        if consts is not None:
            C = C + np.einsum("...ia,...jb,kij,...ck->...abc", B, B, consts, Binv)
        if self.grid_shape:
            dB = self.d(B)  # dB[..., a, nu, b] = e_a(B[nu, b])
            t = np.einsum("...cv,...avb->...abc", Binv, dB)
            C = C + t - np.swapaxes(t, -3, -2)
        return C

    @cached_property
    def connection(self):
        """``Gamma[a,b,c] = g(nabla_{e_a} e_b, e_c)`` via the Koszul formula."""
        C = self.structure
        return 0.5 * (C - np.moveaxis(C, -1, -3) + np.moveaxis(C, -3, -1))

    # ------------------------------------------------------------- curvature
    @cached_property
    def riemann_g(self):
        """``G[a,b,c,d] = g(R(e_a,e_b)e_c, e_d)``."""
        Gam, C = self.connection, self.structure
        dG = self.d(Gam)  # dG[..., a, b, c, d] = e_a(Gamma_bcd)
        out = dG - np.swapaxes(dG, -4, -3)
        quad = np.einsum("...bce,...aed->...abcd", Gam, Gam)
        out = out + quad - np.swapaxes(quad, -4, -3)
        out = out - np.einsum("...abe,...ecd->...abcd", C, Gam)
        return out

    @cached_property
    def curvature(self) -> CurvatureData:
        Rm = -self.riemann_g
        Ric = np.einsum("...ijil->...jl", Rm)
        return CurvatureData(Rm=Rm, Ric=Ric, R=np.trace(Ric, axis1=-2, axis2=-1))

    # ------------------------------------------------------ tensor calculus
    def cov(self, T, rank=None):
        """Covariant derivative of a frame tensor of ``rank`` indices.

        The new derivative index comes first: ``out[..., a, i1..ik] = (nabla_a T)_{i1..ik}``.
        """
        T = np.asarray(T)
        g = len(self.grid_shape)
        k = T.ndim - g if rank is None else rank
        out = self.d(T)
        Gam = self.connection
        letters = "ijklmnop"[:k]
        for s in range(k):
            src = letters[:s] + "z" + letters[s + 1:]
            out = out - np.einsum(f"...a{letters[s]}z,...{src}->...a{letters}", Gam, T)
        return out

    def hessian(self, f):
        """``(nabla nabla f)_{ij} = nabla_i nabla_j f``."""
        return self.cov(self.cov(f, 0), 1)

    def laplacian(self, f):
        """Analyst's Laplacian ``tr nabla nabla f`` (non-positive spectrum)."""
        return np.trace(self.hessian(f), axis1=-2, axis2=-1)

    def divergence_delta(self, h):
        """``(delta h)_j = -sum_i nabla_i h_ij``."""
        return -np.einsum("...iij->...j", self.cov(h, 2))

    def double_divergence(self, h):
        """``delta^2 h = sum_ij nabla_i nabla_j h_ij``."""
        return np.einsum("...ijij->...", self.cov(self.cov(h, 2), 3))

    def rough_laplacian(self, h):
        """``nabla^* nabla h = -sum_i (nabla^2 h)_{i,i}``."""
        return -np.trace(self.cov(self.cov(h, 2), 3), axis1=-4, axis2=-3)

    def curvature_action(self, h):
        """``(R h)(X,Y) = sum_ij g(R(e_i,X)Y, e_j) h_ij``; equals ``Ric`` for ``h = g``."""
        return np.einsum("...ixyj,...ij->...xy", self.riemann_g, h)

    def lichnerowicz(self, h):
        """``nabla^*nabla h + Ric o h + h o Ric - 2 R h`` (vanishes on ``h = g``)."""
        Ric = self.curvature.Ric
        return (self.rough_laplacian(h) + Ric @ h + h @ Ric
                - 2 * self.curvature_action(h))

    def sym_grad(self, v):
        """``nabla_i v_j + nabla_j v_i``."""
        dv = self.cov(v, 1)
        return dv + np.swapaxes(dv, -1, -2)

    # ------------------------------------------------------------ plumbing
    @property
    def identity(self):
        return np.broadcast_to(np.eye(self.n), self.grid_shape + (self.n, self.n))

    def coordinate_tensor(self, h):
        """Coordinate components ``H_{mu nu}`` of the frame tensor ``h``."""
        Bi = self.frame_inv
        return np.einsum("...am,...ab,...bv->...mv", Bi, h, Bi)

    def deformed(self, h, t=1.0):
        """Geometry of ``g + t h`` with the Bourguignon-Gauduchon frame ``e (I + t h)^{-1/2}``."""
        h = check_symmetric(h, "h")
        h = np.broadcast_to(h, self.grid_shape + (self.n, self.n))
        M = self.identity + t * h
        root = inv_sqrt_spd(M)
        return self.with_metric(self.metric + t * self.coordinate_tensor(h), self.frame @ root)

    def rotated(self, rotation):
        """Same metric, frame ``e' = e R`` for a (field of) rotation matrix ``R``."""
        return self.with_metric(self.metric, self.frame @ rotation)

    def check_spinor(self, psi):
        psi = np.asarray(psi)
        if psi.shape != self.grid_shape + (self.clifford.N,):
            raise GeometryError(
                f"spinor shape {psi.shape} incompatible with geometry {self.grid_shape + (self.clifford.N,)}")
        return psi

    def check_tensor(self, h, rank=2):
        h = np.asarray(h, dtype=float)
        if h.shape != self.grid_shape + (self.n,) * rank:
            h = np.broadcast_to(h, self.grid_shape + (self.n,) * rank)
        return h

    def same_manifold(self, other) -> bool:
        return type(self) is type(other) and self.grid_shape == other.grid_shape and self.n == other.n
