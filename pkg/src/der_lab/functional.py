"""The Hilbert-Einstein-Dirac energy, its Euler-Lagrange system and pointwise bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import norm2, re_inner
from .geometry import FrameGeometry, GeometryError
from .spinors import connection_laplacian, covariant_derivative, dirac


@dataclass
class EnergyTerms:
    total: float
    scalar: float
    dirac: float
    mass: float

    def as_dict(self):
        return {"total": self.total, "scalar": self.scalar, "dirac": self.dirac, "mass": self.mass}


def energy(geom: FrameGeometry, psi, lam: float) -> EnergyTerms:
    """``E = int R + <D psi, psi> - lam |psi|^2 dv``, with each term reported."""
    psi = geom.check_spinor(psi)
    s = geom.integrate(geom.curvature.R)
    d = geom.integrate(re_inner(dirac(geom, psi), psi))
    m = -lam * geom.integrate(norm2(psi))
    return EnergyTerms(s + d + m, s, d, m)


def stress(geom, psi, nabla=None):
    """``S[i, j] = Re <e_i . nabla_j psi, psi>``."""
    if nabla is None:
        nabla = covariant_derivative(geom, psi)
    v = np.einsum("iab,...jb->...ija", geom.clifford.gamma, nabla)
    return re_inner(v, psi[..., None, None, :])


def energy_momentum(geom: FrameGeometry, psi):
    """``T(X,Y) = -1/4 <X . nabla_Y psi + Y . nabla_X psi, psi>``."""
    S = stress(geom, psi)
    return -0.25 * (S + np.swapaxes(S, -1, -2))


@dataclass
class ELResidual:
    E1: np.ndarray
    E2: np.ndarray
    E1_sup: float
    E2_sup: float
    E1_l2: float
    E2_l2: float

    @property
    def norms(self):
        return self.E1_sup, self.E2_sup


def el_residuals(geom: FrameGeometry, psi, lam: float) -> ELResidual:
    """``E1 = Ric - R/2 g - T`` and ``E2 = D psi - lam psi`` with sup and L2 norms."""
    psi = geom.check_spinor(psi)
    cur = geom.curvature
    E1 = cur.Ric - 0.5 * cur.R[..., None, None] * geom.identity - energy_momentum(geom, psi)
    E2 = dirac(geom, psi) - lam * psi
    p1 = np.sum(E1**2, axis=(-2, -1))
    p2 = norm2(E2)
    return ELResidual(E1, E2, float(np.sqrt(np.max(p1))), float(np.sqrt(np.max(p2))),
                      float(np.sqrt(geom.integrate(p1))), float(np.sqrt(geom.integrate(p2))))


def _need_dim(geom, nmin=3):
    if geom.n < nmin:
        raise GeometryError(f"requires dimension >= {nmin}, got {geom.n}")


def trace_identity_residual(geom: FrameGeometry, psi, lam: float):
    """Pointwise ``R - lam |psi|^2 / (n - 2)``."""
    _need_dim(geom)
    return geom.curvature.R - lam * norm2(psi) / (geom.n - 2)


def trace_consistency(geom, psi, lam):
    """Right side of ``R - lam|psi|^2/(n-2) = (-2 tr E1 + Re<E2, psi>) / (n-2)``."""
    _need_dim(geom)
    res = el_residuals(geom, psi, lam)
    trE1 = np.trace(res.E1, axis1=-2, axis2=-1)
    return (-2 * trE1 + re_inner(res.E2, psi)) / (geom.n - 2)


def q_curvature(geom: FrameGeometry):
    _need_dim(geom)
    n = geom.n
    cur = geom.curvature
    R = cur.R
    lapR = geom.laplacian(R) if geom.grid_shape else 0.0 * R
    ric2 = np.sum(cur.Ric**2, axis=(-2, -1))
    return (-lapR / (2 * (n - 1)) - 2 * ric2 / (n - 2) ** 2
            + (n**3 - 4 * n**2 + 16 * n - 16) * R**2 / (8 * (n - 1) ** 2 * (n - 2) ** 2))


@dataclass
class BoundsReport:
    psi_bound: bool | None
    psi_margin: float | None
    R_bound: bool | None
    R_margin: float | None
    K_min: float | None
    K_ok: bool | None
    quartic_residual: float

    def as_dict(self):
        return dict(self.__dict__)


def quartic_residual(geom, psi, lam):
    """``nabla^*nabla psi + lam |psi|^2 / (4(n-2)) psi - lam^2 psi`` (pointwise spinor)."""
    _need_dim(geom)
    return (connection_laplacian(geom, psi)
            + lam * norm2(psi)[..., None] / (4 * (geom.n - 2)) * psi - lam**2 * psi)


def apriori_bounds(geom: FrameGeometry, psi, lam: float, K: float | None = None) -> BoundsReport:
    """Evaluate ``|psi|^2 <= 4(n-2) lam``, ``R <= 4 lam^2``, ``-Lap R >= -K R`` and the quartic equation.

    Margins are ``bound - max(quantity)``; the two bounds are skipped (``None``) when ``lam <= 0``.
    """
    _need_dim(geom)
    n = geom.n
    R = geom.curvature.R
    q = float(np.sqrt(np.max(norm2(quartic_residual(geom, psi, lam)))))
    if lam > 0:
        pm = 4 * (n - 2) * lam - float(np.max(norm2(psi)))
        rm = 4 * lam**2 - float(np.max(R))
        pb, rb = bool(pm >= -1e-12), bool(rm >= -1e-12)
    else:
        pm = rm = pb = rb = None
    kmin = kok = None
    if K is not None:
        lapR = geom.laplacian(R) if geom.grid_shape else 0.0 * R
        kmin = float(np.min(-lapR + K * R))
        kok = bool(kmin >= -1e-12)
    return BoundsReport(pb, pm, rb, rm, kmin, kok, q)
