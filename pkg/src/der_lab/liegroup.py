"""Left-invariant metrics on unimodular Lie groups: exact frame algebra."""

from __future__ import annotations

import numpy as np

from .geometry import FrameGeometry, GeometryError, NotPositiveDefinite, check_symmetric


def su2_constants(scale: float = 2.0) -> np.ndarray:
    """``c[k,i,j] = scale * eps_ijk``; ``scale = 2`` with ``G = I`` is the unit round 3-sphere."""
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return scale * np.transpose(eps, (2, 0, 1))


def abelian_constants(n: int = 3) -> np.ndarray:
    return np.zeros((n, n, n))


def heisenberg_constants() -> np.ndarray:
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = 1.0, -1.0
    return c


GROUPS = {
    "su2": su2_constants,
    "abelian": abelian_constants,
    "heisenberg": heisenberg_constants,
}


def check_structure_constants(c, atol=1e-12):
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    if c.shape != (n, n, n):
        raise GeometryError(f"structure constants must have shape (n, n, n), got {c.shape}")
    if not np.allclose(c, -np.swapaxes(c, 1, 2), atol=atol, rtol=0):
        raise GeometryError("structure constants are not antisymmetric in (i, j)")
    # sum over cyclic (i,j,k) of c^m_ij c^l_mk
    jac = np.einsum("mij,lmk->lijk", c, c)
    jac = jac + np.transpose(jac, (0, 2, 3, 1)) + np.transpose(jac, (0, 3, 1, 2))
    if np.max(np.abs(jac), initial=0.0) > atol * max(1.0, np.max(np.abs(c)) ** 2):
        raise GeometryError("structure constants violate the Jacobi identity")
    if np.max(np.abs(np.einsum("iij->j", c)), initial=0.0) > atol:
        raise GeometryError("Lie algebra is not unimodular")
    return c


class LieGroupGeometry(FrameGeometry):
    """Left-invariant metric ``G`` on the Lie algebra with brackets ``c``.

    Tensors and spinors are left-invariant, so every field is a single array of
    frame components and frame derivatives vanish. ``covolume`` is the total
    volume at ``G = I``; the volume at ``G`` is ``covolume * sqrt(det G)``.
    """

    def __init__(self, structure_constants, metric=None, covolume: float = 1.0, frame=None):
        c = check_structure_constants(structure_constants)
        self.n = c.shape[0]
        self.grid_shape = ()
        self.constants = c
        G = np.eye(self.n) if metric is None else check_symmetric(metric, "metric")
        if G.shape != (self.n, self.n):
            raise GeometryError(f"metric must be {self.n}x{self.n}")
        if np.min(np.linalg.eigvalsh(G)) <= 0:
            raise NotPositiveDefinite("metric is not positive definite")
        self.metric = G
        if frame is None:
            L = np.linalg.cholesky(G)
            frame = np.linalg.inv(L).T
        self.frame = np.asarray(frame, dtype=float)
        if covolume <= 0:
            raise GeometryError("covolume must be positive")
        self.covolume = float(covolume)

    @classmethod
    def named(cls, group: str, metric=None, **kw):
        try:
            c = GROUPS[group]()
        except KeyError:
            raise GeometryError(f"unknown group {group!r}; choose from {sorted(GROUPS)}") from None
        return cls(c, metric, **kw)

    def _partial(self, f):
        f = np.asarray(f)
        return np.zeros((self.n,) + f.shape, dtype=f.dtype)

    def _bracket_constants(self):
        return self.constants

    @property
    def volume(self) -> float:
        return self.covolume * float(self.volume_density)

    def integrate(self, f):
        return float(np.real(f)) * self.volume

    def with_metric(self, metric, frame):
        return LieGroupGeometry(self.constants, metric, self.covolume, frame)

    def scaled(self, r: float):
        """``G -> r G`` with the frame scaled by ``1/sqrt(r)`` (same spin trivialization)."""
        return self.with_metric(r * self.metric, self.frame / np.sqrt(r))

    def __repr__(self):
        return f"LieGroupGeometry(n={self.n}, metric={self.metric.tolist()})"


def koszul_connection(geom: LieGroupGeometry):
    return geom.connection


def curvature_tensors(geom):
    return geom.curvature
