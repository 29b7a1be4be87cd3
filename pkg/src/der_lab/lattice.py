"""Smooth periodic metrics on the unit torus ``T^n`` sampled on a uniform grid."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .fd import CENTRAL_WEIGHTS, periodic_derivative
from .geometry import FrameGeometry, GeometryError, NotPositiveDefinite, check_symmetric, inv_sqrt_spd

MIN_RESOLUTION = 8


@dataclass
class FourierMode:
    """``amplitude * cos(2 pi k.x + phase)``, optionally times a symmetric ``tensor``."""

    k: tuple
    amplitude: float
    phase: float = 0.0
    tensor: np.ndarray | None = None

    def value(self, x):
        arg = 2 * np.pi * np.tensordot(x, np.asarray(self.k, dtype=float), axes=([0], [0])) + self.phase
        return self.amplitude * np.cos(arg)

    def grad(self, x):
        k = np.asarray(self.k, dtype=float)
        arg = 2 * np.pi * np.tensordot(x, k, axes=([0], [0])) + self.phase
        return -self.amplitude * 2 * np.pi * np.sin(arg)[..., None] * k

    def hess(self, x):
        k = np.asarray(self.k, dtype=float)
        arg = 2 * np.pi * np.tensordot(x, k, axes=([0], [0])) + self.phase
        return -self.amplitude * (2 * np.pi) ** 2 * np.cos(arg)[..., None, None] * np.outer(k, k)


def _mode(spec) -> FourierMode:
    if isinstance(spec, FourierMode):
        return spec
    t = spec.get("tensor")
    return FourierMode(tuple(spec["k"]), float(spec.get("amplitude", spec.get("amp", 0.0))),
                       float(spec.get("phase", 0.0)), None if t is None else np.asarray(t, dtype=float))


def grid_points(grid: int, n: int):
    """Coordinates of shape ``(n, grid, ..., grid)`` on ``[0, 1)^n``."""
    axes = [np.arange(grid) / grid] * n
    return np.array(np.meshgrid(*axes, indexing="ij"))


def scalar_field(modes, grid, n):
    x = grid_points(grid, n)
    out = np.zeros((grid,) * n)
    for m in modes:
        out += _mode(m).value(x)
    return out


@dataclass
class LatticeMetric:
    n: int
    grid: int
    samples: np.ndarray
    stencil_order: int = 4
    spec: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid < MIN_RESOLUTION:
            raise GeometryError(f"grid resolution must be >= {MIN_RESOLUTION}")
        if self.stencil_order not in CENTRAL_WEIGHTS:
            raise GeometryError(f"stencil order must be one of {sorted(CENTRAL_WEIGHTS)}")
        shape = (self.grid,) * self.n + (self.n, self.n)
        if self.samples.shape != shape:
            raise GeometryError(f"samples must have shape {shape}, got {self.samples.shape}")
        check_symmetric(self.samples, "metric samples")
        eig = np.linalg.eigvalsh(self.samples)
        worst = np.unravel_index(np.argmin(eig[..., 0]), eig.shape[:-1])
        if eig[worst][0] <= 0:
            raise NotPositiveDefinite(
                f"metric is indefinite at grid point {tuple(int(i) for i in worst)} "
                f"(smallest eigenvalue {eig[worst][0]:.3e})")


def build_lattice_metric(spec, grid: int, n: int = 3, stencil_order: int = 4) -> LatticeMetric:
    """Sample an analytic metric onto a ``grid^n`` lattice.

    ``spec`` is an array of samples or a dict with ``kind``:

    * ``flat``
    * ``conformal``: ``g = exp(2u) delta`` with ``u`` a sum of ``modes``
    * ``modes``: ``g = delta + sum amplitude cos(2 pi k.x + phase) tensor``
    * ``diagonal``: ``g = diag(1 + f_1, ..., 1 + f_n)``, ``f_i`` from ``modes[i]``
    """
    if not isinstance(spec, dict):
        return LatticeMetric(n, grid, np.asarray(spec, dtype=float), stencil_order)
    kind = spec.get("kind", "flat")
    eye = np.eye(n)
    shape = (grid,) * n
    x = grid_points(grid, n)
    if kind == "flat":
        g = np.broadcast_to(eye, shape + (n, n)).copy()
    elif kind == "conformal":
        u = np.zeros(shape)
        for m in spec.get("modes", []):
            u += _mode(m).value(x)
        g = np.exp(2 * u)[..., None, None] * eye
    elif kind == "modes":
        g = np.broadcast_to(eye, shape + (n, n)).copy()
        for m in spec.get("modes", []):
            m = _mode(m)
            if m.tensor is None:
                raise GeometryError("tensor modes require a 'tensor' entry")
            g += m.value(x)[..., None, None] * check_symmetric(m.tensor, "mode tensor")
    elif kind == "diagonal":
        g = np.broadcast_to(eye, shape + (n, n)).copy()
        for i, comp in enumerate(spec.get("modes", [])):
            for m in comp:
                g[..., i, i] += _mode(m).value(x)
    else:
        raise GeometryError(f"unknown metric kind {kind!r}")
    return LatticeMetric(n, grid, g, stencil_order, spec=spec)


def random_metric_spec(rng, n=3, n_modes=3, amplitude=0.05, kmax=1):
    """Random smooth perturbation of the flat metric by ``n_modes`` tensor modes."""
    modes = []
    for _ in range(n_modes):
        k = np.zeros(n, dtype=int)
        while not k.any():
            k = rng.integers(-kmax, kmax + 1, size=n)
        S = rng.normal(size=(n, n))
        S = S + S.T
        S /= np.linalg.norm(S, 2)
        modes.append({"k": k.tolist(), "amplitude": amplitude, "phase": float(rng.uniform(0, 2 * np.pi)),
                      "tensor": S.tolist()})
    return {"kind": "modes", "modes": modes}


class LatticeGeometry(FrameGeometry):
    """Finite-difference frame geometry of a :class:`LatticeMetric`."""

    def __init__(self, lattice: LatticeMetric, frame=None, metric=None):
        self.lattice = lattice
        self.n = lattice.n
        self.grid_shape = (lattice.grid,) * lattice.n
        self.metric = lattice.samples if metric is None else metric
        self.frame = orthonormal_frame(self.metric) if frame is None else frame
        self.spacing = 1.0 / lattice.grid
        self.stencil_order = lattice.stencil_order

    def _partial(self, f):
        f = np.asarray(f)
        parts = [periodic_derivative(f, mu, self.spacing, self.stencil_order) for mu in range(self.n)]
        return np.stack(parts, axis=self.n)

    @cached_property
    def christoffel(self):
        """Coordinate Christoffel symbols ``Gamma^l_{mu nu}``, shape ``grid + (l, mu, nu)``."""
        g = self.metric
        dg = self._partial(g)  # dg[..., s, m, v] = d_s g_mv
        first = 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)
        # first[..., s, m, v] = 1/2 (d_m g_sv + d_v g_sm - d_s g_mv)
        return np.einsum("...ls,...smv->...lmv", np.linalg.inv(g), first)

    def integrate(self, f):
        f = np.real(np.asarray(f))
        w = f * self.volume_density
        # pairwise summation keeps the result independent of evaluation order
        return float(np.sum(w.reshape(-1)) * self.spacing ** self.n)

    def with_metric(self, metric, frame):
        lat = LatticeMetric.__new__(LatticeMetric)
        lat.n, lat.grid, lat.samples, lat.stencil_order, lat.spec = (
            self.n, self.lattice.grid, metric, self.stencil_order, None)
        return LatticeGeometry(lat, frame=frame, metric=metric)

    def with_order(self, order: int):
        lat = LatticeMetric(self.n, self.lattice.grid, self.lattice.samples, order, self.lattice.spec)
        return LatticeGeometry(lat, frame=self.frame, metric=self.metric)

    @cached_property
    def points(self):
        return grid_points(self.lattice.grid, self.n)

    def __repr__(self):
        return f"LatticeGeometry(n={self.n}, grid={self.lattice.grid}, order={self.stencil_order})"


def orthonormal_frame(metric):
    """Frame field ``b_g = g^{-1/2}`` (principal branch) with ``b^T g b = I``."""
    return inv_sqrt_spd(metric)


def lattice_curvature(geom: LatticeGeometry):
    return geom.curvature, geom.christoffel


def integrate(f, geom):
    f = np.asarray(f)
    if f.shape != geom.grid_shape:
        raise GeometryError(f"field shape {f.shape} does not match grid {geom.grid_shape}")
    return geom.integrate(f)


def save_samples(lattice: LatticeMetric, path):
    """Raw export: ``path`` (float64 row-major, upper triangle per point) + ``path.json`` header."""
    path = Path(path)
    iu = np.triu_indices(lattice.n)
    lattice.samples[..., iu[0], iu[1]].astype("<f8").tofile(path)
    header = {"dims": [lattice.grid] * lattice.n, "n": lattice.n, "order": "row-major",
              "layout": "upper-triangle", "dtype": "float64-le", "stencil_order": lattice.stencil_order}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, indent=2))


def load_samples(path) -> LatticeMetric:
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n = header["n"]
    dims = tuple(header["dims"])
    iu = np.triu_indices(n)
    flat = np.fromfile(path, dtype="<f8").reshape(dims + (len(iu[0]),))
    g = np.zeros(dims + (n, n))
    g[..., iu[0], iu[1]] = flat
    g[..., iu[1], iu[0]] = flat
    return LatticeMetric(n, dims[0], g, header.get("stencil_order", 4))
