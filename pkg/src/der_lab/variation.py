"""First and second variations of the energy, checked against finite differences.

Two evaluations of the second variation are available:

* ``derived`` (default): the Hessian of ``E`` along ``(g + t h, psi_t + t phi)``
  with ``psi_t`` the Bourguignon-Gauduchon transport, written with
  ``DeltaL h = -(nabla^*nabla h + Ric o h + h o Ric - 2 R h)``, the
  cross term ``<(grad tr h + delta h) . psi - 2 D^h psi, phi>`` and the
  three-form term ``-1/8 sum h_ab (nabla_c h)_bd Q_acd`` where
  ``Q_acd = Re<e_a e_c e_d psi, psi>``.
* ``literal``: the closed-form display evaluated term by term, with the
  Lichnerowicz Laplacian ``nabla^*nabla h + Ric o h + h o Ric - 2 R h``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .clifford import norm2, re_inner, vector_mul
from .fd import DEFAULT_STEPS, richardson
from .functional import el_residuals, energy, energy_momentum
from .geometry import FrameGeometry, GeometryError, check_symmetric
from .spinors import covariant_derivative, dirac

FLOOR = 1e-12


class NotCritical(GeometryError):
    """The base point does not solve the Euler-Lagrange system to tolerance."""


class NotTransverse(GeometryError):
    pass


class BranchAmbiguity(ArithmeticError):
    pass


@dataclass
class VariationReport:
    name: str
    analytic: float
    fd: float
    steps: list
    rel_error: float
    order_estimate: float
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def _report(name, analytic, fd, ext, tol, floor=FLOOR, diff=None, **extra):
    scale = max(abs(analytic), floor)
    if diff is None:
        diff = abs(analytic - fd)
    rel = float(diff / scale)
    return VariationReport(name, float(analytic), float(fd), list(ext.steps) if ext else [],
                           rel, float(ext.order_estimate) if ext else float("nan"), tol,
                           bool(rel <= tol), extra)


@dataclass
class DeformationPair:
    h: np.ndarray
    phi: np.ndarray

    def __add__(self, other):
        return DeformationPair(self.h + other.h, self.phi + other.phi)

    def __sub__(self, other):
        return DeformationPair(self.h - other.h, self.phi - other.phi)

    def scale(self, s):
        return DeformationPair(s * self.h, s * self.phi)


# --------------------------------------------------------------- operators
def dh_operator(geom: FrameGeometry, h, psi, nabla=None):
    """``D^h psi = sum_ij h_ij e_i . nabla_{e_j} psi``."""
    h = geom.check_tensor(check_symmetric(h, "h"))
    if nabla is None:
        nabla = covariant_derivative(geom, psi)
    return np.einsum("...ij,iab,...jb->...a", h, geom.clifford.gamma, nabla)


def f_tensor(geom: FrameGeometry, psi, phi):
    """``F(X,Y) = 1/4 (<X.nabla_Y phi + Y.nabla_X phi, psi> + <X.nabla_Y psi + Y.nabla_X psi, phi>)``."""
    gam = geom.clifford.gamma
    np_, nf = covariant_derivative(geom, psi), covariant_derivative(geom, phi)
    A = re_inner(np.einsum("iab,...jb->...ija", gam, nf), psi[..., None, None, :])
    B = re_inner(np.einsum("iab,...jb->...ija", gam, np_), phi[..., None, None, :])
    S = A + B
    return 0.25 * (S + np.swapaxes(S, -1, -2))


def three_form(geom, psi):
    """``Q[a,c,d] = Re <e_a e_c e_d psi, psi>`` restricted to distinct indices (totally skew)."""
    gam = geom.clifford.gamma
    trip = np.einsum("aij,cjk,dkl->acdil", gam, gam, gam)
    Q = np.einsum("acdil,...l,...i->...acd", trip, psi, np.conj(psi)).real
    n = geom.n
    mask = np.ones((n, n, n))
    for a in range(n):
        mask[a, a, :] = mask[a, :, a] = mask[:, a, a] = 0
    return Q * mask


def _pair(a, b):
    return np.sum(a * b, axis=(-2, -1))


def _quick_energy(geom, psi, lam):
    return energy(geom, psi, lam).total


# ----------------------------------------------------------- first variation
def first_variation_check(geom: FrameGeometry, psi, h, which: str, tol: float = 1e-6,
                          steps=DEFAULT_STEPS, samples: int = 64) -> VariationReport:
    """Compare the first metric variation of one energy ingredient with finite differences.

    ``which``:

    * ``volume``: ``d/dt int dv_{g+th}`` against ``int 1/2 tr h dv``;
    * ``scalar``: ``d/dt R_{g+th}`` at sampled points against
      ``-Lap tr h + delta^2 h - <Ric, h>``;
    * ``dirac``: ``d/dt int Re<D_{g+th} psi_t, psi_t> dv_g`` (transported spinor,
      reference measure) against ``int <T, h> dv``. The ratio to the
      opposite-sign form ``-int <T, h> dv`` is kept in ``extra``.
    """
    h = geom.check_tensor(check_symmetric(h, "h"))
    psi = geom.check_spinor(psi) if psi is not None else None
    trh = np.trace(h, axis1=-2, axis2=-1)
    if which == "volume":
        analytic = geom.integrate(0.5 * trh)
        ext = richardson(lambda t: geom.deformed(h, t).integrate(np.ones(geom.grid_shape)), 1, steps)
        return _report("firstvar.volume", analytic, ext.value, ext, tol)
    if which == "scalar":
        if geom.grid_shape:
            lap = geom.laplacian(trh)
        else:
            lap = 0.0 * trh
        field_ = -lap + geom.double_divergence(h) - _pair(geom.curvature.Ric, h)
        idx = _sample_indices(geom, samples)
        ext = richardson(lambda t: np.ravel(geom.deformed(h, t).curvature.R)[idx], 1, steps)
        a = np.ravel(field_)[idx]
        diff = float(np.max(np.abs(a - ext.value)))
        return _report("firstvar.scalar", float(np.max(np.abs(a))), float(np.max(np.abs(ext.value))),
                       ext, tol, diff=diff, points=int(len(idx)))
    if which == "dirac":
        if psi is None:
            raise GeometryError("dirac case needs a spinor")
        T = energy_momentum(geom, psi)
        analytic = geom.integrate(_pair(T, h))
        # reference measure dv_g: the pointwise identity integrated over M
        ext = richardson(lambda t: geom.integrate(re_inner(dirac(geom.deformed(h, t), psi), psi)),
                         1, steps)
        ratio = ext.value / (-analytic) if abs(analytic) > FLOOR else float("nan")
        return _report("firstvar.dirac", analytic, ext.value, ext, tol, literal_sign_ratio=ratio)
    raise ValueError(f"unknown first-variation case {which!r}")


def _sample_indices(geom, samples):
    total = int(np.prod(geom.grid_shape)) if geom.grid_shape else 1
    if total <= samples:
        return np.arange(total)
    return np.linspace(0, total - 1, samples).round().astype(int)


def dirac_derivative_field(geom, h, psi):
    """``-1/2 D^h psi + 1/4 (grad tr h + delta h) . psi`` (metric derivative of ``D psi``)."""
    trh = np.trace(geom.check_tensor(h), axis1=-2, axis2=-1)
    grad = geom.cov(trh, 0) if geom.grid_shape else np.zeros(geom.grid_shape + (geom.n,))
    v = grad + geom.divergence_delta(h)
    return -0.5 * dh_operator(geom, h, psi) + 0.25 * vector_mul(geom.clifford, v, psi)


# ---------------------------------------------------------- second variation
def require_critical(geom, psi, lam, tol=None):
    if tol is None:
        tol = 1e-8 if not geom.grid_shape else 1e-4 * geom.stencil_order
    res = el_residuals(geom, psi, lam)
    worst = max(res.E1_sup, res.E2_sup)
    if worst > tol:
        raise NotCritical(f"base point is not critical: residual norms E1={res.E1_sup:.3e}, "
                          f"E2={res.E2_sup:.3e} exceed {tol:.1e}")
    return res


def _grad_tr(geom, h):
    trh = np.trace(h, axis1=-2, axis2=-1)
    if geom.grid_shape:
        return trh, geom.cov(trh, 0), geom.hessian(trh), geom.laplacian(trh)
    z = np.zeros(geom.n)
    return trh, z, np.zeros((geom.n, geom.n)), 0.0 * trh


def second_variation_integrand(geom: FrameGeometry, psi, lam, pair: DeformationPair,
                               mode: str = "general", convention: str = "derived"):
    """Pointwise integrand of the second variation; see the module docstring."""
    h = geom.check_tensor(check_symmetric(pair.h, "h"))
    phi = geom.check_spinor(np.asarray(pair.phi, dtype=complex))
    psi = geom.check_spinor(psi)
    cur = geom.curvature
    Ric, R = cur.Ric, cur.R
    T = energy_momentum(geom, psi)
    nab = covariant_derivative(geom, psi)
    trh, grad_tr, hess_tr, lap_tr = _grad_tr(geom, h)
    dh = geom.divergence_delta(h)
    h2 = _pair(h, h)
    Dhpsi = dh_operator(geom, h, psi, nab)
    hT = _pair(h @ T, h)
    E2phi = dirac(geom, phi) - lam * phi
    spin_quad = 2 * re_inner(E2phi, phi)
    lich_pos = geom.lichnerowicz(h)
    ddiv = geom.double_divergence(h)
    transverse = mode == "transverse"
    if mode not in ("general", "transverse"):
        raise ValueError("mode must be 'general' or 'transverse'")

    if convention == "derived":
        metric = 0.5 * _pair(-lich_pos + hess_tr, h)
        if not transverse:
            metric = metric + 0.5 * _pair(geom.sym_grad(dh), h)
        metric = metric + 0.5 * (-lap_tr + (0 if transverse else ddiv) - _pair(Ric, h)) * trh
        metric = metric + 0.5 * R * h2 + 0.5 * _pair(T, h) * trh + 0.5 * hT
        Q = three_form(geom, psi)
        metric = metric - 0.125 * np.einsum("...ab,...cbd,...acd->...", h, geom.cov(h, 2), Q)
        vec = grad_tr + (0 if transverse else dh)
        cross = re_inner(vector_mul(geom.clifford, vec, psi) - 2 * Dhpsi, phi)
        return metric + cross + spin_quad
    if convention == "literal":
        if transverse:
            out = 0.5 * _pair(lich_pos + hess_tr, h)
            out = out + 0.5 * (-lap_tr - _pair(Ric, h)) * trh + 0.5 * R * h2
            out = out + 0.5 * _pair(T, h) * trh + 0.5 * hT
            out = out + 0.5 * re_inner(vector_mul(geom.clifford, grad_tr, psi), phi)
            out = out + re_inner(dh_operator(geom, h, phi), psi)
            return out + spin_quad
        out = 0.5 * _pair(lich_pos + hess_tr + geom.sym_grad(dh), h)
        out = out + 0.5 * (-lap_tr + ddiv - _pair(Ric, h)) * trh + 0.5 * R * h2
        out = out - 0.25 * re_inner(Dhpsi, psi) * trh + 0.5 * hT
        v = -0.5 * Dhpsi + 0.25 * vector_mul(geom.clifford, grad_tr, psi) \
            - 0.25 * vector_mul(geom.clifford, dh, psi)
        out = out + 2 * re_inner(v, phi) + 2 * _pair(f_tensor(geom, phi, psi), h)
        return out + spin_quad
    raise ValueError("convention must be 'derived' or 'literal'")


def second_variation_form(geom: FrameGeometry, psi, lam, pair: DeformationPair,
                          mode: str = "general", convention: str = "derived",
                          crit_tol=None, transverse_tol=None) -> float:
    """Second variation of ``E`` at a critical pair, integrated over ``M``.

    Raises :class:`NotCritical` when the Euler-Lagrange residual exceeds the
    tolerance and :class:`NotTransverse` in transverse mode when ``|delta h|`` does.
    """
    require_critical(geom, psi, lam, crit_tol)
    if mode == "transverse":
        tt = transverse_tol if transverse_tol is not None else (
            1e-8 if not geom.grid_shape else 1e-4 * geom.stencil_order)
        dnorm = float(np.max(np.abs(geom.divergence_delta(geom.check_tensor(pair.h)))))
        if dnorm > tt:
            raise NotTransverse(f"|delta h| = {dnorm:.3e} exceeds {tt:.1e}")
    return geom.integrate(second_variation_integrand(geom, psi, lam, pair, mode, convention))


def second_variation_bilinear(geom, psi, lam, x: DeformationPair, y: DeformationPair, **kw):
    """Polarization ``B(x, y) = (Q(x + y) - Q(x - y)) / 4``."""
    return 0.25 * (second_variation_form(geom, psi, lam, x + y, **kw)
                   - second_variation_form(geom, psi, lam, x - y, **kw))


def energy_along(geom, psi, lam, pair: DeformationPair):
    """``t -> E(g + t h, psi + t phi)`` with BG-transported components."""
    h = geom.check_tensor(pair.h)
    phi = np.asarray(pair.phi, dtype=complex)

    def f(t):
        return _quick_energy(geom.deformed(h, t), psi + t * phi, lam)

    return f


def hessian_check(geom, psi, lam, pair: DeformationPair, tol=1e-5, mode="general",
                  convention="derived", steps=(3e-2, 1e-2, 3e-3, 1e-3), crit_tol=None):
    """Centered second difference of ``E`` along the pair against :func:`second_variation_form`."""
    analytic = second_variation_form(geom, psi, lam, pair, mode, convention, crit_tol=crit_tol)
    ext = richardson(energy_along(geom, psi, lam, pair), 2, steps)
    return _report(f"secondvar.{mode}.{convention}", analytic, ext.value, ext, tol)


# ------------------------------------------------------ horizontal deformations
def horizontal_residual(geom: FrameGeometry, psi, h, lam, laplacian: str = "rough",
                        crit_tol=None) -> dict:
    """Residual norms of the horizontal deformation system.

    ``laplacian`` selects the reading of ``Delta h``: ``rough`` is ``-nabla^*nabla h``,
    ``lichnerowicz`` is ``-(nabla^*nabla h + Ric o h + h o Ric - 2 R h)``. Both
    operator residuals are always reported; ``operator`` is the selected one.
    """
    require_critical(geom, psi, lam, crit_tol)
    h = geom.check_tensor(check_symmetric(h, "h"))
    cur = geom.curvature
    T = energy_momentum(geom, psi)
    delta = float(np.max(np.sqrt(np.sum(geom.divergence_delta(h) ** 2, axis=-1))))
    einstein_dot = float(np.max(np.abs(_pair(cur.Ric - 0.5 * cur.R[..., None, None] * geom.identity, h))))
    t_dot = float(np.max(np.abs(_pair(T, h))))
    Rh = cur.R[..., None, None] * h
    rough = -geom.rough_laplacian(h) + Rh + T @ h
    lich = -geom.lichnerowicz(h) + Rh + T @ h
    norm = lambda a: float(np.max(np.sqrt(np.sum(a**2, axis=(-2, -1)))))
    out = {
        "delta_h": delta,
        "einstein_pairing": einstein_dot,
        "T_pairing": t_dot,
        "operator_rough": norm(rough),
        "operator_lichnerowicz": norm(lich),
        "operator": norm(rough if laplacian == "rough" else lich),
        "laplacian": laplacian,
    }
    ric_dev = cur.Ric - (cur.R / geom.n)[..., None, None] * geom.identity
    if np.max(np.abs(ric_dev)) < 1e-10:
        out["trace_h"] = float(np.max(np.abs(np.trace(h, axis1=-2, axis2=-1))))
        out["ric_pairing"] = float(np.max(np.abs(_pair(cur.Ric, h))))
    return out


def left_invariant_basis(geom, psi):
    """Real basis of left-invariant pairs: symmetric unit tensors, then ``e_k`` and ``i e_k`` spinors."""
    n, N = geom.n, len(psi)
    zero_h, zero_p = np.zeros((n, n)), np.zeros(N, dtype=complex)
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(DeformationPair(E, zero_p))
    for k in range(N):
        for z in (1.0, 1j):
            p = zero_p.copy()
            p[k] = z
            out.append(DeformationPair(zero_h, p))
    return out


def hessian_kernel(geom: FrameGeometry, psi, lam, rtol: float = 1e-8, laplacian: str = "rough") -> dict:
    """Null directions of the second variation restricted to left-invariant pairs.

    The Gram matrix of the polarized form is diagonalized; eigenvectors with
    ``|w| <= rtol * max|w|`` are returned together with the horizontal residuals
    of their metric parts.
    """
    if geom.grid_shape:
        raise GeometryError("kernel extraction is available for Lie-group geometries only")
    basis = left_invariant_basis(geom, psi)
    B = np.array([[second_variation_bilinear(geom, psi, lam, x, y, mode="general") for y in basis]
                  for x in basis])
    asym = float(np.max(np.abs(B - B.T)))
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    null = np.flatnonzero(np.abs(w) <= rtol * np.max(np.abs(w)))
    kernel, residuals = [], []
    for k in null:
        h = sum(c * b.h for c, b in zip(V[:, k], basis))
        phi = sum(c * b.phi for c, b in zip(V[:, k], basis))
        kernel.append(DeformationPair(h, phi))
        residuals.append(horizontal_residual(geom, psi, h, lam, laplacian=laplacian))
    return {"eigenvalues": w.tolist(), "asymmetry": asym, "kernel": kernel, "residuals": residuals}


# ----------------------------------------------------- eigenvalue derivative
def dirac_matrix(geom):
    """Dirac operator on left-invariant spinors as an ``N x N`` matrix."""
    N = geom.clifford.N
    return np.stack([dirac(geom, e) for e in np.eye(N, dtype=complex)], axis=-1)


def eigenvalue_derivative_check(geom: FrameGeometry, h, branch: int = 0, tol: float = 1e-8,
                                steps=DEFAULT_STEPS, gap_tol: float = 1e-6) -> VariationReport:
    """Derivative of a Dirac eigenvalue along ``g + t h`` (left-invariant spinors).

    ``branch`` indexes the eigenvalues of ``D_g`` in ascending order. Inside a
    degenerate cluster the branches are ordered by their first-order splitting,
    obtained from the finite-difference derivative of the Dirac matrix
    compressed to the cluster. The reported ``analytic`` value is
    ``-1/2 int <T, h> dv`` for the branch eigenspinor normalized to unit L2 norm;
    ``extra`` carries ``fd / analytic`` and ``int <T, h> dv``; when ``h`` is a
    multiple ``c g`` it also carries the scaling-law value ``-c lam / 2``.
    """
    if geom.grid_shape:
        raise GeometryError("eigenvalue tracking is available for Lie-group geometries only")
    h = check_symmetric(h, "h")
    D0 = dirac_matrix(geom)
    w, V = np.linalg.eigh(0.5 * (D0 + D0.conj().T))
    if not 0 <= branch < len(w):
        raise ValueError(f"branch must be in [0, {len(w)})")
    lam0 = w[branch]
    cluster = np.flatnonzero(np.abs(w - lam0) < gap_tol)
    others = np.delete(w, cluster)
    ext = richardson(lambda t: _stack(dirac_matrix(geom.deformed(h, t))), 1, steps)
    dD = _unstack(ext.value, D0.shape)
    P = V[:, cluster]
    sub = P.conj().T @ dD @ P
    sub = 0.5 * (sub + sub.conj().T)
    mu, U = np.linalg.eigh(sub)
    k = int(np.searchsorted(cluster, branch))
    deriv = float(mu[k])
    psi = P @ U[:, k]
    # crossing check along the sampled path
    for t in (steps[0], -steps[0]):
        wt = np.linalg.eigvalsh(dirac_matrix(geom.deformed(h, t)))
        near = wt[np.argmin(np.abs(wt - (lam0 + t * deriv)))]
        if others.size and np.min(np.abs(others - near)) < abs(t * deriv) + gap_tol:
            raise BranchAmbiguity(f"eigenvalue {lam0:.6g} meets another branch along the path")
    psi = psi / np.sqrt(geom.integrate(norm2(psi)))
    tdot = geom.integrate(_pair(energy_momentum(geom, psi), h))
    literal = -0.5 * tdot
    extra = {}
    c = np.trace(np.linalg.solve(geom.metric, h)) / geom.n
    if np.allclose(h, c * geom.metric, atol=1e-14):
        # h = c g is the scaling direction: lam(g + t c g) = lam / sqrt(1 + t c)
        extra["scaling_expected"] = float(-0.5 * c * lam0)
        extra["scaling_residual"] = float(abs(deriv + 0.5 * c * lam0))
    # near-zero derivatives are compared on the scale of the eigenvalue
    rep = _report("eigenvalue_derivative", literal, deriv, ext, tol, floor=1e-3 * max(1.0, abs(lam0)),
                  eigenvalue=float(lam0), ratio_fd_over_literal=(deriv / literal if abs(literal) > FLOOR
                                                                 else float("nan")),
                  integral_T_h=float(tdot), cluster_size=int(len(cluster)), **extra)
    return rep


def _stack(M):
    return np.concatenate([M.real.ravel(), M.imag.ravel()])


def _unstack(v, shape):
    m = v.size // 2
    return (v[:m] + 1j * v[m:]).reshape(shape)
