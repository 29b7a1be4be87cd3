"""Verification suites. Each suite maps a :class:`SuiteConfig` to records and convergence tables."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clifford import build_clifford, hermitian_inner, norm2, vector_mul
from .lattice import FourierMode, LatticeGeometry, build_lattice_metric, random_metric_spec
from .liegroup import GROUPS, LieGroupGeometry
from .report import Table, bound, check, datum
from .solver import (killing_report, newton_critical, perturbed, quasi_killing_report, round_state,
                     scaling_check, traceless_basis)
from .functional import apriori_bounds
from .spinors import plane_wave, random_spinor_field, sl_residual
from .variation import (DeformationPair, eigenvalue_derivative_check, first_variation_check,
                        hessian_check, hessian_kernel, horizontal_residual, second_variation_bilinear,
                        second_variation_form)

SUITES = ("clifford", "curvature", "lichnerowicz", "firstvar", "secondvar", "critical", "examples",
          "scaling")
RANDOMIZED = {"lichnerowicz", "firstvar", "secondvar", "critical"}

DEFAULT_TOLERANCES = {
    "clifford": 1e-12,
    "curvature_exact": 1e-12,
    "curvature_order": 3.8,
    "sl_exact": 1e-10,
    "sl_order_slack": 0.2,
    "firstvar": 1e-6,
    "secondvar_reduced": 1e-10,
    "secondvar_hessian": 1e-5,
    "polarization": 1e-10,
    "kernel": 1e-8,
    "critical_residual": 1e-10,
    "critical_invariants": 1e-8,
    "examples": 1e-12,
    "killing": 1e-10,
    "scaling": 1e-10,
    "eigen_derivative": 1e-8,
}


@dataclass
class SuiteConfig:
    suite: str = "all"
    backend: str = "both"
    grids: tuple = (8, 16, 32)
    sl_grids: tuple = (16, 32, 64)
    grid: int = 16
    stencil_order: int = 4
    tolerances: dict = field(default_factory=dict)
    lam: float = 1.5
    K: float | None = None
    metric: dict | None = None
    deformation: dict | None = None
    samples: int = 20
    seed: int | None = None
    out_dir: Path = Path("der-lab-out")
    format: str = "json"
    concurrent: bool = False

    def tol(self, key):
        return self.tolerances.get(key, DEFAULT_TOLERANCES[key])

    def rng(self, stream: int):
        # independent streams per suite keep results stable when suites are reordered
        return np.random.default_rng([int(self.seed), stream])

    def lie(self):
        return self.backend in ("lie", "both")

    def lattice(self):
        return self.backend in ("lattice", "both")


# ----------------------------------------------------------------- clifford
def suite_clifford(cfg: SuiteConfig):
    tol = cfg.tol("clifford")
    recs = []
    for n in range(2, 7):
        alg = build_clifford(n)
        g, N = alg.gamma, alg.N
        eye = np.eye(N)
        anti = max(np.max(np.abs(g[i] @ g[j] + g[j] @ g[i] + 2 * (i == j) * eye))
                   for i in range(n) for j in range(n))
        herm = max(np.max(np.abs(g[i] + g[i].conj().T)) for i in range(n))
        # fixed, non-random probes
        X = np.cos(np.arange(1, n + 1))
        psi = np.exp(1j * np.arange(N)) * (1 + np.arange(N))
        phi = np.sin(np.arange(N) + 0.5) + 1j * np.cos(2 * np.arange(N))
        Xpsi = vector_mul(alg, X, psi)
        iso = abs(norm2(Xpsi) - X @ X * norm2(psi)) / (X @ X * norm2(psi))
        skew = abs(hermitian_inner(Xpsi, phi) + hermitian_inner(psi, vector_mul(alg, X, phi)))
        recs += [
            check(f"clifford.n{n}.anticommutator", "X.Y + Y.X = -2g(X,Y)", 0.0, anti, tol, floor=1.0),
            check(f"clifford.n{n}.antihermitian", "<X.psi, phi> = -<psi, X.phi>", 0.0, herm, tol, floor=1.0),
            check(f"clifford.n{n}.isometry", "|X.psi| = |X||psi|", 0.0, iso, tol, floor=1.0),
            check(f"clifford.n{n}.skew_adjoint", "<X.psi, phi> = -<psi, X.phi>", 0.0, skew, tol, floor=1.0),
        ]
        if n % 2:
            vol = np.linalg.multi_dot(list(g))
            recs.append(check(f"clifford.n{n}.volume_scalar", "e_1...e_n acts as a scalar", 0.0,
                              np.max(np.abs(vol - alg.volume * eye)), tol, floor=1.0,
                              volume=[alg.volume.real, alg.volume.imag]))
    return recs, []


# ---------------------------------------------------------------- curvature
def conformal_scalar_oracle(modes, x, n=3):
    """Closed-form ``R`` of ``exp(2u) delta``: ``exp(-2u)(-2(n-1) Lap u - (n-1)(n-2)|grad u|^2)``."""
    u, gu, lap = 0.0, 0.0, 0.0
    for m in modes:
        m = m if isinstance(m, FourierMode) else FourierMode(tuple(m["k"]), m["amplitude"], m.get("phase", 0.0))
        u = u + m.value(x)
        gu = gu + m.grad(x)
        lap = lap + np.trace(m.hess(x), axis1=-2, axis2=-1)
    return np.exp(-2 * u) * (-2 * (n - 1) * lap - (n - 1) * (n - 2) * np.sum(gu**2, axis=-1))


CONFORMAL_MODES = [{"k": [1, 0, 0], "amplitude": 0.05}]


def curvature_table(grids, modes=CONFORMAL_MODES, order=4):
    """RMS error of the lattice scalar curvature against the closed form, per grid."""
    spec = {"kind": "conformal", "modes": modes}
    errs = []
    for N in grids:
        geom = LatticeGeometry(build_lattice_metric(spec, N, stencil_order=order))
        d = geom.curvature.R - conformal_scalar_oracle(modes, geom.points)
        w = geom.volume_density
        errs.append(float(np.sqrt(np.sum(w * d**2) / np.sum(w))))
    return Table.fit("curvature_conformal", grids, errs)


def suite_curvature(cfg: SuiteConfig):
    tol = cfg.tol("curvature_exact")
    recs, tables = [], []
    if cfg.lie():
        g = LieGroupGeometry.named("su2")
        cur = g.curvature
        recs.append(check("curvature.su2.R", "R = 6 on the round su(2), c = 2 eps", 6.0, cur.R, tol))
        recs.append(check("curvature.su2.Ric", "Ric = 2 I", 0.0, np.max(np.abs(cur.Ric - 2 * np.eye(3))),
                          tol, floor=1.0))
        h = LieGroupGeometry.named("heisenberg")
        recs.append(check("curvature.heisenberg.Ric", "Ric = diag(-1/2, -1/2, 1/2)", 0.0,
                          np.max(np.abs(h.curvature.Ric - np.diag([-0.5, -0.5, 0.5]))), tol, floor=1.0))
    if cfg.lattice():
        t = curvature_table(cfg.grids, order=cfg.stencil_order)
        tables.append(t)
        need = cfg.tol("curvature_order")
        recs.append(order_record("curvature.lattice.conformal_order", "R of exp(2u) delta vs closed form",
                                 t, need))
    return recs, tables


def order_record(name, anchor, table, need):
    """Fitted-order record; passes when the order is at least ``need``."""
    r = check(name, anchor, need, table.fitted_order, 0.0, rel_error=max(0.0, need - table.fitted_order),
              grids=table.grids, errors=table.errors)
    return r


# -------------------------------------------------------------- lichnerowicz
def random_left_invariant(rng, group):
    A = rng.normal(size=(3, 3))
    G = A @ A.T + 0.5 * np.eye(3)
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    return LieGroupGeometry.named(group, G), psi


SL_MODES = [{"k": [1, 0, 0], "amplitude": 0.1}, {"k": [0, 1, 0], "amplitude": 0.05}]


def sl_table(grids, order=4):
    spec = {"kind": "conformal", "modes": SL_MODES}
    errs = []
    for N in grids:
        geom = LatticeGeometry(build_lattice_metric(spec, N, stencil_order=order))
        psi = (plane_wave(geom, [0, 0, 0], [1, 0.5j]) + plane_wave(geom, [1, 0, 0], [0.3, 0.2])
               + plane_wave(geom, [0, 1, 1], [0.1j, 0.3]))
        errs.append(float(np.max(np.sqrt(norm2(sl_residual(geom, psi))))))
    return Table.fit("lichnerowicz_lattice", grids, errs)


def suite_lichnerowicz(cfg: SuiteConfig):
    recs, tables = [], []
    if cfg.lie():
        rng = cfg.rng(3)
        groups = sorted(GROUPS)
        worst = 0.0
        for i in range(cfg.samples):
            g, psi = random_left_invariant(rng, groups[i % len(groups)])
            r = float(np.sqrt(np.max(norm2(sl_residual(g, psi)))) / max(1.0, np.sqrt(norm2(psi))))
            worst = max(worst, r)
        recs.append(check("lichnerowicz.lie.random", "D^2 = nabla^*nabla + R/4", 0.0, worst,
                          cfg.tol("sl_exact"), floor=1.0, samples=cfg.samples, groups=groups))
    if cfg.lattice():
        t = sl_table(cfg.sl_grids, cfg.stencil_order)
        tables.append(t)
        need = cfg.stencil_order - cfg.tol("sl_order_slack")
        recs.append(order_record("lichnerowicz.lattice.order", "D^2 = nabla^*nabla + R/4", t, need))
    return recs, tables


# ----------------------------------------------------------------- firstvar
FV_ANCHORS = {"volume": "1/2 <g,h> dv_g", "scalar": "-Lap tr(h) + delta^2(h) - <Ric,h>",
              "dirac": "-<T^{g,psi},h>"}


def _vrec(rep, anchor, **extra):
    d = dict(rep.extra)
    d.update(extra)
    d.update(steps=rep.steps, order_estimate=rep.order_estimate)
    return check(rep.name, anchor, rep.analytic, rep.fd, rep.tolerance, rel_error=rep.rel_error, **d)


def lattice_firstvar_data(cfg: SuiteConfig, grid=None):
    rng = cfg.rng(4)
    N = grid or cfg.grid
    spec = cfg.metric or random_metric_spec(rng)
    geom = LatticeGeometry(build_lattice_metric(spec, N, stencil_order=cfg.stencil_order))
    psi = random_spinor_field(geom, rng)
    hspec = cfg.deformation or random_metric_spec(rng, amplitude=0.3)
    # constant trace part: zero-mean modes alone make the volume variation vanish identically
    h = build_lattice_metric(hspec, N).samples - 0.8 * np.eye(3)
    return geom, psi, h


def suite_firstvar(cfg: SuiteConfig):
    tol = cfg.tol("firstvar")
    recs = []
    if cfg.lie():
        rng = cfg.rng(5)
        for group in sorted(GROUPS):
            g, psi = random_left_invariant(rng, group)
            h = rng.normal(size=(3, 3))
            h = h + h.T
            for which in ("volume", "scalar", "dirac"):
                rep = first_variation_check(g, psi, h, which, tol)
                rep.name = f"{rep.name}.lie.{group}"
                recs.append(_vrec(rep, FV_ANCHORS[which]))
    if cfg.lattice():
        flat = LatticeGeometry(build_lattice_metric({"kind": "flat"}, 8))
        rep = first_variation_check(flat, None, np.broadcast_to(np.eye(3), flat.grid_shape + (3, 3)).copy(),
                                    "volume", 1e-10)
        recs.append(_vrec(rep, FV_ANCHORS["volume"]))
        recs[-1].name = "firstvar.volume.flat_identity"
        geom, psi, h = lattice_firstvar_data(cfg)
        for which in ("volume", "scalar", "dirac"):
            rep = first_variation_check(geom, psi, h, which, tol)
            rep.name = f"{rep.name}.lattice{cfg.grid}"
            recs.append(_vrec(rep, FV_ANCHORS[which], grid=cfg.grid, stencil_order=cfg.stencil_order))
    return recs, []


# ---------------------------------------------------------------- secondvar
def round_pair(lam=1.5):
    return newton_critical(GROUPS["su2"](), lam, round_state(lam))


def flat_hessian_records(cfg: SuiteConfig, grid=None, count=None, steps=(3e-2, 1e-2)):
    N = grid or cfg.grid
    count = count or cfg.samples
    rng = cfg.rng(6)
    geom = LatticeGeometry(build_lattice_metric({"kind": "flat"}, N, stencil_order=cfg.stencil_order))
    psi = np.broadcast_to(np.array([1.0, 0.5j]), geom.grid_shape + (2,)).copy()
    worst, reps = 0.0, []
    for _ in range(count):
        h = build_lattice_metric(random_metric_spec(rng, amplitude=0.3), N).samples - np.eye(3)
        phi = random_spinor_field(geom, rng)
        rep = hessian_check(geom, psi, 0.0, DeformationPair(h, phi), cfg.tol("secondvar_hessian"), steps=steps)
        reps.append(rep)
        worst = max(worst, rep.rel_error)
    return check("secondvar.general.flat_hessian", "Hessian of E at (flat, parallel psi, lam = 0)", 0.0, worst,
                 cfg.tol("secondvar_hessian"), floor=1.0, pairs=count, grid=N,
                 rel_errors=[r.rel_error for r in reps])


def reduced_coefficient_records(cfg: SuiteConfig):
    cp = round_pair(1.5)
    rep = killing_report(cp, cfg.tol("killing"))
    target = rep["reduced_coefficient_target"]
    worst = max(abs(c - target) for c in rep["reduced_coefficient_derived"])
    return [
        check("secondvar.transverse.round_reduced_coefficient", "(3n-2)/(4n) R|h|^2", target,
              float(np.mean(rep["reduced_coefficient_derived"])), cfg.tol("secondvar_reduced"),
              rel_error=worst / target, per_basis_element=rep["reduced_coefficient_derived"]),
        datum("secondvar.transverse.round_coefficient_literal_formula", "(3n-2)/(4n) R|h|^2",
              float(np.mean(rep["reduced_coefficient_literal_formula"])),
              per_basis_element=rep["reduced_coefficient_literal_formula"]),
    ]


def suite_secondvar(cfg: SuiteConfig):
    recs = []
    if cfg.lie():
        recs += reduced_coefficient_records(cfg)
        cp = round_pair(1.5)
        g, psi = cp.geometry, cp.state.psi
        rng = cfg.rng(7)
        worst_fd = worst_sym = 0.0
        for _ in range(4):
            pairs = []
            for _ in range(2):
                h = rng.normal(size=(3, 3))
                pairs.append(DeformationPair(h + h.T, rng.normal(size=2) + 1j * rng.normal(size=2)))
            x, y = pairs
            worst_fd = max(worst_fd, hessian_check(g, psi, 1.5, x).rel_error)
            bxy = second_variation_bilinear(g, psi, 1.5, x, y)
            byx = second_variation_bilinear(g, psi, 1.5, y, x)
            worst_sym = max(worst_sym, abs(bxy - byx) / max(1.0, abs(bxy)))
        recs.append(check("secondvar.general.round_hessian", "Hessian of E at the round critical pair", 0.0,
                          worst_fd, cfg.tol("secondvar_hessian"), floor=1.0))
        recs.append(check("secondvar.polarization_symmetry", "B(x,y) = B(y,x)", 0.0, worst_sym,
                          cfg.tol("polarization"), floor=1.0))
        ker = hessian_kernel(g, psi, 1.5)
        worst = 0.0
        for res in ker["residuals"]:
            worst = max(worst, res["delta_h"], res["einstein_pairing"], res["T_pairing"], res["operator"])
        recs.append(check("secondvar.kernel_horizontal", "delta h = 0, <T,h> = 0, Delta h + R h + T x h = 0",
                          0.0, worst, cfg.tol("kernel"), floor=1.0, kernel_dim=len(ker["kernel"]),
                          eigenvalues=ker["eigenvalues"],
                          kernel_metric_norms=[float(np.linalg.norm(k.h)) for k in ker["kernel"]]))
        conf = horizontal_residual(g, psi, 0.3 * np.eye(3), 1.5)
        p2 = float(norm2(psi))
        recs.append(datum("secondvar.conformal_not_horizontal", "conformal variations are not horizontal",
                          conf["T_pairing"], u=0.3, u_lambda_psi2=0.3 * 1.5 * p2))
    if cfg.lattice():
        recs.append(flat_hessian_records(cfg))
    return recs, []


# ----------------------------------------------------------------- critical
def critical_records(cfg: SuiteConfig, lam=None):
    lam = cfg.lam if lam is None else lam
    n = 3
    t0 = time.perf_counter()
    cp = newton_critical(GROUPS["su2"](), lam, perturbed(round_state(lam), cfg.rng(8)))
    elapsed = time.perf_counter() - t0
    inv = cp.invariant_report
    tol = cfg.tol("critical_invariants")
    mu = lam / n
    anchor = "R = 4n(n-1) mu^2, |psi|^2 = 4(n-1)(n-2) mu, lam = n mu"
    recs = [
        check("critical.residual", "Ric - R/2 g = T, D psi = lam psi", 0.0, max(cp.residual_norms),
              cfg.tol("critical_residual"), floor=1.0, iterations=cp.iterations),
        check("critical.R", anchor, 4 * n * (n - 1) * mu**2, inv["R"], tol),
        check("critical.psi_norm2", anchor, 4 * (n - 1) * (n - 2) * mu, inv["psi_norm2"], tol),
        check("critical.abs_mu", anchor, mu, inv["abs_mu"], tol),
        check("critical.lambda_over_abs_mu", anchor, float(n), lam / inv["abs_mu"], tol),
    ]
    b = apriori_bounds(cp.geometry, cp.state.psi, lam, cfg.K)
    recs.append(bound("critical.bound_psi", "|psi|^2 <= 4(n-2) lam", inv["psi_norm2"], 4 * (n - 2) * lam, 1e-10))
    recs.append(bound("critical.bound_R", "R <= 4 lam^2", inv["R"], 4 * lam**2, 1e-10))
    if b.K_ok is not None:
        recs.append(check("critical.bound_K", "-Lap R >= -K R", 0.0, max(0.0, -b.K_min), 0.0, floor=1.0))
    recs.append(check("critical.trace_identity", "R = lam |psi|^2 / (n-2)", 0.0,
                      abs(inv["trace_identity"]), cfg.tol("critical_residual"), floor=1.0))
    # doubling lam rescales G by 1/4
    cp2 = newton_critical(GROUPS["su2"](), 2 * lam, perturbed(round_state(2 * lam), cfg.rng(9)))
    ratio = cp2.state.G @ np.linalg.inv(cp.state.G)
    recs.append(check("critical.scaling_G", "lam -> lam / sqrt(r) under g -> r g", 0.0,
                      np.max(np.abs(ratio - 0.25 * np.eye(3))), tol, floor=1.0))
    return recs, cp, elapsed


def suite_critical(cfg: SuiteConfig):
    recs, _, _ = critical_records(cfg)
    return recs, []


# ----------------------------------------------------------------- examples
def killing_records(cfg):
    cp = round_pair(1.5)
    rep = killing_report(cp, cfg.tol("killing"))
    tol = cfg.tol("killing")
    anchor = "nabla_X psi = -mu X.psi"
    recs = [check("examples.killing.fit", anchor, 0.0, rep["killing_fit_residual"], tol, floor=1.0)]
    for key in ("lambda_eq_n_mu", "T_eq_minus_half_mu_psi2_g", "psi2_eq_4(n-1)(n-2)mu", "R_eq_4n(n-1)mu2",
                "R_eq_n_mu_psi2_over_(n-2)"):
        recs.append(check(f"examples.killing.{key}", anchor, 0.0, rep[key], tol, floor=1.0))
    recs.append(datum("examples.killing.T_eq_plus_half_mu_psi2_g", "T = 1/2 mu |psi|^2 g",
                      rep["T_eq_plus_half_mu_psi2_g"]))
    return recs


def quasi_killing_records(cfg, ms=(2, 3, 4)):
    tol = cfg.tol("examples")
    recs = []
    for m in ms:
        rep = quasi_killing_report(m, -1)
        other = quasi_killing_report(m, +1)
        base = f"examples.quasi_killing.m{m}"
        recs += [
            check(f"{base}.eigenvalue", "lam = -(2m+1)a - b", 0.0, rep["dirac_eigen_residual"], tol, floor=1.0,
                  a=rep["a"], b=rep["b"], lam=rep["lambda_formula"]),
            check(f"{base}.T", "T = -2g + (2m^2-m-2)/(m-1) eta x eta", 0.0, rep["T_literal_residual"], tol,
                  floor=1.0),
            check(f"{base}.R", "R = 2m/(m-1)", rep["R_literal"], rep["R_from_metric_equation"], tol,
                  rel_error=rep["R_residual"] / rep["R_literal"]),
            datum(f"{base}.coefficient_adjudication", "2m^2-m-1 vs 2m^2-m-2", rep["Dh_psi_coefficient"],
                  candidates=rep["coefficient_candidates"], supported=rep["supported_numerator"],
                  hTh_computed=rep["hT_h_computed"], hTh_candidates=rep["hT_h_literal"],
                  hTh_supported=rep["hT_h_supported"], reduced_h2_coefficient=rep["reduced_h2_coefficient"],
                  reduced_h2_coefficient_literal=rep["reduced_h2_coefficient_literal"]),
            datum(f"{base}.opposite_branch", "a = +1/2", other["T_literal_residual"],
                  a=other["a"], b=other["b"], lam=other["lambda_formula"], R_residual=other["R_residual"]),
        ]
    return recs


def suite_examples(cfg: SuiteConfig):
    return killing_records(cfg) + quasi_killing_records(cfg), []


# ------------------------------------------------------------------ scaling
def scaling_records(cfg: SuiteConfig, r=4.0):
    cp = round_pair(cfg.lam)
    rep = scaling_check(cp, r, cfg.tol("scaling"))
    tol = cfg.tol("scaling")
    return [
        check("scaling.dirac_eigenvalue", "D psi = (lam / sqrt(r)) psi", rep["eigenvalue_expected"],
              rep["eigenvalue"], tol, r=r),
        check("scaling.metric_equation_sqrt_r", "Ric - R/2 g = sqrt(r) T", 0.0, rep["metric_sqrt_r_residual"],
              tol, floor=1.0, r=r),
        datum("scaling.metric_equation_exponent", "Ric - R/2 g = r^p T", rep["metric_exponent"],
              inverse_sqrt_residual=rep["metric_inv_sqrt_r_residual"]),
    ]


def eigen_derivative_records(cfg: SuiteConfig):
    cp = round_pair(cfg.lam)
    g = cp.geometry
    rep = eigenvalue_derivative_check(g, g.metric.copy(), tol=cfg.tol("eigen_derivative"))
    lam = rep.extra["eigenvalue"]
    recs = [
        check("eigen_derivative.scaling", "d lam / dt = -lam/2 along h = g", -lam / 2, rep.fd,
              cfg.tol("eigen_derivative"), steps=rep.steps),
        datum("eigen_derivative.ratio_vs_formula", "-1/2 int <T, h> dv", rep.extra["ratio_fd_over_literal"],
              formula=rep.analytic, fd=rep.fd, integral_T_h=rep.extra["integral_T_h"]),
    ]
    for k, h in enumerate(traceless_basis(3)[:2]):
        r2 = eigenvalue_derivative_check(g, h)
        recs.append(datum(f"eigen_derivative.traceless{k}", "-1/2 int <T, h> dv", r2.fd, formula=r2.analytic))
    return recs


def suite_scaling(cfg: SuiteConfig):
    return scaling_records(cfg) + eigen_derivative_records(cfg), []


RUNNERS = {
    "clifford": suite_clifford,
    "curvature": suite_curvature,
    "lichnerowicz": suite_lichnerowicz,
    "firstvar": suite_firstvar,
    "secondvar": suite_secondvar,
    "critical": suite_critical,
    "examples": suite_examples,
    "scaling": suite_scaling,
}
