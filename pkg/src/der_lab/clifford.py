"""Complex Clifford modules with anti-hermitian generators (e_i . e_i = -1)."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

MIN_DIM = 2
MAX_DIM = 6

_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class CliffordAlgebra:
    """Generators ``gamma[i]`` acting on ``C^N`` with ``N = 2**(n // 2)``.

    ``volume`` is the scalar ``w`` with ``gamma[0] @ ... @ gamma[n-1] = w * I`` in
    odd dimension (``None`` when ``n`` is even).
    """

    n: int
    gamma: np.ndarray
    volume: complex | None = None
    pairs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.gamma.setflags(write=False)
        # pairs[i, j] = gamma_i gamma_j
        pairs = np.einsum("iab,jbc->ijac", self.gamma, self.gamma)
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    @property
    def N(self) -> int:
        return self.gamma.shape[-1]


def _hermitian_generators(n: int) -> list[np.ndarray]:
    gam = [_S1, _S2]
    d = 2
    while d + 2 <= n:
        m = gam[0].shape[0]
        eye = np.eye(m, dtype=complex)
        gam = [np.kron(_S1, g) for g in gam] + [np.kron(_S2, eye), np.kron(_S3, eye)]
        d += 2
    return gam


def build_clifford(n: int) -> CliffordAlgebra:
    """Deterministic irreducible representation in dimension ``n``.

    Even ``n`` uses the tensor-product tower on Pauli matrices; odd ``n`` appends
    the (scaled) product of the first ``n - 1`` generators, with the sign chosen
    so that the volume element is ``+I`` for ``n = 3`` and ``+iI`` for ``n = 5``.
    """
    if not isinstance(n, (int, np.integer)) or not MIN_DIM <= n <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [{MIN_DIM}, {MAX_DIM}], got {n!r}")
    return clifford_module(int(n))


def clifford_module(n: int) -> CliffordAlgebra:
    """Same construction without the dimension cap (pointwise algebra in odd ``n > 6``)."""
    if n < MIN_DIM:
        raise ValueError(f"dimension must be >= {MIN_DIM}")
    herm = _hermitian_generators(n - 1 if n % 2 else n)
    volume = None
    if n % 2:
        p = (n - 1) // 2
        last = (1j) ** p * np.linalg.multi_dot(herm) if len(herm) > 1 else herm[0]
        herm = herm + [last]
    gamma = np.array([1j * g for g in herm])
    if n % 2:
        vol = np.linalg.multi_dot(list(gamma))
        w = vol[0, 0]
        target = 1.0 if n % 4 == 3 else 1j
        if not np.isclose(w, target):
            gamma[-1] = -gamma[-1]
            w = -w
        volume = complex(np.round(w.real) + 1j * np.round(w.imag))
    return CliffordAlgebra(n=n, gamma=gamma, volume=volume)


def vector_mul(alg: CliffordAlgebra, X, psi):
    """``X . psi`` for frame components ``X[..., i]`` and ``psi[..., a]``."""
    return np.einsum("...i,iab,...b->...a", X, alg.gamma, psi)


def _check_antisymmetric(form, p):
    axes = list(range(form.ndim - p, form.ndim))
    for a, b in combinations(axes, 2):
        perm = list(range(form.ndim))
        perm[a], perm[b] = perm[b], perm[a]
        if not np.allclose(form, -np.transpose(form, perm), atol=1e-12, rtol=0):
            raise ValueError("form is not antisymmetric")


def clifford_mul(alg: CliffordAlgebra, form, psi):
    """Clifford action of an antisymmetric ``p``-tensor (p = 1, 2, 3) on ``psi``.

    The rank is inferred from the trailing axes of ``form`` against the field
    axes of ``psi``; for p = 2 the action is ``sum_{i<j} w_ij e_i e_j psi``.
    """
    form = np.asarray(form)
    psi = np.asarray(psi)
    if psi.shape[-1] != alg.N:
        raise ValueError(f"spinor dimension {psi.shape[-1]} != {alg.N}")
    p = form.ndim - (psi.ndim - 1)
    if p not in (1, 2, 3) or any(s != alg.n for s in form.shape[form.ndim - p:]):
        raise ValueError(f"expected an antisymmetric p-form (p in 1..3) over dimension {alg.n}")
    if p == 1:
        return vector_mul(alg, form, psi)
    _check_antisymmetric(form, p)
    if p == 2:
        # sum over i<j equals half the full antisymmetric sum
        return 0.5 * np.einsum("...ij,ijab,...b->...a", form, alg.pairs, psi)
    triples = np.einsum("ijab,kbc->ijkac", alg.pairs, alg.gamma)
    return np.einsum("...ijk,ijkab,...b->...a", form, triples, psi) / 6.0


def hermitian_inner(psi, phi):
    """Pointwise hermitian product ``(psi, phi)``, linear in ``psi``."""
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape[-1] != phi.shape[-1]:
        raise ValueError(f"spinor dimensions differ: {psi.shape[-1]} vs {phi.shape[-1]}")
    return np.sum(psi * np.conj(phi), axis=-1)


def re_inner(psi, phi):
    return hermitian_inner(psi, phi).real


def norm2(psi):
    return re_inner(psi, psi)


def spin_lift(alg: CliffordAlgebra, rotation) -> np.ndarray:
    """Spin element covering ``rotation`` (principal logarithm branch).

    With ``A = log(rotation)`` the lift is ``exp(1/4 sum A_ij e_i e_j)`` and it
    satisfies ``S (R^T X) . S^-1 = X`` componentwise, i.e. it implements the
    frame change ``e' = e R`` on spinor components.
    """
    from scipy.linalg import expm, logm

    R = np.asarray(rotation, dtype=float)
    A = np.real(logm(R))
    A = 0.5 * (A - A.T)
    gen = 0.25 * np.einsum("ij,ijab->ab", A, alg.pairs)
    return expm(gen)
