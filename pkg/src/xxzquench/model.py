"""Open XXZ chain: parameters, bond decomposition and dense assembly.

Conventions used throughout the package:

* spin operators are ``S = sigma / 2`` and ``hbar = 1``; times are in units of ``1/J``;
* sites are numbered ``1 .. N`` in every public interface;
* the local basis is ``|0> = spin up`` (``sigma_z |0> = +|0>``) and site 1 is the
  most significant factor of a computational basis index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError

SX = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
SZ = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Chain length and couplings for the pre- and post-quench Hamiltonians.

    ``J`` couples every bond before the quench; ``J1`` replaces it on the first
    bond afterwards. ``Delta`` is shared by all bonds.
    """

    N: int
    Delta: float = 1.0
    J1: float = 1.0
    J: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        problems = []
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            problems.append(f"N must be an integer, got {self.N!r}")
        elif self.N < 2:
            problems.append(f"N must be >= 2, got {self.N}")
        if self.J == 0:
            problems.append("J must be nonzero")
        for name in ("J", "Delta", "J1"):
            if not np.isfinite(getattr(self, name)):
                problems.append(f"{name} must be finite")
        if problems:
            raise ParameterError("; ".join(problems))

    def replace(self, **changes) -> "ModelParams":
        values = {"N": self.N, "Delta": self.Delta, "J1": self.J1, "J": self.J}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class BondTerm:
    """``coupling * (Sx Sx + Sy Sy + anisotropy * Sz Sz)`` on sites ``(left_site, left_site + 1)``."""

    left_site: int
    coupling: float
    anisotropy: float

    def matrix(self) -> np.ndarray:
        c, d = self.coupling, self.anisotropy
        return c * np.array(
            [
                [d / 4, 0, 0, 0],
                [0, -d / 4, 0.5, 0],
                [0, 0.5, -d / 4, 0],
                [0, 0, 0, d / 4],
            ],
            dtype=complex,
        )


@dataclass(frozen=True)
class LocalBond:
    """Arbitrary two-site operator on ``(left_site, left_site + 1)``.

    Not produced by the model builders; it exists so that symmetry checks and
    engines can be exercised on Hamiltonians outside the XXZ family.
    """

    left_site: int
    operator: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.asarray(self.operator, dtype=complex).reshape(4, 4)


def build_h0(params: ModelParams) -> list[BondTerm]:
    """Bond terms of the uniform open chain (pre-quench Hamiltonian)."""
    params.validate()
    return [BondTerm(i, float(params.J), float(params.Delta)) for i in range(1, params.N)]


def build_h1(params: ModelParams) -> list[BondTerm]:
    """Bond terms after the quench: the first bond carries ``J1`` instead of ``J``."""
    terms = build_h0(params)
    terms[0] = BondTerm(1, float(params.J1), float(params.Delta))
    return terms


def check_terms(terms, N: int) -> None:
    """Raise ParameterError unless every bond lies inside a chain of ``N`` sites."""
    if N < 2:
        raise ParameterError(f"N must be >= 2, got {N}")
    for term in terms:
        if not 1 <= term.left_site <= N - 1:
            raise ParameterError(f"bond {term.left_site} outside chain of {N} sites")


def site_operator(op: np.ndarray, site: int, N: int) -> sp.csr_matrix:
    """Sparse embedding of a single-site operator at 1-based ``site``."""
    left = sp.identity(2 ** (site - 1), format="csr", dtype=complex)
    right = sp.identity(2 ** (N - site), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def bond_operator(matrix: np.ndarray, left_site: int, N: int) -> sp.csr_matrix:
    left = sp.identity(2 ** (left_site - 1), format="csr", dtype=complex)
    right = sp.identity(2 ** (N - left_site - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(matrix)), right, format="csr")


def sparse_hamiltonian(terms, N: int) -> sp.csr_matrix:
    """Full ``2**N`` sparse matrix of a bond-term list."""
    check_terms(terms, N)
    H = sp.csr_matrix((2**N, 2**N), dtype=complex)
    for term in terms:
        H = H + bond_operator(term.matrix(), term.left_site, N)
    return H


def dense_hamiltonian(terms, N: int) -> np.ndarray:
    return sparse_hamiltonian(terms, N).toarray()


def total_sz(N: int) -> sp.csr_matrix:
    return reduce(lambda a, b: a + b, (site_operator(SZ, i, N) for i in range(1, N + 1)))


def spin_flip(N: int) -> sp.csr_matrix:
    """Global spin flip, the tensor product of ``sigma_x`` on every site."""
    sx = sp.csr_matrix(2 * SX)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [sx] * N)


def commutes_with_total_sz(terms, N: int, tol: float = 1e-10) -> bool:
    """True when the Hamiltonian conserves total magnetization.

    Chains up to ten sites are checked through the explicit commutator; larger
    chains are checked bond by bond, which is equivalent because every bond
    commutes with ``Sz_i + Sz_{i+1}`` exactly when the sum does.
    """
    check_terms(terms, N)
    if N <= 10:
        H = sparse_hamiltonian(terms, N)
        Sz = total_sz(N)
        comm = H @ Sz - Sz @ H
        return bool(abs(comm).max() <= tol) if comm.nnz else True
    pair_sz = np.kron(SZ, ID2) + np.kron(ID2, SZ)
    return all(
        np.abs(t.matrix() @ pair_sz - pair_sz @ t.matrix()).max() <= tol for t in terms
    )
