"""Two-qubit reduced states and Wootters concurrence.

The reduced state of a site pair is rebuilt from its Pauli correlators,

    rho = 1/4 [ I + sum_i a_i s_i x I + sum_j b_j I x s_j + sum_ij t_ij s_i x s_j ],

which is complete on two qubits. Single-site Bloch vectors are kept so the
reconstruction is valid for any state; along the quench they vanish by the
global spin-flip symmetry, and :func:`check_bloch_vanishes` verifies that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ReconstructionError

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
XYZ = ("x", "y", "z")
_YY = np.kron(PAULI["y"], PAULI["y"])

HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
NEGATIVITY_TOL = 1e-8
IMAG_TOL = 1e-9
# eigenvalues of rho below this are treated as exact zeros before factorizing
RANK_CUTOFF = 1e-14


@dataclass
class TwoQubitDensity:
    """4x4 density matrix of a site pair, ordered ``|00>, |01>, |10>, |11>``."""

    matrix: np.ndarray
    source: str = "partial-trace"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex).reshape(4, 4)

    def validate(self, exc=DomainError):
        m = self.matrix
        herm = np.abs(m - m.conj().T).max()
        if herm > HERMITIAN_TOL:
            raise exc(f"two-qubit state not Hermitian (deviation {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1) > TRACE_TOL:
            raise exc(f"two-qubit state has trace {tr!r}")
        lowest = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
        if lowest < -NEGATIVITY_TOL:
            raise exc(f"two-qubit state has negative eigenvalue {lowest:.3e}")
        return self


@dataclass
class CorrelatorSet:
    """Bloch vectors of both sites and the 3x3 correlation tensor ``<s_i s_j>``."""

    bloch_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bloch_b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tensor: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    imag_residue: float = 0.0

    def __post_init__(self):
        parts = [np.asarray(p, dtype=complex) for p in (self.bloch_a, self.bloch_b, self.tensor)]
        residue = max(float(np.abs(p.imag).max(initial=0.0)) for p in parts)
        if residue > IMAG_TOL:
            raise ReconstructionError(f"correlators carry imaginary part {residue:.3e}")
        self.imag_residue = max(self.imag_residue, residue)
        self.bloch_a = parts[0].real.reshape(3)
        self.bloch_b = parts[1].real.reshape(3)
        self.tensor = parts[2].real.reshape(3, 3)
        worst = max(np.abs(p.real).max() for p in parts)
        if worst > 1 + 1e-9:
            raise ReconstructionError(f"correlator magnitude {worst!r} exceeds 1")

    @classmethod
    def from_table(cls, table) -> "CorrelatorSet":
        """Build from a 4x4 table ``T[mu, nu] = <s_mu x s_nu>`` with index 0 the identity."""
        table = np.asarray(table, dtype=complex)
        return cls(table[1:, 0], table[0, 1:], table[1:, 1:])


def rdm_from_correlators(c: CorrelatorSet) -> TwoQubitDensity:
    rho = np.eye(4, dtype=complex)
    for i, a in enumerate(XYZ):
        rho += c.bloch_a[i] * np.kron(PAULI[a], PAULI["i"])
        rho += c.bloch_b[i] * np.kron(PAULI["i"], PAULI[a])
        for j, b in enumerate(XYZ):
            rho += c.tensor[i, j] * np.kron(PAULI[a], PAULI[b])
    return TwoQubitDensity(rho / 4, source="correlator-reconstruction").validate(ReconstructionError)


def correlators_from_rdm(rho: TwoQubitDensity | np.ndarray) -> CorrelatorSet:
    m = rho.matrix if isinstance(rho, TwoQubitDensity) else np.asarray(rho)
    table = np.empty((4, 4), dtype=complex)
    for mu, a in enumerate("ixyz"):
        for nu, b in enumerate("ixyz"):
            table[mu, nu] = np.trace(m @ np.kron(PAULI[a], PAULI[b]))
    return CorrelatorSet.from_table(table)


def concurrence(rho: TwoQubitDensity | np.ndarray) -> float:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    The ``l_k`` are the square roots of the eigenvalues of
    ``rho (sy x sy) rho* (sy x sy)``. With ``rho = F F^dagger`` they equal the
    singular values of the complex-symmetric matrix ``F^T (sy x sy) F``, which
    avoids square roots of round-off sized eigenvalues.
    """
    if not isinstance(rho, TwoQubitDensity):
        rho = TwoQubitDensity(rho)
    rho.validate()
    m = 0.5 * (rho.matrix + rho.matrix.conj().T)
    w, v = np.linalg.eigh(m)
    w = np.where(w < RANK_CUTOFF, 0.0, w)
    F = v * np.sqrt(w)
    lam = np.linalg.svd(F.T @ _YY @ F, compute_uv=False)
    c = lam[0] - lam[1:].sum()
    return float(min(max(c, 0.0), 1.0))


def pauli_from_spin(value, factors: int = 1):
    """Convert an expectation of ``factors`` spin operators to Pauli normalization."""
    return value * 2**factors


def check_bloch_vanishes(c: CorrelatorSet, tol: float = 1e-6) -> float:
    """Largest single-site Bloch component; raises DomainError above ``tol``."""
    worst = float(max(np.abs(c.bloch_a).max(), np.abs(c.bloch_b).max()))
    if worst > tol:
        raise DomainError(f"single-site Bloch component {worst:.3e} exceeds {tol:.1e}")
    return worst
