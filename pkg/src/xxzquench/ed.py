"""Exact reference engine for short chains.

States live either in one fixed-magnetization sector or in the full ``2**N``
space. Basis states are integers whose most significant bit is site 1 and
whose set bits are down spins (``|1>``), so ``|0...0>`` is the all-up state.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, NumericalError, ParameterError
from .model import check_terms
from .observables import PAULI, TwoQubitDensity

STATE_CAP = 14
DENSITY_CAP = 10
SPECTRAL_MAX_DIM = 4096
KRYLOV_TOL = 1e-10
DEGENERACY_TOL = 1e-8


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ascending list of basis states sharing total ``Sz = sz_twice / 2``.

    ``sz_twice`` is ``None`` for the unrestricted ``2**N`` space.
    """

    N: int
    sz_twice: int | None
    states: np.ndarray

    @classmethod
    def sector(cls, N: int, sz_twice: int) -> "SectorBasis":
        if (N - sz_twice) % 2 or abs(sz_twice) > N:
            raise ParameterError(f"no sector with 2*Sz={sz_twice} for N={N}")
        n_down = (N - sz_twice) // 2
        everything = np.arange(2**N, dtype=np.int64)
        states = everything[_popcount(everything) == n_down]
        assert len(states) == comb(N, n_down)
        return cls(N, sz_twice, states)

    @classmethod
    def full(cls, N: int) -> "SectorBasis":
        return cls(N, None, np.arange(2**N, dtype=np.int64))

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, states: np.ndarray) -> np.ndarray:
        """Positions of ``states`` in the basis; -1 where absent."""
        pos = np.searchsorted(self.states, states)
        pos = np.minimum(pos, self.dim - 1)
        return np.where(self.states[pos] == states, pos, -1)

    def sz_of(self, states=None) -> np.ndarray:
        states = self.states if states is None else states
        return 0.5 * (self.N - 2 * _popcount(states))


@dataclass
class PureState:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ParameterError("amplitude vector does not match basis dimension")

    @property
    def N(self) -> int:
        return self.basis.N

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def full_vector(self) -> np.ndarray:
        if self.basis.sz_twice is None:
            return self.amplitudes.copy()
        out = np.zeros(2**self.N, dtype=complex)
        out[self.basis.states] = self.amplitudes
        return out

    @classmethod
    def from_full(cls, vector, N: int) -> "PureState":
        return cls(SectorBasis.full(N), np.asarray(vector, dtype=complex))


@dataclass
class DensityOperator:
    """Density matrix on the full ``2**N`` space."""

    N: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (2**self.N, 2**self.N):
            raise ParameterError("density matrix shape does not match N")

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityOperator":
        v = state.full_vector()
        return cls(state.N, np.outer(v, v.conj()))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


def _check_cap(N: int, cap: int, what: str):
    if N > cap:
        raise CapacityError(f"{what} limited to N <= {cap}, got N={N}")


def sector_hamiltonian(terms, basis: SectorBasis) -> sp.csr_matrix:
    """Sparse matrix of a bond-term list restricted to ``basis``.

    Raises ParameterError when a term connects the sector to states outside it.
    """
    N = basis.N
    check_terms(terms, N)
    rows, cols, vals = [], [], []
    states = basis.states
    src_idx = np.arange(basis.dim)
    for term in terms:
        m = term.matrix()
        shift = N - term.left_site - 1
        local = (states >> shift) & 3
        cleared = states & ~(3 << shift)
        for new in range(4):
            for old in range(4):
                amp = m[new, old]
                if amp == 0:
                    continue
                sel = local == old
                if not np.any(sel):
                    continue
                targets = basis.index(cleared[sel] | (new << shift))
                if np.any(targets < 0):
                    raise ParameterError(
                        f"bond {term.left_site} does not conserve total Sz; use the full basis"
                    )
                rows.append(targets)
                cols.append(src_idx[sel])
                vals.append(np.full(targets.shape, amp))
    if not rows:
        return sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
        dtype=complex,
    )
    herm = abs(H - H.conj().T).max() if H.nnz else 0.0
    if herm > 1e-12:
        raise NumericalError(f"assembled Hamiltonian is not Hermitian ({herm:.3e})")
    return H


def _fix_phase(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size:
        v = v * (abs(v[nz[0]]) / v[nz[0]])
    return v


def _lowest(H: sp.csr_matrix, count: int = 2):
    dim = H.shape[0]
    if dim <= SPECTRAL_MAX_DIM:
        w, v = la.eigh(H.toarray())
        return w, v
    k = min(count + 4, dim - 2)
    w, v = spla.eigsh(H, k=k, which="SA", tol=1e-14)
    order = np.argsort(w)
    return w[order], v[:, order]


def _canonical_ground_vector(w, v) -> np.ndarray:
    """Deterministic representative of the lowest eigenspace.

    For a degenerate level the representative is the normalized projection of
    the first basis state with weight in that eigenspace.
    """
    deg = int(np.sum(w - w[0] <= DEGENERACY_TOL))
    if deg == 1:
        return _fix_phase(v[:, 0].astype(complex))
    sub = v[:, :deg].astype(complex)
    weight = np.sum(np.abs(sub) ** 2, axis=1)
    first = int(np.flatnonzero(weight > 1e-12)[0])
    vec = sub @ sub[first].conj()
    vec /= np.linalg.norm(vec)
    return _fix_phase(vec)


def sector_ground_energies(terms, N: int, cap: int = STATE_CAP) -> dict[int, float]:
    """Lowest energy in every magnetization sector, keyed by ``2*Sz``."""
    _check_cap(N, cap, "exact ground-state search")
    out = {}
    for sz_twice in range(-N, N + 1, 2):
        basis = SectorBasis.sector(N, sz_twice)
        w, _ = _lowest(sector_hamiltonian(terms, basis), 1)
        out[sz_twice] = float(w[0])
    return out


def ground_state(terms, N: int, cap: int = STATE_CAP, sz_twice: int | None = None):
    """Lowest eigenstate over all magnetization sectors, returned as ``(state, energy)``.

    When several sectors tie within 1e-8 (ferromagnetic side) the one with the
    smallest ``|Sz|`` wins, non-negative ``Sz`` first. Pass ``sz_twice`` to
    restrict the search to a single sector.
    """
    _check_cap(N, cap, "exact ground-state search")
    if sz_twice is None:
        energies = sector_ground_energies(terms, N, cap)
        e_min = min(energies.values())
        tied = [s for s, e in energies.items() if e - e_min <= DEGENERACY_TOL]
        sz_twice = min(tied, key=lambda s: (abs(s), -s))
    basis = SectorBasis.sector(N, sz_twice)
    w, v = _lowest(sector_hamiltonian(terms, basis))
    return PureState(basis, _canonical_ground_vector(w, v)), float(w[0])


def is_ground_degenerate(terms, N: int, cap: int = STATE_CAP) -> bool:
    """True when the lowest level is degenerate across or within sectors."""
    energies = sector_ground_energies(terms, N, cap)
    e_min = min(energies.values())
    if sum(e - e_min <= DEGENERACY_TOL for e in energies.values()) > 1:
        return True
    best = min(energies, key=lambda s: (energies[s], abs(s)))
    w, _ = _lowest(sector_hamiltonian(terms, SectorBasis.sector(N, best)))
    return len(w) > 1 and w[1] - w[0] <= DEGENERACY_TOL


def krylov_expm_multiply(H, v: np.ndarray, t: float, tol: float = KRYLOV_TOL, m: int = 40):
    """``exp(-i H t) v`` by Lanczos projection with adaptive sub-stepping."""
    v = np.asarray(v, dtype=complex)
    beta0 = np.linalg.norm(v)
    if t == 0 or beta0 == 0:
        return v.copy()
    w = v / beta0
    remaining, tau = float(t), float(t)
    while remaining > 0:
        tau = min(tau, remaining)
        V = np.zeros((len(w), m + 1), dtype=complex)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        V[:, 0] = w
        k = m
        for j in range(m):
            u = H @ V[:, j]
            if j:
                u -= beta[j - 1] * V[:, j - 1]
            alpha[j] = np.vdot(V[:, j], u).real
            u -= alpha[j] * V[:, j]
            u -= V[:, : j + 1] @ (V[:, : j + 1].conj().T @ u)
            beta[j] = np.linalg.norm(u)
            if beta[j] < 1e-14:
                k = j + 1
                break
            V[:, j + 1] = u / beta[j]
        T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        while True:
            ew, ev = la.eigh(T)
            coeff = ev @ (np.exp(-1j * ew * tau) * ev[0].conj())
            # last Lanczos coefficient bounds the projection error
            err = abs(coeff[-1]) * (beta[k - 1] if k == m else 0.0)
            if err <= tol or k < m:
                break
            tau /= 2
        w = V[:, :k] @ coeff
        w /= np.linalg.norm(w)
        remaining -= tau
        if remaining <= 1e-15 * abs(t):
            break
    return beta0 * w


class SpectralPropagator:
    """Cached ``exp(-i H t)`` for one Hamiltonian on one basis."""

    def __init__(self, terms, basis: SectorBasis, krylov_tol: float = KRYLOV_TOL):
        self.basis = basis
        self.H = sector_hamiltonian(terms, basis)
        self.krylov_tol = krylov_tol
        if basis.dim <= SPECTRAL_MAX_DIM:
            self.energies, self.vectors = la.eigh(self.H.toarray())
        else:
            self.energies = self.vectors = None

    def apply(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise ParameterError("evolution time must be non-negative")
        if self.vectors is None:
            return krylov_expm_multiply(self.H, amplitudes, t, self.krylov_tol)
        coeff = self.vectors.conj().T @ amplitudes
        return self.vectors @ (np.exp(-1j * self.energies * t) * coeff)

    def unitary(self, t: float) -> np.ndarray:
        if self.vectors is None:
            raise CapacityError("dense propagator unavailable above the spectral size limit")
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T


def evolve_state(state: PureState, terms, t: float, cap: int = STATE_CAP) -> PureState:
    _check_cap(state.N, cap, "exact evolution")
    prop = SpectralPropagator(terms, state.basis)
    return PureState(state.basis, prop.apply(state.amplitudes, t))


def _sector_blocks(terms, N: int):
    for sz_twice in range(-N, N + 1, 2):
        basis = SectorBasis.sector(N, sz_twice)
        w, v = la.eigh(sector_hamiltonian(terms, basis).toarray())
        yield basis, w, v


def thermal_density(terms, N: int, kT: float, cap: int = DENSITY_CAP) -> DensityOperator:
    """Gibbs state ``exp(-H / kT) / Z`` over the full space."""
    if not kT > 0:
        raise ParameterError(f"kT must be positive, got {kT}")
    _check_cap(N, cap, "thermal density operator")
    blocks = list(_sector_blocks(terms, N))
    e_min = min(w[0] for _, w, _ in blocks)
    rho = np.zeros((2**N, 2**N), dtype=complex)
    for basis, w, v in blocks:
        weights = np.exp(-(w - e_min) / kT)
        idx = basis.states
        rho[np.ix_(idx, idx)] = (v * weights) @ v.conj().T
    rho /= np.trace(rho).real
    return DensityOperator(N, rho)


class DensityPropagator:
    """Cached block-diagonal ``exp(-i H t)`` acting on full-space density matrices."""

    def __init__(self, terms, N: int, cap: int = DENSITY_CAP):
        _check_cap(N, cap, "density-matrix evolution")
        self.N = N
        self.blocks = list(_sector_blocks(terms, N))

    def unitary(self, t: float) -> np.ndarray:
        U = np.zeros((2**self.N, 2**self.N), dtype=complex)
        for basis, w, v in self.blocks:
            idx = basis.states
            U[np.ix_(idx, idx)] = (v * np.exp(-1j * w * t)) @ v.conj().T
        return U

    def apply(self, rho: DensityOperator, t: float) -> DensityOperator:
        if t < 0:
            raise ParameterError("evolution time must be non-negative")
        # U is block diagonal in Sz: work in sector order, touch nonzero blocks only
        perm = np.concatenate([basis.states for basis, _, _ in self.blocks])
        edges = np.cumsum([0] + [basis.dim for basis, _, _ in self.blocks])
        us = [(v * np.exp(-1j * w * t)) @ v.conj().T for _, w, v in self.blocks]
        r = rho.matrix[np.ix_(perm, perm)]
        res = np.zeros_like(r, dtype=complex)
        for a, Ua in enumerate(us):
            sa = slice(edges[a], edges[a + 1])
            for b, Ub in enumerate(us):
                sb = slice(edges[b], edges[b + 1])
                sub = r[sa, sb]
                if np.any(sub):
                    res[sa, sb] = Ua @ sub @ Ub.conj().T
        out = np.empty_like(res)
        out[np.ix_(perm, perm)] = res
        return DensityOperator(self.N, out)


def evolve_density(rho: DensityOperator, terms, t: float, cap: int = DENSITY_CAP) -> DensityOperator:
    return DensityPropagator(terms, rho.N, cap).apply(rho, t)


def partial_trace_pair(state, site_a: int, site_b: int) -> TwoQubitDensity:
    """Reduced density matrix of sites ``(site_a, site_b)``, ``site_a < site_b``."""
    N = state.N
    if not 1 <= site_a < site_b <= N:
        raise IndexError(f"need 1 <= a < b <= N, got ({site_a}, {site_b}) with N={N}")
    a, b = site_a - 1, site_b - 1
    rest = [k for k in range(N) if k not in (a, b)]
    if isinstance(state, PureState):
        psi = state.full_vector().reshape([2] * N).transpose([a, b] + rest).reshape(4, -1)
        rho = psi @ psi.conj().T
    else:
        t = state.matrix.reshape([2] * (2 * N))
        letters = [chr(ord("a") + k) for k in range(N)]
        bra = list(letters)
        ket = [c.upper() for c in letters]
        ket_out = [ket[a], ket[b]]
        for k in rest:
            ket[k] = bra[k]
        spec = "".join(bra) + "".join(ket) + "->" + bra[a] + bra[b] + "".join(ket_out)
        rho = np.einsum(spec, t).reshape(4, 4)
    return TwoQubitDensity(rho, source="partial-trace")


def _parse_operator(spec, N: int) -> dict[int, str]:
    if isinstance(spec, dict):
        items = spec.items()
    else:
        try:
            items = [(int(site), label) for label, site in spec]
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"malformed operator spec {spec!r}") from exc
    ops = {}
    for site, label in items:
        label = str(label).lower()
        if label not in PAULI or not 1 <= int(site) <= N:
            raise ParameterError(f"malformed operator factor {label!r} on site {site}")
        if int(site) in ops:
            raise ParameterError(f"site {site} appears twice in operator spec")
        ops[int(site)] = label
    return ops


def _apply_local(tensor: np.ndarray, ops: dict[int, str], N: int, offset: int = 0):
    for site, label in ops.items():
        axis = site - 1 + offset
        tensor = np.moveaxis(np.tensordot(PAULI[label], tensor, axes=([1], [axis])), 0, axis)
    return tensor


def expectation(state, operator_spec) -> complex:
    """``<O>`` for a product of Pauli/identity factors.

    ``operator_spec`` is a mapping ``{site: label}`` or a sequence of
    ``(label, site)`` pairs with labels in ``i, x, y, z``.
    """
    N = state.N
    ops = _parse_operator(operator_spec, N)
    if isinstance(state, PureState):
        psi = state.full_vector().reshape([2] * N)
        return complex(np.vdot(psi, _apply_local(psi, ops, N)))
    rho = state.matrix.reshape([2] * (2 * N))
    out = _apply_local(rho, ops, N).reshape(2**N, 2**N)
    return complex(np.trace(out))


def energy(state, terms) -> float:
    """``<H>`` for a pure state in any basis or a full-space density operator."""
    if isinstance(state, PureState):
        H = sector_hamiltonian(terms, state.basis)
        return float(np.vdot(state.amplitudes, H @ state.amplitudes).real)
    H = sector_hamiltonian(terms, SectorBasis.full(state.N))
    return float(np.trace(H @ state.matrix).real)


def total_sz_expectation(state) -> float:
    if isinstance(state, PureState):
        return float(np.sum(np.abs(state.amplitudes) ** 2 * state.basis.sz_of()))
    basis = SectorBasis.full(state.N)
    return float(np.sum(np.diag(state.matrix).real * basis.sz_of()))
