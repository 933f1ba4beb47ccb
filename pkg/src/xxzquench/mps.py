"""Matrix product states with second-order TEBD for nearest-neighbour chains.

Site tensors have shape ``(left bond, 2, right bond)``. The state is kept in
mixed canonical form around ``center`` (1-based). Every two-site update moves
the centre onto the target bond first, so truncations are always optimal
and the norm is simply the norm of the kept singular values.

States built from basis patterns carry ``charges``: the value of ``2 Sz`` of
everything left of each bond index. Gauge moves and two-site splits then work
block by block, which keeps total ``Sz`` exact under truncation. States
without labels (``from_dense``) use plain dense factorizations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import ConvergenceError, NumericalError, ParameterError
from .model import SZ, check_terms
from .observables import (
    PAULI,
    CorrelatorSet,
    check_bloch_vanishes,
    concurrence,
    rdm_from_correlators,
)
from .trajectory import QuenchTrajectory

log = logging.getLogger(__name__)

M_CAP = 100
WEIGHT_FLOOR = 1e-12
DEFAULT_STAGES = ((0.1, 1e-7), (0.01, 1e-8), (0.001, 1e-9))
DQ = np.array([1, -1])  # 2 Sz of the basis states up, down


@dataclass
class TruncationInfo:
    bond: int
    kept: int
    discarded_weight: float


class MatrixProductState:
    """Open-boundary MPS of spin-1/2 sites.

    ``cumulative_discarded_weight`` accumulates the normalized weight dropped
    by every truncation applied to this state. ``charges`` is ``None`` or a
    list of ``N + 1`` integer arrays labelling the bond indices.
    """

    def __init__(self, tensors, center=None, cumulative_discarded_weight=0.0, charges=None):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ParameterError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors, self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise ParameterError("adjacent tensors have mismatched bonds")
        self.center = center
        self.cumulative_discarded_weight = float(cumulative_discarded_weight)
        self.charges = None if charges is None else [np.asarray(q, dtype=int) for q in charges]
        self.diagnostics = {}
        if self.charges is not None:
            if len(self.charges) != self.N + 1 or any(
                len(q) != D for q, D in zip(self.charges, [1] + [t.shape[2] for t in self.tensors])
            ):
                raise ParameterError("charge labels do not match the bond dimensions")

    @property
    def N(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Dimensions of the ``N - 1`` interior bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "MatrixProductState":
        out = MatrixProductState(
            [t.copy() for t in self.tensors], self.center, self.cumulative_discarded_weight, self.charges
        )
        out.diagnostics = dict(self.diagnostics)
        return out

    # -- gauge -----------------------------------------------------------

    def _shift_right(self, i: int):
        """QR at 0-based site ``i``; centre moves to ``i + 1``."""
        A = self.tensors[i]
        Dl, d, Dr = A.shape
        M = A.reshape(Dl * d, Dr)
        if self.charges is None:
            q, r = la.qr(M, mode="economic")
        else:
            rows = (self.charges[i][:, None] + DQ[None, :]).reshape(-1)
            q, r, self.charges[i + 1] = _block_qr(M, rows, self.charges[i + 1])
        self.tensors[i] = q.reshape(Dl, d, q.shape[1])
        self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=(1, 0))

    def _shift_left(self, i: int):
        """LQ at 0-based site ``i``; centre moves to ``i - 1``."""
        A = self.tensors[i]
        Dl, d, Dr = A.shape
        M = A.reshape(Dl, d * Dr).conj().T
        if self.charges is None:
            q, r = la.qr(M, mode="economic")
        else:
            cols = (self.charges[i + 1][None, :] - DQ[:, None]).reshape(-1)
            q, r, self.charges[i] = _block_qr(M, cols, self.charges[i])
        self.tensors[i] = q.conj().T.reshape(q.shape[1], d, Dr)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.conj().T, axes=(2, 0))

    def canonicalize(self, site: int = 1):
        """Bring the state to mixed canonical form centred on ``site`` and normalize it."""
        for i in range(self.N - 1, 0, -1):
            self._shift_left(i)
        self.tensors[0] /= np.linalg.norm(self.tensors[0])
        self.center = 1
        self.move_center(site)
        return self

    def move_center(self, site: int):
        if not 1 <= site <= self.N:
            raise IndexError(f"site {site} outside chain of {self.N}")
        if self.center is None:
            return self.canonicalize(site)
        while self.center < site:
            self._shift_right(self.center - 1)
            self.center += 1
        while self.center > site:
            self._shift_left(self.center - 1)
            self.center -= 1
        return self

    def isometry_error(self) -> float:
        """Largest deviation from the isometry conditions implied by ``center``."""
        if self.center is None:
            return math.inf
        worst = 0.0
        for i, A in enumerate(self.tensors, start=1):
            Dl, d, Dr = A.shape
            if i < self.center:
                M = A.reshape(Dl * d, Dr)
                worst = max(worst, np.abs(M.conj().T @ M - np.eye(Dr)).max())
            elif i > self.center:
                M = A.reshape(Dl, d * Dr)
                worst = max(worst, np.abs(M @ M.conj().T - np.eye(Dl)).max())
        return float(worst)

    # -- dense conversion and overlaps -------------------------------------

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0].reshape(2, -1)
        for A in self.tensors[1:]:
            out = np.tensordot(out, A, axes=(1, 0)).reshape(-1, A.shape[2])
        return out.reshape(-1)

    @classmethod
    def from_dense(cls, vector, N: int, m_cap: int | None = None) -> "MatrixProductState":
        """Sequential SVD of a ``2**N`` vector, optionally capping the bond dimension."""
        rest = np.asarray(vector, dtype=complex).reshape(1, -1)
        tensors = []
        for _ in range(N - 1):
            Dl = rest.shape[0]
            u, s, vh = np.linalg.svd(rest.reshape(Dl * 2, -1), full_matrices=False)
            k = len(s) if m_cap is None else min(m_cap, len(s))
            tensors.append(u[:, :k].reshape(Dl, 2, k))
            rest = s[:k, None] * vh[:k]
        tensors.append(rest.reshape(rest.shape[0], 2, 1))
        mps = cls(tensors, center=N)
        mps.tensors[-1] /= np.linalg.norm(mps.tensors[-1])
        return mps

    def overlap(self, other: "MatrixProductState") -> complex:
        """``<self|other>``."""
        E = np.ones((1, 1), dtype=complex)
        for A, B in zip(self.tensors, other.tensors):
            E = np.tensordot(E, B, axes=(0, 0))
            E = np.tensordot(E, A.conj(), axes=([0, 1], [0, 1]))
        return complex(E[0, 0])

    def norm(self) -> float:
        return math.sqrt(abs(self.overlap(self)))


def _block_qr(M, row_q, col_q):
    """Economic QR of a charge-conserving matrix, one block per charge.

    Returns ``(q, r, labels)`` with ``labels`` the charges of the new columns
    of ``q``. Entries outside the blocks are treated as zero.
    """
    qs, rs, labels = [], [], []
    for c in np.unique(col_q):
        ri, ci = np.flatnonzero(row_q == c), np.flatnonzero(col_q == c)
        if ri.size == 0:
            continue
        qb, rb = la.qr(M[np.ix_(ri, ci)], mode="economic")
        qs.append((ri, qb))
        rs.append((ci, rb))
        labels.append(np.full(qb.shape[1], c))
    K = sum(qb.shape[1] for _, qb in qs)
    q = np.zeros((M.shape[0], K), dtype=complex)
    r = np.zeros((K, M.shape[1]), dtype=complex)
    off = 0
    for (ri, qb), (ci, rb) in zip(qs, rs):
        k = qb.shape[1]
        q[ri, off : off + k] = qb
        r[off : off + k, ci] = rb
        off += k
    if K == 0:
        raise NumericalError("state has no weight in any charge sector")
    return q, r, np.concatenate(labels)


def product_state(N: int, pattern) -> MatrixProductState:
    """Bond-dimension-1 product state.

    ``pattern`` is a sequence of per-site labels: ``0``/``"0"``/``"u"`` for
    spin up and ``1``/``"1"``/``"d"`` for spin down.
    """
    labels = list(pattern)
    if len(labels) != N:
        raise ParameterError(f"pattern has {len(labels)} entries for N={N}")
    up = {0, "0", "u", "up"}
    down = {1, "1", "d", "down"}
    tensors = []
    charges = [np.zeros(1, dtype=int)]
    for lab in labels:
        t = np.zeros((1, 2, 1), dtype=complex)
        if lab in up:
            k = 0
        elif lab in down:
            k = 1
        else:
            raise ParameterError(f"unknown basis label {lab!r}")
        t[0, k, 0] = 1
        tensors.append(t)
        charges.append(charges[-1] + DQ[k])
    return MatrixProductState(tensors, center=1, charges=charges)


def neel_state(N: int) -> MatrixProductState:
    return product_state(N, [i % 2 for i in range(N)])


def symmetric_neel_state(N: int) -> MatrixProductState:
    """``|0101..> + (-1)**(N/2) |1010..>`` normalized, bond dimension 2.

    By Marshall's sign rule this is the spin-flip parity of the antiferromagnetic
    ground state at even ``N``, so imaginary-time or variational searches never
    see the lowest triplet. Odd ``N`` falls back to the plain Neel state.
    """
    if N % 2 or N < 2:
        return neel_state(N)
    sign = (-1) ** (N // 2)
    tensors = []
    # bond index 0 follows |0101..>, index 1 follows |1010..>
    charges = [np.zeros(1, dtype=int)]
    for i in range(1, N):
        q = np.array([DQ[(np.arange(i)) % 2].sum(), DQ[(np.arange(i) + 1) % 2].sum()])
        charges.append(q)
    charges.append(np.zeros(1, dtype=int))
    for i in range(N):
        a, b = (0, 1) if i % 2 == 0 else (1, 0)
        t = np.zeros((1 if i == 0 else 2, 2, 1 if i == N - 1 else 2), dtype=complex)
        if i == 0:
            t[0, a, 0] = 1 / math.sqrt(2)
            t[0, b, 1] = sign / math.sqrt(2)
        elif i == N - 1:
            t[0, a, 0] = 1
            t[1, b, 0] = 1
        else:
            t[0, a, 0] = 1
            t[1, b, 1] = 1
        tensors.append(t)
    return MatrixProductState(tensors, charges=charges).canonicalize(1)


# -- gates ----------------------------------------------------------------------


def spin_flip(mps: MatrixProductState) -> MatrixProductState:
    """The state with every spin flipped (the product of sigma^x on all sites)."""
    charges = None if mps.charges is None else [-q for q in mps.charges]
    return MatrixProductState([t[:, ::-1, :] for t in mps.tensors], mps.center, mps.cumulative_discarded_weight, charges)


def spin_flip_parity(mps: MatrixProductState) -> float:
    """Real part of ``<psi|F|psi>`` for a normalized state; +-1 for flip eigenstates."""
    return float(mps.overlap(spin_flip(mps)).real)


def _direct_sum(a: MatrixProductState, b: MatrixProductState) -> MatrixProductState:
    """MPS of ``|a> + |b>`` with block-diagonal bonds."""
    N = a.N
    tensors = []
    for i, (x, y) in enumerate(zip(a.tensors, b.tensors)):
        if N == 1:
            tensors.append(x + y)
        elif i == 0:
            tensors.append(np.concatenate([x, y], axis=2))
        elif i == N - 1:
            tensors.append(np.concatenate([x, y], axis=0))
        else:
            t = np.zeros((x.shape[0] + y.shape[0], 2, x.shape[2] + y.shape[2]), dtype=complex)
            t[: x.shape[0], :, : x.shape[2]] = x
            t[x.shape[0]:, :, x.shape[2]:] = y
            tensors.append(t)
    charges = None
    if a.charges is not None and b.charges is not None:
        if a.charges[-1][0] != b.charges[-1][0]:
            raise ParameterError("cannot add states of different total Sz")
        charges = [a.charges[0]] + [np.concatenate([p, q]) for p, q in zip(a.charges[1:-1], b.charges[1:-1])]
        charges.append(a.charges[-1])
    return MatrixProductState(tensors, None, 0.0, charges)


def project_spin_flip(mps: MatrixProductState, sign: int, m_cap: int = M_CAP, weight_floor: float = WEIGHT_FLOOR):
    """Replace ``mps`` in place by the normalized ``|psi> + sign F|psi>``, recompressed to ``m_cap``.

    Exact dynamics of a flip-symmetric Hamiltonian conserve the parity of a
    flip eigenstate; truncation does not quite, and the small odd component it
    creates shows up as single-site ``<Sz>``. Projecting removes it.
    """
    flipped = spin_flip(mps)
    if sign < 0:
        flipped.tensors[0] = -flipped.tensors[0]
    total = _direct_sum(mps, flipped)
    total.canonicalize(1)
    discarded = 0.0
    for i in range(total.N - 1):
        A, B = total.tensors[i], total.tensors[i + 1]
        theta = np.tensordot(A, B, axes=(2, 0))
        q = total.charges
        u, sv, vh, labels, w = split_two_site(
            theta, None if q is None else q[i], None if q is None else q[i + 2], m_cap, weight_floor, i + 1
        )
        discarded += w
        total.tensors[i] = u.reshape(A.shape[0], 2, -1)
        total.tensors[i + 1] = (sv[:, None] * vh).reshape(-1, 2, B.shape[2])
        if q is not None:
            q[i + 1] = labels
    mps.tensors, mps.charges, mps.center = total.tensors, total.charges, total.N
    mps.cumulative_discarded_weight += discarded
    return mps


def bond_matrices(terms, N: int) -> dict[int, np.ndarray]:
    check_terms(terms, N)
    out = {}
    for term in terms:
        out[term.left_site] = out.get(term.left_site, 0) + term.matrix()
    return out


def bond_exponential(h: np.ndarray, step: float, mode: str = "real") -> np.ndarray:
    """``exp(-i h step)`` or ``exp(-h step)`` for a Hermitian 4x4 bond matrix."""
    w, v = la.eigh(h)
    phase = np.exp(-1j * w * step) if mode == "real" else np.exp(-w * step)
    return (v * phase) @ v.conj().T


@dataclass
class TrotterSchedule:
    """Second-order splitting: odd bonds for ``dt/2``, even bonds for ``dt``, odd for ``dt/2``.

    ``gates`` is the per-step sequence of ``(bond, matrix, fraction)`` with
    ``fraction`` the share of ``dt`` covered. ``fused_odd`` holds full-``dt``
    odd gates that replace two adjacent half steps between measurements.
    """

    dt: float
    mode: str
    N: int
    gates: list = field(default_factory=list)
    fused_odd: list = field(default_factory=list)
    order: int = 2

    def layers(self):
        """The step split into the leading half layer, the middle and the trailing half layer."""
        odd = [g for g in self.gates if g[2] == 0.5]
        half = len(odd) // 2
        if not odd:
            return [], self.gates, []
        return odd[:half], self.gates[half:len(self.gates) - half], odd[half:]


def build_trotter_schedule(terms, dt: float, mode: str = "real", N: int | None = None) -> TrotterSchedule:
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if mode not in ("real", "imaginary"):
        raise ParameterError(f"mode must be 'real' or 'imaginary', got {mode!r}")
    N = N if N is not None else max(t.left_site for t in terms) + 1
    hs = bond_matrices(terms, N)
    odd = sorted(b for b in hs if b % 2 == 1)
    even = sorted(b for b in hs if b % 2 == 0)
    sched = TrotterSchedule(dt, mode, N)
    if not even:
        # odd gates commute with each other: the splitting is exact
        sched.gates = [(b, bond_exponential(hs[b], dt, mode), 1.0) for b in odd]
        sched.fused_odd = []
        return sched
    first = [(b, bond_exponential(hs[b], dt / 2, mode), 0.5) for b in odd]
    middle = [(b, bond_exponential(hs[b], dt, mode), 1.0) for b in reversed(even)]
    sched.gates = first + middle + list(first)
    sched.fused_odd = [(b, bond_exponential(hs[b], dt, mode), 1.0) for b in odd]
    return sched


def _svd(theta: np.ndarray, bond: int):
    try:
        return la.svd(theta, full_matrices=False, lapack_driver="gesdd")
    except (la.LinAlgError, ValueError):
        try:
            return la.svd(theta, full_matrices=False, lapack_driver="gesvd")
        except (la.LinAlgError, ValueError) as exc:
            raise NumericalError(f"SVD failed on bond {bond}") from exc


def truncate_spectrum(s: np.ndarray, m_cap: int, weight_floor: float):
    """Number of singular values to keep and the discarded normalized weight."""
    p = s**2
    total = p.sum()
    if total == 0:
        raise NumericalError("two-site tensor vanished")
    p = p / total
    keep = min(m_cap, len(s))
    keep = max(1, min(keep, int(np.count_nonzero(p[:keep] > weight_floor))))
    return keep, float(p[keep:].sum())


def _paired_selection(labels, spectra, m_cap, weight_floor):
    """Choose kept singular values block by block, spin-flip partners together.

    Blocks with charges ``c`` and ``-c`` are exchanged by a global spin flip,
    so their ``k``-th values form one unit that is kept or dropped as a whole.
    A cut between partners would break the symmetry and leak weight into
    single-site ``<Sz>``. Units are taken in descending order of their largest
    value until the cap or the weight floor is reached. Returns
    ``(pairs, discarded)`` with ``pairs[i] = (block, index)`` in kept order.
    """
    total = sum(float(np.sum(s**2)) for s in spectra)
    if total == 0:
        raise NumericalError("two-site tensor vanished")
    where = {c: k for k, c in enumerate(labels)}
    units = []
    for c in sorted({abs(int(c)) for c in labels}):
        members = [where[q] for q in ({c, -c}) if q in where]
        for j in range(max(len(spectra[k]) for k in members)):
            entries = [(k, j) for k in members if j < len(spectra[k])]
            units.append((max(spectra[k][j] for k, j in entries), entries))
    units.sort(key=lambda u: -u[0])
    kept, weight = [], 0.0
    for top, entries in units:
        if kept and (len(kept) + len(entries) > m_cap or top**2 / total <= weight_floor):
            break
        kept.extend(entries)
        weight += sum(spectra[k][j] ** 2 for k, j in entries)
    kept.sort(key=lambda e: -spectra[e[0]][e[1]])
    return np.array(kept, dtype=int), max(0.0, 1.0 - weight / total)


def split_two_site(theta, left_q, right_q, m_cap, weight_floor, bond=0):
    """Truncated SVD of a two-site tensor ``theta[l, s1, s2, r]``.

    ``left_q`` and ``right_q`` are the outer bond charges or ``None`` for a
    dense split. Returns ``(u, s, vh, labels, discarded)`` with ``s``
    renormalized and ``labels`` the charges of the new bond (or ``None``).
    """
    Dl, Dr = theta.shape[0], theta.shape[3]
    M = theta.reshape(Dl * 2, 2 * Dr)
    if left_q is None or right_q is None:
        u, s, vh = _svd(M, bond)
        keep, discarded = truncate_spectrum(s, m_cap, weight_floor)
        return u[:, :keep], s[:keep] / np.linalg.norm(s[:keep]), vh[:keep], None, discarded
    rows = (left_q[:, None] + DQ[None, :]).reshape(-1)
    cols = (right_q[None, :] - DQ[:, None]).reshape(-1)
    blocks = []
    for c in np.intersect1d(rows, cols):
        ri, ci = np.flatnonzero(rows == c), np.flatnonzero(cols == c)
        ub, sb, vb = _svd(M[np.ix_(ri, ci)], bond)
        blocks.append((c, ri, ci, ub, sb, vb))
    if not blocks:
        raise NumericalError(f"two-site tensor on bond {bond} has no allowed charge block")
    order, discarded = _paired_selection([b[0] for b in blocks], [b[4] for b in blocks], m_cap, weight_floor)
    owner, local = order[:, 0], order[:, 1]
    keep = len(order)
    u = np.zeros((M.shape[0], keep), dtype=complex)
    vh = np.zeros((keep, M.shape[1]), dtype=complex)
    labels = np.empty(keep, dtype=int)
    for col, (k, j) in enumerate(zip(owner, local)):
        c, ri, ci, ub, _, vb = blocks[k]
        u[ri, col] = ub[:, j]
        vh[col, ci] = vb[j]
        labels[col] = c
    s = np.array([blocks[k][4][j] for k, j in zip(owner, local)])
    return u, s / np.linalg.norm(s), vh, labels, discarded


def apply_gate_and_truncate(
    mps: MatrixProductState,
    gate: np.ndarray,
    bond: int,
    m_cap: int = M_CAP,
    weight_floor: float = WEIGHT_FLOOR,
):
    """Apply a two-site gate to sites ``(bond, bond + 1)`` in place.

    The centre is moved to the nearer site of the bond first and ends on the
    opposite site, so sweeping gates left-to-right or right-to-left costs no
    extra QR steps. Returns ``(mps, TruncationInfo)``.
    """
    if not 1 <= bond < mps.N:
        raise IndexError(f"bond {bond} outside chain of {mps.N}")
    if mps.center is None:
        mps.canonicalize(bond)
    rightward = mps.center <= bond
    mps.move_center(bond if rightward else bond + 1)
    i = bond - 1
    A, B = mps.tensors[i], mps.tensors[i + 1]
    Dl, Dr = A.shape[0], B.shape[2]
    theta = np.tensordot(A, B, axes=(2, 0))
    theta = np.tensordot(gate.reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2])).transpose(2, 0, 1, 3)
    q = mps.charges
    u, s, vh, labels, discarded = split_two_site(
        theta, None if q is None else q[i], None if q is None else q[i + 2], m_cap, weight_floor, bond
    )
    keep = len(s)
    if q is not None:
        q[i + 1] = labels
    if rightward:
        mps.tensors[i] = u.reshape(Dl, 2, keep)
        mps.tensors[i + 1] = (s[:, None] * vh).reshape(keep, 2, Dr)
        mps.center = bond + 1
    else:
        mps.tensors[i] = (u * s).reshape(Dl, 2, keep)
        mps.tensors[i + 1] = vh.reshape(keep, 2, Dr)
        mps.center = bond
    mps.cumulative_discarded_weight += discarded
    return mps, TruncationInfo(bond, keep, discarded)


def _apply_layer(mps, gates, m_cap, weight_floor, infos=None):
    # alternate direction to keep centre moves short
    if mps.center is not None and gates and mps.center > gates[0][0] + 1 and len(gates) > 1 and gates[0][0] < gates[-1][0]:
        gates = gates[::-1]
    for bond, g, _ in gates:
        _, info = apply_gate_and_truncate(mps, g, bond, m_cap, weight_floor)
        if infos is not None:
            infos.append(info)


def trotter_steps(mps, sched: TrotterSchedule, n_steps: int, m_cap=M_CAP, weight_floor=WEIGHT_FLOOR):
    """Apply ``n_steps`` second-order steps, fusing adjacent odd half layers."""
    if n_steps <= 0:
        return mps
    lead, middle, trail = sched.layers()
    if not lead:
        for _ in range(n_steps):
            _apply_layer(mps, middle, m_cap, weight_floor)
        return mps
    _apply_layer(mps, lead, m_cap, weight_floor)
    for k in range(n_steps):
        _apply_layer(mps, middle, m_cap, weight_floor)
        _apply_layer(mps, trail if k == n_steps - 1 else sched.fused_odd, m_cap, weight_floor)
    return mps


# -- measurements -------------------------------------------------------------------


def _transfer(E, A, op=None):
    """Propagate a (ket, bra) environment through one site from the left."""
    T = np.tensordot(E, A, axes=(0, 0))  # bra_l, s, r
    if op is not None:
        T = np.tensordot(T, op, axes=(1, 1)).transpose(0, 2, 1)
    return np.tensordot(T, A.conj(), axes=([0, 1], [0, 1]))


def _transfer_right(E, A, op=None):
    T = np.tensordot(A, E, axes=(2, 0))  # l, s, bra_r
    if op is not None:
        T = np.tensordot(op, T, axes=(1, 1)).transpose(1, 0, 2)
    return np.tensordot(T, A.conj(), axes=([1, 2], [1, 2]))


def left_environments(mps):
    envs = [np.ones((1, 1), dtype=complex)]
    for A in mps.tensors:
        envs.append(_transfer(envs[-1], A))
    return envs


def right_environments(mps):
    envs = [np.ones((1, 1), dtype=complex)]
    for A in reversed(mps.tensors):
        envs.append(_transfer_right(envs[-1], A))
    return envs[::-1]


def _left_env_upto(mps, site):
    """Environment of sites ``1 .. site - 1``."""
    D = mps.tensors[site - 1].shape[0]
    if mps.center is not None and mps.center >= site:
        return np.eye(D, dtype=complex)
    E = np.ones((1, 1), dtype=complex)
    for A in mps.tensors[: site - 1]:
        E = _transfer(E, A)
    return E


def _right_env_from(mps, site):
    """Environment of sites ``site + 1 .. N``."""
    D = mps.tensors[site - 1].shape[2]
    if mps.center is not None and mps.center <= site:
        return np.eye(D, dtype=complex)
    E = np.ones((1, 1), dtype=complex)
    for A in reversed(mps.tensors[site:]):
        E = _transfer_right(E, A)
    return E


def correlator_table(mps, site_a: int, site_b: int) -> np.ndarray:
    """``T[mu, nu] = <s_mu(site_a) s_nu(site_b)>`` for ``mu, nu`` in ``i, x, y, z``."""
    if not 1 <= site_a < site_b <= mps.N:
        raise IndexError(f"need 1 <= a < b <= N, got ({site_a}, {site_b})")
    ops = [PAULI[k] for k in "ixyz"]
    E = _left_env_upto(mps, site_a)
    A = mps.tensors[site_a - 1]
    envs = np.stack([_transfer(E, A, op) for op in ops])  # (4, D, D)
    for A in mps.tensors[site_a : site_b - 1]:
        T = np.tensordot(envs, A, axes=(1, 0))  # mu, bra_l, s, r
        envs = np.tensordot(T, A.conj(), axes=([1, 2], [0, 1]))
    R = _right_env_from(mps, site_b)
    B = mps.tensors[site_b - 1]
    table = np.empty((4, 4), dtype=complex)
    for nu, op in enumerate(ops):
        closed = _transfer_right(R, B, op)  # (D, D) ket, bra
        table[:, nu] = np.tensordot(envs, closed, axes=([1, 2], [0, 1]))
    return table / table[0, 0].real


def correlator(mps, pauli_a: str, pauli_b: str, site_a: int, site_b: int) -> complex:
    """``<sigma^a_{site_a} sigma^b_{site_b}>`` with labels in ``i, x, y, z``."""
    labels = "ixyz"
    pa, pb = str(pauli_a).lower(), str(pauli_b).lower()
    if pa not in labels or pb not in labels:
        raise ParameterError(f"unknown Pauli label in ({pauli_a!r}, {pauli_b!r})")
    if site_a == site_b:
        raise ParameterError("correlator needs two distinct sites")
    if site_a > site_b:
        site_a, site_b, pa, pb = site_b, site_a, pb, pa
    return complex(correlator_table(mps, site_a, site_b)[labels.index(pa), labels.index(pb)])


def expectation(mps, ops: dict) -> complex:
    """``<prod_k O_k>`` for a mapping ``{site: label or 2x2 matrix}``."""
    E = np.ones((1, 1), dtype=complex)
    for site, A in enumerate(mps.tensors, start=1):
        op = ops.get(site)
        if isinstance(op, str):
            op = PAULI[op.lower()]
        E = _transfer(E, A, op)
    norm = _transfer_norm(mps)
    return complex(E[0, 0] / norm)


def _transfer_norm(mps):
    E = np.ones((1, 1), dtype=complex)
    for A in mps.tensors:
        E = _transfer(E, A)
    return E[0, 0].real


def bond_energies(mps, terms) -> np.ndarray:
    """``<h_b>`` for every bond carrying a term, ordered by bond index."""
    hs = bond_matrices(terms, mps.N)
    L, R = left_environments(mps), right_environments(mps)
    norm = L[-1][0, 0].real
    out = []
    for b in sorted(hs):
        A, B = mps.tensors[b - 1], mps.tensors[b]
        theta = np.tensordot(A, B, axes=(2, 0))
        htheta = np.tensordot(hs[b].reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2])).transpose(2, 0, 1, 3)
        T = np.tensordot(L[b - 1], htheta, axes=(0, 0))
        T = np.tensordot(T, R[b + 1], axes=(3, 0))
        out.append(np.tensordot(T, theta.conj(), axes=([0, 1, 2, 3], [0, 1, 2, 3])).real / norm)
    return np.array(out)


def energy(mps, terms) -> float:
    return float(bond_energies(mps, terms).sum())


def total_sz(mps) -> float:
    L, R = left_environments(mps), right_environments(mps)
    norm = L[-1][0, 0].real
    out = 0.0
    for i, A in enumerate(mps.tensors):
        T = _transfer(L[i], A, SZ)
        out += np.tensordot(T, R[i + 1], axes=([0, 1], [0, 1])).real
    return float(out / norm)


def end_to_end_correlators(mps) -> CorrelatorSet:
    return CorrelatorSet.from_table(correlator_table(mps, 1, mps.N))


class EndToEndMeasurer:
    """Default measurement: ``C_{1,N}`` from correlators, recording Bloch residues."""

    def __init__(self, bloch_tol: float | None = 1e-6):
        self.bloch_tol = bloch_tol
        self.max_bloch = 0.0

    def __call__(self, mps, t):
        c = end_to_end_correlators(mps)
        bloch = float(max(np.abs(c.bloch_a).max(), np.abs(c.bloch_b).max()))
        self.max_bloch = max(self.max_bloch, bloch)
        if self.bloch_tol is not None:
            check_bloch_vanishes(c, self.bloch_tol)
        return concurrence(rdm_from_correlators(c))


# -- algorithms -------------------------------------------------------------------------


def imaginary_time_ground_state(
    terms,
    N: int,
    stages=DEFAULT_STAGES,
    m_cap: int = M_CAP,
    weight_floor: float = WEIGHT_FLOOR,
    check_every: int = 5,
    max_steps: int = 200_000,
    initial: MatrixProductState | None = None,
):
    """Staged imaginary-time TEBD; returns ``(mps, energy)``.

    The default start is :func:`symmetric_neel_state`. Each stage
    ``(dtau, threshold)`` runs until the energy decreases by less than
    ``threshold`` per unit imaginary time, measured over ``check_every``
    steps. Energy increases above 1e-9 between checks are counted in
    ``mps.diagnostics['energy_increases']``.
    """
    mps = initial.copy() if initial is not None else symmetric_neel_state(N)
    mps.canonicalize(1)
    trace = [energy(mps, terms)]
    increases = 0
    steps_per_stage = []
    prev_tau = math.inf
    for dtau, threshold in stages:
        if not dtau < prev_tau:
            raise ParameterError("imaginary-time steps must decrease from stage to stage")
        prev_tau = dtau
        sched = build_trotter_schedule(terms, dtau, "imaginary", N)
        steps = 0
        while True:
            trotter_steps(mps, sched, check_every, m_cap, weight_floor)
            steps += check_every
            e = energy(mps, terms)
            if e > trace[-1] + 1e-9:
                increases += 1
            delta = abs(e - trace[-1]) / (check_every * dtau)
            trace.append(e)
            if delta < threshold:
                break
            if steps >= max_steps:
                raise ConvergenceError(
                    f"imaginary-time stage dtau={dtau} not converged after {steps} steps", trace
                )
        steps_per_stage.append(steps)
        log.debug("stage dtau=%g converged after %d steps, E=%.12f", dtau, steps, trace[-1])
    mps.diagnostics.update(
        energy_trace=trace, steps_per_stage=steps_per_stage, energy_increases=increases
    )
    # ground-state preparation does not count towards the quench truncation budget
    mps.diagnostics["preparation_discarded_weight"] = mps.cumulative_discarded_weight
    mps.cumulative_discarded_weight = 0.0
    return mps, trace[-1]


def evolve_real_time(
    mps: MatrixProductState,
    terms,
    t_max: float,
    dt: float = 0.05,
    m_cap: int = M_CAP,
    measure_every: int = 10,
    measurer=None,
    weight_floor: float = WEIGHT_FLOOR,
    discarded_ceiling: float | None = 1e-8,
    sz_tol: float = 1e-8,
    params=None,
    project_parity: bool = True,
) -> QuenchTrajectory:
    """Evolve ``mps`` in place under ``terms`` and sample ``measurer(mps, t)``.

    Samples are taken at ``t = k * measure_every * dt`` up to ``t_max``.
    ``extras`` records the largest deviation of the norm, of ``<terms>`` and
    of total ``Sz`` from their initial values over the samples.

    If the initial state is an eigenstate of the global spin flip (within
    1e-6) and ``project_parity`` is set, the state is projected back onto
    that parity before every sample; this removes the single-site ``<Sz>``
    that truncation would otherwise build up.
    """
    if t_max < 0 or not dt > 0 or measure_every < 1:
        raise ParameterError("need t_max >= 0, dt > 0 and measure_every >= 1")
    measurer = measurer or EndToEndMeasurer()
    sched = build_trotter_schedule(terms, dt, "real", mps.N)
    n_steps = int(math.floor(t_max / dt + 1e-9))
    if mps.center is None:
        mps.canonicalize(1)
    sz0 = total_sz(mps)
    e0 = energy(mps, terms)
    parity = spin_flip_parity(mps)
    sign = int(np.sign(parity)) if project_parity and abs(abs(parity) - 1) <= 1e-6 else 0
    start_weight = mps.cumulative_discarded_weight
    times, values, weights, bonds = [], [], [], []
    warnings = []
    sz_drift = norm_drift = energy_drift = 0.0

    def sample(step):
        times.append(step * dt)
        values.append(float(measurer(mps, step * dt)))
        weights.append(mps.cumulative_discarded_weight - start_weight)
        bonds.append(mps.max_bond)

    sample(0)
    step = 0
    while step + measure_every <= n_steps:
        trotter_steps(mps, sched, measure_every, m_cap, weight_floor)
        if sign:
            project_spin_flip(mps, sign, m_cap, weight_floor)
        step += measure_every
        sample(step)
        sz_drift = max(sz_drift, abs(total_sz(mps) - sz0))
        norm_drift = max(norm_drift, abs(mps.norm() - 1))
        energy_drift = max(energy_drift, abs(energy(mps, terms) - e0))
        if discarded_ceiling is not None and weights[-1] > discarded_ceiling and "discarded-weight" not in warnings:
            warnings.append("discarded-weight")
            log.warning("cumulative discarded weight %.3e exceeds %.1e at t=%g", weights[-1], discarded_ceiling, times[-1])
    if sz_drift > sz_tol:
        warnings.append("sz-drift")
    extras = {"sz_drift": sz_drift, "norm_drift": norm_drift, "energy_drift": energy_drift}
    if isinstance(measurer, EndToEndMeasurer):
        extras["max_bloch"] = measurer.max_bloch
    return QuenchTrajectory(
        params=params,
        engine="mps",
        times=np.array(times),
        concurrence=np.array(values),
        discarded_weight=np.array(weights),
        max_bond=np.array(bonds),
        extras=extras,
        warnings=warnings,
        provenance={"dt": dt, "m": m_cap, "weight_floor": weight_floor, "measure_every": measure_every,
                    "flip_parity": sign},
    )
