"""Two-site variational ground-state search for bond-term Hamiltonians.

The Hamiltonian is encoded as a chain of small operator tensors built from an
operator-Schmidt split of every bond matrix; it never leaves this module.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import ConvergenceError
from .mps import (
    DQ,
    M_CAP,
    WEIGHT_FLOOR,
    MatrixProductState,
    bond_matrices,
    energy,
    split_two_site,
    symmetric_neel_state,
)

log = logging.getLogger(__name__)


def _operator_chain(terms, N):
    """Lower-triangular operator tensors ``W[left, right, out, in]``."""
    split = {}
    for b, h in bond_matrices(terms, N).items():
        # h[(s1 s2), (t1 t2)] -> sum_k A_k[s1, t1] B_k[s2, t2]
        m = h.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
        u, s, vh = np.linalg.svd(m)
        rank = int(np.count_nonzero(s > 1e-14 * max(s[0], 1e-300)))
        split[b] = [(s[k] * u[:, k].reshape(2, 2), vh[k].reshape(2, 2)) for k in range(rank)]
    width = 2 + max((len(v) for v in split.values()), default=0)
    last = width - 1
    eye = np.eye(2, dtype=complex)
    chain = []
    for i in range(1, N + 1):
        W = np.zeros((width, width, 2, 2), dtype=complex)
        W[0, 0] = eye
        W[last, last] = eye
        for k, (A, _) in enumerate(split.get(i, [])):
            W[0, 1 + k] = A
        for k, (_, B) in enumerate(split.get(i - 1, [])):
            W[1 + k, last] = B
        if i == 1:
            W = W[:1]
        if i == N:
            W = W[:, last:]
        chain.append(W)
    return chain


def _grow_left(L, A, W):
    T = np.tensordot(L, A, axes=(0, 0))  # wl, l', s, r
    T = np.tensordot(T, W, axes=([0, 2], [0, 3]))  # l', r, wr, s'
    return np.tensordot(T, A.conj(), axes=([0, 3], [0, 1]))  # r, wr, r'


def _grow_right(R, A, W):
    T = np.tensordot(A, R, axes=(2, 0))  # l, s, wr, r'
    T = np.tensordot(T, W, axes=([1, 2], [3, 1]))  # l, r', wl, s'
    return np.tensordot(T, A.conj(), axes=([1, 3], [2, 1]))  # l, wl, l'


def _apply_effective(L, W1, W2, R, theta):
    T = np.tensordot(L, theta, axes=(0, 0))  # a, l', s1, s2, r
    T = np.tensordot(T, W1, axes=([0, 2], [0, 3]))  # l', s2, r, b, s1'
    T = np.tensordot(T, W2, axes=([3, 1], [0, 3]))  # l', r, s1', c, s2'
    T = np.tensordot(T, R, axes=([1, 3], [0, 1]))  # l', s1', s2', r'
    return T


def _lowest_eigvec(L, W1, W2, R, theta, tol, allowed=None):
    """Lowest eigenpair of the two-site effective Hamiltonian.

    ``allowed`` is a boolean mask over ``theta`` selecting the entries of the
    conserved-charge sector; the search is restricted to it.
    """
    shape = theta.shape
    idx = np.arange(theta.size) if allowed is None else np.flatnonzero(allowed.reshape(-1))
    dim = idx.size

    def matvec(v):
        full = np.zeros(theta.size, dtype=complex)
        full[idx] = np.ravel(v)
        return _apply_effective(L, W1, W2, R, full.reshape(shape)).reshape(-1)[idx]

    def embed(v):
        full = np.zeros(theta.size, dtype=complex)
        full[idx] = v
        return full.reshape(shape)

    if dim <= 64:
        H = np.column_stack([matvec(col) for col in np.eye(dim, dtype=complex)])
        w, v = la.eigh(0.5 * (H + H.conj().T))
        return w[0], embed(v[:, 0])
    op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    w, v = spla.eigsh(op, k=1, which="SA", v0=theta.reshape(-1)[idx], tol=tol, ncv=min(dim - 1, 24))
    return w[0], embed(v[:, 0])


def dmrg_ground_state(
    terms,
    N: int,
    m_cap: int = M_CAP,
    weight_floor: float = WEIGHT_FLOOR,
    energy_tol: float = 1e-10,
    max_sweeps: int = 30,
    bond_schedule=(16, 32, 64),
    eig_tol: float = 1e-12,
    initial: MatrixProductState | None = None,
):
    """Ground state by two-site sweeps; returns ``(mps, energy)``.

    Bond dimensions ramp through ``bond_schedule`` (each clipped to
    ``m_cap``) before settling at ``m_cap``; convergence is declared when a
    full sweep at ``m_cap`` changes the energy by less than ``energy_tol``.
    """
    mps = initial.copy() if initial is not None else symmetric_neel_state(N)
    if N == 1:
        return mps, 0.0
    chain = _operator_chain(terms, N)
    mps.move_center(1) if mps.center is not None else mps.canonicalize(1)
    # right environments for a centre at site 1
    R = [None] * (N + 2)
    R[N + 1] = np.ones((1, 1, 1), dtype=complex)
    for i in range(N, 1, -1):
        R[i] = _grow_right(R[i + 1], mps.tensors[i - 1], chain[i - 1])
    L = [None] * (N + 2)
    L[0] = np.ones((1, 1, 1), dtype=complex)
    history = []
    max_discarded = 0.0
    caps = [min(m, m_cap) for m in bond_schedule if m < m_cap] + [m_cap]
    sweep = 0
    e = np.inf
    while True:
        cap = caps[min(sweep, len(caps) - 1)]
        sweep_discarded = 0.0
        order = [(b, True) for b in range(1, N)] + [(b, False) for b in range(N - 1, 0, -1)]
        for b, rightward in order:
            i = b - 1
            theta = np.tensordot(mps.tensors[i], mps.tensors[i + 1], axes=(2, 0))
            q = mps.charges
            allowed = None
            if q is not None:
                allowed = (
                    q[i][:, None, None, None] + DQ[None, :, None, None] + DQ[None, None, :, None]
                    == q[i + 2][None, None, None, :]
                )
            e, theta = _lowest_eigvec(L[b - 1], chain[i], chain[i + 1], R[b + 2], theta, eig_tol, allowed)
            Dl, Dr = theta.shape[0], theta.shape[3]
            u, s, vh, labels, discarded = split_two_site(
                theta, None if q is None else q[i], None if q is None else q[i + 2], cap, weight_floor, b
            )
            keep = len(s)
            if q is not None:
                q[i + 1] = labels
            sweep_discarded = max(sweep_discarded, discarded)
            if rightward:
                mps.tensors[i] = u[:, :keep].reshape(Dl, 2, keep)
                mps.tensors[i + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, Dr)
                mps.center = b + 1
                L[b] = _grow_left(L[b - 1], mps.tensors[i], chain[i])
            else:
                mps.tensors[i] = (u[:, :keep] * s).reshape(Dl, 2, keep)
                mps.tensors[i + 1] = vh[:keep].reshape(keep, 2, Dr)
                mps.center = b
                R[b + 1] = _grow_right(R[b + 2], mps.tensors[i + 1], chain[i + 1])
        sweep += 1
        history.append(float(e))
        max_discarded = max(max_discarded, sweep_discarded)
        log.debug("sweep %d cap %d E=%.14f discarded %.2e", sweep, cap, e, sweep_discarded)
        at_cap = sweep >= len(caps)
        if at_cap and len(history) > 1 and abs(history[-1] - history[-2]) < energy_tol:
            break
        if sweep >= max_sweeps:
            raise ConvergenceError(f"DMRG not converged after {sweep} sweeps", history)
    final = energy(mps, terms)
    mps.cumulative_discarded_weight = 0.0
    mps.diagnostics.update(
        energy_trace=history, sweeps=sweep, max_sweep_discarded_weight=max_discarded, method="dmrg"
    )
    return mps, final
