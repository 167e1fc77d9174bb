import logging
from functools import reduce
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from src.exceptions import DomainError
from src.symspace import (
    OneBodyOp,
    TwoBodyOp,
    default_coupling,
    get_sector,
    symmetric_isometry,
)

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


# ---------------------------------------------------------------------------
# Full-tensor reference implementations
#
# Every routine below works in (C^d)^{⊗N} with words in C order and projects
# back through the symmetric isometry. They are slow and capped at d^N <= 4096;
# they exist to adjudicate the occupation-basis formulas.
# ---------------------------------------------------------------------------
def tensor_power(op: np.ndarray, k: int) -> np.ndarray:
    """Kronecker power op^{⊗k}; the 1x1 identity for k = 0."""
    return reduce(np.kron, [np.asarray(op, dtype=complex)] * k, np.eye(1, dtype=complex))


def embed_state(matrix: np.ndarray, d: int, N: int) -> np.ndarray:
    """V Γ V† on the full tensor space."""
    V = symmetric_isometry(get_sector(d, N))
    return V @ matrix @ V.conj().T


def compress_state(full: np.ndarray, d: int, N: int) -> np.ndarray:
    """V† X V back on the symmetric sector."""
    V = symmetric_isometry(get_sector(d, N))
    return V.conj().T @ full @ V


def trace_out_last(full: np.ndarray, d: int, keep: int, total: int) -> np.ndarray:
    """Trace the last total-keep tensor factors of a d^total square matrix."""
    a, b = d**keep, d ** (total - keep)
    return np.einsum("ajbj->ab", full.reshape(a, b, a, b))


def oracle_partial_trace(matrix: np.ndarray, d: int, N: int, n: int) -> np.ndarray:
    """Reduced matrix by embedding, tracing the last N-n factors and compressing."""
    if n > N:
        raise DomainError(f"Cannot reduce N={N} to n={n}.")
    reduced = trace_out_last(embed_state(matrix, d, N), d, n, N)
    return compress_state(reduced, d, n)


def _on_slots(op: np.ndarray, d: int, slots, total: int) -> np.ndarray:
    """Operator acting as op on the given tensor slots and as identity elsewhere."""
    k = len(slots)
    rest = [i for i in range(total) if i not in slots]
    full = np.kron(op, np.eye(d ** (total - k), dtype=complex)).reshape((d,) * (2 * total))
    order = list(slots) + rest
    perm = np.argsort(order)
    axes = list(perm) + [total + p for p in perm]
    return full.transpose(axes).reshape(d**total, d**total)


def oracle_sym_pad(gamma: np.ndarray, d: int, ell: int, n: int) -> np.ndarray:
    """Sum over ell-subsets of n slots of (gamma on the subset) ⊗ identity, compressed."""
    if ell > n:
        raise DomainError(f"Cannot pad order {ell} to {n}.")
    gamma_full = embed_state(gamma, d, ell)
    total = np.zeros((d**n, d**n), dtype=complex)
    for slots in combinations(range(n), ell):
        total += _on_slots(gamma_full, d, slots, n)
    return compress_state(total, d, n)


def oracle_hamiltonian(h: OneBodyOp, w: TwoBodyOp, N: int, lam: Optional[float] = None) -> np.ndarray:
    """sum_j h_j + lam sum_{i<j} w_ij applied to the isometry columns and compressed."""
    d = h.d
    lam = default_coupling(N) if lam is None else lam
    V = symmetric_isometry(get_sector(d, N))
    columns = V.shape[1]
    psi = V.reshape((d,) * N + (columns,))
    result = np.zeros_like(psi)
    for j in range(N):
        result += np.moveaxis(np.tensordot(h.entries, psi, axes=([1], [j])), 0, j)
    if N >= 2:
        w4 = w.tensor().reshape(d, d, d, d)
        for i, j in combinations(range(N), 2):
            moved = np.tensordot(w4, psi, axes=([2, 3], [i, j]))
            result += lam * np.moveaxis(moved, [0, 1], [i, j])
    return V.conj().T @ result.reshape(d**N, columns)


def oracle_localized_block(matrix: np.ndarray, P: np.ndarray, d: int, N: int, k: int) -> np.ndarray:
    """
    binomial(N,k) tr_{k+1..N}[(P^{⊗k} ⊗ Q^{⊗(N-k)}) Γ (P^{⊗k} ⊗ Q^{⊗(N-k)})] on (C^d)^{⊗k}.

    The result is left on the full k-fold tensor space; callers compare it with
    the compressed block embedded back through the range basis of P.
    """
    Q = np.eye(d) - P
    Pi = np.kron(tensor_power(P, k), tensor_power(Q, N - k))
    full = embed_state(matrix, d, N)
    return comb(N, k) * trace_out_last(Pi @ full @ Pi, d, k, N)
