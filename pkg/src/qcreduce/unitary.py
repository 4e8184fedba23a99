"""Dense complex linear algebra for small unitaries.

Conventions:
  - All matrices are complex128 ndarrays of dimension 2^N x 2^N.
  - Qubit 0 is the *most significant* bit of a basis-state index, i.e. the
    basis state |q0 q1 ... q_{N-1}> has index q0*2^{N-1} + ... + q_{N-1}.
    kron(A, B) therefore applies A to qubit 0 and B to qubit 1.
  - Matrix equality is always tested up to a global phase e^{i*theta},
    which is physically unobservable.
"""
from __future__ import annotations

import numpy as np

UNITARY_ATOL = 1e-9
DEFAULT_PHASE_TOL = 1e-5
DEFAULT_KEY_GRID = 1e-3


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    """Frobenius check of m^dagger m == I."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    d = m.shape[0]
    return bool(np.linalg.norm(m.conj().T @ m - np.eye(d)) <= atol)


def require_unitary(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if not is_unitary(m):
        raise ValueError(f"{what} is not unitary within {UNITARY_ATOL}")
    d = m.shape[0]
    if d & (d - 1) != 0 or d == 0:
        raise ValueError(f"{what} dimension {d} is not a power of two")
    return m


def identity(n_qubits: int) -> np.ndarray:
    return np.eye(2**n_qubits, dtype=np.complex128)


def embed(gate: np.ndarray, gate_qubits, n_qubits: int) -> np.ndarray:
    """Extend `gate` (acting on the ordered `gate_qubits`) to the full register.

    The remaining qubits get the identity. `gate_qubits[0]` is the most
    significant bit of the gate's own index space.
    """
    qubits = tuple(int(q) for q in gate_qubits)
    k = len(qubits)
    if len(set(qubits)) != k:
        raise ValueError(f"gate qubits {qubits} are not distinct")
    if any(q < 0 or q >= n_qubits for q in qubits):
        raise ValueError(f"gate qubits {qubits} out of range for {n_qubits} qubits")
    if gate.shape != (2**k, 2**k):
        raise ValueError(f"gate shape {gate.shape} does not match {k} qubits")
    if qubits == tuple(range(k)) and k == n_qubits:
        return gate
    full = np.kron(gate, np.eye(2 ** (n_qubits - k), dtype=np.complex128))
    # `full` acts on qubits in the order: gate_qubits, then the rest ascending.
    order = list(qubits) + [q for q in range(n_qubits) if q not in qubits]
    if order == list(range(n_qubits)):
        return full
    perm = [order.index(q) for q in range(n_qubits)]
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(perm + [n_qubits + p for p in perm])
    return np.ascontiguousarray(t.reshape(2**n_qubits, 2**n_qubits))


def compose(ops, dim: int | None = None) -> np.ndarray:
    """Product O(L)...O(1) of equally sized matrices, ops[0] applied first.

    An empty sequence yields the identity; `dim` is then required.
    """
    ops = list(ops)
    if not ops:
        if dim is None:
            raise ValueError("compose of empty sequence needs an explicit dim")
        return np.eye(dim, dtype=np.complex128)
    acc = ops[0]
    for op in ops[1:]:
        if op.shape != acc.shape:
            raise ValueError(f"dimension mismatch: {op.shape} vs {acc.shape}")
        acc = op @ acc
    if dim is not None and acc.shape[0] != dim:
        raise ValueError(f"composed dimension {acc.shape[0]} != expected {dim}")
    return acc


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - |tr(u^dagger v)| / d.

    Zero iff v = e^{i*theta} u; equals the phase-minimized Frobenius
    distance squared divided by 2d. Symmetric, in [0, 2].
    """
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    d = u.shape[0]
    # tr(u^dagger v) == <u, v> entrywise
    return float(1.0 - abs(np.vdot(u, v)) / d)


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = DEFAULT_PHASE_TOL) -> bool:
    return phase_distance(u, v) <= tol


def canonical_keys(mats: np.ndarray, grid: float = DEFAULT_KEY_GRID) -> list[bytes]:
    """Phase-fixed, grid-rounded byte keys for a batch of unitaries.

    Pivot: first row-major entry of magnitude >= 0.5/sqrt(d) (one always
    exists for a unitary since each column has an entry >= 1/sqrt(d)).
    The matrix is rotated so the pivot is real positive, every re/im part
    is rounded to the nearest multiple of `grid`, and the rounded grid
    multiples are serialized row-major as little-endian int64 pairs
    (real then imaginary per entry).

    Keys are a bucketing device: equal keys must always be confirmed with
    `equal_up_to_phase` before acting on them.
    """
    if grid <= 0:
        raise ValueError("grid must be positive")
    mats = np.asarray(mats, dtype=np.complex128)
    single = mats.ndim == 2
    if single:
        mats = mats[None, :, :]
    b, d, _ = mats.shape
    flat = mats.reshape(b, d * d)
    threshold = 0.5 / np.sqrt(d)
    pivot_idx = np.argmax(np.abs(flat) >= threshold, axis=1)
    pivots = flat[np.arange(b), pivot_idx]
    fixed = flat * (np.abs(pivots) / pivots)[:, None]
    parts = np.empty((b, d * d, 2), dtype=np.float64)
    parts[:, :, 0] = fixed.real
    parts[:, :, 1] = fixed.imag
    ints = np.round(parts / grid).astype("<i8")
    return [row.tobytes() for row in ints]


def canonical_key(u: np.ndarray, grid: float = DEFAULT_KEY_GRID) -> bytes:
    """Phase-invariant byte key of a single unitary (see canonical_keys)."""
    return canonical_keys(u, grid)[0]


def apply_gate(state: np.ndarray, gate: np.ndarray, gate_qubits, n_qubits: int) -> np.ndarray:
    """Apply a k-qubit gate to a 2^N state vector without building the full matrix."""
    qubits = list(gate_qubits)
    k = len(qubits)
    psi = state.reshape([2] * n_qubits)
    g = gate.reshape([2] * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), qubits))
    out = np.moveaxis(out, list(range(k)), qubits)
    return np.ascontiguousarray(out).reshape(-1)
