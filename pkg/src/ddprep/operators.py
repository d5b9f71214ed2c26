"""Qubit and spin operator construction for small dense registers.

Basis convention: each qubit is ordered (ground, excited), i.e. index 0 is
the spin-down state. With this ordering the ladder operators read
``s_minus = |g><e|`` and ``s_plus = |e><g|``, and the Pauli matrices satisfy
``s_pm = (sigma_x +- 1j*sigma_y)/2`` and ``sigma_z = |e><e| - |g><g|``.
Multi-qubit basis states are indexed with qubit 0 as the most significant
bit.
"""

from __future__ import annotations

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
S_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
S_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

_PAULI_BY_LETTER = {
    "I": IDENTITY_2,
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
}


def identity(n_qubits: int) -> np.ndarray:
    return np.eye(2**n_qubits, dtype=complex)


def single_site(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a one-qubit operator acting on ``site`` (0-based) into the register."""
    if not 0 <= site < n_qubits:
        raise ValueError(f"site {site} out of range for {n_qubits} qubits")
    out = np.eye(1, dtype=complex)
    for k in range(n_qubits):
        out = np.kron(out, op if k == site else IDENTITY_2)
    return out


def collective(op: np.ndarray, n_qubits: int, weights=None) -> np.ndarray:
    """Weighted sum of the same one-qubit operator over all sites."""
    if weights is None:
        weights = np.ones(n_qubits)
    weights = np.asarray(weights, dtype=complex)
    if weights.shape != (n_qubits,):
        raise ValueError("weights must have one entry per qubit")
    total = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for site, w in enumerate(weights):
        if w != 0:
            total += w * single_site(op, site, n_qubits)
    return total


def staggered_signs(n_qubits: int) -> np.ndarray:
    """Alternating weights (-1)^n for sites n = 1..n_qubits."""
    return np.array([(-1.0) ** (site + 1) for site in range(n_qubits)])


def pauli_string(spec: str) -> np.ndarray:
    """Tensor product from a letter string, e.g. ``"XZI"`` for 3 qubits."""
    if not spec:
        raise ValueError("empty Pauli string")
    out = np.eye(1, dtype=complex)
    for letter in spec:
        try:
            out = np.kron(out, _PAULI_BY_LETTER[letter])
        except KeyError:
            raise ValueError(f"unknown Pauli letter {letter!r}") from None
    return out


def global_flip(n_qubits: int) -> np.ndarray:
    """The simultaneous pi rotation sigma_x on every qubit."""
    return pauli_string("X" * n_qubits)


def basis_state(n_qubits: int, bits) -> np.ndarray:
    """Pure density matrix of a product basis state given per-qubit bits."""
    bits = list(bits)
    if len(bits) != n_qubits:
        raise ValueError("need one bit per qubit")
    index = 0
    for b in bits:
        index = 2 * index + int(b)
    rho = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    rho[index, index] = 1.0
    return rho


def fully_polarized(n_qubits: int) -> np.ndarray:
    """All spins up (every qubit excited)."""
    return basis_state(n_qubits, [1] * n_qubits)


def maximally_mixed(n_qubits: int) -> np.ndarray:
    d = 2**n_qubits
    return np.eye(d, dtype=complex) / d


def total_spin_squared(n_qubits: int) -> np.ndarray:
    """J^2 for the register, with J_a = (1/2) sum_i sigma_a^(i)."""
    d = 2**n_qubits
    j2 = np.zeros((d, d), dtype=complex)
    for pauli in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        j_a = 0.5 * collective(pauli, n_qubits)
        j2 += j_a @ j_a
    return j2


def linear_ramp(n_qubits: int, delta: float) -> np.ndarray:
    """Symmetric linear spread of qubit resonances from +delta down to -delta.

    For sites i = 1..n this is delta*(n+1-2i)/(n-1); a single qubit gets
    delta itself.
    """
    if n_qubits == 1:
        return np.array([delta])
    i = np.arange(1, n_qubits + 1)
    return delta * (n_qubits + 1.0 - 2.0 * i) / (n_qubits - 1.0)


def is_hermitian(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(matrix - matrix.conj().T)) <= tol)
