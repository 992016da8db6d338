"""Independent dense-algebra references.

Nothing here imports the package: every quantity is rebuilt from explicit
Kronecker products of 2x2 matrices so the implementation can be checked
against a second route.
"""
from __future__ import annotations

import itertools
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron(*ms):
    return reduce(np.kron, ms, np.eye(1, dtype=complex))


def pauli(label: str) -> np.ndarray:
    return kron(*(PAULI[c] for c in label))


def all_labels(n: int):
    return ["".join(t) for t in itertools.product("IXYZ", repeat=n)]


def trace_coefficients(A: np.ndarray) -> dict[str, complex]:
    """c_P = Tr(P A) / 2^n for every Pauli string."""
    n = A.shape[0].bit_length() - 1
    return {lab: np.trace(pauli(lab) @ A) / A.shape[0] for lab in all_labels(n)}


def ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def on(n: int, q: int, U: np.ndarray) -> np.ndarray:
    """Single-qubit U on qubit q (qubit 0 most significant)."""
    return kron(*(U if i == q else I2 for i in range(n)))


def controlled(n: int, c: int, t: int, U: np.ndarray) -> np.ndarray:
    return kron(*(P0 if i == c else I2 for i in range(n))) + \
        kron(*(P1 if i == c else (U if i == t else I2) for i in range(n)))


def ansatz_matrix(n: int, layers: int, theta, entangler: str = "cnot_ring") -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(layers, n, 3)
    V = np.eye(1 << n, dtype=complex)
    for layer in theta:
        for q, (a, b, c) in enumerate(layer):
            V = on(n, q, ry(c) @ rz(b) @ ry(a)) @ V
        if n == 1:
            continue
        if entangler == "cnot_chain":
            pairs, gate = [(i, i + 1) for i in range(n - 1)], X
        elif entangler == "cnot_ring":
            pairs, gate = [(i, (i + 1) % n) for i in range(n)], X
        else:
            pairs, gate = ([(0, 1)] if n == 2 else [(i, (i + 1) % n) for i in range(n)]), Z
        for c, t in pairs:
            V = controlled(n, c, t, gate) @ V
    return V


def ansatz_state(n, layers, theta, entangler="cnot_ring"):
    e0 = np.zeros(1 << n, dtype=complex)
    e0[0] = 1
    return ansatz_matrix(n, layers, theta, entangler) @ e0


def local_cost(A: np.ndarray, Ub: np.ndarray, x: np.ndarray) -> float:
    """1/2 - (1/2n) sum_j <x|A† Ub Z_j Ub† A|x> / <x|A†A|x>."""
    n = A.shape[0].bit_length() - 1
    Ax = A @ x
    y = Ub.conj().T @ Ax
    num = sum(np.vdot(y, on(n, j, Z) @ y).real for j in range(n))
    return 0.5 - 0.5 * num / (n * np.vdot(Ax, Ax).real)


def local_cost_expanded(A, Ub, x) -> float:
    """1 - (1/n) sum_j <x|A† Ub Z_j Ub† A|x> / <x|A†A|x>, with P_j the Pauli Z."""
    n = A.shape[0].bit_length() - 1
    Ax = A @ x
    y = Ub.conj().T @ Ax
    num = sum(np.vdot(y, on(n, j, Z) @ y).real for j in range(n))
    return 1 - num / (n * np.vdot(Ax, Ax).real)


def hadamard_uniform(n: int) -> np.ndarray:
    return kron(*([H] * n))


def hadamard_test_dense(B: np.ndarray, x: np.ndarray, imaginary: bool = False) -> float:
    """Full (n+1)-qubit circuit as one matrix, ancilla most significant."""
    n = x.size.bit_length() - 1
    zero = np.array([1, 0], dtype=complex)
    psi = np.kron(zero, x)
    m = n + 1
    psi = on(m, 0, H) @ psi
    if imaginary:
        psi = on(m, 0, np.diag([1, -1j])) @ psi
    CB = np.kron(P0, np.eye(1 << n)) + np.kron(P1, B)
    psi = on(m, 0, H) @ (CB @ psi)
    return float(np.vdot(psi, on(m, 0, Z) @ psi).real)
