"""Exact state-vector simulation for the circuits the solver needs.

Amplitudes are indexed big-endian: qubit 0 is the most significant index bit.
Kernels accept arbitrary leading batch axes so one call can push a stack of
states through the same gate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 24
UNITARY_ATOL = 1e-10
NORM_ATOL = 1e-8

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)


@dataclass(frozen=True)
class GateOp:
    """One (possibly controlled) gate.

    kind is one of H, X, Y, Z, S_dagger, Ry, Rz, CNOT, CZ, DenseUnitary.  CNOT
    and CZ take their control as the first entry of ``controls``.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    angle: float | None = None
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        if set(self.targets) & set(self.controls):
            raise ValueError(f"{self.kind}: targets and controls overlap")
        if len(set(self.targets)) != len(self.targets) or len(set(self.controls)) != len(self.controls):
            raise ValueError(f"{self.kind}: repeated qubit index")
        if self.kind in ("CNOT", "CZ") and not self.controls:
            raise ValueError(f"{self.kind} needs a control qubit")
        if self.kind == "DenseUnitary":
            U = np.asarray(self.matrix, dtype=complex)
            dim = 1 << len(self.targets)
            if U.shape != (dim, dim):
                raise ValueError(f"DenseUnitary on {len(self.targets)} qubits needs a {dim}x{dim} matrix")
            if not np.allclose(U.conj().T @ U, np.eye(dim), atol=UNITARY_ATOL):
                raise ValueError("DenseUnitary matrix is not unitary")
            object.__setattr__(self, "matrix", U)
        elif self.kind in ("Ry", "Rz"):
            if self.angle is None:
                raise ValueError(f"{self.kind} needs an angle")
        elif self.kind not in ("H", "X", "Y", "Z", "S_dagger", "CNOT", "CZ"):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def unitary(self) -> np.ndarray:
        """The matrix acting on ``targets`` (controls excluded)."""
        k = self.kind
        if k == "DenseUnitary":
            return self.matrix
        if k == "Ry":
            return ry(self.angle)
        if k == "Rz":
            return rz(self.angle)
        return {"H": _H, "X": _X, "Y": _Y, "Z": _Z, "S_dagger": _SDG, "CNOT": _X, "CZ": _Z}[k]

    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def controlled(self, *extra: int) -> "GateOp":
        return GateOp(self.kind, self.targets, tuple(extra) + self.controls, self.angle, self.matrix)

    def dagger(self) -> "GateOp":
        if self.kind in ("Ry", "Rz"):
            return GateOp(self.kind, self.targets, self.controls, -self.angle)
        if self.kind == "S_dagger":
            return GateOp("DenseUnitary", self.targets, self.controls, matrix=_SDG.conj().T)
        if self.kind == "DenseUnitary":
            return GateOp("DenseUnitary", self.targets, self.controls, matrix=self.matrix.conj().T)
        return self


class StateVector:
    """2^m complex amplitudes.  Treat as a value: gates return new states."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes, num_qubits: int | None = None):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        dim = amps.size
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"state dimension {dim} is not a power of two >= 2")
        m = dim.bit_length() - 1
        if num_qubits is not None and num_qubits != m:
            raise ValueError(f"{dim} amplitudes do not describe {num_qubits} qubits")
        amps.setflags(write=False)
        self.num_qubits = m
        self.amplitudes = amps

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_json(self) -> list[list[float]]:
        return [[a.real, a.imag] for a in self.amplitudes]


def new_state(m: int) -> StateVector:
    if not 1 <= m <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {m}")
    amps = np.zeros(1 << m, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps)


def apply_matrix(amps: np.ndarray, U: np.ndarray, targets: Sequence[int],
                 controls: Sequence[int], num_qubits: int) -> np.ndarray:
    """Apply a controlled unitary to the last axis of ``amps`` (copy returned)."""
    batch = amps.shape[:-1]
    nb = len(batch)
    psi = np.array(amps, dtype=complex).reshape(batch + (2,) * num_qubits)
    index = [slice(None)] * psi.ndim
    for c in controls:
        index[nb + c] = 1
    index = tuple(index)
    sub = psi[index]
    # axes of the sub-array after the control axes are dropped
    axes = [nb + t - sum(1 for c in controls if c < t) for t in targets]
    k = len(targets)
    U = np.asarray(U).reshape((2,) * (2 * k))
    out = np.tensordot(U, sub, axes=(list(range(k, 2 * k)), axes))
    psi[index] = np.moveaxis(out, list(range(k)), axes)
    return psi.reshape(batch + (1 << num_qubits,))


def _check_indices(g: GateOp, m: int):
    for q in g.qubits():
        if not 0 <= q < m:
            raise IndexError(f"{g.kind}: qubit {q} out of range for {m} qubits")


def apply_gate(state: StateVector, g: GateOp) -> StateVector:
    _check_indices(g, state.num_qubits)
    amps = apply_matrix(state.amplitudes, g.unitary(), g.targets, g.controls, state.num_qubits)
    return StateVector(amps)


def apply_gates(amps: np.ndarray, gates: Iterable[GateOp], num_qubits: int) -> np.ndarray:
    """Batched gate sequence on raw amplitude arrays (leading axes are batch)."""
    for g in gates:
        _check_indices(g, num_qubits)
        amps = apply_matrix(amps, g.unitary(), g.targets, g.controls, num_qubits)
    return amps


def run(state: StateVector, gates: Iterable[GateOp]) -> StateVector:
    return StateVector(apply_gates(state.amplitudes, gates, state.num_qubits))


# -- ansatz -----------------------------------------------------------------

ENTANGLERS = ("cz_ring", "cnot_ring", "cnot_chain")

@dataclass(frozen=True)
class AnsatzSpec:
    """Hardware-efficient ansatz: d layers of [Ry, Rz, Ry] per qubit + entangler."""

    num_qubits: int
    layers: int
    entangler: str = "cnot_ring"

    def __post_init__(self):
        if self.num_qubits < 1 or self.layers < 1:
            raise ValueError("ansatz needs at least one qubit and one layer")
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"unknown entangler {self.entangler!r}")

    @property
    def parameter_count(self) -> int:
        return 3 * self.num_qubits * self.layers

    def gates(self, params: Sequence[float], qubits: Sequence[int] | None = None) -> list[GateOp]:
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.parameter_count:
            raise ValueError(f"expected {self.parameter_count} parameters, got {params.size}")
        n = self.num_qubits
        qubits = list(range(n)) if qubits is None else list(qubits)
        if len(qubits) != n:
            raise ValueError(f"ansatz acts on {n} qubits, got {len(qubits)} indices")
        theta = params.reshape(self.layers, n, 3)
        out: list[GateOp] = []
        for layer in theta:
            for q, (a, b, c) in zip(qubits, layer):
                out += [GateOp("Ry", (q,), angle=a), GateOp("Rz", (q,), angle=b), GateOp("Ry", (q,), angle=c)]
            out += self._entangler(qubits)
        return out

    def _entangler(self, qubits: list[int]) -> list[GateOp]:
        n = len(qubits)
        if n == 1:
            return []
        if self.entangler == "cnot_chain":
            return [GateOp("CNOT", (qubits[i + 1],), (qubits[i],)) for i in range(n - 1)]
        if self.entangler == "cnot_ring":
            return [GateOp("CNOT", (qubits[(i + 1) % n],), (qubits[i],)) for i in range(n)]
        if n == 2:
            # the ring on two qubits would apply the same CZ twice
            return [GateOp("CZ", (qubits[1],), (qubits[0],))]
        return [GateOp("CZ", (qubits[(i + 1) % n],), (qubits[i],)) for i in range(n)]


def apply_ansatz(state: StateVector, spec: AnsatzSpec, params: Sequence[float],
                 system_qubits: Sequence[int] | None = None) -> StateVector:
    return run(state, spec.gates(params, system_qubits))


# -- state preparation -------------------------------------------------------

@dataclass(frozen=True)
class BVector:
    """Right-hand-side state |b⟩: either uniform |+⟩^n or explicit amplitudes."""

    num_qubits: int
    amplitudes: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def uniform(cls, n: int) -> "BVector":
        return cls(n)

    @classmethod
    def from_amplitudes(cls, values) -> "BVector":
        b = np.asarray(values, dtype=complex).reshape(-1)
        dim = b.size
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"|b> dimension {dim} is not a power of two >= 2")
        if abs(np.linalg.norm(b) - 1) > NORM_ATOL:
            raise ValueError(f"|b> is not normalised (norm {np.linalg.norm(b):.3g})")
        b = b.copy()
        b.setflags(write=False)
        return cls(dim.bit_length() - 1, b)

    @property
    def is_uniform(self) -> bool:
        return self.amplitudes is None

    def vector(self) -> np.ndarray:
        if self.amplitudes is None:
            dim = 1 << self.num_qubits
            return np.full(dim, dim ** -0.5, dtype=complex)
        return np.array(self.amplitudes)


def complete_unitary(b: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the normalised vector b."""
    b = np.asarray(b, dtype=complex).reshape(-1)
    dim = b.size
    # Householder reflection mapping e_0 to b (up to the phase we fix below)
    phase = b[0] / abs(b[0]) if abs(b[0]) > 1e-15 else 1.0
    v = b / phase
    w = v.copy()
    w[0] -= 1.0
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        U = np.eye(dim, dtype=complex)
    else:
        w /= nw
        U = np.eye(dim, dtype=complex) - 2.0 * np.outer(w, w.conj())
    return U * phase


def state_prep_gates(b: BVector, qubits: Sequence[int] | None = None) -> list[GateOp]:
    n = b.num_qubits
    qubits = tuple(range(n)) if qubits is None else tuple(qubits)
    if b.is_uniform:
        return [GateOp("H", (q,)) for q in qubits]
    return [GateOp("DenseUnitary", qubits, matrix=complete_unitary(b.amplitudes))]


def dagger(gates: Sequence[GateOp]) -> list[GateOp]:
    return [g.dagger() for g in reversed(gates)]


# -- measurement -------------------------------------------------------------

def expectation_z(state: StateVector, qubit: int) -> float:
    m = state.num_qubits
    if not 0 <= qubit < m:
        raise IndexError(f"qubit {qubit} out of range for {m} qubits")
    probs = np.abs(state.amplitudes.reshape((2,) * m)) ** 2
    probs = np.moveaxis(probs, qubit, 0).reshape(2, -1)
    return float(probs[0].sum() - probs[1].sum())


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"size mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
