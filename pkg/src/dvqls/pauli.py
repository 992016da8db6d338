"""Pauli strings and the Pauli-basis (LCU) decomposition of dense matrices.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
matrix index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_DENSE_QUBITS = 12
ZERO_CUTOFF = 1e-14
DEFAULT_EPSILON = 0.01

_ORDER = {"I": 0, "X": 1, "Y": 2, "Z": 3}
_SYMBOLS = "IXYZ"

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit product table: (a, b) -> (phase, c) with a·b = phase·c
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


class DimensionError(ValueError):
    """Matrix shape is unsupported (non-square, not a power of two, too large)."""


@dataclass(frozen=True, order=False)
class PauliString:
    """An n-qubit tensor product of I, X, Y, Z."""

    axes: str

    def __post_init__(self):
        axes = str(self.axes).upper()
        if not axes:
            raise ValueError("a Pauli string needs at least one qubit")
        bad = set(axes) - set(_SYMBOLS)
        if bad:
            raise ValueError(f"invalid Pauli symbols {sorted(bad)} in {self.axes!r}")
        object.__setattr__(self, "axes", axes)

    @property
    def num_qubits(self) -> int:
        return len(self.axes)

    def __str__(self) -> str:
        return self.axes

    def __len__(self) -> int:
        return len(self.axes)

    def sort_key(self) -> tuple[int, ...]:
        return tuple(_ORDER[a] for a in self.axes)

    @cached_property
    def x_mask(self) -> int:
        """Bit mask of the qubits flipped by this string (X or Y factors)."""
        n = self.num_qubits
        return sum(1 << (n - 1 - q) for q, a in enumerate(self.axes) if a in "XY")

    @cached_property
    def z_mask(self) -> int:
        n = self.num_qubits
        return sum(1 << (n - 1 - q) for q, a in enumerate(self.axes) if a in "ZY")

    @cached_property
    def y_count(self) -> int:
        return self.axes.count("Y")

    @cached_property
    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """(source, phase) with (P ψ)[i] = phase[i] · ψ[source[i]].

        Uses P|s⟩ = i^{#Y} · (−1)^{popcount(s & zmask)} |s ⊕ xmask⟩.
        """
        dim = 1 << self.num_qubits
        idx = np.arange(dim)
        source = idx ^ self.x_mask
        parity = _popcount(source & self.z_mask) & 1
        phase = (1j ** self.y_count) * (1 - 2 * parity)
        return source, phase.astype(complex)

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Apply the string to amplitudes along the last axis."""
        source, phase = self.action
        return amplitudes[..., source] * phase


def _popcount(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    count = np.zeros_like(values)
    while np.any(values):
        count += values & 1
        values = values >> 1
    return count


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    """Dense matrix of a Pauli string (Kronecker product in axes order)."""
    p = PauliString(str(p))
    if p.num_qubits > MAX_DENSE_QUBITS:
        raise DimensionError(f"refusing to materialise a {p.num_qubits}-qubit dense matrix")
    out = np.ones((1, 1), dtype=complex)
    for a in p.axes:
        out = np.kron(out, _SINGLE[a])
    return out


def pauli_product(p: PauliString | str, q: PauliString | str) -> tuple[complex, PauliString]:
    """Return (phase, r) such that p·q = phase·r."""
    p, q = PauliString(str(p)), PauliString(str(q))
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    phase: complex = 1
    out = []
    for a, b in zip(p.axes, q.axes):
        f, c = _PRODUCT[(a, b)]
        phase *= f
        out.append(c)
    return complex(phase), PauliString("".join(out))


@dataclass(frozen=True)
class LCUDecomposition:
    """A = Σ c_l A_l with Pauli-string unitaries, canonically ordered."""

    num_qubits: int
    terms: tuple[tuple[complex, PauliString], ...]
    source_norm: float
    full_count: int | None = field(default=None, compare=False)

    def __post_init__(self):
        terms = tuple((complex(c), PauliString(str(p))) for c, p in self.terms)
        seen = set()
        for c, p in terms:
            if p.num_qubits != self.num_qubits:
                raise ValueError(f"term {p} does not act on {self.num_qubits} qubits")
            if p.axes in seen:
                raise ValueError(f"duplicate Pauli string {p}")
            if c == 0:
                raise ValueError(f"zero coefficient for {p}")
            seen.add(p.axes)
        object.__setattr__(self, "terms", tuple(sorted(terms, key=_term_key)))
        if self.full_count is None:
            object.__setattr__(self, "full_count", len(terms))

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=complex)

    @property
    def operators(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    def to_json(self) -> list[dict]:
        return [{"pauli": p.axes, "re": c.real, "im": c.imag} for c, p in self.terms]

    @classmethod
    def from_json(cls, items: Iterable[dict], source_norm: float | None = None) -> "LCUDecomposition":
        terms = [(complex(d["re"], d.get("im", 0.0)), PauliString(d["pauli"])) for d in items]
        if not terms:
            raise ValueError("empty decomposition")
        norm = float(np.linalg.norm([c for c, _ in terms])) if source_norm is None else source_norm
        return cls(len(terms[0][1]), tuple(terms), norm)


def _term_key(term: tuple[complex, PauliString]):
    c, p = term
    return (-abs(c), p.sort_key())


def _num_qubits_of(matrix: np.ndarray) -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
    dim = matrix.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise DimensionError(f"dimension {dim} is not a power of two >= 2")
    n = dim.bit_length() - 1
    if n > MAX_DENSE_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
    return n


def pauli_coefficient_tensor(matrix: np.ndarray) -> np.ndarray:
    """All 4^n Pauli coefficients as a tensor of shape (4,)*n, axis order I, X, Y, Z.

    Each qubit's (row bit, column bit) pair is folded into a Pauli index with
    the 2×2 block rule, one qubit at a time: O(n·4^n) work in total.
    """
    A = np.asarray(matrix, dtype=complex)
    n = _num_qubits_of(A)
    # (r0..r_{n-1}, c0..c_{n-1}) -> (r0, c0, r1, c1, ...)
    t = A.reshape((2,) * (2 * n))
    perm = [ax for q in range(n) for ax in (q, n + q)]
    t = t.transpose(perm).reshape((4,) * n)
    # rows: I, X, Y, Z; columns: block entries 00, 01, 10, 11
    fold = 0.5 * np.array(
        [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1j, -1j, 0], [1, 0, 0, -1]], dtype=complex
    )
    for q in range(n):
        t = np.moveaxis(np.tensordot(fold, t, axes=([1], [q])), 0, q)
    return t


def decompose(matrix: np.ndarray) -> LCUDecomposition:
    """Exact Pauli decomposition; coefficient of P is trace(P·A)/2^n."""
    coeffs = pauli_coefficient_tensor(matrix)
    n = coeffs.ndim
    flat = coeffs.reshape(-1)
    norm = float(np.linalg.norm(flat))
    keep = np.flatnonzero(np.abs(flat) > ZERO_CUTOFF)
    terms = tuple((complex(flat[i]), PauliString(_label(i, n))) for i in keep)
    return LCUDecomposition(n, terms, norm)


def _label(index: int, n: int) -> str:
    out = []
    for _ in range(n):
        out.append(_SYMBOLS[index & 3])
        index >>= 2
    return "".join(reversed(out))


def prune(dec: LCUDecomposition, epsilon: float = DEFAULT_EPSILON) -> LCUDecomposition:
    """Keep the terms with |c| >= epsilon · source_norm."""
    if not 0 <= epsilon < 1:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if epsilon == 0:
        return dec
    cut = epsilon * dec.source_norm
    kept = tuple((c, p) for c, p in dec.terms if abs(c) >= cut)
    return LCUDecomposition(dec.num_qubits, kept, dec.source_norm, full_count=dec.full_count)


def reconstruct(dec: LCUDecomposition) -> np.ndarray:
    if dec.num_qubits > MAX_DENSE_QUBITS:
        raise DimensionError(f"{dec.num_qubits} qubits exceeds the dense limit")
    dim = 1 << dec.num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    rows = np.arange(dim)
    for c, p in dec.terms:
        source, phase = p.action
        out[rows, source] += c * phase
    return out


def load_matrix(path) -> np.ndarray:
    """Read the {"n", "real", "imag"} JSON matrix format."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return matrix_from_json(doc, source=str(path))


def matrix_from_json(doc: dict, source: str = "<matrix>") -> np.ndarray:
    if not isinstance(doc, dict) or "real" not in doc:
        raise ValueError(f"{source}: missing required field 'real'")
    try:
        real = np.asarray(doc["real"], dtype=float)
        imag = np.asarray(doc.get("imag", np.zeros_like(real)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{source}: fields 'real'/'imag' must be numeric 2-D arrays ({exc})") from exc
    if real.shape != imag.shape:
        raise ValueError(f"{source}: 'real' shape {real.shape} != 'imag' shape {imag.shape}")
    A = real + 1j * imag
    n = _num_qubits_of(A)
    if "n" in doc and int(doc["n"]) != n:
        raise ValueError(f"{source}: field 'n'={doc['n']} disagrees with matrix dimension {A.shape[0]}")
    return A


def matrix_to_json(matrix: np.ndarray) -> dict:
    A = np.asarray(matrix, dtype=complex)
    n = _num_qubits_of(A)
    return {"n": n, "real": A.real.tolist(), "imag": A.imag.tolist()}


def parse_strings(labels: Sequence[str]) -> list[PauliString]:
    return [PauliString(s) for s in labels]
