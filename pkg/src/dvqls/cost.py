"""Local VQLS cost assembled from Hadamard-test expectation values.

For A = Σ c_l A_l and the ansatz state |x⟩ the evaluation needs

    E   = Σ_j Σ_{l,k} c_l* c_k ⟨x| A_l U_b Z_j U_b† A_k |x⟩
    Psi = Σ_{l,k}     c_l* c_k ⟨x| A_l A_k |x⟩

and returns C = 1/2 − Re(E) / (2 n Re(Psi)).  Every (l, k, j) term is a task
run by the executor; ``method`` selects how a task is evaluated:

* ``"hadamard"``: two ancilla-controlled circuits (real and imaginary part),
  simulated gate by gate on n + 1 qubits;
* ``"direct"``: ⟨x|B|x⟩ by applying B to |x⟩ without the ancilla.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Sequence

import numpy as np

from . import simulator as sim
from .executor import ExecutionPlan, ExecutionStats, Executor, shared_executor
from .pauli import LCUDecomposition, PauliString, decompose, prune, DEFAULT_EPSILON

DENOMINATOR_FLOOR = 1e-12
IMAG_TOLERANCE = 1e-8
METHODS = ("hadamard", "direct")


class DegenerateDenominator(ArithmeticError):
    """Re(Psi) vanished: the operator is (near) singular on the current state."""


class ImaginaryResidual(ArithmeticError):
    pass


@dataclass(frozen=True)
class ProblemInstance:
    decomposition: LCUDecomposition
    b: sim.BVector
    ansatz: sim.AnsatzSpec
    label: str = ""

    def __post_init__(self):
        n = self.decomposition.num_qubits
        if self.b.num_qubits != n or self.ansatz.num_qubits != n:
            raise ValueError(
                f"qubit counts disagree: decomposition {n}, b {self.b.num_qubits}, "
                f"ansatz {self.ansatz.num_qubits}"
            )

    @property
    def n(self) -> int:
        return self.decomposition.num_qubits

    @property
    def L(self) -> int:
        return len(self.decomposition)

    @classmethod
    def from_system(cls, A: np.ndarray, rhs: np.ndarray, epsilon: float = DEFAULT_EPSILON,
                    layers: int | None = None, entangler: str = "cnot_ring", label: str = "") -> "ProblemInstance":
        dec = prune(decompose(A), epsilon)
        n = dec.num_qubits
        rhs = np.asarray(rhs, dtype=complex).reshape(-1)
        if rhs.size != 1 << n:
            raise ValueError(f"rhs length {rhs.size} does not match a {n}-qubit matrix")
        nrm = np.linalg.norm(rhs)
        if nrm == 0:
            raise ValueError("rhs is the zero vector")
        b_vec = rhs / nrm
        if np.allclose(b_vec, b_vec[0]) and abs(b_vec[0].imag) < 1e-15 and b_vec[0].real > 0:
            b = sim.BVector.uniform(n)
        else:
            b = sim.BVector.from_amplitudes(b_vec)
        ansatz = sim.AnsatzSpec(n, n if layers is None else layers, entangler)
        return cls(dec, b, ansatz, label)


# -- task enumeration ----------------------------------------------------------

@lru_cache(maxsize=32)
def enumerate_tasks(n: int, L: int, dedup: bool = False) -> ExecutionPlan:
    """(l, k) row-major; per pair the denominator task, then j = 0..n-1."""
    if n < 1 or L < 1:
        raise ValueError("need n >= 1 and L >= 1")
    l, k = np.divmod(np.arange(L * L), L)
    if dedup:
        keep = l <= k
        l, k = l[keep], k[keep]
    per = n + 1
    j = np.tile(np.arange(-1, n), l.size)
    return ExecutionPlan(n, L, np.repeat(l, per), np.repeat(k, per), j, dedup=dedup)


def circuit_count(n: int, L: int) -> int:
    return 2 * (n + 1) * L * L


# -- circuit pieces --------------------------------------------------------

def pauli_gates(p: PauliString, offset: int = 0) -> list[sim.GateOp]:
    return [sim.GateOp(a, (q + offset,)) for q, a in enumerate(p.axes) if a != "I"]


def task_factors(instance: ProblemInstance, l: int, k: int, j: int | None,
                 offset: int = 0) -> list[sim.GateOp]:
    """Gates of B in application order: A_k, U_b†, Z_j, U_b, A_l (or A_k, A_l)."""
    ops = instance.decomposition.operators
    gates = pauli_gates(ops[k], offset)
    if j is not None:
        qubits = tuple(range(offset, offset + instance.n))
        prep = sim.state_prep_gates(instance.b, qubits)
        gates += sim.dagger(prep)
        gates.append(sim.GateOp("Z", (j + offset,)))
        gates += prep
    gates += pauli_gates(ops[l], offset)
    return gates


def _ansatz_state(instance: ProblemInstance, theta) -> np.ndarray:
    state = sim.apply_ansatz(sim.new_state(instance.n), instance.ansatz, theta)
    return np.array(state.amplitudes)


def _check_unitary_factors(factors: Sequence[sim.GateOp]):
    for g in factors:
        if not isinstance(g, sim.GateOp):
            raise TypeError(f"factor {g!r} is not a GateOp")


def hadamard_test(factors: Sequence[sim.GateOp], theta, instance: ProblemInstance, part: str = "re") -> float:
    """Simulate one Hadamard-test circuit; ``factors`` act on system qubits 0..n-1."""
    if part not in ("re", "im"):
        raise ValueError("part must be 're' or 'im'")
    _check_unitary_factors(factors)
    n = instance.n
    m = n + 1
    state = sim.new_state(m)
    state = sim.run(state, instance.ansatz.gates(theta, range(1, m)))
    state = sim.apply_gate(state, sim.GateOp("H", (0,)))
    return _hadamard_finish(state.amplitudes, factors, m, part == "im")


def _hadamard_finish(prepared: np.ndarray, factors: Sequence[sim.GateOp], m: int, imaginary: bool) -> float:
    amps = prepared
    if imaginary:
        amps = sim.apply_matrix(amps, sim._SDG, (0,), (), m)
    shifted = [sim.GateOp(g.kind, tuple(t + 1 for t in g.targets), (0,) + tuple(c + 1 for c in g.controls),
                          g.angle, g.matrix) for g in factors]
    amps = sim.apply_gates(amps, shifted, m)
    amps = sim.apply_matrix(amps, sim._H, (0,), (), m)
    return sim.expectation_z(sim.StateVector(amps), 0)


def direct_expectation(factors: Sequence[sim.GateOp], theta, instance: ProblemInstance) -> complex:
    """⟨x|B|x⟩ with B applied directly to |x(θ)⟩ (no ancilla)."""
    _check_unitary_factors(factors)
    x = _ansatz_state(instance, theta)
    y = sim.apply_gates(x, factors, instance.n)
    return complex(np.vdot(x, y))


# -- kernels ----------------------------------------------------------------

class HadamardKernel:
    """Evaluates each task with its real-part and imaginary-part circuits."""

    def __init__(self, instance: ProblemInstance, x: np.ndarray):
        self.instance = instance
        self.coefficients = instance.decomposition.coefficients
        n = instance.n
        self.m = n + 1
        # ancilla (qubit 0) after its first H, system register holding |x⟩
        plus = sim.apply_matrix(np.array([1, 0], dtype=complex), sim._H, (0,), (), 1)
        ready = np.kron(plus, x)
        # Re circuit and Im circuit (S† on the ancilla) as a batch of two
        self.prepared = np.stack([ready, sim.apply_matrix(ready, sim._SDG, (0,), (), self.m)])

    def evaluate(self, l, k, j) -> np.ndarray:
        out = np.empty(len(l), dtype=complex)
        for i, (li, ki, ji) in enumerate(zip(l, k, j)):
            factors = task_factors(self.instance, int(li), int(ki), None if ji < 0 else int(ji), offset=1)
            controlled = [g.controlled(0) for g in factors]
            amps = sim.apply_gates(self.prepared, controlled, self.m)
            amps = sim.apply_matrix(amps, sim._H, (0,), (), self.m)
            p = np.abs(amps.reshape(2, 2, -1)) ** 2
            z = p[:, 0].sum(axis=1) - p[:, 1].sum(axis=1)
            out[i] = complex(z[0], z[1])
        return out


class DirectKernel:
    """Batched ⟨A_l x| M_j |A_k x⟩ with M_j = U_b Z_j U_b† (identity for Psi)."""

    chunk_elements = 1 << 21

    def __init__(self, instance: ProblemInstance, x: np.ndarray):
        n = instance.n
        self.coefficients = instance.decomposition.coefficients
        ops = instance.decomposition.operators
        Y = np.stack([p.apply(x) for p in ops])                     # (L, N)
        prep = sim.state_prep_gates(instance.b)
        T = sim.apply_gates(Y, sim.dagger(prep), n)
        signs = 1 - 2 * ((np.arange(1 << n)[None, :] >> (n - 1 - np.arange(n)[:, None])) & 1)
        W = sim.apply_gates(signs[:, None, :] * T[None, :, :], prep, n)   # (n, L, N)
        self.left = Y.conj()
        self.right = np.concatenate([Y[None], W])                   # index j + 1
        self.dim = 1 << n

    def evaluate(self, l, k, j) -> np.ndarray:
        l, k, j = np.asarray(l), np.asarray(k), np.asarray(j)
        out = np.empty(l.size, dtype=complex)
        step = max(1, self.chunk_elements // self.dim)
        for s in range(0, l.size, step):
            sl = slice(s, s + step)
            out[sl] = np.einsum("ij,ij->i", self.left[l[sl]], self.right[j[sl] + 1, k[sl]])
        return out


@dataclass(frozen=True)
class KernelSpecification:
    """What a worker needs to rebuild a kernel: problem data and the state."""

    instance: ProblemInstance
    method: str
    theta: np.ndarray | None = field(default=None, compare=False)
    state: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @classmethod
    def from_theta(cls, instance: ProblemInstance, theta, method: str = "direct"):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != instance.ansatz.parameter_count:
            raise ValueError(f"expected {instance.ansatz.parameter_count} parameters, got {theta.size}")
        return cls(instance, method, theta=theta)

    def build(self):
        x = self.state if self.state is not None else _ansatz_state(self.instance, self.theta)
        if self.method == "hadamard":
            return HadamardKernel(self.instance, x)
        return DirectKernel(self.instance, x)


# -- cost ---------------------------------------------------------------------

@dataclass
class CostBreakdown:
    E: complex
    Psi: complex
    cost: float
    circuit_count: int
    wall_time: float
    stats: ExecutionStats | None = None

    @property
    def cost_expanded(self) -> float:
        """The 1 − (1/n)Σ_j … form; always twice ``cost``."""
        return 2.0 * self.cost


def _finish(instance: ProblemInstance, E: complex, Psi: complex, stats, t0: float,
            validate: bool) -> CostBreakdown:
    if validate:
        scale = max(1.0, abs(E), abs(Psi))
        if abs(E.imag) > IMAG_TOLERANCE * scale or abs(Psi.imag) > IMAG_TOLERANCE * scale:
            raise ImaginaryResidual(f"Im(E)={E.imag:.3e}, Im(Psi)={Psi.imag:.3e}")
    if Psi.real <= DENOMINATOR_FLOOR:
        raise DegenerateDenominator(f"Re(Psi) = {Psi.real:.3e}")
    cost = 0.5 - 0.5 * E.real / (instance.n * Psi.real)
    return CostBreakdown(E, Psi, float(cost), stats.circuits_executed if stats else 0,
                         time.perf_counter() - t0, stats)


def evaluate_cost(instance: ProblemInstance, theta, executor: Executor | None = None,
                  method: str = "direct", dedup: bool = False, validate: bool = False) -> CostBreakdown:
    t0 = time.perf_counter()
    plan = enumerate_tasks(instance.n, instance.L, dedup)
    spec = KernelSpecification.from_theta(instance, theta, method)
    E, Psi, stats = (executor or shared_executor()).execute(plan, spec)
    return _finish(instance, E, Psi, stats, t0, validate)


def cost_for_state(x, instance: ProblemInstance, executor: Executor | None = None,
                   method: str = "direct", validate: bool = False) -> float:
    """The same cost with |x(θ)⟩ replaced by an explicit normalised state."""
    x = np.asarray(x.amplitudes if isinstance(x, sim.StateVector) else x, dtype=complex).reshape(-1)
    if x.size != 1 << instance.n:
        raise ValueError(f"state has {x.size} amplitudes, expected {1 << instance.n}")
    if abs(np.linalg.norm(x) - 1) > 1e-8:
        raise ValueError(f"state is not normalised (norm {np.linalg.norm(x):.6g})")
    t0 = time.perf_counter()
    plan = enumerate_tasks(instance.n, instance.L)
    spec = KernelSpecification(instance, method, state=x)
    E, Psi, stats = (executor or shared_executor()).execute(plan, spec)
    return _finish(instance, E, Psi, stats, t0, validate).cost


def solution_state(instance: ProblemInstance, theta) -> np.ndarray:
    return _ansatz_state(instance, theta)


def fidelity(psi, phi) -> float:
    a = np.asarray(psi.amplitudes if isinstance(psi, sim.StateVector) else psi, dtype=complex).reshape(-1)
    b = np.asarray(phi.amplitudes if isinstance(phi, sim.StateVector) else phi, dtype=complex).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1) > 1e-8:
            raise ValueError("fidelity needs normalised states")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def global_cost_dense(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    """Diagnostic 1 − |⟨b|A x⟩|² / ⟨x|A†A|x⟩ from dense linear algebra."""
    Ax = np.asarray(A) @ np.asarray(x)
    return float(1.0 - abs(np.vdot(b, Ax)) ** 2 / np.vdot(Ax, Ax).real)


class CostFunction:
    """θ ↦ cost with evaluation counting and optional JSON-lines streaming."""

    def __init__(self, instance: ProblemInstance, executor: Executor | None = None,
                 method: str = "direct", dedup: bool = False, stream: IO[str] | None = None):
        self.instance = instance
        self.executor = executor
        self.method = method
        self.dedup = dedup
        self.stream = stream
        self.evaluations = 0
        self.circuits = 0
        self.wall_time = 0.0
        self.last: CostBreakdown | None = None

    def __call__(self, theta) -> float:
        res = evaluate_cost(self.instance, theta, self.executor, self.method, self.dedup)
        self.evaluations += 1
        self.circuits += res.circuit_count
        self.wall_time += res.wall_time
        self.last = res
        if self.stream is not None:
            self.stream.write(json.dumps({
                "eval_index": self.evaluations - 1,
                "cost": res.cost,
                "wall_time": res.wall_time,
                "circuit_count": res.circuit_count,
            }) + "\n")
        return res.cost
