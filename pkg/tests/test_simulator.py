import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from dvqls import simulator as sim
from dvqls.simulator import (AnsatzSpec, BVector, GateOp, StateVector, apply_ansatz, apply_gate,
                             complete_unitary, expectation_z, inner_product, new_state, run,
                             state_prep_gates)

import oracles as orc


def basis(m, i):
    v = np.zeros(1 << m, dtype=complex)
    v[i] = 1
    return StateVector(v)


@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_new_state(m):
    s = new_state(m)
    assert s.amplitudes[0] == 1 and s.norm() == 1 and s.amplitudes.size == 1 << m


@pytest.mark.parametrize("m", [0, 25, -1])
def test_new_state_range(m):
    with pytest.raises(ValueError):
        new_state(m)


def test_state_is_read_only():
    s = new_state(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


def test_basic_gates():
    s = apply_gate(new_state(1), GateOp("H", (0,)))
    assert np.allclose(s.amplitudes, [2 ** -0.5, 2 ** -0.5])
    s = apply_gate(new_state(1), GateOp("Ry", (0,), angle=np.pi))
    assert np.allclose(s.amplitudes, [0, 1])
    s = apply_gate(basis(2, 2), GateOp("CNOT", (1,), (0,)))
    assert np.allclose(s.amplitudes, basis(2, 3).amplitudes)


def test_rotation_conventions():
    t = 0.731
    Y = orc.Y
    Z = orc.Z
    from scipy.linalg import expm
    assert np.allclose(sim.ry(t), expm(-0.5j * t * Y))
    assert np.allclose(sim.rz(t), expm(-0.5j * t * Z))


@pytest.mark.parametrize("kind, ref", [("H", orc.H), ("X", orc.X), ("Y", orc.Y), ("Z", orc.Z),
                                       ("S_dagger", np.diag([1, -1j]))])
def test_single_qubit_gate_matches_kron(kind, ref):
    rng = np.random.default_rng(0)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    for q in range(3):
        got = sim.apply_gates(v, [GateOp(kind, (q,))], 3)
        assert np.allclose(got, orc.on(3, q, ref) @ v)


def test_gate_validation():
    with pytest.raises(ValueError):
        GateOp("H", (0,), (0,))
    with pytest.raises(ValueError):
        GateOp("CNOT", (1,))
    with pytest.raises(ValueError):
        GateOp("Ry", (0,))
    with pytest.raises(ValueError):
        GateOp("T", (0,))
    with pytest.raises(ValueError):
        GateOp("DenseUnitary", (0,), matrix=np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        GateOp("DenseUnitary", (0, 1), matrix=np.eye(2))
    with pytest.raises(IndexError):
        apply_gate(new_state(2), GateOp("H", (2,)))


def test_controlled_dense_matches_explicit():
    rng = np.random.default_rng(1)
    P0, P1 = orc.P0, orc.P1
    for _ in range(20):
        U = unitary_group.rvs(4, random_state=rng)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        got = sim.apply_gates(v, [GateOp("DenseUnitary", (1, 2), (0,), matrix=U)], 3)
        CU = np.kron(P0, np.eye(4)) + np.kron(P1, U)
        assert np.max(np.abs(got - CU @ v)) < 1e-12


def test_dense_target_order():
    # targets (2, 0): the matrix's leading index belongs to qubit 2
    rng = np.random.default_rng(2)
    U = unitary_group.rvs(4, random_state=rng)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    got = sim.apply_gates(v, [GateOp("DenseUnitary", (2, 0), matrix=U)], 3)
    # reorder qubits to (2, 0, 1), apply U on the first two, restore
    fwd = v.reshape(2, 2, 2).transpose(2, 0, 1).reshape(-1)
    out = (np.kron(U, np.eye(2)) @ fwd).reshape(2, 2, 2)
    ref = out.transpose(1, 2, 0).reshape(-1)
    assert np.allclose(got, ref)


def test_norm_preserved_over_many_random_gates():
    rng = np.random.default_rng(3)
    m = 5
    s = new_state(m)
    kinds = ["H", "X", "Y", "Z", "S_dagger", "Ry", "Rz", "CNOT", "CZ"]
    for _ in range(1000):
        k = kinds[rng.integers(len(kinds))]
        q = rng.choice(m, size=2, replace=False)
        if k in ("CNOT", "CZ"):
            g = GateOp(k, (int(q[0]),), (int(q[1]),))
        elif k in ("Ry", "Rz"):
            g = GateOp(k, (int(q[0]),), angle=float(rng.uniform(-7, 7)))
        else:
            g = GateOp(k, (int(q[0]),))
        s = apply_gate(s, g)
    assert abs(s.norm() - 1) < 1e-9


def test_dagger_inverts():
    rng = np.random.default_rng(4)
    U = unitary_group.rvs(4, random_state=rng)
    gates = [GateOp("Ry", (0,), angle=0.3), GateOp("S_dagger", (1,)), GateOp("CZ", (1,), (0,)),
             GateOp("DenseUnitary", (0, 1), matrix=U), GateOp("Rz", (1,), (0,), angle=-1.1)]
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    w = sim.apply_gates(sim.apply_gates(v, gates, 2), sim.dagger(gates), 2)
    assert np.allclose(v, w)


@pytest.mark.parametrize("entangler", sim.ENTANGLERS)
@pytest.mark.parametrize("n, d", [(1, 1), (2, 2), (3, 2), (4, 1)])
def test_ansatz_matches_dense_oracle(entangler, n, d):
    spec = AnsatzSpec(n, d, entangler)
    theta = np.random.default_rng(n * 10 + d).uniform(-np.pi, np.pi, spec.parameter_count)
    got = apply_ansatz(new_state(n), spec, theta).amplitudes
    assert np.allclose(got, orc.ansatz_state(n, d, theta, entangler), atol=1e-12)


@pytest.mark.parametrize("n, d", [(1, 1), (2, 2), (3, 3), (4, 2)])
def test_ansatz_counts(n, d):
    spec = AnsatzSpec(n, d)
    assert spec.parameter_count == 3 * n * d
    gates = spec.gates(np.zeros(spec.parameter_count))
    one = sum(1 for g in gates if not g.controls)
    two = sum(1 for g in gates if g.controls)
    assert one == 3 * n * d
    assert two == (n * d if n >= 2 else 0)


def test_ansatz_zero_params_is_identity_on_zero_state():
    for ent in sim.ENTANGLERS:
        spec = AnsatzSpec(3, 2, ent)
        s = apply_ansatz(new_state(3), spec, np.zeros(18))
        assert np.allclose(s.amplitudes, new_state(3).amplitudes)


def test_ansatz_single_qubit_flip():
    s = apply_ansatz(new_state(1), AnsatzSpec(1, 1), [np.pi, 0, 0])
    assert abs(abs(s.amplitudes[1]) - 1) < 1e-12


def test_ansatz_errors():
    with pytest.raises(ValueError):
        AnsatzSpec(0, 1)
    with pytest.raises(ValueError):
        AnsatzSpec(2, 1, "star")
    with pytest.raises(ValueError):
        AnsatzSpec(2, 1).gates(np.zeros(5))


def test_ansatz_deterministic_across_threads():
    spec = AnsatzSpec(4, 4)
    theta = np.random.default_rng(5).uniform(-3, 3, spec.parameter_count)
    ref = apply_ansatz(new_state(4), spec, theta).amplitudes.tobytes()
    out = []
    threads = [threading.Thread(target=lambda: out.append(
        apply_ansatz(new_state(4), spec, theta).amplitudes.tobytes())) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(o == ref for o in out)


def test_bvector_uniform():
    s = run(new_state(2), state_prep_gates(BVector.uniform(2)))
    assert np.allclose(s.amplitudes, 0.5)


def test_bvector_e0_identity_action():
    b = BVector.from_amplitudes([1, 0, 0, 0])
    U = complete_unitary(b.amplitudes)
    assert np.allclose(U, np.eye(4))


@settings(max_examples=40)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_state_prep_random_b(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    b /= np.linalg.norm(b)
    bv = BVector.from_amplitudes(b)
    s = run(new_state(n), state_prep_gates(bv))
    assert abs(np.vdot(b, s.amplitudes) - 1) < 1e-10
    U = complete_unitary(b)
    assert np.allclose(U.conj().T @ U, np.eye(1 << n))


def test_bvector_unnormalised():
    with pytest.raises(ValueError):
        BVector.from_amplitudes([1, 1])
    with pytest.raises(ValueError):
        BVector.from_amplitudes([1, 0, 0])


def test_expectation_z():
    assert expectation_z(new_state(1), 0) == 1
    assert expectation_z(basis(1, 1), 0) == -1
    assert abs(expectation_z(apply_gate(new_state(1), GateOp("H", (0,))), 0)) < 1e-12
    # big-endian: qubit 0 is the most significant bit
    assert expectation_z(basis(2, 1), 0) == 1 and expectation_z(basis(2, 1), 1) == -1
    with pytest.raises(IndexError):
        expectation_z(new_state(1), 1)


def test_inner_product():
    plus = apply_gate(new_state(1), GateOp("H", (0,)))
    assert inner_product(plus, plus) == pytest.approx(1)
    assert inner_product(new_state(1), basis(1, 1)) == 0
    assert abs(inner_product(plus, new_state(1))) ** 2 == pytest.approx(0.5)
    with pytest.raises(ValueError):
        inner_product(new_state(1), new_state(2))


def test_batched_application_matches_single():
    rng = np.random.default_rng(6)
    batch = rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))
    gates = AnsatzSpec(3, 1).gates(rng.uniform(-3, 3, 9))
    got = sim.apply_gates(batch, gates, 3)
    for i in range(3):
        assert np.allclose(got[i], sim.apply_gates(batch[i], gates, 3))
