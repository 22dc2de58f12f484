"""Tests for the statevector kernels, costs and adjoint gradients."""
import numpy as np
import pytest
import scipy.linalg

from conftest import hva, random_theta
from heisenberg_vqe.core.ansatz import build_hva
from heisenberg_vqe.core.errors import FidelityError, SimulationError
from heisenberg_vqe.core.lattice import (DimerCovering, GridEmbedding, SpinGraph, build_chain,
                                         edge_coloring)
from heisenberg_vqe.core.simulator import (apply_1q, apply_2q, apply_heis, apply_swap, dump_state,
                                           energy, energy_and_gradient, exact_evolution, fidelity,
                                           fsim_matrix, heis_matrix, lift_to_register, load_state,
                                           prepare_covering, rz_matrix, run, spin_observables)
from heisenberg_vqe.core.spectra import dense_hamiltonian, low_spectrum

RNG = np.random.default_rng(5150)

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def random_state(n):
    state = RNG.normal(size=1 << n) + 1j * RNG.normal(size=1 << n)
    return state / np.linalg.norm(state)


def full_operator(local, qubits, n):
    """Dense operator of ``local`` (basis bit(q0) + 2 bit(q1) + ...) on an n-qubit register."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    mask = sum(1 << q for q in qubits)
    for col in range(dim):
        loc_in = sum(((col >> q) & 1) << k for k, q in enumerate(qubits))
        for loc_out in range(1 << len(qubits)):
            row = (col & ~mask) | sum(((loc_out >> k) & 1) << q for k, q in enumerate(qubits))
            full[row, col] += local[loc_out, loc_in]
    return full


def finite_difference(circuit, theta, graph, h=1e-5, **kwargs):
    grad = np.zeros_like(theta)
    for j in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[j] = h
        up = energy_and_gradient(circuit, theta + step, graph, **kwargs).energy
        down = energy_and_gradient(circuit, theta - step, graph, **kwargs).energy
        grad[j] = (up - down) / (2 * h)
    return grad


def assert_gradient_matches(circuit, theta, graph, **kwargs):
    exact = energy_and_gradient(circuit, theta, graph, **kwargs).gradient
    numeric = finite_difference(circuit, theta, graph, **kwargs)
    assert np.linalg.norm(exact - numeric) <= 1e-6 * max(1.0, np.linalg.norm(numeric))


class TestKernels:
    def test_singlet_and_triplets(self):
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(prepare_covering([(0, 1)], 2), [0, s, -s, 0], atol=1e-15)
        np.testing.assert_allclose(prepare_covering([(0, 1)], 2, ((0, 1), 0)), [0, s, s, 0],
                                   atol=1e-15)
        np.testing.assert_allclose(prepare_covering([(0, 1)], 2, ((0, 1), 1)), [1, 0, 0, 0])
        np.testing.assert_allclose(prepare_covering([(0, 1)], 2, ((0, 1), -1)), [0, 0, 0, 1])

    def test_covering_rejects_overlap(self):
        with pytest.raises(SimulationError):
            prepare_covering([(0, 1), (1, 2)], 4)
        with pytest.raises(SimulationError):
            prepare_covering([(0, 1)], 2, ((1, 2), 0))

    @pytest.mark.parametrize("alpha", [0.0, 0.3, -1.7, np.pi, 5.0])
    def test_heis_is_exponential_of_exchange(self, alpha):
        exchange = 0.25 * sum(np.kron(P, P) for P in PAULI.values())
        expected = scipy.linalg.expm(-1j * alpha * (exchange + 0.25 * np.eye(4)))
        np.testing.assert_allclose(heis_matrix(alpha), expected, atol=1e-12)

    def test_two_qubit_kernel_matches_dense(self):
        generator = RNG.normal(size=(4, 4))
        unitary = scipy.linalg.expm(1j * (generator + generator.T))
        state = random_state(4)
        expected = full_operator(unitary, (3, 1), 4) @ state
        np.testing.assert_allclose(apply_2q(state.copy(), (3, 1), unitary), expected, atol=1e-12)

    def test_heis_and_swap_kernels(self):
        state = random_state(5)
        np.testing.assert_allclose(apply_heis(state.copy(), (4, 0), 0.9),
                                   full_operator(heis_matrix(0.9), (4, 0), 5) @ state, atol=1e-12)
        swap = heis_matrix(np.pi) * 1j
        np.testing.assert_allclose(apply_swap(state.copy(), (2, 3)),
                                   full_operator(swap, (2, 3), 5) @ state, atol=1e-12)

    def test_single_qubit_kernel(self):
        state = random_state(3)
        np.testing.assert_allclose(apply_1q(state.copy(), 1, "RZ", 0.4),
                                   full_operator(rz_matrix(0.4), (1,), 3) @ state, atol=1e-12)
        np.testing.assert_allclose(apply_1q(state.copy(), 2, "Y"),
                                   full_operator(PAULI["Y"], (2,), 3) @ state, atol=1e-12)
        with pytest.raises(SimulationError):
            apply_1q(state, 3, "X")
        with pytest.raises(SimulationError):
            apply_1q(state, 0, "RZ")

    def test_norm_survives_long_gate_sequences(self):
        state = random_state(8)
        for _ in range(3000):
            a, b = (int(q) for q in RNG.choice(8, size=2, replace=False))
            kind = RNG.integers(4)
            if kind == 0:
                state = apply_heis(state, (a, b), RNG.uniform(-2 * np.pi, 2 * np.pi))
            elif kind == 1:
                state = apply_swap(state, (a, b))
            elif kind == 2:
                state = apply_2q(state, (a, b), fsim_matrix(*RNG.uniform(-np.pi, np.pi, 2)))
            else:
                state = apply_1q(state, a, "RZ", RNG.uniform(-np.pi, np.pi))
        assert abs(np.linalg.norm(state) - 1.0) < 1e-12

    def test_heis_composes_additively(self):
        for alpha, beta in RNG.uniform(-3 * np.pi, 3 * np.pi, size=(50, 2)):
            np.testing.assert_allclose(heis_matrix(alpha) @ heis_matrix(beta),
                                       heis_matrix(alpha + beta), atol=1e-12)

    def test_heis_full_turn_flips_sign(self):
        for alpha in RNG.uniform(-3 * np.pi, 3 * np.pi, 50):
            np.testing.assert_allclose(heis_matrix(alpha + 2 * np.pi), -heis_matrix(alpha),
                                       atol=1e-12)


def test_energy_matches_dense_matrix(chain6):
    state = random_state(6)
    expected = np.vdot(state, dense_hamiltonian(chain6) @ state).real
    assert energy(state, chain6) == pytest.approx(expected, abs=1e-12)


def test_two_sites_need_no_cycles():
    graph = build_chain(2)
    state = run(hva(graph, 0), np.zeros(0))
    assert energy(state, graph) == pytest.approx(-0.75, abs=1e-14)
    assert fidelity(state, low_spectrum(graph).ground_vectors) == pytest.approx(1.0, abs=1e-12)


def test_run_rejects_wrong_theta(chain4):
    with pytest.raises(SimulationError):
        run(hva(chain4, 2), np.zeros(3))


def test_cycles_conserve_total_spin(chain6):
    circuit = hva(chain6, 3)
    obs = spin_observables(run(circuit, random_theta(circuit, RNG)))
    assert obs.sz == pytest.approx(0.0, abs=1e-12)
    assert obs.s2 == pytest.approx(0.0, abs=1e-10)
    triplet = circuit.with_triplet(circuit.covering[0], 1)
    obs = spin_observables(run(triplet, random_theta(triplet, RNG)), penalty=True)
    assert obs.sz == pytest.approx(1.0, abs=1e-12)
    assert obs.s2 == pytest.approx(2.0, abs=1e-10)
    assert obs.penalty == pytest.approx(0.0, abs=1e-12)


def test_triplet_energy_independent_of_magnetization(chain6):
    circuit = hva(chain6, 3)
    for pair in circuit.covering:
        theta = random_theta(circuit, RNG)
        energies = [energy(run(circuit.with_triplet(pair, m), theta), chain6) for m in (-1, 0, 1)]
        assert max(energies) - min(energies) < 1e-12


def test_bond_observables_bounded_by_infidelity(chain6):
    ground = low_spectrum(chain6)
    assert ground.degeneracy == 1
    psi0 = ground.ground_vectors[0]
    bonds = [SpinGraph(n_sites=6, edges=(edge,)) for edge in chain6.edges + ((0, 3),)]
    for eps in (1e-4, 1e-3, 1e-2, 0.1, 0.3):
        psi = psi0 + eps * random_state(6)
        psi /= np.linalg.norm(psi)
        infidelity = max(0.0, 1.0 - fidelity(psi, ground.ground_vectors))
        for bond in bonds:
            # |S_i.S_j| has norm 3/4, inside the unit ball.
            assert abs(energy(psi, bond) - energy(psi0, bond)) <= 4 * np.sqrt(infidelity) + 1e-12


class TestGradients:
    def test_energy(self, chain6):
        circuit = hva(chain6, 2)
        assert_gradient_matches(circuit, random_theta(circuit, RNG), chain6)

    def test_one_parameter_per_layer(self, kagome12):
        circuit = hva(kagome12, 2, mode="OPS")
        assert_gradient_matches(circuit, random_theta(circuit, RNG), kagome12)

    def test_penalty_with_triplet(self, chain6):
        circuit = hva(chain6, 2)
        circuit = circuit.with_triplet(circuit.covering[1], 0)
        assert_gradient_matches(circuit, random_theta(circuit, RNG), chain6,
                                cost="energy+penalty", penalty_weight=0.7)

    def test_infidelity(self, chain6):
        circuit = hva(chain6, 2)
        reference = low_spectrum(chain6).ground_vectors
        assert_gradient_matches(circuit, random_theta(circuit, RNG), chain6,
                                cost="infidelity", reference=reference)

    def test_stationary_at_zero(self, chain4):
        circuit = hva(chain4, 1)
        result = energy_and_gradient(circuit, np.zeros(circuit.M), chain4)
        np.testing.assert_allclose(result.gradient, 0.0, atol=1e-12)


class TestSwapNetwork:
    """Four sites on a 1x4 line; the (0, 2) bond is reached through SWAPs."""

    graph = SpinGraph(n_sites=4, edges=((0, 1), (0, 2), (1, 2), (2, 3)))
    embedding = GridEmbedding(
        grid_shape=(1, 4), site_to_qubit=(0, 1, 2, 3), aux_qubits=(),
        coords=((0, 0), (0, 1), (0, 2), (0, 3)),
        swap_schedule=(
            (("HEIS", (1, 2)),),
            (("SWAP", (0, 1)), ("HEIS", (2, 3))),
            (("HEIS", (1, 2)),),
            (("SWAP", (0, 1)),),
            (("HEIS", (0, 1)),),
        ))

    def circuit(self, p):
        return build_hva(self.graph, edge_coloring(self.graph), DimerCovering(((0, 1), (2, 3))),
                         p, embedding=self.embedding)

    def test_matches_direct_sequence(self):
        circuit = self.circuit(2)
        theta = random_theta(circuit, RNG)
        state = prepare_covering(((0, 1), (2, 3)), 4)
        for c in range(2):
            for j, pair in enumerate(((1, 2), (2, 3), (0, 2), (0, 1))):
                apply_heis(state, pair, theta[c * 4 + j])
        np.testing.assert_allclose(run(circuit, theta), state, atol=1e-12)

    def test_gradient(self):
        circuit = self.circuit(2)
        assert_gradient_matches(circuit, random_theta(circuit, RNG), self.graph)


def test_fidelity_checks(chain6):
    reference = low_spectrum(chain6).ground_vectors
    assert fidelity(reference[0], reference) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(FidelityError):
        fidelity(reference[0], 2 * reference)
    with pytest.raises(SimulationError):
        fidelity(np.zeros(8, dtype=complex), reference)


def test_lift_to_register():
    vector = np.array([1, 2, 3, 4], dtype=complex)
    lifted = lift_to_register(vector, (2, 0), 3)
    np.testing.assert_allclose(lifted[[0, 4, 1, 5]], vector)
    assert np.count_nonzero(lifted) == 4
    with pytest.raises(SimulationError):
        lift_to_register(vector, (0, 1, 2), 3)


def test_state_dump_round_trip(tmp_path):
    state = random_state(5)
    path, header = dump_state(state, str(tmp_path / "psi.bin"))
    assert header.endswith(".json")
    np.testing.assert_array_equal(load_state(path), state)
    with pytest.raises(SimulationError):
        load_state(str(tmp_path / "missing.bin"))


def test_cost_errors(chain4):
    circuit = hva(chain4, 1)
    with pytest.raises(SimulationError):
        energy_and_gradient(circuit, np.zeros(4), chain4, cost="magnetization")
    with pytest.raises(SimulationError):
        energy_and_gradient(circuit, np.zeros(4), chain4, cost="infidelity")


def test_trotter_error_is_first_order():
    graph = build_chain(8, periodic=True)
    t = 1.0
    start = prepare_covering(hva(graph, 1).covering, 8)
    # Every HEIS gate carries exp(-i t/p / 4) on top of the bond term.
    target = np.exp(-1j * t * len(graph.edges) / 4) * exact_evolution(graph, start, t)
    errors = []
    for p in (4, 8, 16):
        circuit = hva(graph, p)
        errors.append(np.linalg.norm(run(circuit, np.full(circuit.M, t / p)) - target))
    for coarse, fine in zip(errors, errors[1:]):
        assert 1.5 <= coarse / fine <= 4.5
