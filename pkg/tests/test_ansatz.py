"""Tests for ansatz construction, gate accounting and light cones."""
import json

import numpy as np
import pytest

from conftest import hva
from heisenberg_vqe.core.ansatz import (AnsatzCircuit, Gate, build_hva, circuit_stats,
                                        critical_depth, past_light_cone, trotter_parameters)
from heisenberg_vqe.core.errors import AnsatzError
from heisenberg_vqe.core.lattice import (build_chain, build_kagome_open, build_kagome_periodic,
                                         dimer_covering, edge_coloring, embed_on_grid)


class TestGateCounts:
    def test_chain_20(self):
        stats = circuit_stats(hva(build_chain(20, periodic=True), 8))
        assert stats.total_gates == 190
        assert stats.parameters == 160
        assert stats.depth == 19
        assert stats.prep_gates == 30
        assert stats.gate_counts == {"H": 10, "CX": 10, "Y": 10, "HEIS": 160}

    def test_kagome_grid_20(self):
        graph = build_kagome_open(2, 5)
        stats = circuit_stats(hva(graph, 16, embedding=embed_on_grid(graph)))
        assert stats.total_gates == 766
        assert stats.parameters == 480
        assert stats.depth == 99
        assert stats.gate_counts["SWAP"] == 256

    def test_kagome_torus_18(self):
        stats = circuit_stats(hva(build_kagome_periodic(2, 3), 37))
        assert stats.total_gates == 1359
        assert stats.parameters == 1332
        assert stats.depth == 151

    def test_no_cycles(self):
        circuit = hva(build_chain(6), 0)
        stats = circuit_stats(circuit)
        assert circuit.M == 0
        assert stats.total_gates == stats.prep_gates == 9
        assert stats.depth == 3


def test_one_parameter_per_layer():
    circuit = hva(build_chain(20, periodic=True), 8, mode="OPS")
    assert circuit.m == 2
    assert circuit.M == 16
    torus = hva(build_kagome_periodic(2, 3), 5, mode="OPS")
    assert torus.M == 20
    # All gates of a layer read the same slot.
    for layer in torus.cycle_layers:
        assert len({g.param_index for g in layer}) == 1


def test_parameters_are_cycle_major(chain4):
    circuit = hva(chain4, 3)
    indices = [index for _, index in circuit.iter_cycle_gates()]
    assert indices == list(range(circuit.M))
    assert circuit.m == 4


def test_light_cone_of_a_ring():
    circuit = hva(build_chain(12, periodic=True), 1)
    assert past_light_cone(circuit, 0) == frozenset({10, 11, 0, 1})
    assert len(past_light_cone(hva(build_chain(12, periodic=True), 2), 5)) == 8
    with pytest.raises(AnsatzError):
        past_light_cone(circuit, 12)


@pytest.mark.parametrize("graph", [build_chain(12, periodic=True), build_chain(9),
                                   build_kagome_open(2, 3, phase=1)],
                         ids=["ring12", "open9", "kagome12"])
def test_light_cones_grow_with_depth(graph):
    previous = [frozenset({q}) for q in range(graph.n_sites)]
    for p in range(1, 7):
        circuit = hva(graph, p)
        cones = [past_light_cone(circuit, q) for q in range(graph.n_sites)]
        for before, after in zip(previous, cones):
            assert before <= after
            assert len(before) <= len(after)
        previous = cones


@pytest.mark.parametrize("n,expected", [(12, 3), (20, 5)])
def test_critical_depth_of_rings(n, expected):
    ring = build_chain(n, periodic=True)
    assert critical_depth(lambda p: hva(ring, p)) == expected


def test_critical_depth_not_reached():
    ring = build_chain(20, periodic=True)
    assert critical_depth(lambda p: hva(ring, p), max_p=3) is None


def test_trotter_parameters(chain4):
    circuit = hva(chain4, 4)
    np.testing.assert_allclose(trotter_parameters(circuit, 1.0), np.full(16, 0.25))
    with pytest.raises(AnsatzError):
        trotter_parameters(circuit, 1.0, p=3)
    assert trotter_parameters(hva(chain4, 0), 0.0).shape == (0,)
    with pytest.raises(AnsatzError):
        trotter_parameters(hva(chain4, 0), 0.5)


def test_exchange_round_trip():
    graph = build_kagome_open(2, 5)
    circuit = hva(graph, 2, embedding=embed_on_grid(graph))
    circuit = circuit.with_triplet(circuit.covering[0], -1)
    assert AnsatzCircuit.from_dict(json.loads(circuit.dumps())) == circuit


def test_exchange_rejects_malformed():
    with pytest.raises(AnsatzError):
        AnsatzCircuit.from_dict({"n_qubits": 4})


def test_with_triplet(chain4):
    circuit = hva(chain4, 1)
    pair = circuit.covering[0]
    assert circuit.with_triplet(pair[::-1], 1).triplet == (pair, 1)
    with pytest.raises(AnsatzError):
        circuit.with_triplet(pair, 2)
    with pytest.raises(AnsatzError):
        circuit.with_triplet((1, 2), 0)


def test_check_theta(chain4):
    circuit = hva(chain4, 2)
    assert circuit.check_theta([0.1] * 8).dtype == np.float64
    with pytest.raises(AnsatzError):
        circuit.check_theta(np.zeros(7))


def test_build_rejects_foreign_inputs(chain4, chain6):
    with pytest.raises(AnsatzError):
        build_hva(chain4, edge_coloring(chain6), dimer_covering(chain4), 1)
    with pytest.raises(AnsatzError):
        build_hva(chain4, edge_coloring(chain4), dimer_covering(chain6), 1)
    with pytest.raises(AnsatzError):
        build_hva(chain4, edge_coloring(chain4), dimer_covering(chain4), 1, mode="ONE")
    with pytest.raises(AnsatzError):
        build_hva(chain4, edge_coloring(chain4), dimer_covering(chain4), -1)


@pytest.mark.parametrize("kind,qubits", [("FOO", (0,)), ("HEIS", (1, 1)), ("RZ", (0, 1)), ("X", ())])
def test_gate_validation(kind, qubits):
    with pytest.raises(AnsatzError):
        Gate(kind, qubits)


def test_overlapping_layer_rejected():
    with pytest.raises(AnsatzError):
        AnsatzCircuit(n_qubits=3, prep_layers=(),
                      cycle_layers=((Gate("HEIS", (0, 1), 0), Gate("HEIS", (1, 2), 1)),),
                      p=1, param_mode="OPG", m=2, covering=(), site_to_qubit=(0, 1, 2))
