"""
Statevector simulation of ansatz circuits.

States are complex128 arrays of length 2**n with qubit q as bit q of the
index (qubit 0 least significant, bit 0 = spin up). Kernels reshape the state
into an n-axis tensor; qubit q lives on axis n - 1 - q. Every kernel writes
its result back into the array it was given and returns that array.

Gradients use the adjoint method: one forward run, then a reverse sweep that
un-applies each gate to the state and to the costate O|psi>.
"""
import json
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .ansatz import AnsatzCircuit, Gate
from .errors import AnsatzError, FidelityError, SimulationError
from .lattice import SpinGraph
from .spectra import apply_hamiltonian, dense_hamiltonian
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

STATE_FORMAT_VERSION = 1
COSTS = ("energy", "energy+penalty", "infidelity")

_SQRT2_INV = 1 / np.sqrt(2)
_GATE_1Q = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "SQRT_Z": np.array([[1, 0], [0, 1j]], dtype=complex),
}
# Two-qubit matrices act on the local index bit(a) + 2 * bit(b).
_CX = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1, 0, 0, 0],
                     [0, c, -1j * s, 0],
                     [0, -1j * s, c, 0],
                     [0, 0, 0, np.exp(-1j * phi)]], dtype=complex)


def heis_matrix(alpha: float) -> np.ndarray:
    """cos(alpha/2) I - i sin(alpha/2) SWAP = exp(-i alpha (S.S + 1/4))."""
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    return np.array([[c - 1j * s, 0, 0, 0],
                     [0, c, -1j * s, 0],
                     [0, -1j * s, c, 0],
                     [0, 0, 0, c - 1j * s]], dtype=complex)


def n_qubits_of(state: np.ndarray) -> int:
    length = state.shape[0]
    n = int(length).bit_length() - 1
    if length < 1 or 1 << n != length:
        raise SimulationError(f"state length {length} is not a power of two")
    return n


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(1 << n_qubits, dtype=np.complex128)
    state[0] = 1.0
    return state


def _check_qubits(n: int, *qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < n:
            raise SimulationError(f"qubit {q} outside a register of {n}")
    if len(set(qubits)) != len(qubits):
        raise SimulationError(f"coincident qubits {qubits}")


def apply_1q(state: np.ndarray, qubit: int, kind: str, angle: Optional[float] = None) -> np.ndarray:
    """Apply X, Y, Z, H, SQRT_Z or RZ(angle) to one qubit."""
    n = n_qubits_of(state)
    _check_qubits(n, qubit)
    if kind == "RZ":
        if angle is None:
            raise SimulationError("RZ needs an angle")
        matrix = rz_matrix(angle)
    elif kind in _GATE_1Q:
        matrix = _GATE_1Q[kind]
    else:
        raise SimulationError(f"unknown single-qubit gate '{kind}'")
    axis = n - 1 - qubit
    tensor = state.reshape([2] * n)
    result = np.tensordot(matrix, tensor, axes=([1], [axis]))
    tensor[...] = np.moveaxis(result, 0, axis)
    return state


def apply_2q(state: np.ndarray, pair: Tuple[int, int], matrix: np.ndarray) -> np.ndarray:
    """Apply a 4x4 matrix in the local basis bit(a) + 2 * bit(b)."""
    n = n_qubits_of(state)
    a, b = pair
    _check_qubits(n, a, b)
    axes = (n - 1 - b, n - 1 - a)
    tensor = state.reshape([2] * n)
    front = np.moveaxis(tensor, axes, (0, 1))
    result = (matrix @ front.reshape(4, -1)).reshape(front.shape)
    tensor[...] = np.moveaxis(result, (0, 1), axes)
    return state


def apply_swap(state: np.ndarray, pair: Tuple[int, int]) -> np.ndarray:
    n = n_qubits_of(state)
    a, b = pair
    _check_qubits(n, a, b)
    tensor = state.reshape([2] * n)
    tensor[...] = np.swapaxes(tensor, n - 1 - a, n - 1 - b).copy()
    return state


def apply_heis(state: np.ndarray, pair: Tuple[int, int], alpha: float) -> np.ndarray:
    """Apply exp(-i alpha (S_a.S_b + 1/4)) to the pair."""
    n = n_qubits_of(state)
    a, b = pair
    _check_qubits(n, a, b)
    tensor = state.reshape([2] * n)
    swapped = np.swapaxes(tensor, n - 1 - a, n - 1 - b)
    tensor[...] = np.cos(alpha / 2) * tensor - 1j * np.sin(alpha / 2) * swapped
    return state


def apply_gate(state: np.ndarray, gate: Gate, alpha: Optional[float] = None) -> np.ndarray:
    """Apply one gate; ``alpha`` binds a parametrized HEIS gate."""
    kind = gate.kind
    if kind == "HEIS":
        if alpha is None:
            if not gate.angles:
                raise SimulationError("unbound HEIS gate")
            alpha = gate.angles[0]
        return apply_heis(state, gate.qubits, alpha)
    if kind == "SWAP":
        return apply_swap(state, gate.qubits)
    if kind == "FSIM":
        return apply_2q(state, gate.qubits, fsim_matrix(*gate.angles[:2]))
    if kind == "CX":
        return apply_2q(state, gate.qubits, _CX)
    return apply_1q(state, gate.qubits[0], kind, gate.angles[0] if gate.angles else None)


def prepare_covering(pairs: Sequence[Tuple[int, int]], n_qubits: int,
                     triplet_override: Optional[Tuple[Tuple[int, int], int]] = None) -> np.ndarray:
    """Product of two-qubit singlets on the given pairs; other qubits stay |0>.

    Pair (a, b) gets amplitude +1/sqrt(2) on bit_a=1, bit_b=0 and -1/sqrt(2)
    on bit_a=0, bit_b=1. With ``triplet_override = (pair, m)`` that pair is
    |t_1> = |00>, |t_0> = (|01> + |10>)/sqrt(2) or |t_-1> = |11> instead.
    """
    used = [q for pr in pairs for q in pr]
    if len(used) != len(set(used)):
        raise SimulationError("covering pairs overlap")
    if used:
        _check_qubits(n_qubits, *used)
    triplet_pair, m = (None, 0) if triplet_override is None else triplet_override
    if triplet_pair is not None:
        triplet_pair = tuple(triplet_pair)
        if triplet_pair not in [tuple(pr) for pr in pairs]:
            raise SimulationError(f"triplet pair {triplet_pair} is not in the covering")
        if m not in (-1, 0, 1):
            raise SimulationError(f"triplet magnetization {m} not in (-1, 0, 1)")

    state = zero_state(n_qubits)
    for a, b in pairs:
        if (a, b) == triplet_pair:
            if m == -1:
                apply_1q(state, a, "X")
                apply_1q(state, b, "X")
            elif m == 0:
                apply_1q(state, a, "H")
                apply_2q(state, (a, b), _CX)
                apply_1q(state, a, "X")
            continue
        apply_1q(state, a, "H")
        apply_2q(state, (a, b), _CX)
        apply_1q(state, a, "X")
        apply_1q(state, b, "Z")
    return state


def run(circuit: AnsatzCircuit, theta: np.ndarray) -> np.ndarray:
    """Final state c(theta_p) ... c(theta_1)|psi_init>.

    The initial state is built directly from the covering; the preparation
    layers only matter for gate accounting and compilation.
    """
    try:
        theta = circuit.check_theta(theta)
    except AnsatzError as e:
        raise SimulationError(str(e)) from e
    state = prepare_covering(circuit.covering, circuit.n_qubits, circuit.triplet)
    for gate, index in circuit.iter_cycle_gates():
        apply_gate(state, gate, None if index is None else theta[index])
    return state


def run_layers(state: np.ndarray, layers: Sequence[Sequence[Gate]]) -> np.ndarray:
    """Apply fixed-angle layers (prep or native circuits) in order."""
    for layer in layers:
        for gate in layer:
            apply_gate(state, gate)
    return state


def energy(state: np.ndarray, graph: SpinGraph,
           site_to_qubit: Optional[Sequence[int]] = None) -> float:
    """Exact <psi|H|psi> reading each site from its register qubit."""
    n = n_qubits_of(state)
    if n < graph.n_sites:
        raise SimulationError(f"register of {n} qubits is narrower than {graph.n_sites} sites")
    if site_to_qubit is None and n > graph.n_sites:
        site_to_qubit = tuple(range(graph.n_sites))
    return float(np.real(np.vdot(state, apply_hamiltonian(graph, state, site_to_qubit))))


def lift_to_register(vector: np.ndarray, site_to_qubit: Sequence[int], n_qubits: int) -> np.ndarray:
    """Embed a site-space state into the register, other qubits in |0>."""
    n_sites = len(site_to_qubit)
    if vector.shape[-1] != 1 << n_sites:
        raise SimulationError(f"vector of length {vector.shape[-1]} does not match {n_sites} sites")
    if n_qubits == n_sites and tuple(site_to_qubit) == tuple(range(n_sites)):
        return np.asarray(vector, dtype=np.complex128)
    idx = np.arange(1 << n_sites, dtype=np.int64)
    target = np.zeros_like(idx)
    for site, q in enumerate(site_to_qubit):
        target |= ((idx >> site) & 1) << q
    lifted = np.zeros(vector.shape[:-1] + (1 << n_qubits,), dtype=np.complex128)
    lifted[..., target] = vector
    return lifted


def _orthonormal(ground_space: np.ndarray) -> np.ndarray:
    vectors = np.atleast_2d(np.asarray(ground_space, dtype=np.complex128))
    gram = vectors.conj() @ vectors.T
    if not np.allclose(gram, np.eye(vectors.shape[0]), atol=1e-8):
        raise FidelityError("reference vectors are not orthonormal")
    return vectors


def fidelity(state: np.ndarray, ground_space: np.ndarray) -> float:
    """Weight of ``state`` in the span of the reference vectors (one per row)."""
    vectors = _orthonormal(ground_space)
    if vectors.shape[1] != state.shape[0]:
        raise SimulationError(f"reference width {vectors.shape[1]} differs from state width {state.shape[0]}")
    return float(np.sum(np.abs(vectors.conj() @ state) ** 2))


def _sz_diagonal(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    ones = np.zeros_like(idx)
    for q in range(n):
        ones += (idx >> q) & 1
    return (n - 2 * ones) / 2.0


@dataclass
class SpinObservables:
    sz: float
    s2: float
    penalty: Optional[float] = None


def spin_observables(state: np.ndarray, penalty: bool = False) -> SpinObservables:
    """<S_z>, <S^2> and optionally <(S_z - 1)^2> of the whole register.

    S^2 = 3n/4 + sum_{i<j} SWAP_ij - n(n-1)/4.
    """
    n = n_qubits_of(state)
    probabilities = np.abs(state) ** 2
    sz_diag = _sz_diagonal(n)
    sz = float(probabilities @ sz_diag)
    tensor = state.reshape([2] * n)
    swaps = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            swaps += float(np.real(np.vdot(tensor, np.swapaxes(tensor, i, j))))
    s2 = 0.75 * n + swaps - 0.25 * n * (n - 1)
    pen = float(probabilities @ (sz_diag - 1.0) ** 2) if penalty else None
    return SpinObservables(sz=sz, s2=s2, penalty=pen)


def cost_operator(graph: SpinGraph, circuit: AnsatzCircuit, cost: str,
                  reference: Optional[np.ndarray] = None,
                  penalty_weight: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Hermitian operator O whose expectation value is the cost.

    energy: H; energy+penalty: H + A (S_z - 1)^2; infidelity: 1 - projector
    onto the reference vectors (rows, in site space).
    """
    site_map = circuit.site_to_qubit
    if cost == "energy":
        return lambda v: apply_hamiltonian(graph, v, site_map)
    if cost == "energy+penalty":
        # S_z over data qubits only; stations stay |0> and would add 1/2 each.
        sz = _sz_diagonal(circuit.n_qubits) - 0.5 * (circuit.n_qubits - graph.n_sites)
        weight = penalty_weight * (sz - 1.0) ** 2
        return lambda v: apply_hamiltonian(graph, v, site_map) + weight * v
    if cost == "infidelity":
        if reference is None:
            raise SimulationError("infidelity cost needs reference vectors")
        refs = lift_to_register(_orthonormal(reference), site_map, circuit.n_qubits)
        return lambda v: v - refs.T @ (refs.conj() @ v)
    raise SimulationError(f"unknown cost '{cost}'")


@dataclass
class EnergyGradient:
    energy: float
    gradient: np.ndarray


def energy_and_gradient(circuit: AnsatzCircuit, theta: np.ndarray, graph: SpinGraph,
                        cost: str = "energy", reference: Optional[np.ndarray] = None,
                        penalty_weight: float = 1.0) -> EnergyGradient:
    """Cost value and its exact gradient by a reverse sweep.

    At each HEIS gate the derivative of the gate is -(i/2) SWAP times the
    gate, so the contribution is 2 Re <lambda| -(i/2) SWAP |phi> with phi the
    state just after the gate and lambda the back-propagated costate.
    """
    try:
        theta = circuit.check_theta(theta)
    except AnsatzError as e:
        raise SimulationError(str(e)) from e
    operator = cost_operator(graph, circuit, cost, reference, penalty_weight)

    phi = run(circuit, theta)
    lam = operator(phi)
    value = float(np.real(np.vdot(phi, lam)))
    grad = np.zeros(circuit.M)

    for gate, index in reversed(list(circuit.iter_cycle_gates())):
        if gate.kind == "HEIS":
            alpha = theta[index] if index is not None else gate.angles[0]
            if index is not None:
                mu = apply_swap(phi.copy(), gate.qubits)
                grad[index] += 2.0 * np.real(-0.5j * np.vdot(lam, mu))
            apply_heis(phi, gate.qubits, -alpha)
            apply_heis(lam, gate.qubits, -alpha)
        elif gate.kind == "SWAP":
            apply_swap(phi, gate.qubits)
            apply_swap(lam, gate.qubits)
        else:
            raise SimulationError(f"gradient sweep does not support {gate.kind} in cycles")
    return EnergyGradient(energy=value, gradient=grad)


def exact_evolution(graph: SpinGraph, state: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt)|state> by dense matrix exponential (at most 12 sites)."""
    hamiltonian = dense_hamiltonian(graph)
    if state.shape[0] != hamiltonian.shape[0]:
        raise SimulationError("state width does not match the graph")
    return scipy.linalg.expm(-1j * t * hamiltonian) @ state


def dump_state(state: np.ndarray, path: str) -> Tuple[str, str]:
    """Write ``path`` (little-endian complex128) and ``path + '.json'`` (header)."""
    n = n_qubits_of(state)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.asarray(state, dtype="<c16").tofile(path)
    header = path + ".json"
    with open(header, "w", encoding="utf-8") as f:
        json.dump({"format_version": STATE_FORMAT_VERSION, "n_qubits": n,
                   "ordering": "qubit0-lsb"}, f, indent=2)
    logger.debug(f"dumped {n}-qubit state to {path}")
    return path, header


def load_state(path: str) -> np.ndarray:
    try:
        with open(path + ".json", "r", encoding="utf-8") as f:
            header = json.load(f)
        state = np.fromfile(path, dtype="<c16").astype(np.complex128)
    except (OSError, json.JSONDecodeError) as e:
        raise SimulationError(f"cannot read state dump {path}: {e}") from e
    if header.get("ordering") != "qubit0-lsb" or state.shape[0] != 1 << int(header["n_qubits"]):
        raise SimulationError(f"state dump {path} does not match its header")
    return state
