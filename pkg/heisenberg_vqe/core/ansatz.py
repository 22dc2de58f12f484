"""
Cyclic Hamiltonian variational ansatz.

A circuit is a depth-3 singlet preparation followed by p repetitions of one
cycle. Each cycle applies one HEIS layer per color class, or the SWAP/HEIS
schedule of a grid embedding. Parameters are stored cycle-major: gate
``param_index`` values are local to a cycle and cycle c reads
``theta[c * m + param_index]``.
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AnsatzError, ColoringError, DimerCoveringError, EmbeddingError
from .lattice import DimerCovering, EdgeColoring, GridEmbedding, SpinGraph
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

PARAM_MODES = ("OPG", "OPS")
ONE_QUBIT_KINDS = ("RZ", "X", "Y", "Z", "H", "SQRT_Z")
TWO_QUBIT_KINDS = ("HEIS", "SWAP", "FSIM", "CX")


@dataclass(frozen=True)
class Gate:
    """One gate of a layer.

    Args:
        kind: Gate name from ONE_QUBIT_KINDS or TWO_QUBIT_KINDS
        qubits: One or two register indices
        param_index: Cycle-local parameter slot of a parametrized HEIS gate
        angles: Fixed angles (RZ: theta; FSIM: theta, phi; HEIS: alpha)
    """
    kind: str
    qubits: Tuple[int, ...]
    param_index: Optional[int] = None
    angles: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        width = 1 if self.kind in ONE_QUBIT_KINDS else 2 if self.kind in TWO_QUBIT_KINDS else 0
        if width == 0:
            raise AnsatzError(f"unknown gate kind '{self.kind}'")
        if len(self.qubits) != width or len(set(self.qubits)) != width:
            raise AnsatzError(f"{self.kind} needs {width} distinct qubits, got {self.qubits}")

    def to_dict(self) -> Dict:
        data: Dict = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.param_index is not None:
            data["param_index"] = self.param_index
        if self.angles:
            data["angles"] = list(self.angles)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "Gate":
        return cls(kind=data["kind"], qubits=tuple(data["qubits"]),
                   param_index=data.get("param_index"),
                   angles=tuple(float(a) for a in data.get("angles", ())))


Layer = Tuple[Gate, ...]


def _check_layer(layer: Sequence[Gate]) -> None:
    used = [q for g in layer for q in g.qubits]
    if len(used) != len(set(used)):
        raise AnsatzError(f"gates of one layer overlap on qubits {sorted(used)}")


@dataclass(frozen=True)
class AnsatzCircuit:
    """Preparation layers followed by p copies of the cycle layers.

    ``covering`` holds the register pairs prepared as singlets and
    ``triplet`` optionally replaces one of them by (pair, m).
    ``site_to_qubit`` is where each site sits when the circuit ends.
    """
    n_qubits: int
    prep_layers: Tuple[Layer, ...]
    cycle_layers: Tuple[Layer, ...]
    p: int
    param_mode: str
    m: int
    covering: Tuple[Tuple[int, int], ...]
    site_to_qubit: Tuple[int, ...]
    triplet: Optional[Tuple[Tuple[int, int], int]] = None

    def __post_init__(self) -> None:
        if self.p < 0:
            raise AnsatzError(f"cycle count must be non-negative, got {self.p}")
        if self.param_mode not in PARAM_MODES:
            raise AnsatzError(f"unknown parameter mode '{self.param_mode}'")
        for layer in self.prep_layers + self.cycle_layers:
            _check_layer(layer)
            for gate in layer:
                if any(q >= self.n_qubits for q in gate.qubits):
                    raise AnsatzError(f"gate {gate} outside a register of {self.n_qubits} qubits")

    @property
    def M(self) -> int:
        return self.m * self.p

    @property
    def n_sites(self) -> int:
        return len(self.site_to_qubit)

    def iter_cycle_gates(self) -> Iterator[Tuple[Gate, Optional[int]]]:
        """Yield every cycle gate in application order with its absolute parameter index."""
        for c in range(self.p):
            for layer in self.cycle_layers:
                for gate in layer:
                    index = None if gate.param_index is None else c * self.m + gate.param_index
                    yield gate, index

    def check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape[0] != self.M:
            raise AnsatzError(f"parameter vector has length {theta.shape[0]}, circuit needs {self.M}")
        return theta

    def with_triplet(self, pair: Tuple[int, int], m: int) -> "AnsatzCircuit":
        """Copy of the circuit whose initial state has ``pair`` in the triplet |t_m>."""
        if m not in (-1, 0, 1):
            raise AnsatzError(f"triplet magnetization must be -1, 0 or 1, got {m}")
        pair = tuple(pair)
        if pair not in self.covering:
            pair = pair[::-1]
        if pair not in self.covering:
            raise AnsatzError(f"triplet pair {pair[::-1]} is not a dimer of the covering")
        return AnsatzCircuit(self.n_qubits, self.prep_layers, self.cycle_layers, self.p,
                             self.param_mode, self.m, self.covering, self.site_to_qubit,
                             triplet=(pair, m))

    def to_dict(self) -> Dict:
        """Circuit exchange format."""
        return {
            "format_version": 1,
            "n_qubits": self.n_qubits,
            "p": self.p,
            "param_mode": self.param_mode,
            "m": self.m,
            "covering": [list(pr) for pr in self.covering],
            "site_to_qubit": list(self.site_to_qubit),
            "triplet": None if self.triplet is None else [list(self.triplet[0]), self.triplet[1]],
            "prep_layers": [[g.to_dict() for g in layer] for layer in self.prep_layers],
            "cycle_layers": [[g.to_dict() for g in layer] for layer in self.cycle_layers],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "AnsatzCircuit":
        try:
            triplet = data.get("triplet")
            return cls(
                n_qubits=int(data["n_qubits"]),
                prep_layers=tuple(tuple(Gate.from_dict(g) for g in layer) for layer in data["prep_layers"]),
                cycle_layers=tuple(tuple(Gate.from_dict(g) for g in layer) for layer in data["cycle_layers"]),
                p=int(data["p"]),
                param_mode=data["param_mode"],
                m=int(data["m"]),
                covering=tuple(tuple(pr) for pr in data["covering"]),
                site_to_qubit=tuple(data["site_to_qubit"]),
                triplet=None if triplet is None else (tuple(triplet[0]), int(triplet[1])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise AnsatzError(f"malformed circuit description: {e}") from e

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def singlet_prep_layers(pairs: Sequence[Tuple[int, int]]) -> Tuple[Layer, ...]:
    """Depth-3 preparation of one singlet per pair: H(a), CX(a, b), Y(b).

    Each pair ends in -i times (|10> - |01>)/sqrt(2) with bit a written first.
    """
    if not pairs:
        return ()
    return (
        tuple(Gate("H", (a,)) for a, _ in pairs),
        tuple(Gate("CX", (a, b)) for a, b in pairs),
        tuple(Gate("Y", (b,)) for _, b in pairs),
    )


def build_hva(graph: SpinGraph, coloring: EdgeColoring, covering: DimerCovering, p: int,
              mode: str = "OPG", embedding: Optional[GridEmbedding] = None) -> AnsatzCircuit:
    """Assemble the cyclic ansatz.

    Args:
        graph: Interaction graph
        coloring: Matchings applied in order within a cycle
        covering: Dimers prepared as singlets
        p: Number of cycles (0 gives the bare initial state)
        mode: "OPG" (one parameter per gate) or "OPS" (one per HEIS layer)
        embedding: Optional grid placement; its schedule replaces the coloring

    Returns:
        AnsatzCircuit

    Raises:
        AnsatzError: The coloring, covering or embedding does not belong to graph
    """
    if mode not in PARAM_MODES:
        raise AnsatzError(f"unknown parameter mode '{mode}'")
    try:
        coloring.validate(graph)
        covering.validate(graph)
        if embedding is not None:
            embedding.validate(graph)
    except (ColoringError, DimerCoveringError, EmbeddingError) as e:
        raise AnsatzError(f"inconsistent ansatz inputs: {e}") from e

    if embedding is None:
        n_qubits = graph.n_sites
        site_to_qubit = tuple(range(graph.n_sites))
        schedule = [[("HEIS", e) for e in cls] for cls in coloring.classes]
    else:
        n_qubits = embedding.n_qubits
        site_to_qubit = embedding.site_to_qubit
        schedule = [list(layer) for layer in embedding.swap_schedule]

    cycle: List[Layer] = []
    slot = 0
    for layer in schedule:
        gates = []
        has_heis = any(kind == "HEIS" for kind, _ in layer)
        for kind, qubits in layer:
            if kind == "HEIS":
                gates.append(Gate("HEIS", tuple(qubits), param_index=slot))
                if mode == "OPG":
                    slot += 1
            else:
                gates.append(Gate(kind, tuple(qubits)))
        if mode == "OPS" and has_heis:
            slot += 1
        cycle.append(tuple(gates))

    pairs = tuple((site_to_qubit[a], site_to_qubit[b]) for a, b in covering.pairs)
    circuit = AnsatzCircuit(
        n_qubits=n_qubits,
        prep_layers=singlet_prep_layers(pairs),
        cycle_layers=tuple(cycle),
        p=p,
        param_mode=mode,
        m=slot,
        covering=pairs,
        site_to_qubit=site_to_qubit,
    )
    logger.debug(f"built {mode} ansatz: {n_qubits} qubits, p={p}, m={slot}, cycle depth {len(cycle)}")
    return circuit


def trotter_parameters(circuit: AnsatzCircuit, t: float, p: Optional[int] = None) -> np.ndarray:
    """First-order Trotter angles: every parameter equals t / p.

    Raises:
        AnsatzError: p disagrees with the circuit, or p = 0 with t != 0
    """
    p = circuit.p if p is None else p
    if p != circuit.p:
        raise AnsatzError(f"circuit has {circuit.p} cycles, not {p}")
    if p == 0:
        if t != 0:
            raise AnsatzError("a circuit without cycles cannot evolve for a nonzero time")
        return np.zeros(0)
    return np.full(circuit.M, t / p)


def past_light_cone(circuit: AnsatzCircuit, qubit: int) -> FrozenSet[int]:
    """Qubits whose initial state can influence ``qubit`` at the end of the cycles.

    The preparation layers are not part of the cone.
    """
    if not 0 <= qubit < circuit.n_qubits:
        raise AnsatzError(f"qubit {qubit} outside a register of {circuit.n_qubits}")
    cone = {qubit}
    for _ in range(circuit.p):
        for layer in reversed(circuit.cycle_layers):
            for gate in layer:
                if len(gate.qubits) == 2 and cone.intersection(gate.qubits):
                    cone.update(gate.qubits)
    return frozenset(cone)


def critical_depth(circuit_factory: Callable[[int], AnsatzCircuit], max_p: int = 64) -> Optional[int]:
    """Smallest p whose light cone of every qubit spans the whole register.

    Args:
        circuit_factory: Builds the circuit for a given p
        max_p: Give up beyond this many cycles

    Returns:
        The critical cycle count, or None when not reached by max_p
    """
    for p in range(max_p + 1):
        circuit = circuit_factory(p)
        everything = frozenset(range(circuit.n_qubits))
        if all(past_light_cone(circuit, q) == everything for q in range(circuit.n_qubits)):
            return p
    return None


@dataclass
class CircuitStats:
    gate_counts: Dict[str, int] = field(default_factory=dict)
    prep_gates: int = 0
    total_gates: int = 0
    depth: int = 0
    parameters: int = 0


def circuit_stats(circuit: AnsatzCircuit) -> CircuitStats:
    """Count gates by kind, total depth (prep included) and parameters."""
    counts: Dict[str, int] = {}
    prep = 0
    for layer in circuit.prep_layers:
        for gate in layer:
            counts[gate.kind] = counts.get(gate.kind, 0) + 1
            prep += 1
    for layer in circuit.cycle_layers:
        for gate in layer:
            counts[gate.kind] = counts.get(gate.kind, 0) + circuit.p
    depth = len(circuit.prep_layers) + circuit.p * len(circuit.cycle_layers)
    return CircuitStats(gate_counts=counts, prep_gates=prep, total_gates=sum(counts.values()),
                        depth=depth, parameters=circuit.M)
