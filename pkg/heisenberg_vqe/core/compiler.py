"""
Compilation of ansatz circuits to fSim and RZ gates.

HEIS(a) = RZ_0(a/2) RZ_1(a/2) fSim(a/2, a) for a in [-pi, pi). Angles outside
that window are folded with HEIS(a + 2 pi) = -HEIS(a). A negative fSim angle
is removed either by conjugating with Z on one qubit or, before the first
fSim layer, by fSim(t) = Z_0 Z_1 fSim(pi/2, 0) fSim(t + pi/2). SWAP is
sqrt(Z)_0 sqrt(Z)_1 fSim(pi/2, pi).

Symmetric RZ pairs commute with the fSim on the same pair, so all diagonal
corrections of one layer are pushed behind its fSim layer and merged with the
pre-corrections of the next. The global phase is kept so that
``source = exp(i * global_phase) * native`` holds exactly.
"""
import json
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .ansatz import AnsatzCircuit, Gate
from .errors import AnsatzError, CompilationError, SimulationError
from .simulator import prepare_covering, run, run_layers, zero_state
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

NATIVE_FORMAT_VERSION = 1
PREP_VARIANTS = ("abstract", "quantum-dot", "fsim")
# Diagonal gates as exp(i * phase) * RZ(angle)
_DIAGONAL = {"Z": (math.pi, math.pi / 2), "SQRT_Z": (math.pi / 2, math.pi / 4)}


@dataclass(frozen=True)
class NativeCircuit:
    """Layers of native gates with the phase that relates them to their source."""
    n_qubits: int
    layers: Tuple[Tuple[Gate, ...], ...]
    global_phase: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gate_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for layer in self.layers:
            for gate in layer:
                counts[gate.kind] = counts.get(gate.kind, 0) + 1
        return counts

    def fsim_layer_count(self) -> int:
        return sum(1 for layer in self.layers if any(g.kind == "FSIM" for g in layer))

    def rz_layer_count(self) -> int:
        return sum(1 for layer in self.layers if layer and all(g.kind == "RZ" for g in layer))

    def dumps(self) -> str:
        """JSON lines: a header, then one gate per line."""
        lines = [json.dumps({"format_version": NATIVE_FORMAT_VERSION, "n_qubits": self.n_qubits,
                             "global_phase": self.global_phase, "depth": self.depth})]
        for depth, layer in enumerate(self.layers):
            for gate in layer:
                lines.append(json.dumps({"layer": depth, "kind": gate.kind,
                                         "qubits": list(gate.qubits), "angles": list(gate.angles)}))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NativeCircuit":
        try:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
            header, gates = rows[0], rows[1:]
            layers: List[List[Gate]] = [[] for _ in range(int(header["depth"]))]
            for row in gates:
                layers[int(row["layer"])].append(
                    Gate(row["kind"], tuple(row["qubits"]), angles=tuple(row["angles"])))
        except (IndexError, KeyError, TypeError, ValueError, AnsatzError) as e:
            raise CompilationError(f"malformed native circuit: {e}") from e
        return cls(n_qubits=int(header["n_qubits"]), layers=tuple(tuple(layer) for layer in layers),
                   global_phase=float(header["global_phase"]))


def fold_angle(alpha: float) -> Tuple[float, int]:
    """Return (a, k) with alpha = a + 2 pi k and a in [-pi, pi)."""
    k = int(round(alpha / (2 * math.pi)))
    folded = alpha - 2 * math.pi * k
    if folded >= math.pi:
        folded -= 2 * math.pi
        k += 1
    elif folded < -math.pi:
        folded += 2 * math.pi
        k -= 1
    return folded, k


def _wrap_phase(phase: float) -> float:
    return float(math.remainder(phase, 2 * math.pi))


def heis_to_fsim(alpha: float) -> NativeCircuit:
    """Native gates for HEIS(alpha) on qubits (0, 1)."""
    folded, k = fold_angle(alpha)
    half = folded / 2
    rz = (Gate("RZ", (0,), angles=(half,)), Gate("RZ", (1,), angles=(half,)))
    if half >= 0:
        layers = ((Gate("FSIM", (0, 1), angles=(half, folded)),), rz)
    else:
        z = (Gate("Z", (0,)),)
        layers = (z, (Gate("FSIM", (0, 1), angles=(-half, folded)),), z, rz)
    return NativeCircuit(n_qubits=2, layers=layers, global_phase=_wrap_phase(math.pi * k))


def swap_to_fsim() -> NativeCircuit:
    return NativeCircuit(n_qubits=2, layers=(
        (Gate("FSIM", (0, 1), angles=(math.pi / 2, math.pi)),),
        (Gate("SQRT_Z", (0,)), Gate("SQRT_Z", (1,))),
    ))


def singlet_prep(native_set: str = "abstract") -> NativeCircuit:
    """Depth-3 circuit taking |00> to the singlet up to a global phase.

    Args:
        native_set: "abstract" (X, H, CX, Z), "quantum-dot" (X, HEIS, RZ)
            or "fsim" (X, fSim, RZ)
    """
    if native_set == "abstract":
        layers = ((Gate("X", (1,)), Gate("H", (0,))), (Gate("CX", (0, 1)),), (Gate("Z", (0,)),))
    elif native_set == "quantum-dot":
        layers = ((Gate("X", (1,)),), (Gate("HEIS", (0, 1), angles=(math.pi / 2,)),),
                  (Gate("RZ", (0,), angles=(-math.pi / 2,)),))
    elif native_set == "fsim":
        layers = ((Gate("X", (1,)),), (Gate("FSIM", (0, 1), angles=(math.pi / 4, 0.0)),),
                  (Gate("RZ", (0,), angles=(-math.pi / 2,)),))
    else:
        raise CompilationError(f"unknown native gate set '{native_set}'")
    return NativeCircuit(n_qubits=2, layers=layers)


def _relabel(layer: Iterable[Gate], qubits: Sequence[int]) -> List[Gate]:
    return [Gate(g.kind, tuple(qubits[q] for q in g.qubits), angles=g.angles) for g in layer]


class _Compiler:
    """Streams layers into native layers while merging diagonal gates."""

    def __init__(self, n_qubits: int) -> None:
        self.n_qubits = n_qubits
        self.layers: List[Tuple[Gate, ...]] = []
        self.pending: Dict[int, float] = {}
        self.phase = 0.0
        self.fsim_emitted = False

    def _add_rz(self, target: Dict[int, float], qubit: int, angle: float) -> None:
        target[qubit] = target.get(qubit, 0.0) + angle

    def _diagonal(self, target: Dict[int, float], gate: Gate) -> None:
        if gate.kind == "RZ":
            self._add_rz(target, gate.qubits[0], gate.angles[0])
        else:
            angle, phase = _DIAGONAL[gate.kind]
            self._add_rz(target, gate.qubits[0], angle)
            self.phase += phase

    def flush(self) -> None:
        gates = []
        for q in sorted(self.pending):
            # RZ has period 4 pi
            angle = math.remainder(self.pending[q], 4 * math.pi)
            if abs(angle) > 1e-14:
                gates.append(Gate("RZ", (q,), angles=(angle,)))
        if gates:
            self.layers.append(tuple(gates))
        self.pending = {}

    def add_single_qubit_layer(self, layer: Sequence[Gate]) -> None:
        other = [g for g in layer if g.kind not in ("RZ",) + tuple(_DIAGONAL)]
        for gate in layer:
            if gate not in other:
                self._diagonal(self.pending, gate)
        if other:
            # Diagonal gates on these qubits must stay in front of them.
            blocked = {g.qubits[0] for g in other}
            held = {q: a for q, a in self.pending.items() if q not in blocked}
            self.pending = {q: a for q, a in self.pending.items() if q in blocked}
            self.flush()
            self.layers.append(tuple(other))
            self.pending = held

    def add_two_qubit_layer(self, layer: Sequence[Gate]) -> None:
        pre: Dict[int, float] = {}
        post: Dict[int, float] = {}
        lead: List[Gate] = []
        main: List[Gate] = []
        use_lead = not self.fsim_emitted and not self.pending
        for gate in layer:
            a = gate.qubits[0]
            if gate.kind == "HEIS":
                if not gate.angles:
                    raise CompilationError("unbound HEIS gate")
                folded, k = fold_angle(gate.angles[0])
                self.phase += math.pi * k
                half = folded / 2
                b = gate.qubits[1]
                self._add_rz(post, a, half)
                self._add_rz(post, b, half)
                if half >= 0:
                    main.append(Gate("FSIM", (a, b), angles=(half, folded)))
                elif use_lead:
                    lead.append(Gate("FSIM", (a, b), angles=(math.pi / 2, 0.0)))
                    main.append(Gate("FSIM", (a, b), angles=(half + math.pi / 2, folded)))
                    self._add_rz(post, a, math.pi)
                    self._add_rz(post, b, math.pi)
                    self.phase += math.pi
                else:
                    self._add_rz(pre, a, math.pi)
                    main.append(Gate("FSIM", (a, b), angles=(-half, folded)))
                    self._add_rz(post, a, math.pi)
                    self.phase += math.pi
            elif gate.kind == "SWAP":
                b = gate.qubits[1]
                main.append(Gate("FSIM", (a, b), angles=(math.pi / 2, math.pi)))
                self._add_rz(post, a, math.pi / 2)
                self._add_rz(post, b, math.pi / 2)
                self.phase += math.pi / 2
            elif gate.kind == "FSIM":
                main.append(gate)
            elif gate.kind == "RZ" or gate.kind in _DIAGONAL:
                self._diagonal(pre, gate)
            else:
                raise CompilationError(f"cannot compile {gate.kind} inside a two-qubit layer")
        for q, angle in pre.items():
            self._add_rz(self.pending, q, angle)
        self.flush()
        if lead:
            self.layers.append(tuple(lead))
        if main:
            self.layers.append(tuple(main))
            self.fsim_emitted = True
        for q, angle in post.items():
            self._add_rz(self.pending, q, angle)

    def add_layer(self, layer: Sequence[Gate]) -> None:
        if any(len(g.qubits) == 2 for g in layer):
            self.add_two_qubit_layer(layer)
        elif layer:
            self.add_single_qubit_layer(layer)

    def result(self) -> NativeCircuit:
        self.flush()
        return NativeCircuit(n_qubits=self.n_qubits, layers=tuple(self.layers),
                             global_phase=_wrap_phase(self.phase))


def bind_layers(circuit: AnsatzCircuit, theta: np.ndarray) -> List[Tuple[Gate, ...]]:
    """Cycle layers for all p cycles with HEIS angles filled in."""
    try:
        theta = circuit.check_theta(theta)
    except AnsatzError as e:
        raise CompilationError(f"unbound parameters: {e}") from e
    if not np.all(np.isfinite(theta)):
        raise CompilationError("unbound parameters: theta contains non-finite values")
    bound = []
    for c in range(circuit.p):
        for layer in circuit.cycle_layers:
            bound.append(tuple(
                Gate(g.kind, g.qubits, angles=(float(theta[c * circuit.m + g.param_index]),))
                if g.param_index is not None else g
                for g in layer))
    return bound


def prep_layers(circuit: AnsatzCircuit, native_set: str) -> List[Tuple[Gate, ...]]:
    """Singlet preparation of every dimer, run side by side."""
    if circuit.triplet is not None:
        raise CompilationError("triplet initial states have no native preparation")
    template = singlet_prep(native_set)
    layers = []
    for layer in template.layers:
        merged: List[Gate] = []
        for pair in circuit.covering:
            merged.extend(_relabel(layer, pair))
        layers.append(tuple(merged))
    return layers


def compile_layers(n_qubits: int, layers: Iterable[Sequence[Gate]]) -> NativeCircuit:
    """Compile arbitrary layers of HEIS, SWAP, fSim and single-qubit gates."""
    compiler = _Compiler(n_qubits)
    for layer in layers:
        compiler.add_layer(layer)
    return compiler.result()


def compile_circuit(circuit: AnsatzCircuit, theta: np.ndarray, include_prep: bool = False,
                    prep_variant: str = "fsim") -> NativeCircuit:
    """Compile the bound cycles, optionally preceded by a native singlet preparation.

    Without the preparation the result acts on the covering state exactly like
    the cycles do, up to ``global_phase``. With it the preparation contributes
    an untracked per-dimer phase.

    Raises:
        CompilationError: theta does not bind the circuit, or an unknown variant
    """
    layers: List[Sequence[Gate]] = []
    if include_prep:
        layers.extend(prep_layers(circuit, prep_variant))
    layers.extend(bind_layers(circuit, theta))
    native = compile_layers(circuit.n_qubits, layers)
    logger.debug(f"compiled {len(layers)} layers into depth {native.depth} "
                 f"({native.fsim_layer_count()} fSim, {native.rz_layer_count()} RZ layers)")
    return native


def compilation_error(circuit: AnsatzCircuit, theta: np.ndarray, native: NativeCircuit,
                      include_prep: bool = False, max_qubits: int = 10) -> float:
    """Distance between a compiled circuit and its source on the initial state.

    Cycles alone start from the covering state and are compared with the
    global phase included, by the largest amplitude difference. With the
    preparation the native circuit starts from |0...0> and the states are
    compared up to a phase, as 1 - |overlap|.

    Raises:
        CompilationError: More than ``max_qubits`` qubits, or theta does not bind
    """
    if native.n_qubits > max_qubits:
        raise CompilationError(f"check of {native.n_qubits} qubits refused")
    try:
        source = run(circuit, theta)
    except SimulationError as e:
        raise CompilationError(f"unbound parameters: {e}") from e
    if include_prep:
        state = run_layers(zero_state(native.n_qubits), native.layers)
        return float(1.0 - abs(np.vdot(source, state)))
    start = prepare_covering(circuit.covering, circuit.n_qubits, circuit.triplet)
    state = np.exp(1j * native.global_phase) * run_layers(start, native.layers)
    return float(np.max(np.abs(state - source)))
