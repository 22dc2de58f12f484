"""
Interaction graphs for the Heisenberg antiferromagnet.

This module builds the lattices the ansatz is defined on (open and periodic
chains, open kagome patches and kagome tori), their edge colorings, dimer
coverings used as initial states, and the placement of a graph on a square
qubit grid with auxiliary swapping-station qubits.

Open kagome patches are drawn as the line graph of a brick-wall region of the
honeycomb lattice: every honeycomb vertex is one kagome triangle and every
honeycomb link (including links dangling out of the region) is one site.
"""
import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from .errors import ColoringError, DimerCoveringError, EmbeddingError, LatticeError
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

Edge = Tuple[int, int]

GRAPH_KINDS = ("chain-open", "chain-periodic", "kagome-open", "kagome-periodic", "kagome-vbc36", "custom")


def _norm(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SpinGraph:
    """Sites and nearest-neighbour bonds of a spin-1/2 lattice.

    Args:
        n_sites: Number of spins
        edges: Sorted tuple of (i, j) bonds with i < j
        kind: One of GRAPH_KINDS
        shape: Size parameters the builder was called with
        triangles: Site triples of the kagome triangles, empty for other kinds
    """
    n_sites: int
    edges: Tuple[Edge, ...]
    kind: str = "custom"
    shape: Tuple[int, ...] = ()
    triangles: Tuple[Tuple[int, int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise LatticeError(f"invalid size: {self.n_sites} sites")
        if self.kind not in GRAPH_KINDS:
            raise LatticeError(f"unknown graph kind '{self.kind}'")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise LatticeError(f"self-loop on site {i}")
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise LatticeError(f"edge ({i}, {j}) out of range for {self.n_sites} sites")
            if (i, j) in seen or i > j:
                raise LatticeError(f"duplicate or unnormalized edge ({i}, {j})")
            seen.add((i, j))

    @property
    def edge_set(self) -> FrozenSet[Edge]:
        return frozenset(self.edges)

    def degrees(self) -> List[int]:
        deg = [0] * self.n_sites
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self) -> int:
        return max(self.degrees()) if self.edges else 0

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_sites))
        g.add_edges_from(self.edges)
        return g

    def to_dict(self) -> Dict:
        """Graph exchange format."""
        return {
            "n_sites": self.n_sites,
            "edges": [list(e) for e in self.edges],
            "kind": self.kind,
            "shape": list(self.shape),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SpinGraph":
        """Rebuild a graph from the exchange format.

        Known kinds are rebuilt through their builder so that triangles and
        other metadata are restored; the edge list must then agree.
        """
        try:
            n_sites = int(data["n_sites"])
            edges = tuple(sorted(_norm(int(a), int(b)) for a, b in data["edges"]))
            kind = data.get("kind", "custom")
            shape = tuple(int(s) for s in data.get("shape", ()))
        except (KeyError, TypeError, ValueError) as e:
            raise LatticeError(f"malformed graph description: {e}") from e
        if kind != "custom" and shape:
            rebuilt = build_from_kind(kind, shape)
            if rebuilt.n_sites == n_sites and rebuilt.edges == edges:
                return rebuilt
            raise LatticeError(f"edges do not match a {kind} graph of shape {shape}")
        return cls(n_sites=n_sites, edges=edges, kind="custom")

    def graph_hash(self) -> str:
        payload = json.dumps({"n": self.n_sites, "e": [list(e) for e in self.edges]},
                             separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EdgeColoring:
    """Partition of the edge set into matchings, applied in list order."""
    classes: Tuple[Tuple[Edge, ...], ...]

    def validate(self, graph: SpinGraph) -> None:
        """Raise ColoringError unless the classes are disjoint matchings covering the graph."""
        covered: List[Edge] = [e for c in self.classes for e in c]
        if len(covered) != len(set(covered)):
            raise ColoringError("color classes overlap")
        if set(covered) != graph.edge_set:
            raise ColoringError("color classes do not cover the edge set")
        for c in self.classes:
            sites = [s for e in c for s in e]
            if len(sites) != len(set(sites)):
                raise ColoringError(f"color class {c} is not a matching")

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class DimerCovering:
    """Perfect matching of the sites.

    ``patched`` lists the pairs that were added by the boundary repair step
    rather than the regular pattern.
    """
    pairs: Tuple[Edge, ...]
    patched: Tuple[Edge, ...] = ()

    def validate(self, graph: SpinGraph) -> None:
        sites = [s for p in self.pairs for s in p]
        if len(sites) != len(set(sites)):
            raise DimerCoveringError("dimer pairs overlap")
        if sorted(sites) != list(range(graph.n_sites)):
            raise DimerCoveringError("dimer pairs do not cover every site exactly once")
        for p in self.pairs:
            if _norm(*p) not in graph.edge_set:
                raise DimerCoveringError(f"dimer {p} is not a bond of the graph")


@dataclass(frozen=True)
class GridEmbedding:
    """Placement of a graph on a square grid of qubits.

    Args:
        grid_shape: (rows, columns) of the physical grid
        site_to_qubit: Register index of every site at the start of a cycle
        aux_qubits: Register indices of the swapping stations
        coords: Grid (row, column) of every register qubit
        swap_schedule: Layers of one cycle, each a tuple of ("HEIS" | "SWAP", (q1, q2))
    """
    grid_shape: Tuple[int, int]
    site_to_qubit: Tuple[int, ...]
    aux_qubits: Tuple[int, ...]
    coords: Tuple[Tuple[int, int], ...]
    swap_schedule: Tuple[Tuple[Tuple[str, Edge], ...], ...]

    @property
    def n_qubits(self) -> int:
        return len(self.coords)

    @property
    def depth(self) -> int:
        return len(self.swap_schedule)

    def count(self, kind: str) -> int:
        return sum(1 for layer in self.swap_schedule for k, _ in layer if k == kind)

    def effective_edges(self) -> List[Edge]:
        """Track site labels through one cycle and return the site pair of every HEIS gate.

        Raises:
            EmbeddingError: A HEIS gate touches a station or the cycle does not
                return every label to its starting qubit
        """
        occupant: Dict[int, Optional[int]] = {q: None for q in range(self.n_qubits)}
        for site, q in enumerate(self.site_to_qubit):
            occupant[q] = site
        start = dict(occupant)
        effective: List[Edge] = []
        for depth, layer in enumerate(self.swap_schedule):
            for kind, (a, b) in layer:
                if kind == "SWAP":
                    occupant[a], occupant[b] = occupant[b], occupant[a]
                elif kind == "HEIS":
                    sa, sb = occupant[a], occupant[b]
                    if sa is None or sb is None:
                        raise EmbeddingError(f"HEIS on a station qubit in layer {depth}")
                    effective.append(_norm(sa, sb))
                else:
                    raise EmbeddingError(f"unexpected gate kind '{kind}' in schedule")
        if occupant != start:
            raise EmbeddingError("schedule does not return every site to its qubit")
        return effective

    def validate(self, graph: SpinGraph) -> None:
        """Check grid adjacency, layer disjointness and exact edge coverage."""
        if len(self.site_to_qubit) != graph.n_sites:
            raise EmbeddingError("embedding and graph disagree on the site count")
        rows, cols = self.grid_shape
        if len(set(self.coords)) != self.n_qubits:
            raise EmbeddingError("two qubits share a grid position")
        for r, c in self.coords:
            if not (0 <= r < rows and 0 <= c < cols):
                raise EmbeddingError(f"qubit at ({r}, {c}) lies outside the grid")
        for depth, layer in enumerate(self.swap_schedule):
            used: List[int] = []
            for _, (a, b) in layer:
                (ra, ca), (rb, cb) = self.coords[a], self.coords[b]
                if abs(ra - rb) + abs(ca - cb) != 1:
                    raise EmbeddingError(f"gate ({a}, {b}) in layer {depth} is not grid-adjacent")
                used.extend((a, b))
            if len(used) != len(set(used)):
                raise EmbeddingError(f"layer {depth} acts twice on one qubit")
        effective = self.effective_edges()
        if len(effective) != len(set(effective)) or set(effective) != graph.edge_set:
            raise EmbeddingError("effective interactions do not cover each edge exactly once")

    def to_dict(self) -> Dict:
        return {
            "grid_shape": list(self.grid_shape),
            "site_to_qubit": list(self.site_to_qubit),
            "aux_qubits": list(self.aux_qubits),
            "coords": [list(c) for c in self.coords],
            "swap_schedule": [[[k, list(q)] for k, q in layer] for layer in self.swap_schedule],
        }


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_chain(n: int, periodic: bool = False) -> SpinGraph:
    """Build an open or periodic spin chain.

    Args:
        n: Number of sites (at least 2, at least 3 when periodic)
        periodic: Close the chain with the bond (n-1, 0)

    Returns:
        SpinGraph of kind chain-open or chain-periodic
    """
    if n < 2 or (periodic and n < 3):
        raise LatticeError(f"invalid size: chain of {n} sites (periodic={periodic})")
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        edges.append((0, n - 1))
    kind = "chain-periodic" if periodic else "chain-open"
    graph = SpinGraph(n_sites=n, edges=tuple(sorted(edges)), kind=kind, shape=(n,))
    logger.debug(f"built {kind} with {n} sites")
    return graph


def _honeycomb_links(i: int, j: int, phase: int) -> List[Tuple[str, int, int]]:
    # ("h", i, j) joins (i, j)-(i, j+1); ("v", i, j) joins (i, j)-(i+1, j)
    vertical = ("v", i, j) if (i + j + phase) % 2 == 1 else ("v", i - 1, j)
    return [("h", i, j - 1), ("h", i, j), vertical]


def _link_position(link: Tuple[str, int, int]) -> Tuple[int, int]:
    kind, i, j = link
    return (2 * i, 2 * j + 1) if kind == "h" else (2 * i + 1, 2 * j)


def build_kagome_open(rows: int, cols: int, phase: int = 0) -> SpinGraph:
    """Build an open kagome patch of rows x cols corner-sharing triangles.

    Triangles sit on a brick-wall honeycomb region; ``phase`` shifts which
    columns carry the vertical links. ``build_kagome_open(2, 5)`` is the
    20-site, 30-bond patch with one hexagon, and ``build_kagome_open(2, 3, 1)``
    is the 12-site star.

    Args:
        rows: Triangle rows (at least 1)
        cols: Triangles per row (at least 1)
        phase: 0 or 1

    Returns:
        SpinGraph of kind kagome-open with its triangles recorded
    """
    if rows < 1 or cols < 1:
        raise LatticeError(f"invalid size: kagome patch {rows}x{cols}")
    phase = phase % 2
    vertices = [(i, j) for i in range(rows) for j in range(cols)]
    links = {link for i, j in vertices for link in _honeycomb_links(i, j, phase)}
    ordered = sorted(links, key=_link_position)
    index = {link: k for k, link in enumerate(ordered)}

    triangles = []
    edges = set()
    for i, j in vertices:
        tri = sorted(index[link] for link in _honeycomb_links(i, j, phase))
        triangles.append(tuple(tri))
        a, b, c = tri
        edges.update({(a, b), (a, c), (b, c)})

    graph = SpinGraph(n_sites=len(ordered), edges=tuple(sorted(edges)), kind="kagome-open",
                      shape=(rows, cols, phase), triangles=tuple(triangles))
    if not nx.is_connected(graph.to_networkx()):
        raise LatticeError(f"kagome patch {rows}x{cols} (phase {phase}) is disconnected")
    logger.debug(f"built kagome-open {rows}x{cols}: {graph.n_sites} sites, {len(edges)} edges")
    return graph


# Bond types of the 3-site cell (A, B, C) and the cell offset of their second end.
_CELL_BONDS = (
    ("A", "B", 0, 0),
    ("A", "C", 0, 0),
    ("B", "C", 0, 0),
    ("B", "A", 1, 0),
    ("C", "A", 0, 1),
    ("B", "C", 1, -1),
)
_BASIS = {"A": 0, "B": 1, "C": 2}

# Four-coloring of the bond types, indexed by the parity of the cell's first coordinate.
_TORUS_COLORS = (
    (0, 1, 2, 1, 3, 3),
    (3, 0, 1, 2, 2, 0),
)


def _kagome_torus(cells: Sequence[Tuple[int, int]], wrap, kind_shape: Tuple[int, ...],
                 kind: str = "kagome-periodic"):
    """Build the bonds of a kagome torus and the color of each bond.

    Args:
        cells: Canonical cell coordinates in row-major order
        wrap: Maps any cell coordinate onto its canonical representative
        kind_shape: Shape recorded on the resulting graph
        kind: Graph kind recorded on the result

    Returns:
        (SpinGraph, dict edge -> bond color)
    """
    cell_index = {cell: k for k, cell in enumerate(cells)}
    edges = []
    colors: Dict[Edge, int] = {}
    triangles = []
    for (x, y) in cells:
        base = 3 * cell_index[(x, y)]
        triangles.append((base, base + 1, base + 2))
        for t, (s1, s2, dx, dy) in enumerate(_CELL_BONDS):
            other = 3 * cell_index[wrap(x + dx, y + dy)] + _BASIS[s2]
            mine = base + _BASIS[s1]
            if mine == other:
                raise LatticeError(f"degenerate torus {kind_shape}: site bonded to itself")
            edge = _norm(mine, other)
            edges.append(edge)
            colors[edge] = _TORUS_COLORS[x % 2][t]
        b, a, c = base + 1, 3 * cell_index[wrap(x + 1, y)], 3 * cell_index[wrap(x + 1, y - 1)] + 2
        triangles.append(tuple(sorted((b, a, c))))
    if len(set(edges)) != len(edges):
        raise LatticeError(f"degenerate torus {kind_shape}: parallel bonds collapse")
    n_sites = 3 * len(cells)
    graph = SpinGraph(n_sites=n_sites, edges=tuple(sorted(edges)), kind=kind,
                      shape=kind_shape, triangles=tuple(triangles))
    if any(d != 4 for d in graph.degrees()):
        raise LatticeError(f"degenerate torus {kind_shape}: graph is not 4-regular")
    return graph, colors


def build_kagome_periodic(cells_a: int, cells_b: int) -> SpinGraph:
    """Build a kagome torus of cells_a x cells_b three-site cells.

    Args:
        cells_a: Cells along the first lattice vector
        cells_b: Cells along the second lattice vector

    Returns:
        4-regular SpinGraph of kind kagome-periodic
    """
    if cells_a < 1 or cells_b < 1:
        raise LatticeError(f"invalid size: kagome torus {cells_a}x{cells_b}")
    cells = [(x, y) for y in range(cells_b) for x in range(cells_a)]
    graph, _ = _kagome_torus(cells, lambda x, y: (x % cells_a, y % cells_b), (cells_a, cells_b))
    logger.debug(f"built kagome-periodic {cells_a}x{cells_b}: {graph.n_sites} sites")
    return graph


def build_from_kind(kind: str, shape: Sequence[int]) -> SpinGraph:
    """Dispatch to the builder for ``kind`` with positional size parameters."""
    shape = tuple(int(s) for s in shape)
    if kind == "chain-open":
        return build_chain(shape[0], periodic=False)
    if kind == "chain-periodic":
        return build_chain(shape[0], periodic=True)
    if kind == "kagome-open":
        return build_kagome_open(*shape[:3])
    if kind == "kagome-periodic":
        return build_kagome_periodic(*shape[:2])
    if kind == "kagome-vbc36":
        return vbc36_covering()[0]
    raise LatticeError(f"no builder for graph kind '{kind}'")


# ---------------------------------------------------------------------------
# Colorings and coverings
# ---------------------------------------------------------------------------

_GREEDY_STRATEGIES = (
    "largest_first",
    "smallest_last",
    "saturation_largest_first",
    "connected_sequential_bfs",
    "independent_set",
)


def _sorted_classes(groups: Iterable[Iterable[Edge]]) -> Tuple[Tuple[Edge, ...], ...]:
    return tuple(tuple(sorted(g)) for g in groups if g)


def edge_coloring(graph: SpinGraph) -> EdgeColoring:
    """Partition the bonds into matchings.

    Chains use even bonds then odd bonds (a third class for the closing bond
    of an odd ring); kagome tori with an even first dimension use the fixed
    four-coloring; every other graph falls back to the best of several greedy
    colorings of the line graph.

    Raises:
        ColoringError: The graph has no edges, or no greedy coloring stays
            within max-degree + 1 classes
    """
    if not graph.edges:
        raise ColoringError("graph has no edges to color")

    if graph.kind in ("chain-open", "chain-periodic"):
        n = graph.n_sites
        even = [(i, i + 1) for i in range(0, n - 1, 2)]
        odd = [(i, i + 1) for i in range(1, n - 1, 2)]
        extra: List[Edge] = []
        if graph.kind == "chain-periodic":
            (odd if n % 2 == 0 else extra).append((0, n - 1))
        coloring = EdgeColoring(_sorted_classes([even, odd, extra]))
        coloring.validate(graph)
        return coloring

    if graph.kind == "kagome-periodic" and graph.shape and graph.shape[0] % 2 == 0:
        cells_a, cells_b = graph.shape[:2]
        cells = [(x, y) for y in range(cells_b) for x in range(cells_a)]
        _, colors = _kagome_torus(cells, lambda x, y: (x % cells_a, y % cells_b), graph.shape)
        coloring = EdgeColoring(_sorted_classes(
            [[e for e, c in colors.items() if c == k] for k in range(4)]))
        coloring.validate(graph)
        return coloring

    if graph.kind == "kagome-vbc36":
        return vbc36_covering()[2]

    line = nx.line_graph(graph.to_networkx())
    best: Optional[Dict[Edge, int]] = None
    for strategy in _GREEDY_STRATEGIES:
        assignment = nx.coloring.greedy_color(line, strategy=strategy)
        if best is None or max(assignment.values()) < max(best.values()):
            best = assignment
    n_colors = max(best.values()) + 1
    if n_colors > graph.max_degree() + 1:
        raise ColoringError(f"greedy coloring needs {n_colors} classes, "
                            f"more than max degree + 1 = {graph.max_degree() + 1}")
    logger.info(f"greedy edge coloring of {graph.kind} graph uses {n_colors} classes")
    groups: List[List[Edge]] = [[] for _ in range(n_colors)]
    for edge, color in best.items():
        groups[color].append(_norm(*edge))
    coloring = EdgeColoring(tuple(sorted(_sorted_classes(groups), key=lambda c: c[0])))
    coloring.validate(graph)
    return coloring


def _matching_pairs(g: nx.Graph) -> List[Edge]:
    return sorted(_norm(a, b) for a, b in nx.max_weight_matching(g, maxcardinality=True))


def dimer_covering(graph: SpinGraph) -> DimerCovering:
    """Pair every site with a neighbour.

    Chains pair (0, 1), (2, 3), ...; kagome tori with a four-coloring use its
    first class. Other graphs take a greedy pass over the sorted bonds as the
    regular pattern and repair the boundary by a maximum matching of the
    leftover sites; if the leftovers cannot be paired the whole graph is
    matched instead.

    Raises:
        DimerCoveringError: Odd site count or no perfect matching
    """
    n = graph.n_sites
    if n % 2:
        raise DimerCoveringError(f"no perfect matching: {n} sites is odd")

    if graph.kind in ("chain-open", "chain-periodic"):
        return DimerCovering(pairs=tuple((i, i + 1) for i in range(0, n, 2)))

    if graph.kind == "kagome-periodic" and graph.shape and graph.shape[0] % 2 == 0:
        return DimerCovering(pairs=edge_coloring(graph).classes[0])

    if graph.kind == "kagome-vbc36":
        return vbc36_covering()[1]

    taken = set()
    regular: List[Edge] = []
    for a, b in graph.edges:
        if a not in taken and b not in taken:
            regular.append((a, b))
            taken.update((a, b))
    leftover = graph.to_networkx().subgraph([s for s in range(n) if s not in taken])
    patch = _matching_pairs(leftover)
    if 2 * (len(regular) + len(patch)) == n:
        return DimerCovering(pairs=tuple(sorted(regular + patch)), patched=tuple(patch))

    full = _matching_pairs(graph.to_networkx())
    if 2 * len(full) != n:
        raise DimerCoveringError(f"no perfect matching on the {graph.kind} graph")
    logger.debug("regular dimer pattern could not be patched; using a full matching")
    return DimerCovering(pairs=tuple(full), patched=tuple(full))


def vbc36_covering() -> Tuple[SpinGraph, DimerCovering, EdgeColoring]:
    """Valence-bond-crystal initial state on the 36-site kagome torus.

    The torus is the hexagonal 12-cell supercell spanned by (2, 2) and
    (-2, 4) in cell coordinates. Its four-coloring repeats with the
    supercell; the dimers are the first color class.

    Returns:
        (graph, covering with 18 dimers, four-coloring)
    """
    cells = [(x, y) for y in range(2) for x in range(6)]

    def wrap(x: int, y: int) -> Tuple[int, int]:
        shift = y // 2
        return ((x - 2 * shift) % 6, y - 2 * shift)

    graph, colors = _kagome_torus(cells, wrap, (36,), kind="kagome-vbc36")
    coloring = EdgeColoring(_sorted_classes([[e for e, c in colors.items() if c == k]
                                             for k in range(4)]))
    coloring.validate(graph)
    covering = DimerCovering(pairs=coloring.classes[0])
    covering.validate(graph)
    return graph, covering, coloring


# ---------------------------------------------------------------------------
# Grid embedding
# ---------------------------------------------------------------------------

# 20-site patch: a hexagon of triangles T1..T6 with pendant triangles on
# T1, T3, T4 and T6. Positions are (x, y) on the grid; h, s1, s2, s3 are stations.
_PATCH20_POSITIONS = {
    "a0": (0, 0), "a1": (1, 0), "t2": (2, 0), "a2": (2, 1), "a3": (2, 2), "t3": (3, 2),
    "t4": (2, 3), "a4": (1, 2), "t5": (0, 2), "a5": (0, 1), "t6": (-1, 0), "t1": (0, -1),
    "u1": (1, -1), "w1": (0, -2), "u6": (-1, 1), "w6": (-2, 0), "u3": (4, 1), "w3": (4, 2),
    "u4": (3, 3), "w4": (2, 4),
}
_PATCH20_STATIONS = {"h": (1, 1), "s1": (3, 1), "s2": (1, 3), "s3": (3, 4)}
_PATCH20_TRIANGLES = (
    ("t1", "a0", "a1"), ("a1", "t2", "a2"), ("a2", "a3", "t3"), ("a4", "a3", "t4"),
    ("a5", "t5", "a4"), ("t6", "a0", "a5"), ("t1", "u1", "w1"), ("t6", "u6", "w6"),
    ("t3", "u3", "w3"), ("t4", "u4", "w4"),
)
# Gates name the physical qubit by the site (or station) that starts there.
_PATCH20_SCHEDULE = (
    (("SWAP", "a1", "h"), ("SWAP", "t6", "u6"), ("SWAP", "u3", "s1"), ("SWAP", "t4", "s2"),
     ("SWAP", "u4", "s3"), ("HEIS", "a0", "a5"), ("HEIS", "t1", "u1"), ("HEIS", "a3", "t3"),
     ("HEIS", "a2", "t2"), ("HEIS", "a4", "t5")),
    (("HEIS", "h", "a2"), ("HEIS", "u6", "a5"), ("HEIS", "t6", "w6"), ("HEIS", "s1", "t3"),
     ("HEIS", "s2", "a4"), ("HEIS", "s3", "w4"), ("HEIS", "a0", "t1")),
    (("SWAP", "a1", "h"), ("SWAP", "t6", "u6"), ("SWAP", "u3", "s1"), ("SWAP", "t4", "s2"),
     ("SWAP", "u4", "s3"), ("HEIS", "t1", "w1"), ("HEIS", "a5", "t5"), ("HEIS", "t3", "w3"),
     ("HEIS", "a2", "a3")),
    (("SWAP", "a5", "h"), ("SWAP", "t1", "u1"), ("SWAP", "t3", "s1"), ("HEIS", "a0", "a1"),
     ("HEIS", "t6", "u6"), ("HEIS", "a3", "a4"), ("HEIS", "t4", "u4"), ("HEIS", "u3", "w3")),
    (("HEIS", "h", "a4"), ("HEIS", "u1", "a1"), ("HEIS", "t1", "w1"), ("HEIS", "s1", "a2"),
     ("HEIS", "a0", "t6"), ("HEIS", "a3", "t4")),
    (("SWAP", "a5", "h"), ("SWAP", "t1", "u1"), ("SWAP", "t3", "s1"), ("HEIS", "a1", "t2"),
     ("HEIS", "t6", "w6"), ("HEIS", "t4", "w4")),
)


def _patch20_template() -> nx.Graph:
    template = nx.Graph()
    for a, b, c in _PATCH20_TRIANGLES:
        template.add_edges_from(((a, b), (a, c), (b, c)))
    return template


def _embed_chain(graph: SpinGraph) -> GridEmbedding:
    n = graph.n_sites
    if graph.kind == "chain-open":
        coords = tuple((0, i) for i in range(n))
        shape = (1, n)
    else:
        if n % 2:
            raise EmbeddingError(f"odd ring of {n} sites does not fit a square grid")
        half = n // 2
        coords = tuple((0, i) if i < half else (1, n - 1 - i) for i in range(n))
        shape = (2, half)
    schedule = tuple(tuple(("HEIS", e) for e in c) for c in edge_coloring(graph).classes)
    return GridEmbedding(grid_shape=shape, site_to_qubit=tuple(range(n)), aux_qubits=(),
                         coords=coords, swap_schedule=schedule)


def _embed_patch20(graph: SpinGraph) -> GridEmbedding:
    matcher = isomorphism.GraphMatcher(graph.to_networkx(), _patch20_template())
    if not matcher.is_isomorphic():
        raise EmbeddingError("unsupported embedding: kagome patch does not match the 20-site layout")
    site_of = {name: site for site, name in matcher.mapping.items()}

    # Data qubits keep their site index, stations follow.
    qubit_of: Dict[str, int] = dict(site_of)
    for k, name in enumerate(_PATCH20_STATIONS):
        qubit_of[name] = graph.n_sites + k
    positions = {**_PATCH20_POSITIONS, **_PATCH20_STATIONS}
    xs = [x for x, _ in positions.values()]
    ys = [y for _, y in positions.values()]
    coords: List[Tuple[int, int]] = [(0, 0)] * len(qubit_of)
    for name, q in qubit_of.items():
        x, y = positions[name]
        coords[q] = (y - min(ys), x - min(xs))

    schedule = tuple(
        tuple((kind, (qubit_of[a], qubit_of[b])) for kind, a, b in layer)
        for layer in _PATCH20_SCHEDULE
    )
    return GridEmbedding(
        grid_shape=(max(ys) - min(ys) + 1, max(xs) - min(xs) + 1),
        site_to_qubit=tuple(range(graph.n_sites)),
        aux_qubits=tuple(range(graph.n_sites, graph.n_sites + len(_PATCH20_STATIONS))),
        coords=tuple(coords),
        swap_schedule=schedule,
    )


def embed_on_grid(graph: SpinGraph) -> GridEmbedding:
    """Place a chain or the 20-site kagome patch on a square qubit grid.

    Chains need no stations. The kagome patch uses four swapping stations and
    a six-layer cycle of 30 HEIS and 16 SWAP gates; the layout is matched onto
    the input graph by isomorphism, so any site numbering of that patch works.

    Raises:
        EmbeddingError: Unsupported graph, or a schedule that fails validation
    """
    if graph.kind in ("chain-open", "chain-periodic"):
        embedding = _embed_chain(graph)
    elif graph.kind == "kagome-open" and graph.n_sites == 20 and len(graph.edges) == 30:
        embedding = _embed_patch20(graph)
    else:
        raise EmbeddingError(f"unsupported embedding for {graph.kind} graph with {graph.n_sites} sites")
    embedding.validate(graph)
    logger.debug(f"embedded {graph.kind} on {embedding.grid_shape} grid with "
                 f"{len(embedding.aux_qubits)} stations, cycle depth {embedding.depth}")
    return embedding
