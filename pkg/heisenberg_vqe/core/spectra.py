"""
Exact diagonalization of the Heisenberg antiferromagnet.

H = sum over bonds of S_i . S_j with J = 1. Basis index bit q is qubit q
(bit 0 = spin up). The Hamiltonian is applied matrix-free with bit masks,
assembled as a sparse matrix for Lanczos, or built densely for small systems.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import comb

from .errors import ConvergenceError, SpectrumError
from .lattice import Edge, SpinGraph
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

ED_MAX_SITES = 24
DENSE_MAX_SITES = 12
# Sectors up to this dimension are diagonalized densely instead of by Lanczos.
DENSE_CUTOFF = 256
DEGENERACY_TOLERANCE = 1e-8


@dataclass
class SpectrumResult:
    """Lowest eigenpairs of H.

    Args:
        eigenvalues: k lowest energies in ascending order, with multiplicity
        ground_vectors: Orthonormal basis of the lowest eigenspace, shape (g, 2**n)
        gap_01: Distance from the ground level to the next distinct level
        residuals: ||Hv - Ev|| for every computed pair
        magnetization: S_z sector the search was restricted to, if any
    """
    eigenvalues: np.ndarray
    ground_vectors: np.ndarray
    gap_01: float
    residuals: np.ndarray
    magnetization: Optional[float] = None

    @property
    def e0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def e1(self) -> float:
        return float(self.eigenvalues[0] + self.gap_01)

    @property
    def degeneracy(self) -> int:
        return int(self.ground_vectors.shape[0])


def _n_from_length(length: int) -> int:
    n = int(length).bit_length() - 1
    if length < 1 or 1 << n != length:
        raise SpectrumError(f"vector length {length} is not a power of two")
    return n


def _mapped_edges(graph: SpinGraph, site_to_qubit: Optional[Sequence[int]]) -> Tuple[Edge, ...]:
    if site_to_qubit is None:
        return graph.edges
    return tuple((site_to_qubit[a], site_to_qubit[b]) for a, b in graph.edges)


def apply_hamiltonian(graph: SpinGraph, vector: np.ndarray,
                      site_to_qubit: Optional[Sequence[int]] = None) -> np.ndarray:
    """Apply H to a state without building the matrix.

    Per bond: ZZ/4 on the diagonal plus 1/2 between the two anti-aligned
    configurations.

    Args:
        graph: Interaction graph
        vector: 2**n amplitudes, n at least the number of sites
        site_to_qubit: Register qubit of every site; identity when omitted

    Returns:
        New array H @ vector
    """
    vector = np.asarray(vector)
    n = _n_from_length(vector.shape[0])
    edges = _mapped_edges(graph, site_to_qubit)
    if site_to_qubit is None and n != graph.n_sites:
        raise SpectrumError(f"vector has {n} qubits but the graph has {graph.n_sites} sites")
    if any(q >= n for e in edges for q in e):
        raise SpectrumError(f"graph does not fit a register of {n} qubits")

    idx = np.arange(vector.shape[0], dtype=np.int64)
    out = np.zeros_like(vector, dtype=np.result_type(vector.dtype, np.float64))
    for a, b in edges:
        ba = (idx >> a) & 1
        bb = (idx >> b) & 1
        anti = ba != bb
        out += np.where(anti, -0.25, 0.25) * vector
        flipped = idx[anti] ^ ((1 << a) | (1 << b))
        out[anti] += 0.5 * vector[flipped]
    return out


def sector_basis(n: int, magnetization: Optional[float] = None) -> np.ndarray:
    """Basis states of the full space or of one S_z sector, ascending."""
    idx = np.arange(1 << n, dtype=np.int64)
    if magnetization is None:
        return idx
    ups = n / 2 + magnetization
    if ups != int(ups) or not 0 <= ups <= n:
        raise SpectrumError(f"no S_z = {magnetization} sector for {n} sites")
    popcount = np.zeros_like(idx)
    for q in range(n):
        popcount += (idx >> q) & 1
    # bit 1 is spin down
    return idx[popcount == n - int(ups)]


def hamiltonian_sparse(graph: SpinGraph, magnetization: Optional[float] = None) -> scipy.sparse.csr_matrix:
    """Real sparse H restricted to the basis of ``sector_basis``."""
    n = graph.n_sites
    basis = sector_basis(n, magnetization)
    dim = basis.shape[0]

    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for a, b in graph.edges:
        ba = (basis >> a) & 1
        bb = (basis >> b) & 1
        anti = ba != bb
        diag += np.where(anti, -0.25, 0.25)
        src = np.nonzero(anti)[0]
        dst_states = basis[anti] ^ ((1 << a) | (1 << b))
        dst = dst_states if magnetization is None else np.searchsorted(basis, dst_states)
        rows.append(dst)
        cols.append(src)
        vals.append(np.full(len(src), 0.5))
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag)
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return matrix.tocsr()


def dense_hamiltonian(graph: SpinGraph, magnetization: Optional[float] = None,
                      max_sites: int = DENSE_MAX_SITES) -> np.ndarray:
    if graph.n_sites > max_sites:
        raise SpectrumError(f"dense Hamiltonian refused for {graph.n_sites} > {max_sites} sites")
    return hamiltonian_sparse(graph, magnetization).toarray()


def dense_spectrum(graph: SpinGraph, magnetization: Optional[float] = None,
                   max_sites: int = DENSE_MAX_SITES) -> np.ndarray:
    """All eigenvalues of the explicitly built H, ascending.

    Raises:
        SpectrumError: More than ``max_sites`` sites
    """
    return np.linalg.eigvalsh(dense_hamiltonian(graph, magnetization, max_sites))


def _ground_block(eigenvalues: np.ndarray) -> Tuple[int, Optional[float]]:
    e0 = eigenvalues[0]
    threshold = DEGENERACY_TOLERANCE * max(1.0, abs(e0))
    ground = int(np.sum(eigenvalues - e0 <= threshold))
    above = eigenvalues[ground:]
    return ground, (float(above[0]) if above.size else None)


def _sector_eigenpairs(graph: SpinGraph, k: int, tol: float,
                       magnetization: Optional[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lowest eigenpairs of one sector (or of the full space).

    Returns:
        (values ascending, vectors in the sector basis as columns, residuals)
    """
    n = graph.n_sites
    matrix = hamiltonian_sparse(graph, magnetization)
    dim = matrix.shape[0]
    k = min(k, dim)

    if dim <= DENSE_CUTOFF:
        values, vectors = np.linalg.eigh(matrix.toarray())
    else:
        operator = scipy.sparse.linalg.LinearOperator(
            (dim, dim), matvec=matrix.dot, dtype=np.float64)
        # Deterministic, generic start vector
        v0 = np.cos(np.arange(1, dim + 1) * 0.7071067811865476)
        requested = k + 1
        while True:
            requested = min(requested, dim - 1)
            try:
                values, vectors = scipy.sparse.linalg.eigsh(
                    operator, k=requested, which="SA", tol=tol,
                    maxiter=10 * requested * n, v0=v0)
            except scipy.sparse.linalg.ArpackNoConvergence as e:
                residuals = [float(np.linalg.norm(matrix @ v - lam * v))
                             for lam, v in zip(e.eigenvalues, e.eigenvectors.T)]
                raise ConvergenceError(
                    f"Lanczos did not converge for {n} sites with k={requested}",
                    eigenvalues=e.eigenvalues, residuals=residuals) from e
            order = np.argsort(values)
            values, vectors = values[order], vectors[:, order]
            ground, _ = _ground_block(values)
            if ground < requested or requested >= dim - 1:
                break
            logger.debug(f"ground level fills all {requested} Lanczos vectors; widening")
            requested *= 2

    residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    return values, vectors, residuals


def _sector_magnitudes(n: int) -> List[float]:
    """|S_z| values of an n-site system, the smallest first."""
    lowest = 0.0 if n % 2 == 0 else 0.5
    return [lowest + j for j in range(int(n / 2 - lowest) + 1)]


def low_spectrum(graph: SpinGraph, k: int = 4, tol: float = 1e-10,
                 magnetization: Optional[float] = None,
                 max_sites: int = ED_MAX_SITES) -> SpectrumResult:
    """Lowest eigenpairs by implicitly restarted Lanczos.

    H conserves S_z, so the full-space problem is solved sector by sector in
    order of increasing |S_z| and the levels are merged; the -S_z sector is
    the spin flip of the +S_z one. Every level of a sector also occurs in all
    sectors of smaller |S_z|, so the search stops at the first sector whose
    lowest level lies above the k-th level found so far. When every computed
    vector of a sector belongs to its lowest level, k is widened until the
    next level is seen. Small sectors are diagonalized densely.

    Args:
        graph: Interaction graph
        k: Number of eigenvalues to return, with multiplicity
        tol: ARPACK convergence tolerance
        magnetization: Restrict to one S_z sector
        max_sites: Refuse larger systems

    Returns:
        SpectrumResult with ground vectors embedded in the full 2**n space

    Raises:
        SpectrumError: Bad k or a system above max_sites
        ConvergenceError: Lanczos hit its iteration cap
    """
    n = graph.n_sites
    if k < 1:
        raise SpectrumError(f"k must be positive, got {k}")
    if n > max_sites:
        raise SpectrumError(f"exact diagonalization refused for {n} > {max_sites} sites")

    flip = (1 << n) - 1
    found: List[Tuple[float, float, np.ndarray]] = []

    def collect(values: np.ndarray, vectors: np.ndarray, residuals: np.ndarray,
                basis: np.ndarray, mirrored: bool) -> None:
        for j in range(values.shape[0]):
            full = np.zeros(1 << n)
            full[basis] = vectors[:, j]
            found.append((float(values[j]), float(residuals[j]), full))
            if mirrored:
                partner = np.zeros(1 << n)
                partner[basis ^ flip] = vectors[:, j]
                found.append((float(values[j]), float(residuals[j]), partner))

    if magnetization is not None or (1 << n) <= DENSE_CUTOFF:
        values, vectors, residuals = _sector_eigenpairs(graph, k, tol, magnetization)
        collect(values, vectors, residuals, sector_basis(n, magnetization), False)
    else:
        for m in _sector_magnitudes(n):
            values, vectors, residuals = _sector_eigenpairs(graph, k, tol, m)
            if len(found) >= k:
                kth = sorted(item[0] for item in found)[k - 1]
                if values[0] > kth + DEGENERACY_TOLERANCE * max(1.0, abs(kth)):
                    break
            collect(values, vectors, residuals, sector_basis(n, m), m > 0)

    found.sort(key=lambda item: item[0])
    values = np.array([item[0] for item in found])
    residuals = np.array([item[1] for item in found])
    k = min(k, values.shape[0])
    worst = float(np.max(residuals[:k]))
    if worst > 1e-8:
        logger.warning(f"largest eigenpair residual {worst:.2e} exceeds 1e-8")

    ground, e1 = _ground_block(values)
    block, _ = np.linalg.qr(np.stack([item[2] for item in found[:ground]], axis=1))
    gap = float(e1 - values[0]) if e1 is not None else float("nan")
    logger.info(f"ED on {n} sites: E0 = {values[0]:.12f}, degeneracy {ground}, gap {gap:.6g}")
    return SpectrumResult(eigenvalues=values[:k].copy(),
                          ground_vectors=block.T.astype(np.complex128), gap_01=gap,
                          residuals=residuals[:k].copy(), magnetization=magnetization)


def sector_dimension(n: int, magnetization: float) -> int:
    return int(comb(n, int(n / 2 + magnetization), exact=True))
