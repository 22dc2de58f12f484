"""
BFGS minimization and multistart VQE.

Every joint evaluation of cost and gradient counts as one function call.
Rounds draw their starting angles from independent child streams of one
``numpy.random.SeedSequence``, so results do not depend on the thread count.
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .ansatz import AnsatzCircuit, build_hva
from .errors import AnsatzError, ConfigError, HeisenbergVQEError, OptimizationError
from .lattice import DimerCovering, EdgeColoring, GridEmbedding, SpinGraph
from .simulator import COSTS, energy, energy_and_gradient, fidelity, lift_to_register, run
from .spectra import SpectrumResult
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

CostFunction = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class OptimizerConfig:
    """Settings of one multistart batch.

    Args:
        rounds: Number of independent local minimizations
        seed: Root seed of the per-round streams
        init_halfwidth: Starting angles are drawn from [-w, w)
        gradient_tolerance: Stop when the largest gradient entry is below this
        max_iterations: BFGS iteration cap
        cost: "energy", "energy+penalty" or "infidelity"
        penalty_weight: Weight of <(S_z - 1)^2> in the penalty cost
        threads: Rounds run concurrently
    """
    rounds: int = 10
    seed: int = 0
    init_halfwidth: float = 1e-3
    gradient_tolerance: float = 1e-5
    max_iterations: int = 10000
    cost: str = "energy"
    penalty_weight: float = 1.0
    threads: int = 1

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError(f"rounds must be at least 1, got {self.rounds}")
        if not self.init_halfwidth > 0:
            raise ConfigError(f"init_halfwidth must be positive, got {self.init_halfwidth}")
        if not self.gradient_tolerance > 0:
            raise ConfigError(f"gradient_tolerance must be positive, got {self.gradient_tolerance}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.cost not in COSTS:
            raise ConfigError(f"unknown cost '{self.cost}'")
        if self.penalty_weight < 0:
            raise ConfigError(f"penalty_weight must be non-negative, got {self.penalty_weight}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OptimizerConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown optimizer settings: {sorted(unknown)}")
        config = cls(**known)
        config.validate()
        return config


@dataclass
class LocalMinimum:
    theta: np.ndarray
    value: float
    n_calls: int
    n_iterations: int
    converged: bool
    reason: str


def minimize_bfgs(cost: CostFunction, theta0: np.ndarray, config: OptimizerConfig) -> LocalMinimum:
    """Quasi-Newton descent with a strong-Wolfe line search.

    Args:
        cost: Returns (value, gradient) for a parameter vector
        theta0: Starting point
        config: Supplies gradient_tolerance and max_iterations

    Returns:
        LocalMinimum with the number of joint evaluations

    Raises:
        OptimizationError: The cost returned a non-finite value or gradient
    """
    calls = 0

    def counted(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        nonlocal calls
        calls += 1
        value, grad = cost(theta)
        grad = np.asarray(grad, dtype=np.float64)
        if not math.isfinite(value) or not np.all(np.isfinite(grad)):
            raise OptimizationError(f"non-finite cost {value} after {calls} calls",
                                    theta=np.array(theta), value=value)
        return float(value), grad

    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.size == 0:
        value, _ = counted(theta0)
        return LocalMinimum(theta=theta0, value=value, n_calls=calls, n_iterations=0,
                            converged=True, reason="no parameters")

    result = minimize(counted, theta0, jac=True, method="BFGS",
                      options={"gtol": config.gradient_tolerance, "norm": np.inf,
                               "maxiter": config.max_iterations, "c1": 1e-4, "c2": 0.9})
    return LocalMinimum(theta=np.asarray(result.x), value=float(result.fun), n_calls=calls,
                        n_iterations=int(result.nit), converged=bool(result.success),
                        reason=str(result.message))


@dataclass
class RunRecord:
    """One local minimum of a multistart batch."""
    p: int
    round: int
    energy: float
    infidelity: Optional[float]
    n_function_calls: int
    wall_time: float
    theta_init: List[float]
    theta_final: List[float]
    converged: bool
    reason: str
    cost_value: float = float("nan")

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.energy)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(
            p=int(data["p"]),
            round=int(data["round"]),
            energy=float(data["energy"]),
            infidelity=None if data.get("infidelity") is None else float(data["infidelity"]),
            n_function_calls=int(data["n_function_calls"]),
            wall_time=float(data["wall_time"]),
            theta_init=[float(x) for x in data["theta_init"]],
            theta_final=[float(x) for x in data["theta_final"]],
            converged=bool(data["converged"]),
            reason=str(data.get("reason", "")),
            cost_value=float(data.get("cost_value", float("nan"))),
        )


@dataclass
class MultistartResult:
    records: List[RunRecord]
    best: Optional[RunRecord] = None
    failures: List[str] = field(default_factory=list)


def select_best(records: List[RunRecord]) -> Optional[RunRecord]:
    """Lowest energy, ties broken by the lowest round index."""
    usable = [r for r in records if not r.failed]
    if not usable:
        return None
    return min(usable, key=lambda r: (r.energy, r.round))


def initial_angles(config: OptimizerConfig, n_parameters: int) -> List[np.ndarray]:
    """One starting vector per round, uniform in [-w, w)."""
    children = np.random.SeedSequence(config.seed).spawn(config.rounds)
    w = config.init_halfwidth
    return [np.random.default_rng(child).uniform(-w, w, n_parameters) for child in children]


def multistart_vqe(circuit: AnsatzCircuit, graph: SpinGraph, config: OptimizerConfig,
                   reference: Optional[SpectrumResult] = None) -> MultistartResult:
    """Run ``config.rounds`` local minimizations from random starts.

    A round that aborts is recorded with a NaN energy and its reason; the
    other rounds continue.

    Args:
        circuit: Ansatz to optimize
        graph: Interaction graph
        config: Optimizer settings
        reference: Ground space used for infidelities and the infidelity cost

    Returns:
        MultistartResult with records ordered by round
    """
    config.validate()
    if config.cost == "infidelity" and reference is None:
        raise ConfigError("infidelity cost needs an exact-diagonalization reference")
    ground = None if reference is None else reference.ground_vectors
    lifted = None if ground is None else lift_to_register(ground, circuit.site_to_qubit, circuit.n_qubits)

    def cost(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        result = energy_and_gradient(circuit, theta, graph, cost=config.cost,
                                     reference=ground, penalty_weight=config.penalty_weight)
        return result.energy, result.gradient

    def one_round(index: int, theta0: np.ndarray) -> RunRecord:
        start = time.monotonic()
        try:
            minimum = minimize_bfgs(cost, theta0, config)
        except HeisenbergVQEError as e:
            logger.warning(f"round {index} at p={circuit.p} aborted: {e}")
            return RunRecord(p=circuit.p, round=index, energy=float("nan"), infidelity=None,
                             n_function_calls=0, wall_time=time.monotonic() - start,
                             theta_init=theta0.tolist(), theta_final=theta0.tolist(),
                             converged=False, reason=f"aborted: {e}")
        state = run(circuit, minimum.theta)
        e = energy(state, graph, circuit.site_to_qubit)
        infidelity = None if lifted is None else max(0.0, 1.0 - fidelity(state, lifted))
        record = RunRecord(p=circuit.p, round=index, energy=e, infidelity=infidelity,
                           n_function_calls=minimum.n_calls, wall_time=time.monotonic() - start,
                           theta_init=theta0.tolist(), theta_final=minimum.theta.tolist(),
                           converged=minimum.converged, reason=minimum.reason,
                           cost_value=minimum.value)
        logger.debug(f"p={circuit.p} round {index}: E={e:.12f} after {minimum.n_calls} calls")
        return record

    starts = initial_angles(config, circuit.M)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(one_round, range(config.rounds), starts))
    else:
        records = [one_round(i, theta0) for i, theta0 in enumerate(starts)]

    best = select_best(records)
    failures = [f"round {r.round}: {r.reason}" for r in records if r.failed]
    if best is not None:
        logger.info(f"p={circuit.p}: best energy {best.energy:.12f} (round {best.round}), "
                    f"{len(failures)} failed rounds")
    return MultistartResult(records=records, best=best, failures=failures)


@dataclass
class SpinGapResult:
    e_s0: float
    e_s1: float
    gap_estimate: float
    singlet: MultistartResult
    triplet: MultistartResult


def spin_gap(graph: SpinGraph, coloring: EdgeColoring, covering: DimerCovering, p: int,
             config: OptimizerConfig, mode: str = "OPG",
             embedding: Optional[GridEmbedding] = None,
             triplet_pair: Optional[Tuple[int, int]] = None) -> SpinGapResult:
    """Estimate the singlet-triplet gap from two multistart runs.

    The S = 0 run starts from the singlet covering with the energy cost. The
    S = 1 run replaces one dimer by |t_1> = |00> and adds the penalty
    A <(S_z - 1)^2> to keep the optimizer in the S_z = 1 sector.

    ``triplet_pair`` is the covering dimer, as two site indices, that starts
    in the triplet; it defaults to the first dimer of the covering.
    """
    circuit = build_hva(graph, coloring, covering, p, mode=mode, embedding=embedding)
    if triplet_pair is None:
        pair = circuit.covering[0]
    else:
        a, b = triplet_pair
        if not (0 <= a < graph.n_sites and 0 <= b < graph.n_sites):
            raise OptimizationError(f"triplet pair {triplet_pair} is not a pair of sites")
        pair = (circuit.site_to_qubit[a], circuit.site_to_qubit[b])
    try:
        triplet_circuit = circuit.with_triplet(pair, 1)
    except AnsatzError as e:
        raise OptimizationError(f"triplet pair {triplet_pair}: {e}") from e

    singlet_config = OptimizerConfig(**{**config.to_dict(), "cost": "energy"})
    singlet = multistart_vqe(circuit, graph, singlet_config)
    triplet_config = OptimizerConfig(**{**config.to_dict(), "cost": "energy+penalty"})
    triplet = multistart_vqe(triplet_circuit, graph, triplet_config)

    if singlet.best is None or triplet.best is None:
        raise OptimizationError("every round of a spin-gap run failed")
    e_s0, e_s1 = singlet.best.energy, triplet.best.energy
    logger.info(f"spin gap estimate at p={p}: {e_s1 - e_s0:.10f}")
    return SpinGapResult(e_s0=e_s0, e_s1=e_s1, gap_estimate=e_s1 - e_s0,
                         singlet=singlet, triplet=triplet)
