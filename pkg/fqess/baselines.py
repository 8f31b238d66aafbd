"""
Variational baselines for the convergence comparison: VQD (penalised sequential minimisation) and SSVQE
(one shared ansatz over weighted orthogonal references), both on a hardware-efficient ansatz.
"""
from typing import Callable, List, Optional, Sequence  # noqa
from dataclasses import dataclass, field

import numpy as np

from fqess import logger
from fqess import ConfigError, DimensionError
from fqess.sim.pauli import PauliHamiltonian, energy, max_coefficient, merge, noise_terms
from fqess.sim.statevector import StateVector, apply_cz, apply_ry, apply_rz, basis_state, overlap

DEFAULT_DEPTH = 3
ORTHOGONALITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class HardwareEfficientAnsatz:
    """
    Each layer applies Ry then Rz on every qubit, followed by a CZ chain (0,1), (1,2), ...
    Parameters are laid out layer by layer, qubit by qubit, (ry, rz) per qubit.
    """
    n: int
    depth: int = DEFAULT_DEPTH

    def __post_init__(self) -> None:
        if self.n < 1 or self.depth < 0:
            raise ConfigError('ansatz needs n >= 1 and depth >= 0, got n=%s depth=%s' % (self.n, self.depth))

    @property
    def parameter_count(self) -> int:
        return 2 * self.n * self.depth


@dataclass(frozen=True)
class OptimizerSettings:
    step: float = 0.1
    max_iterations: int = 500
    convergence: float = 1e-9
    finite_difference: float = 1e-4
    divergence_window: int = 10
    initial_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.step <= 0 or self.finite_difference <= 0:
            raise ConfigError('step and finite difference must be positive')
        if self.max_iterations < 1:
            raise ConfigError('max_iterations must be at least 1, got %s' % self.max_iterations)


@dataclass(frozen=True)
class VqdConfig:
    levels: int = 2
    depth: int = DEFAULT_DEPTH
    penalty: Optional[float] = None
    noise: float = 0.0
    seed: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self) -> None:
        if self.levels < 1:
            raise ConfigError('VQD needs at least one level, got %s' % self.levels)
        if self.penalty is not None and self.penalty <= 0:
            raise ConfigError('VQD penalty must be positive, got %s' % self.penalty)


@dataclass(frozen=True)
class SsvqeConfig:
    weights: Sequence[float] = (0.8, 0.2)
    depth: int = DEFAULT_DEPTH
    noise: float = 0.0
    seed: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self) -> None:
        weights = list(self.weights)
        if not weights or any(w <= 0 for w in weights):
            raise ConfigError('SSVQE weights must be positive, got %s' % weights)
        if any(a <= b for a, b in zip(weights, weights[1:])):
            raise ConfigError('SSVQE weights must be strictly descending, got %s' % weights)


@dataclass(frozen=True)
class OptimizationResult:
    params: np.ndarray
    value: float
    trace: List[float]
    monitor_trace: List[float]
    iterations: int
    converged: bool
    diverged: bool


@dataclass(frozen=True)
class VariationalResult:
    method: str
    energies: List[float]
    traces: List[List[float]]
    optimizations: List[OptimizationResult]


def default_penalty(h: PauliHamiltonian) -> float:
    return 2 * sum(abs(c) for c in h.coefficients)


def default_ssvqe_weights(levels: int) -> List[float]:
    """
    (0.8, 0.2) for two states, (0.4, 0.3, 0.2, 0.1) for four, linear descent otherwise.
    """
    if levels == 2:
        return [0.8, 0.2]

    total = levels * (levels + 1) / 2
    return [(levels - i) / total for i in range(levels)]


def ansatz_state(ansatz: HardwareEfficientAnsatz, params: Sequence[float],
                 initial: Optional[StateVector] = None) -> StateVector:
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.parameter_count, ):
        logger.error('Ansatz needs %s parameters, got %s', ansatz.parameter_count, params.size)
        raise DimensionError('ansatz needs %s parameters, got %s' % (ansatz.parameter_count, params.size))

    state = initial if initial is not None else basis_state(ansatz.n, 0)
    if state.qubits != ansatz.n:
        raise DimensionError('initial state has %s qubits, ansatz acts on %s' % (state.qubits, ansatz.n))

    angles = params.reshape(ansatz.depth, ansatz.n, 2)
    for layer in angles:
        for qubit, (ry, rz) in enumerate(layer):
            state = apply_rz(apply_ry(state, qubit, ry), qubit, rz)
        for qubit in range(ansatz.n - 1):
            state = apply_cz(state, qubit, qubit + 1)

    return state


def vqd_objective(params: Sequence[float], h: PauliHamiltonian, found_states: Sequence[StateVector],
                  penalties: Sequence[float], ansatz: HardwareEfficientAnsatz,
                  initial: Optional[StateVector] = None) -> float:
    state = ansatz_state(ansatz, params, initial)
    value = energy(h, state)
    for found, beta in zip(found_states, penalties):
        value += beta * abs(overlap(found, state)) ** 2
    return value


def ssvqe_objective(params: Sequence[float], h: PauliHamiltonian, init_states: Sequence[StateVector],
                    weights: Sequence[float], ansatz: HardwareEfficientAnsatz) -> float:
    return sum(w * energy(h, ansatz_state(ansatz, params, init)) for init, w in zip(init_states, weights))


def _gradient(objective: Callable[[np.ndarray], float], params: np.ndarray, h: float) -> np.ndarray:
    gradient = np.empty_like(params)
    for i in range(params.size):
        shift = np.zeros_like(params)
        shift[i] = h
        gradient[i] = (objective(params + shift) - objective(params - shift)) / (2 * h)
    return gradient


def optimize(objective: Callable[[np.ndarray], float],
             params0: Sequence[float],
             settings: OptimizerSettings = OptimizerSettings(),
             monitor: Optional[Callable[[np.ndarray], float]] = None) -> OptimizationResult:
    """
    Fixed-step gradient descent on central finite differences. The reported parameters are the best seen, so the
    reported value never exceeds the initial one. `monitor` is evaluated after every step (e.g. the nominal energy
    when the objective carries noise or penalties).
    """
    params = np.asarray(params0, dtype=float).copy()
    value = objective(params)
    if not np.isfinite(value):
        raise ConfigError('initial objective value is not finite')

    best_params, best_value = params.copy(), value
    trace = [value]
    monitor_trace = [monitor(params)] if monitor is not None else []
    increases = 0
    converged = diverged = False

    iteration = 0
    for iteration in range(1, settings.max_iterations + 1):
        if params.size:
            params = params - settings.step * _gradient(objective, params, settings.finite_difference)
        current = objective(params)
        trace.append(current)
        if monitor is not None:
            monitor_trace.append(monitor(params))

        if current < best_value:
            best_params, best_value = params.copy(), current

        increases = increases + 1 if current > value else 0
        if increases >= settings.divergence_window:
            logger.warning('Objective increased %s steps in a row; stopping at iteration %s', increases, iteration)
            diverged = True
            break

        if abs(current - value) < settings.convergence:
            converged = True
            value = current
            break

        value = current

    logger.debug('Optimizer stopped after %s iterations at %.10f', iteration, best_value)
    return OptimizationResult(params=best_params,
                              value=best_value,
                              trace=trace,
                              monitor_trace=monitor_trace,
                              iterations=iteration,
                              converged=converged,
                              diverged=diverged)


def _applied(h: PauliHamiltonian, intensity: float, rng: np.random.Generator) -> PauliHamiltonian:
    if intensity == 0:
        return h
    return merge(h, noise_terms(h.n, intensity, max_coefficient(h), rng))


def vqd_solve(h: PauliHamiltonian, config: VqdConfig = VqdConfig(),
              initial: Optional[StateVector] = None) -> VariationalResult:
    """
    Sequential VQD: level i minimises its energy plus beta * overlap^2 with every level already found.
    """
    ansatz = HardwareEfficientAnsatz(h.n, config.depth)
    rng = np.random.default_rng(config.seed)
    applied = _applied(h, config.noise, rng)
    beta = config.penalty if config.penalty is not None else default_penalty(h)

    found = []  # type: List[StateVector]
    energies, traces, runs = [], [], []
    for level in range(config.levels):
        penalties = [beta] * len(found)
        frozen = list(found)

        def objective(params: np.ndarray) -> float:
            return vqd_objective(params, applied, frozen, penalties, ansatz, initial)

        def monitor(params: np.ndarray) -> float:
            return energy(h, ansatz_state(ansatz, params, initial))

        params0 = rng.normal(scale=config.optimizer.initial_scale, size=ansatz.parameter_count)
        run = optimize(objective, params0, config.optimizer, monitor)
        state = ansatz_state(ansatz, run.params, initial)
        found.append(state)

        energies.append(energy(h, state))
        traces.append(run.monitor_trace)
        runs.append(run)
        logger.info('VQD level %s: E=%.8f after %s optimizer steps', level + 1, energies[-1], run.iterations)

    return VariationalResult(method='vqd', energies=energies, traces=traces, optimizations=runs)


def ssvqe_solve(h: PauliHamiltonian, config: SsvqeConfig = SsvqeConfig(),
                init_states: Optional[Sequence[StateVector]] = None) -> VariationalResult:
    weights = list(config.weights)
    if init_states is None:
        if len(weights) > 2 ** h.n:
            raise ConfigError('%s weights but only %s basis states' % (len(weights), 2 ** h.n))
        init_states = [basis_state(h.n, i) for i in range(len(weights))]

    init_states = list(init_states)
    if len(init_states) != len(weights):
        raise ConfigError('%s initial states for %s weights' % (len(init_states), len(weights)))

    for i, a in enumerate(init_states):
        for b in init_states[i + 1:]:
            if abs(overlap(a, b)) > ORTHOGONALITY_TOLERANCE:
                logger.error('SSVQE initial states are not orthogonal')
                raise ConfigError('SSVQE initial states must be pairwise orthogonal')

    ansatz = HardwareEfficientAnsatz(h.n, config.depth)
    rng = np.random.default_rng(config.seed)
    applied = _applied(h, config.noise, rng)

    def objective(params: np.ndarray) -> float:
        return ssvqe_objective(params, applied, init_states, weights, ansatz)

    def monitor(params: np.ndarray) -> float:
        return ssvqe_objective(params, h, init_states, weights, ansatz)

    params0 = rng.normal(scale=config.optimizer.initial_scale, size=ansatz.parameter_count)
    run = optimize(objective, params0, config.optimizer, monitor)

    energies = sorted(energy(h, ansatz_state(ansatz, run.params, init)) for init in init_states)
    logger.info('SSVQE weighted objective %.8f after %s optimizer steps', run.monitor_trace[-1], run.iterations)

    return VariationalResult(method='ssvqe', energies=energies, traces=[run.monitor_trace], optimizations=[run])


def ssvqe_target(eigenvalues: Sequence[float], weights: Sequence[float]) -> float:
    return float(sum(w * e for w, e in zip(weights, sorted(eigenvalues))))
