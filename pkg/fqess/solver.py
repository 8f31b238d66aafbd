"""
Full-spectrum solver: bias, power-iterate to the dominant eigenpair, measure the Pauli components, deflate, repeat.
"""
from math import inf
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple  # noqa
from dataclasses import dataclass, field, replace

import numpy as np

from fqess import logger
from fqess import ConfigError, KernelError, StagnationError
from fqess.sim.lcu import ApplyOutcome, build_plan, direct_apply, lcu_apply
from fqess.sim.pauli import (DEFAULT_BIAS_MARGIN, PauliHamiltonian, PauliWord, default_bias, energy, expectations,
                             from_dict, max_coefficient, merge, noise_terms, oracle_spectrum, pauli_basis, shift,
                             apply_hamiltonian)
from fqess.sim.statevector import StateVector, init_product, random_state, rotate_to_eigenbasis, sample_shots

CHEMICAL_ACCURACY = 0.0016
DROP_TOLERANCE = 1e-12
EXHAUSTED_NORM = 1e-10

# Tolerance mode: the estimated remaining energy error must stay below tolerance * ERROR_FRACTION for
# SETTLED_STEPS steps in a row. Deflation passes each level's error on to the levels after it.
ERROR_FRACTION = 1e-3
SETTLED_STEPS = 2
STATIONARY_CHANGE = 1e-13

PATH_LCU = 'lcu'
PATH_DIRECT = 'direct'
REFERENCE_BIAS = 'bias'
REFERENCE_ZERO = 'zero'
NOISE_PER_SOLVE = 'solve'
NOISE_PER_ITERATION = 'iteration'
RANDOM_INITIAL_STATE = 'random'


@dataclass(frozen=True)
class SolverConfig:
    bias: Optional[float] = None
    k: Optional[int] = None
    k_max: int = 10000
    energy_tolerance: float = CHEMICAL_ACCURACY
    apply_path: str = PATH_DIRECT
    noise: float = 0.0
    noise_mode: str = NOISE_PER_SOLVE
    shots: int = 0
    seed: int = 0
    initial_state: str = RANDOM_INITIAL_STATE
    deflation_reference: str = REFERENCE_BIAS
    full_support_max_qubits: int = 6
    restarts: int = 3
    bias_margin: float = DEFAULT_BIAS_MARGIN

    def __post_init__(self) -> None:
        if self.k is not None and self.k < 1:
            raise ConfigError('fixed iteration count must be at least 1, got %s' % self.k)
        if self.k_max < 1:
            raise ConfigError('k_max must be at least 1, got %s' % self.k_max)
        if self.energy_tolerance <= 0:
            raise ConfigError('energy tolerance must be positive, got %s' % self.energy_tolerance)
        if self.apply_path not in (PATH_LCU, PATH_DIRECT):
            raise ConfigError('unknown apply path %r' % self.apply_path)
        if self.noise < 0:
            raise ConfigError('noise intensity must be nonnegative, got %s' % self.noise)
        if self.noise_mode not in (NOISE_PER_SOLVE, NOISE_PER_ITERATION):
            raise ConfigError('unknown noise mode %r' % self.noise_mode)
        if self.shots < 0:
            raise ConfigError('shot count must be nonnegative, got %s' % self.shots)
        if self.deflation_reference not in (REFERENCE_BIAS, REFERENCE_ZERO):
            raise ConfigError('unknown deflation reference %r' % self.deflation_reference)
        if self.restarts < 0:
            raise ConfigError('restart count must be nonnegative, got %s' % self.restarts)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PowerIteration:
    state: StateVector
    k_used: int
    energy_trace: List[float]
    success_probabilities: List[float]
    converged: bool


@dataclass(frozen=True)
class ComponentMeasurement:
    components: Dict[str, float]
    energy: float
    standard_error: float


@dataclass(frozen=True)
class DeflationStep:
    level: int
    components: Dict[str, float]
    energy: float
    deflation_energy: float
    coefficients_next: PauliHamiltonian
    k_used: int
    energy_trace: List[float]
    success_probability_trace: List[float]
    converged: bool
    restarts: int = 0


@dataclass(frozen=True)
class SpectrumLevel:
    energy: float
    state: StateVector
    step: DeflationStep


@dataclass(frozen=True)
class SpectrumResult:
    n: int
    bias: float
    reference: float
    levels: List[SpectrumLevel]
    residual_norm: float
    exhausted: int = 0

    @property
    def energies(self) -> List[float]:
        return [level.energy for level in self.levels]

    @property
    def sorted_energies(self) -> List[float]:
        return sorted(self.energies)

    @property
    def converged(self) -> bool:
        return all(level.step.converged for level in self.levels)

    def to_dict(self) -> dict:
        return {
            'qubits': self.n,
            'bias': self.bias,
            'reference': self.reference,
            'residual_norm': self.residual_norm,
            'degenerate_exhausted': self.exhausted,
            'solve_order': self.energies,
            'sorted': self.sorted_energies,
            'levels': [{
                'level': level.step.level,
                'energy': level.energy,
                'k_used': level.step.k_used,
                'converged': level.step.converged,
                'restarts': level.step.restarts,
                'trace': level.step.energy_trace,
                'success_probabilities': level.step.success_probability_trace,
                'components': level.step.components,
                'coefficients_next': level.step.coefficients_next.as_dict(),
            } for level in self.levels],
        }


@dataclass(frozen=True)
class NoiseStudy:
    energies: np.ndarray
    mean: np.ndarray
    max_deviation: np.ndarray
    results: List[SpectrumResult] = field(default_factory=list)


def _applier(path: str) -> Callable[[PauliHamiltonian, StateVector], ApplyOutcome]:
    if path == PATH_DIRECT:
        return direct_apply

    plans = {}  # type: Dict[PauliHamiltonian, object]

    def apply(operator: PauliHamiltonian, state: StateVector) -> ApplyOutcome:
        if operator not in plans:
            plans.clear()
            plans[operator] = build_plan(operator)
        return lcu_apply(plans[operator], state)

    return apply


def remaining_error(change: float, last_change: Optional[float]) -> float:
    """
    Geometric tail estimate change / (1 - rho), rho being the ratio of the last two energy changes. Infinite until
    the ratio drops below 1.
    """
    if not last_change:
        return inf

    ratio = change / last_change
    return change / (1 - ratio) if ratio < 1 else inf


def power_iterate(h_shifted: PauliHamiltonian,
                  psi0: StateVector,
                  config: SolverConfig,
                  observable: Optional[PauliHamiltonian] = None,
                  rng: Optional[np.random.Generator] = None,
                  noise_scale: Optional[float] = None) -> PowerIteration:
    """
    Apply U repeatedly, renormalizing each step. The trace holds the observable's energy after every application;
    the observable defaults to the unbiased operator, which needs the bias the operator was shifted by.

    Tolerance mode stops once the estimated distance to the limit stays below energy_tolerance * ERROR_FRACTION
    for SETTLED_STEPS consecutive steps, or once the energy stops moving at machine precision.
    """
    if observable is None:
        if config.bias is None:
            logger.error('power_iterate needs an observable or an explicit bias to undo the shift')
            raise ConfigError('power_iterate needs an observable or an explicit bias to undo the shift')
        observable = shift(h_shifted, -config.bias)

    per_step_noise = config.noise > 0 and config.noise_mode == NOISE_PER_ITERATION
    if per_step_noise and rng is None:
        rng = np.random.default_rng(config.seed)
    scale = max_coefficient(observable) if noise_scale is None else noise_scale

    apply = _applier(config.apply_path)
    limit = config.k if config.k is not None else config.k_max

    state = psi0
    previous = energy(observable, state)
    last_change = None  # type: Optional[float]
    settled = 0
    trace = []  # type: List[float]
    probabilities = []  # type: List[float]
    converged = config.k is not None

    for k in range(1, limit + 1):
        operator = merge(h_shifted, noise_terms(h_shifted.n, config.noise, scale, rng)) if per_step_noise else h_shifted
        outcome = apply(operator, state)
        state = outcome.state

        current = energy(observable, state)
        trace.append(current)
        probabilities.append(outcome.success_probability)

        change = abs(current - previous)
        if config.k is None:
            if change <= STATIONARY_CHANGE * max(1.0, abs(current)):
                converged = True
                break

            if remaining_error(change, last_change) < config.energy_tolerance * ERROR_FRACTION:
                settled += 1
            else:
                settled = 0
            if settled >= SETTLED_STEPS:
                converged = True
                break

        previous, last_change = current, change

    if not converged:
        logger.warning('Power iteration reached k_max=%s without meeting the tolerance (last change %.3e)', limit,
                       last_change if last_change is not None else float('nan'))

    return PowerIteration(state=state,
                          k_used=len(trace),
                          energy_trace=trace,
                          success_probabilities=probabilities,
                          converged=converged)


def _sampled_expectation(word: PauliWord, state: StateVector, shots: int, rng: np.random.Generator) -> float:
    if word.is_identity:
        return 1.0

    rotated = rotate_to_eigenbasis(state, word)
    counts = sample_shots(rotated, word.support, shots, rng)
    total = sum(count * (-1) ** outcome.count('1') for outcome, count in counts.counts.items())
    return total / shots


def measure_components(h: PauliHamiltonian,
                       state: StateVector,
                       shots: int = 0,
                       rng: Optional[np.random.Generator] = None,
                       support: Optional[Iterable[PauliWord]] = None) -> ComponentMeasurement:
    """
    Energy components of every word of h plus the optional extra support. With shots, each word is estimated from
    its own batch in the word's eigenbasis.
    """
    words = list(h.words)
    present = {word.label for word in words}
    for word in support or ():
        if word.label not in present:
            words.append(word)
            present.add(word.label)

    if shots:
        if rng is None:
            rng = np.random.default_rng()
        components = np.array([_sampled_expectation(word, state, shots, rng) for word in words])
    else:
        components = expectations(words, state)

    coefficients = h.as_dict()
    weights = np.array([coefficients.get(word.label, 0.0) for word in words])
    variance = float(np.sum(weights ** 2 * (1 - components ** 2))) / shots if shots else 0.0

    return ComponentMeasurement(components={word.label: float(c) for word, c in zip(words, components)},
                                energy=float(np.dot(weights, components)),
                                standard_error=variance ** 0.5)


def deflate(h: PauliHamiltonian, level_energy: float, components: Mapping[str, float],
            drop_tolerance: float = DROP_TOLERANCE) -> PauliHamiltonian:
    """
    alpha_j <- alpha_j - E * eps_j / 2^n. Words outside h enter only when their update reaches drop_tolerance.
    """
    scale = level_energy / 2 ** h.n
    coefficients = h.as_dict()
    for label, component in components.items():
        delta = scale * component
        if label in coefficients:
            coefficients[label] -= delta
        elif abs(delta) >= drop_tolerance:
            coefficients[label] = -delta

    return from_dict(h.n, coefficients)


def _initial_state(spec: str, n: int, rng: np.random.Generator) -> StateVector:
    if spec == RANDOM_INITIAL_STATE:
        return random_state(n, rng)

    if len(spec) != n:
        logger.error("Initial state '%s' does not describe %s qubits", spec, n)
        raise ConfigError('initial state %r does not describe %s qubits' % (spec, n))

    return init_product(spec)


def resolve_bias(h: PauliHamiltonian, config: SolverConfig) -> float:
    return config.bias if config.bias is not None else default_bias(h, config.bias_margin)


def _reference(config: SolverConfig, bias: float) -> float:
    return bias if config.deflation_reference == REFERENCE_BIAS else 0.0


def _iterate_with_restarts(applied: PauliHamiltonian,
                           observable: PauliHamiltonian,
                           config: SolverConfig,
                           rng: np.random.Generator,
                           noise_scale: float) -> Tuple[PowerIteration, int]:
    psi0 = _initial_state(config.initial_state, observable.n, rng)
    for attempt in range(config.restarts + 1):
        try:
            return power_iterate(applied, psi0, config, observable=observable, rng=rng,
                                 noise_scale=noise_scale), attempt
        except KernelError as e:
            logger.warning('Initial state fell into the kernel (p=%.3e); restarting from a random state', e.probability)
            psi0 = random_state(observable.n, rng)

    logger.error('Power iteration hit the kernel %s times', config.restarts + 1)
    raise KernelError('power iteration hit the kernel %s times' % (config.restarts + 1))


def solve_spectrum(h: PauliHamiltonian, config: SolverConfig) -> SpectrumResult:
    bias = resolve_bias(h, config)
    reference = _reference(config, bias)
    level_config = replace(config, bias=bias)
    rng = np.random.default_rng(config.seed)

    support = pauli_basis(h.n) if h.n <= config.full_support_max_qubits else None
    scale = max_coefficient(h)
    solve_noise = None  # type: Optional[PauliHamiltonian]
    if config.noise > 0 and config.noise_mode == NOISE_PER_SOLVE:
        solve_noise = noise_terms(h.n, config.noise, scale, rng)

    logger.info('Solving %s levels on %s qubits with bias %.6f (reference %.6f)', 2 ** h.n, h.n, bias, reference)

    current = h
    levels = []  # type: List[SpectrumLevel]
    for index in range(2 ** h.n):
        if index and max_coefficient(shift(current, reference)) < EXHAUSTED_NORM:
            logger.info('Residual vanished after %s levels; %s levels are degenerate-exhausted',
                        index, 2 ** h.n - index)
            break

        h_shifted = shift(current, bias)
        applied = merge(h_shifted, solve_noise) if solve_noise is not None else h_shifted
        iteration, restarts = _iterate_with_restarts(applied, current, level_config, rng, scale)

        measured = measure_components(current, iteration.state, config.shots, rng, support=support)
        deflation_energy = measured.energy - reference
        next_h = deflate(current, deflation_energy, measured.components)

        step = DeflationStep(level=index + 1,
                             components=measured.components,
                             energy=measured.energy,
                             deflation_energy=deflation_energy,
                             coefficients_next=next_h,
                             k_used=iteration.k_used,
                             energy_trace=iteration.energy_trace,
                             success_probability_trace=iteration.success_probabilities,
                             converged=iteration.converged,
                             restarts=restarts)
        levels.append(SpectrumLevel(energy=measured.energy, state=iteration.state, step=step))
        logger.info('Level %s: E=%.8f after %s applications', index + 1, measured.energy, iteration.k_used)

        current = next_h

    return SpectrumResult(n=h.n,
                          bias=bias,
                          reference=reference,
                          levels=levels,
                          residual_norm=max_coefficient(shift(current, reference)),
                          exhausted=2 ** h.n - len(levels))


def exact_deflation(h: PauliHamiltonian, levels: int, config: SolverConfig) -> PauliHamiltonian:
    """
    Deflate the lowest `levels` oracle eigenpairs out of h, using the config's bias and reference.
    """
    spectrum = oracle_spectrum(h)
    reference = _reference(config, resolve_bias(h, config))
    basis = pauli_basis(h.n)

    current = h
    for index in range(levels):
        components = expectations(basis, spectrum.vector(index))
        current = deflate(current, float(spectrum.eigenvalues[index]) - reference,
                          {word.label: float(c) for word, c in zip(basis, components)})
    return current


def min_iterations_to_accuracy(h: PauliHamiltonian,
                               level: int,
                               config: SolverConfig,
                               psi0: Optional[StateVector] = None,
                               tolerance: float = CHEMICAL_ACCURACY) -> int:
    """
    Smallest k whose level estimate is within `tolerance` of the oracle, with the lower levels deflated exactly.
    """
    if not 1 <= level <= 2 ** h.n:
        raise ConfigError('level %s out of range for %s qubits' % (level, h.n))

    bias = resolve_bias(h, config)
    current = exact_deflation(h, level - 1, config)
    target = float(oracle_spectrum(h).eigenvalues[level - 1])

    rng = np.random.default_rng(config.seed)
    state = psi0 if psi0 is not None else _initial_state(config.initial_state, h.n, rng)
    h_shifted = shift(current, bias)
    apply = _applier(config.apply_path)

    for k in range(1, config.k_max + 1):
        state = apply(h_shifted, state).state
        if abs(energy(current, state) - target) < tolerance:
            logger.debug('Level %s reached accuracy %s after %s applications', level, tolerance, k)
            return k

    logger.error('Level %s did not reach accuracy %s within %s applications', level, tolerance, config.k_max)
    raise StagnationError('level %s did not reach accuracy within %s applications' % (level, config.k_max))


def bias_from_learning_rate(learning_rate: float) -> float:
    if learning_rate <= 0:
        logger.error('Learning rate must be positive, got %s', learning_rate)
        raise ConfigError('learning rate must be positive, got %s' % learning_rate)

    return 1 / (2 * learning_rate)


def gradient_step(h: PauliHamiltonian, psi: StateVector, learning_rate: float) -> StateVector:
    """
    One normalized step of |X> - gamma * grad <X|H|X> = (I - 2 gamma H)|X>.
    """
    output = psi.amplitudes - 2 * learning_rate * apply_hamiltonian(h, psi)
    norm = np.linalg.norm(output)
    if norm < 1e-12:
        raise KernelError('gradient step vanished')

    return StateVector(output / norm)


def replica_seeds(seed: int, replicas: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(replicas)]


def noise_replicas(h: PauliHamiltonian, config: SolverConfig, replicas: int = 5,
                   seed: Optional[int] = None) -> NoiseStudy:
    """
    Independent noisy solves; the spread is the maximum deviation from the mean per level.
    """
    if replicas < 1:
        raise ConfigError('replica count must be positive, got %s' % replicas)

    results = []  # type: List[SpectrumResult]
    for replica, replica_seed in enumerate(replica_seeds(config.seed if seed is None else seed, replicas)):
        logger.info('Noise replica %s/%s (seed %s)', replica + 1, replicas, replica_seed)
        results.append(solve_spectrum(h, replace(config, seed=replica_seed)))

    width = min(len(result.levels) for result in results)
    energies = np.array([result.sorted_energies[:width] for result in results])
    mean = energies.mean(axis=0)
    return NoiseStudy(energies=energies,
                      mean=mean,
                      max_deviation=np.max(np.abs(energies - mean), axis=0),
                      results=results)
