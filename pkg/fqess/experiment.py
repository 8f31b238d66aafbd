"""
Two-qubit replica of the hardware run: one ancilla (qubit 1) encodes the two-term split
(alpha0 - lambda0) * I + r * (n . sigma) with Ry(beta), the work qubit (qubit 0) is prepared with Ry(theta), and the
angle is recycled from the measured |1> frequency after every postselected application.
"""
from math import asin, atan2, cos, hypot, isfinite, pi, sin, sqrt, tan
from typing import List, Optional, Tuple  # noqa
from dataclasses import dataclass, field

import numpy as np

from fqess import logger
from fqess import ConfigError, HamiltonianError, ShotStarvationError
from fqess.sim.pauli import PauliHamiltonian, from_dict, oracle_spectrum
from fqess.sim.statevector import (RegisterLayout, StateVector, apply_hadamard_layer, apply_ry,
                                   apply_selected_matrix, basis_state, joint_state, postselect, sample_shots)
from fqess.solver import deflate, replica_seeds

WORK_QUBIT = 0
ANCILLA_QUBIT = 1
LAYOUT = RegisterLayout(work_qubits=1, ancilla_qubits=1)

HARDWARE_GROUND_ANGLE = -2.6897
INITIAL_THETA = pi / 2
DEFAULT_SHOTS = 10000
DEFAULT_ITERATIONS = 8

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class TwoLevelHamiltonian:
    """
    H = identity * I + x * X + z * Z on the two relevant configurations.
    """
    identity: float
    x: float
    z: float

    def __post_init__(self) -> None:
        if not all(isfinite(c) for c in (self.identity, self.x, self.z)):
            raise HamiltonianError('two-level coefficients must be finite')

    @property
    def r(self) -> float:
        return hypot(self.x, self.z)

    def matrix(self) -> np.ndarray:
        return np.array([[self.identity + self.z, self.x], [self.x, self.identity - self.z]], dtype=float)

    def energy(self, eps_x: float, eps_z: float) -> float:
        return self.identity + self.x * eps_x + self.z * eps_z

    def to_hamiltonian(self) -> PauliHamiltonian:
        return from_dict(1, {'I': self.identity, 'X': self.x, 'Z': self.z})

    @classmethod
    def from_hamiltonian(cls, h: PauliHamiltonian) -> 'TwoLevelHamiltonian':
        if h.n != 1:
            raise HamiltonianError('two-level Hamiltonian needs one qubit, got %s' % h.n)
        if abs(h.coefficient('Y')) > 0:
            raise HamiltonianError('two-level Hamiltonian must be real (no Y term)')

        return cls(identity=h.coefficient('I'), x=h.coefficient('X'), z=h.coefficient('Z'))


# Two-configuration H2 coefficients of the hardware run (Hartree).
HARDWARE_HAMILTONIAN = TwoLevelHamiltonian(identity=-1.04235, x=0.1813, z=-0.78865)


@dataclass(frozen=True)
class IterationRecord:
    theta_in: float
    p0: float
    p1: float
    p0_h: float
    p1_h: float
    eps_z: float
    eps_x: float
    energy: float
    theta_out: float
    accepted: float
    accepted_h: float


@dataclass(frozen=True)
class ExperimentParams:
    bias: Optional[float] = None
    iterations: int = DEFAULT_ITERATIONS
    shots: int = 0
    replicas: int = 1
    seed: int = 0
    theta0: float = INITIAL_THETA
    excited: bool = True

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError('experiment needs at least one iteration, got %s' % self.iterations)
        if self.shots < 0:
            raise ConfigError('shot count must be nonnegative, got %s' % self.shots)
        if self.replicas < 1:
            raise ConfigError('replica count must be positive, got %s' % self.replicas)


@dataclass(frozen=True)
class ExperimentTrace:
    hamiltonian: TwoLevelHamiltonian
    bias: float
    beta: float
    chains: List[List[IterationRecord]]

    @property
    def energies(self) -> np.ndarray:
        return np.array([[record.energy for record in chain] for chain in self.chains])

    @property
    def mean(self) -> np.ndarray:
        # Offset by the first chain so identical replicas average to exactly that chain.
        energies = self.energies
        return energies[0] + (energies - energies[0]).mean(axis=0)

    @property
    def error(self) -> np.ndarray:
        return np.max(np.abs(self.energies - self.mean), axis=0)


@dataclass(frozen=True)
class ExcitedStateRun:
    deflated: TwoLevelHamiltonian
    beta: float
    trace: ExperimentTrace
    ground_components: dict = field(default_factory=dict)


def encode_angle(h: TwoLevelHamiltonian, bias: float) -> float:
    """
    beta with cos(beta/2) : sin(beta/2) = (alpha0 - lambda0) : r, wrapped into (-pi, pi]. The wrap flips both
    ancilla amplitudes together, which only changes the global sign of the applied operator.
    """
    shifted = h.identity - bias
    if shifted == 0 and h.r == 0:
        logger.error('Cannot encode the zero operator')
        raise HamiltonianError('cannot encode the zero operator')

    beta = 2 * atan2(h.r, shifted)
    return beta - 2 * pi if beta > pi else beta


def recover_bias(h: TwoLevelHamiltonian, beta: float) -> float:
    """
    Inverse of encode_angle: the bias whose encoding is beta.
    """
    half = beta / 2
    if abs(sin(half)) < 1e-15:
        raise ConfigError('beta=%s encodes no traceless part; the bias cannot be recovered' % beta)

    shifted = 0.0 if abs(cos(half)) < 1e-15 else h.r / tan(half)
    return h.identity - shifted


def theta_update(p1: float) -> float:
    if not -1e-12 <= p1 <= 1 + 1e-12:
        logger.error('p1=%s is not a probability', p1)
        raise ConfigError('p1=%s is not a probability' % p1)

    return -2 * asin(sqrt(min(1.0, max(0.0, p1))))


def branch_unitary(h: TwoLevelHamiltonian) -> np.ndarray:
    if h.r == 0:
        return np.eye(2, dtype=complex)
    return (h.x * _X + h.z * _Z) / h.r


def _decoded(theta: float, beta: float, h: TwoLevelHamiltonian) -> StateVector:
    ancilla = np.array([cos(beta / 2), sin(beta / 2)], dtype=complex)
    work = apply_ry(basis_state(1, 0), WORK_QUBIT, theta)
    state = apply_selected_matrix(joint_state(ancilla, work), LAYOUT, 1, branch_unitary(h))
    return apply_hadamard_layer(state, [ANCILLA_QUBIT])


def _exact_frequencies(state: StateVector) -> Tuple[float, float, float]:
    work, probability = postselect(state, LAYOUT, '0')
    p = work.probabilities()
    return float(p[0]), float(p[1]), probability


def _sampled_frequencies(state: StateVector, shots: int, rng: np.random.Generator) -> Tuple[float, float, float]:
    counts = sample_shots(state, [ANCILLA_QUBIT, WORK_QUBIT], shots, rng).counts
    zeros, ones = counts.get('00', 0), counts.get('01', 0)
    accepted = zeros + ones
    if not accepted:
        logger.error('No shot out of %s passed postselection', shots)
        raise ShotStarvationError('no shot out of %s passed postselection' % shots, shots=shots)

    return zeros / accepted, ones / accepted, float(accepted)


def run_iteration(theta: float, beta: float, h: TwoLevelHamiltonian, shots: int = 0,
                  rng: Optional[np.random.Generator] = None) -> IterationRecord:
    """
    Two circuits per iteration: the work qubit read in Z, then again after a Hadamard to read X. `accepted` is the
    postselection probability in exact mode and the kept shot count otherwise.
    """
    decoded = _decoded(theta, beta, h)
    rotated = apply_hadamard_layer(decoded, [WORK_QUBIT])

    if shots:
        if rng is None:
            rng = np.random.default_rng()
        p0, p1, accepted = _sampled_frequencies(decoded, shots, rng)
        p0_h, p1_h, accepted_h = _sampled_frequencies(rotated, shots, rng)
    else:
        p0, p1, accepted = _exact_frequencies(decoded)
        p0_h, p1_h, accepted_h = _exact_frequencies(rotated)

    eps_z = p0 - p1
    eps_x = p0_h - p1_h
    return IterationRecord(theta_in=theta,
                           p0=p0,
                           p1=p1,
                           p0_h=p0_h,
                           p1_h=p1_h,
                           eps_z=eps_z,
                           eps_x=eps_x,
                           energy=h.energy(eps_x, eps_z),
                           theta_out=theta_update(p1),
                           accepted=accepted,
                           accepted_h=accepted_h)


def _chain(encoded: TwoLevelHamiltonian, measured: TwoLevelHamiltonian, beta: float, params: ExperimentParams,
           rng: np.random.Generator) -> List[IterationRecord]:
    theta = params.theta0
    records = []  # type: List[IterationRecord]
    for iteration in range(params.iterations):
        record = run_iteration(theta, beta, encoded, params.shots, rng)
        if measured is not encoded:
            record = _remeasure(record, measured)
        records.append(record)
        logger.debug('Iteration %s: theta=%.6f E=%.8f', iteration + 1, theta, record.energy)
        theta = record.theta_out
    return records


def _remeasure(record: IterationRecord, h: TwoLevelHamiltonian) -> IterationRecord:
    values = dict(record.__dict__)
    values['energy'] = h.energy(record.eps_x, record.eps_z)
    return IterationRecord(**values)


def _run(encoded: TwoLevelHamiltonian, measured: TwoLevelHamiltonian, bias: float,
         params: ExperimentParams) -> ExperimentTrace:
    beta = encode_angle(encoded, bias)
    chains = []
    for replica, seed in enumerate(replica_seeds(params.seed, params.replicas)):
        chains.append(_chain(encoded, measured, beta, params, np.random.default_rng(seed)))
        logger.info('Replica %s/%s: E=%.8f after %s iterations', replica + 1, params.replicas,
                    chains[-1][-1].energy, params.iterations)

    return ExperimentTrace(hamiltonian=measured, bias=bias, beta=beta, chains=chains)


def hardware_bias(h: TwoLevelHamiltonian = HARDWARE_HAMILTONIAN) -> float:
    return recover_bias(h, HARDWARE_GROUND_ANGLE)


def run_experiment(h: TwoLevelHamiltonian, params: ExperimentParams = ExperimentParams()) -> ExperimentTrace:
    bias = params.bias if params.bias is not None else hardware_bias(h)
    logger.info('Experiment: bias %.6f, beta %.6f, %s iterations, %s shots, %s replicas', bias,
                encode_angle(h, bias), params.iterations, params.shots, params.replicas)
    return _run(h, h, bias, params)


def excited_state_run(h: TwoLevelHamiltonian, ground: ExperimentTrace,
                      params: ExperimentParams = ExperimentParams()) -> ExcitedStateRun:
    """
    Deflate with the last ground-state components (energy taken relative to the bias), re-encode at the same bias
    and run the protocol again. Energies are always read off with the original coefficients.
    """
    last = ground.chains[0][-1]
    components = {'I': 1.0, 'X': last.eps_x, 'Z': last.eps_z}
    deflated = TwoLevelHamiltonian.from_hamiltonian(
        deflate(h.to_hamiltonian(), last.energy - ground.bias, components))

    trace = _run(deflated, h, ground.bias, params)
    logger.info('Excited-state run: beta %.6f, E=%.8f', trace.beta, trace.mean[-1])
    return ExcitedStateRun(deflated=deflated, beta=trace.beta, trace=trace, ground_components=components)


def oracle_levels(h: TwoLevelHamiltonian) -> np.ndarray:
    return oracle_spectrum(h.to_hamiltonian()).eigenvalues
