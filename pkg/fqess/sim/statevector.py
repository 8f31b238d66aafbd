"""
Exact complex-amplitude simulation of the circuit primitives.

Qubit 0 is the least significant bit of the basis index. Product specs, Pauli labels and ancilla patterns are
written in tensor-product order: the leftmost character belongs to the highest-index qubit.
"""
from math import cos, sin, sqrt
from typing import Dict, Iterable, List, Sequence, TYPE_CHECKING  # noqa
from dataclasses import dataclass

import numpy as np

from fqess import logger
from fqess import DimensionError, KernelError

if TYPE_CHECKING:
    from fqess.sim.pauli import PauliWord  # noqa

NORM_TOLERANCE = 1e-10
POSTSELECT_THRESHOLD = 1e-14

_SQRT2_INV = 1 / sqrt(2)
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
_S_DAGGER = np.array([[1, 0], [0, -1j]], dtype=complex)
_PRODUCT_FACTORS = {
    '0': np.array([1, 0], dtype=complex),
    '1': np.array([0, 1], dtype=complex),
    '+': np.array([1, 1], dtype=complex) * _SQRT2_INV,
    '-': np.array([1, -1], dtype=complex) * _SQRT2_INV,
}


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dim = amplitudes.shape[0]
        if dim < 2 or dim & (dim - 1):
            logger.error('State dimension must be a power of two, got %s', dim)
            raise DimensionError('state dimension %s is not a power of two' % dim)

        amplitudes.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @property
    def qubits(self) -> int:
        return int(self.amplitudes.shape[0]).bit_length() - 1

    @property
    def dim(self) -> int:
        return int(self.amplitudes.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class RegisterLayout:
    work_qubits: int
    ancilla_qubits: int

    @property
    def total(self) -> int:
        return self.work_qubits + self.ancilla_qubits

    @property
    def ancilla_indices(self) -> List[int]:
        return list(range(self.work_qubits, self.total))


@dataclass(frozen=True)
class ShotCounts:
    counts: Dict[str, int]
    shots: int

    def frequency(self, outcome: str) -> float:
        return self.counts.get(outcome, 0) / self.shots

    def to_dict(self) -> dict:
        return {'shots': self.shots, 'counts': dict(self.counts)}


def _normalized(amplitudes: np.ndarray) -> StateVector:
    norm = np.linalg.norm(amplitudes)
    if norm < POSTSELECT_THRESHOLD:
        raise KernelError('cannot normalize a vanishing vector', probability=float(norm) ** 2)

    return StateVector(amplitudes / norm)


def from_amplitudes(amplitudes: Sequence[complex], normalize: bool = True) -> StateVector:
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if normalize:
        return _normalized(amplitudes)

    if abs(np.linalg.norm(amplitudes) - 1) > NORM_TOLERANCE:
        logger.error('Amplitudes are not normalized: norm=%s', np.linalg.norm(amplitudes))
        raise DimensionError('amplitudes are not normalized')

    return StateVector(amplitudes)


def init_product(spec: Iterable[str]) -> StateVector:
    """
    Product state from per-qubit choices among '0', '1', '+', '-', written left (highest qubit) to right (qubit 0).
    """
    factors = list(spec)
    if not factors:
        logger.error('Product state spec is empty')
        raise DimensionError('product state needs at least one qubit')

    amplitudes = np.array([1], dtype=complex)
    for factor in factors:
        if factor not in _PRODUCT_FACTORS:
            logger.error("Illegal product factor '%s', expected one of 0, 1, +, -", factor)
            raise DimensionError('illegal product factor %r' % factor)

        amplitudes = np.kron(amplitudes, _PRODUCT_FACTORS[factor])

    return StateVector(amplitudes)


def basis_state(qubits: int, index: int) -> StateVector:
    if not 0 <= index < 2 ** qubits:
        raise DimensionError('basis index %s out of range for %s qubits' % (index, qubits))

    amplitudes = np.zeros(2 ** qubits, dtype=complex)
    amplitudes[index] = 1
    return StateVector(amplitudes)


def random_state(qubits: int, rng: np.random.Generator) -> StateVector:
    amplitudes = rng.normal(size=2 ** qubits) + 1j * rng.normal(size=2 ** qubits)
    return _normalized(amplitudes)


def overlap(a: StateVector, b: StateVector) -> complex:
    _check_same_size(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(overlap(a, b)) ** 2


def _check_same_size(a: StateVector, b: StateVector) -> None:
    if a.qubits != b.qubits:
        logger.error('State sizes differ: %s vs %s qubits', a.qubits, b.qubits)
        raise DimensionError('state sizes differ: %s vs %s qubits' % (a.qubits, b.qubits))


def _check_qubits(state: StateVector, qubits: Sequence[int]) -> None:
    if len(set(qubits)) != len(qubits):
        logger.error('Qubit indices must be distinct: %s', list(qubits))
        raise DimensionError('qubit indices must be distinct: %s' % list(qubits))

    for qubit in qubits:
        if not 0 <= qubit < state.qubits:
            logger.error('Qubit index %s out of range for %s qubits', qubit, state.qubits)
            raise DimensionError('qubit index %s out of range for %s qubits' % (qubit, state.qubits))


def _parity(values: np.ndarray, bits: int) -> np.ndarray:
    parity = np.zeros_like(values)
    for bit in range(bits):
        parity ^= (values >> bit) & 1
    return parity


def apply_masks(amplitudes: np.ndarray, x_mask: int, z_mask: int, y_count: int) -> np.ndarray:
    """
    Act with the Pauli word given in symplectic form: P|b> = i^y (-1)^{|b & z|} |b ^ x>.
    """
    dim = amplitudes.shape[0]
    indices = np.arange(dim)
    source = indices ^ x_mask
    signs = 1 - 2 * _parity(source & z_mask, dim.bit_length() - 1)
    return (1j ** (y_count % 4)) * signs * amplitudes[source]


def _apply_single(amplitudes: np.ndarray, matrix: np.ndarray, qubit: int, qubits: int) -> np.ndarray:
    # Axis 0 of the reshaped tensor is the highest qubit.
    axis = qubits - 1 - qubit
    tensor = np.moveaxis(amplitudes.reshape([2] * qubits), axis, -1)
    tensor = np.tensordot(tensor, matrix, axes=([-1], [1]))
    return np.moveaxis(tensor, -1, axis).reshape(-1)


def apply_gate(state: StateVector, matrix: np.ndarray, qubit: int) -> StateVector:
    _check_qubits(state, [qubit])
    return StateVector(_apply_single(state.amplitudes, np.asarray(matrix, dtype=complex), qubit, state.qubits))


def apply_pauli_word(state: StateVector, word: 'PauliWord', targets: Sequence[int]) -> StateVector:
    """
    targets[k] is the qubit acted on by the k-th character of the word label.
    """
    if len(targets) != word.n:
        logger.error('Word %s needs %s targets, got %s', word.label, word.n, len(targets))
        raise DimensionError('word %s needs %s targets, got %s' % (word.label, word.n, len(targets)))

    _check_qubits(state, targets)

    x_mask, z_mask, y_count = 0, 0, 0
    for axis, qubit in zip(word.label, targets):
        if axis in 'XY':
            x_mask |= 1 << qubit
        if axis in 'ZY':
            z_mask |= 1 << qubit
        if axis == 'Y':
            y_count += 1

    return StateVector(apply_masks(state.amplitudes, x_mask, z_mask, y_count))


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    c, s = cos(angle / 2), sin(angle / 2)
    return apply_gate(state, np.array([[c, -s], [s, c]], dtype=complex), qubit)


def apply_rz(state: StateVector, qubit: int, angle: float) -> StateVector:
    matrix = np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)
    return apply_gate(state, matrix, qubit)


def apply_s_dagger(state: StateVector, qubit: int) -> StateVector:
    return apply_gate(state, _S_DAGGER, qubit)


def apply_hadamard_layer(state: StateVector, qubits: Iterable[int]) -> StateVector:
    qubits = list(qubits)
    _check_qubits(state, qubits)

    amplitudes = state.amplitudes
    for qubit in qubits:
        amplitudes = _apply_single(amplitudes, _HADAMARD, qubit, state.qubits)

    return StateVector(amplitudes)


def apply_cz(state: StateVector, a: int, b: int) -> StateVector:
    _check_qubits(state, [a, b])
    indices = np.arange(state.dim)
    both = ((indices >> a) & 1) & ((indices >> b) & 1)
    return StateVector(state.amplitudes * (1 - 2 * both))


def rotate_to_eigenbasis(state: StateVector, word: 'PauliWord') -> StateVector:
    """
    Rotate so that measuring the word's support in the computational basis measures the word.
    """
    for position, axis in enumerate(word.label):
        qubit = word.n - 1 - position
        if axis == 'X':
            state = apply_hadamard_layer(state, [qubit])
        elif axis == 'Y':
            state = apply_hadamard_layer(apply_s_dagger(state, qubit), [qubit])

    return state


def _check_layout(state: StateVector, layout: RegisterLayout) -> None:
    if state.qubits != layout.total:
        logger.error('State has %s qubits but layout needs %s', state.qubits, layout.total)
        raise DimensionError('state has %s qubits but layout needs %s' % (state.qubits, layout.total))


def _blocks(state: StateVector, layout: RegisterLayout) -> np.ndarray:
    # Row j holds the work amplitudes for ancilla basis state j.
    return np.array(state.amplitudes).reshape(2 ** layout.ancilla_qubits, 2 ** layout.work_qubits)


def joint_state(ancilla: np.ndarray, work: StateVector) -> StateVector:
    return StateVector(np.kron(np.asarray(ancilla, dtype=complex), work.amplitudes))


def apply_selected_word(state: StateVector, layout: RegisterLayout, branch: int, word: 'PauliWord') -> StateVector:
    _check_layout(state, layout)
    if not 0 <= branch < 2 ** layout.ancilla_qubits:
        logger.error('Branch %s out of range for %s ancilla qubits', branch, layout.ancilla_qubits)
        raise DimensionError('branch %s out of range for %s ancilla qubits' % (branch, layout.ancilla_qubits))

    if word.n != layout.work_qubits:
        logger.error('Word %s does not fit %s work qubits', word.label, layout.work_qubits)
        raise DimensionError('word %s does not fit %s work qubits' % (word.label, layout.work_qubits))

    blocks = _blocks(state, layout)
    blocks[branch] = apply_masks(blocks[branch], word.x_mask, word.z_mask, word.y_count)
    return StateVector(blocks.reshape(-1))


def apply_selected_matrix(state: StateVector, layout: RegisterLayout, branch: int, matrix: np.ndarray) -> StateVector:
    _check_layout(state, layout)
    if not 0 <= branch < 2 ** layout.ancilla_qubits:
        raise DimensionError('branch %s out of range for %s ancilla qubits' % (branch, layout.ancilla_qubits))

    blocks = _blocks(state, layout)
    blocks[branch] = np.asarray(matrix, dtype=complex) @ blocks[branch]
    return StateVector(blocks.reshape(-1))


def branch_probabilities(state: StateVector, layout: RegisterLayout) -> np.ndarray:
    _check_layout(state, layout)
    return np.sum(np.abs(_blocks(state, layout)) ** 2, axis=1)


def postselect(state: StateVector, layout: RegisterLayout, pattern: str) -> tuple:
    """
    Condition on the ancilla register reading `pattern`. Returns the renormalized work state and the probability.
    """
    _check_layout(state, layout)
    if len(pattern) != layout.ancilla_qubits or set(pattern) - {'0', '1'}:
        logger.error("Pattern '%s' does not match %s ancilla qubits", pattern, layout.ancilla_qubits)
        raise DimensionError('pattern %r does not match %s ancilla qubits' % (pattern, layout.ancilla_qubits))

    block = _blocks(state, layout)[int(pattern, 2) if pattern else 0]
    probability = float(np.sum(np.abs(block) ** 2))
    if probability < POSTSELECT_THRESHOLD:
        logger.debug('Postselection on %s vanished (p=%s)', pattern, probability)
        raise KernelError('postselected branch %r vanished' % pattern, probability=probability)

    return StateVector(block / sqrt(probability)), min(probability, 1.0)


def sample_shots(state: StateVector, qubits: Sequence[int], shots: int, rng: np.random.Generator) -> ShotCounts:
    """
    Multinomial draw from the marginal over `qubits`. Outcome strings list the qubits in the order given.
    """
    qubits = list(qubits)
    if not qubits:
        logger.error('Cannot sample an empty qubit set')
        raise DimensionError('cannot sample an empty qubit set')

    if shots < 1:
        logger.error('Shot count must be positive, got %s', shots)
        raise DimensionError('shot count must be positive, got %s' % shots)

    _check_qubits(state, qubits)

    indices = np.arange(state.dim)
    outcome = np.zeros(state.dim, dtype=np.int64)
    for qubit in qubits:
        outcome = (outcome << 1) | ((indices >> qubit) & 1)

    marginal = np.bincount(outcome, weights=state.probabilities(), minlength=2 ** len(qubits))
    draws = rng.multinomial(shots, marginal / marginal.sum())

    counts = {}  # type: Dict[str, int]
    for value, count in enumerate(draws):
        if count:
            counts[format(value, '0%db' % len(qubits))] = int(count)

    return ShotCounts(counts=counts, shots=shots)
