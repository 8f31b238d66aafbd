"""
Pauli words, weighted Pauli-sum Hamiltonians, their coefficient-file format and the dense oracle.
"""
import itertools
from functools import lru_cache
from math import ceil, isfinite, log2
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple  # noqa
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from fqess import logger
from fqess import DimensionError, HamiltonianError
from fqess.sim.statevector import StateVector, apply_masks

AXES = 'IXYZ'
DENSE_QUBIT_LIMIT = 12
HERMITIAN_TOLERANCE = 1e-12
DEFAULT_BIAS_MARGIN = 0.1
WORD_TABLE_CACHE = 4096

_AXIS_MATRICES = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliWord:
    """
    Tensor-product label such as 'XZ'. The leftmost axis acts on the highest-index qubit, the rightmost on qubit 0.
    """
    label: str

    def __post_init__(self) -> None:
        if not self.label or set(self.label) - set(AXES):
            raise HamiltonianError('illegal Pauli word %r' % self.label)

    @property
    def n(self) -> int:
        return len(self.label)

    @property
    def is_identity(self) -> bool:
        return set(self.label) == {'I'}

    def axis(self, qubit: int) -> str:
        return self.label[self.n - 1 - qubit]

    @property
    def support(self) -> List[int]:
        return [q for q in range(self.n) if self.axis(q) != 'I']

    @property
    def x_mask(self) -> int:
        return sum(1 << q for q in range(self.n) if self.axis(q) in 'XY')

    @property
    def z_mask(self) -> int:
        return sum(1 << q for q in range(self.n) if self.axis(q) in 'ZY')

    @property
    def y_count(self) -> int:
        return self.label.count('Y')

    def __str__(self) -> str:
        return self.label


def identity_word(n: int) -> PauliWord:
    return PauliWord('I' * n)


@dataclass(frozen=True)
class WeightedTerm:
    coefficient: float
    word: PauliWord


@dataclass(frozen=True)
class PauliHamiltonian:
    n: int
    terms: Tuple[WeightedTerm, ...]

    def __post_init__(self) -> None:
        seen = set()
        for term in self.terms:
            if term.word.n != self.n:
                raise HamiltonianError('word %s does not act on %s qubits' % (term.word.label, self.n))

            if term.word.label in seen:
                raise HamiltonianError('duplicate word %s' % term.word.label)

            if not isfinite(term.coefficient):
                raise HamiltonianError('coefficient of %s is not finite' % term.word.label)

            seen.add(term.word.label)

    @property
    def words(self) -> List[PauliWord]:
        return [term.word for term in self.terms]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([term.coefficient for term in self.terms], dtype=float)

    def as_dict(self) -> Dict[str, float]:
        return {term.word.label: term.coefficient for term in self.terms}

    def coefficient(self, label: str) -> float:
        return self.as_dict().get(label, 0.0)

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True, eq=False)
class DenseHermitian:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class ExactSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def vector(self, k: int) -> StateVector:
        return StateVector(self.eigenvectors[:, k])


@dataclass(frozen=True)
class ResourceEstimate:
    work_qubits: int
    terms: int
    padded_terms: int
    ancilla_qubits: int
    qubit_total: int
    gate_estimate: int


def from_dict(n: int, coefficients: Mapping[str, float]) -> PauliHamiltonian:
    return PauliHamiltonian(n, tuple(WeightedTerm(float(c), PauliWord(label)) for label, c in coefficients.items()))


def merge(a: PauliHamiltonian, b: PauliHamiltonian) -> PauliHamiltonian:
    if a.n != b.n:
        raise HamiltonianError('cannot add Hamiltonians on %s and %s qubits' % (a.n, b.n))

    coefficients = a.as_dict()
    for term in b.terms:
        coefficients[term.word.label] = coefficients.get(term.word.label, 0.0) + term.coefficient

    return from_dict(a.n, coefficients)


def parse_hamiltonian(text: str) -> PauliHamiltonian:
    """
    Parse '<coefficient> <axis string>' lines. '#' starts a comment; duplicate words are summed.
    """
    coefficients = {}  # type: Dict[str, float]
    n = None  # type: Optional[int]

    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue

        fields = line.split()
        if len(fields) != 2:
            logger.error('Line %s: expected "<coefficient> <axes>", got %r', line_number, raw_line)
            raise HamiltonianError('line %s: expected "<coefficient> <axes>"' % line_number)

        try:
            coefficient = float(fields[0])
        except ValueError:
            logger.error('Line %s: malformed coefficient %r', line_number, fields[0])
            raise HamiltonianError('line %s: malformed coefficient %r' % (line_number, fields[0]))

        if not isfinite(coefficient):
            logger.error('Line %s: coefficient %r is not finite', line_number, fields[0])
            raise HamiltonianError('line %s: coefficient is not finite' % line_number)

        label = fields[1].upper()
        if set(label) - set(AXES):
            logger.error('Line %s: illegal axis character in %r', line_number, fields[1])
            raise HamiltonianError('line %s: illegal axis character in %r' % (line_number, fields[1]))

        if n is None:
            n = len(label)
        elif len(label) != n:
            logger.error('Line %s: word %s has length %s, expected %s', line_number, label, len(label), n)
            raise HamiltonianError('line %s: inconsistent word length' % line_number)

        coefficients[label] = coefficients.get(label, 0.0) + coefficient

    if n is None:
        logger.error('Hamiltonian file has no terms')
        raise HamiltonianError('no terms found')

    return from_dict(n, coefficients)


def serialize_hamiltonian(h: PauliHamiltonian, header: Iterable[str] = ()) -> str:
    lines = ['# %s' % line for line in header]
    lines.extend('%r %s' % (term.coefficient, term.word.label) for term in h.terms)
    return '\n'.join(lines) + '\n'


def load_hamiltonian(path: Path) -> PauliHamiltonian:
    path = Path(path)
    logger.debug('Reading Hamiltonian from %s', path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        logger.error('Could not read %s: %s', path, e)
        raise HamiltonianError('could not read %s' % path)

    try:
        return parse_hamiltonian(text)
    except HamiltonianError as e:
        raise HamiltonianError('%s: %s' % (path, e))


def _check_dense_limit(n: int, limit: int) -> None:
    if n > limit:
        logger.error('%s qubits exceed the dense limit of %s', n, limit)
        raise HamiltonianError('%s qubits exceed the dense limit of %s' % (n, limit))


def word_matrix(word: PauliWord) -> np.ndarray:
    matrix = np.array([[1]], dtype=complex)
    for axis in word.label:
        matrix = np.kron(matrix, _AXIS_MATRICES[axis])
    return matrix


def to_dense(h: PauliHamiltonian, limit: int = DENSE_QUBIT_LIMIT) -> DenseHermitian:
    _check_dense_limit(h.n, limit)

    matrix = np.zeros((2 ** h.n, 2 ** h.n), dtype=complex)
    for term in h.terms:
        matrix += term.coefficient * word_matrix(term.word)

    return DenseHermitian(matrix)


def exact_spectrum(a: DenseHermitian) -> ExactSpectrum:
    matrix = a.matrix if isinstance(a, DenseHermitian) else np.asarray(a, dtype=complex)
    deviation = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if deviation > HERMITIAN_TOLERANCE:
        logger.error('Matrix is not Hermitian (max deviation %s)', deviation)
        raise HamiltonianError('matrix is not Hermitian (max deviation %s)' % deviation)

    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    return ExactSpectrum(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def oracle_spectrum(h: PauliHamiltonian) -> ExactSpectrum:
    return exact_spectrum(to_dense(h))


def _check_state(n: int, state: StateVector) -> None:
    if state.qubits != n:
        logger.error('State has %s qubits, operator acts on %s', state.qubits, n)
        raise DimensionError('state has %s qubits, operator acts on %s' % (state.qubits, n))


def word_expectation(word: PauliWord, state: StateVector) -> float:
    _check_state(word.n, state)
    action = apply_masks(state.amplitudes, word.x_mask, word.z_mask, word.y_count)
    value = float(np.vdot(state.amplitudes, action).real)
    return min(1.0, max(-1.0, value))


def expectations(words: Iterable[PauliWord], state: StateVector) -> np.ndarray:
    return np.array([word_expectation(word, state) for word in words], dtype=float)


@lru_cache(maxsize=WORD_TABLE_CACHE)
def _word_table(word: PauliWord) -> Tuple[np.ndarray, np.ndarray]:
    # (P psi)[c] = phase[c] * psi[source[c]]
    indices = np.arange(2 ** word.n)
    phases = apply_masks(np.ones(indices.shape[0], dtype=complex), word.x_mask, word.z_mask, word.y_count)
    return indices ^ word.x_mask, phases


def _compiled(h: PauliHamiltonian) -> Tuple[np.ndarray, np.ndarray]:
    tables = [_word_table(term.word) for term in h.terms]
    sources = np.stack([source for source, _ in tables])
    weights = h.coefficients[:, np.newaxis] * np.stack([phases for _, phases in tables])
    return sources, weights


def apply_hamiltonian(h: PauliHamiltonian, state: StateVector) -> np.ndarray:
    """
    Unnormalized H|psi>, summed term by term.
    """
    _check_state(h.n, state)
    if not h.terms:
        return np.zeros(state.dim, dtype=complex)

    sources, weights = _compiled(h)
    return np.sum(weights * state.amplitudes[sources], axis=0)


def energy(h: PauliHamiltonian, state: StateVector) -> float:
    return float(np.vdot(state.amplitudes, apply_hamiltonian(h, state)).real)


def shift(h: PauliHamiltonian, bias: float) -> PauliHamiltonian:
    """
    H - bias * I: only the identity coefficient changes; the identity term is inserted first if missing.
    """
    if bias == 0:
        return h

    label = 'I' * h.n
    coefficients = h.as_dict()
    if label in coefficients:
        coefficients[label] -= bias
        return from_dict(h.n, coefficients)

    shifted = {label: -bias}
    shifted.update(coefficients)
    return from_dict(h.n, shifted)


def coefficient_bound(h: PauliHamiltonian) -> float:
    """
    alpha_I + sum of |alpha_j| over the other words: an upper bound on every eigenvalue.
    """
    identity = 'I' * h.n
    return sum(term.coefficient if term.word.label == identity else abs(term.coefficient) for term in h.terms)


def default_bias(h: PauliHamiltonian, margin: float = DEFAULT_BIAS_MARGIN) -> float:
    bias = coefficient_bound(h) + margin
    return bias if bias > 0 else margin


def noise_terms(n: int, intensity: float, scale: float, rng: np.random.Generator) -> PauliHamiltonian:
    """
    One draw of sum_i delta_i Z_i with delta_i = intensity * u_i * scale, u_i uniform in [-1, 1].
    """
    if intensity < 0:
        logger.error('Noise intensity must be nonnegative, got %s', intensity)
        raise HamiltonianError('noise intensity must be nonnegative, got %s' % intensity)

    draws = rng.uniform(-1.0, 1.0, size=n)
    if intensity == 0:
        return PauliHamiltonian(n, ())

    coefficients = {}  # type: Dict[str, float]
    for qubit, u in enumerate(draws):
        label = ''.join('Z' if q == qubit else 'I' for q in reversed(range(n)))
        coefficients[label] = float(intensity * u * scale)

    return from_dict(n, coefficients)


def max_coefficient(h: PauliHamiltonian) -> float:
    return float(np.max(np.abs(h.coefficients))) if h.terms else 0.0


def add_noise(h: PauliHamiltonian, intensity: float, rng: np.random.Generator,
              scale: Optional[float] = None) -> PauliHamiltonian:
    delta = noise_terms(h.n, intensity, max_coefficient(h) if scale is None else scale, rng)
    if not delta.terms:
        return h

    return merge(h, delta)


def padded_length(terms: int) -> int:
    return 1 << max(0, ceil(log2(terms))) if terms > 1 else 1


def estimate_resources(h: PauliHamiltonian) -> ResourceEstimate:
    """
    Formula evaluations: n + log2(L_pad) qubits and n * L_pad * log2(L_pad) basic gates (constant 1).
    """
    if not h.terms:
        raise HamiltonianError('resource estimate needs at least one term')

    padded = padded_length(len(h.terms))
    ancilla = padded.bit_length() - 1
    return ResourceEstimate(work_qubits=h.n,
                            terms=len(h.terms),
                            padded_terms=padded,
                            ancilla_qubits=ancilla,
                            qubit_total=h.n + ancilla,
                            gate_estimate=h.n * padded * ancilla)


def label_from_index(n: int, index: int) -> str:
    digits = []
    for _ in range(n):
        digits.append(AXES[index % 4])
        index //= 4
    return ''.join(reversed(digits))


def pauli_basis(n: int) -> List[PauliWord]:
    return [PauliWord(''.join(axes)) for axes in itertools.product(AXES, repeat=n)]


def random_hamiltonian(n: int, terms: int, rng: np.random.Generator, include_identity: bool = True) -> PauliHamiltonian:
    if not 1 <= terms <= 4 ** n:
        raise HamiltonianError('term count %s out of range for %s qubits' % (terms, n))

    indices = rng.choice(4 ** n, size=terms, replace=False)
    if include_identity and 0 not in indices:
        indices[0] = 0

    coefficients = rng.uniform(-1.0, 1.0, size=terms)
    return from_dict(n, {label_from_index(n, int(i)): float(c) for i, c in zip(indices, coefficients)})
