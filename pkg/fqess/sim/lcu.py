"""
One application of U = H - lambda0 * I on the work register: encode, entangle, decode, postselect.
"""
from math import sqrt
from typing import List, Optional, Tuple  # noqa
from dataclasses import dataclass

import numpy as np

from fqess import logger
from fqess import HamiltonianError, KernelError
from fqess.sim.pauli import PauliHamiltonian, PauliWord, apply_hamiltonian, identity_word, padded_length
from fqess.sim.statevector import (RegisterLayout, StateVector, apply_hadamard_layer, apply_selected_word,
                                   branch_probabilities, joint_state, postselect)

KERNEL_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class LcuPlan:
    n: int
    live_terms: int
    padded_terms: int
    ancilla_amplitudes: np.ndarray
    words: Tuple[PauliWord, ...]
    normalization: float
    bias: Optional[float] = None

    @property
    def ancilla_qubits(self) -> int:
        return self.padded_terms.bit_length() - 1

    @property
    def layout(self) -> RegisterLayout:
        return RegisterLayout(work_qubits=self.n, ancilla_qubits=self.ancilla_qubits)


@dataclass(frozen=True)
class ApplyOutcome:
    state: StateVector
    success_probability: float
    raw_norm: float


def build_plan(h_shifted: PauliHamiltonian, bias: Optional[float] = None, pad_to: int = 1) -> LcuPlan:
    """
    Ancilla amplitudes are the signed coefficients over C; the identity word, when present, takes slot 0.
    pad_to forces at least that many branches (rounded up to a power of two).
    """
    terms = sorted(h_shifted.terms, key=lambda term: not term.word.is_identity)
    coefficients = np.array([term.coefficient for term in terms], dtype=float)
    normalization = float(np.linalg.norm(coefficients))
    if normalization == 0:
        logger.error('Cannot build an LCU plan for an all-zero operator')
        raise HamiltonianError('cannot build an LCU plan for an all-zero operator')

    padded = padded_length(max(len(terms), pad_to))
    amplitudes = np.zeros(padded)
    amplitudes[:len(terms)] = coefficients / normalization

    words = [term.word for term in terms]
    words.extend(identity_word(h_shifted.n) for _ in range(padded - len(terms)))

    return LcuPlan(n=h_shifted.n,
                   live_terms=len(terms),
                   padded_terms=padded,
                   ancilla_amplitudes=amplitudes,
                   words=tuple(words),
                   normalization=normalization,
                   bias=bias)


def plan_to_dict(plan: LcuPlan) -> dict:
    return {
        'work_qubits': plan.n,
        'ancilla_qubits': plan.ancilla_qubits,
        'live_terms': plan.live_terms,
        'padded_terms': plan.padded_terms,
        'normalization': plan.normalization,
        'bias': plan.bias,
        'branches': [{'word': word.label, 'amplitude': float(amplitude)}
                     for word, amplitude in zip(plan.words, plan.ancilla_amplitudes)],
    }


def _entangled_decoded(plan: LcuPlan, psi: StateVector) -> StateVector:
    layout = plan.layout
    state = joint_state(plan.ancilla_amplitudes, psi)

    # Padded branches carry the identity with zero amplitude.
    for branch in range(plan.live_terms):
        if not plan.words[branch].is_identity:
            state = apply_selected_word(state, layout, branch, plan.words[branch])

    return apply_hadamard_layer(state, layout.ancilla_indices)


def lcu_circuit_probabilities(plan: LcuPlan, psi: StateVector) -> np.ndarray:
    return branch_probabilities(_entangled_decoded(plan, psi), plan.layout)


def lcu_apply(plan: LcuPlan, psi: StateVector) -> ApplyOutcome:
    if psi.qubits != plan.n:
        raise HamiltonianError('plan acts on %s qubits, state has %s' % (plan.n, psi.qubits))

    state = _entangled_decoded(plan, psi)
    work, probability = postselect(state, plan.layout, '0' * plan.ancilla_qubits)

    raw_norm = sqrt(probability * plan.padded_terms) * plan.normalization
    if raw_norm < KERNEL_NORM:
        logger.debug('LCU output norm %s is below the kernel threshold', raw_norm)
        raise KernelError('state lies in the kernel of the operator', probability=probability)

    return ApplyOutcome(state=work, success_probability=probability, raw_norm=raw_norm)


def direct_apply(h_shifted: PauliHamiltonian, psi: StateVector) -> ApplyOutcome:
    output = apply_hamiltonian(h_shifted, psi)
    raw_norm = float(np.linalg.norm(output))
    if raw_norm < KERNEL_NORM:
        logger.debug('Direct output norm %s is below the kernel threshold', raw_norm)
        raise KernelError('state lies in the kernel of the operator', probability=0.0)

    normalization_squared = float(np.sum(h_shifted.coefficients ** 2))
    probability = raw_norm ** 2 / (normalization_squared * padded_length(len(h_shifted.terms)))
    return ApplyOutcome(state=StateVector(output / raw_norm), success_probability=probability, raw_norm=raw_norm)
