import numpy as np
import pytest

from fqess import HamiltonianError, KernelError
from fqess.sim.lcu import build_plan, direct_apply, lcu_apply, lcu_circuit_probabilities, plan_to_dict
from fqess.sim.pauli import default_bias, from_dict, padded_length, random_hamiltonian, shift
from fqess.sim.statevector import basis_state, init_product, random_state


def test_lcu_matches_direct_application(rng):
    for trial in range(300):
        n = 1 + trial % 3
        h = random_hamiltonian(n, int(rng.integers(1, min(12, 4 ** n) + 1)), rng)
        h_shifted = shift(h, default_bias(h))
        psi = random_state(n, rng)

        plan = build_plan(h_shifted)
        circuit = lcu_apply(plan, psi)
        direct = direct_apply(h_shifted, psi)

        assert abs(np.vdot(circuit.state.amplitudes, direct.state.amplitudes)) == pytest.approx(1.0, abs=1e-10)
        assert circuit.raw_norm == pytest.approx(direct.raw_norm, abs=1e-10)

        expected = direct.raw_norm ** 2 / (plan.normalization ** 2 * padded_length(len(h_shifted)))
        assert circuit.success_probability == pytest.approx(expected, abs=1e-10)


class TestPlan:

    def test_amplitudes_and_padding(self):
        plan = build_plan(from_dict(2, {'ZZ': 0.5, 'II': -2.0, 'XI': 0.25}))
        assert plan.padded_terms == 4
        assert plan.ancilla_qubits == 2
        assert plan.words[0].is_identity
        assert np.linalg.norm(plan.ancilla_amplitudes) == pytest.approx(1.0)
        assert plan.ancilla_amplitudes[-1] == 0
        assert plan.ancilla_amplitudes[0] < 0

    def test_zero_operator(self):
        with pytest.raises(HamiltonianError):
            build_plan(from_dict(1, {'Z': 0.0}))

    def test_padding_rescales_probability(self, rng):
        h = shift(from_dict(2, {'ZZ': 0.3, 'XX': -0.7}), 1.5)
        psi = random_state(2, rng)
        small, large = lcu_apply(build_plan(h), psi), lcu_apply(build_plan(h, pad_to=16), psi)
        assert abs(np.vdot(small.state.amplitudes, large.state.amplitudes)) == pytest.approx(1.0)
        assert large.success_probability == pytest.approx(small.success_probability * 4 / 16)

    def test_plan_dict(self):
        plan = build_plan(from_dict(1, {'I': -1.0, 'Z': 0.5}), bias=1.0)
        document = plan_to_dict(plan)
        assert document['ancilla_qubits'] == 1
        assert [b['word'] for b in document['branches']] == ['I', 'Z']
        assert document['bias'] == 1.0


def test_circuit_probabilities_cover_all_outcomes(rng):
    h = shift(random_hamiltonian(2, 5, rng), 3.0)
    psi = random_state(2, rng)
    plan = build_plan(h)
    probabilities = lcu_circuit_probabilities(plan, psi)
    assert probabilities.sum() == pytest.approx(1.0)
    assert probabilities[0] == pytest.approx(lcu_apply(plan, psi).success_probability)


def test_kernel_state():
    h = shift(from_dict(1, {'Z': 1.0}), 1.0)
    with pytest.raises(KernelError):
        lcu_apply(build_plan(h), basis_state(1, 0))
    with pytest.raises(KernelError):
        direct_apply(h, basis_state(1, 0))


def test_single_term_needs_no_ancilla():
    plan = build_plan(from_dict(1, {'X': 2.0}))
    outcome = lcu_apply(plan, init_product('0'))
    assert plan.ancilla_qubits == 0
    assert outcome.success_probability == pytest.approx(1.0)
    assert abs(outcome.state.amplitudes[1]) == pytest.approx(1.0)
