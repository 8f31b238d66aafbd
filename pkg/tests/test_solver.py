import logging
from dataclasses import replace
from math import inf

import numpy as np
import pytest

from fqess import ConfigError, StagnationError
from fqess.sim.lcu import direct_apply
from fqess.sim.pauli import (default_bias, expectations, from_dict, oracle_spectrum, pauli_basis, random_hamiltonian,
                             shift, to_dense)
from fqess.sim.statevector import init_product, random_state
from fqess.solver import (SolverConfig, bias_from_learning_rate, deflate, exact_deflation, gradient_step,
                          measure_components, min_iterations_to_accuracy, noise_replicas, power_iterate,
                          remaining_error, replica_seeds, solve_spectrum)

from conftest import H2_EXCITED, H2_GROUND


def _components(vector, n):
    basis = pauli_basis(n)
    return {word.label: float(c) for word, c in zip(basis, expectations(basis, vector))}


class TestDeflate:

    def test_annihilates_found_level(self, rng):
        for trial in range(200):
            n = 1 + trial % 3
            h = random_hamiltonian(n, int(rng.integers(1, min(12, 4 ** n) + 1)), rng)
            spectrum = oracle_spectrum(h)
            k = int(rng.integers(0, 2 ** n))
            deflated = deflate(h, float(spectrum.eigenvalues[k]), _components(spectrum.vector(k), n))

            vector = spectrum.vector(k).amplitudes
            assert np.allclose(to_dense(deflated).matrix @ vector, 0, atol=1e-9)

            remaining = np.delete(spectrum.eigenvalues, k)
            assert np.sort(oracle_spectrum(deflated).eigenvalues) == pytest.approx(np.sort(np.append(remaining, 0.0)),
                                                                                  abs=1e-9)

    def test_bias_reference_transfers_dominance(self, rng):
        for trial in range(200):
            n = 1 + trial % 3
            h = random_hamiltonian(n, int(rng.integers(1, min(12, 4 ** n) + 1)), rng)
            spectrum = oracle_spectrum(h)
            bias = default_bias(h)
            deflated = deflate(h, float(spectrum.eigenvalues[0]) - bias, _components(spectrum.vector(0), n))

            shifted = oracle_spectrum(shift(deflated, bias)).eigenvalues
            dominant = shifted[np.argmax(np.abs(shifted))]
            assert dominant == pytest.approx(spectrum.eigenvalues[1] - bias, abs=1e-9)

    def test_dominance_moves_down_one_level_per_deflation(self, rng):
        for n in (1, 2, 3):
            h = random_hamiltonian(n, min(8, 4 ** n), rng)
            spectrum = oracle_spectrum(h)
            config = SolverConfig(bias=default_bias(h))
            for m in range(1, 2 ** n):
                shifted = oracle_spectrum(shift(exact_deflation(h, m, config), config.bias)).eigenvalues
                dominant = shifted[np.argmax(np.abs(shifted))]
                assert dominant == pytest.approx(spectrum.eigenvalues[m] - config.bias, abs=1e-9)

    def test_last_level_is_rank_one(self, rng):
        for n in (1, 2, 3):
            h = random_hamiltonian(n, min(6, 4 ** n), rng)
            config = SolverConfig(bias=default_bias(h))
            residual = shift(exact_deflation(h, 2 ** n - 1, config), config.bias)
            assert np.linalg.matrix_rank(to_dense(residual).matrix, tol=1e-9) == 1

    def test_new_words_below_tolerance_are_dropped(self):
        h = from_dict(1, {'Z': 1.0})
        deflated = deflate(h, 1.0, {'Z': 1.0, 'X': 1e-13, 'I': 1.0})
        assert 'X' not in deflated.as_dict()
        assert deflated.coefficient('Z') == pytest.approx(0.5)
        assert deflated.coefficient('I') == pytest.approx(-0.5)


class TestPowerIterate:

    def test_exact_eigenvector_stops_after_one_application(self, h2):
        spectrum = oracle_spectrum(h2)
        config = SolverConfig(bias=default_bias(h2))
        result = power_iterate(shift(h2, config.bias), spectrum.vector(0), config)
        assert result.k_used == 1
        assert result.converged
        assert result.energy_trace[0] == pytest.approx(spectrum.eigenvalues[0], abs=1e-12)

    def test_fixed_iteration_count(self, h2):
        config = SolverConfig(bias=default_bias(h2), k=25)
        result = power_iterate(shift(h2, config.bias), init_product('+'), config)
        assert result.k_used == 25
        assert len(result.success_probabilities) == 25
        assert result.energy_trace[-1] == pytest.approx(H2_GROUND, abs=1e-5)

    def test_stagnation_is_flagged(self):
        h = from_dict(1, {'Z': 1.0})
        config = SolverConfig(bias=50.0, k_max=2, energy_tolerance=1e-12)
        result = power_iterate(shift(h, config.bias), init_product('+'), config)
        assert not result.converged
        assert result.k_used == 2

    def test_paths_agree(self, h2):
        config = SolverConfig(bias=default_bias(h2), k=20)
        psi0 = init_product('+')
        direct = power_iterate(shift(h2, config.bias), psi0, config)
        circuit = power_iterate(shift(h2, config.bias), psi0, replace(config, apply_path='lcu'))
        assert circuit.energy_trace == pytest.approx(direct.energy_trace, abs=1e-9)

    def test_remaining_error(self):
        assert remaining_error(0.5, 1.0) == pytest.approx(1.0)
        assert remaining_error(0.5, None) == inf
        assert remaining_error(1.0, 1.0) == inf
        assert remaining_error(2.0, 1.0) == inf

    def test_slow_convergence_still_reaches_tolerance(self):
        # Ratio 49/51 per application: consecutive energy changes are far below the remaining error.
        h = from_dict(1, {'Z': 1.0})
        config = SolverConfig(bias=50.0)
        result = power_iterate(shift(h, config.bias), init_product('+'), config)
        assert result.converged
        assert abs(result.energy_trace[-1] + 1.0) < 1e-5

    def test_energy_is_read_without_the_bias(self):
        h = from_dict(1, {'Z': 1.0})
        result = power_iterate(shift(h, 1.1), init_product('+'), SolverConfig(bias=1.1, k=40))
        assert result.energy_trace[-1] == pytest.approx(-1.0, abs=1e-6)

    def test_bias_or_observable_is_required(self):
        h = from_dict(1, {'Z': 1.0})
        with pytest.raises(ConfigError):
            power_iterate(shift(h, 1.1), init_product('+'), SolverConfig(k=40))
        result = power_iterate(shift(h, 1.1), init_product('+'), SolverConfig(k=40), observable=h)
        assert result.energy_trace[-1] == pytest.approx(-1.0, abs=1e-6)

    def test_stagnation_warning_reports_last_change(self, caplog):
        h = from_dict(1, {'Z': 1.0})
        config = SolverConfig(bias=50.0, k_max=2, energy_tolerance=1e-12)
        with caplog.at_level(logging.WARNING, logger='fqess'):
            power_iterate(shift(h, config.bias), init_product('+'), config)
        records = [record for record in caplog.records if 'k_max' in record.getMessage()]
        assert len(records) == 1
        assert records[0].args[1] > 0

    def test_overlap_with_ground_never_drops(self, rng):
        h = random_hamiltonian(2, 8, rng)
        ground = oracle_spectrum(h).vector(0).amplitudes
        config = SolverConfig(bias=default_bias(h), k=1)
        state = random_state(2, rng)
        overlaps = [abs(np.vdot(ground, state.amplitudes))]
        for _ in range(30):
            state = power_iterate(shift(h, config.bias), state, config).state
            overlaps.append(abs(np.vdot(ground, state.amplitudes)))
        assert np.all(np.diff(overlaps) >= -1e-12)


class TestMeasure:

    def test_exact_components(self, h2, rng):
        state = random_state(1, rng)
        measured = measure_components(h2, state, support=pauli_basis(1))
        assert set(measured.components) == {'I', 'X', 'Y', 'Z'}
        assert measured.components['I'] == pytest.approx(1.0)
        assert measured.standard_error == 0.0
        assert measured.energy == pytest.approx(float(np.vdot(state.amplitudes,
                                                              to_dense(h2).matrix @ state.amplitudes).real))

    def test_shots_within_error(self, h2, rng):
        state = oracle_spectrum(h2).vector(0)
        measured = measure_components(h2, state, shots=10000, rng=rng)
        assert measured.standard_error > 0
        assert abs(measured.energy - H2_GROUND) < 5 * measured.standard_error + 1e-4


class TestSolveSpectrum:

    def test_two_level_h2(self, h2):
        result = solve_spectrum(h2, SolverConfig(energy_tolerance=1e-10))
        assert result.sorted_energies == pytest.approx([H2_GROUND, H2_EXCITED], abs=1e-5)
        assert result.sorted_energies == pytest.approx(list(oracle_spectrum(h2).eigenvalues), abs=1e-6)
        assert result.converged
        assert result.residual_norm < 1e-6
        # One application already lands on the last level.
        assert result.levels[-1].step.energy_trace[0] == pytest.approx(oracle_spectrum(h2).eigenvalues[1], abs=1e-6)

    def test_two_level_h2_fixed_iterations(self, h2):
        result = solve_spectrum(h2, SolverConfig(k=600, initial_state='+'))
        assert result.sorted_energies == pytest.approx(list(oracle_spectrum(h2).eigenvalues), abs=1e-6)

    def test_zero_reference_on_negative_spectrum(self, h2):
        result = solve_spectrum(h2, SolverConfig(energy_tolerance=1e-10, deflation_reference='zero'))
        assert result.reference == 0.0
        assert result.sorted_energies == pytest.approx(list(oracle_spectrum(h2).eigenvalues), abs=1e-6)

    def test_lcu_path(self, h2):
        result = solve_spectrum(h2, SolverConfig(energy_tolerance=1e-10, apply_path='lcu'))
        assert result.sorted_energies == pytest.approx(list(oracle_spectrum(h2).eigenvalues), abs=1e-6)
        assert all(0 < p <= 1 for level in result.levels for p in level.step.success_probability_trace)

    def test_application_path_does_not_change_energies(self, rng):
        h = random_hamiltonian(2, 8, rng)
        direct = solve_spectrum(h, SolverConfig(k=100, seed=2))
        circuit = solve_spectrum(h, SolverConfig(k=100, seed=2, apply_path='lcu'))
        assert circuit.energies == pytest.approx(direct.energies, abs=1e-8)

    def test_levels_are_orthogonal(self, rng):
        while True:
            h = random_hamiltonian(2, 8, rng)
            if np.min(np.diff(oracle_spectrum(h).eigenvalues)) > 0.05:
                break
        result = solve_spectrum(h, SolverConfig(energy_tolerance=1e-8))
        states = [level.state.amplitudes for level in result.levels]
        for i in range(len(states)):
            for j in range(i + 1, len(states)):
                assert abs(np.vdot(states[i], states[j])) < 1e-3

    def test_matches_oracle_on_random_hamiltonians(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = 1 + trial % 3
            h = random_hamiltonian(n, int(rng.integers(1, min(12, 4 ** n) + 1)), rng)
            spectrum = oracle_spectrum(h)
            result = solve_spectrum(h, SolverConfig(seed=trial))

            assert len(result.levels) == 2 ** n
            assert result.sorted_energies == pytest.approx(list(spectrum.eigenvalues), abs=1e-4)

            order = np.argsort(result.energies)
            gaps = np.diff(spectrum.eigenvalues)
            for rank, index in enumerate(order):
                below = gaps[rank - 1] if rank > 0 else np.inf
                above = gaps[rank] if rank < len(gaps) else np.inf
                if min(below, above) > 1e-2:
                    state = result.levels[index].state.amplitudes
                    assert abs(np.vdot(spectrum.vector(rank).amplitudes, state)) > 0.999

    def test_product_initial_state_must_fit(self, h2):
        with pytest.raises(ConfigError):
            solve_spectrum(h2, SolverConfig(initial_state='00'))

    def test_to_dict(self, h2):
        document = solve_spectrum(h2, SolverConfig(k=50)).to_dict()
        assert len(document['levels']) == 2
        assert document['sorted'] == sorted(document['solve_order'])
        assert set(document['levels'][0]['coefficients_next']) >= {'I', 'X', 'Z'}


class TestMinIterations:

    @pytest.mark.parametrize('bias, expected', [(1.1, 2), (3.0, 6)])
    def test_single_qubit_counts(self, bias, expected):
        h = from_dict(1, {'Z': 1.0})
        assert min_iterations_to_accuracy(h, 1, SolverConfig(bias=bias), psi0=init_product('+')) == expected

    def test_nondecreasing_in_bias(self):
        h = from_dict(1, {'Z': 1.0})
        counts = [min_iterations_to_accuracy(h, 1, SolverConfig(bias=b), psi0=init_product('+'))
                  for b in (1.1, 1.5, 2.0, 3.0, 5.0, 10.0)]
        assert counts == sorted(counts)

    def test_last_level_takes_one_application(self, h2):
        assert min_iterations_to_accuracy(h2, 2, SolverConfig(), psi0=init_product('+')) == 1

    def test_stagnation(self):
        h = from_dict(1, {'Z': 1.0})
        with pytest.raises(StagnationError):
            min_iterations_to_accuracy(h, 1, SolverConfig(bias=3.0, k_max=3), psi0=init_product('+'))

    def test_level_out_of_range(self, h2):
        with pytest.raises(ConfigError):
            min_iterations_to_accuracy(h2, 3, SolverConfig())


class TestNoise:

    def test_replicas_stay_near_noiseless(self, h2):
        study = noise_replicas(h2, SolverConfig(noise=0.1, k=200), replicas=5, seed=11)
        exact = oracle_spectrum(h2).eigenvalues
        assert study.energies.shape == (5, 2)
        assert np.all(np.abs(study.mean - exact) < 0.01)
        # Max-deviation bars over five replicas miss the oracle now and then.
        assert np.all(np.abs(study.mean - exact) <= 3 * study.max_deviation)

    def test_noise_changes_result(self, h2):
        clean = solve_spectrum(h2, SolverConfig(k=200, seed=3))
        noisy = solve_spectrum(h2, SolverConfig(k=200, seed=3, noise=0.1))
        assert clean.energies != noisy.energies

    def test_per_iteration_noise(self, h2):
        result = solve_spectrum(h2, SolverConfig(k=200, noise=0.1, noise_mode='iteration'))
        assert result.sorted_energies == pytest.approx(list(oracle_spectrum(h2).eigenvalues), abs=0.01)

    def test_replica_seeds_are_deterministic(self):
        assert replica_seeds(5, 3) == replica_seeds(5, 3)
        assert len(set(replica_seeds(5, 3))) == 3


class TestGradientView:

    def test_bias_from_learning_rate(self):
        assert bias_from_learning_rate(0.25) == 2.0
        with pytest.raises(ConfigError):
            bias_from_learning_rate(0.0)

    def test_gradient_step_is_biased_application(self, h2, rng):
        psi = random_state(1, rng)
        step = gradient_step(h2, psi, 0.2)
        applied = direct_apply(shift(h2, bias_from_learning_rate(0.2)), psi).state
        assert abs(np.vdot(step.amplitudes, applied.amplitudes)) == pytest.approx(1.0)


@pytest.mark.parametrize('kwargs', [
    {'k': 0},
    {'k_max': 0},
    {'energy_tolerance': 0.0},
    {'apply_path': 'dense'},
    {'noise': -0.1},
    {'noise_mode': 'always'},
    {'shots': -1},
    {'deflation_reference': 'middle'},
    {'restarts': -1},
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)
