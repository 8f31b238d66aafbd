from math import atan2, cos, hypot, pi, sin

import numpy as np
import pytest

from fqess import ConfigError, HamiltonianError, KernelError, ShotStarvationError
from fqess.experiment import (HARDWARE_GROUND_ANGLE, HARDWARE_HAMILTONIAN, ExperimentParams, TwoLevelHamiltonian,
                              encode_angle, excited_state_run, hardware_bias, oracle_levels, recover_bias,
                              run_experiment, run_iteration, theta_update)
from fqess.sim.pauli import from_dict

from conftest import H2_EXCITED, H2_GROUND


def _ground_angle(h):
    vector = np.linalg.eigh(h.matrix())[1][:, 0]
    vector = vector * np.sign(vector[0])
    return 2 * atan2(vector[1], vector[0])


class TestEncoding:

    def test_pure_identity_needs_no_rotation(self):
        assert encode_angle(TwoLevelHamiltonian(1.0, 0.0, 0.0), 0.0) == 0.0

    def test_bias_on_identity_gives_pi(self):
        h = TwoLevelHamiltonian(0.3, 0.4, 0.0)
        assert encode_angle(h, 0.3) == pytest.approx(pi)

    def test_zero_operator(self):
        with pytest.raises(HamiltonianError):
            encode_angle(TwoLevelHamiltonian(0.5, 0.0, 0.0), 0.5)

    def test_hardware_angle_round_trip(self):
        bias = recover_bias(HARDWARE_HAMILTONIAN, HARDWARE_GROUND_ANGLE)
        assert bias == pytest.approx(-0.85633, abs=1e-4)
        assert hardware_bias() == bias
        assert encode_angle(HARDWARE_HAMILTONIAN, bias) == pytest.approx(HARDWARE_GROUND_ANGLE, abs=1e-9)

    def test_wrapped_into_half_open_interval(self, rng):
        for _ in range(50):
            h = TwoLevelHamiltonian(*rng.normal(size=3))
            beta = encode_angle(h, float(rng.normal(scale=3)))
            assert -pi < beta <= pi

    def test_from_hamiltonian(self, h2):
        two_level = TwoLevelHamiltonian.from_hamiltonian(h2)
        assert two_level == HARDWARE_HAMILTONIAN
        with pytest.raises(HamiltonianError):
            TwoLevelHamiltonian.from_hamiltonian(from_dict(1, {'Y': 1.0}))
        with pytest.raises(HamiltonianError):
            TwoLevelHamiltonian.from_hamiltonian(from_dict(2, {'ZZ': 1.0}))


class TestThetaUpdate:

    @pytest.mark.parametrize('p1, expected', [(0.0, 0.0), (0.5, -pi / 2), (1.0, -pi)])
    def test_values(self, p1, expected):
        assert theta_update(p1) == pytest.approx(expected)

    @pytest.mark.parametrize('p1', [-0.1, 1.5])
    def test_not_a_probability(self, p1):
        with pytest.raises(ConfigError):
            theta_update(p1)


class TestIteration:

    def test_ground_state_is_fixed_point(self):
        h = HARDWARE_HAMILTONIAN
        theta = _ground_angle(h)
        record = run_iteration(theta, encode_angle(h, hardware_bias()), h)
        assert record.theta_out == pytest.approx(theta, abs=1e-9)
        assert record.energy == pytest.approx(oracle_levels(h)[0], abs=1e-9)

    def test_matches_direct_application(self, rng):
        h = HARDWARE_HAMILTONIAN
        bias = hardware_bias()
        beta = encode_angle(h, bias)
        for theta in rng.uniform(-pi, pi, 20):
            psi = np.array([cos(theta / 2), sin(theta / 2)])
            phi = (h.matrix() - bias * np.eye(2)) @ psi
            record = run_iteration(theta, beta, h)

            assert record.p1 == pytest.approx(phi[1] ** 2 / phi.dot(phi), abs=1e-12)
            assert record.p0 + record.p1 == pytest.approx(1.0)
            norm = hypot(h.identity - bias, h.r)
            assert record.accepted == pytest.approx(phi.dot(phi) / (2 * norm ** 2), abs=1e-12)

    def test_first_iteration_from_plus(self):
        h = HARDWARE_HAMILTONIAN
        bias = hardware_bias()
        phi = (h.matrix() - bias * np.eye(2)) @ (np.ones(2) / np.sqrt(2))
        phi = phi / np.linalg.norm(phi)
        record = run_iteration(pi / 2, encode_angle(h, bias), h)
        assert record.eps_z == pytest.approx(phi[0] ** 2 - phi[1] ** 2, abs=1e-12)
        assert record.eps_x == pytest.approx(2 * phi[0] * phi[1], abs=1e-12)

    def test_kernel_state(self, rng):
        h = TwoLevelHamiltonian(0.0, 0.0, 1.0)
        beta = encode_angle(h, 1.0)
        with pytest.raises(KernelError):
            run_iteration(0.0, beta, h)
        with pytest.raises(ShotStarvationError):
            run_iteration(0.0, beta, h, shots=100, rng=rng)


class TestExperiment:

    def test_exact_run_descends_to_ground(self):
        trace = run_experiment(HARDWARE_HAMILTONIAN)
        energies = trace.mean
        assert len(energies) == 8
        assert np.all(np.diff(energies) <= 1e-12)
        assert energies[-1] == pytest.approx(H2_GROUND, abs=1e-3)
        assert energies[-1] >= H2_GROUND - 1e-9

    def test_exact_replicas_agree(self):
        trace = run_experiment(HARDWARE_HAMILTONIAN, ExperimentParams(replicas=3))
        assert trace.energies.shape == (3, 8)
        assert np.all(trace.error == 0)

    def test_shots(self):
        trace = run_experiment(HARDWARE_HAMILTONIAN, ExperimentParams(shots=10000, replicas=3, seed=5))
        assert np.all(trace.error > 0)
        assert abs(trace.mean[-1] - H2_GROUND) < 0.02
        assert all(0 < record.accepted <= 10000 for chain in trace.chains for record in chain)

    def test_replica_spread_brackets_exact_trace(self):
        exact = run_experiment(HARDWARE_HAMILTONIAN)
        sampled = run_experiment(HARDWARE_HAMILTONIAN, ExperimentParams(shots=10000, replicas=10, seed=5))
        assert np.all(np.abs(sampled.mean - exact.mean) <= sampled.error)

    def test_excited_state(self):
        ground = run_experiment(HARDWARE_HAMILTONIAN)
        excited = excited_state_run(HARDWARE_HAMILTONIAN, ground)
        assert excited.trace.mean[-1] == pytest.approx(H2_EXCITED, abs=1e-3)
        assert excited.trace.bias == ground.bias
        assert excited.trace.hamiltonian == HARDWARE_HAMILTONIAN
        assert excited.deflated != HARDWARE_HAMILTONIAN

    @pytest.mark.parametrize('kwargs', [{'iterations': 0}, {'shots': -1}, {'replicas': 0}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentParams(**kwargs)
