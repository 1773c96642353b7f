import numpy as np
import pytest

from eprb import (DegenerateInputError, InvalidInputError, decode_density,
                  encode_density, geometry_for_experiment,
                  measurement_operators, quantum_probs, singlet_state,
                  trace_distance)
from eprb.quantum import (I2, SIGMA_X, SIGMA_Y, SIGMA_Z, density_from_json,
                          density_to_json, validate_density)

from conftest import REFERENCE_RHO_MODEL1


def random_direction(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


class TestMeasurementOperators:
    def test_z_axis(self):
        p0, p1 = measurement_operators([0, 0, 1])
        assert np.allclose(p0, np.diag([1, 0]))
        assert np.allclose(p1, np.diag([0, 1]))

    def test_minus_x_axis(self):
        p0, p1 = measurement_operators([-1, 0, 0])
        assert np.allclose(p0, 0.5 * (I2 - SIGMA_X))
        assert np.allclose(p1, 0.5 * (I2 + SIGMA_X))

    def test_y_axis_projectors(self):
        p0, p1 = measurement_operators([0, 1, 0])
        assert np.allclose(p0, 0.5 * (I2 + SIGMA_Y))
        for p in (p0, p1):
            assert np.allclose(p @ p, p, atol=1e-12)
            assert abs(np.trace(p) - 1) < 1e-12

    def test_non_unit_rejected(self):
        with pytest.raises(InvalidInputError):
            measurement_operators([0, 0, 2])

    def test_random_directions_are_projectors(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            p0, p1 = measurement_operators(random_direction(rng))
            assert np.allclose(p0 + p1, I2, atol=1e-12)
            assert np.max(np.abs(p0 @ p0 - p0)) < 1e-10
            assert np.max(np.abs(p0 @ p1)) < 1e-10
            assert abs(np.trace(p0) - 1) < 1e-10


class TestGeometry:
    def test_theta_zero(self):
        g = geometry_for_experiment(0.0)
        assert np.allclose(g.alice_ops[0, 0], np.diag([1, 0]))

    def test_theta_minus_pi(self):
        # first experiment of the series: direction flipped to (0, 0, -1)
        g = geometry_for_experiment(-np.pi)
        assert np.allclose(g.alice_ops[0, 0], np.diag([0, 1]), atol=1e-12)

    def test_theta_095pi(self):
        theta = 0.95 * np.pi
        g = geometry_for_experiment(theta)
        expected = 0.5 * (I2 + np.sin(theta) * SIGMA_X + np.cos(theta) * SIGMA_Z)
        assert np.allclose(g.alice_ops[0, 0], expected, atol=1e-12)

    def test_completeness_and_projectors(self):
        for theta in np.linspace(-np.pi, np.pi, 17):
            g = geometry_for_experiment(theta)
            for ops in (g.alice_ops, g.bob_ops):
                for s in range(2):
                    assert np.allclose(ops[s, 0] + ops[s, 1], I2, atol=1e-12)
                    for r in range(2):
                        p = ops[s, r]
                        assert np.max(np.abs(p @ p - p)) < 1e-10
                        assert abs(np.trace(p).real - 1) < 1e-10


class TestQuantumProbs:
    def test_singlet_marginals_half(self):
        qp = quantum_probs(singlet_state(), geometry_for_experiment(0.37))
        assert np.allclose(qp.qa, 0.5, atol=1e-12)
        assert np.allclose(qp.qb, 0.5, atol=1e-12)

    def test_singlet_same_axis_anticorrelation(self):
        qp = quantum_probs(singlet_state(), geometry_for_experiment(0.0))
        assert abs(qp.qc[0, 0, 0, 0]) < 1e-12

    def test_singlet_orthogonal_quadrant(self):
        qp = quantum_probs(singlet_state(), geometry_for_experiment(0.0))
        assert abs(qp.qc[0, 0, 1, 0] - 0.25) < 1e-12

    def test_marginal_consistency_random_states(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            rho = decode_density(rng.standard_normal(16))
            g = geometry_for_experiment(rng.uniform(-np.pi, np.pi))
            qp = quantum_probs(rho, g)
            assert np.all(qp.qc > -1e-10) and np.all(qp.qc < 1 + 1e-10)
            # each quadrant's four joint probabilities sum to 1
            assert np.allclose(qp.qc.sum(axis=(1, 3)), 1.0, atol=1e-10)
            # joint marginals match the singles probabilities
            for k in range(2):
                assert np.allclose(qp.qc[:, :, k, :].sum(axis=-1), qp.qa, atol=1e-10)
            for i in range(2):
                assert np.allclose(qp.qc[i, :, :, :].sum(axis=0), qp.qb, atol=1e-10)
            assert np.allclose(qp.qa[:, 0] + qp.qa[:, 1], 1.0, atol=1e-10)

    def test_singlet_equal_settings_anticorrelated(self):
        # theta = 0 aligns Alice's setting 0 with Bob's setting 0
        qp = quantum_probs(singlet_state(), geometry_for_experiment(0.0))
        for j in range(2):
            assert abs(qp.qc[0, j, 0, j]) < 1e-10

    def test_invalid_rho_rejected(self):
        bad = np.eye(4, dtype=complex)  # trace 4
        with pytest.raises(InvalidInputError):
            quantum_probs(bad, geometry_for_experiment(0.0))


class TestDensityCodec:
    def test_identity_factor(self):
        params = np.zeros(16)
        params[:4] = 1.0
        assert np.allclose(decode_density(params), np.eye(4) / 4)

    def test_single_column_is_pure(self):
        params = np.zeros(16)
        params[0] = 2.0
        rho = decode_density(params)
        assert np.allclose(np.sort(np.linalg.eigvalsh(rho)), [0, 0, 0, 1], atol=1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateInputError):
            decode_density(np.zeros(16))

    def test_roundtrip_reference_matrix(self):
        # the published matrix carries 4-decimal rounding, so its trace is
        # 0.9994; the codec normalizes, so compare against the rescaled matrix
        target = REFERENCE_RHO_MODEL1 / np.trace(REFERENCE_RHO_MODEL1).real
        back = decode_density(encode_density(REFERENCE_RHO_MODEL1))
        assert np.max(np.abs(back - target)) < 1e-6

    def test_random_params_always_valid(self):
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            rho = decode_density(rng.standard_normal(16) * rng.uniform(0.1, 10))
            validate_density(rho)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        p = rng.standard_normal(16)
        assert np.allclose(decode_density(p), decode_density(3.7 * p), atol=1e-12)


class TestSinglet:
    def test_trace_one(self):
        assert abs(np.trace(singlet_state()).real - 1) < 1e-15

    def test_pure(self):
        assert np.allclose(np.sort(np.linalg.eigvalsh(singlet_state())),
                           [0, 0, 0, 1], atol=1e-12)

    def test_entries(self):
        rho = singlet_state()
        assert rho[1, 2] == -0.5
        assert rho[1, 1] == 0.5 and rho[2, 2] == 0.5
        assert rho[0, 0] == 0.0


class TestSerialization:
    def test_json_roundtrip(self):
        rng = np.random.default_rng(2)
        rho = decode_density(rng.standard_normal(16))
        assert np.allclose(density_from_json(density_to_json(rho)), rho)


def test_trace_distance_basic():
    assert trace_distance(singlet_state(), singlet_state()) < 1e-15
    assert abs(trace_distance(singlet_state(), np.eye(4) / 4) - 0.75) < 1e-12
