import math

import numpy as np
import pytest

from grouptrack.association import (
    AssociationProblem,
    BPNumericalError,
    ScanFrame,
    bp_associate,
    censor_new,
    censor_scores,
    compute_beta,
    compute_xi0,
    gaussian_likelihood,
    legacy_factor,
    likelihood_ratios,
    new_factor,
)

from oracles import enumerate_association_marginals


def make_frame(z, mu_c=10.0, p_d=0.995, sigma_w=10.0, mu_b=1e-4, radius=5000.0):
    return ScanFrame(
        k=1,
        z=np.asarray(z, dtype=float),
        mu_c=mu_c,
        f_c=1.0 / (math.pi * radius**2),
        p_d=p_d,
        mu_b=mu_b,
        sigma_w=sigma_w,
        region_radius=radius,
    )


class TestLegacyFactor:
    def test_missed_detection(self):
        frame = make_frame([[0.0, 0.0]])
        assert legacy_factor(np.zeros(4), True, 0, frame) == pytest.approx(0.005)

    def test_nonexistent_indicator(self):
        frame = make_frame([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        assert legacy_factor(np.zeros(4), False, 0, frame) == 1.0
        assert legacy_factor(np.zeros(4), False, 3, frame) == 0.0

    def test_peak_likelihood_ratio(self):
        x = np.array([100.0, 0.0, -50.0, 0.0])
        frame = make_frame([[100.0, -50.0]])
        expected = 0.995 * (1.0 / (2.0 * math.pi * 100.0)) / (10.0 / (math.pi * 5000.0**2))
        assert legacy_factor(x, True, 1, frame) == pytest.approx(expected, rel=1e-12)

    def test_out_of_range_index(self):
        frame = make_frame([[0.0, 0.0]])
        with pytest.raises(ValueError):
            legacy_factor(np.zeros(4), True, 2, frame)


class TestNewFactor:
    def test_claimed_by_legacy_is_zero(self):
        frame = make_frame([[0.0, 0.0]])
        assert new_factor(0, 1, np.zeros(4), frame) == 0.0

    def test_birth_rate_scaling(self):
        x = np.array([5.0, 0.0, 5.0, 0.0])
        frame_small = make_frame([[0.0, 0.0]], mu_b=1e-5 * 10.0)
        frame_unit = make_frame([[0.0, 0.0]], mu_b=10.0)
        ratio = new_factor(0, 0, x, frame_small) / new_factor(0, 0, x, frame_unit)
        assert ratio == pytest.approx(1e-5, rel=1e-12)

    def test_xi0_three_particle_hand_sum(self):
        frame = make_frame([[0.0, 0.0]])
        cloud = np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [10.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 20.0, 0.0],
            ]
        )
        weights = np.full(3, 1.0 / 3.0)
        sw2 = 100.0
        fvals = [
            math.exp(-0.0) / (2 * math.pi * sw2),
            math.exp(-100.0 / (2 * sw2)) / (2 * math.pi * sw2),
            math.exp(-400.0 / (2 * sw2)) / (2 * math.pi * sw2),
        ]
        by_hand = frame.mu_b * sum(fvals) / 3.0 / (frame.mu_c * frame.f_c) + 1.0
        got = compute_xi0(cloud[None, :, :], weights, frame)
        assert got[0] == pytest.approx(by_hand, rel=1e-12)


class TestCensoring:
    def test_full_censoring(self):
        xi0 = np.array([1.05, 1.2, 1.0])
        spawn, censored, scores = censor_new(xi0, mu_b=1e-4, mu_c=10.0, threshold=1.0)
        assert not spawn.any()
        np.testing.assert_array_equal(censored, 1.0)

    def test_no_censoring_at_zero_threshold(self):
        xi0 = np.array([1.05, 1.2, 1.0])
        spawn, censored, _ = censor_new(xi0, mu_b=1e-4, mu_c=10.0, threshold=0.0)
        assert spawn.all()
        np.testing.assert_array_equal(censored, xi0)

    def test_scores_monotone_in_evidence(self):
        scores = censor_scores(np.array([1.0, 1.1, 2.0, 100.0]), 1e-4, 10.0)
        assert np.all(np.diff(scores) > 0)
        assert scores[0] == 0.0 and scores[-1] < 1.0


class TestBpAssociate:
    def test_tree_instances_match_enumeration(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            for n, m in [(1, 1), (1, 2), (1, 3), (2, 1), (3, 1)]:
                beta = rng.uniform(0.05, 2.0, (n, m + 1))
                xi0 = rng.uniform(0.2, 3.0, m)
                res = bp_associate(beta, xi0, max_iterations=200, tol=1e-14)
                pa, pb = enumerate_association_marginals(beta, xi0)
                np.testing.assert_allclose(res.target_beliefs, pa, atol=1e-10)
                np.testing.assert_allclose(res.measurement_beliefs, pb, atol=1e-10)

    def test_no_association_possible(self):
        beta = np.array([[0.7, 0.0, 0.0]])
        xi0 = np.array([1.5, 1.5])
        res = bp_associate(beta, xi0)
        np.testing.assert_allclose(res.target_beliefs, [[1.0, 0.0, 0.0]])
        assert res.converged and res.iterations <= 2

    def test_symmetric_targets_get_identical_rows(self):
        beta = np.array([[0.5, 1.0, 1.0], [0.5, 1.0, 1.0]])
        xi0 = np.array([1.0, 1.0])
        res = bp_associate(beta, xi0)
        np.testing.assert_allclose(res.kappa[0], res.kappa[1], atol=1e-12)
        np.testing.assert_allclose(res.target_beliefs[0], res.target_beliefs[1], atol=1e-12)

    def test_row_rescaling_invariance(self):
        rng = np.random.default_rng(8)
        beta = rng.uniform(0.1, 2.0, (3, 4))
        xi0 = rng.uniform(0.5, 2.0, 3)
        res = bp_associate(beta, xi0)
        scaled = beta.copy()
        scaled[1] *= 37.5
        res2 = bp_associate(scaled, xi0)
        np.testing.assert_allclose(res2.kappa, res.kappa, atol=1e-10)
        np.testing.assert_allclose(res2.target_beliefs, res.target_beliefs, atol=1e-10)

    def test_random_instances_normalized_and_bounded(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            beta = rng.uniform(0.05, 2.0, (3, 4))
            xi0 = rng.uniform(0.5, 2.0, 3)
            res = bp_associate(beta, xi0, max_iterations=100)
            assert res.iterations <= 100
            np.testing.assert_allclose(res.target_beliefs.sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_allclose(res.kappa.sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_allclose(res.iota.sum(axis=1), 1.0, atol=1e-12)

    def test_bitwise_reproducible(self):
        rng = np.random.default_rng(10)
        beta = rng.uniform(0.05, 2.0, (4, 5))
        xi0 = rng.uniform(0.5, 2.0, 4)
        a = bp_associate(beta, xi0)
        b = bp_associate(beta.copy(), xi0.copy())
        assert np.array_equal(a.kappa, b.kappa)
        assert np.array_equal(a.iota, b.iota)
        assert a.iterations == b.iterations

    def test_fixed_iteration_mode(self):
        beta = np.array([[0.5, 1.0], [0.5, 0.7]])
        xi0 = np.array([1.2])
        res = bp_associate(beta, xi0, fixed_iterations=20)
        assert res.iterations == 20 and not res.converged

    def test_empty_edges(self):
        res = bp_associate(np.zeros((0, 3)), np.ones(2))
        assert res.kappa.shape == (0, 3) and res.iota.shape == (2, 1)
        res = bp_associate(np.array([[0.4]]), np.zeros(0))
        assert res.kappa.shape == (1, 1) and res.iota.shape == (0, 2)

    def test_nonfinite_message_reported(self):
        beta = np.array([[0.0, 1.0]])  # no miss mass, single measurement
        with pytest.raises(BPNumericalError, match="entry"):
            bp_associate(beta, np.zeros(1))

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            AssociationProblem(beta=np.array([[1.0, -0.5]]), xi0=np.ones(1))
        with pytest.raises(ValueError):
            AssociationProblem(beta=np.ones((2, 3)), xi0=np.ones(1))


class TestComputeBeta:
    def test_missed_column_constant(self):
        w_star = np.array([[0.2, 0.3]])
        ratios = [[np.ones((2, 1))]]
        beta = compute_beta(w_star, ratios, np.array([1.0]), p_d=0.9)
        assert beta[0, 0] == pytest.approx((1.0 - 0.9) * 0.5 + 0.5)

    def test_identical_particles_across_partitions(self):
        rng = np.random.default_rng(11)
        r = rng.uniform(0.0, 5.0, (3, 2))
        w_star = rng.uniform(0.0, 0.3, (1, 3))
        single = compute_beta(w_star, [[r]], np.array([1.0]), p_d=0.9)
        mixed = compute_beta(w_star, [[r], [r.copy()]], np.array([0.5, 0.5]), p_d=0.9)
        np.testing.assert_allclose(mixed, single, atol=1e-14)

    def test_three_particle_hand_sum(self):
        frame = make_frame([[3.0, -4.0]])
        particles = np.array(
            [[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, -4.0, 0.0], [30.0, 0.0, 0.0, 0.0]]
        )
        w_star = np.array([[0.1, 0.2, 0.3]])
        ratios = [[likelihood_ratios(particles, frame)]]
        beta = compute_beta(w_star, ratios, np.array([1.0]), p_d=frame.p_d)
        sw2 = frame.sigma_w**2
        f = [
            math.exp(-25.0 / (2 * sw2)) / (2 * math.pi * sw2),
            math.exp(0.0) / (2 * math.pi * sw2),
            math.exp(-((27.0**2) + 16.0) / (2 * sw2)) / (2 * math.pi * sw2),
        ]
        by_hand = frame.p_d * sum(
            w * fi / (frame.mu_c * frame.f_c) for w, fi in zip([0.1, 0.2, 0.3], f)
        )
        assert beta[0, 1] == pytest.approx(by_hand, rel=1e-12)
        assert beta[0, 0] == pytest.approx((1 - frame.p_d) * 0.6 + 0.4)

    def test_linear_in_partition_weights(self):
        rng = np.random.default_rng(12)
        r1 = rng.uniform(0.0, 5.0, (4, 3))
        r2 = rng.uniform(0.0, 5.0, (4, 3))
        w_star = rng.uniform(0.0, 0.25, (1, 4))
        b1 = compute_beta(w_star, [[r1]], np.array([1.0]), p_d=0.9)
        b2 = compute_beta(w_star, [[r2]], np.array([1.0]), p_d=0.9)
        mix = compute_beta(w_star, [[r1], [r2]], np.array([0.3, 0.7]), p_d=0.9)
        np.testing.assert_allclose(mix[:, 1:], 0.3 * b1[:, 1:] + 0.7 * b2[:, 1:], atol=1e-14)


class TestGaussianLikelihood:
    def test_peak_value(self):
        z = np.array([[1.0, 2.0]])
        val = gaussian_likelihood(z, np.array([1.0, 2.0]), sigma_w=10.0)
        assert val[0] == pytest.approx(1.0 / (2 * math.pi * 100.0))

    def test_frame_validation(self):
        with pytest.raises(ValueError):
            make_frame([[0.0, 0.0]], mu_c=0.0)
        with pytest.raises(ValueError):
            make_frame([[0.0, 0.0]], p_d=0.0)
