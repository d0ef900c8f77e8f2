"""
Tests for the bag-of-words, Fisher vector and DTW baselines
"""
import os
import unittest

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "potlab.settings")

import django

django.setup()

import numpy as np
from django.test import SimpleTestCase
from scipy.spatial.distance import cdist

from app.baselines import (
    GaussianMixture,
    classify_dtw,
    dtw_distance,
    encode_bow,
    encode_ifv,
    fisher_vector,
    train_codebook,
    train_gmm,
)
from app.exceptions import DimensionMismatchError, InsufficientDataError
from app.models import DescriptorSequence, build_pyramid


def clustered(rng, centers, per_cluster, spread=0.05):
    return np.vstack([c + spread * rng.normal(size=(per_cluster, len(c))) for c in centers])


class BagOfWordsTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.centers = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 5.0]])
        self.data = clustered(rng, self.centers, 40)

    def test_codebook_finds_clusters(self):
        codebook = train_codebook(self.data, 3, seed=1)
        found = sorted(map(tuple, np.round(codebook.centers)))
        self.assertEqual(found, sorted(map(tuple, self.centers)))

    def test_same_seed_same_codebook(self):
        a = train_codebook(self.data, 3, seed=4)
        b = train_codebook(self.data, 3, seed=4)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_histograms_per_filter(self):
        codebook = train_codebook(self.data, 3, seed=1)
        seq = DescriptorSequence("v", "c", self.data[::7])
        pyramid = build_pyramid(2, seq.frame_count)
        vector = encode_bow(seq, codebook, pyramid)
        self.assertEqual(vector.shape, (9,))
        np.testing.assert_allclose(vector.reshape(3, 3).sum(axis=1), 1.0)
        self.assertTrue(np.all(vector >= 0))

    def test_single_filter_length_is_k(self):
        rng = np.random.default_rng(2)
        data = rng.random((500, 6))
        codebook = train_codebook(data, 40, seed=0)
        seq = DescriptorSequence("v", "c", data[:30])
        self.assertEqual(encode_bow(seq, codebook, build_pyramid(1, 30)).shape, (40,))

    def test_too_few_distinct_descriptors(self):
        with self.assertRaises(InsufficientDataError):
            train_codebook(np.ones((20, 3)), 2, seed=0)

    def test_dimension_mismatch(self):
        codebook = train_codebook(self.data, 3, seed=1)
        with self.assertRaises(DimensionMismatchError):
            encode_bow(DescriptorSequence("v", "c", np.ones((4, 5))), codebook, build_pyramid(1, 4))


class FisherVectorTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(3)
        self.gmm = GaussianMixture(
            weights=np.array([0.3, 0.7]),
            means=rng.normal(size=(2, 3)),
            variances=rng.uniform(0.5, 2.0, (2, 3)),
        )
        self.frames = rng.normal(size=(20, 3))

    def _loglik(self, means, sigmas):
        gmm = GaussianMixture(self.gmm.weights, means, sigmas ** 2)
        return gmm.average_log_likelihood(self.frames)

    def test_blocks_match_finite_differences(self):
        k, n = self.gmm.means.shape
        sigma = np.sqrt(self.gmm.variances)
        raw = fisher_vector(self.frames, self.gmm, improved=False)
        g_mu = raw[:k * n].reshape(k, n)
        g_sigma = raw[k * n:].reshape(k, n)
        h = 1e-6
        for c in range(k):
            for d in range(n):
                step = np.zeros((k, n))
                step[c, d] = h
                d_mu = (self._loglik(self.gmm.means + step, sigma) - self._loglik(self.gmm.means - step, sigma)) / (2 * h)
                d_sigma = (self._loglik(self.gmm.means, sigma + step) - self._loglik(self.gmm.means, sigma - step)) / (2 * h)
                w = self.gmm.weights[c]
                self.assertAlmostEqual(g_mu[c, d], d_mu * sigma[c, d] / np.sqrt(w), delta=1e-4)
                self.assertAlmostEqual(g_sigma[c, d], d_sigma * sigma[c, d] / np.sqrt(2 * w), delta=1e-4)

    def test_improved_vector_is_unit_or_zero(self):
        improved = fisher_vector(self.frames, self.gmm)
        self.assertAlmostEqual(float(np.linalg.norm(improved)), 1.0, delta=1e-9)
        empty = fisher_vector(np.empty((0, 3)), self.gmm)
        self.assertEqual(empty.shape, (12,))
        self.assertFalse(empty.any())

    def test_mean_block_vanishes_at_fitted_mean(self):
        rng = np.random.default_rng(6)
        frames = rng.normal(2.0, 0.5, (200, 2))
        gmm = train_gmm(frames, 1, seed=0)
        raw = fisher_vector(frames, gmm, improved=False)
        np.testing.assert_allclose(raw[:2], 0.0, atol=1e-8)
        np.testing.assert_allclose(raw[2:], 0.0, atol=1e-6)

    def test_distant_component_keeps_floored_posterior(self):
        rng = np.random.default_rng(8)
        gmm = GaussianMixture(np.array([0.5, 0.5]), np.array([[0.0, 0.0], [50.0, 50.0]]), np.ones((2, 2)))
        frames = rng.normal(0.0, 0.1, (10, 2))
        raw = fisher_vector(frames, gmm, improved=False)
        floor = 1e-10
        expected = floor * (frames - 50.0).sum(axis=0) / (10 * np.sqrt(0.5))
        np.testing.assert_allclose(raw[2:4], expected, rtol=1e-9)
        np.testing.assert_allclose(raw[:2], frames.sum(axis=0) / (10 * np.sqrt(0.5)), rtol=1e-9)
        self.assertTrue(np.all(np.isfinite(fisher_vector(frames, gmm))))

    def test_hof_sized_encoding_is_4000_d(self):
        rng = np.random.default_rng(1)
        gmm = GaussianMixture(np.full(10, 0.1), rng.random((10, 200)), np.ones((10, 200)))
        seq = DescriptorSequence("v", "hof", rng.random((12, 200)))
        self.assertEqual(encode_ifv(seq, gmm, build_pyramid(1, 12)).shape, (4000,))
        pyramid = build_pyramid(2, 12)
        blocks = encode_ifv(seq, gmm, pyramid).reshape(3, 4000)
        np.testing.assert_allclose(np.linalg.norm(blocks, axis=1), 1.0, atol=1e-9)


class GaussianMixtureTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(12)
        self.data = clustered(rng, np.array([[0.0, 0.0, 0.0], [4.0, 4.0, 0.0], [0.0, 4.0, 4.0]]), 60, spread=0.5)

    def test_em_is_monotone(self):
        gmm = train_gmm(self.data, 3, seed=2)
        history = np.array(gmm.log_likelihoods)
        self.assertGreater(len(history), 1)
        self.assertTrue(np.all(np.diff(history) >= -1e-9))

    def test_parameters_are_valid(self):
        gmm = train_gmm(self.data, 3, seed=2)
        self.assertAlmostEqual(float(gmm.weights.sum()), 1.0, places=10)
        self.assertTrue(np.all(gmm.variances > 0))
        restored = GaussianMixture.from_matrix(gmm.as_matrix())
        np.testing.assert_array_equal(restored.means, gmm.means)
        np.testing.assert_array_equal(restored.variances, gmm.variances)
        with self.assertRaises(DimensionMismatchError):
            GaussianMixture.from_matrix(gmm.as_matrix()[:, :-1])

    def test_needs_ten_points_per_component(self):
        with self.assertRaises(InsufficientDataError):
            train_gmm(self.data[:25], 3, seed=0)


def naive_dtw(a, b):
    costs = cdist(a, b)

    def cost(i, j):
        return float(costs[i, j])

    def d(i, j):
        if i == 0 and j == 0:
            return cost(0, 0)
        if i == 0:
            return cost(0, j) + d(0, j - 1)
        if j == 0:
            return cost(i, 0) + d(i - 1, 0)
        return cost(i, j) + min(d(i - 1, j), d(i, j - 1), d(i - 1, j - 1))

    return d(len(a) - 1, len(b) - 1)


class DtwTests(SimpleTestCase):
    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            a = rng.normal(size=(int(rng.integers(1, 7)), 3))
            b = rng.normal(size=(int(rng.integers(1, 7)), 3))
            self.assertEqual(dtw_distance(a, b), naive_dtw(a, b))

    def test_identity_and_symmetry(self):
        rng = np.random.default_rng(22)
        a = DescriptorSequence("a", "c", rng.random((9, 4)))
        b = DescriptorSequence("b", "c", rng.random((13, 4)))
        self.assertEqual(dtw_distance(a, a), 0.0)
        self.assertAlmostEqual(dtw_distance(a, b), dtw_distance(b, a), places=12)

    def test_warping_absorbs_repeats(self):
        a = np.array([[0.0], [1.0], [2.0]])
        b = np.array([[0.0], [0.0], [1.0], [1.0], [2.0]])
        self.assertEqual(dtw_distance(a, b), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            dtw_distance(np.ones((3, 2)), np.ones((3, 4)))

    def test_copy_of_template_is_recognized(self):
        rng = np.random.default_rng(23)
        templates = [DescriptorSequence(f"t{i}", "c", rng.random((8, 3)) + i) for i in range(3)]
        query = DescriptorSequence("q", "c", templates[1].values.copy())
        self.assertEqual(classify_dtw(templates, ["a", "b", "c"], query), "b")

    def test_tie_goes_to_first_template(self):
        values = np.zeros((4, 2))
        templates = [DescriptorSequence("t0", "c", values + 1), DescriptorSequence("t1", "c", values - 1)]
        self.assertEqual(classify_dtw(templates, ["x", "y"], DescriptorSequence("q", "c", values)), "x")

    def test_needs_templates(self):
        with self.assertRaises(InsufficientDataError):
            classify_dtw([], [], DescriptorSequence("q", "c", np.ones((2, 2))))


if __name__ == "__main__":
    unittest.main()
