"""
Tests for chi-square kernels and the SMO kernel SVM
"""
import os
import unittest

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "potlab.settings")

import django

django.setup()

import numpy as np
from django.test import SimpleTestCase

from app.classify import (
    chi2_distance,
    chi2_distance_matrix,
    kernel_matrix,
    multichannel_kernel,
    predict,
    predict_many,
    solve_binary,
    train_svm,
)
from app.exceptions import ConvergenceError, DimensionMismatchError, InsufficientDataError, KernelError


def separable_set(rng, per_class=20, dim=10):
    """Nonnegative vectors: class a puts its mass on the first half, class b on the second."""
    half = dim // 2
    a = np.hstack([rng.uniform(0.5, 1.0, (per_class, half)), rng.uniform(0.0, 0.1, (per_class, half))])
    b = np.hstack([rng.uniform(0.0, 0.1, (per_class, half)), rng.uniform(0.5, 1.0, (per_class, half))])
    return np.vstack([a, b]), ["a"] * per_class + ["b"] * per_class


class ChiSquareTests(SimpleTestCase):
    def test_hand_computed_distance(self):
        self.assertAlmostEqual(chi2_distance([1.0, 0.0, 2.0], [0.0, 0.0, 2.0]), 0.5)
        self.assertEqual(chi2_distance([0.0, 0.0], [0.0, 0.0]), 0.0)

    def test_kernel_properties_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            x, y = rng.random((2, 12))
            gammas = {"c": float(rng.uniform(0.1, 5.0))}
            kxy = multichannel_kernel({"c": x}, {"c": y}, gammas)
            self.assertEqual(kxy, multichannel_kernel({"c": y}, {"c": x}, gammas))
            self.assertEqual(multichannel_kernel({"c": x}, {"c": x}, gammas), 1.0)
            self.assertGreater(kxy, 0.0)
            self.assertLessEqual(kxy, 1.0)

    def test_matrix_matches_pairwise(self):
        rng = np.random.default_rng(1)
        xs, ys = rng.random((6, 5)), rng.random((4, 5))
        d = chi2_distance_matrix(xs, ys)
        for i in range(6):
            for j in range(4):
                self.assertAlmostEqual(d[i, j], chi2_distance(xs[i], ys[j]), places=12)
        sym = chi2_distance_matrix(xs)
        np.testing.assert_array_equal(sym, sym.T)
        self.assertFalse(np.diag(sym).any())

    def test_negative_inputs_warn(self):
        with self.assertLogs("app.classify", level="WARNING"):
            chi2_distance([-1.0, 1.0], [1.0, 1.0])

    def test_length_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            chi2_distance([1.0], [1.0, 2.0])


class KernelMatrixTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(2)
        self.train = {"hof": rng.random((8, 6)), "cnn": rng.random((8, 20))}
        self.test = {"hof": rng.random((3, 6)), "cnn": rng.random((3, 20))}

    def test_training_kernel(self):
        kernel = kernel_matrix(self.train)
        self.assertEqual(kernel.channels, ("cnn", "hof"))
        np.testing.assert_array_equal(kernel.values, kernel.values.T)
        np.testing.assert_array_equal(np.diag(kernel.values), 1.0)
        self.assertTrue(np.all((kernel.values > 0) & (kernel.values <= 1)))
        d = chi2_distance_matrix(self.train["hof"])
        self.assertAlmostEqual(kernel.gammas["hof"], d[np.triu_indices(8, 1)].mean(), places=12)

    def test_test_kernel_reuses_training_gammas(self):
        train = kernel_matrix(self.train)
        test = kernel_matrix(self.test, self.train, gammas=train.gammas)
        self.assertEqual(test.shape, (3, 8))
        x = {c: v[1] for c, v in self.test.items()}
        y = {c: v[5] for c, v in self.train.items()}
        self.assertAlmostEqual(test.values[1, 5], multichannel_kernel(x, y, train.gammas), places=12)

    def test_test_kernel_needs_gammas(self):
        with self.assertRaises(KernelError):
            kernel_matrix(self.test, self.train)

    def test_identical_training_vectors_fall_back_to_unit_gamma(self):
        with self.assertLogs("app.classify", level="WARNING"):
            kernel = kernel_matrix({"c": np.ones((4, 3))})
        self.assertEqual(kernel.gammas["c"], 1.0)


class SmoTests(SimpleTestCase):
    def test_dual_objective_is_monotone(self):
        rng = np.random.default_rng(3)
        xs = rng.random((30, 8))
        y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        kernel = kernel_matrix({"c": xs}).values
        solution = solve_binary(kernel, y, c=1.0, track_objective=True)
        self.assertGreater(len(solution.objective), 0)
        self.assertTrue(np.all(np.diff(solution.objective) >= -1e-10))
        alpha = solution.coef * y
        self.assertTrue(np.all((alpha >= -1e-12) & (alpha <= 1.0 + 1e-12)))
        self.assertAlmostEqual(float(solution.coef.sum()), 0.0, places=9)

    def test_separable_training_set(self):
        xs, labels = separable_set(np.random.default_rng(4))
        kernel = kernel_matrix({"c": xs})
        model = train_svm(kernel, labels, c=100.0)
        self.assertEqual(predict_many(model, kernel.values), labels)
        self.assertEqual(model.classes, ("a", "b"))
        self.assertEqual(model.as_matrix().shape, (2, 41))

    def test_multiclass_one_vs_rest(self):
        rng = np.random.default_rng(5)
        centers = np.eye(3) * 0.9 + 0.05
        xs = np.vstack([c + 0.02 * rng.random((10, 3)) for c in centers])
        labels = ["x"] * 10 + ["y"] * 10 + ["z"] * 10
        kernel = kernel_matrix({"c": xs})
        model = train_svm(kernel, labels)
        self.assertEqual(predict_many(model, kernel.values), labels)
        label, scores = predict(model, kernel.values[12])
        self.assertEqual(label, "y")
        self.assertEqual(scores.shape, (3,))

    def test_ties_go_to_lowest_class(self):
        kernel = np.eye(2)
        model = train_svm(kernel, ["b", "a"], c=1.0)
        label, scores = predict(model, [0.0, 0.0])
        self.assertAlmostEqual(scores[0], scores[1], places=12)
        self.assertEqual(label, "a")

    def test_iteration_cap(self):
        xs, labels = separable_set(np.random.default_rng(6))
        y = np.array([1.0 if label == "a" else -1.0 for label in labels])
        with self.assertRaises(ConvergenceError):
            solve_binary(kernel_matrix({"c": xs}).values, y, c=100.0, max_iter=1)

    def test_bad_training_input(self):
        with self.assertRaises(InsufficientDataError):
            train_svm(np.eye(3), ["a", "a", "a"])
        with self.assertRaises(DimensionMismatchError):
            train_svm(np.eye(3), ["a", "b"])


if __name__ == "__main__":
    unittest.main()
