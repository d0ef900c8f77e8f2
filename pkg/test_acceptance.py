"""
End-to-end discrimination checks on the designed synthetic datasets
"""
import os
import time
import unittest

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "potlab.settings")

import django

django.setup()

from django.test import SimpleTestCase

from app.evaluation import make_splits, run_experiment
from app.models import OperatorSet, build_pyramid
from app.pooling import build_pot
from app.synthetic import CHANNEL, oscillation_dataset, ordering_dataset

TRIALS = 20
SEED = 1


def pot_accuracy(sequences, labels, levels, ops):
    ops = OperatorSet.parse(ops)
    features = {
        video: {CHANNEL: build_pot(seq, build_pyramid(levels, seq.frame_count), ops).values}
        for video, seq in sequences.items()
    }
    report = run_experiment(features, labels, make_splits(labels, TRIALS, SEED))
    return report.mean_accuracy


class OscillationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.started = time.perf_counter()
        cls.sequences, cls.labels = oscillation_dataset(videos_per_class=30, frames=40, dim=20, noise=0.05, seed=SEED)

    def test_class_sizes(self):
        self.assertEqual(len(self.sequences), 90)
        self.assertEqual(sorted(set(self.labels.values())), ["cycle2", "cycle4", "ramp"])
        self.assertEqual(self.sequences["ramp_000"].values.shape, (40, 20))

    def test_gradient_pooling_separates_oscillations(self):
        self.assertGreaterEqual(pot_accuracy(self.sequences, self.labels, 1, "d1,d2"), 0.95)

    def test_sum_and_max_do_not(self):
        self.assertLessEqual(pot_accuracy(self.sequences, self.labels, 1, "sum,max"), 0.55)

    def test_runtime(self):
        pot_accuracy(self.sequences, self.labels, 1, "d1,d2")
        self.assertLess(time.perf_counter() - self.started, 60.0)


class OrderingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sequences, cls.labels = ordering_dataset(videos_per_class=30, frames=40, dim=20, noise=0.05, seed=SEED)

    def test_pyramid_recovers_phase_order(self):
        self.assertGreaterEqual(pot_accuracy(self.sequences, self.labels, 4, "sum,max,d1,d2"), 0.95)

    def test_whole_video_statistics_do_not(self):
        self.assertLessEqual(pot_accuracy(self.sequences, self.labels, 1, "sum,max,d1,d2"), 0.60)


if __name__ == "__main__":
    unittest.main()
