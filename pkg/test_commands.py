"""
End-to-end runs of the management commands on small synthetic datasets
"""
import os
import shutil
import tempfile
import unittest
from io import StringIO
from pathlib import Path

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "potlab.settings")

import django

django.setup()

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from scipy.ndimage import gaussian_filter

from app.manifest import parse_manifest
from app.storage import quantizer_path, read_matrix, representation_path
from app.utils import save_frame


def run(command, **options):
    out = StringIO()
    call_command(command, stdout=out, jobs=1, **options)
    return out.getvalue()


def section(report_text, name):
    lines = report_text.split("\n")
    start = lines.index(f"[{name}]") + 1
    end = lines.index("", start)
    return lines[start:end]


class SyntheticPipelineTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        run("synthesize", kind="ordering", output=str(cls.root / "data"),
            videos_per_class=6, frames=16, dim=4, seed=3)
        cls.manifest = str(cls.root / "data" / "manifest.tsv")
        cls.descriptors = str(cls.root / "desc")
        run("extract", manifest=cls.manifest, output=cls.descriptors, no_l1=True)
        cls.representations = str(cls.root / "repr")
        run("represent", manifest=cls.manifest, method="pot", descriptors=cls.descriptors,
            output=cls.representations, levels=2)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def evaluate(self, report, method="pot", **options):
        options.setdefault("trials", 3)
        run("evaluate", manifest=self.manifest, method=method, representations=self.representations,
            channels="synth", report=str(report), **options)
        return Path(report).read_text()

    def test_synthesized_manifest(self):
        manifest = parse_manifest(self.manifest)
        self.assertEqual(manifest.name, "synthetic-ordering")
        self.assertEqual(len(manifest.videos), 12)
        self.assertEqual(manifest.channel("synth").expected_dim, 4)

    def test_extract_keeps_rows_raw(self):
        source = read_matrix(self.root / "data" / "descriptors" / "synth" / "rise_fall_000.potdesc")
        extracted = read_matrix(Path(self.descriptors) / "synth" / "rise_fall_000.potdesc")
        np.testing.assert_allclose(extracted.values, source.values, rtol=1e-9)
        self.assertEqual(extracted.metadata["l1"], "0")

    def test_pot_vector_dimension(self):
        vector = read_matrix(representation_path(self.representations, "pot", "synth", "fall_rise_002"))
        self.assertEqual(vector.values.shape, (1, 4 * 3 * 6))
        self.assertEqual(vector.metadata["levels"], "2")

    def test_same_seed_gives_identical_reports(self):
        first = self.evaluate(self.root / "a.txt", seed=7)
        second = self.evaluate(self.root / "b.txt", seed=7)
        self.assertEqual(first, second)
        self.assertIn("seed = 7", section(first, "params"))
        self.assertEqual(len(section(first, "per-trial")), 3)
        self.assertTrue(section(first, "confusion")[0].startswith("true\\pred"))

    def test_zero_trials_rejected(self):
        with self.assertRaises(CommandError):
            self.evaluate(self.root / "zero.txt", trials=0)

    def test_missing_representations(self):
        with self.assertRaises(CommandError) as ctx:
            run("evaluate", manifest=self.manifest, method="pot", representations=str(self.root / "empty"),
                channels="synth", trials=2, report=str(self.root / "missing.txt"))
        self.assertIn("fall_rise_000/synth", str(ctx.exception))

    def test_bow_reseeds_are_summarized(self):
        plans = str(self.root / "plans-bow.json")
        run("splits", manifest=self.manifest, trials=2, plans=plans, seed=5)
        run("represent", manifest=self.manifest, method="bow", descriptors=self.descriptors,
            output=self.representations, levels=1, k=4, reseeds=2, plans=plans)
        codebook = read_matrix(quantizer_path(self.representations, "bow", "synth", 1))
        self.assertEqual(codebook.values.shape, (4, 4))
        self.assertEqual(codebook.metadata["quantizer_fit"], "train:trial0")
        text = self.evaluate(self.root / "bow.txt", method="bow", plans=plans)
        aggregate = section(text, "aggregate")
        self.assertIn("reseeds = 2", aggregate)
        self.assertTrue(any(line.startswith("reseed_median_accuracy = ") for line in aggregate))
        self.assertTrue(any(line.startswith("reseed_ci95 = ") for line in aggregate))

    def test_no_clobber_reuses_stored_quantizer(self):
        output = str(self.root / "repr-kept")
        run("represent", manifest=self.manifest, method="bow", descriptors=self.descriptors,
            output=output, levels=1, k=4, reseeds=1, seed=5)
        vector_path = representation_path(output, "bow", "synth", "rise_fall_003")
        first = read_matrix(vector_path)
        codebook = read_matrix(quantizer_path(output, "bow", "synth", 0))
        vector_path.unlink()

        out = run("represent", manifest=self.manifest, method="bow", descriptors=self.descriptors,
                  output=output, levels=1, k=3, reseeds=1, seed=99, no_clobber=True)
        self.assertIn("Reusing quantizer", out)
        kept = read_matrix(quantizer_path(output, "bow", "synth", 0))
        np.testing.assert_array_equal(kept.values, codebook.values)
        self.assertEqual(kept.metadata["seed"], codebook.metadata["seed"])
        again = read_matrix(vector_path)
        self.assertEqual(again.values.shape, (1, 4))
        np.testing.assert_array_equal(again.values, first.values)
        self.assertEqual(again.metadata["seed"], codebook.metadata["seed"])

    def test_ifv_vectors_follow_stored_mixture(self):
        output = str(self.root / "repr-ifv-kept")
        run("represent", manifest=self.manifest, method="ifv", descriptors=self.descriptors,
            output=output, levels=1, k=2, reseeds=1)
        representation_path(output, "ifv", "synth", "fall_rise_004").unlink()
        run("represent", manifest=self.manifest, method="ifv", descriptors=self.descriptors,
            output=output, levels=1, k=3, reseeds=1, seed=42, no_clobber=True)
        mixture = read_matrix(quantizer_path(output, "ifv", "synth", 0))
        self.assertEqual(mixture.values.shape, (2, 1 + 2 * 4))
        vector = read_matrix(representation_path(output, "ifv", "synth", "fall_rise_004"))
        self.assertEqual(vector.values.shape, (1, 2 * 2 * 4))

    def test_ifv_vectors(self):
        run("represent", manifest=self.manifest, method="ifv", descriptors=self.descriptors,
            output=self.representations, levels=1, k=2, reseeds=1)
        vector = read_matrix(representation_path(self.representations, "ifv", "synth", "rise_fall_001"))
        self.assertEqual(vector.values.shape, (1, 2 * 2 * 4))
        self.assertAlmostEqual(float(np.linalg.norm(vector.values)), 1.0, places=6)

    def test_pot_does_not_reseed(self):
        with self.assertRaises(CommandError):
            run("represent", manifest=self.manifest, method="pot", descriptors=self.descriptors,
                output=str(self.root / "other"), reseeds=3)

    def test_infeasible_pyramid(self):
        with self.assertRaises(CommandError) as ctx:
            run("represent", manifest=self.manifest, method="pot", descriptors=self.descriptors,
                output=str(self.root / "deep"), levels=6)
        self.assertIn("infeasible temporal pyramid", str(ctx.exception))

    def test_saved_plans_are_shared(self):
        plans = str(self.root / "plans.json")
        run("splits", manifest=self.manifest, trials=2, plans=plans, seed=9)
        pot = self.evaluate(self.root / "pot-plans.txt", plans=plans, seed=1)
        run("dtw", manifest=self.manifest, descriptors=self.descriptors, channel="synth",
            plans=plans, report=str(self.root / "dtw.txt"))
        dtw = (self.root / "dtw.txt").read_text()
        self.assertEqual(len(section(pot, "per-trial")), 2)
        self.assertEqual(len(section(dtw, "per-trial")), 2)
        self.assertIn("method = dtw", section(dtw, "params"))

    def test_sweep(self):
        report = self.root / "sweep.txt"
        run("sweep", manifest=self.manifest, descriptors=self.descriptors, channels="synth",
            levels=2, trials=2, report=str(report))
        rows = section(report.read_text(), "sweep")
        self.assertEqual(len(rows), 30)
        self.assertTrue(rows[0].startswith("ops=sum levels=1 "))

    def test_ordering_needs_even_frames(self):
        with self.assertRaises(CommandError):
            run("synthesize", kind="ordering", output=str(self.root / "odd"), frames=15)


def write_frames(directory, seed, shift):
    directory.mkdir(parents=True)
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.random((24, 24)), sigma=2.0, mode="wrap")
    base = (base - base.min()) / (base.max() - base.min())
    for t in range(3):
        frame = np.roll(base, shift * t, axis=1)
        save_frame(frame, directory / f"frame_{t:03d}.pgm")


class FrameExtractionTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        rows = ["#dataset clips"]
        for index, (label, shift) in enumerate([("left", -2), ("left", -2), ("right", 2), ("right", 2)]):
            write_frames(self.root / "frames" / f"v{index}", seed=index, shift=shift)
            rows.append(f"v{index}\t{label}\tframes=frames/v{index}")
        self.manifest = self.root / "clips.tsv"
        self.manifest.write_text("\n".join(rows) + "\n")

    def tearDown(self):
        self.tmp.cleanup()

    def test_computed_channels(self):
        out = self.root / "desc"
        output = run("extract", manifest=str(self.manifest), output=str(out), channels="hof,hog")
        self.assertIn("Wrote 8 descriptor files for 4 videos", output)
        self.assertEqual(len(list(out.rglob("*.potdesc"))), 8)
        hof = read_matrix(out / "hof" / "v0.potdesc")
        self.assertEqual(hof.values.shape, (2, 200))
        self.assertEqual(read_matrix(out / "hog" / "v0.potdesc").values.shape, (3, 200))
        self.assertEqual(hof.metadata["source"], "frames")

        representations = self.root / "repr"
        run("represent", manifest=str(self.manifest), method="pot", descriptors=str(out),
            output=str(representations), channels="hof,hog", levels=1)
        report = self.root / "report.txt"
        run("evaluate", manifest=str(self.manifest), method="pot", representations=str(representations),
            channels="hof,hog", trials=2, report=str(report))
        params = section(report.read_text(), "params")
        self.assertTrue(any(line.startswith("gamma.hof = ") for line in params))
        self.assertTrue(any(line.startswith("gamma.hog = ") for line in params))

    def test_missing_frame_directory_names_video(self):
        shutil.rmtree(self.root / "frames" / "v3")
        with self.assertRaises(CommandError) as ctx:
            run("extract", manifest=str(self.manifest), output=str(self.root / "desc"), channels="hof")
        self.assertIn("v3", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
