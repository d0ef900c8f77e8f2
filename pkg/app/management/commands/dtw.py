from app.conf import pot_settings
from app.evaluation import run_dtw_experiment
from app.report import render_report
from app.serializers import DtwOptionsSerializer
from app.storage import find_descriptor, write_report
from app.utils import combined_digest

from ._common import PotCommand


class Command(PotCommand):
    help = "1-NN dynamic time warping baseline under the shared split plans"
    serializer_class = DtwOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--descriptors", required=True, help="Directory written by extract")
        parser.add_argument("--channel", required=True)
        parser.add_argument("--trials", type=int)
        parser.add_argument("--split-frac", type=float, dest="split_frac")
        parser.add_argument("--plans", help="Split plan file to reuse (created when absent)")
        parser.add_argument("--report", required=True)

    def option_defaults(self):
        return {**super().option_defaults(), "trials": pot_settings.TRIALS, "split_frac": pot_settings.SPLIT_FRAC}

    def run(self, manifest, descriptors, channel, trials, split_frac, report, seed, jobs, plans=None, **_):
        manifest = self.load_manifest(manifest)
        plan_list = self.resolve_plans(manifest, trials, seed, split_frac, plans)
        sequences = {
            video_id: per_channel[channel]
            for video_id, per_channel in self.load_sequences(descriptors, manifest, [channel]).items()
        }
        result = run_dtw_experiment(sequences, manifest.labels, plan_list, n_jobs=jobs)

        params = {
            "command": "dtw",
            "method": "dtw",
            "channels": [channel],
            "trials": len(plan_list),
            "split_frac": split_frac,
            "seed": seed,
            "dataset": manifest.name,
        }
        inputs = [find_descriptor(descriptors, channel, v) for v in manifest.video_ids]
        write_report(report, render_report(result, params, input_digest=combined_digest(inputs)))
        self.success(f"DTW {channel}: mean accuracy {result.mean_accuracy:.4f} over {len(plan_list)} trials")
