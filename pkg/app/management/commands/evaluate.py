import logging
from pathlib import Path

from app.conf import pot_settings
from app.evaluation import run_experiment, summarize_reseeds
from app.exceptions import DimensionMismatchError, MissingFeatureError
from app.report import render_report
from app.serializers import EvaluateOptionsSerializer
from app.storage import available_reseeds, representation_path, read_matrix, write_matrix, write_report
from app.utils import combined_digest

from ._common import PotCommand

logger = logging.getLogger(__name__)


def load_features(root, method, channels, video_ids, reseed=0):
    """video id -> channel -> vector, plus the files read."""
    features, paths, missing = {}, [], []
    dims = {}
    for video_id in video_ids:
        features[video_id] = {}
        for channel in channels:
            path = representation_path(root, method, channel, video_id, reseed)
            if not path.exists():
                missing.append(f"{video_id}/{channel}")
                continue
            vector = read_matrix(path, channel).values[0]
            if dims.setdefault(channel, vector.shape[0]) != vector.shape[0]:
                raise DimensionMismatchError(
                    f"{path}: {vector.shape[0]} values, other {channel} vectors have {dims[channel]}"
                )
            features[video_id][channel] = vector
            paths.append(path)
    if missing:
        raise MissingFeatureError(missing)
    return features, paths


class Command(PotCommand):
    help = "Train and test the chi-square kernel SVM over repeated random splits and write a report"
    serializer_class = EvaluateOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", required=True, choices=["pot", "bow", "ifv"])
        parser.add_argument("--representations", required=True, help="Directory written by represent")
        parser.add_argument("--channels", required=True, help="Comma separated channels; several are combined")
        parser.add_argument("--trials", type=int, help="Random splits (default from settings)")
        parser.add_argument("--split-frac", type=float, dest="split_frac", help="Training share per class")
        parser.add_argument("--c", type=float, help="SVM cost")
        parser.add_argument("--plans", help="Split plan file to reuse (created when absent)")
        parser.add_argument("--report", required=True, help="Report output path")
        parser.add_argument("--save-models", dest="save_models", help="Directory for per-trial SVM models")

    def option_defaults(self):
        return {
            **super().option_defaults(),
            "trials": pot_settings.TRIALS,
            "split_frac": pot_settings.SPLIT_FRAC,
            "c": pot_settings.SVM_C,
        }

    def run(self, manifest, method, representations, channels, trials, split_frac, c, report, seed, jobs,
            plans=None, save_models=None, **_):
        manifest = self.load_manifest(manifest)
        plan_list = self.resolve_plans(manifest, trials, seed, split_frac, plans)
        labels = manifest.labels

        reseeds = available_reseeds(representations, method, channels) or [0]
        reports, inputs = [], []
        for reseed in reseeds:
            features, paths = load_features(representations, method, channels, manifest.video_ids, reseed)
            inputs += paths
            reports.append(run_experiment(
                features, labels, plan_list, channels=channels, c=c, n_jobs=jobs,
                keep_models=bool(save_models) and reseed == reseeds[0],
            ))
            if len(reseeds) > 1:
                self.stdout.write(f"r{reseed:02d}: mean accuracy {reports[-1].mean_accuracy:.4f}")

        primary = reports[0]
        if save_models:
            self._save_models(save_models, method, channels, primary, plan_list)

        params = {
            "command": "evaluate",
            "method": method,
            "channels": channels,
            "trials": len(plan_list),
            "split_frac": split_frac,
            "c": c,
            "seed": seed,
            "dataset": manifest.name,
        }
        text = render_report(
            primary, params,
            input_digest=combined_digest(inputs),
            reseeds=summarize_reseeds(reports) if len(reports) > 1 else None,
        )
        write_report(report, text)
        low, high = primary.interval
        self.success(
            f"{method} {'+'.join(channels)}: mean accuracy {primary.mean_accuracy:.4f} "
            f"(95% CI {low:.4f}-{high:.4f}) over {len(plan_list)} trials; report at {report}"
        )

    def _save_models(self, directory, method, channels, report, plans):
        base = Path(directory) / method
        for result, plan in zip(report.trials, plans):
            model = result.model
            meta = self.header(
                method=method, channels=",".join(channels), trial=plan.trial,
                classes=",".join(map(str, model.classes)), c=model.c,
                training=",".join(plan.train_ids),
            )
            write_matrix(base / f"trial{plan.trial:03d}.potdesc", model.as_matrix(), "svm", metadata=meta)
        self.stdout.write(f"Saved {len(report.trials)} SVM models under {base}")
