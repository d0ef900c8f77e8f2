"""
Shared plumbing for the pot management commands: common flags, option
validation through DRF serializers and conversion of library errors into
CommandError.
"""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from potlab import __version__

from app.conf import pot_settings
from app.evaluation import load_plans, make_splits, save_plans
from app.exceptions import MissingFeatureError, PotError
from app.manifest import format_validation_errors, parse_manifest
from app.models import DescriptorSequence
from app.storage import find_descriptor, read_matrix

logger = logging.getLogger(__name__)


class PotCommand(BaseCommand):
    """
    Subclasses set ``serializer_class`` and implement ``run(**options)``
    which receives the validated options.
    """

    serializer_class = None
    uses_manifest = True

    def add_arguments(self, parser):
        if self.uses_manifest:
            parser.add_argument("--manifest", required=True, help="Dataset manifest (TSV)")
        parser.add_argument("--seed", type=int, default=None, help="Master seed (default from settings)")
        parser.add_argument("--jobs", type=int, default=None, help="Parallel workers, -1 for all cores")

    def option_defaults(self):
        return {"seed": pot_settings.SEED, "jobs": pot_settings.JOBS}

    def validate_options(self, options):
        data = {key: value for key, value in options.items() if value is not None}
        for key, value in self.option_defaults().items():
            data.setdefault(key, value)
        serializer = self.serializer_class(data=data)
        if not serializer.is_valid():
            raise CommandError(f"invalid options: {format_validation_errors(serializer.errors)}")
        return dict(serializer.validated_data)

    def handle(self, *args, **options):
        validated = self.validate_options(options)
        if self.uses_manifest:
            validated["manifest"] = options["manifest"]
        try:
            return self.run(**validated)
        except PotError as exc:
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError

    # ------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------
    def load_manifest(self, path):
        manifest = parse_manifest(path)
        self.stdout.write(
            f"Manifest {manifest.name}: {len(manifest.videos)} videos, "
            f"{len(manifest.classes)} classes, channels {','.join(manifest.channels)}"
        )
        return manifest

    def resolve_plans(self, manifest, trials, seed, split_frac, plans_path=None):
        """Reuse a saved plan file when given and present, else generate (and save)."""
        if plans_path and Path(plans_path).exists():
            plans = load_plans(plans_path, manifest.labels)
            if len(plans) != trials:
                self.stdout.write(self.style.WARNING(
                    f"Using {len(plans)} trials from {plans_path} (--trials {trials} ignored)"
                ))
            return plans
        plans = make_splits(manifest.labels, trials, seed, split_frac)
        if plans_path:
            save_plans(plans_path, plans, seed, split_frac)
            self.stdout.write(f"Saved {len(plans)} split plans to {plans_path}")
        return plans

    def load_sequences(self, descriptors_dir, manifest, channels):
        """video id -> channel -> DescriptorSequence from an extract output tree."""
        sequences = {}
        missing = []
        for video_id in manifest.video_ids:
            per_channel = {}
            for channel in channels:
                path = find_descriptor(descriptors_dir, channel, video_id)
                if path is None:
                    missing.append(f"{video_id}/{channel}")
                    continue
                per_channel[channel] = DescriptorSequence(video_id, channel, read_matrix(path, channel).values)
            sequences[video_id] = per_channel
        if missing:
            raise MissingFeatureError(missing, what="descriptor files")
        return sequences

    def header(self, **params):
        """Metadata lines written into every output file."""
        meta = {"tool": f"potlab {__version__}"}
        meta.update({key: value for key, value in params.items() if value is not None})
        return meta

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
