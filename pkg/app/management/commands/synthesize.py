from django.core.management.base import CommandError

from app.serializers import SynthesizeOptionsSerializer
from app.synthetic import synthesize, write_dataset

from ._common import PotCommand


class Command(PotCommand):
    help = "Write a small designed dataset (manifest + precomputed descriptors) for pipeline checks"
    serializer_class = SynthesizeOptionsSerializer
    uses_manifest = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--kind", required=True, choices=["oscillation", "ordering"])
        parser.add_argument("--output", required=True)
        parser.add_argument("--videos-per-class", type=int, default=30, dest="videos_per_class")
        parser.add_argument("--frames", type=int, default=40)
        parser.add_argument("--dim", type=int, default=20)
        parser.add_argument("--noise", type=float, default=0.05)

    def run(self, kind, output, videos_per_class, frames, dim, noise, seed, **_):
        if kind == "ordering" and frames % 2:
            raise CommandError("the ordering dataset needs an even frame count")
        sequences, labels = synthesize(kind, videos_per_class, frames, dim, noise, seed)
        manifest = write_dataset(
            sequences, labels, output, name=f"synthetic-{kind}",
            metadata={"kind": kind, "seed": seed, "noise": noise},
        )
        self.success(f"Wrote {len(sequences)} {kind} videos; manifest at {manifest}")
