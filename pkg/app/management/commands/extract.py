import logging

from joblib import Parallel, delayed

from app.conf import pot_settings
from app.descriptors import FrameSequence, extract_channels, load_precomputed
from app.exceptions import ManifestError
from app.serializers import ExtractOptionsSerializer
from app.storage import descriptor_path, write_matrix
from app.utils import combined_digest, file_digest, frame_paths, load_frames

from ._common import PotCommand

logger = logging.getLogger(__name__)


def _extract_video(record, computed, precomputed, output, binary, l1, clobber, meta):
    """Write every requested channel of one video; returns the written paths."""
    written = []
    if computed:
        directory = record.frames
        if directory is None or not directory.is_dir():
            raise ManifestError(f"{record.video_id}: frame directory {directory} not found")
        try:
            frames = load_frames(directory)
        except (OSError, ValueError) as exc:
            raise ManifestError(f"{record.video_id}: cannot read frames from {directory}: {exc}") from exc
        digest = combined_digest(frame_paths(directory))
        video = FrameSequence(record.video_id, frames)
        for channel, seq in extract_channels(video, [d.name for d in computed]).items():
            path = descriptor_path(output, channel, record.video_id, binary)
            written.append(write_matrix(
                path, seq.values, channel,
                metadata={**meta, "video": record.video_id, "source": "frames", "input_digest": digest},
                binary=binary, clobber=clobber,
            ))

    for decl in precomputed:
        source = record.sources.get(decl.name)
        if source is None or not source.is_file():
            raise ManifestError(f"{record.video_id}: descriptor file {source} for channel {decl.name} not found")
        seq = load_precomputed(
            source, expected_dim=decl.expected_dim, l1_normalize_rows=l1,
            video_id=record.video_id, channel=decl.name,
        )
        path = descriptor_path(output, decl.name, record.video_id, binary)
        written.append(write_matrix(
            path, seq.values, decl.name,
            metadata={**meta, "video": record.video_id, "source": "precomputed",
                      "l1": int(l1), "input_digest": file_digest(source)},
            binary=binary, clobber=clobber,
        ))
    return written


class Command(PotCommand):
    help = "Extract per-frame descriptors (HOF/HOG/MBH or precomputed) for every manifest video"
    serializer_class = ExtractOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--channels", help="Comma separated channels (default: all declared)")
        parser.add_argument("--output", required=True, help="Descriptor output directory")
        parser.add_argument("--binary", action="store_true", help="Write the binary container variant")
        parser.add_argument("--no-l1", action="store_true", dest="no_l1",
                            help="Keep precomputed descriptor rows as they are")
        parser.add_argument("--no-clobber", action="store_true", dest="no_clobber",
                            help="Keep existing output files")

    def run(self, manifest, output, channels=None, binary=False, no_l1=False, no_clobber=False, jobs=-1, **_):
        manifest = self.load_manifest(manifest)
        declarations = manifest.resolve_channels(channels)
        computed = [d for d in declarations if d.computed]
        precomputed = [d for d in declarations if not d.computed]
        l1 = pot_settings.L1_PRECOMPUTED and not no_l1
        meta = self.header(channels=",".join(d.name for d in declarations))

        results = Parallel(n_jobs=jobs)(
            delayed(_extract_video)(record, computed, precomputed, output, binary, l1, not no_clobber, meta)
            for record in manifest.videos
        )
        count = sum(len(paths) for paths in results)
        self.success(
            f"Wrote {count} descriptor files for {len(manifest.videos)} videos "
            f"({', '.join(d.name for d in declarations)}) to {output}"
        )
