import logging

from django.core.management.base import CommandError
from joblib import Parallel, delayed

from app.baselines import Codebook, GaussianMixture, encode_bow, encode_ifv, train_codebook, train_gmm
from app.conf import pot_settings
from app.evaluation import load_plans
from app.exceptions import DimensionMismatchError, InfeasiblePyramidError
from app.models import build_pyramid
from app.pooling import build_pot
from app.serializers import RepresentOptionsSerializer
from app.storage import find_descriptor, quantizer_path, read_matrix, representation_path, write_matrix
from app.utils import derive_seed, file_digest

from ._common import PotCommand

logger = logging.getLogger(__name__)


def default_k(method, dim):
    if method == "bow":
        return pot_settings.BOW_K
    return pot_settings.IFV_K_HIGH_DIM if dim >= pot_settings.HIGH_DIM else pot_settings.IFV_K


def _write_vector(path, vector, channel, expected, meta, clobber):
    if vector.shape[0] != expected:
        raise DimensionMismatchError(f"{path}: vector has {vector.shape[0]} values, expected {expected}")
    return write_matrix(path, vector[None, :], channel, metadata={**meta, "dim": expected}, clobber=clobber)


def _stored_quantizer(method, path, channel, dim):
    stored = read_matrix(path, channel)
    if method == "bow":
        quantizer = Codebook(stored.values)
    else:
        quantizer = GaussianMixture.from_matrix(stored.values)
    if quantizer.dim != dim:
        raise DimensionMismatchError(f"{path}: stored quantizer has dim {quantizer.dim}, descriptors have {dim}")
    return quantizer, stored.metadata


def _pot_video(seq, pyramid, ops, normalize, path, meta, clobber):
    pot = build_pot(seq, pyramid, ops, normalize=normalize)
    expected = seq.dim * len(pyramid) * ops.width
    return _write_vector(path, pot.values, seq.channel, expected, meta, clobber)


def _quantized_video(method, seq, quantizer, pyramid, path, meta, clobber):
    if method == "bow":
        vector = encode_bow(seq, quantizer, pyramid)
        expected = quantizer.size * len(pyramid)
    else:
        vector = encode_ifv(seq, quantizer, pyramid)
        expected = 2 * quantizer.size * quantizer.dim * len(pyramid)
    return _write_vector(path, vector, seq.channel, expected, meta, clobber)


class Command(PotCommand):
    help = "Build per-video representations (pot, bow or ifv) from extracted descriptors"
    serializer_class = RepresentOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", required=True, choices=["pot", "bow", "ifv"])
        parser.add_argument("--descriptors", required=True, help="Directory written by extract")
        parser.add_argument("--output", required=True, help="Representation output directory")
        parser.add_argument("--channels", help="Comma separated channels (default: all declared)")
        parser.add_argument("--levels", type=int, help="Temporal pyramid levels (1 = no pyramid)")
        parser.add_argument("--ops", help="Pooling operators, subset of sum,max,d1,d2")
        parser.add_argument("--k", type=int, help="Codebook / mixture size for bow and ifv")
        parser.add_argument("--reseeds", type=int, help="Quantizer re-clusterings for bow and ifv")
        parser.add_argument("--plans", help="Split plan file; fit the quantizer on one trial's training videos")
        parser.add_argument("--trial", type=int, help="Trial whose training videos fit the quantizer")
        parser.add_argument("--normalize", action="store_true", default=None, help="L1-normalize PoT vectors")
        parser.add_argument("--no-clobber", action="store_true", dest="no_clobber")

    def option_defaults(self):
        return {**super().option_defaults(), "levels": pot_settings.LEVELS, "ops": pot_settings.OPS,
                "normalize": pot_settings.NORMALIZE_POT}

    def run(self, manifest, method, descriptors, output, levels, ops, seed, jobs,
            channels=None, k=None, reseeds=None, plans=None, trial=0, normalize=False,
            no_clobber=False, **_):
        manifest = self.load_manifest(manifest)
        channels = channels or list(manifest.channels)
        sequences = self.load_sequences(descriptors, manifest, channels)
        clobber = not no_clobber

        pyramids, failures = {}, []
        for video_id, per_channel in sequences.items():
            for channel, seq in per_channel.items():
                try:
                    pyramids[video_id, channel] = build_pyramid(levels, seq.frame_count)
                except InfeasiblePyramidError as exc:
                    failures.append(f"{video_id}/{channel}: {exc}")
        if failures:
            raise CommandError("infeasible temporal pyramid for " + "; ".join(failures))

        digests = {
            (video_id, channel): file_digest(find_descriptor(descriptors, channel, video_id))
            for video_id in sequences for channel in channels
        }

        if method == "pot":
            self._represent_pot(sequences, pyramids, digests, channels, levels, ops, normalize, output, jobs, clobber)
            return

        fit_ids, fit_scope = manifest.video_ids, "all"
        if plans:
            plan_list = load_plans(plans, manifest.labels)
            if trial >= len(plan_list):
                raise CommandError(f"--trial {trial} out of range, {plans} holds {len(plan_list)} trials")
            fit_ids, fit_scope = plan_list[trial].train_ids, f"train:trial{trial}"
        else:
            self.stdout.write(self.style.WARNING(
                "Fitting the quantizer on all videos; pass --plans to fit on training videos only"
            ))

        reseeds = reseeds or pot_settings.RESEEDS
        for channel in channels:
            dim = sequences[fit_ids[0]][channel].dim
            size = k or default_k(method, dim)
            fit_set = [sequences[v][channel] for v in fit_ids]
            for reseed in range(reseeds):
                path = quantizer_path(output, method, channel, reseed)
                if clobber or not path.exists():
                    quantizer_seed = derive_seed(seed, f"{method}/{channel}/r{reseed:02d}")
                    if method == "bow":
                        matrix = train_codebook(fit_set, size, quantizer_seed).centers
                    else:
                        matrix = train_gmm(fit_set, size, quantizer_seed).as_matrix()
                    write_matrix(path, matrix, channel, metadata=self.header(
                        method=method, channel=channel, levels=levels, k=size,
                        reseed=reseed, seed=quantizer_seed, quantizer_fit=fit_scope,
                    ))
                    logger.info("%s/%s r%02d: K=%d fitted on %d videos", method, channel, reseed, size, len(fit_ids))
                else:
                    self.stdout.write(f"Reusing quantizer {path}")
                # vectors are always encoded with the quantizer as stored on disk
                quantizer, stored = _stored_quantizer(method, path, channel, dim)
                meta = self.header(
                    method=method, channel=channel, levels=levels, k=quantizer.size, reseed=reseed,
                    seed=stored.get("seed", ""), quantizer_fit=stored.get("quantizer_fit", ""),
                )
                Parallel(n_jobs=jobs, prefer="threads")(
                    delayed(_quantized_video)(
                        method, sequences[video_id][channel], quantizer, pyramids[video_id, channel],
                        representation_path(output, method, channel, video_id, reseed),
                        {**meta, "video": video_id, "input_digest": digests[video_id, channel]},
                        clobber,
                    )
                    for video_id in sequences
                )
            self.success(f"{method} {channel}: {len(sequences)} vectors x {reseeds} re-clusterings (K={quantizer.size})")

    def _represent_pot(self, sequences, pyramids, digests, channels, levels, ops, normalize, output, jobs, clobber):
        for channel in channels:
            meta = self.header(method="pot", channel=channel, levels=levels, ops=ops.label, normalize=int(normalize))
            Parallel(n_jobs=jobs)(
                delayed(_pot_video)(
                    sequences[video_id][channel], pyramids[video_id, channel], ops, normalize,
                    representation_path(output, "pot", channel, video_id),
                    {**meta, "video": video_id, "input_digest": digests[video_id, channel]},
                    clobber,
                )
                for video_id in sequences
            )
            self.success(f"pot {channel}: {len(sequences)} vectors (levels={levels}, ops={ops.label})")
