from app.conf import pot_settings
from app.evaluation import make_splits, save_plans
from app.serializers import SplitOptionsSerializer

from ._common import PotCommand


class Command(PotCommand):
    help = "Draw the random train/test splits once so every method is evaluated on the same videos"
    serializer_class = SplitOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--trials", type=int)
        parser.add_argument("--split-frac", type=float, dest="split_frac")
        parser.add_argument("--output", required=True, dest="plans", help="Plan file (JSON)")

    def option_defaults(self):
        return {**super().option_defaults(), "trials": pot_settings.TRIALS, "split_frac": pot_settings.SPLIT_FRAC}

    def run(self, manifest, trials, split_frac, seed, plans, **_):
        manifest = self.load_manifest(manifest)
        plan_list = make_splits(manifest.labels, trials, seed, split_frac)
        save_plans(plans, plan_list, seed, split_frac)
        first = plan_list[0]
        self.success(
            f"Wrote {len(plan_list)} plans to {plans} "
            f"({len(first.train_ids)} train / {len(first.test_ids)} test videos each)"
        )
