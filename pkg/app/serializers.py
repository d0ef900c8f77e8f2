# app/serializers.py
from rest_framework import serializers

from .descriptors import COMPUTED_CHANNELS
from .models import OperatorSet

NAME_PATTERN = r"^[A-Za-z0-9_.\-]+$"
METHOD_CHOICES = [
    ("pot", "Pooled time series"),
    ("bow", "Bag of visual words"),
    ("ifv", "Improved Fisher vector"),
]
SOURCE_CHOICES = [
    ("computed", "Computed from frames"),
    ("precomputed", "Precomputed descriptor file"),
]


# ------------------------------------------------------------
# HELPER FIELDS
# ------------------------------------------------------------
class CsvListField(serializers.ListField):
    """Accepts "a,b,c" as well as a list."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(",") if part.strip()]
        return super().to_internal_value(data)


class OperatorSetField(serializers.Field):
    default_error_messages = {
        "invalid": "Operators must be a comma separated subset of sum,max,d1,d2 without duplicates.",
    }

    def to_internal_value(self, data):
        try:
            return OperatorSet.parse(data)
        except (ValueError, TypeError):
            self.fail("invalid")

    def to_representation(self, value):
        return value.label


# ------------------------------------------------------------
# MANIFEST
# ------------------------------------------------------------
class ChannelDeclarationSerializer(serializers.Serializer):
    name = serializers.RegexField(NAME_PATTERN, max_length=64)
    source = serializers.ChoiceField(choices=SOURCE_CHOICES)
    expected_dim = serializers.IntegerField(min_value=1, required=False, allow_null=True)

    def validate(self, attrs):
        if attrs["source"] == "computed" and attrs["name"] not in COMPUTED_CHANNELS:
            raise serializers.ValidationError(
                f"channel {attrs['name']!r} cannot be computed; use one of {', '.join(COMPUTED_CHANNELS)}"
            )
        return attrs


class VideoRecordSerializer(serializers.Serializer):
    video_id = serializers.RegexField(NAME_PATTERN, max_length=200)
    class_label = serializers.CharField(max_length=200)
    sources = serializers.DictField(child=serializers.CharField(), required=False)

    def validate_class_label(self, value):
        if any(ch.isspace() for ch in value):
            raise serializers.ValidationError("Class labels may not contain whitespace.")
        return value


class ManifestSerializer(serializers.Serializer):
    name = serializers.CharField(max_length=200)
    videos = VideoRecordSerializer(many=True)
    channels = ChannelDeclarationSerializer(many=True)

    def validate(self, attrs):
        ids = [v["video_id"] for v in attrs["videos"]]
        duplicates = sorted({v for v in ids if ids.count(v) > 1})
        if duplicates:
            raise serializers.ValidationError(f"Duplicate video ids: {', '.join(duplicates)}")

        classes = {v["class_label"] for v in attrs["videos"]}
        if len(classes) < 2:
            raise serializers.ValidationError("A manifest needs at least 2 classes.")

        names = [c["name"] for c in attrs["channels"]]
        if len(set(names)) != len(names):
            raise serializers.ValidationError("Channel declared twice.")

        unresolved = []
        for video in attrs["videos"]:
            sources = video.get("sources") or {}
            for channel in attrs["channels"]:
                key = "frames" if channel["source"] == "computed" else channel["name"]
                if key not in sources:
                    unresolved.append(f"{video['video_id']}:{channel['name']}")
        if unresolved:
            raise serializers.ValidationError(f"Unresolvable channels: {', '.join(unresolved)}")
        return attrs


# ------------------------------------------------------------
# COMMAND OPTIONS
# ------------------------------------------------------------
class CommonOptionsSerializer(serializers.Serializer):
    seed = serializers.IntegerField(min_value=0)
    jobs = serializers.IntegerField()
    no_clobber = serializers.BooleanField(default=False)

    def validate_jobs(self, value):
        if value == 0 or value < -1:
            raise serializers.ValidationError("Use a positive job count or -1 for all cores.")
        return value


class ExtractOptionsSerializer(CommonOptionsSerializer):
    channels = CsvListField(child=serializers.RegexField(NAME_PATTERN), required=False, allow_null=True)
    output = serializers.CharField()
    binary = serializers.BooleanField(default=False)
    no_l1 = serializers.BooleanField(default=False)


class RepresentOptionsSerializer(CommonOptionsSerializer):
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    descriptors = serializers.CharField()
    output = serializers.CharField()
    channels = CsvListField(child=serializers.RegexField(NAME_PATTERN), required=False, allow_null=True)
    levels = serializers.IntegerField(min_value=1)
    ops = OperatorSetField()
    k = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    reseeds = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    plans = serializers.CharField(required=False, allow_null=True)
    trial = serializers.IntegerField(min_value=0, default=0)
    normalize = serializers.BooleanField(default=False)

    def validate(self, attrs):
        if attrs["method"] == "pot" and (attrs.get("reseeds") or 1) != 1:
            raise serializers.ValidationError({"reseeds": "PoT is deterministic; re-clustering applies to bow/ifv."})
        return attrs


class SplitOptionsSerializer(serializers.Serializer):
    trials = serializers.IntegerField(min_value=1)
    split_frac = serializers.FloatField(min_value=0.0, max_value=1.0)
    seed = serializers.IntegerField(min_value=0)
    plans = serializers.CharField(required=False, allow_null=True)

    def validate_split_frac(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("The split fraction must lie strictly between 0 and 1.")
        return value


class EvaluateOptionsSerializer(SplitOptionsSerializer):
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    representations = serializers.CharField()
    channels = CsvListField(child=serializers.RegexField(NAME_PATTERN), min_length=1)
    c = serializers.FloatField()
    report = serializers.CharField()
    jobs = serializers.IntegerField()
    save_models = serializers.CharField(required=False, allow_null=True)

    def validate_c(self, value):
        if value <= 0:
            raise serializers.ValidationError("C must be positive.")
        return value


class DtwOptionsSerializer(SplitOptionsSerializer):
    descriptors = serializers.CharField()
    channel = serializers.RegexField(NAME_PATTERN)
    report = serializers.CharField()
    jobs = serializers.IntegerField()


class SweepOptionsSerializer(SplitOptionsSerializer):
    descriptors = serializers.CharField()
    channels = CsvListField(child=serializers.RegexField(NAME_PATTERN), min_length=1)
    levels = serializers.IntegerField(min_value=1)
    c = serializers.FloatField()
    report = serializers.CharField()
    jobs = serializers.IntegerField()


class SynthesizeOptionsSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[("oscillation", "Oscillation"), ("ordering", "Phase ordering")])
    output = serializers.CharField()
    videos_per_class = serializers.IntegerField(min_value=2)
    frames = serializers.IntegerField(min_value=8)
    dim = serializers.IntegerField(min_value=1)
    noise = serializers.FloatField(min_value=0.0)
    seed = serializers.IntegerField(min_value=0)
