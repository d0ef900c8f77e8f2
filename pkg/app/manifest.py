# app/manifest.py
"""
Dataset manifests: one tab-separated record per video

    <video_id> TAB <class_label> TAB <key>=<path> ...

where ``frames=<dir>`` points at a still-image directory (for computed
channels) and ``<channel>=<file>`` at a precomputed descriptor file.
Directive lines declare the dataset and its channels:

    #dataset dogcentric
    #channel hof computed 200
    #channel cnn precomputed 4096

Other lines starting with '#' are comments. Relative paths resolve against
the manifest's directory.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .descriptors import COMPUTED_CHANNELS
from .exceptions import ManifestError
from .serializers import ManifestSerializer

CHANNEL_DIMS = {"hof": 200, "hog": 200, "mbh": 400}


@dataclass(frozen=True)
class ChannelDeclaration:
    name: str
    source: str                 # "computed" | "precomputed"
    expected_dim: int | None = None

    @property
    def computed(self) -> bool:
        return self.source == "computed"


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    class_label: str
    sources: dict = field(default_factory=dict)

    @property
    def frames(self) -> Path | None:
        return self.sources.get("frames")


@dataclass(frozen=True)
class ExperimentManifest:
    name: str
    videos: tuple
    channels: dict
    path: Path | None = None

    @property
    def labels(self) -> dict:
        return {v.video_id: v.class_label for v in self.videos}

    @property
    def video_ids(self) -> list[str]:
        return [v.video_id for v in self.videos]

    @property
    def classes(self) -> tuple:
        return tuple(sorted({v.class_label for v in self.videos}))

    def channel(self, name: str) -> ChannelDeclaration:
        try:
            return self.channels[name]
        except KeyError:
            raise ManifestError(f"channel {name!r} is not declared in manifest {self.name!r}") from None

    def resolve_channels(self, names=None) -> list[ChannelDeclaration]:
        if not names:
            return list(self.channels.values())
        return [self.channel(n) for n in names]


def _format_errors(errors, prefix=""):
    if isinstance(errors, dict):
        parts = []
        for key, value in errors.items():
            label = prefix if key == "non_field_errors" else f"{prefix}{key}."
            parts.append(_format_errors(value, label))
        return "; ".join(p for p in parts if p)
    if isinstance(errors, list):
        if errors and all(isinstance(e, (dict, list)) for e in errors):
            return "; ".join(
                _format_errors(e, f"{prefix}{i}.") for i, e in enumerate(errors) if e
            )
        return "; ".join(f"{prefix.rstrip('.')}: {e}" if prefix else str(e) for e in errors)
    return str(errors)


def format_validation_errors(errors) -> str:
    """Flatten DRF serializer errors into one line."""
    return _format_errors(errors)


def parse_manifest(path) -> ExperimentManifest:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest {path} does not exist")
    base = path.parent

    name = path.stem
    declared = []
    videos = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if words and words[0] == "dataset" and len(words) == 2:
                name = words[1]
            elif words and words[0] == "channel":
                if len(words) not in (3, 4):
                    raise ManifestError(f"{path}:{lineno}: expected '#channel NAME SOURCE [DIM]'")
                declared.append({
                    "name": words[1],
                    "source": words[2],
                    "expected_dim": words[3] if len(words) == 4 else None,
                })
            continue

        fields = line.split("\t")
        if len(fields) < 2:
            raise ManifestError(f"{path}:{lineno}: expected video_id<TAB>class_label[<TAB>key=path...]")
        sources = {}
        for item in fields[2:]:
            key, sep, value = item.partition("=")
            if not sep or not key or not value:
                raise ManifestError(f"{path}:{lineno}: bad source {item!r}, expected key=path")
            sources[key.strip()] = value.strip()
        videos.append({"video_id": fields[0].strip(), "class_label": fields[1].strip(), "sources": sources})

    if not declared:
        declared = _infer_channels(videos)

    serializer = ManifestSerializer(data={"name": name, "videos": videos, "channels": declared})
    if not serializer.is_valid():
        raise ManifestError(f"{path}: {format_validation_errors(serializer.errors)}")
    data = serializer.validated_data

    channels = {}
    for decl in data["channels"]:
        dim = decl.get("expected_dim")
        if dim is None and decl["source"] == "computed":
            dim = CHANNEL_DIMS[decl["name"]]
        channels[decl["name"]] = ChannelDeclaration(decl["name"], decl["source"], dim)

    records = tuple(
        VideoRecord(
            video_id=v["video_id"],
            class_label=v["class_label"],
            sources={k: (base / p) for k, p in (v.get("sources") or {}).items()},
        )
        for v in data["videos"]
    )
    return ExperimentManifest(name=data["name"], videos=records, channels=channels, path=path)


def _infer_channels(videos):
    keys = set()
    with_frames = False
    for video in videos:
        for key in video["sources"]:
            if key == "frames":
                with_frames = True
            else:
                keys.add(key)
    declared = [{"name": c, "source": "computed"} for c in COMPUTED_CHANNELS if with_frames and c not in keys]
    declared += [{"name": k, "source": "precomputed"} for k in sorted(keys)]
    return declared


def write_manifest(path, name, records, channels) -> Path:
    """
    ``records``: iterable of (video_id, class_label, {key: path}) with paths
    relative to the manifest; ``channels``: iterable of ChannelDeclaration.
    """
    path = Path(path)
    lines = [f"#dataset {name}"]
    for decl in channels:
        dim = f" {decl.expected_dim}" if decl.expected_dim else ""
        lines.append(f"#channel {decl.name} {decl.source}{dim}")
    for video_id, label, sources in records:
        items = [f"{k}={v}" for k, v in sorted(sources.items())]
        lines.append("\t".join([video_id, label, *items]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


__all__ = [
    "ChannelDeclaration",
    "ExperimentManifest",
    "VideoRecord",
    "format_validation_errors",
    "parse_manifest",
    "write_manifest",
]
