# app/storage.py
"""
POT-DESC containers for descriptors, representations and models.

Text:
    POT-DESC v1 m=<int> n=<int> channel=<name>
    # key=value            (optional metadata lines)
    <m lines of n space separated reals>

Binary:
    16-byte magic "POTDESCB" (NUL padded), little-endian uint32 m, n,
    then m*n little-endian float32 values, row-major.
"""
from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DescriptorFormatError

logger = logging.getLogger(__name__)

TEXT_MAGIC = "POT-DESC v1"
BINARY_MAGIC = b"POTDESCB".ljust(16, b"\0")
HEADER_RE = re.compile(r"^POT-DESC v1 m=(\d+) n=(\d+) channel=(\S+)\s*$")
DESCRIPTOR_SUFFIX = ".potdesc"


@dataclass
class DescriptorFile:
    values: np.ndarray
    channel: str
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape


# ------------------------------------------------------------
# READING
# ------------------------------------------------------------
def read_matrix(path, channel=None) -> DescriptorFile:
    """Read either container variant; the magic bytes decide which."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(16)
    if head == BINARY_MAGIC:
        return _read_binary(path, channel)
    return _read_text(path)


def _read_binary(path: Path, channel=None) -> DescriptorFile:
    raw = path.read_bytes()
    if len(raw) < 24:
        raise DescriptorFormatError(path, "truncated binary header")
    m, n = np.frombuffer(raw, dtype="<u4", count=2, offset=16)
    m, n = int(m), int(n)
    if m == 0:
        raise DescriptorFormatError(path, "no frames")
    expected = 24 + 4 * m * n
    if len(raw) != expected:
        raise DescriptorFormatError(path, f"expected {expected} bytes for m={m} n={n}, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", count=m * n, offset=24).astype(np.float64).reshape(m, n)
    return DescriptorFile(values=values, channel=channel or path.parent.name)


def _read_text(path: Path) -> DescriptorFile:
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise DescriptorFormatError(path, f"not a POT-DESC text file ({exc.reason})") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DescriptorFormatError(path, "no frames", line=1)

    match = HEADER_RE.match(lines[0])
    if not match:
        raise DescriptorFormatError(path, f"bad header {lines[0][:60]!r}", line=1)
    m, n, channel = int(match.group(1)), int(match.group(2)), match.group(3)
    if m == 0:
        raise DescriptorFormatError(path, "no frames", line=1)

    metadata = {}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].strip().partition("=")
            if sep:
                metadata[key.strip()] = value.strip()
            continue
        tokens = stripped.split()
        if len(tokens) != n:
            raise DescriptorFormatError(
                path, f"row {len(rows) + 1} has {len(tokens)} values, expected {n}", line=lineno
            )
        row = []
        for column, token in enumerate(tokens, start=1):
            try:
                value = float(token)
            except ValueError:
                raise DescriptorFormatError(path, f"cannot parse {token!r}", line=lineno, column=column)
            if not np.isfinite(value):
                raise DescriptorFormatError(path, f"non-finite value {token!r}", line=lineno, column=column)
            row.append(value)
        rows.append(row)

    if not rows:
        raise DescriptorFormatError(path, "no frames")
    if len(rows) != m:
        raise DescriptorFormatError(path, f"header declares m={m} but {len(rows)} rows were found")
    return DescriptorFile(values=np.array(rows, dtype=np.float64), channel=channel, metadata=metadata)


# ------------------------------------------------------------
# WRITING
# ------------------------------------------------------------
def write_matrix(path, values, channel, metadata=None, binary=False, clobber=True) -> Path:
    """
    Write a matrix; returns the path. Output is a pure function of the
    arguments so re-running a command overwrites files identically.
    """
    path = Path(path)
    if not clobber and path.exists():
        logger.info("keeping existing %s", path)
        return path
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    m, n = values.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")

    if binary:
        with open(tmp, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(np.array([m, n], dtype="<u4").tobytes())
            fh.write(values.astype("<f4").tobytes())
    else:
        with open(tmp, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"{TEXT_MAGIC} m={m} n={n} channel={channel}\n")
            for key, value in sorted((metadata or {}).items()):
                fh.write(f"# {key}={value}\n")
            for row in values:
                fh.write(" ".join(format(float(v), ".10g") for v in row))
                fh.write("\n")
    os.replace(tmp, path)
    return path


# ------------------------------------------------------------
# LAYOUT
# ------------------------------------------------------------
def descriptor_path(root, channel, video_id, binary=False) -> Path:
    return Path(root) / channel / f"{video_id}{DESCRIPTOR_SUFFIX}{'b' if binary else ''}"


def find_descriptor(root, channel, video_id) -> Path | None:
    for binary in (False, True):
        path = descriptor_path(root, channel, video_id, binary)
        if path.exists():
            return path
    return None


def representation_dir(root, method, channel, reseed=0) -> Path:
    return Path(root) / method / channel / f"r{reseed:02d}"


def representation_path(root, method, channel, video_id, reseed=0) -> Path:
    return representation_dir(root, method, channel, reseed) / f"{video_id}{DESCRIPTOR_SUFFIX}"


def quantizer_path(root, method, channel, reseed=0) -> Path:
    return representation_dir(root, method, channel, reseed) / f"_quantizer{DESCRIPTOR_SUFFIX}"


def available_reseeds(root, method, channels) -> list[int]:
    """Re-clustering indices present for every channel."""
    found = None
    for channel in channels:
        base = Path(root) / method / channel
        indices = set()
        if base.is_dir():
            for child in base.iterdir():
                if child.is_dir() and re.fullmatch(r"r\d{2}", child.name):
                    indices.add(int(child.name[1:]))
        found = indices if found is None else found & indices
    return sorted(found or ())


# ------------------------------------------------------------
# SPLIT PLANS / REPORTS
# ------------------------------------------------------------
def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_report(path, text) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
