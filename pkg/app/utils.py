"""
Utility functions for the pooled time series application
"""
import hashlib
import logging
from pathlib import Path

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

FRAME_EXTENSIONS = (".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def load_frame(image_file):
    """
    Open one still image and return it as a grayscale float matrix in [0, 1].

    Args:
        image_file: path or file object of a PGM (or any Pillow-readable) image

    Returns:
        np.ndarray: H x W float64 array
    """
    img = Image.open(image_file)

    # Palette / alpha images are flattened onto white first
    if img.mode in ('RGBA', 'LA', 'P'):
        if img.mode == 'P':
            img = img.convert('RGBA')
        background = Image.new('RGB', img.size, (255, 255, 255))
        background.paste(img, mask=img.split()[-1])
        img = background

    if img.mode == 'RGB':
        rgb = np.asarray(img, dtype=np.float64) / 255.0
        return rgb @ LUMA_WEIGHTS

    if img.mode in ('I;16', 'I;16B', 'I;16L', 'I'):
        data = np.asarray(img, dtype=np.float64)
        peak = 65535.0 if data.max(initial=0) > 255 else 255.0
        return np.clip(data / peak, 0.0, 1.0)

    if img.mode != 'L':
        img = img.convert('L')
    return np.asarray(img, dtype=np.float64) / 255.0


def frame_paths(directory):
    """Image files of a frame directory, lexicographically ordered."""
    directory = Path(directory)
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_EXTENSIONS
    )


def load_frames(directory):
    """Stack every frame of a directory into an (m, H, W) array."""
    paths = frame_paths(directory)
    if not paths:
        raise FileNotFoundError(f"no image frames in {directory}")
    frames = [load_frame(p) for p in paths]
    shape = frames[0].shape
    for path, frame in zip(paths, frames):
        if frame.shape != shape:
            raise ValueError(f"{path.name}: frame size {frame.shape} differs from {shape}")
    logger.debug("loaded %d frames of %dx%d from %s", len(frames), shape[1], shape[0], directory)
    return np.stack(frames)


def save_frame(frame, path):
    """Write a [0, 1] grayscale matrix as an 8-bit image (PGM for .pgm paths)."""
    data = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)


def derive_seed(seed, purpose):
    """Stable 32-bit seed for one purpose ("split/3", "bow/hof/r02", ...)."""
    digest = hashlib.sha256(f"{int(seed)}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def combined_digest(paths):
    """One digest over many input files, independent of the order given."""
    h = hashlib.sha256()
    for path in sorted(str(p) for p in paths):
        h.update(file_digest(path).encode("ascii"))
    return h.hexdigest()
