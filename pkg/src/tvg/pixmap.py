"""Binary PGM (P5) / PPM (P6) export of latent frames for visual inspection."""

import math
import os

import numpy as np

from .exceptions import ParameterError, ShapeError
from .tensor import check_video

__all__ = ["export_frames", "frame_shape", "normalize_frames", "write_pnm"]

NORMALIZE_MODES = ("global", "per-frame")
ZERO_RANGE_VALUE = 128


def write_pnm(path, image):
    """Write an 8-bit image: ``(H, W)`` as P5, ``(H, W, 3)`` as P6."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"pixmap data must be uint8, got {image.dtype}")
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ShapeError(f"cannot write image of shape {image.shape}")
    height, width = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (width, height))
        fh.write(np.ascontiguousarray(image).tobytes())


def _to_uint8(values, lo, hi):
    if hi - lo <= 0:
        return np.full(values.shape, ZERO_RANGE_VALUE, dtype=np.uint8)
    scaled = np.rint((values - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def normalize_frames(video, mode="global"):
    """Min-max map a video to uint8; a zero value range maps to mid-gray 128."""
    video = check_video(video, "video", min_frames=1)
    if mode == "global":
        return _to_uint8(video, video.min(), video.max())
    if mode == "per-frame":
        return np.stack([_to_uint8(f, f.min(), f.max()) for f in video])
    raise ParameterError(f"normalize must be one of {NORMALIZE_MODES}, got {mode!r}")


def frame_shape(n_positions, height=None):
    """``(height, width)`` for ``n_positions`` flattened row-major sites.

    Without an explicit height, ``n_positions`` must be a perfect square.
    """
    if height is None:
        side = math.isqrt(n_positions)
        if side * side != n_positions:
            raise ShapeError(f"{n_positions} positions is not a square; pass an explicit height")
        return side, side
    if height < 1 or n_positions % height:
        raise ShapeError(f"{n_positions} positions do not factor with height {height}")
    return height, n_positions // height


def export_frames(video, out_dir, normalize="global", height=None):
    """Write one pixmap per frame; returns the list of paths written."""
    video = check_video(video, "video", min_frames=1)
    S, N, P = video.shape
    if P not in (1, 3):
        raise ShapeError(f"pixmap export needs 1 or 3 channels, got {P}")
    h, w = frame_shape(N, height)
    pixels = normalize_frames(video, normalize)
    ext = "pgm" if P == 1 else "ppm"
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for s in range(S):
        img = pixels[s].reshape(h, w) if P == 1 else pixels[s].reshape(h, w, 3)
        path = os.path.join(out_dir, f"frame_{s:04d}.{ext}")
        write_pnm(path, img)
        paths.append(path)
    return paths
