"""Latent tensors, validation helpers, pooling and the seeded noise source.

A latent video is a float64 array of shape ``(S, N, P)``: frames, flattened
spatial positions (row-major over height then width) and channels. A frame is
one ``(N, P)`` slice. Plain numpy arrays are used throughout; the helpers here
only validate and coerce.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ParameterError, ShapeError

__all__ = [
    "SeededRng",
    "avgpool1d",
    "check_frame",
    "check_video",
    "gaussian_noise_like",
    "maxpool1d",
    "temporal_reverse",
]

DEFAULT_WINDOW = 3


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")


def check_video(z, name="video", min_frames=2):
    """Validate a latent video and return it as a C-contiguous float64 array.

    Raises ``ShapeError`` for a wrong rank, empty axes or fewer than
    ``min_frames`` frames, and ``ValueError`` for non-finite entries.
    """
    arr = np.ascontiguousarray(z, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must have shape (frames, positions, channels), got {arr.shape}")
    if arr.shape[0] < min_frames:
        raise ShapeError(f"{name} needs at least {min_frames} frames, got {arr.shape[0]}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ShapeError(f"{name} has an empty positions or channels axis: {arr.shape}")
    _check_finite(arr, name)
    return arr


def check_frame(f, name="frame"):
    """Validate a single ``(positions, channels)`` frame."""
    arr = np.ascontiguousarray(f, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have shape (positions, channels), got {arr.shape}")
    _check_finite(arr, name)
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} and {names[1]} differ in shape: {a.shape} vs {b.shape}")


def check_window(window):
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ParameterError(f"pooling window must be a positive odd integer, got {window!r}")
    return int(window)


def temporal_reverse(z):
    """Reverse the frame order of a latent video (frame i <- frame S-1-i)."""
    return check_video(z)[::-1].copy()


def _pool(f, window, reducer):
    window = check_window(window)
    f = np.asarray(f, dtype=np.float64)
    if window == 1:
        return f.copy()
    half = window // 2
    # replicate padding along positions; pooling works on (..., N, P)
    pad = [(0, 0)] * (f.ndim - 2) + [(half, half), (0, 0)]
    padded = np.pad(f, pad, mode="edge")
    windows = sliding_window_view(padded, window, axis=-2)
    return reducer(windows, axis=-1)


def avgpool1d(f, window=DEFAULT_WINDOW):
    """Per-channel sliding mean along the position axis.

    Stride 1 with replicate padding, so the output has the input's shape.
    Accepts a single ``(N, P)`` frame or a stack of frames ``(S, N, P)``;
    pooling never crosses frames.
    """
    return _pool(f, window, np.mean)


def maxpool1d(f, window=DEFAULT_WINDOW):
    """Sliding maximum along the position axis; see :func:`avgpool1d`."""
    return _pool(f, window, np.max)


class SeededRng:
    """Reproducible standard-normal source.

    Raw 64-bit words come from numpy's PCG64 bit generator (seeded through
    ``SeedSequence``), are mapped to doubles in [0, 1) with the top 53 bits,
    and converted to normals with the Box-Muller transform. Only the raw
    word stream is taken from numpy, so the output does not depend on
    numpy's own normal sampler.
    """

    algorithm = "pcg64-boxmuller-v1"

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._bitgen = np.random.PCG64(seed)

    def uniform(self, size):
        raw = self._bitgen.random_raw(size)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def standard_normal(self, shape):
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape),)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        out = np.column_stack((radius * np.cos(angle), radius * np.sin(angle))).ravel()
        return out[:n].reshape(shape)


def gaussian_noise_like(z, rng):
    """I.i.d. standard normals with the shape of ``z``."""
    if not isinstance(rng, SeededRng):
        rng = SeededRng(rng)
    return rng.standard_normal(np.shape(z))
