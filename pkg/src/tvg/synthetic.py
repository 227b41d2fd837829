"""Seeded stand-ins for encoded endpoint latents."""

import math

import numpy as np

from .exceptions import ParameterError
from .pipeline import crossfade
from .tensor import SeededRng

PATTERNS = ("ramp", "blobs", "noise")


def _bump(n_positions, center, width):
    side = math.isqrt(n_positions)
    if side * side == n_positions:
        h = w = side
    else:
        h, w = 1, n_positions
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    cy, cx = center[0] * (h - 1), center[1] * (w - 1)
    sq = (rows - cy) ** 2 + (cols - cx) ** 2
    return np.exp(-sq / (2.0 * width**2)).ravel()


def generate(pattern, frames, positions, channels, seed=0):
    """Synthetic latent video of shape ``(frames, positions, channels)``.

    ``ramp`` crossfades between two random normal endpoint frames. ``blobs``
    crossfades between a Gaussian bump near one corner of the (square, if
    possible) position grid and a bump near the opposite corner, with
    seeded per-channel amplitudes. ``noise`` is i.i.d. standard normal.
    """
    if frames < 2 or positions < 1 or channels < 1:
        raise ParameterError(f"invalid dimensions ({frames}, {positions}, {channels})")
    rng = SeededRng(seed)
    if pattern == "noise":
        return rng.standard_normal((frames, positions, channels))
    if pattern == "ramp":
        first = rng.standard_normal((positions, channels))
        last = rng.standard_normal((positions, channels))
        return crossfade(first, last, frames)
    if pattern == "blobs":
        jitter = 0.1 * (rng.uniform(4) - 0.5)
        amps = 0.5 + rng.uniform(2 * channels).reshape(2, channels)
        side = math.isqrt(positions)
        width = max(1.0, (side if side * side == positions else positions) / 6.0)
        a = _bump(positions, (0.25 + jitter[0], 0.25 + jitter[1]), width)
        b = _bump(positions, (0.75 + jitter[2], 0.75 + jitter[3]), width)
        return crossfade(a[:, None] * amps[0], b[:, None] * amps[1], frames)
    raise ParameterError(f"unknown pattern {pattern!r}; choose from {PATTERNS}")
