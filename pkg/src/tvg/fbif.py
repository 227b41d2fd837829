"""Frequency-aware bidirectional fusion of forward and reverse latents.

For frame ``s``, with ``r`` the reverse-pass latent put back in forward
order::

    out_s = lam_s * avg(fwd_s) + (1 - lam_s) * avg(r_s)
            + lam_freq * max(fwd_s) + lam_freq * max(r_s)

Average pooling stands in for the low-frequency content and max pooling for
the high-frequency content; both pool along positions with stride 1, so the
fused latent keeps its shape. The weights are not renormalised.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError, ShapeError
from .tensor import DEFAULT_WINDOW, avgpool1d, check_video, check_window, maxpool1d

__all__ = ["FusionWeights", "fuse", "lambda_schedule"]


@dataclass(frozen=True)
class FusionWeights:
    lambda_start: float = 0.9
    lambda_end: float = 0.1
    lambda_freq: float = 0.1
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        for name in ("lambda_start", "lambda_end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        if not (np.isfinite(self.lambda_freq) and self.lambda_freq >= 0):
            raise ParameterError(f"lambda_freq must be >= 0, got {self.lambda_freq}")
        check_window(self.window)

    def mirrored(self):
        """Weights for fusing from the reverse direction's point of view.

        Fusing ``(rev, fwd)`` with the mirrored schedule yields the
        frame-reversed result of fusing ``(fwd, rev)``.
        """
        return FusionWeights(1.0 - self.lambda_end, 1.0 - self.lambda_start, self.lambda_freq, self.window)


def lambda_schedule(n_frames, weights=None):
    """Low-frequency weights, linear from ``lambda_start`` to ``lambda_end``."""
    weights = weights or FusionWeights()
    if int(n_frames) != n_frames or n_frames < 2:
        raise ParameterError(f"a schedule needs at least 2 frames, got {n_frames}")
    lam = np.linspace(weights.lambda_start, weights.lambda_end, int(n_frames))
    return lam


def fuse(z_fwd, z_rev, weights=None):
    """Fuse a forward latent with a reverse-pass latent.

    ``z_rev`` is given in its own (reversed) frame order; it is flipped back
    here before fusion.
    """
    weights = weights or FusionWeights()
    z_fwd = check_video(z_fwd, "z_fwd")
    z_rev = check_video(z_rev, "z_rev")
    if z_fwd.shape != z_rev.shape:
        raise ShapeError(f"forward and reverse latents differ in shape: {z_fwd.shape} vs {z_rev.shape}")
    r = z_rev[::-1]
    lam = lambda_schedule(z_fwd.shape[0], weights)[:, None, None]
    w = weights.window
    out = lam * avgpool1d(z_fwd, w) + (1.0 - lam) * avgpool1d(r, w)
    if weights.lambda_freq:
        out = out + weights.lambda_freq * maxpool1d(z_fwd, w) + weights.lambda_freq * maxpool1d(r, w)
    return out
