"""Interpolation-based conditioning: endpoint blending and SLERP prompt schedules."""

import numpy as np

from .exceptions import DegenerateInterpolationError, ParameterError, ShapeError

__all__ = ["blend_images", "slerp", "slerp_schedule", "schedule_weights"]

DEFAULT_BETA = 0.5
DEFAULT_W_START = 0.9
DEFAULT_W_END = 0.1

_PARALLEL_TOL = 1e-7


def _unit_interval(value, name):
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")


def _as_finite(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be non-empty and finite")
    return arr


def blend_images(x0, xS, beta=DEFAULT_BETA):
    """Convex combination ``beta * x0 + (1 - beta) * xS`` of two endpoints."""
    _unit_interval(beta, "beta")
    x0 = _as_finite(x0, "x0")
    xS = _as_finite(xS, "xS")
    if x0.shape != xS.shape:
        raise ShapeError(f"endpoint shapes differ: {x0.shape} vs {xS.shape}")
    if beta == 1.0:
        return x0.copy()
    if beta == 0.0:
        return xS.copy()
    return beta * x0 + (1.0 - beta) * xS


def _slerp_flat(a, b, alpha):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 and nb == 0.0:
        raise DegenerateInterpolationError("cannot interpolate between two zero embeddings")
    if na == 0.0 or nb == 0.0:
        return (1.0 - alpha) * a + alpha * b
    ua, ub = a / na, b / nb
    # equals arccos(ua . ub) but keeps full precision near 0 and pi
    theta = 2.0 * np.arctan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub))
    if np.pi - theta < _PARALLEL_TOL:
        raise DegenerateInterpolationError("embeddings are antiparallel; the great circle is not unique")
    sin_theta = np.sin(theta)
    if sin_theta < _PARALLEL_TOL:
        return (1.0 - alpha) * a + alpha * b
    return (np.sin((1.0 - alpha) * theta) / sin_theta) * a + (np.sin(alpha * theta) / sin_theta) * b


def slerp(a, b, alpha, per_token=False):
    """Spherical linear interpolation between two embeddings.

    The embeddings are flattened and share one angle unless ``per_token`` is
    set, in which case each row (token) is interpolated on its own. Nearly
    parallel inputs fall back to linear interpolation; antiparallel or
    all-zero inputs raise :class:`DegenerateInterpolationError`.
    ``alpha = 0`` returns ``a`` and ``alpha = 1`` returns ``b`` exactly.
    """
    _unit_interval(alpha, "alpha")
    a = _as_finite(a, "a")
    b = _as_finite(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    if alpha == 0.0:
        return a.copy()
    if alpha == 1.0:
        return b.copy()
    if per_token and a.ndim >= 2:
        rows_a = a.reshape(a.shape[0], -1)
        rows_b = b.reshape(b.shape[0], -1)
        out = np.stack([_slerp_flat(ra, rb, alpha) for ra, rb in zip(rows_a, rows_b)])
        return out.reshape(a.shape)
    return _slerp_flat(a.ravel(), b.ravel(), alpha).reshape(a.shape)


def schedule_weights(n_frames, w_start=DEFAULT_W_START, w_end=DEFAULT_W_END):
    """Per-frame SLERP parameters.

    The weight on the first embedding runs linearly from ``w_start`` at
    frame 0 to ``w_end`` at the last frame; the returned alphas are one minus
    that weight.
    """
    if int(n_frames) != n_frames or n_frames < 2:
        raise ParameterError(f"a schedule needs at least 2 frames, got {n_frames}")
    _unit_interval(w_start, "w_start")
    _unit_interval(w_end, "w_end")
    s = np.arange(int(n_frames), dtype=np.float64)
    a_side = w_start + s * (w_end - w_start) / (n_frames - 1)
    a_side[-1] = w_end
    return 1.0 - a_side


def slerp_schedule(a, b, n_frames, w_start=DEFAULT_W_START, w_end=DEFAULT_W_END, per_token=False):
    """Stack of ``n_frames`` interpolated embeddings, shape ``(S, L, D)``."""
    alphas = schedule_weights(n_frames, w_start, w_end)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"embeddings must have shape (tokens, dim), got {a.shape}")
    return np.stack([slerp(a, b, float(alpha), per_token) for alpha in alphas])
