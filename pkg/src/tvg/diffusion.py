"""Deterministic DDIM machinery and an oracle denoiser.

Timesteps are 1-based: ``alpha_bar(t)`` for ``1 <= t <= T`` is the running
product of ``1 - beta``, and ``alpha_bar(0)`` is defined as 1 so the final
sampling step lands on the clean latent.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, ParameterError, ShapeError
from .tensor import SeededRng, check_video

__all__ = [
    "DdimSchedule",
    "EndpointAnchor",
    "ToyDenoiser",
    "ddim_step",
    "ddim_update",
    "forward_noise",
    "linear_schedule",
    "predict_x0",
    "sample",
]

DEFAULT_TRAIN_STEPS = 1000
DEFAULT_BETA_MIN = 1e-4
DEFAULT_BETA_MAX = 0.02
DEFAULT_SAMPLING_STEPS = 10


@dataclass(frozen=True, eq=False)
class DdimSchedule:
    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ParameterError("betas must be a non-empty 1-d array")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ParameterError("every beta must lie strictly between 0 and 1")
        betas.setflags(write=False)
        alpha_bars = np.cumprod(1.0 - betas)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def num_steps(self):
        return self.betas.size

    @property
    def alphas(self):
        return 1.0 - self.betas

    def alpha_bar(self, t):
        t = int(t)
        if not 0 <= t <= self.num_steps:
            raise ParameterError(f"timestep {t} outside [0, {self.num_steps}]")
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def timesteps(self, k):
        """``k`` evenly spaced timesteps in decreasing order, starting at T."""
        k = int(k)
        if not 0 <= k <= self.num_steps:
            raise ParameterError(f"cannot pick {k} sampling steps from {self.num_steps}")
        if k == 0:
            return []
        grid = np.round(np.linspace(0, self.num_steps, k + 1)).astype(int)
        return [int(t) for t in grid[:0:-1]]


def linear_schedule(num_steps=DEFAULT_TRAIN_STEPS, beta_min=DEFAULT_BETA_MIN, beta_max=DEFAULT_BETA_MAX):
    """Betas linearly spaced from ``beta_min`` to ``beta_max``."""
    if int(num_steps) != num_steps or num_steps < 1:
        raise ParameterError(f"num_steps must be a positive integer, got {num_steps}")
    if not 0 < beta_min <= beta_max < 1:
        raise ParameterError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    return DdimSchedule(np.linspace(beta_min, beta_max, int(num_steps)))


def _check_pair(a, b, names):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} and {names[1]} differ in shape: {a.shape} vs {b.shape}")


def forward_noise(x0, t, eps, sched):
    """Sample of ``q(x_t | x_0)`` for the given noise: ``sqrt(ab) x0 + sqrt(1 - ab) eps``."""
    if not 1 <= int(t) <= sched.num_steps:
        raise ParameterError(f"timestep {t} outside [1, {sched.num_steps}]")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_pair(x0, eps, ("x0", "eps"))
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def predict_x0(z_t, t, eps_hat, sched):
    """Clean-latent estimate implied by a noise prediction at timestep ``t``."""
    ab = sched.alpha_bar(t)
    return (z_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def ddim_update(x0_hat, eps_hat, t_prev, sched):
    """Re-noise a clean estimate to ``t_prev`` along the predicted noise (eta = 0)."""
    ab = sched.alpha_bar(t_prev)
    if ab == 1.0:
        return np.array(x0_hat, dtype=np.float64, copy=True)
    return np.sqrt(ab) * x0_hat + np.sqrt(1.0 - ab) * eps_hat


def ddim_step(z_t, t, t_prev, eps_hat, sched):
    """One deterministic DDIM step from ``t`` to ``t_prev < t``."""
    if not 0 <= t_prev < t:
        raise ParameterError(f"need 0 <= t_prev < t, got t={t}, t_prev={t_prev}")
    z_t = np.asarray(z_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_pair(z_t, eps_hat, ("z_t", "eps_hat"))
    return ddim_update(predict_x0(z_t, t, eps_hat, sched), eps_hat, t_prev, sched)


class ToyDenoiser:
    """Oracle noise predictor that steers every trajectory to ``target``.

    Predicts ``(z_t - sqrt(ab_t) target) / sqrt(1 - ab_t)``, the exact noise
    that explains ``z_t`` as a noised copy of ``target``, so deterministic
    DDIM recovers ``target``. ``noise_scale > 0`` adds a perturbation drawn
    from a stream keyed on ``(seed, t)``; the prediction stays a pure
    function of its inputs.
    """

    def __init__(self, target, sched, noise_scale=0.0, seed=0):
        self.target = check_video(target, "target")
        self.sched = sched
        self.noise_scale = float(noise_scale)
        self.seed = int(seed)

    def __call__(self, z_t, t, cond=None):
        ab = self.sched.alpha_bar(t)
        eps = (np.asarray(z_t, dtype=np.float64) - np.sqrt(ab) * self.target) / np.sqrt(1.0 - ab)
        if self.noise_scale:
            rng = SeededRng((self.seed * 1_000_003 + int(t)) % 2**64)
            eps = eps + self.noise_scale * rng.standard_normal(eps.shape)
        return eps


class EndpointAnchor:
    """Keeps the first and last frames on their noised ground truth.

    The endpoint noise is recovered once from the initial latent at timestep
    ``t_start`` and reused at every later timestep, so at ``t = 0`` both
    endpoints are the clean frames exactly.
    """

    def __init__(self, anchors, init, sched, t_start):
        first, last = (np.asarray(a, dtype=np.float64) for a in anchors)
        if first.shape != init.shape[1:] or last.shape != init.shape[1:]:
            raise ShapeError(f"anchor frames must have shape {init.shape[1:]}")
        self.first, self.last, self.sched = first, last, sched
        ab = sched.alpha_bar(t_start)
        self.noise = ((init[0] - np.sqrt(ab) * first) / np.sqrt(1.0 - ab),
                      (init[-1] - np.sqrt(ab) * last) / np.sqrt(1.0 - ab))

    def pin(self, z, t):
        ab = self.sched.alpha_bar(t)
        if ab == 1.0:
            z[0], z[-1] = self.first, self.last
        else:
            z[0] = np.sqrt(ab) * self.first + np.sqrt(1.0 - ab) * self.noise[0]
            z[-1] = np.sqrt(ab) * self.last + np.sqrt(1.0 - ab) * self.noise[1]
        return z


def call_denoiser(denoiser, z, t, cond):
    eps_hat = np.asarray(denoiser(z, t, cond), dtype=np.float64)
    if eps_hat.shape != z.shape:
        raise ShapeError(f"denoiser returned shape {eps_hat.shape}, expected {z.shape}")
    return eps_hat


def check_step(z, t):
    if not np.all(np.isfinite(z)):
        raise NumericalError(f"non-finite latent after step t={t}")


def sample(init, denoiser, sched, k=DEFAULT_SAMPLING_STEPS, anchors=None, latent_hook=None, cond=None):
    """Run ``k`` DDIM steps from ``init`` (taken to be at timestep T).

    Parameters
    ----------
    init : ndarray (S, N, P)
        Latent at the largest timestep.
    denoiser : callable ``(z_t, t, cond) -> eps_hat``
    anchors : (first, last) or None
        Clean endpoint frames, re-pinned after every step (see
        :class:`EndpointAnchor`).
    latent_hook : callable ``(x0_hat, t) -> x0_hat`` or None
        Applied once per step to the clean-latent estimate.

    ``k = 0`` returns a copy of ``init``.
    """
    z = check_video(init, "init").copy()
    steps = sched.timesteps(k)
    if not steps:
        return z
    anchor = EndpointAnchor(anchors, z, sched, steps[0]) if anchors is not None else None
    for t, t_prev in zip(steps, steps[1:] + [0]):
        eps_hat = call_denoiser(denoiser, z, t, cond)
        x0_hat = predict_x0(z, t, eps_hat, sched)
        if latent_hook is not None:
            x0_hat = latent_hook(x0_hat, t)
        z = ddim_update(x0_hat, eps_hat, t_prev, sched)
        if anchor is not None:
            anchor.pin(z, t_prev)
        check_step(z, t)
    return z
