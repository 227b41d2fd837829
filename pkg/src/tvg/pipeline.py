"""End-to-end transition generation in the DDIM sandbox.

Stages, in order: conditioning (endpoint blend and SLERP prompt schedule),
bidirectional sampling with the GPR blend applied to every step's clean
estimate, optional per-step fusion of the two directions, close-distance
frame selection, and output. Encoder and decoder are identity maps, so
selection works directly on latents.
"""

import json
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import conditioning, diffusion
from .exceptions import ParameterError, ShapeError, StageError
from .fbif import FusionWeights, fuse
from .gpr import RBFKernel, attention_blend, gpr_smooth, median_length_scale
from .io import read_tensor, write_tensor
from .selection import get_metric, select_frames
from .tensor import SeededRng, check_frame, check_video

__all__ = [
    "FUSION_MODES",
    "PipelineConfig",
    "RunReport",
    "consecutive_distance_profile",
    "crossfade",
    "initial_latent",
    "run",
]

FUSION_MODES = ("lockstep", "independent")


@dataclass
class PipelineConfig:
    """Every knob of a pipeline run; serialises losslessly to JSON.

    ``endpoints`` names a TVGL tensor whose first and last frames are the
    clean endpoint latents. ``embeddings`` optionally names a TVGL tensor of
    shape ``(2, L, D)`` holding the initial and final prompt embeddings.
    """

    endpoints: str = None
    embeddings: str = None
    output_dir: str = None
    frames: int = 16
    positions: int = None
    channels: int = None
    gamma: float = 0.9
    beta: float = 0.5
    slerp_w_start: float = 0.9
    slerp_w_end: float = 0.1
    per_token_slerp: bool = False
    length_scale: object = "median"
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    lambda_start: float = 0.9
    lambda_end: float = 0.1
    lambda_freq: float = 0.1
    window: int = 3
    ddim_steps: int = 10
    train_steps: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 0.02
    fusion_mode: str = "lockstep"
    metric: str = "grad_l2"
    seed: int = 0
    denoiser_noise: float = 0.0

    def __post_init__(self):
        if int(self.frames) != self.frames or self.frames < 2:
            raise ParameterError(f"frames must be an integer >= 2, got {self.frames}")
        for name in ("gamma", "beta", "slerp_w_start", "slerp_w_end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        if isinstance(self.length_scale, str):
            if self.length_scale != "median":
                raise ParameterError(f"length_scale must be 'median' or a positive number, got {self.length_scale!r}")
        elif not self.length_scale > 0:
            raise ParameterError(f"length_scale must be positive, got {self.length_scale}")
        if self.noise_variance < 0:
            raise ParameterError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.fusion_mode not in FUSION_MODES:
            raise ParameterError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if not 0 <= self.ddim_steps <= self.train_steps:
            raise ParameterError(f"ddim_steps must lie in [0, train_steps], got {self.ddim_steps}")
        if self.denoiser_noise < 0:
            raise ParameterError(f"denoiser_noise must be >= 0, got {self.denoiser_noise}")
        if not 0 <= int(self.seed) < 2**64 - 1:
            raise ParameterError(f"seed out of range: {self.seed}")
        get_metric(self.metric)
        self.fusion_weights()
        self.schedule()

    def fusion_weights(self):
        return FusionWeights(self.lambda_start, self.lambda_end, self.lambda_freq, self.window)

    def schedule(self):
        return diffusion.linear_schedule(self.train_steps, self.beta_min, self.beta_max)

    def kernel_for(self, first_frame):
        if isinstance(self.length_scale, str):
            return RBFKernel(median_length_scale(first_frame), self.signal_variance)
        return RBFKernel(float(self.length_scale), self.signal_variance)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


@dataclass
class RunReport:
    config: dict
    trace: object
    distance_profile: list
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings=False):
        out = {
            "config": self.config,
            "selection": self.trace.to_dict(),
            "distance_profile": list(self.distance_profile),
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out

    def to_json(self, include_timings=False):
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)


def consecutive_distance_profile(v, metric="l2"):
    """Distances between consecutive frames: entry ``i`` is ``d(v[i+1], v[i])``."""
    metric = get_metric(metric)
    v = check_video(v, "video")
    return [float(metric(v[i + 1], v[i])) for i in range(v.shape[0] - 1)]


def crossfade(first, last, n_frames):
    """Linear crossfade video from ``first`` to ``last`` with exact endpoints."""
    first = check_frame(first, "first")
    last = check_frame(last, "last")
    w = np.linspace(0.0, 1.0, int(n_frames))[:, None, None]
    out = (1.0 - w) * first + w * last
    out[0], out[-1] = first, last
    return out


def initial_latent(first, last, n_frames, sched, seed):
    """Latent at timestep T: seeded noise, with endpoints noised from the clean frames."""
    first = check_frame(first, "first")
    eps = SeededRng(seed).standard_normal((int(n_frames),) + first.shape)
    t_start = sched.num_steps
    z = eps.copy()
    z[0] = diffusion.forward_noise(first, t_start, eps[0], sched)
    z[-1] = diffusion.forward_noise(last, t_start, eps[-1], sched)
    return z


@contextmanager
def _stage(name, timings):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _load_inputs(config):
    if config.endpoints is None:
        raise ParameterError("config.endpoints is required when no endpoint frames are passed")
    ends = read_tensor(config.endpoints)
    if ends.shape[0] < 1:
        raise ShapeError("endpoint tensor has no frames")
    first, last = ends[0], ends[-1]
    text_a = text_b = None
    if config.embeddings is not None:
        emb = read_tensor(config.embeddings)
        if emb.shape[0] != 2:
            raise ShapeError(f"embedding tensor must hold 2 frames (initial, final), got {emb.shape[0]}")
        text_a, text_b = emb[0], emb[1]
    return first, last, text_a, text_b


class _Direction:
    """One sampling trajectory (forward or reverse) advanced step by step."""

    def __init__(self, first, last, text_a, text_b, config, sched, seed, denoiser):
        S = config.frames
        self.cond = {
            "image": conditioning.blend_images(first, last, config.beta),
            "text": None if text_a is None else conditioning.slerp_schedule(
                text_a, text_b, S, config.slerp_w_start, config.slerp_w_end, config.per_token_slerp),
        }
        self.init = initial_latent(first, last, S, sched, seed)
        self.anchors = (first, last)
        if denoiser is None:
            denoiser = diffusion.ToyDenoiser(crossfade(first, last, S), sched, config.denoiser_noise, seed)
        self.denoiser = denoiser


def _sample_independent(directions, config, sched, attn):
    def hook(x0_hat, t):
        return attention_blend(x0_hat, attn, config.gamma, config.kernel_for(x0_hat[0]), config.noise_variance)

    return [diffusion.sample(d.init, d.denoiser, sched, config.ddim_steps, d.anchors, hook, d.cond)
            for d in directions]


def _sample_lockstep(directions, config, sched, attn):
    fwd, rev = directions
    weights = config.fusion_weights()
    steps = sched.timesteps(config.ddim_steps)
    zs = [d.init.copy() for d in directions]
    if not steps:
        return zs
    anchors = [diffusion.EndpointAnchor(d.anchors, z, sched, steps[0]) for d, z in zip(directions, zs)]
    for t, t_prev in zip(steps, steps[1:] + [0]):
        eps = [diffusion.call_denoiser(d.denoiser, z, t, d.cond) for d, z in zip(directions, zs)]
        x0 = [diffusion.predict_x0(z, t, e, sched) for z, e in zip(zs, eps)]
        if config.gamma < 1.0:
            g = [gpr_smooth(x, config.kernel_for(x[0]), config.noise_variance) for x in x0]
            fused = [fuse(g[0], g[1], weights), fuse(g[1], g[0], weights.mirrored())]
        else:
            fused = [None, None]
        x0 = [attention_blend(x, attn, config.gamma, smoothed=f) for x, f in zip(x0, fused)]
        zs = [diffusion.ddim_update(x, e, t_prev, sched) for x, e in zip(x0, eps)]
        for z, anchor in zip(zs, anchors):
            anchor.pin(z, t_prev)
            diffusion.check_step(z, t)
    return zs


def run(config, first=None, last=None, text_a=None, text_b=None, denoisers=None, attn=None):
    """Generate a transition video.

    Endpoint frames and prompt embeddings are read from the paths in
    ``config`` unless passed directly. ``denoisers`` is an optional
    ``(forward, reverse)`` pair of ``(z_t, t, cond) -> eps_hat`` callables;
    by default each direction uses a :class:`~tvg.diffusion.ToyDenoiser`
    aimed at the linear crossfade between its own endpoints. ``attn`` is the
    attention hook of the GPR blend (zero map when ``None``).

    Returns ``(video, report)``; when ``config.output_dir`` is set the video,
    report, selection trace and timings are also written there.
    """
    timings = {}
    with _stage("load", timings):
        if first is None or last is None:
            first, last, text_a, text_b = _load_inputs(config)
        first = check_frame(first, "first")
        last = check_frame(last, "last")
        if first.shape != last.shape:
            raise ShapeError(f"endpoint frames differ in shape: {first.shape} vs {last.shape}")
        if config.positions is not None and config.positions != first.shape[0]:
            raise ShapeError(f"config expects {config.positions} positions, endpoints have {first.shape[0]}")
        if config.channels is not None and config.channels != first.shape[1]:
            raise ShapeError(f"config expects {config.channels} channels, endpoints have {first.shape[1]}")
        if (text_a is None) != (text_b is None):
            raise ParameterError("pass both prompt embeddings or neither")
        sched = config.schedule()
    fwd_den, rev_den = denoisers if denoisers is not None else (None, None)
    with _stage("conditioning", timings):
        directions = [
            _Direction(first, last, text_a, text_b, config, sched, config.seed, fwd_den),
            # reverse pass: swapped endpoints and prompts, next seed
            _Direction(last, first, text_b, text_a, config, sched, config.seed + 1, rev_den),
        ]
    with _stage("sampling", timings):
        if config.fusion_mode == "lockstep":
            z_fwd, z_rev = _sample_lockstep(directions, config, sched, attn)
        else:
            z_fwd, z_rev = _sample_independent(directions, config, sched, attn)
    with _stage("selection", timings):
        video, trace = select_frames(z_fwd, z_rev, config.metric)
        profile = consecutive_distance_profile(video, config.metric)
    report = RunReport(config.to_dict(), trace, profile, timings)
    if config.output_dir is not None:
        with _stage("output", timings):
            write_outputs(config.output_dir, video, report)
    return video, report


def write_outputs(out_dir, video, report):
    os.makedirs(out_dir, exist_ok=True)
    write_tensor(video, os.path.join(out_dir, "output.tvgl"))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json() + "\n")
    with open(os.path.join(out_dir, "trace.txt"), "w") as fh:
        fh.write(report.trace.to_text())
    with open(os.path.join(out_dir, "timings.json"), "w") as fh:
        json.dump(report.timings, fh, indent=2, sort_keys=True)
