"""Close-distance frame selection between a forward and a reversed video."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError, ShapeError
from .tensor import check_frame, check_video

__all__ = [
    "FORWARD",
    "REVERSE",
    "METRICS",
    "SelectionTrace",
    "get_metric",
    "grad_l2_distance",
    "l2_distance",
    "select_frames",
]

FORWARD = "FORWARD"
REVERSE = "REVERSE"


def _pair(a, b):
    a = check_frame(a, "a")
    b = check_frame(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"frames differ in shape: {a.shape} vs {b.shape}")
    return a, b


def l2_distance(a, b):
    """Euclidean norm of the elementwise difference."""
    a, b = _pair(a, b)
    return float(np.linalg.norm(a - b))


def grad_l2_distance(a, b):
    """L2 distance plus the L2 distance of forward differences along positions.

    The difference term makes the metric sensitive to local structure, not
    just to overall intensity.
    """
    a, b = _pair(a, b)
    value = float(np.linalg.norm(a - b))
    if a.shape[0] > 1:
        value += float(np.linalg.norm(np.diff(a, axis=0) - np.diff(b, axis=0)))
    return value


METRICS = {"l2": l2_distance, "grad_l2": grad_l2_distance}


def get_metric(name_or_callable):
    if callable(name_or_callable):
        return name_or_callable
    key = str(name_or_callable).replace("-", "_")
    try:
        return METRICS[key]
    except KeyError:
        raise ParameterError(f"unknown frame distance {name_or_callable!r}; choose from {sorted(METRICS)}") from None


@dataclass
class SelectionTrace:
    """Which source each output frame came from, and the distances compared.

    ``forward_distances[i]`` and ``reverse_distances[i]`` are measured
    against output frame ``i - 1``; both are NaN for frame 0.
    """

    sources: list = field(default_factory=list)
    forward_distances: list = field(default_factory=list)
    reverse_distances: list = field(default_factory=list)

    def __len__(self):
        return len(self.sources)

    def to_text(self):
        lines = []
        for i, (tag, df, dr) in enumerate(zip(self.sources, self.forward_distances, self.reverse_distances)):
            lines.append(f"{i}\t{tag}\t{_fmt(df)}\t{_fmt(dr)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        trace = cls()
        for line in text.strip().splitlines():
            _, tag, df, dr = line.split("\t")
            trace.sources.append(tag)
            trace.forward_distances.append(float(df))
            trace.reverse_distances.append(float(dr))
        return trace

    def to_dict(self):
        return {
            "sources": list(self.sources),
            "forward_distances": [None if np.isnan(d) else d for d in self.forward_distances],
            "reverse_distances": [None if np.isnan(d) else d for d in self.reverse_distances],
        }


def _fmt(value):
    return "nan" if np.isnan(value) else repr(float(value))


def select_frames(fwd, rev, metric=grad_l2_distance):
    """Greedily merge a forward video and a reverse-order video.

    ``rev`` is flipped back to forward order first. Output frame 0 is the
    forward frame 0; each later frame is whichever candidate is closer to the
    previously *selected* frame, with ties going to the forward video.

    Returns ``(video, trace)``.
    """
    metric = get_metric(metric)
    fwd = check_video(fwd, "fwd")
    rev = check_video(rev, "rev")
    if fwd.shape != rev.shape:
        raise ShapeError(f"forward and reverse videos differ in shape: {fwd.shape} vs {rev.shape}")
    r = rev[::-1]
    out = np.empty_like(fwd)
    out[0] = fwd[0]
    trace = SelectionTrace([FORWARD], [float("nan")], [float("nan")])
    for i in range(1, fwd.shape[0]):
        d_fwd = float(metric(fwd[i], out[i - 1]))
        d_rev = float(metric(r[i], out[i - 1]))
        if d_fwd <= d_rev:
            out[i] = fwd[i]
            trace.sources.append(FORWARD)
        else:
            out[i] = r[i]
            trace.sources.append(REVERSE)
        trace.forward_distances.append(d_fwd)
        trace.reverse_distances.append(d_rev)
    return out, trace
