"""Training-free transition-video mechanisms in a self-contained DDIM sandbox."""

__version__ = "0.1.0"

from .conditioning import blend_images, slerp, slerp_schedule
from .diffusion import DdimSchedule, ToyDenoiser, ddim_step, forward_noise, linear_schedule, sample
from .exceptions import (
    CholeskyError,
    DegenerateInterpolationError,
    NumericalError,
    ParameterError,
    ShapeError,
    StageError,
    TensorFormatError,
    TVGError,
)
from .fbif import FusionWeights, fuse, lambda_schedule
from .gpr import EndpointGPR, GPRSmoother, RBFKernel, attention_blend, gpr_smooth, rbf
from .io import read_tensor, write_tensor
from .pipeline import PipelineConfig, RunReport, consecutive_distance_profile, run
from .selection import SelectionTrace, grad_l2_distance, l2_distance, select_frames
from .tensor import SeededRng, avgpool1d, gaussian_noise_like, maxpool1d, temporal_reverse
