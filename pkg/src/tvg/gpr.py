"""Multi-output Gaussian process regression between endpoint frames.

The first latent frame supplies the N training inputs (one P-dimensional
point per spatial position) and the last frame supplies the N targets. All
P output channels share one RBF Gram matrix, so the fit is a single Cholesky
factorization solved against P right-hand sides. Intermediate frames are then
replaced by the posterior mean evaluated at their own feature vectors.

The prior mean is zero, so far from the training inputs the posterior mean
decays to 0 and the posterior variance returns to the kernel's signal variance.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import CholeskyError, ParameterError, ShapeError
from .tensor import check_frame, check_video

__all__ = [
    "EndpointGPR",
    "GPRSmoother",
    "RBFKernel",
    "attention_blend",
    "fit",
    "gpr_smooth",
    "median_length_scale",
    "predict_cov_diag",
    "predict_mean",
    "rbf",
]

DEFAULT_NOISE_VARIANCE = 1e-4
DEFAULT_GAMMA = 0.9

# jitter ladder, in units of the mean diagonal of K: 0, then 1e-10 .. 1e-2
_JITTER_STEPS = (0.0,) + tuple(10.0**e for e in range(-10, -1))
_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class RBFKernel:
    """Squared-exponential kernel ``sv * exp(-|a - b|^2 / (2 l^2))``."""

    length_scale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise ParameterError(f"length_scale must be positive, got {self.length_scale}")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ParameterError(f"signal_variance must be positive, got {self.signal_variance}")

    def __call__(self, a, b):
        return rbf(a, b, self)

    def gram(self, A, B=None):
        """Kernel matrix between the rows of ``A`` and ``B`` (default ``A``)."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = A if B is None else np.atleast_2d(np.asarray(B, dtype=np.float64))
        if A.shape[1] != B.shape[1]:
            raise ShapeError(f"point dimensions differ: {A.shape[1]} vs {B.shape[1]}")
        sq = cdist(A, B, "sqeuclidean")
        return self.signal_variance * np.exp(-sq / (2.0 * self.length_scale**2))


def rbf(a, b, kernel=None):
    """Evaluate the RBF kernel between two points."""
    kernel = kernel or RBFKernel()
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ShapeError(f"point dimensions differ: {a.size} vs {b.size}")
    diff = a - b
    return float(kernel.signal_variance * np.exp(-np.dot(diff, diff) / (2.0 * kernel.length_scale**2)))


def median_length_scale(X):
    """Median pairwise Euclidean distance between rows of ``X``.

    Falls back to 1.0 for a single point or when the median is zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 and np.isfinite(med) else 1.0


def _factorize(K, Y, noise_variance):
    """Cholesky-solve ``(K + noise I + jitter I) W = Y`` with adaptive jitter.

    Returns ``(factor, weights, jitter)``. A step is accepted only when the
    factorization succeeds, its smallest pivot is not lost in rounding, and
    the normwise backward error of the solve is below ``_RESIDUAL_TOL``.
    """
    n = K.shape[0]
    base = K + noise_variance * np.eye(n)
    scale = np.trace(K) / n
    pivot_floor = n * np.finfo(np.float64).eps * np.max(np.diag(base))
    for step in _JITTER_STEPS:
        jitter = step * scale
        A = base + jitter * np.eye(n)
        try:
            L = linalg.cholesky(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.min(np.diag(L)) ** 2 < pivot_floor:
            continue
        W = linalg.cho_solve((L, True), Y, check_finite=False)
        resid = np.linalg.norm(A @ W - Y)
        denom = np.linalg.norm(A) * np.linalg.norm(W) + np.linalg.norm(Y)
        if np.all(np.isfinite(W)) and (resid == 0.0 or resid <= _RESIDUAL_TOL * denom):
            return L, W, jitter
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(base))
    raise CholeskyError("Gram matrix is not positive definite", jitter=_JITTER_STEPS[-1] * scale, condition=cond)


class EndpointGPR(RegressorMixin, BaseEstimator):
    """Zero-mean multi-output GP regressor with a shared RBF kernel.

    Parameters
    ----------
    length_scale : float or "median", default="median"
        RBF length scale. ``"median"`` uses the median pairwise distance
        between training inputs (1.0 if that is zero).
    signal_variance : float, default=1.0
        Kernel amplitude; ``k(x, x)`` equals this value.
    noise_variance : float, default=1e-4
        White-noise variance added to the Gram diagonal. May be exactly 0.

    Attributes
    ----------
    kernel_ : RBFKernel
        Kernel with the resolved length scale.
    X_fit_ : ndarray of shape (n_samples, n_features)
    factor_ : ndarray of shape (n_samples, n_samples)
        Lower Cholesky factor of ``K + (noise_variance + jitter_) I``.
    weights_ : ndarray of shape (n_samples, n_targets)
        Solution of ``(K + (noise_variance + jitter_) I) W = Y``.
    jitter_ : float
        Diagonal jitter that was needed for a stable factorization.
    whitened_ : ndarray of shape (n_samples, n_targets)
        ``L^-1 Y``, used to evaluate the posterior mean.
    """

    def __init__(self, length_scale="median", signal_variance=1.0, noise_variance=DEFAULT_NOISE_VARIANCE):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance

    def _resolve_kernel(self, X):
        if isinstance(self.length_scale, str):
            if self.length_scale != "median":
                raise ParameterError(f"unknown length_scale mode {self.length_scale!r}")
            ell = median_length_scale(X)
        else:
            ell = float(self.length_scale)
        return RBFKernel(ell, float(self.signal_variance))

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        Y = check_array(y, dtype=np.float64, ensure_2d=False)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise ShapeError(f"X has {X.shape[0]} points but y has {Y.shape[0]}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ParameterError(f"noise_variance must be >= 0, got {self.noise_variance}")
        self.kernel_ = self._resolve_kernel(X)
        self.X_fit_ = X
        self.n_features_in_ = X.shape[1]
        K = self.kernel_.gram(X)
        self.factor_, self.weights_, self.jitter_ = _factorize(K, Y, float(self.noise_variance))
        self.whitened_ = linalg.solve_triangular(self.factor_, Y, lower=True, check_finite=False)
        return self

    def _check_query(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"query has {X.shape[1]} channels, model was fitted on {self.n_features_in_}")
        return X

    def predict(self, X):
        """Posterior mean ``K(X*, X) W`` at the query rows.

        Evaluated as ``(L^-1 K(X, X*))^T (L^-1 Y)``: when the Gram matrix is
        badly conditioned ``W`` can be huge and the direct product loses
        most of its digits, while the whitened factors stay moderate.
        """
        X = self._check_query(X)
        V = linalg.solve_triangular(self.factor_, self.kernel_.gram(self.X_fit_, X), lower=True, check_finite=False)
        return V.T @ self.whitened_

    def predict_cov_diag(self, X):
        """Diagonal of the posterior covariance at the query rows, clamped at 0."""
        X = self._check_query(X)
        Ks = self.kernel_.gram(self.X_fit_, X)
        V = linalg.solve_triangular(self.factor_, Ks, lower=True, check_finite=False)
        var = self.kernel_.signal_variance - np.einsum("ij,ij->j", V, V)
        return np.maximum(var, 0.0)


def fit(first, last, kernel=None, noise_variance=DEFAULT_NOISE_VARIANCE):
    """Fit the endpoint regression from frame ``first`` to frame ``last``.

    ``kernel`` may be an :class:`RBFKernel`; ``None`` selects the median
    length-scale heuristic with unit signal variance.
    """
    first = check_frame(first, "first")
    last = check_frame(last, "last")
    if first.shape != last.shape:
        raise ShapeError(f"endpoint frames differ in shape: {first.shape} vs {last.shape}")
    if kernel is None:
        model = EndpointGPR("median", 1.0, noise_variance)
    else:
        model = EndpointGPR(kernel.length_scale, kernel.signal_variance, noise_variance)
    return model.fit(first, last)


def predict_mean(model, query):
    return model.predict(check_frame(query, "query"))


def predict_cov_diag(model, query):
    return model.predict_cov_diag(check_frame(query, "query"))


def gpr_smooth(z, kernel=None, noise_variance=DEFAULT_NOISE_VARIANCE):
    """Replace every intermediate frame by its GPR posterior mean.

    Frames 0 and S-1 are copied through unchanged; with S == 2 the output is
    an exact copy of the input.
    """
    z = check_video(z, "z")
    out = z.copy()
    S, N, P = z.shape
    if S == 2:
        return out
    model = fit(z[0], z[-1], kernel, noise_variance)
    out[1:-1] = model.predict(z[1:-1].reshape(-1, P)).reshape(S - 2, N, P)
    return out


def attention_blend(z, attn=None, gamma=DEFAULT_GAMMA, kernel=None, noise_variance=DEFAULT_NOISE_VARIANCE,
                    smoothed=None):
    """Residual blend ``attn(z) + gamma * z + (1 - gamma) * GPR(z)``.

    ``attn`` is any shape-preserving map on latent videos; ``None`` is the
    zero map. ``smoothed`` substitutes a precomputed term for ``GPR(z)``,
    which is how bidirectional fusion injects its fused latent.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma}")
    z = check_video(z, "z")
    out = gamma * z
    if gamma < 1.0:
        if smoothed is None:
            smoothed = gpr_smooth(z, kernel, noise_variance)
        else:
            smoothed = check_video(smoothed, "smoothed")
            if smoothed.shape != z.shape:
                raise ShapeError(f"smoothed term has shape {smoothed.shape}, expected {z.shape}")
        out = out + (1.0 - gamma) * smoothed
    if attn is not None:
        a = np.asarray(attn(z), dtype=np.float64)
        if a.shape != z.shape:
            raise ShapeError(f"attention hook changed shape {z.shape} -> {a.shape}")
        out = a + out
    return out


class GPRSmoother(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`attention_blend` for latent videos.

    Stateless: each video is regressed on its own endpoint frames, so
    ``fit`` only validates its input. With the default ``gamma=0`` and no
    attention hook, ``transform`` is plain :func:`gpr_smooth`.
    """

    def __init__(self, length_scale="median", signal_variance=1.0, noise_variance=DEFAULT_NOISE_VARIANCE,
                 gamma=0.0, attn=None):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.gamma = gamma
        self.attn = attn

    def __sklearn_is_fitted__(self):
        return True

    def fit(self, X, y=None):
        check_video(X, "X")
        return self

    def transform(self, X):
        kernel = None
        if not isinstance(self.length_scale, str):
            kernel = RBFKernel(float(self.length_scale), float(self.signal_variance))
        elif self.length_scale != "median":
            raise ParameterError(f"unknown length_scale mode {self.length_scale!r}")
        elif self.signal_variance != 1.0:
            X0 = check_video(X, "X")[0]
            kernel = RBFKernel(median_length_scale(X0), float(self.signal_variance))
        return attention_blend(X, self.attn, self.gamma, kernel, self.noise_variance)
