"""Two-sample metrics: RBF-kernel MMD^2 and the Gaussian Frechet distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

EIG_FLOOR = 1e-12
MEDIAN_MAX_POINTS = 2000


def _points(X, min_n, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < min_n:
        raise InvalidInput(f"{name} needs at least {min_n} points, got shape {X.shape}")
    return X


def _sqdist(A, B):
    d = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def median_heuristic(X, Y) -> float:
    """Median pairwise Euclidean distance over ``X`` and ``Y`` pooled.

    At most ``MEDIAN_MAX_POINTS`` points are used (the leading ones from each
    sample, in proportion), which keeps the cost bounded and deterministic.
    """
    Z = np.concatenate([X, Y])
    if Z.shape[0] > MEDIAN_MAX_POINTS:
        kx = MEDIAN_MAX_POINTS * X.shape[0] // Z.shape[0]
        Z = np.concatenate([X[:kx], Y[: MEDIAN_MAX_POINTS - kx]])
    iu = np.triu_indices(Z.shape[0], k=1)
    med = float(np.sqrt(np.median(_sqdist(Z, Z)[iu])))
    if med <= 0:
        med = 1.0
    return med


def mmd2(X, Y, bandwidth: float | None = None) -> tuple[float, float]:
    """Unbiased and biased MMD^2 with ``k(x, y) = exp(-|x - y|^2 / (2 h^2))``.

    Returns:
        ``(unbiased, biased)``. ``h`` defaults to :func:`median_heuristic`.
    """
    X = _points(X, 2, "mmd2")
    Y = _points(Y, 2, "mmd2")
    if X.shape[1] != Y.shape[1]:
        raise InvalidInput("samples have different dimensions")
    h = median_heuristic(X, Y) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise InvalidInput("bandwidth must be positive")
    g = 1.0 / (2.0 * h * h)
    Kxx = np.exp(-g * _sqdist(X, X))
    Kyy = np.exp(-g * _sqdist(Y, Y))
    Kxy = np.exp(-g * _sqdist(X, Y))
    n, m = X.shape[0], Y.shape[0]
    sxx, syy, sxy = Kxx.sum(), Kyy.sum(), Kxy.sum()
    biased = sxx / n**2 + syy / m**2 - 2.0 * sxy / (n * m)
    unbiased = (sxx - np.trace(Kxx)) / (n * (n - 1)) + (syy - np.trace(Kyy)) / (m * (m - 1)) - 2.0 * sxy / (n * m)
    return float(unbiased), float(max(biased, 0.0))


def _floor_cov(S):
    w, V = np.linalg.eigh(S)
    return (V * np.maximum(w, EIG_FLOOR)) @ V.T


def _trace_sqrt_product(A, B) -> float:
    """``Tr((A B)^{1/2})`` for symmetric PSD ``A``, ``B``."""
    if A.shape == (2, 2):
        # eigenvalues of AB are real and nonnegative, so
        # Tr sqrt(AB) = sqrt(tr(AB) + 2 sqrt(det(AB)))
        M = A @ B
        det = max(np.linalg.det(A) * np.linalg.det(B), 0.0)
        return float(np.sqrt(max(np.trace(M) + 2.0 * np.sqrt(det), 0.0)))
    w, V = np.linalg.eigh(A)
    rA = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    ev = np.linalg.eigvalsh(rA @ B @ rA)
    return float(np.sum(np.sqrt(np.maximum(ev, 0.0))))


def frechet_gaussian(X, Y) -> float:
    """Frechet distance between Gaussian fits (sample mean and covariance)."""
    X = _points(X, 3, "frechet_gaussian")
    Y = _points(Y, 3, "frechet_gaussian")
    if X.shape[1] != Y.shape[1]:
        raise InvalidInput("samples have different dimensions")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Sx = _floor_cov(np.atleast_2d(np.cov(X, rowvar=False)))
    Sy = _floor_cov(np.atleast_2d(np.cov(Y, rowvar=False)))
    d = mx - my
    val = d @ d + np.trace(Sx) + np.trace(Sy) - 2.0 * _trace_sqrt_product(Sx, Sy)
    return float(max(val, 0.0))


@dataclass(frozen=True)
class MetricReport:
    mmd2_unbiased: float
    mmd2_biased: float
    frechet: float
    bandwidth: float
    n_real: int
    n_fake: int


def metric_report(real, fake, bandwidth: float | None = None) -> MetricReport:
    real = _points(real, 3, "metric_report")
    fake = _points(fake, 3, "metric_report")
    h = median_heuristic(real, fake) if bandwidth is None else float(bandwidth)
    u, b = mmd2(real, fake, h)
    return MetricReport(u, b, frechet_gaussian(real, fake), h, real.shape[0], fake.shape[0])
