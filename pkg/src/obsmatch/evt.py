"""Extreme-value machinery: Gumbel fits, parameter algebra, extremal index.

The limit law of the block maxima is exp(-theta e^{-s}) on the scaled
variable s, i.e. a Gumbel law whose scale is 1/(D (q-1)) and whose
location is log(theta n) / (D (q-1)) for blocks of length n.  Fitting
location and scale therefore recovers both the generalized dimension of
the image measure and the extremal index.  The Birkhoff-sum estimator
theta_hat_K works directly on threshold exceedances instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (DegenerateSampleError, FitFailureError, InfiniteIndexError,
                     InsufficientTailError)
from .matching import MatchSeries, _series_values, threshold_for_quantile

EULER_GAMMA = float(np.euler_gamma)

MIN_FIT_SAMPLES = 50
_NEWTON_TOL = 1e-10
_NEWTON_MAX_ITER = 100
RECOMMENDED_EXCEEDANCES = 100


@dataclass(frozen=True)
class GumbelParams:
    """Location/scale of a fitted Gumbel law."""

    location: float
    scale: float
    n_samples: int
    loglik: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be > 0")
        if not np.isfinite(self.loglik):
            raise ValueError("loglik must be finite")


def fit_gumbel(maxima) -> GumbelParams:
    """Maximum-likelihood Gumbel fit.

    The scale solves the standard one-dimensional profile equation
    b = mean(x) - sum(x e^{-x/b}) / sum(e^{-x/b}) by damped Newton
    iteration started at the method-of-moments value; the location then
    follows in closed form.
    """
    x = _series_values(maxima)
    n = x.size
    if n < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} block maxima, got {n}")
    mean = x.sum() / n
    std = math.sqrt(((x - mean) ** 2).sum() / n)
    if std == 0.0:
        raise DegenerateSampleError("constant sample: Gumbel scale is undefined")

    b = std * math.sqrt(6.0) / math.pi
    xmin = x.min()
    trace = []
    converged = False
    for _ in range(_NEWTON_MAX_ITER):
        g, gp = _profile_residual(x, mean, xmin, b)
        db = -g / gp
        while b + db <= 0.0:
            db *= 0.5
        # keep the residual non-increasing; rarely fires, g is monotone in b
        for _ in range(30):
            g_new, _ = _profile_residual(x, mean, xmin, b + db)
            if abs(g_new) <= abs(g) or abs(db) < _NEWTON_TOL:
                break
            db *= 0.5
        b += db
        trace.append((b, g, db))
        if abs(db) < _NEWTON_TOL:
            converged = True
            break
    if not converged:
        raise FitFailureError(
            f"Gumbel scale iteration did not converge in {_NEWTON_MAX_ITER} steps",
            trace=trace)

    loc = -b * (logsumexp(-x / b) - math.log(n))
    z = (x - loc) / b
    loglik = float(-n * math.log(b) - z.sum() - np.exp(-z).sum())
    return GumbelParams(location=float(loc), scale=float(b),
                        n_samples=int(n), loglik=loglik)


def _profile_residual(x, mean, xmin, b):
    e = np.exp(-(x - xmin) / b)  # common factor e^{-xmin/b} cancels in the ratios
    s0 = e.sum()
    s1 = (x * e).sum()
    s2 = (x * x * e).sum()
    g = b - mean + s1 / s0
    gp = 1.0 + (s2 * s0 - s1 * s1) / (b * b * s0 * s0)
    return g, gp


def moment_estimate(maxima) -> tuple[float, float]:
    """Method-of-moments (location, scale); the MLE initializer, kept for cross-checks."""
    x = _series_values(maxima)
    mean = x.sum() / x.size
    std = math.sqrt(((x - mean) ** 2).sum() / x.size)
    scale = std * math.sqrt(6.0) / math.pi
    return mean - EULER_GAMMA * scale, scale


def dq_from_gumbel(params: GumbelParams, q: int) -> float:
    """Generalized dimension of the image measure from the fitted scale."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return 1.0 / (params.scale * (q - 1))


def theta_from_gumbel(params: GumbelParams, q: int, block_size: int, dq: float) -> float:
    """Extremal index from the fitted location, given the dimension.

    location = log(theta n) / (dq (q-1)) for blocks of length n, hence
    theta = exp(location dq (q-1) - log n), clamped into (0, 1].
    """
    if dq <= 0:
        raise ValueError("dq must be > 0")
    theta = math.exp(params.location * dq * (q - 1) - math.log(block_size))
    return min(theta, 1.0)


def hq_from_theta(theta: float, q: int) -> float:
    """Hyperbolicity index log(1 - theta) / (1 - q)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if theta == 1.0:
        raise InfiniteIndexError(
            "theta = 1: all cluster probabilities vanished, the index diverges")
    return math.log(1.0 - theta) / (1 - q)


@dataclass(frozen=True)
class EIEstimate:
    """Cluster probabilities p_hat_{0..K-1} and the truncated index theta_hat.

    ``theta_raw`` keeps the unclamped value 1 - sum(p_hat); ``theta_hat``
    is clamped into [0, 1].
    """

    p_hat: tuple[float, ...]
    theta_hat: float
    theta_raw: float
    threshold_u: float
    exceedance_count: int
    q: int

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.p_hat):
            raise ValueError("every p_hat entry must lie in [0, 1]")
        if not -1e-12 <= self.theta_raw <= 1.0:
            raise ValueError("theta_raw outside [-1e-12, 1]")


def estimate_ei(series, quantile: float, K: int = 5) -> EIEstimate:
    """Birkhoff-sum estimate of the extremal index, truncated at K terms.

    With u the empirical ``quantile`` of the series and E the exceedances
    {i : Y_i > u} whose K+1 successors stay inside the series, p_hat_k is
    the fraction of E whose next exceedance happens exactly k+1 steps
    later; theta_hat = 1 - sum of the K estimated cluster probabilities.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    y = _series_values(series)
    u = threshold_for_quantile(y, quantile)
    n = y.size
    exc = y > u
    starts = np.flatnonzero(exc[:max(n - K - 1, 0)])  # i <= n - K - 2
    if starts.size == 0:
        raise InsufficientTailError(
            f"no exceedances above the {quantile} quantile usable with K={K}")
    if starts.size < RECOMMENDED_EXCEEDANCES:
        warnings.warn(
            f"only {starts.size} exceedances above the {quantile} quantile; "
            f"at least {RECOMMENDED_EXCEEDANCES} are recommended",
            stacklevel=2)
    p_hat = []
    alive = np.ones(starts.size, dtype=bool)  # no exceedance at i+1..i+k yet
    for k in range(K):
        nxt = exc[starts + k + 1]
        p_hat.append(np.count_nonzero(alive & nxt) / starts.size)
        alive &= ~nxt
    total = 0.0
    for p in p_hat:  # fixed ascending-k accumulation order
        total += p
    theta_raw = 1.0 - total
    q = series.config.q if isinstance(series, MatchSeries) else 0
    return EIEstimate(p_hat=tuple(p_hat), theta_hat=min(max(theta_raw, 0.0), 1.0),
                      theta_raw=theta_raw, threshold_u=float(u),
                      exceedance_count=int(starts.size), q=q)


KNOWN_KINDS = ("dq", "theta", "hq", "theta_gumbel",
               "dq_analytic", "theta_analytic", "dq_delta", "theta_delta")


@dataclass(frozen=True)
class SpectrumResult:
    """Cross-run mean and dispersion of one estimated quantity at one q."""

    q: int
    estimate_mean: float
    estimate_std: float
    run_count: int
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.run_count < 1:
            raise ValueError("run_count must be >= 1")
        if not self.estimate_std >= 0:
            raise ValueError("estimate_std must be >= 0")
        if not (self.kind in KNOWN_KINDS or _is_cluster_kind(self.kind)):
            raise ValueError(f"unknown result kind {self.kind!r}")


def _is_cluster_kind(kind: str) -> bool:
    return kind.startswith("p") and kind[1:].isdigit()


def aggregate_runs(estimates, kind: str, q: int, metadata: dict | None = None) -> SpectrumResult:
    """Mean and population standard deviation across runs."""
    values = np.asarray(list(estimates), dtype=float)
    if values.size < 1:
        raise ValueError("need at least one estimate")
    return SpectrumResult(q=int(q),
                          estimate_mean=float(values.mean()),
                          estimate_std=float(values.std(ddof=0)),
                          run_count=int(values.size),
                          kind=kind,
                          metadata=dict(metadata or {}))
