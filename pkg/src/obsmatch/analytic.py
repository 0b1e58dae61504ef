"""Exact oracles for expanding interval maps and self-similar measures.

The extremal index of the matching process for a piecewise expanding map T
of [0,1] with a.c. invariant density h and a piecewise C^1, finite-to-one
observation f is 1 - p_{0,q}, where p_{0,q} is a ratio of two integrals
over [0,1] built from h, f' and (f o T)'.  The integrands are piecewise
smooth, so splitting at every breakpoint of f, T and f o T and applying
composite midpoint quadrature integrates them essentially exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ModelError, UnsupportedOrderError
from .observables import (PiecewiseBranch, breakpoints, check_partition,
                          piecewise_derivative, piecewise_value)

DEFAULT_RESOLUTION = 100_000
_MERGE_TOL = 1e-12
_EQUALITY_TOL = 1e-9


def _uniform_density(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class IntervalModel:
    """An expanding interval map with an observation, both piecewise C^1."""

    map_branches: tuple[PiecewiseBranch, ...]
    obs_branches: tuple[PiecewiseBranch, ...]
    density: Callable = _uniform_density

    def __post_init__(self):
        object.__setattr__(self, "map_branches", tuple(self.map_branches))
        object.__setattr__(self, "obs_branches", tuple(self.obs_branches))
        check_partition(self.map_branches)
        check_partition(self.obs_branches)

    def validate(self, probes: int = 1001) -> None:
        """Check the expanding/regularity hypotheses on a probe grid."""
        for br in self.map_branches:
            a, b = br.domain
            x = np.linspace(a, b, probes + 2)[1:-1]
            if not np.all(np.abs(br.dmap(x)) > 1.0):
                raise ModelError(f"map branch on [{a}, {b}) is not expanding (|T'| <= 1)")
        for br in self.obs_branches:
            a, b = br.domain
            x = np.linspace(a, b, probes + 2)[1:-1]
            if not np.all(np.abs(br.dmap(x)) > 0.0):
                raise ModelError(f"observation branch on [{a}, {b}) has vanishing derivative")
        mass = _integrate(self.density, breakpoints(self.obs_branches), 10_000)
        if abs(mass - 1.0) > 1e-6:
            raise ModelError(f"density integrates to {mass!r}, not 1 within 1e-06")


def doubling_branches() -> tuple[PiecewiseBranch, PiecewiseBranch]:
    """2x mod 1 split into its two full branches."""
    return (
        PiecewiseBranch((0.0, 0.5), lambda x: 2.0 * x, lambda y: y / 2.0,
                        lambda x: np.full_like(np.asarray(x, dtype=float), 2.0)),
        PiecewiseBranch((0.5, 1.0), lambda x: 2.0 * x - 1.0, lambda y: (y + 1.0) / 2.0,
                        lambda x: np.full_like(np.asarray(x, dtype=float), 2.0)),
    )


def example_model() -> IntervalModel:
    """The worked example: doubling map with the two-branch tent-like observation."""
    from .observables import example_branches
    return IntervalModel(doubling_branches(), example_branches())


def preimages(obs_branches, y: float, tol: float = _MERGE_TOL) -> list[float]:
    """All x with f(x) = y, from the explicit branch inverses.

    Inverse candidates landing outside their branch domain are discarded;
    results are sorted and near-duplicates merged.
    """
    found = []
    ordered = sorted(obs_branches, key=lambda br: br.domain[0])
    for i, br in enumerate(ordered):
        a, b = br.domain
        cand = float(br.inverse(y))
        if not np.isfinite(cand):
            continue
        # half-open domain [a, b): the right endpoint belongs to the next branch
        inside = (a - tol <= cand < b) or (i == len(ordered) - 1 and a - tol <= cand <= b + tol)
        if not inside:
            continue
        if abs(float(br.map(cand)) - y) > _EQUALITY_TOL * max(1.0, abs(y)):
            continue
        found.append(min(max(cand, a), b))
    found.sort()
    merged: list[float] = []
    for v in found:
        if not merged or abs(v - merged[-1]) > tol:
            merged.append(v)
    return merged


def _integrate(fn, pts, resolution: int) -> float:
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= _MERGE_TOL:
            continue
        step = (hi - lo) / resolution
        mids = lo + (np.arange(resolution) + 0.5) * step
        total += float(np.sum(np.asarray(fn(mids), dtype=float))) * step
    return total


def _merged_breakpoints(model: IntervalModel) -> np.ndarray:
    """Breakpoints of f, T and f o T (pullbacks of f-breaks through T branches)."""
    pts = set(float(p) for p in breakpoints(model.obs_branches))
    pts.update(float(p) for p in breakpoints(model.map_branches))
    obs_breaks = breakpoints(model.obs_branches)
    for br in model.map_branches:
        a, b = br.domain
        for c in obs_breaks:
            x = float(br.inverse(c))
            if a + _MERGE_TOL < x < b - _MERGE_TOL:
                pts.add(x)
    arr = sorted(p for p in pts if -_MERGE_TOL <= p <= 1.0 + _MERGE_TOL)
    merged = []
    for p in arr:
        if not merged or p - merged[-1] > _MERGE_TOL:
            merged.append(p)
    return np.asarray(merged)


def _preimage_weight_sum(model: IntervalModel, yvals: np.ndarray) -> np.ndarray:
    """sum over y in f^{-1}(y0) of h(y)/|f'(y)|, vectorized over y0."""
    total = np.zeros_like(yvals)
    ordered = sorted(model.obs_branches, key=lambda br: br.domain[0])
    for i, br in enumerate(ordered):
        a, b = br.domain
        cand = np.asarray(br.inverse(yvals), dtype=float)
        last = i == len(ordered) - 1
        inside = (cand >= a - _MERGE_TOL) & ((cand <= b + _MERGE_TOL) if last else (cand < b))
        inside &= np.abs(np.asarray(br.map(cand), dtype=float) - yvals) \
            <= _EQUALITY_TOL * np.maximum(1.0, np.abs(yvals))
        if np.any(inside):
            c = cand[inside]
            total[inside] += np.asarray(model.density(c), dtype=float) \
                / np.abs(np.asarray(br.dmap(c), dtype=float))
    return total


def p0q_interval(model: IntervalModel, q: int, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Cluster probability p_{0,q} by quadrature of the closed-form ratio.

    Numerator: integral of h^q / max(|f'|, |(f o T)'|)^{q-1}.
    Denominator: integral of (sum_{y in f^{-1}(f(x))} h(y)/|f'(y)|)^{q-1} h(x).
    Both use the same cell decomposition, split at every breakpoint of
    f, T and f o T; (f o T)'(x) = f'(T x) T'(x) by the chain rule.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    pts = _merged_breakpoints(model)
    num = 0.0
    den = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= _MERGE_TOL:
            continue
        step = (hi - lo) / resolution
        mids = lo + (np.arange(resolution) + 0.5) * step
        h = np.asarray(model.density(mids), dtype=float)
        fp = piecewise_derivative(model.obs_branches, mids)
        tx = piecewise_value(model.map_branches, mids)
        tp = piecewise_derivative(model.map_branches, mids)
        fot_p = piecewise_derivative(model.obs_branches, tx) * tp
        if np.any(np.isnan(fp)) or np.any(np.isnan(fot_p)):
            raise ModelError(f"derivative undefined inside piece [{lo}, {hi}]")
        num += float(np.sum(h ** q / np.maximum(np.abs(fp), np.abs(fot_p)) ** (q - 1))) * step
        weights = _preimage_weight_sum(model, piecewise_value(model.obs_branches, mids))
        den += float(np.sum(weights ** (q - 1) * h)) * step
    if den <= 0:
        raise ModelError("denominator integral vanished; observation branches inconsistent")
    return num / den


def theta_q_interval(model: IntervalModel, q: int,
                     resolution: int = DEFAULT_RESOLUTION) -> float:
    """Extremal index 1 - p_{0,q} (valid under the genericity conditions)."""
    return 1.0 - p0q_interval(model, q, resolution)


def example_theta_closed_form(q: int) -> float:
    """The worked example's printed spectrum: 1 - (2 + 2^{2-q}) / (1 + 3^q)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return 1.0 - (2.0 + 2.0 ** (2 - q)) / (1.0 + 3.0 ** q)


@dataclass(frozen=True)
class GenericityReport:
    """Empirical check of the twin conditions behind the theta formula."""

    sample_count: int
    k_max: int
    h1_violation_fraction: float
    h1_witnesses: tuple
    h2_violation_fractions: tuple[float, ...]  # index k-1 holds the A_k rate
    h2_witnesses: tuple

    @property
    def clean(self) -> bool:
        return self.h1_violation_fraction == 0.0 and \
            all(v == 0.0 for v in self.h2_violation_fractions)


def check_genericity(model: IntervalModel, sample_count: int = 10_000,
                     k_max: int = 5, seed: int = 0,
                     tol: float = _EQUALITY_TOL) -> GenericityReport:
    """Sample x ~ h and hunt for observational twins violating the conditions.

    A point y != x with f(y) = f(x) and f(Ty) = f(Tx) (within ``tol``)
    violates the first condition; a twin whose observations disagree for k
    steps and re-agree at step k+1 puts it in A_k and violates the second.
    """
    rng = np.random.default_rng(seed)
    xs = _sample_density(model, sample_count, rng)
    fx = piecewise_value(model.obs_branches, xs)

    # forward observed orbits of the sampled points
    obs_x = np.empty((k_max + 2, sample_count))
    obs_x[0] = fx
    cur = xs.copy()
    for i in range(1, k_max + 2):
        cur = piecewise_value(model.map_branches, cur)
        obs_x[i] = piecewise_value(model.obs_branches, cur)

    h1_bad = np.zeros(sample_count, dtype=bool)
    h2_bad = np.zeros((k_max, sample_count), dtype=bool)
    h1_wit: list[tuple[float, float]] = []
    h2_wit: list[tuple[int, float, float]] = []

    ordered = sorted(model.obs_branches, key=lambda br: br.domain[0])
    for i, br in enumerate(ordered):
        a, b = br.domain
        cand = np.asarray(br.inverse(fx), dtype=float)
        last = i == len(ordered) - 1
        inside = (cand >= a - _MERGE_TOL) & ((cand <= b + _MERGE_TOL) if last else (cand < b))
        inside &= np.abs(np.asarray(br.map(cand), dtype=float) - fx) \
            <= tol * np.maximum(1.0, np.abs(fx))
        if not np.any(inside):
            continue
        nontrivial = inside & (np.abs(cand - xs) > tol)
        obs_y = np.empty((k_max + 2, sample_count))
        cur = np.where(inside, cand, 0.0)
        for step_i in range(1, k_max + 2):
            cur = piecewise_value(model.map_branches, cur)
            obs_y[step_i] = piecewise_value(model.obs_branches, cur)
        agree = np.abs(obs_y[1:] - obs_x[1:]) <= tol  # (k_max + 1, n) rows: steps 1..k_max+1
        new_h1 = nontrivial & agree[0]
        for idx in np.flatnonzero(new_h1 & ~h1_bad)[:10]:
            if len(h1_wit) < 10:
                h1_wit.append((float(xs[idx]), float(cand[idx])))
        h1_bad |= new_h1
        disagree_so_far = np.ones(sample_count, dtype=bool)
        for k in range(1, k_max + 1):
            disagree_so_far &= ~agree[k - 1]
            in_ak = inside & disagree_so_far & agree[k]
            for idx in np.flatnonzero(in_ak & ~h2_bad[k - 1])[:10]:
                if len(h2_wit) < 10:
                    h2_wit.append((k, float(xs[idx]), float(cand[idx])))
            h2_bad[k - 1] |= in_ak

    return GenericityReport(
        sample_count=sample_count,
        k_max=k_max,
        h1_violation_fraction=float(h1_bad.mean()),
        h1_witnesses=tuple(h1_wit),
        h2_violation_fractions=tuple(float(row.mean()) for row in h2_bad),
        h2_witnesses=tuple(h2_wit),
    )


def _sample_density(model: IntervalModel, count: int, rng) -> np.ndarray:
    if model.density is _uniform_density:
        return rng.random(count)
    # rejection sampling against the density's envelope on [0, 1]
    grid = np.linspace(0.0, 1.0, 4097)
    peak = float(np.max(model.density(grid))) * 1.05
    out = np.empty(count)
    filled = 0
    while filled < count:
        draw = rng.random((2, count - filled))
        accept = draw[1] * peak <= np.asarray(model.density(draw[0]), dtype=float)
        take = draw[0][accept]
        out[filled:filled + take.size] = take
        filled += take.size
    return out


def dq_self_similar(weights, ratio: float, q: float) -> float:
    """Generalized dimension of a self-similar measure with one contraction ratio.

    D_q = log(sum w_i^q) / ((q - 1) log ratio).
    """
    if q == 1:
        raise UnsupportedOrderError("q = 1 (information dimension) needs the limit formula")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    moment = float(np.sum(np.where(w > 0, w ** q, 0.0)))
    return math.log(moment) / ((q - 1) * math.log(ratio))


def hk_projection(dq: float, m: int) -> float:
    """Dimension of the image measure under a prevalent observable: min(D_q, m)."""
    if dq < 0:
        raise ValueError("dq must be >= 0")
    if m < 1:
        raise ValueError("m must be >= 1")
    return min(float(dq), float(m))
