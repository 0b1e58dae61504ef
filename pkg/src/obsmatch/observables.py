"""Observation functions on phase space, with derivatives and branch structure.

All evaluation functions are numpy-vectorized: they accept a scalar state
(or a length-2 point for planar systems) as well as arrays with leading
batch dimensions.  Strict pointwise evaluation raises on singular inputs;
the batch path used by estimation pipelines clamps coordinates away from
zero instead (a probability-zero event under the measures in use).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BreakpointError, CatalogError, EvaluationError

SINGULARITY_CLAMP = 1e-300
FD_STEP = 1e-6


@dataclass(frozen=True)
class PiecewiseBranch:
    """One strictly monotone differentiable branch of a piecewise map.

    ``domain`` is the half-open interval [a, b); the last branch of a
    partition also covers its right endpoint.  ``map``, ``inverse`` and
    ``dmap`` must be vectorized.
    """

    domain: tuple[float, float]
    map: Callable
    inverse: Callable
    dmap: Callable

    def __post_init__(self):
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"invalid branch domain {self.domain}")

    def contains(self, x, last: bool = False):
        a, b = self.domain
        x = np.asarray(x)
        return (x >= a) & ((x <= b) if last else (x < b))


def check_partition(branches, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-12):
    """Raise unless the branch domains partition [lo, hi] up to endpoints."""
    doms = sorted(br.domain for br in branches)
    if abs(doms[0][0] - lo) > tol or abs(doms[-1][1] - hi) > tol:
        raise ValueError(f"branch domains do not cover [{lo}, {hi}]: {doms}")
    for (a0, b0), (a1, b1) in zip(doms, doms[1:]):
        if abs(b0 - a1) > tol:
            raise ValueError(f"branch domains leave a gap or overlap at {b0} vs {a1}")


def breakpoints(branches) -> np.ndarray:
    """Sorted distinct endpoints of the branch domains."""
    pts = sorted({e for br in branches for e in br.domain})
    return np.asarray(pts, dtype=float)


def piecewise_value(branches, x):
    """Evaluate a piecewise map; the rightmost branch covers its endpoint."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    ordered = sorted(branches, key=lambda br: br.domain[0])
    for i, br in enumerate(ordered):
        mask = br.contains(x, last=(i == len(ordered) - 1))
        if np.any(mask):
            out[mask] = np.asarray(br.map(x[mask]), dtype=float)
    return out if out.shape else float(out)


def piecewise_derivative(branches, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    ordered = sorted(branches, key=lambda br: br.domain[0])
    for i, br in enumerate(ordered):
        mask = br.contains(x, last=(i == len(ordered) - 1))
        if np.any(mask):
            out[mask] = np.asarray(br.dmap(x[mask]), dtype=float)
    return out if out.shape else float(out)


@dataclass(frozen=True)
class Observable:
    """A measurement function f from state space to R^m.

    ``in_dim`` 0 means the observable accepts states of any dimension (the
    identity); ``out_dim`` 0 mirrors the input dimension.  ``eval`` is the
    strict pointwise evaluation, ``eval_batch`` the clamped vectorized one
    used by estimation pipelines.
    """

    name: str
    in_dim: int
    out_dim: int
    eval: Callable
    eval_batch: Callable
    derivative: Callable | None = None
    branches: tuple[PiecewiseBranch, ...] | None = None


def evaluate(obs: Observable, x):
    """Strict pointwise evaluation f(x); raises on non-finite output."""
    val = obs.eval(x)
    if not np.all(np.isfinite(val)):
        raise EvaluationError(f"{obs.name} produced a non-finite value at {x!r}")
    return val


def derivative(obs: Observable, x):
    """Analytic derivative when available, else a central finite difference.

    Scalar observables return f'(x); vector ones return the Jacobian with
    one row per output component.
    """
    if obs.branches is not None:
        for pt in breakpoints(obs.branches)[1:-1]:
            if np.isclose(x, pt, rtol=0.0, atol=1e-15):
                raise BreakpointError(
                    f"derivative of {obs.name} undefined at branch boundary {pt}",
                    breakpoint=float(pt))
    if obs.derivative is not None:
        return obs.derivative(x)
    return _finite_difference(obs, x)


def _finite_difference(obs: Observable, x, h: float = FD_STEP):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return (np.asarray(obs.eval(float(x) + h)) - np.asarray(obs.eval(float(x) - h))) / (2 * h)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(obs.eval(x + e), dtype=float)
                     - np.asarray(obs.eval(x - e), dtype=float)) / (2 * h))
    jac = np.stack(cols, axis=-1)
    return jac


def clamp_from_zero(v, eps: float = SINGULARITY_CLAMP):
    """Push values inside (-eps, eps) to +-eps (0 goes to +eps)."""
    v = np.asarray(v, dtype=float)
    out = np.where(v >= 0, np.maximum(v, eps), np.minimum(v, -eps))
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _identity() -> Observable:
    f = lambda x: x
    def deriv(x):
        x = np.asarray(x, dtype=float)
        return 1.0 if x.ndim == 0 else np.eye(x.shape[-1])
    return Observable("identity", 0, 0, f, f, derivative=deriv)


def _linear2(name: str, matrix) -> Observable:
    m = np.asarray(matrix, dtype=float)

    def f(state):
        s = np.asarray(state, dtype=float)
        return s @ m.T

    return Observable(name, 2, m.shape[0], f, f, derivative=lambda x: m.copy())


def _mean2() -> Observable:
    def f(state):
        s = np.asarray(state, dtype=float)
        return (s[..., 0] + s[..., 1]) / 2.0

    return Observable("mean", 2, 1, f, f,
                      derivative=lambda x: np.array([0.5, 0.5]))


def _square_shift() -> Observable:
    # Fig. 1 f4: ((x - 0.5)^2, 2 y)
    def f(state):
        s = np.asarray(state, dtype=float)
        return np.stack([(s[..., 0] - 0.5) ** 2, 2.0 * s[..., 1]], axis=-1)

    def deriv(state):
        x = np.asarray(state, dtype=float)
        return np.array([[2.0 * (x[0] - 0.5), 0.0], [0.0, 2.0]])

    return Observable("fig1_f4", 2, 2, f, f, derivative=deriv)


def _coordinate_squares() -> Observable:
    # Fig. 3 f4: (x^2, y^2)
    def f(state):
        s = np.asarray(state, dtype=float)
        return np.stack([s[..., 0] ** 2, s[..., 1] ** 2], axis=-1)

    def deriv(state):
        x = np.asarray(state, dtype=float)
        return np.array([[2.0 * x[0], 0.0], [0.0, 2.0 * x[1]]])

    return Observable("fig3_f4", 2, 2, f, f, derivative=deriv)


def _reciprocal_trig(name: str) -> Observable:
    # (sin(1/x), cos(1/y)): singular on the axes.
    def strict(state):
        s = np.asarray(state, dtype=float)
        if np.any(np.abs(s) < SINGULARITY_CLAMP):
            raise EvaluationError(
                f"{name} undefined within {SINGULARITY_CLAMP} of a coordinate axis: {state!r}")
        return np.stack([np.sin(1.0 / s[..., 0]), np.cos(1.0 / s[..., 1])], axis=-1)

    def batch(state):
        s = clamp_from_zero(np.asarray(state, dtype=float))
        return np.stack([np.sin(1.0 / s[..., 0]), np.cos(1.0 / s[..., 1])], axis=-1)

    def deriv(state):
        x, y = float(state[0]), float(state[1])
        if min(abs(x), abs(y)) < SINGULARITY_CLAMP:
            raise EvaluationError(f"{name} derivative undefined at {state!r}")
        return np.array([[-np.cos(1.0 / x) / x ** 2, 0.0],
                         [0.0, np.sin(1.0 / y) / y ** 2]])

    return Observable(name, 2, 2, strict, batch, derivative=deriv)


def _degenerate_first_axis() -> Observable:
    # Fig. 1 f5: (1, y^2 + x); the constant first coordinate is the point.
    def f(state):
        s = np.asarray(state, dtype=float)
        return np.stack([np.ones_like(s[..., 0]), s[..., 1] ** 2 + s[..., 0]], axis=-1)

    def deriv(state):
        y = float(state[1])
        return np.array([[0.0, 0.0], [1.0, 2.0 * y]])

    return Observable("fig1_f5", 2, 2, f, f, derivative=deriv)


def example_branches() -> tuple[PiecewiseBranch, PiecewiseBranch]:
    """The worked-example observation: 2x below 1/2, 3/2 - x above."""
    return (
        PiecewiseBranch((0.0, 0.5), lambda x: 2.0 * x, lambda y: y / 2.0,
                        lambda x: np.full_like(np.asarray(x, dtype=float), 2.0)),
        PiecewiseBranch((0.5, 1.0), lambda x: 1.5 - x, lambda y: 1.5 - y,
                        lambda x: np.full_like(np.asarray(x, dtype=float), -1.0)),
    )


def piecewise_observable(name: str, branches) -> Observable:
    branches = tuple(branches)
    check_partition(branches)

    def f(x):
        return piecewise_value(branches, x)

    def deriv(x):
        return piecewise_derivative(branches, x)

    return Observable(name, 1, 1, f, f, derivative=deriv, branches=branches)


def _example_observable() -> Observable:
    return piecewise_observable("example_f", example_branches())


_CATALOG_BUILDERS: dict[str, Callable[[], Observable]] = {
    "identity": _identity,
    "id": _identity,
    "fig1_f1": _identity,
    "fig1_f2": lambda: _linear2("fig1_f2", [[2.0, 1.0], [0.0, 2.0]]),
    "fig1_f3": lambda: _reciprocal_trig("fig1_f3"),
    "fig1_f4": _square_shift,
    "fig1_f5": _degenerate_first_axis,
    "fig3_f1": _identity,
    "fig3_f2": lambda: _linear2("fig3_f2", [[100.0, 1.0], [0.0, 100.0]]),
    "fig3_f3": lambda: _linear2("fig3_f3", [[1.0, 0.0], [0.0, 100.0]]),
    "fig3_f4": _coordinate_squares,
    "fig3_f5": lambda: _reciprocal_trig("fig3_f5"),
    "example_f": _example_observable,
    "mean": _mean2,
}

CATALOG_NAMES = tuple(sorted(_CATALOG_BUILDERS))


def catalog(name: str) -> Observable:
    """Return a built-in observable by name."""
    try:
        builder = _CATALOG_BUILDERS[name]
    except KeyError:
        raise CatalogError(
            f"unknown observable {name!r}; known names: {', '.join(CATALOG_NAMES)}") from None
    return builder()


# ---------------------------------------------------------------------------
# config-defined observables
# ---------------------------------------------------------------------------

def _branch_from_spec(spec: dict, where: str) -> PiecewiseBranch:
    try:
        a, b = spec["domain"]
        kind = spec["kind"]
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{where}: branch needs 'domain' [a, b] and 'kind'") from err
    if kind == "affine":
        c0, c1 = (float(v) for v in spec["coeffs"])
        if c1 == 0:
            raise ValueError(f"{where}: affine branch must have nonzero slope")
        return PiecewiseBranch((float(a), float(b)),
                               lambda x: c0 + c1 * np.asarray(x, dtype=float),
                               lambda y: (np.asarray(y, dtype=float) - c0) / c1,
                               lambda x: np.full_like(np.asarray(x, dtype=float), c1))
    if kind == "monomial":
        c = float(spec["coef"])
        p = float(spec["power"])
        if c == 0 or p <= 0:
            raise ValueError(f"{where}: monomial branch needs coef != 0 and power > 0")
        return PiecewiseBranch((float(a), float(b)),
                               lambda x: c * np.asarray(x, dtype=float) ** p,
                               lambda y: (np.asarray(y, dtype=float) / c) ** (1.0 / p),
                               lambda x: c * p * np.asarray(x, dtype=float) ** (p - 1.0))
    raise ValueError(f"{where}: unknown branch kind {kind!r}")


def resolve_observable(spec) -> Observable:
    """Resolve a config entry: a catalog name or an inline definition.

    Inline forms: {"type": "piecewise", "name": ..., "branches": [...]}
    with affine/monomial branches, or {"type": "linear", "matrix": [[...]]}
    for a linear map on planar states.
    """
    if isinstance(spec, str):
        return catalog(spec)
    if not isinstance(spec, dict):
        raise ValueError(f"observable spec must be a name or a mapping, got {type(spec)}")
    kind = spec.get("type")
    name = spec.get("name", f"inline_{kind}")
    if kind == "piecewise":
        branches = [_branch_from_spec(b, f"observable.branches[{i}]")
                    for i, b in enumerate(spec.get("branches", []))]
        if not branches:
            raise ValueError("observable.branches: empty branch list")
        return piecewise_observable(name, branches)
    if kind == "linear":
        matrix = np.asarray(spec.get("matrix"), dtype=float)
        if matrix.ndim == 1:
            matrix = matrix[None, :]
        if matrix.shape[1] != 2:
            raise ValueError("observable.matrix: expected rows of length 2")
        obs = _linear2(name, matrix)
        if matrix.shape[0] == 1:
            def f1(state, _m=matrix):
                s = np.asarray(state, dtype=float)
                return s @ _m.T[:, 0]
            obs = Observable(name, 2, 1, f1, f1, derivative=lambda x: matrix[0].copy())
        return obs
    raise ValueError(f"observable.type: unknown type {kind!r}")
