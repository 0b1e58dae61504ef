"""Benchmark dynamical systems: doubling map, Henon map, Sierpinski gasket.

Each system packages its step map, an invariant-measure sampler and, where
meaningful, the invariant density and the map derivative.  Long orbits are
produced by per-system lockstep "sweeps" that advance several trajectories
at once in chunks; the scalar ``step``/``trajectory`` API and the sweeps
consume the same per-trajectory random streams, so both paths agree.

Seed splitting rule (used by every multi-run driver): the run seed is
``master_seed XOR run_index``; trajectory ``t`` of a run owns the stream
``PCG64(run_seed).jumped(t)`` (one fixed jump stride per trajectory).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import BasinConfigError, DivergedOrbitError

DEFAULT_VERTICES = ((0.0, 0.0), (1.0, 0.0), (0.5, 1.0))
DEFAULT_GASKET_WEIGHTS = (0.5, 0.3, 0.2)
DEFAULT_ADDRESS_LENGTH = 52  # float mantissa width: truncation below representable resolution

HENON_ESCAPE = 1e6
HENON_BASIN = ((-1.5, 1.5), (-0.5, 0.5))
HENON_BURN_IN = 1000
_MAX_CONSECUTIVE_REJECTS = 100

# Addresses built by hand (without a sampling stream) continue with digits
# drawn from this fixed, documented stream.
_DEFAULT_TAIL_SEED = 0x0B5_1A7C4


def run_seed(master_seed: int, run_index: int) -> int:
    """Seed of one run: master seed XOR run index."""
    return int(master_seed) ^ int(run_index)


def trajectory_bitgen(seed: int, t: int) -> np.random.PCG64:
    """Bit stream of trajectory ``t`` within a run: PCG64(seed) jumped t strides."""
    return np.random.PCG64(seed).jumped(t)


def trajectory_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(trajectory_bitgen(seed, t))


@dataclass(frozen=True)
class MapSystem:
    """A deterministic dynamical system with an invariant-measure sampler.

    ``step`` is pure: identical state in, identical state out.  ``sampler``
    maps a seeded generator to an initial state distributed (exactly or
    after burn-in) according to the invariant measure.  ``density`` and
    ``derivative`` are present for absolutely continuous interval maps only.
    ``embed`` converts symbolic states (gasket addresses) to points; it is
    ``None`` when states already are points.
    """

    name: str
    dim: int
    step: Callable
    sampler: Callable
    density: Callable | None = None
    derivative: Callable | None = None
    params: dict = field(default_factory=dict)
    embed: Callable | None = None
    step_seeded: Callable | None = None
    sweep_cls: type | None = None


def sample_initial(system: MapSystem, seed) -> object:
    """Draw one initial state from (an approximation of) the invariant measure.

    ``seed`` may be an integer or a ``numpy.random.Generator``; passing the
    generator lets callers keep consuming the same stream afterwards.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return system.sampler(rng)


def _advance(system: MapSystem, state, rng):
    if system.step_seeded is not None and rng is not None:
        return system.step_seeded(state, rng)
    return system.step(state)


def iterate(system: MapSystem, x0, length: int, rng=None) -> Iterator:
    """Stream x0, Tx0, ..., T^{length-1}x0 without storing the orbit."""
    if length < 1:
        raise ValueError("length must be >= 1")
    x = x0
    for i in range(length):
        yield x
        if i + 1 < length:
            try:
                x = _advance(system, x, rng)
            except DivergedOrbitError as err:
                raise DivergedOrbitError(
                    f"{system.name} orbit diverged at index {i + 1}: {err}",
                    state=err.state, index=i + 1) from err


def trajectory(system: MapSystem, x0, length: int, rng=None) -> list:
    """Return the orbit (x0, Tx0, ..., T^{length-1}x0) as a list."""
    return list(iterate(system, x0, length, rng=rng))


# ---------------------------------------------------------------------------
# doubling map
# ---------------------------------------------------------------------------

def _doubling_step(x):
    return (2.0 * x) % 1.0


class _DoublingSweep:
    """Lockstep advancer for q doubling orbits; jitter drawn per trajectory."""

    def __init__(self, system, states, rngs):
        self._x = np.asarray(states, dtype=float).copy()
        self._noise = float(system.params.get("noise", 0.0))
        self._rngs = rngs

    def chunk(self, length: int) -> np.ndarray:
        x = self._x
        out = np.empty((length, x.size))
        if self._noise > 0.0:
            jit = np.stack([r.random(length) for r in self._rngs], axis=1)
            jit *= self._noise
            for i in range(length):
                out[i] = x
                x = (2.0 * x + jit[i]) % 1.0
        else:
            for i in range(length):
                out[i] = x
                x = (2.0 * x) % 1.0
        self._x = x
        return out


def doubling_map(noise: float = 0.0) -> MapSystem:
    """2x mod 1 on [0,1) with Lebesgue invariant measure.

    ``noise`` is the amplitude of a uniform per-step jitter applied during
    iteration (not by ``step`` itself).  It counters the mantissa-depletion
    collapse of float orbits on long runs; 0 keeps iteration exact.
    """
    if noise < 0:
        raise ValueError("noise must be >= 0")
    step_seeded = None
    if noise > 0:
        def step_seeded(x, rng, _a=float(noise)):
            return (2.0 * x + rng.random() * _a) % 1.0
    return MapSystem(
        name="doubling",
        dim=1,
        step=_doubling_step,
        sampler=lambda rng: float(rng.random()),
        density=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        derivative=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0),
        params={"noise": float(noise)},
        step_seeded=step_seeded,
        sweep_cls=_DoublingSweep,
    )


# ---------------------------------------------------------------------------
# Henon map
# ---------------------------------------------------------------------------

class _HenonSweep:
    def __init__(self, system, states, rngs):
        arr = np.asarray(states, dtype=float).reshape(-1, 2)
        self._x = arr[:, 0].copy()
        self._y = arr[:, 1].copy()
        self._a = float(system.params["a"])
        self._b = float(system.params["b"])
        self._t = 0

    def chunk(self, length: int) -> np.ndarray:
        a, b = self._a, self._b
        x, y = self._x, self._y
        out = np.empty((length, x.size, 2))
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is checked below
            for i in range(length):
                out[i, :, 0] = x
                out[i, :, 1] = y
                xn = 1.0 - a * x * x + y
                y = b * x
                x = xn
        if not (np.all(np.isfinite(out)) and np.all(np.abs(out[:, :, 0]) <= HENON_ESCAPE)):
            bad = ~(np.isfinite(out).all(axis=(1, 2)) & (np.abs(out[:, :, 0]) <= HENON_ESCAPE).all(axis=1))
            idx = int(np.flatnonzero(bad)[0])
            raise DivergedOrbitError(
                f"henon orbit diverged at index {self._t + idx}", index=self._t + idx)
        self._x, self._y = x, y
        self._t += length
        return out


def henon_map(a: float = 1.4, b: float = 0.3,
              basin=HENON_BASIN, burn_in: int = HENON_BURN_IN) -> MapSystem:
    """Henon map T(x,y) = (1 - a x^2 + y, b x).

    The sampler draws uniformly from the basin box, burns in ``burn_in``
    iterations and rejects escaping draws; the invariant (SRB) measure is
    only reached approximately.
    """
    a = float(a)
    b = float(b)

    def step(state):
        x, y = state
        xn = 1.0 - a * x * x + y
        yn = b * x
        if not (np.isfinite(xn) and np.isfinite(yn)) or abs(xn) > HENON_ESCAPE:
            raise DivergedOrbitError(
                f"henon step diverged from state ({x!r}, {y!r})", state=(x, y))
        return (float(xn), float(yn))

    def sampler(rng):
        (xlo, xhi), (ylo, yhi) = basin
        rejects = 0
        while True:
            x = xlo + (xhi - xlo) * rng.random()
            y = ylo + (yhi - ylo) * rng.random()
            ok = True
            for _ in range(burn_in):
                xn = 1.0 - a * x * x + y
                y = b * x
                x = xn
                if not np.isfinite(x) or abs(x) > HENON_ESCAPE:
                    ok = False
                    break
            if ok:
                return (float(x), float(y))
            rejects += 1
            if rejects > _MAX_CONSECUTIVE_REJECTS:
                raise BasinConfigError(
                    f"more than {_MAX_CONSECUTIVE_REJECTS} consecutive draws escaped "
                    f"the basin box {basin} for henon(a={a}, b={b})")

    return MapSystem(
        name="henon",
        dim=2,
        step=step,
        sampler=sampler,
        params={"a": a, "b": b, "burn_in": int(burn_in),
                "basin": tuple(map(tuple, basin))},
        sweep_cls=_HenonSweep,
    )


# ---------------------------------------------------------------------------
# Sierpinski gasket (full shift on 3-symbol addresses, ratio-1/2 IFS)
# ---------------------------------------------------------------------------

def _digit_cuts(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.size != 3 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must be 3 nonnegative numbers summing to 1, got {weights}")
    return np.cumsum(w)[:2]


@dataclass(frozen=True)
class GasketAddress:
    """A truncated symbolic address on the gasket.

    ``digits`` selects, coarsest first, the sub-triangle at each level;
    ``stream`` is the state of the bit generator supplying future digits
    when the address is shifted (``None`` falls back to a fixed stream).
    """

    digits: tuple[int, ...]
    weights: tuple[float, float, float] = DEFAULT_GASKET_WEIGHTS
    vertices: tuple = DEFAULT_VERTICES
    stream: dict | None = None

    def __post_init__(self):
        _digit_cuts(self.weights)
        if any(d not in (0, 1, 2) for d in self.digits):
            raise ValueError("digits must take values in {0, 1, 2}")


def gasket_address(seed, weights=DEFAULT_GASKET_WEIGHTS,
                   length: int = DEFAULT_ADDRESS_LENGTH,
                   vertices=DEFAULT_VERTICES) -> GasketAddress:
    """Draw an address with i.i.d. weighted digits.

    This samples the self-similar invariant measure exactly (up to the
    2^-length truncation of the embedding).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cuts = _digit_cuts(weights)
    digits = tuple(int(d) for d in np.searchsorted(cuts, rng.random(length), side="right"))
    return GasketAddress(digits, tuple(float(w) for w in weights),
                         tuple(map(tuple, vertices)), rng.bit_generator.state)


def gasket_shift(address: GasketAddress) -> GasketAddress:
    """Drop the leading digit and append a fresh weighted one.

    This realizes the expanding gasket map as the shift on addresses; the
    appended digit restores the information lost at resolution 2^-L.
    """
    if not address.digits:
        raise ValueError("cannot shift an empty digit sequence")
    bg = np.random.PCG64(_DEFAULT_TAIL_SEED)
    if address.stream is not None:
        bg.state = address.stream
    rng = np.random.Generator(bg)
    cuts = _digit_cuts(address.weights)
    fresh = int(np.searchsorted(cuts, rng.random(), side="right"))
    return GasketAddress(address.digits[1:] + (fresh,), address.weights,
                         address.vertices, bg.state)


def gasket_embed(address: GasketAddress) -> tuple[float, float]:
    """Embed digits (d1, d2, ...) as sum_k v_{d_k} 2^{-k}."""
    d = np.asarray(address.digits, dtype=np.intp)
    if d.size == 0:
        raise ValueError("cannot embed an empty digit sequence")
    verts = np.asarray(address.vertices, dtype=float)
    w = 0.5 ** np.arange(1, d.size + 1)
    return (float(verts[d, 0] @ w), float(verts[d, 1] @ w))


class _GasketSweep:
    """Digit-stream advancer: each time step is one shift of the address.

    The embedded point at time i is the sliding dot product of the digit
    stream with the kernel (2^-1, ..., 2^-L), evaluated with np.correlate.
    """

    def __init__(self, system, states, rngs):
        params = system.params
        self._cuts = _digit_cuts(params["weights"])
        self._verts = np.asarray(params["vertices"], dtype=float)
        length = int(params["length"])
        self._w = 0.5 ** np.arange(1, length + 1)
        self._buf = np.array([s.digits for s in states], dtype=np.uint8)
        if self._buf.shape[1] != length:
            raise ValueError("address length does not match system configuration")
        self._rngs = rngs

    def chunk(self, length: int) -> np.ndarray:
        q, L = self._buf.shape
        new = np.stack([
            np.searchsorted(self._cuts, r.random(length), side="right")
            for r in self._rngs]).astype(np.uint8)
        full = np.concatenate([self._buf, new], axis=1)  # (q, L + length)
        out = np.empty((length, q, 2))
        for t in range(q):
            cx = self._verts[full[t], 0]
            cy = self._verts[full[t], 1]
            out[:, t, 0] = np.correlate(cx, self._w, mode="valid")[:length]
            out[:, t, 1] = np.correlate(cy, self._w, mode="valid")[:length]
        self._buf = full[:, length:].copy()
        return out


def sierpinski_gasket(weights=DEFAULT_GASKET_WEIGHTS,
                      length: int = DEFAULT_ADDRESS_LENGTH,
                      vertices=DEFAULT_VERTICES) -> MapSystem:
    """Full shift on 3-symbol addresses embedded by the ratio-1/2 IFS.

    The invariant measure is exactly self-similar with the given digit
    weights, so its generalized dimensions have a closed form.
    """
    weights = tuple(float(w) for w in weights)
    vertices = tuple(map(tuple, vertices))
    _digit_cuts(weights)
    return MapSystem(
        name="gasket",
        dim=2,
        step=gasket_shift,
        sampler=lambda rng: gasket_address(rng, weights, length, vertices),
        params={"weights": weights, "length": int(length), "vertices": vertices},
        embed=gasket_embed,
        sweep_cls=_GasketSweep,
    )


class GenericSweep:
    """Fallback lockstep advancer driving ``step`` state by state.

    Slow but valid for any hand-built system; used when no dedicated
    sweep exists and by equivalence tests against the fast sweeps.
    """

    def __init__(self, system, states, rngs):
        self._system = system
        self._states = list(states)
        self._rngs = rngs
        self._t = 0

    def chunk(self, length: int) -> np.ndarray:
        system = self._system
        q = len(self._states)
        shape = (length, q) if system.dim == 1 else (length, q, system.dim)
        out = np.empty(shape)
        for i in range(length):
            for t, s in enumerate(self._states):
                out[i, t] = system.embed(s) if system.embed is not None else s
            try:
                self._states = [
                    _advance(system, s, self._rngs[t] if self._rngs else None)
                    for t, s in enumerate(self._states)]
            except DivergedOrbitError as err:
                raise DivergedOrbitError(
                    f"{system.name} orbit diverged at index {self._t + i + 1}: {err}",
                    state=err.state, index=self._t + i + 1) from err
        self._t += length
        return out


def make_sweep(system: MapSystem, states, rngs):
    cls = system.sweep_cls or GenericSweep
    return cls(system, states, rngs)


_SYSTEM_BUILDERS = {
    "doubling": lambda p: doubling_map(noise=p.get("noise", 0.0)),
    "henon": lambda p: henon_map(a=p.get("a", 1.4), b=p.get("b", 0.3),
                                 basin=p.get("basin", HENON_BASIN),
                                 burn_in=p.get("burn_in", HENON_BURN_IN)),
    "gasket": lambda p: sierpinski_gasket(
        weights=(p.get("p0", DEFAULT_GASKET_WEIGHTS[0]),
                 p.get("p1", DEFAULT_GASKET_WEIGHTS[1]),
                 p.get("p2", DEFAULT_GASKET_WEIGHTS[2])),
        length=p.get("L", DEFAULT_ADDRESS_LENGTH),
        vertices=p.get("vertices", DEFAULT_VERTICES)),
}


def make_system(name: str, params: dict | None = None) -> MapSystem:
    """Build a benchmark system by name: doubling, henon or gasket."""
    try:
        builder = _SYSTEM_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; expected one of "
                         f"{sorted(_SYSTEM_BUILDERS)}") from None
    return builder(dict(params or {}))
