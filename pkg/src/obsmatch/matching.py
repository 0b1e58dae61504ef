"""The matching process between observed trajectories and its reductions.

Y_i is minus the log of the largest distance, at time i, between the
observation of a reference trajectory and q-1 further independent
trajectories.  Large values mean all q observations nearly coincide; the
exceedance event {Y_i > u} is the hit of the shrinking target set where
every observation lies in the same small ball.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dynamics import MapSystem, make_sweep, sample_initial, trajectory_rng
from .errors import DataQualityError, InsufficientTailError
from .observables import Observable

CHUNK = 65536
# Substitute for a non-finite distance: effectively "infinitely far", the
# step can never become an exceedance or a block maximum.
_BAD_DISTANCE = 1e300

METRICS = ("sup", "euclidean")

_MAGIC = b"OBSMATCH"
_DUMP_VERSION = 1


@dataclass(frozen=True)
class MatchConfig:
    """Parameters of one matching experiment cell."""

    q: int
    n_total: int
    block_size: int = 50_000
    metric: str = "sup"
    floor: float = 1e-300

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be >= 2 (one reference plus at least one trajectory)")
        if self.n_total < 1:
            raise ValueError("n_total must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if not self.floor > 0:
            raise ValueError("floor must be > 0")


@dataclass(frozen=True)
class MatchSeries:
    """The process Y_i with its configuration and stream provenance."""

    values: np.ndarray
    config: MatchConfig
    seed: int
    subseeds: tuple = ()

    def __post_init__(self):
        if len(self.values) != self.config.n_total:
            raise ValueError("series length does not equal n_total")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")

    def __len__(self):
        return len(self.values)


def _series_values(series) -> np.ndarray:
    values = getattr(series, "values", series)
    return np.asarray(values, dtype=float)


def match_values(observations, metric: str = "sup", floor: float = 1e-300) -> np.ndarray:
    """Y from lockstep observations of shape (n, q) or (n, q, m).

    Trajectory 1 (column 0) is the reference; the definition is asymmetric
    in it and symmetric in the others.
    """
    y, _ = _match_chunk(np.asarray(observations, dtype=float), metric, floor)
    return y


def _match_chunk(obs: np.ndarray, metric: str, floor: float):
    diff = obs[:, 1:] - obs[:, :1]
    if obs.ndim == 2:
        dist = np.abs(diff)
    elif metric == "sup":
        dist = np.abs(diff).max(axis=2)
    else:
        dist = np.sqrt((diff * diff).sum(axis=2))
    dmax = dist.max(axis=1)
    bad = ~np.isfinite(dmax)
    nbad = int(bad.sum())
    if nbad:
        dmax = np.where(bad, _BAD_DISTANCE, dmax)
    return -np.log(np.maximum(dmax, floor)), nbad


def y_process(system: MapSystem, obs: Observable, cfg: MatchConfig, seed: int,
              chunk: int = CHUNK) -> MatchSeries:
    """Generate the matching process from q independent trajectories.

    Orbits advance in lockstep and are reduced chunk by chunk: memory use
    is O(q * chunk), not O(n_total).  Distances below ``cfg.floor`` are
    clamped so the series stays finite.
    """
    if obs.in_dim not in (0, system.dim):
        raise ValueError(
            f"observable {obs.name} expects {obs.in_dim}-dimensional states, "
            f"system {system.name} has dimension {system.dim}")
    rngs = [trajectory_rng(seed, t) for t in range(cfg.q)]
    states = [sample_initial(system, rngs[t]) for t in range(cfg.q)]
    sweep = make_sweep(system, states, rngs)

    values = np.empty(cfg.n_total)
    bad = 0
    done = 0
    while done < cfg.n_total:
        c = min(chunk, cfg.n_total - done)
        batch = obs.eval_batch(sweep.chunk(c))
        y, nbad = _match_chunk(np.asarray(batch, dtype=float), cfg.metric, cfg.floor)
        values[done:done + c] = y
        bad += nbad
        done += c
    if bad > 1e-6 * cfg.n_total:
        raise DataQualityError(
            f"{bad} of {cfg.n_total} steps produced non-finite observations "
            f"({bad / cfg.n_total:.2e} > 1e-06)")
    return MatchSeries(values=values, config=cfg, seed=int(seed),
                       subseeds=tuple((int(seed), t) for t in range(cfg.q)))


def block_maxima(series) -> np.ndarray:
    """Maxima over consecutive disjoint blocks; a trailing partial block is dropped."""
    values = _series_values(series)
    size = series.config.block_size if isinstance(series, MatchSeries) else None
    if size is None:
        raise TypeError("block_maxima needs a MatchSeries; use block_maxima_of for raw arrays")
    return block_maxima_of(values, size)


def block_maxima_of(values, block_size: int) -> np.ndarray:
    values = _series_values(values)
    if len(values) < block_size:
        raise ValueError(
            f"series of length {len(values)} is shorter than one block ({block_size})")
    nblocks = len(values) // block_size
    return values[:nblocks * block_size].reshape(nblocks, block_size).max(axis=1)


def threshold_for_quantile(series, p: float) -> float:
    """Empirical p-quantile (order statistic, lower interpolation)."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    values = _series_values(series)
    if len(values) < 1.0 / (1.0 - p):
        raise InsufficientTailError(
            f"{len(values)} samples cannot resolve the {p} quantile "
            f"(need at least {1.0 / (1.0 - p):.0f})")
    return float(np.quantile(values, p, method="lower"))


def u_n_schedule(n: int, s: float, dq: float, q: int) -> float:
    """Threshold scaling u_n(s) = (log n + s) / (dq (q - 1))."""
    if dq <= 0:
        raise ValueError("dq must be > 0")
    if q < 2:
        raise ValueError("q must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (np.log(n) + s) / (dq * (q - 1))


def save_values(values, path) -> None:
    """Raw dump: 'OBSMATCH' magic, u32 version, u64 length, little-endian f64."""
    values = _series_values(values)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", _DUMP_VERSION, len(values)))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def load_values(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, length = struct.unpack("<IQ", fh.read(12))
        if version != _DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        data = np.frombuffer(fh.read(8 * length), dtype="<f8")
        if data.size != length:
            raise ValueError(f"{path}: truncated dump ({data.size} of {length} values)")
    return data.astype(float)
