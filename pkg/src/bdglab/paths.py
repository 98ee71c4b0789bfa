"""Time grids and reproducible batches of d-dimensional Brownian paths.

Randomness is counter-based: the increments of path ``i`` are a pure function
of ``(master_seed, stream, i)``, so a batch is bit-identical however the path
indices are split across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import InvalidArgument

__all__ = [
    "TimeGrid",
    "SeedSpec",
    "BrownianBatch",
    "make_uniform_grid",
    "simulate_brownian",
    "path_values",
    "brownian_sup_abs",
]

# paths per work item; fixed so that block boundaries never depend on workers
PATH_BLOCK = 4096
STREAM_LAYOUT = "philox4x32-10:counter=(pair,stream,path_lo,path_hi):key=seed"


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Partition ``0 = t_0 < t_1 < ... < t_N = T`` of a finite horizon."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgument("a time grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgument("grid nodes must be finite")
        if nodes[0] != 0.0:
            raise InvalidArgument("the first grid node must be exactly 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise InvalidArgument("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def dt(self) -> np.ndarray:
        dt = np.diff(self.nodes)
        dt.setflags(write=False)
        return dt

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())

    def __repr__(self):
        return f"TimeGrid(horizon={self.horizon!r}, steps={self.steps})"


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream tag selecting an independent family of paths."""

    master_seed: int
    stream: int = 0
    layout: str = STREAM_LAYOUT

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidArgument("master_seed must be a 64-bit unsigned integer")
        if not 0 <= int(self.stream) < 2**32:
            raise InvalidArgument("stream must be a 32-bit unsigned integer")
        if self.layout != STREAM_LAYOUT:
            raise InvalidArgument(f"unsupported stream layout {self.layout!r}")


@dataclass(frozen=True, eq=False)
class BrownianBatch:
    """Increments ``dB[path, step, dim]`` on a grid; levels are derived lazily.

    ``first_path`` is the global index of row 0, so a batch can be one block of
    a larger ensemble drawn from the same seed.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: SeedSpec | None = None
    first_path: int = 0
    _levels: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.ndim != 3 or inc.shape[1] != self.grid.steps:
            raise InvalidArgument(
                f"increments must have shape (paths, {self.grid.steps}, dims), got {inc.shape}"
            )
        if inc.shape[0] < 1 or inc.shape[2] < 1:
            raise InvalidArgument("a batch needs at least one path and one dimension")
        if inc.flags.writeable:
            inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def paths(self) -> int:
        return self.increments.shape[0]

    @property
    def dims(self) -> int:
        return self.increments.shape[2]

    @property
    def levels(self) -> np.ndarray:
        """B at every node, shape ``(paths, N + 1, dims)``, with ``B_0 = 0``."""
        if self._levels is None:
            lv = np.zeros((self.paths, self.grid.steps + 1, self.dims))
            np.cumsum(self.increments, axis=1, out=lv[:, 1:, :])
            lv.setflags(write=False)
            object.__setattr__(self, "_levels", lv)
        return self._levels

    def terminal(self) -> np.ndarray:
        """B_T per path, shape ``(paths, dims)``."""
        return self.levels[:, -1, :]


def make_uniform_grid(horizon: float, steps: int) -> TimeGrid:
    """Uniform partition of ``[0, horizon]`` into ``steps`` intervals."""
    if not np.isfinite(horizon) or horizon <= 0:
        raise InvalidArgument(f"horizon must be positive and finite, got {horizon!r}")
    if int(steps) != steps or steps < 1:
        raise InvalidArgument(f"steps must be a positive integer, got {steps!r}")
    nodes = horizon * (np.arange(int(steps) + 1) / int(steps))
    nodes[-1] = horizon
    return TimeGrid(nodes)


def _blocks(count: int):
    return [(a, min(a + PATH_BLOCK, count)) for a in range(0, count, PATH_BLOCK)]


def _run_blocks(fn, blocks, workers: int):
    if workers <= 1 or len(blocks) <= 1:
        for a, b in blocks:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # list() re-raises worker exceptions
        list(pool.map(lambda ab: fn(*ab), blocks))


def simulate_brownian(
    grid: TimeGrid,
    dims: int,
    paths: int,
    seed: SeedSpec,
    *,
    first_path: int = 0,
    workers: int = 1,
) -> BrownianBatch:
    """Draw ``paths`` Brownian paths on ``grid``.

    Path ``first_path + r`` of the ensemble lands in row ``r``; its increments
    use normals ``step * dims + k`` of its own counter stream, scaled by
    ``sqrt(dt[step])``.
    """
    if int(dims) != dims or dims < 1:
        raise InvalidArgument(f"dims must be a positive integer, got {dims!r}")
    if int(paths) != paths or paths < 1:
        raise InvalidArgument(f"paths must be a positive integer, got {paths!r}")
    if first_path < 0:
        raise InvalidArgument("first_path must be nonnegative")
    dims, paths = int(dims), int(paths)
    count = grid.steps * dims
    normals = np.empty((paths, count))

    def fill(a, b):
        normals[a:b] = kernels.standard_normals(
            seed.master_seed, seed.stream, first_path + a, b - a, count
        )

    _run_blocks(fill, _blocks(paths), workers)
    sqrt_dt = np.sqrt(grid.dt)
    inc = normals.reshape(paths, grid.steps, dims)
    inc *= sqrt_dt[None, :, None]
    inc.setflags(write=False)
    return BrownianBatch(grid, inc, seed, first_path)


def path_values(batch: BrownianBatch, path: int) -> np.ndarray:
    """Levels of B along one path, shape ``(N + 1, dims)``."""
    if int(path) != path or not 0 <= path < batch.paths:
        raise InvalidArgument(f"path index {path!r} outside [0, {batch.paths})")
    out = np.zeros((batch.grid.steps + 1, batch.dims))
    np.cumsum(batch.increments[int(path)], axis=0, out=out[1:])
    return out


def brownian_sup_abs(
    grid: TimeGrid,
    dims: int,
    paths: int,
    seed: SeedSpec,
    *,
    first_path: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """``max_i |B_{t_i}|`` per path without storing the batch.

    Streams the same increments ``simulate_brownian`` would produce, so it is
    the direct-simulation route for fine grids that do not fit in memory.
    """
    if paths < 1 or dims < 1:
        raise InvalidArgument("paths and dims must be positive")
    out = np.empty(int(paths))
    sqrt_dt = np.ascontiguousarray(np.sqrt(grid.dt))

    def fill(a, b):
        out[a:b] = kernels.brownian_sup_abs(
            seed.master_seed, seed.stream, first_path + a, b - a, sqrt_dt, dims
        )

    _run_blocks(fill, _blocks(int(paths)), workers)
    return out
