"""Reproducible Wiener paths on uniform grids.

Increments come from the Philox4x64 counter-based generator (numpy's
``Philox``) keyed by ``(seed, path_id)``.  Component ``j`` owns the
counter range whose top word equals ``j``; counter block ``b`` yields four
64-bit words which Box-Muller turns into the standard normals for steps
``4b .. 4b+3``.  Any single increment can therefore be regenerated from
``(seed, path_id, component, step)`` alone, and batches are independent
of how paths are distributed over workers.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.random import Philox

from .errors import IndivisibleFactor

_U53 = 2.0**-53


def _uniform(raw: np.ndarray) -> np.ndarray:
    # open interval (0, 1)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def _normals_from_raw(raw: np.ndarray) -> np.ndarray:
    """Box-Muller on consecutive word pairs; 4 words -> 4 normals."""
    u = _uniform(raw).reshape(-1, 2)
    r = np.sqrt(-2.0 * np.log(u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).reshape(-1)


def _bitgen(seed: int, path_id: int, component: int, block: int = 0) -> Philox:
    return Philox(key=[seed, path_id], counter=[block, 0, 0, component])


def standard_normals(seed: int, path_id: int, component: int, count: int) -> np.ndarray:
    nblocks = -(-count // 4)
    raw = _bitgen(seed, path_id, component).random_raw(4 * nblocks)
    return _normals_from_raw(raw)[:count]


def standard_normal_at(seed: int, path_id: int, component: int, step: int) -> float:
    """The single normal behind increment ``step`` of ``component``."""
    block, offset = divmod(step, 4)
    raw = _bitgen(seed, path_id, component, block).random_raw(4)
    return float(_normals_from_raw(raw)[offset])


@dataclass(frozen=True, eq=False)
class WienerGrid:
    """``m`` Wiener components on ``steps`` uniform intervals of ``[0, T]``.

    ``W`` has shape ``(m, steps+1)`` for one path or ``(P, m, steps+1)`` for
    a batch; ``increments`` is one shorter along the last axis.
    """

    T: float
    steps: int
    t: np.ndarray
    W: np.ndarray
    increments: np.ndarray
    seed: int
    path_id: Union[int, tuple]

    @property
    def m(self) -> int:
        return self.W.shape[-2]

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def batched(self) -> bool:
        return self.W.ndim == 3

    @property
    def n_paths(self) -> int:
        return self.W.shape[0] if self.batched else 1

    def path(self, k: int) -> "WienerGrid":
        if not self.batched:
            raise ValueError("grid holds a single path")
        return WienerGrid(
            self.T, self.steps, self.t, self.W[k], self.increments[k], self.seed, self.path_id[k]
        )

    def to_csv(self, path) -> None:
        if self.batched:
            raise ValueError("CSV export is per path; select one with .path(k)")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"W{j + 1}" for j in range(self.m)])
            for k in range(self.steps + 1):
                w.writerow([repr(float(self.t[k]))] + [repr(float(x)) for x in self.W[:, k]])


def _sample_increments(m, steps, dt, seed, path_id):
    scale = np.sqrt(dt)
    return np.stack([standard_normals(seed, path_id, j, steps) * scale for j in range(m)])


def _assemble(T, steps, incr, seed, path_id):
    W = np.concatenate([np.zeros(incr.shape[:-1] + (1,)), np.cumsum(incr, axis=-1)], axis=-1)
    t = np.arange(steps + 1) * (T / steps)
    t[-1] = T
    for a in (t, W, incr):
        a.setflags(write=False)
    return WienerGrid(float(T), int(steps), t, W, incr, seed, path_id)


def sample_wiener(m: int, T: float, steps: int, seed: int, path_id: int = 0) -> WienerGrid:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    incr = _sample_increments(m, steps, T / steps, seed, path_id)
    return _assemble(T, steps, incr, seed, path_id)


def sample_wiener_batch(
    m: int, T: float, steps: int, seed: int, path_ids: Sequence[int], workers: int = 1
) -> WienerGrid:
    """Stack of independent paths; bit-identical for any ``workers``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    path_ids = [int(i) for i in path_ids]
    dt = T / steps
    job = lambda pid: _sample_increments(m, steps, dt, seed, pid)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, path_ids))
    else:
        parts = [job(pid) for pid in path_ids]
    incr = np.stack(parts) if parts else np.zeros((0, m, steps))
    return _assemble(T, steps, incr, seed, tuple(path_ids))


def coarsen(grid: WienerGrid, factor: int) -> WienerGrid:
    """Restriction to every ``factor``-th node; the same Brownian path."""
    if factor < 1 or grid.steps % factor:
        raise IndivisibleFactor(f"factor {factor} does not divide steps={grid.steps}")
    if factor == 1:
        return grid
    W = np.ascontiguousarray(grid.W[..., ::factor])
    incr = np.diff(W, axis=-1)
    t = np.ascontiguousarray(grid.t[::factor])
    for a in (t, W, incr):
        a.setflags(write=False)
    return WienerGrid(grid.T, grid.steps // factor, t, W, incr, grid.seed, grid.path_id)


def _check_len(samples, grid):
    n = samples.shape[-1]
    if n not in (grid.steps, grid.steps + 1):
        raise ValueError(f"integrand has {n} samples along time, grid has {grid.steps + 1} nodes")
    return samples[..., : grid.steps]


def ito_integral(samples, grid: WienerGrid, j: int) -> np.ndarray:
    """Cumulative left-point sums ``sum_{l<k} f(t_l) dW_j(t_l)``.

    Time is the last axis of ``samples``; leading axes broadcast against
    the grid's path axis.  Output has ``steps + 1`` nodes and starts at 0.
    """
    f = _check_len(np.asarray(samples, dtype=float), grid)
    dW = grid.increments[..., j, :]
    acc = np.cumsum(f * dW, axis=-1)
    return np.concatenate([np.zeros(acc.shape[:-1] + (1,)), acc], axis=-1)


def lebesgue_integral(samples, grid: WienerGrid, rule: str = "trapezoid") -> np.ndarray:
    """Cumulative ``int_0^{t_k} f(s) ds`` on the grid nodes.

    ``rule="left"`` uses left-point sums; the default trapezoid rule needs
    samples at all ``steps + 1`` nodes.
    """
    f = np.asarray(samples, dtype=float)
    if rule == "left":
        f = _check_len(f, grid)
        acc = np.cumsum(f, axis=-1) * grid.dt
    elif rule == "trapezoid":
        if f.shape[-1] != grid.steps + 1:
            raise ValueError("trapezoid rule needs samples at every grid node")
        acc = np.cumsum(0.5 * (f[..., 1:] + f[..., :-1]), axis=-1) * grid.dt
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return np.concatenate([np.zeros(acc.shape[:-1] + (1,)), acc], axis=-1)
