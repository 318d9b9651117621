"""Euler-Maruyama on shared Wiener grids and strong-convergence studies."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NonFinite
from .paths import WienerGrid, coarsen, sample_wiener_batch
from .solvers import SdeSystemSpec

log = logging.getLogger(__name__)

MAX_EXCLUDED = 0.05


def euler_maruyama(system: SdeSystemSpec, X0, grid: WienerGrid, on_nonfinite: str = "raise") -> np.ndarray:
    """``X_{k+1} = X_k + a(t_k, X_k) dt + b(t_k, X_k) dW_k``.

    Returns ``(steps+1, n)`` for a single path or ``(P, steps+1, n)`` for a
    batch.  With ``on_nonfinite="mask"`` a path that overflows is filled
    with NaN from that step on instead of raising :class:`NonFinite`.
    """
    if grid.m != system.m:
        raise ValueError(f"grid has {grid.m} Wiener components, system needs {system.m}")
    if on_nonfinite not in ("raise", "mask"):
        raise ValueError("on_nonfinite must be 'raise' or 'mask'")
    lead = (grid.n_paths,) if grid.batched else ()
    X = np.broadcast_to(np.asarray(X0, dtype=float), lead + (system.n,)).copy()
    out = np.empty(lead + (grid.steps + 1, system.n))
    out[..., 0, :] = X
    dt = grid.dt
    dead = np.zeros(lead, dtype=bool)
    for k in range(grid.steps):
        t = float(grid.t[k])
        dW = grid.increments[..., k]
        with np.errstate(all="ignore"):
            X = X + system.drift(t, X) * dt + np.einsum("...ij,...j->...i", system.diffusion(t, X), dW)
        bad = ~np.all(np.isfinite(X), axis=-1)
        if np.any(bad & ~dead):
            if on_nonfinite == "raise":
                raise NonFinite(f"Euler-Maruyama produced a non-finite state at step {k + 1}", step=k + 1)
            dead = dead | bad
            X = np.where(dead[..., None], np.nan, X)
        out[..., k + 1, :] = X
    return out


def pathwise_error(exact, approx, mode: str = "endpoint"):
    """Endpoint or sup-over-grid absolute error, Euclidean across components.

    Paths are ``(..., steps+1, n)``; leading axes are kept.
    """
    exact = np.asarray(exact, dtype=float)
    approx = np.asarray(approx, dtype=float)
    if exact.shape != approx.shape:
        raise ValueError(f"shape mismatch: {exact.shape} vs {approx.shape}")
    diff = np.abs(exact - approx)
    if mode == "endpoint":
        return np.linalg.norm(diff[..., -1, :], axis=-1)
    if mode == "sup":
        return np.linalg.norm(diff.max(axis=-2), axis=-1)
    raise ValueError(f"mode must be 'endpoint' or 'sup', got {mode!r}")


@dataclass
class ConvergenceStudy:
    levels: list  # steps per level, increasing
    dts: list
    rms_errors: list
    slope: float
    intercept: float
    n_paths: int
    seed: int
    excluded: int
    reference_steps: int

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / self.n_paths if self.n_paths else 0.0

    @property
    def valid(self) -> bool:
        return self.excluded_fraction <= MAX_EXCLUDED

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "dt": list(self.dts),
            "rms_error": list(self.rms_errors),
            "slope": self.slope,
            "intercept": self.intercept,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "exclusions": self.excluded,
            "reference_steps": self.reference_steps,
            "valid": self.valid,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "dt", "rms_error"])
            for L, dt, e in zip(self.levels, self.dts, self.rms_errors):
                w.writerow([L, repr(float(dt)), repr(float(e))])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _chunk_errors(system, closed_form, X0, grid, levels, reference_factor):
    """Endpoint errors ``(len(levels), P)`` for one batch of paths."""
    with np.errstate(all="ignore"):
        exact = np.asarray(closed_form(grid), dtype=float)
    exact_T = exact[..., -1, :]
    errs = []
    for steps in levels:
        coarse = coarsen(grid, grid.steps // steps)
        approx = euler_maruyama(system, X0, coarse, on_nonfinite="mask")
        errs.append(np.linalg.norm(approx[..., -1, :] - exact_T, axis=-1))
    return np.array(errs)


def convergence_study(
    system: SdeSystemSpec,
    closed_form: Callable[[WienerGrid], np.ndarray],
    X0,
    T: float,
    base_steps: int,
    levels: int,
    n_paths: int,
    seed: int,
    reference_factor: int = 16,
    workers: int = 1,
    chunk: int = 50,
) -> ConvergenceStudy:
    """Strong-error study on ``levels`` dyadic grids ``base_steps * 2^l``.

    Each path is sampled once on a reference grid ``reference_factor``
    times finer than the finest level; every EM level uses its coarsened
    increments and is compared at ``T`` against ``closed_form`` evaluated
    on the reference grid.  ``closed_form(grid)`` returns
    ``(P, steps+1, n)``.  Paths with non-finite EM or closed-form values
    are excluded and counted.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    steps = [base_steps * 2**l for l in range(levels)]
    ref_steps = steps[-1] * reference_factor
    ids = list(range(n_paths))
    chunks = [ids[i : i + chunk] for i in range(0, n_paths, chunk)]

    def job(pids):
        grid = sample_wiener_batch(system.m, T, ref_steps, seed, pids)
        return _chunk_errors(system, closed_form, X0, grid, steps, reference_factor)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    errs = np.concatenate(parts, axis=1) if parts else np.zeros((levels, 0))
    ok = np.all(np.isfinite(errs), axis=0)
    excluded = int(np.sum(~ok))
    if excluded:
        log.warning("excluded %d of %d paths with non-finite values", excluded, n_paths)
    rms = np.sqrt(np.mean(errs[:, ok] ** 2, axis=1))
    dts = [T / s for s in steps]
    slope, intercept = np.polyfit(np.log2(dts), np.log2(rms), 1)
    return ConvergenceStudy(
        steps, dts, [float(e) for e in rms], float(slope), float(intercept),
        n_paths, seed, excluded, ref_steps,
    )
