"""Command-line entry point.

    hypersde <task> --config path.json [--out dir] [--seed n]

Prints one line of JSON to stdout and writes artifacts to the output
directory.  Exit status: 0 success, 1 configuration error, 2 math-domain
error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import algebra as alg_mod
from .errors import ConfigError, HyperSDEError, MathDomainError, NoIdentity, ParseError
from .reducibility import check_cp_system, check_reducible_scalar
from .sim import convergence_study, euler_maruyama, pathwise_error
from .solvers import (
    CONVENTIONS,
    LinearBaseCoeffs,
    LvCoeffs,
    expand_general_system,
    expand_linear_system,
    expand_lv_system,
    solve_linear_base,
    solve_linear_cp,
    solve_lv_base,
    solve_lv_cp,
    write_path_csv,
)
from .paths import sample_wiener_batch

log = logging.getLogger("hypersde")

TASKS = (
    "verify-algebra",
    "expand",
    "solve-linear",
    "solve-lv",
    "simulate",
    "compare",
    "convergence",
    "check-reducible",
    "check-cp",
)
STOCHASTIC = {"solve-linear", "solve-lv", "simulate", "compare", "convergence"}

EXIT_OK, EXIT_CONFIG, EXIT_MATH, EXIT_VALIDATION = 0, 1, 2, 3


class ValidationFailure(Exception):
    def __init__(self, summary):
        self.summary = summary
        super().__init__(summary.get("reason", "validation failed"))


# config access

class Config:
    def __init__(self, doc: dict, task: str, seed=None):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if "task" in doc and doc["task"] != task:
            raise ConfigError(f"config is for task {doc['task']!r}, not {task!r}")
        self.doc = doc
        self.task = task
        grid = doc.get("grid", {})
        if not isinstance(grid, dict):
            raise ConfigError("'grid' must be an object")
        self.grid = grid
        self.seed = seed if seed is not None else grid.get("seed", doc.get("seed"))
        if task in STOCHASTIC:
            if self.seed is None:
                raise ConfigError(f"task {task} needs a seed (config grid.seed or --seed)")
            if not isinstance(self.seed, int) or self.seed < 0:
                raise ConfigError("seed must be a non-negative integer")
        self.convention = doc.get("convention", "algebra")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        self.tol = doc.get("tolerances", {})

    def need(self, key, where=None):
        src = self.doc if where is None else where
        if key not in src:
            raise ConfigError(f"missing required field {key!r}")
        return src[key]

    def coeffs(self) -> dict:
        c = self.doc.get("coefficients")
        if not isinstance(c, dict):
            raise ConfigError("missing 'coefficients' object")
        return c

    def algebra(self):
        spec = self.need("algebra")
        try:
            if isinstance(spec, str):
                return alg_mod.make_algebra(spec)
            spec = dict(spec)
            if "table" in spec:
                return alg_mod.load_table(spec["table"])
            if "kind" in spec:
                kind = spec.pop("kind")
                if kind in ("product", "sum"):
                    return alg_mod.make_algebra(kind, factors=spec["factors"])
                return alg_mod.make_algebra(kind, **spec)
            return alg_mod.make_algebra(spec)
        except (KeyError, TypeError, ValueError, OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad algebra spec: {exc}") from exc

    def grid_params(self):
        try:
            T = float(self.grid.get("T", 1.0))
            steps = int(self.need("steps", self.grid))
            n_paths = int(self.grid.get("n_paths", 1))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid parameters: {exc}") from exc
        if T <= 0 or steps < 1 or n_paths < 1:
            raise ConfigError("grid needs T > 0, steps >= 1, n_paths >= 1")
        return T, steps, n_paths

    @property
    def workers(self) -> int:
        return int(self.doc.get("workers", 1))


def _vec(values, n, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have {n} components")
    return arr


def _model(cfg: Config, alg):
    """``(kind, system, closed_form, X0)`` from the coefficient block."""
    c = cfg.coeffs()
    kind = c.get("model", "lv" if "G" in c else "linear")
    n = alg.dim
    if kind == "linear":
        co = LinearBaseCoeffs.make(n, *(c.get(k, 0.0) for k in ("f1", "f2", "g1", "g2")))
        X0 = _vec(cfg.need("X0"), n, "X0")
        closed = lambda g: solve_linear_base(alg, co, X0, g, cfg.convention).states  # noqa: E731
        return kind, expand_linear_system(alg, co), closed, X0, co
    if kind == "lv":
        X0 = _vec(cfg.need("X0"), n, "X0")
        co = LvCoeffs(*(_vec(cfg.need(k, c), n, k) for k in ("a", "b", "G")), X0)
        closed = lambda g: solve_lv_base(alg, co, g, cfg.convention, on_singular="nan").states  # noqa: E731
        return kind, expand_lv_system(alg, co), closed, X0, co
    if kind == "general":
        m = c.get("m")
        system = expand_general_system(alg, cfg.need("a", c), cfg.need("b", c), m)
        X0 = _vec(cfg.need("X0"), n, "X0") if "X0" in cfg.doc else None
        return kind, system, None, X0, None
    raise ConfigError(f"unknown model {kind!r}")


# artifacts

def _fmt(x) -> str:
    return repr(float(x))


def write_svg(path, t, series, labels=None, width=640, height=360) -> None:
    """Minimal polyline chart, one line per column of ``series``."""
    t = np.asarray(t, dtype=float)
    Y = np.asarray(series, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    finite = Y[np.isfinite(Y)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] != t[0] else float(t[0]) + 1.0
    pad = 20
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for j in range(Y.shape[1]):
        pts = []
        for tk, yk in zip(t, Y[:, j]):
            if not np.isfinite(yk):
                continue
            x = pad + (tk - t0) / (t1 - t0) * (width - 2 * pad)
            y = height - pad - (yk - lo) / (hi - lo) * (height - 2 * pad)
            pts.append(f"{x:.2f},{y:.2f}")
        name = labels[j] if labels else f"X{j + 1}"
        lines.append(
            f'<polyline fill="none" stroke="{colors[j % len(colors)]}" stroke-width="1.2" '
            f'points="{" ".join(pts)}"><title>{name}</title></polyline>'
        )
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class Outputs:
    def __init__(self, root):
        self.root = root
        self.files = []
        os.makedirs(root, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.root, name)

    def json(self, name, doc):
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")

    def paths(self, prefix, t, states, limit=None):
        states = np.asarray(states)
        if states.ndim == 2:
            states = states[None]
        count = states.shape[0] if limit is None else min(limit, states.shape[0])
        for k in range(count):
            write_path_csv(self.path(f"{prefix}_path{k}.csv"), t, states[k])
        write_svg(self.path(f"{prefix}_path0.svg"), t, states[0])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# tasks

def task_verify_algebra(cfg: Config, out: Outputs) -> dict:
    spec = cfg.need("algebra")
    try:
        alg = cfg.algebra()
        report = alg_mod.verify_algebra(alg)
    except HyperSDEError as exc:
        if not isinstance(spec, dict) or not ("gamma" in spec or "table" in spec):
            raise
        if "table" in spec:
            with open(spec["table"]) as fh:
                spec = json.load(fh)
        gamma = np.asarray(spec["gamma"], dtype=float)
        try:
            ident = spec.get("identity")
            ident = alg_mod.solve_identity(gamma) if ident is None else np.asarray(ident, float)
        except NoIdentity:
            ident = np.zeros(gamma.shape[0])
        report = alg_mod._verify(gamma, ident, spec.get("label", "table"))
        log.info("table rejected: %s", exc)
    out.json("verification.json", report.to_dict())
    summary = {"label": report.label, "pass": report.passed}
    summary.update({c.name: c.residual for c in report.checks})
    if not report.passed:
        raise ValidationFailure(dict(summary, reason="axiom check failed"))
    return summary


def task_expand(cfg: Config, out: Outputs) -> dict:
    alg = cfg.algebra()
    kind, system, *_ = _model(cfg, alg)
    doc = dict(system.describe(), model=kind, algebra=alg.label)
    out.json("system.json", doc)
    return {"algebra": alg.label, "model": kind, "n": system.n, "m": system.m}


def _grid(cfg, m):
    T, steps, n_paths = cfg.grid_params()
    return sample_wiener_batch(m, T, steps, cfg.seed, range(n_paths), cfg.workers)


def _solve(cfg: Config, out: Outputs, kind_wanted: str) -> dict:
    alg = cfg.algebra()
    kind, system, closed, X0, co = _model(cfg, alg)
    if kind != kind_wanted:
        raise ConfigError(f"coefficients describe a {kind} model")
    grid = _grid(cfg, alg.dim)
    states = closed(grid)
    out.paths("closed", grid.t, states)
    summary = {"algebra": alg.label, "model": kind, "n_paths": grid.n_paths, "steps": grid.steps}
    if alg.kind == "Cp":
        if kind == "linear":
            X1, X2 = solve_linear_cp(alg.p, co, X0, grid, cfg.convention)
        else:
            X1, X2 = solve_lv_cp(alg.p, co.a, co.b, co.G, co.Z0, grid, cfg.convention, "nan")
        gap = np.nanmax(np.abs(np.stack([X1, X2], axis=-1) - states))
        summary["cp_projection_gap"] = float(gap)
    summary["terminal_mean"] = [float(v) for v in np.nanmean(states[:, -1, :], axis=0)]
    return summary


def task_solve_linear(cfg, out):
    return _solve(cfg, out, "linear")


def task_solve_lv(cfg, out):
    return _solve(cfg, out, "lv")


def task_simulate(cfg: Config, out: Outputs) -> dict:
    alg = cfg.algebra()
    kind, system, _, X0, _ = _model(cfg, alg)
    if X0 is None:
        raise ConfigError("missing required field 'X0'")
    grid = _grid(cfg, system.m)
    states = euler_maruyama(system, X0, grid, on_nonfinite="mask")
    out.paths("em", grid.t, states)
    return {
        "algebra": alg.label,
        "model": kind,
        "n_paths": grid.n_paths,
        "steps": grid.steps,
        "nonfinite_paths": int(np.sum(~np.all(np.isfinite(states), axis=(-1, -2)))),
    }


def task_compare(cfg: Config, out: Outputs) -> dict:
    alg = cfg.algebra()
    kind, system, closed, X0, _ = _model(cfg, alg)
    if closed is None:
        raise ConfigError("compare needs a linear or lv model")
    grid = _grid(cfg, alg.dim)
    exact = closed(grid)
    approx = euler_maruyama(system, X0, grid, on_nonfinite="mask")
    out.paths("closed", grid.t, exact)
    out.paths("em", grid.t, approx)
    end = pathwise_error(exact, approx, "endpoint")
    sup = pathwise_error(exact, approx, "sup")
    ok = np.isfinite(end) & np.isfinite(sup)
    tol = float(cfg.tol.get("compare", 0.1))
    summary = {
        "algebra": alg.label,
        "model": kind,
        "n_paths": grid.n_paths,
        "steps": grid.steps,
        "rms_endpoint_error": float(np.sqrt(np.mean(end[ok] ** 2))) if ok.any() else None,
        "max_sup_error": float(np.max(sup[ok])) if ok.any() else None,
        "excluded": int(np.sum(~ok)),
        "tolerance": tol,
    }
    with open(out.path("errors.csv"), "w") as fh:
        fh.write("path,endpoint_error,sup_error\n")
        for k in range(grid.n_paths):
            fh.write(f"{k},{_fmt(end[k])},{_fmt(sup[k])}\n")
    if not ok.any() or summary["max_sup_error"] > tol or summary["excluded"] > 0.05 * grid.n_paths:
        raise ValidationFailure(dict(summary, reason="closed form and Euler-Maruyama disagree"))
    return summary


def task_convergence(cfg: Config, out: Outputs) -> dict:
    alg = cfg.algebra()
    kind, system, closed, X0, _ = _model(cfg, alg)
    if closed is None:
        raise ConfigError("convergence needs a linear or lv model")
    study_cfg = cfg.doc.get("study", {})
    T = float(cfg.grid.get("T", 1.0))
    study = convergence_study(
        system,
        closed,
        X0,
        T,
        int(study_cfg.get("base_steps", 64)),
        int(study_cfg.get("levels", 5)),
        int(study_cfg.get("n_paths", cfg.grid.get("n_paths", 200))),
        cfg.seed,
        reference_factor=int(study_cfg.get("reference_factor", 16)),
        workers=cfg.workers,
    )
    study.to_csv(out.path("study.csv"))
    out.json("study.json", study.to_dict())
    write_svg(out.path("study.svg"), np.log2(study.dts), np.log2(study.rms_errors), ["log2 rms error"])
    lo, hi = cfg.tol.get("slope_range", [0.25, 0.75])
    summary = dict(study.to_dict(), algebra=alg.label, model=kind)
    if not study.valid or not lo <= study.slope <= hi:
        raise ValidationFailure(dict(summary, reason="strong order outside the accepted band"))
    return summary


def _sample_axis(spec, default):
    if spec is None:
        return default
    try:
        lo, hi, n = spec
        return np.linspace(float(lo), float(hi), int(n))
    except (TypeError, ValueError) as exc:
        raise ConfigError("sample axes are [lo, hi, count]") from exc


def task_check_reducible(cfg: Config, out: Outputs) -> dict:
    c = cfg.coeffs()
    samples = cfg.doc.get("samples", {})
    report = check_reducible_scalar(
        cfg.need("f", c),
        cfg.need("g", c),
        _sample_axis(samples.get("t"), np.linspace(0.0, 1.0, 9)),
        _sample_axis(samples.get("Z", samples.get("z")), np.linspace(0.5, 2.0, 9)),
        tol=float(cfg.tol.get("reducibility", 1e-9)),
        kappa=float(c.get("kappa", 1.0)),
    )
    out.json("reducibility.json", report.to_dict())
    return report.to_dict()


def task_check_cp(cfg: Config, out: Outputs) -> dict:
    c = cfg.coeffs()
    samples = cfg.doc.get("samples", {})
    grid = (
        _sample_axis(samples.get("t"), np.linspace(0.0, 1.0, 9)),
        _sample_axis(samples.get("X"), np.linspace(0.5, 1.5, 9)),
        _sample_axis(samples.get("Y"), np.linspace(0.1, 0.6, 9)),
    )
    p = float(c["p"]) if "p" in c else float(cfg.need("algebra").get("p"))
    report = check_cp_system(
        p,
        *(c.get(k, "0") for k in ("f1", "f2", "g1", "g2")),
        grid=grid,
        tol=float(cfg.tol.get("reducibility", 1e-7)),
        convention=cfg.convention,
    )
    out.json("reducibility.json", report.to_dict())
    return report.to_dict()


HANDLERS = {
    "verify-algebra": task_verify_algebra,
    "expand": task_expand,
    "solve-linear": task_solve_linear,
    "solve-lv": task_solve_lv,
    "simulate": task_simulate,
    "compare": task_compare,
    "convergence": task_convergence,
    "check-reducible": task_check_reducible,
    "check-cp": task_check_cp,
}


def run(task: str, doc: dict, out_dir: str, seed=None) -> tuple:
    """Execute one task; returns ``(exit_status, summary)``."""
    summary = {"task": task}
    try:
        cfg = Config(doc, task, seed)
        out = Outputs(out_dir)
        result = HANDLERS[task](cfg, out)
        summary.update(status="ok", **result)
        summary["files"] = sorted(set(out.files))
        status = EXIT_OK
    except ValidationFailure as exc:
        summary.update(status="validation_failure", **exc.summary)
        status = EXIT_VALIDATION
    except MathDomainError as exc:
        summary.update(status="math_domain_error", error=type(exc).__name__, message=str(exc))
        status = EXIT_MATH
    except (ConfigError, ParseError, KeyError, TypeError, ValueError, OSError) as exc:
        summary.update(status="config_error", error=type(exc).__name__, message=str(exc))
        status = EXIT_CONFIG
    except HyperSDEError as exc:
        summary.update(status="config_error", error=type(exc).__name__, message=str(exc))
        status = EXIT_CONFIG
    summary["exit"] = status
    return status, summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hypersde", description=__doc__.splitlines()[0])
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: config 'out' or ./out)")
    parser.add_argument("--seed", type=int, default=None, help="override the grid seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"task": args.task, "status": "config_error", "message": str(exc), "exit": 1}))
        return EXIT_CONFIG
    out_dir = args.out or (doc.get("out") if isinstance(doc, dict) else None) or "out"
    status, summary = run(args.task, doc, out_dir, args.seed)
    print(json.dumps(summary, sort_keys=True, default=_json_default, allow_nan=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
