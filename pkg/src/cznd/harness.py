"""Batch experiments: seeded runs, gain sweeps, model comparisons, CSV output.

Initial states come from numpy's PCG64 generator.  ``SeedSequence(seed)``
is spawned into one child stream per run index, so run ``k`` starts from
the same ``X0`` whatever the model or gain.  All CSV files use LF line
endings and 17 significant digits, which round-trips float64 exactly.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CzndError, IntegratorError, NumericalFailure, UsageError
from .models import MODEL_NAMES, Gain, build_model, flatten_state, lift_state
from .ode import IntegratorConfig, IntegratorStats, Trajectory, integrate
from .problem import TvsscmeProblem, load_problem, uniqueness

log = logging.getLogger(__name__)

PROBE_TAU = 2.0
LOG_FLOOR = 1e-300


@dataclass
class ExperimentSpec:
    problem: str = "example3"
    model: str = "con-cznd1-conj"
    gamma: Gain = field(default_factory=lambda: Gain(10.0))
    span: tuple[float, float] = (0.0, 10.0)
    runs: int = 8
    init_range: float = 5.0
    seed: int = 0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise UsageError("runs must be >= 1")
        if not self.init_range > 0:
            raise UsageError("init_range must be > 0")
        if self.model not in MODEL_NAMES:
            raise UsageError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_NAMES)}")
        if not self.span[1] > self.span[0]:
            raise UsageError(f"span must be increasing, got {self.span}")


@dataclass
class RunResult:
    index: int
    x0: np.ndarray
    trajectory: Trajectory | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.trajectory is not None


@dataclass
class RunReport:
    model: str
    gamma: Gain
    results: list[RunResult]

    def _per_run(self, fn) -> np.ndarray:
        return np.array([fn(r.trajectory) if r.ok else np.nan for r in self.results])

    @property
    def final_residuals(self) -> np.ndarray:
        return self._per_run(lambda t: t.final_residual)

    @property
    def residuals_at_probe(self) -> np.ndarray:
        return self._per_run(lambda t: t.residual_at(PROBE_TAU))

    @property
    def cond_min(self) -> np.ndarray:
        return self._per_run(lambda t: float(np.min(t.cond_estimates)))

    @property
    def cond_max(self) -> np.ndarray:
        return self._per_run(lambda t: float(np.max(t.cond_estimates)))

    @property
    def failures(self) -> int:
        return sum(not r.ok for r in self.results)

    def median(self, values: np.ndarray) -> float:
        ok = values[~np.isnan(values)]
        return float(np.median(ok)) if ok.size else float("nan")

    @property
    def median_final_residual(self) -> float:
        return self.median(self.final_residuals)

    @property
    def median_residual_at_probe(self) -> float:
        return self.median(self.residuals_at_probe)


# -- core ---------------------------------------------------------------------------


def initial_states(seed: int, runs: int, dim: int, init_range: float) -> np.ndarray:
    """One ``X0`` per run, uniform in ``[-init_range, init_range]``."""
    children = np.random.SeedSequence(seed).spawn(runs)
    return np.array([np.random.Generator(np.random.PCG64(c)).uniform(-init_range, init_range, dim) for c in children])


def residual_function(p: TvsscmeProblem):
    """``|X_R - X_R*|_F`` when the exact solution is known, else ``|X F - A conj(X) - C|_F``."""
    if p.exact is not None:

        def residual(tau, x):
            return float(np.linalg.norm(x - flatten_state(p.exact.value(tau))))

    else:

        def residual(tau, x):
            return float(np.linalg.norm(p.residual_matrix(tau, lift_state(x, p.m, p.n))))

    return residual


def _one_run(problem, model: str, gamma: Gain, index: int, x0, span, cfg) -> RunResult:
    p = problem if isinstance(problem, TvsscmeProblem) else load_problem(problem)
    system = build_model(model, p, gamma)
    try:
        traj = integrate(system, x0, span, cfg, residual_function(p))
    except (IntegratorError, NumericalFailure) as exc:
        return RunResult(index, x0, error=f"{type(exc).__name__}: {exc}")
    return RunResult(index, x0, traj)


def _batch(spec: ExperimentSpec, model: str, gamma: Gain, problem=None) -> RunReport:
    p = problem if problem is not None else load_problem(spec.problem)
    # fail fast on configuration errors before spawning work
    build_model(model, p, gamma)
    x0s = initial_states(spec.seed, spec.runs, p.dim, spec.init_range)
    args = [(spec.problem, model, gamma, k, x0s[k], spec.span, spec.integrator) for k in range(spec.runs)]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_one_run, *zip(*args)))
    else:
        results = [_one_run(p, *a[1:]) for a in args]
    return RunReport(model, gamma, results)


def _warn_uniqueness(p: TvsscmeProblem, span):
    rep = uniqueness(p, np.linspace(span[0], span[1], 1001))
    if not rep.unique:
        log.warning(
            "uniqueness check failed on the grid (min eigen gap %.3g, min |det W_R| %.3g); continuing",
            rep.min_eigen_gap,
            rep.min_abs_det,
        )
    return rep


def run(spec: ExperimentSpec) -> RunReport:
    """Integrate ``spec.runs`` seeded initial states and write per-run and aggregate CSVs."""
    p = load_problem(spec.problem)
    _warn_uniqueness(p, spec.span)
    report = _batch(spec, spec.model, spec.gamma, p)
    if spec.out:
        write_run_outputs(spec, report, p)
    return report


@dataclass
class SweepResult:
    taus: np.ndarray
    reports: dict[str, RunReport]


def gamma_sweep(spec: ExperimentSpec, gammas: Sequence[Gain]) -> SweepResult:
    """Same seeded initial states for every gain; wide CSV of residuals per (run, gain)."""
    if not gammas:
        raise UsageError("gamma sweep needs at least one gain")
    p = load_problem(spec.problem)
    reports = {}
    for g in gammas:
        reports[str(g)] = _batch(spec, spec.model, g, p)
    taus = _common_taus(spec)
    result = SweepResult(taus, reports)
    if spec.out:
        cols = {}
        for label, rep in reports.items():
            for r in rep.results:
                cols[f"run{r.index + 1:02d}_gamma_{label}"] = _residual_column(r, taus.size)
        _write_wide_csv(f"{spec.out}_sweep.csv", taus, cols)
        _write_text(f"{spec.out}_sweep.txt", format_sweep(spec, result))
    return result


@dataclass
class ComparisonResult:
    taus: np.ndarray
    reports: dict[str, RunReport]

    def difference(self, model: str, base: str, run: int) -> np.ndarray:
        """Per-sample residual difference ``model - base`` for one run index."""
        a = self.reports[model].results[run]
        b = self.reports[base].results[run]
        return _residual_column(a, self.taus.size) - _residual_column(b, self.taus.size)


def compare_models(spec: ExperimentSpec, models: Sequence[str]) -> ComparisonResult:
    """Run several models from shared initial states and emit log10 residual columns."""
    if not models:
        raise UsageError("compare needs at least one model")
    for name in models:
        if name not in MODEL_NAMES:
            raise UsageError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    if len(models) == 1:
        rep = run(replace(spec, model=models[0]))
        return ComparisonResult(_common_taus(spec), {models[0]: rep})
    p = load_problem(spec.problem)
    _warn_uniqueness(p, spec.span)
    reports = {name: _batch(spec, name, spec.gamma, p) for name in models}
    result = ComparisonResult(_common_taus(spec), reports)
    if spec.out:
        n = result.taus.size
        cols = {}
        for name, rep in reports.items():
            for r in rep.results:
                cols[f"log10_{name}_run{r.index + 1:02d}"] = _log10(_residual_column(r, n))
        base = models[0]
        for name in models[1:]:
            for k in range(spec.runs):
                cols[f"diff_{name}_vs_{base}_run{k + 1:02d}"] = result.difference(name, base, k)
        _write_wide_csv(f"{spec.out}_compare.csv", result.taus, cols)
        _write_text(f"{spec.out}_compare.txt", format_comparison(spec, result))
    return result


def check_uniqueness(problem, span=(0.0, 10.0), grid: int = 1001, out: str | None = None):
    """Grid check of both uniqueness conditions; optionally write per-tau values."""
    p = problem if isinstance(problem, TvsscmeProblem) else load_problem(problem)
    taus = np.linspace(span[0], span[1], grid) if grid > 1 else np.array([float(span[0])])
    rep = uniqueness(p, taus)
    if out:
        cols = {}
        for k in range(p.m):
            cols[f"lambda_aa_{k + 1}_re"] = rep.spectra_a[:, k].real
            cols[f"lambda_aa_{k + 1}_im"] = rep.spectra_a[:, k].imag
        for k in range(p.n):
            cols[f"lambda_ff_{k + 1}_re"] = rep.spectra_f[:, k].real
            cols[f"lambda_ff_{k + 1}_im"] = rep.spectra_f[:, k].imag
        cols["eigen_gap"] = rep.eigen_gaps
        cols["det_sign"] = rep.det_signs
        cols["log10_abs_det"] = rep.log_abs_dets / math.log(10)
        _write_wide_csv(f"{out}_uniqueness.csv", taus, cols)
    return rep


# -- formatting and files ------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _common_taus(spec: ExperimentSpec) -> np.ndarray:
    return np.linspace(spec.span[0], spec.span[1], spec.integrator.sample_count)


def _residual_column(r: RunResult, n: int) -> np.ndarray:
    return r.trajectory.residuals if r.ok else np.full(n, np.nan)


def _log10(r: np.ndarray) -> np.ndarray:
    return np.log10(np.maximum(r, LOG_FLOOR))


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _write_text(path: str, text: str):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_wide_csv(path: str, taus: np.ndarray, cols: dict[str, np.ndarray]):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", *cols])
        data = list(cols.values())
        for i, tau in enumerate(taus):
            w.writerow([_fmt(tau), *(_fmt(c[i]) for c in data)])


def state_columns(m: int, n: int) -> list[str]:
    """State column names in ``[vec(X_r); vec(X_i)]`` order (column-major, 1-based)."""
    idx = [(i + 1, j + 1) for j in range(n) for i in range(m)]
    return [f"x_{part}_{i}{j}" if m < 10 and n < 10 else f"x_{part}_{i}_{j}" for part in ("r", "i") for i, j in idx]


def write_trajectory_csv(path: str, traj: Trajectory, m: int, n: int):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "residual", "cond_estimate", *state_columns(m, n)])
        for tau, res, cond, x in zip(traj.taus, traj.residuals, traj.cond_estimates, traj.states):
            w.writerow([_fmt(tau), _fmt(res), _fmt(cond), *map(_fmt, x)])


def read_trajectory_csv(path: str) -> Trajectory:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:3] != ["tau", "residual", "cond_estimate"]:
        raise ValueError(f"{path}: not a trajectory CSV")
    data = np.array([[float(v) for v in row] for row in body])
    return Trajectory(
        taus=data[:, 0], residuals=data[:, 1], cond_estimates=data[:, 2], states=data[:, 3:], stats=IntegratorStats()
    )


AGGREGATE_COLUMNS = [
    "run",
    "status",
    "final_residual",
    "residual_at_tau2",
    "cond_min",
    "cond_max",
    "steps",
    "rejected",
    "evaluations",
    "fallbacks",
    "error",
]


def write_run_outputs(spec: ExperimentSpec, report: RunReport, p: TvsscmeProblem):
    for r in report.results:
        if r.ok:
            write_trajectory_csv(f"{spec.out}_run{r.index + 1:02d}.csv", r.trajectory, p.m, p.n)
    path = f"{spec.out}_aggregate.csv"
    _ensure_parent(path)
    finals, probes = report.final_residuals, report.residuals_at_probe
    cmin, cmax = report.cond_min, report.cond_max
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for k, r in enumerate(report.results):
            s = r.trajectory.stats if r.ok else IntegratorStats()
            w.writerow(
                [
                    r.index + 1,
                    "ok" if r.ok else "failed",
                    _fmt(finals[k]),
                    _fmt(probes[k]),
                    _fmt(cmin[k]),
                    _fmt(cmax[k]),
                    s.steps,
                    s.rejected,
                    s.evaluations,
                    s.fallbacks,
                    r.error or "",
                ]
            )
        w.writerow(
            [
                "median",
                f"{len(report.results) - report.failures}/{len(report.results)} ok",
                _fmt(report.median(finals)),
                _fmt(report.median(probes)),
                _fmt(report.median(cmin)),
                _fmt(report.median(cmax)),
                "",
                "",
                "",
                "",
                "",
            ]
        )
    _write_text(f"{spec.out}_report.txt", format_report(spec, report))


def _settings(spec: ExperimentSpec) -> list[str]:
    cfg = spec.integrator
    return [
        f"problem      {spec.problem}",
        f"span         [{spec.span[0]:g}, {spec.span[1]:g}]",
        f"runs         {spec.runs} (seed {spec.seed}, X0 uniform in [-{spec.init_range:g}, {spec.init_range:g}])",
        f"integrator   Dormand-Prince 4(5), rel_tol {cfg.rel_tol:g}, abs_tol {cfg.abs_tol:g}, "
        f"{cfg.sample_count} samples",
    ]


def format_report(spec: ExperimentSpec, report: RunReport) -> str:
    lines = [f"model        {report.model}", f"gamma        {report.gamma}", *_settings(spec), ""]
    lines.append(f"{'run':>4} {'final residual':>15} {'residual@tau=2':>15} {'cond min':>10} {'cond max':>10} {'steps':>6}")
    finals, probes = report.final_residuals, report.residuals_at_probe
    cmin, cmax = report.cond_min, report.cond_max
    for k, r in enumerate(report.results):
        if not r.ok:
            lines.append(f"{r.index + 1:>4} FAILED  {r.error}")
            continue
        lines.append(
            f"{r.index + 1:>4} {finals[k]:>15.6e} {probes[k]:>15.6e} {cmin[k]:>10.4g} {cmax[k]:>10.4g} "
            f"{r.trajectory.stats.steps:>6}"
        )
    lines.append(
        f"median {report.median(finals):>13.6e} {report.median(probes):>15.6e}"
        f" ({len(report.results) - report.failures}/{len(report.results)} runs ok)"
    )
    return "\n".join(lines) + "\n"


def format_sweep(spec: ExperimentSpec, result: SweepResult) -> str:
    lines = [f"model        {spec.model}", *_settings(spec), ""]
    lines.append(f"{'gamma':>10} {'median final':>14} {'median@tau=2':>14} {'failed':>7}")
    for label, rep in result.reports.items():
        lines.append(
            f"{label:>10} {rep.median_final_residual:>14.6e} {rep.median_residual_at_probe:>14.6e} {rep.failures:>7}"
        )
    return "\n".join(lines) + "\n"


def format_comparison(spec: ExperimentSpec, result: ComparisonResult) -> str:
    lines = [f"gamma        {spec.gamma}", *_settings(spec), ""]
    base = next(iter(result.reports))
    base_final = result.reports[base].median_final_residual
    lines.append(f"{'model':>16} {'median final':>14} {'median@tau=2':>14} {'ratio to ' + base:>26}")
    for name, rep in result.reports.items():
        ratio = rep.median_final_residual / base_final if base_final > 0 else float("nan")
        lines.append(
            f"{name:>16} {rep.median_final_residual:>14.6e} {rep.median_residual_at_probe:>14.6e} {ratio:>26.4g}"
        )
    return "\n".join(lines) + "\n"


def format_uniqueness(rep) -> str:
    g = rep.tau_grid
    lines = [
        f"grid            {g.size} points on [{g[0]:g}, {g[-1]:g}] (pointwise check)",
        f"min eigen gap   {rep.min_eigen_gap:.6g}  (threshold {rep.eps_eig:g})",
        f"min |det W_R|   {rep.min_abs_det:.6g}  (threshold {rep.eps_det:g})",
        f"det sign flips  {rep.det_sign_changes}",
        f"unique          {'yes' if rep.unique else 'no'}",
    ]
    lines += [f"note            {n}" for n in rep.notes]
    return "\n".join(lines) + "\n"


def all_failed(reports: Sequence[RunReport]) -> bool:
    return all(rep.failures == len(rep.results) for rep in reports)


__all__ = [
    "ExperimentSpec",
    "RunResult",
    "RunReport",
    "SweepResult",
    "ComparisonResult",
    "initial_states",
    "residual_function",
    "run",
    "gamma_sweep",
    "compare_models",
    "check_uniqueness",
    "state_columns",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "format_report",
    "format_uniqueness",
    "all_failed",
    "CzndError",
]
