"""Adaptive Dormand-Prince 4(5) integration of ``mass(t) x' = forcing(t, x)``.

Every stage derivative is a linear solve against the mass matrix: LU with
partial pivoting first, the pseudo-inverse only if LU reports a singular
pivot.  Steps advance with the 5th-order solution (local extrapolation) and
samples on a uniform grid are produced by cubic Hermite interpolation
between accepted steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import MaxStepsExceeded, NumericalFailure, SingularMatrix, StepSizeUnderflow

# Dormand & Prince (1980), RK5(4)7M.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

SAFETY = 0.9
FACTOR_MIN = 0.2
FACTOR_MAX = 5.0
PINV_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float | None = None  # defaults to span / 10
    max_steps: int = 10**6
    sample_count: int = 1000

    def resolved_h_max(self, span_length: float) -> float:
        return self.h_max if self.h_max is not None else span_length / 10

    def validate(self, span_length: float):
        h_max = self.resolved_h_max(span_length)
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_init <= h_max):
            raise ValueError(f"need 0 < h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {h_max}")
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0
    fallbacks: int = 0


@dataclass
class Trajectory:
    taus: np.ndarray
    states: np.ndarray  # (samples, dim)
    residuals: np.ndarray
    cond_estimates: np.ndarray
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    step_taus: np.ndarray | None = None
    step_states: np.ndarray | None = None

    def residual_at(self, tau: float) -> float:
        """Residual linearly interpolated between samples (``nan`` outside the span)."""
        if tau < self.taus[0] or tau > self.taus[-1]:
            return float("nan")
        return float(np.interp(tau, self.taus, self.residuals))

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])


def solve_mass(mass: np.ndarray, forcing: np.ndarray, factor: linalg.LUFactor | None = None):
    """Return ``(x, used_pinv)`` with ``mass @ x = forcing``.

    Raises :class:`NumericalFailure` when even the pseudo-inverse leaves a
    residual above ``1e-8 * (1 + |forcing|)``.
    """
    try:
        return linalg.lu_solve(factor if factor is not None else mass, forcing), False
    except SingularMatrix:
        pass
    x = linalg.pinv(mass) @ forcing
    bad = np.linalg.norm(mass @ x - forcing) > PINV_RESIDUAL_RTOL * (1 + np.linalg.norm(forcing))
    if bad or not np.all(np.isfinite(x)):
        raise NumericalFailure("mass matrix is singular and the forcing is not in its range")
    return x, True


class _Field:
    """``x' = mass^-1 forcing`` with per-time LU reuse for state-independent masses."""

    def __init__(self, system, stats: IntegratorStats):
        self.system = system
        self.stats = stats
        self.reuse = not getattr(system, "mass_state_dependent", False)
        self._lu: dict[float, linalg.LUFactor] = {}

    def __call__(self, tau: float, x: np.ndarray) -> np.ndarray:
        self.stats.evaluations += 1
        forcing = np.asarray(self.system.forcing_at(tau, x), dtype=float)
        if self.reuse:
            f = self._lu.get(tau)
            if f is None:
                if len(self._lu) > 4:
                    self._lu.clear()
                f = self._lu[tau] = linalg.lu_factor(self.system.mass_at(tau, x))
            if not f.singular:
                return linalg.lu_solve(f, forcing)
        xdot, fallback = solve_mass(self.system.mass_at(tau, x), forcing)
        self.stats.fallbacks += fallback
        return xdot


def _dp_step(f, tau, x, h, k1):
    k = [k1]
    for i in range(1, 7):
        xi = x + h * sum(a * kj for a, kj in zip(A[i], k) if a != 0.0)
        k.append(f(tau + C[i] * h, xi))
    x5 = x + h * sum(b * kj for b, kj in zip(B5, k) if b != 0.0)
    x4 = x + h * sum(b * kj for b, kj in zip(B4, k) if b != 0.0)
    return x4, x5, k[6]


def rk45_step(system, tau: float, x: np.ndarray, h: float):
    """One Dormand-Prince step; returns ``(x4, x5, x5 - x4)``."""
    f = _Field(system, IntegratorStats())
    x = np.asarray(x, dtype=float)
    x4, x5, _ = _dp_step(f, tau, x, h, f(tau, x))
    return x4, x5, x5 - x4


def _hermite(theta, h, x0, f0, x1, f1):
    t2, t3 = theta * theta, theta * theta * theta
    return (
        (2 * t3 - 3 * t2 + 1) * x0
        + (t3 - 2 * t2 + theta) * h * f0
        + (-2 * t3 + 3 * t2) * x1
        + (t3 - t2) * h * f1
    )


def integrate(
    system,
    x0,
    span: tuple[float, float],
    cfg: IntegratorConfig = IntegratorConfig(),
    residual_fn: Callable[[float, np.ndarray], float] | None = None,
) -> Trajectory:
    """Integrate from ``x0`` over ``span`` and sample ``cfg.sample_count`` uniform points.

    ``system`` needs ``dim``, ``mass_at(tau, x)`` and ``forcing_at(tau, x)``.
    Raises :class:`StepSizeUnderflow`, :class:`MaxStepsExceeded` or
    :class:`NumericalFailure`.
    """
    t0, t1 = float(span[0]), float(span[1])
    if not t1 > t0:
        raise ValueError(f"span must be increasing, got {span}")
    x = np.array(x0, dtype=float).ravel()
    if x.size != system.dim:
        raise ValueError(f"x0 has length {x.size}, system dimension is {system.dim}")
    cfg.validate(t1 - t0)
    h_max = cfg.resolved_h_max(t1 - t0)

    stats = IntegratorStats()
    f = _Field(system, stats)
    taus = np.linspace(t0, t1, cfg.sample_count)
    states = np.empty((taus.size, x.size))
    states[0] = x
    next_sample = 1
    step_taus, step_states = [t0], [x.copy()]

    t = t0
    fx = f(t, x)
    h = min(cfg.h_init, h_max, t1 - t0)
    attempts = 0
    while t < t1:
        if attempts >= cfg.max_steps:
            raise MaxStepsExceeded(f"{cfg.max_steps} steps reached at t={t}")
        landing = h >= t1 - t
        if landing:
            h = t1 - t
        elif h < cfg.h_min:
            raise StepSizeUnderflow(f"step size {h:.3e} below h_min at t={t}")
        attempts += 1
        x4, x5, f_new = _dp_step(f, t, x, h, fx)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.max(np.abs(x5 - x4) / scale))
        if not np.isfinite(err):
            err = np.inf
        if err <= 1.0:
            t_new = t1 if landing else t + h
            while next_sample < taus.size and taus[next_sample] <= t_new:
                theta = (taus[next_sample] - t) / h
                states[next_sample] = _hermite(theta, h, x, fx, x5, f_new)
                next_sample += 1
            t, x, fx = t_new, x5, f_new
            stats.steps += 1
            step_taus.append(t)
            step_states.append(x.copy())
            factor = FACTOR_MAX if err == 0.0 else SAFETY * err ** -0.2
            h = h * min(FACTOR_MAX, max(FACTOR_MIN, factor))
        else:
            stats.rejected += 1
            factor = SAFETY * err ** -0.2 if np.isfinite(err) else FACTOR_MIN
            h = h * min(1.0, max(FACTOR_MIN, factor))
        h = min(h, h_max)
    states[-1] = x

    cond = np.array([linalg.condition_number(system.mass_at(tau, s)) for tau, s in zip(taus, states)])
    if residual_fn is None:
        residuals = np.full(taus.size, np.nan)
    else:
        residuals = np.array([residual_fn(tau, s) for tau, s in zip(taus, states)])
    return Trajectory(taus, states, residuals, cond, stats, np.array(step_taus), np.array(step_states))
