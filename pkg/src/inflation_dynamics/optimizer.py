"""Rolling constrained Sharpe-type portfolio optimization.

At every window end the optimizer maximizes ``(w'mu - Rf) / (w' Sigma w)``
(or ``/ sqrt(w' Sigma w)`` with ``objective="stdev"``) over long-only weights
that hold the first asset at a fixed core weight, keep every other asset in
a box and sum to one. ``Rf`` is applied as given, with no compounding or
annual-to-daily conversion.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateError, InfeasibleError, NumericalError
from .formatting import fmt
from .panel import ReturnsPanel, format_date

logger = logging.getLogger(__name__)

OBJECTIVES = ("variance", "stdev")
N_STARTS = 5
STALL_RTOL = 1e-10
STALL_ITERS = 50
MAX_ITER = 20_000


@dataclass(frozen=True)
class PortfolioSpec:
    """Asset 1 is the core holding; ``lower``/``upper`` cover assets 2..A."""

    assets: tuple
    fixed_core_weight: float = 0.4
    lower: tuple | float = 0.025
    upper: tuple | float = 0.3
    risk_free: float = 0.0025
    window: int = 250
    objective: str = "variance"

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        nf = len(self.assets) - 1
        if nf < 1:
            raise InfeasibleError("a portfolio needs a core asset and at least one free asset")
        for name in ("lower", "upper"):
            v = getattr(self, name)
            v = (float(v),) * nf if np.isscalar(v) else tuple(float(x) for x in v)
            if len(v) != nf:
                raise InfeasibleError(f"{name} bounds: expected {nf} values, got {len(v)}")
            object.__setattr__(self, name, v)
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.window < 2:
            raise ValueError("window must be at least 2")

    @property
    def free_total(self) -> float:
        return 1.0 - self.fixed_core_weight

    def check_feasible(self) -> None:
        lo, hi = np.array(self.lower), np.array(self.upper)
        if not 0 <= self.fixed_core_weight <= 1:
            raise InfeasibleError(f"core weight {self.fixed_core_weight} outside [0, 1]")
        if np.any(lo < 0) or np.any(lo > hi):
            raise InfeasibleError("box bounds must satisfy 0 <= lo <= hi")
        s = self.free_total
        if lo.sum() > s + 1e-12 or hi.sum() < s - 1e-12:
            raise InfeasibleError(
                f"core weight {self.fixed_core_weight:g} leaves {s:g} for free assets, "
                f"but their bounds allow [{lo.sum():g}, {hi.sum():g}]"
            )


@dataclass(frozen=True, eq=False)
class WindowEstimates:
    mu: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class WeightTrajectory:
    assets: tuple
    dates: tuple
    weights: np.ndarray  # (n_windows, A)
    objective: np.ndarray
    spec: PortfolioSpec | None = None


@dataclass(frozen=True, eq=False)
class WeightStats:
    assets: tuple
    mean: np.ndarray
    variance: np.ndarray

    def as_dict(self) -> dict:
        return {a: (float(m), float(v)) for a, m, v in zip(self.assets, self.mean, self.variance)}


@dataclass(frozen=True)
class SweepRow:
    core_weight: float
    stats: WeightStats | None
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.stats is not None


# ---------------------------------------------------------------------------
# estimation


def estimate_window(returns: ReturnsPanel | np.ndarray, t: int, window: int) -> WindowEstimates:
    """Mean and sample covariance (ddof=1) of rows ``t - window .. t - 1``."""
    R = np.asarray(getattr(returns, "values", returns), dtype=float)
    if window < 2:
        raise ValueError("window must be at least 2")
    if t < window or t > len(R):
        raise DataError(f"window end {t} needs {window} rows of history within {len(R)} rows")
    X = R[t - window:t]
    mu = X.mean(axis=0)
    C = X - mu
    cov = C.T @ C / (window - 1)
    cov = 0.5 * (cov + cov.T)
    return WindowEstimates(mu, cov)


# ---------------------------------------------------------------------------
# projection


def project_box_simplex(y, lower, upper, total: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{lower <= x <= upper, sum(x) = total}``.

    The projection is ``clip(y - tau, lower, upper)`` for the scalar ``tau``
    that meets the sum; ``tau`` is found exactly between breakpoints.
    """
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), y.shape)
    hi = np.broadcast_to(np.asarray(upper, dtype=float), y.shape)
    if lo.sum() > total + 1e-12 or hi.sum() < total - 1e-12:
        raise InfeasibleError("box-simplex slice is empty")
    bps = np.unique(np.concatenate([y - hi, y - lo]))
    g = np.clip(y[None, :] - bps[:, None], lo, hi).sum(axis=1)  # nonincreasing in tau
    if total >= g[0]:
        tau = bps[0]
    elif total <= g[-1]:
        tau = bps[-1]
    else:
        k = int(np.searchsorted(-g, -total, side="right")) - 1  # g[k] >= total > g[k+1]
        t0, t1, g0, g1 = bps[k], bps[k + 1], g[k], g[k + 1]
        tau = t0 + (g0 - total) * (t1 - t0) / (g0 - g1)
    x = np.clip(y - tau, lo, hi)
    inner = (x > lo) & (x < hi)
    if inner.any():
        x[inner] += (total - x.sum()) / inner.sum()
        x = np.clip(x, lo, hi)
    return x


# ---------------------------------------------------------------------------
# solver


class _Problem:
    def __init__(self, est: WindowEstimates, spec: PortfolioSpec):
        mu = np.asarray(est.mu, dtype=float)
        S = np.asarray(est.cov, dtype=float)
        A = len(spec.assets)
        if mu.shape != (A,) or S.shape != (A, A):
            raise DataError(f"estimates do not match the {A} assets of the spec")
        if np.any(np.abs(S - S.T) > 1e-10):
            raise NumericalError("covariance matrix is not symmetric")
        tr = float(np.trace(S))
        if tr <= 0:
            raise DegenerateError("zero covariance: the objective is undefined")
        if np.linalg.eigvalsh(S)[0] < -1e-10 * max(1.0, tr):
            raise NumericalError("covariance matrix is not positive semidefinite")
        S = S + (1e-10 * tr / A) * np.eye(A)
        c = spec.fixed_core_weight
        self.p = 1.0 if spec.objective == "variance" else 0.5
        self.c = c
        self.mu_f = mu[1:]
        self.n0 = c * mu[0] - spec.risk_free
        self.S_ff = S[1:, 1:]
        self.s0 = c * S[0, 1:]
        self.v0 = c * c * S[0, 0]
        self.lo = np.array(spec.lower)
        self.hi = np.array(spec.upper)
        self.total = spec.free_total

    def value(self, x):
        N = self.n0 + self.mu_f @ x
        V = self.v0 + 2 * self.s0 @ x + x @ self.S_ff @ x
        return N / V ** self.p

    def value_grad(self, x):
        N = self.n0 + self.mu_f @ x
        Sx = self.S_ff @ x
        V = self.v0 + 2 * self.s0 @ x + x @ Sx
        Vp = V ** self.p
        f = N / Vp
        grad = self.mu_f / Vp - self.p * N / (Vp * V) * 2 * (self.s0 + Sx)
        return f, grad

    def project(self, y):
        return project_box_simplex(y, self.lo, self.hi, self.total)


def _ascend(prob: _Problem, x0: np.ndarray):
    """Spectral projected-gradient ascent with a monotone Armijo backtrack."""
    x = prob.project(x0)
    f, g = prob.value_grad(x)
    step = 1.0 / max(np.linalg.norm(g), 1e-300)
    stall = 0
    for _ in range(MAX_ITER):
        d = prob.project(x + step * g) - x
        if np.max(np.abs(d)) <= 1e-15:
            d = prob.project(x + g / max(np.linalg.norm(g), 1e-300)) - x
            if np.max(np.abs(d)) <= 1e-15:
                break  # stationary
            step = 1.0 / max(np.linalg.norm(g), 1e-300)
            continue
        slope = g @ d
        lam = 1.0
        while True:
            x_new = x + lam * d
            f_new = prob.value(x_new)
            if f_new >= f + 1e-4 * lam * slope or lam < 1e-20:
                break
            lam *= 0.5
        if f_new < f:
            break  # no ascent available at machine precision
        f_new, g_new = prob.value_grad(x_new)
        s, yv = x_new - x, g_new - g
        sy = s @ yv
        # ascent on f is descent on -f: BB step uses -(s'y)
        step = (s @ s) / -sy if sy < 0 else 1e3 * step
        step = min(max(step, 1e-12), 1e12)
        improvement = (f_new - f) / max(abs(f), 1e-300)
        stall = stall + 1 if improvement < STALL_RTOL else 0
        x, f, g = x_new, f_new, g_new
        if stall >= STALL_ITERS:
            break
    return x, f


def _starts(prob: _Problem, warm):
    n = len(prob.lo)
    equal = prob.project(np.full(n, prob.total / n))
    starts = [prob.project(warm)] if warm is not None else []
    starts.append(equal)
    k = 0
    while len(starts) < N_STARTS:
        y = np.zeros(n)
        y[k % n] = 1.0
        if k >= n:
            y[(k + 1) % n] = 1.0
        starts.append(prob.project(y))
        k += 1
    return starts[:N_STARTS]


def solve_weights(est: WindowEstimates, spec: PortfolioSpec, start=None) -> tuple[np.ndarray, float]:
    """Optimal full weight vector (core first) and its objective value.

    ``start`` is an optional full or free-only weight vector used as the
    first of the multi-start points.
    """
    spec.check_feasible()
    prob = _Problem(est, spec)
    if start is not None:
        start = np.asarray(start, dtype=float)
        if start.shape == (len(spec.assets),):
            start = start[1:]
    best = None
    for x0 in _starts(prob, start):
        x, f = _ascend(prob, x0)
        if not math.isfinite(f):
            continue
        if best is None or f > best[1] + 1e-12 * abs(best[1]):
            best = (x, f)
    if best is None:
        raise NumericalError("optimizer produced no finite objective")
    x, f = best
    return np.concatenate([[spec.fixed_core_weight], x]), float(f)


def portfolio_objective(w, est: WindowEstimates, spec: PortfolioSpec) -> float:
    """Objective of a full weight vector, including the covariance regularization."""
    w = np.asarray(w, dtype=float)
    return float(_Problem(est, spec).value(w[1:]))


def rolling_optimize(returns: ReturnsPanel, spec: PortfolioSpec, cold_start: bool = False) -> WeightTrajectory:
    """Solve at every window end; weights dated ``t`` use the ``window`` rows before ``t``."""
    spec.check_feasible()
    missing = [a for a in spec.assets if a not in returns.entities]
    if missing:
        raise DataError(f"assets missing from returns panel: {missing}")
    R = returns.select(spec.assets).values
    T = len(R)
    if T <= spec.window:
        raise DataError(f"need more than window={spec.window} return rows, got {T}")
    W, obj, prev = [], [], None
    for t in range(spec.window, T):
        est = estimate_window(R, t, spec.window)
        w, f = solve_weights(est, spec, None if cold_start else prev)
        W.append(w)
        obj.append(f)
        prev = w
    return WeightTrajectory(
        spec.assets, tuple(returns.dates[spec.window:]), np.array(W), np.array(obj), spec
    )


def weight_stats(traj: WeightTrajectory) -> WeightStats:
    """Per-asset time mean and population variance of the weights."""
    W = np.asarray(traj.weights, dtype=float)
    if W.size == 0:
        raise DataError("empty weight trajectory")
    return WeightStats(tuple(traj.assets), W.mean(axis=0), W.var(axis=0))


def sensitivity_sweep(returns: ReturnsPanel, spec: PortfolioSpec, core_weights: Sequence[float]) -> list[SweepRow]:
    rows = []
    for cw in core_weights:
        s = replace(spec, fixed_core_weight=float(cw))
        try:
            s.check_feasible()
        except InfeasibleError as exc:
            logger.warning("core weight %g infeasible: %s", cw, exc)
            rows.append(SweepRow(float(cw), None, str(exc)))
            continue
        rows.append(SweepRow(float(cw), weight_stats(rolling_optimize(returns, s))))
    return rows


# ---------------------------------------------------------------------------
# output


def write_trajectory_csv(traj: WeightTrajectory, path, frequency: str = "daily") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *traj.assets, "objective"])
        for d, row, f in zip(traj.dates, traj.weights, traj.objective):
            w.writerow([format_date(d, frequency), *(fmt(v) for v in row), fmt(f)])


def write_stats_csv(stats: WeightStats, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "mean_weight", "weight_variance"])
        for a, m, v in zip(stats.assets, stats.mean, stats.variance):
            w.writerow([a, fmt(m), fmt(v)])


def write_sweep_csv(rows: Sequence[SweepRow], assets, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["core_weight", "asset", "mean_weight"])
        for r in rows:
            for k, a in enumerate(assets):
                w.writerow([fmt(r.core_weight), a, fmt(r.stats.mean[k]) if r.feasible else "infeasible"])
