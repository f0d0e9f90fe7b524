"""Rolling trend slopes and lead/lag offsets between them.

Each entity's log-return series is regressed on the time index inside a
trailing window, giving a trajectory of slope coefficients. Two slope
trajectories are aligned by the integer offset that maximizes their
normalized inner product over the overlapping segment; the matrix of
``|offset|`` values, summed per column, is the centrality score (lower is
more central).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .distance import DistanceMatrix
from .errors import ConfigError, DataError, DegenerateError
from .formatting import fmt, num
from .panel import Date, ReturnsPanel, format_date

logger = logging.getLogger(__name__)

MODEL_WINDOWS = {"M1": 60, "M2": 120, "M3": 30}
DEFAULT_PHI_MAX = 24
# normalized scores closer than this are treated as tied
SCORE_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RegressionFit:
    intercept: float
    slope: float
    residuals: np.ndarray
    window: tuple  # (start, end) row indices, inclusive


@dataclass(frozen=True, eq=False)
class SlopeTrajectory:
    entity: str
    window: int
    values: np.ndarray
    dates: tuple = ()  # window-end dates, when known

    @property
    def model(self) -> str | None:
        for name, w in MODEL_WINDOWS.items():
            if w == self.window:
                return name
        return None

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class OffsetResult:
    phi: int
    score: float


@dataclass(frozen=True, eq=False)
class CentralityReport:
    offsets: DistanceMatrix  # |phi*| per pair
    signed: np.ndarray  # phi*(i, j)
    scores: np.ndarray
    phi_max: int
    window: int | None = None

    @property
    def entities(self):
        return self.offsets.entities

    def ranking(self) -> list[str]:
        """Entities from most to least central (ties keep entity order)."""
        order = np.argsort(self.scores, kind="stable")
        return [self.entities[i] for i in order]

    def to_json(self) -> dict:
        model = next((k for k, w in MODEL_WINDOWS.items() if w == self.window), None)
        return {
            "model": model,
            "window": self.window,
            "phi_max": self.phi_max,
            "entities": list(self.entities),
            "offset_matrix": [[int(v) for v in row] for row in self.offsets.d],
            "signed_offsets": [[int(v) for v in row] for row in self.signed],
            "scores": {e: num(s) for e, s in zip(self.entities, self.scores)},
        }


def fit_window(y: np.ndarray) -> tuple[float, float, np.ndarray]:
    """OLS of ``y`` on ``s = 0..len(y)-1`` with intercept."""
    y = np.asarray(y, dtype=float)
    s = np.arange(len(y), dtype=float)
    sc = s - s.mean()
    slope = float(sc @ (y - y.mean()) / (sc @ sc))
    intercept = float(y.mean() - slope * s.mean())
    return intercept, slope, y - intercept - slope * s


def regression_fit(returns: ReturnsPanel, entity: str, end: int, window: int) -> RegressionFit:
    """Fit over rows ``end - window + 1 .. end``."""
    start = end - window + 1
    if start < 0 or end >= len(returns.dates):
        raise DataError(f"window [{start}, {end}] outside the {len(returns.dates)} available rows")
    y = returns.column(entity).values[start:end + 1]
    b0, b1, eps = fit_window(y)
    return RegressionFit(b0, b1, eps, (start, end))


def rolling_slope(returns: ReturnsPanel, entity: str, window: int) -> SlopeTrajectory:
    """Slope per unit time step for every trailing window of ``window`` returns."""
    y = returns.column(entity).values
    if window < 3:
        raise ConfigError(f"window must be >= 3, got {window}")
    if window > len(y):
        raise DataError(f"window {window} exceeds the {len(y)} available returns for {entity}")
    s = np.arange(window, dtype=float)
    sc = s - s.mean()
    # centered regressor sums to zero, so the window mean of y drops out
    slopes = sliding_window_view(y, window) @ sc / (sc @ sc)
    return SlopeTrajectory(entity, window, slopes, tuple(returns.dates[window - 1:]))


def _overlap(a: np.ndarray, b: np.ndarray, phi: int):
    L = len(a)
    if phi >= 0:
        return a[: L - phi], b[phi:]
    sigma = -phi
    return a[sigma:], b[: L - sigma]


def offset_scores(a: np.ndarray, b: np.ndarray, phi_max: int) -> dict[int, float]:
    """Normalized inner product for every offset in ``[-phi_max, phi_max]``.

    Offsets whose overlap has a zero-norm segment are left out.
    """
    out = {}
    for phi in range(-phi_max, phi_max + 1):
        x, y = _overlap(a, b, phi)
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0 or ny == 0:
            continue
        out[phi] = float(x @ y / (nx * ny))
    return out


def optimal_offset(a, b, phi_max: int = DEFAULT_PHI_MAX) -> OffsetResult:
    """Exhaustive search for the offset maximizing the normalized inner product.

    A positive offset pairs ``a[s]`` with ``b[s + phi]``, i.e. ``b`` lags ``a``.
    Ties (within 1e-12) go to the smallest ``|phi|``, then to the negative one.
    """
    a = np.asarray(getattr(a, "values", a), dtype=float)
    b = np.asarray(getattr(b, "values", b), dtype=float)
    L = len(a)
    if len(b) != L:
        raise DataError(f"slope trajectories differ in length ({L} vs {len(b)})")
    if phi_max < 0 or 2 * phi_max >= L:
        raise ConfigError(f"phi_max must satisfy 0 <= phi_max < L/2 (L={L}), got {phi_max}")
    scores = offset_scores(a, b, phi_max)
    if not scores:
        raise DegenerateError("degenerate trajectories: every overlap has zero norm")
    best = max(scores.values())
    phi = min((p for p, v in scores.items() if v >= best - SCORE_TIE_TOL), key=lambda p: (abs(p), p))
    return OffsetResult(phi, min(scores[phi], 1.0))


def centrality_report(trajectories: Sequence[SlopeTrajectory], phi_max: int = DEFAULT_PHI_MAX) -> CentralityReport:
    if len(trajectories) < 2:
        raise DataError("centrality needs at least two trajectories")
    if len({t.window for t in trajectories}) != 1:
        raise DataError("trajectories come from different models")
    if len({len(t.values) for t in trajectories}) != 1:
        raise DataError("trajectories differ in length")
    n = len(trajectories)
    signed = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            r = optimal_offset(trajectories[i].values, trajectories[j].values, phi_max)
            signed[i, j] = r.phi
            signed[j, i] = -r.phi
    absolute = np.abs(signed).astype(float)
    dist = DistanceMatrix(tuple(t.entity for t in trajectories), absolute)
    return CentralityReport(dist, signed, absolute.sum(axis=0), phi_max, trajectories[0].window)


def panel_centrality(returns: ReturnsPanel, window: int, phi_max: int = DEFAULT_PHI_MAX):
    """Slope trajectories for every entity plus their centrality report."""
    slopes = [rolling_slope(returns, e, window) for e in returns.entities]
    return slopes, centrality_report(slopes, phi_max)


def partitioned_centrality(
    returns: ReturnsPanel, split_date: Date, window: int = MODEL_WINDOWS["M3"], phi_max: int = DEFAULT_PHI_MAX
) -> tuple[CentralityReport, CentralityReport]:
    """Independent reports for rows before ``split_date`` and from it onward."""
    split_date = tuple(split_date)
    if not returns.dates[0] < split_date <= returns.dates[-1]:
        raise DataError(
            f"split date {format_date(split_date)} is not interior to "
            f"{format_date(returns.dates[0])}..{format_date(returns.dates[-1])}"
        )
    parts = (returns.between(end=split_date), returns.between(start=split_date))
    for label, part in zip(("first", "second"), parts):
        if len(part.dates) <= window:
            raise DataError(
                f"{label} partition has {len(part.dates)} rows, needs more than window={window}"
            )
    return tuple(panel_centrality(p, window, phi_max)[1] for p in parts)


def write_slopes_csv(slopes: Sequence[SlopeTrajectory], path, frequency: str = "monthly") -> None:
    """Wide layout: ``window_end_date`` then one slope column per entity."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_end_date", *(s.entity for s in slopes)])
        for k, d in enumerate(slopes[0].dates):
            w.writerow([format_date(d, frequency), *(fmt(s.values[k]) for s in slopes)])
