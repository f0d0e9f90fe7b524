"""Rolling intra-sector correlation and its window average."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError
from .formatting import fmt
from .panel import Date, ReturnsPanel, format_date

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 120


class UndefinedCorrelationWarning(UserWarning):
    """A pair had zero variance inside a window and was left out of the mean."""


@dataclass(frozen=True)
class SectorMap:
    mapping: dict  # entity -> sector

    def members(self, sector: str) -> list[str]:
        return [e for e, s in self.mapping.items() if s == sector]

    @property
    def sectors(self) -> list[str]:
        return sorted(set(self.mapping.values()))

    @classmethod
    def read_csv(cls, path) -> "SectorMap":
        path = Path(path)
        if not path.exists():
            raise DataError(f"{path}: file not found")
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        if not rows or [c.strip().lower() for c in rows[0][:2]] != ["entity", "sector"]:
            raise DataError(f"{path}: header must be 'entity,sector'")
        mapping = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise DataError(f"{path}: row {lineno} must be 'entity,sector'")
            e, s = row[0].strip(), row[1].strip()
            if e in mapping:
                raise DataError(f"{path}: row {lineno}: {e!r} mapped twice")
            mapping[e] = s
        return cls(mapping)


@dataclass(frozen=True, eq=False)
class RollingCorrelation:
    sector: str
    dates: tuple
    mean_offdiag: np.ndarray
    n_members: int = 0


@dataclass(frozen=True)
class SectorAverage:
    sector: str
    mu: float
    n_members: int = 0
    n_windows: int = 0


def window_correlations(X: np.ndarray, window: int) -> np.ndarray:
    """Pearson correlation matrices for every trailing window; shape (n_windows, S, S).

    Entries for a zero-variance member are NaN.
    """
    W = sliding_window_view(X, window, axis=0)  # (n_windows, S, window)
    C = W - W.mean(axis=2, keepdims=True)
    cov = np.einsum("tiw,tjw->tij", C, C)
    var = np.einsum("tii->ti", cov)
    denom = np.sqrt(var[:, :, None] * var[:, None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        R = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), np.nan)
    return np.clip(R, -1.0, 1.0)


def rolling_correlation(
    returns: ReturnsPanel, sector_map: SectorMap, sector: str, window: int = DEFAULT_WINDOW
) -> RollingCorrelation:
    """Mean upper-triangle correlation of a sector for every trailing window of ``window`` rows."""
    members = [e for e in sector_map.members(sector) if e in returns.entities]
    if len(members) < 2:
        raise DataError(f"sector {sector!r} has {len(members)} member(s) with data; need at least 2")
    T = len(returns.dates)
    if not 2 <= window <= T:
        raise ConfigError(f"window must be in [2, {T}], got {window}")
    X = returns.select(members).values
    R = window_correlations(X, window)
    iu = np.triu_indices(len(members), 1)
    pairs = R[:, iu[0], iu[1]]
    defined = ~np.isnan(pairs)
    n_undef = int((~defined).sum())
    if n_undef:
        warnings.warn(
            f"sector {sector!r}: {n_undef} pair-window correlations undefined (zero variance); excluded",
            UndefinedCorrelationWarning,
            stacklevel=2,
        )
    counts = defined.sum(axis=1)
    keep = counts > 0
    means = np.where(defined, pairs, 0.0).sum(axis=1)[keep] / counts[keep]
    dates = tuple(d for d, k in zip(returns.dates[window - 1:], keep) if k)
    return RollingCorrelation(sector, dates, means, len(members))


def average_sector_correlation(rc: RollingCorrelation, start: Date | None = None, end: Date | None = None) -> SectorAverage:
    """Time average of the per-window mean over window ends in ``[start, end]``."""
    sel = [
        k for k, d in enumerate(rc.dates)
        if (start is None or d >= tuple(start)) and (end is None or d <= tuple(end))
    ]
    if not sel:
        raise DataError(f"no window ends for sector {rc.sector!r} in the requested range")
    return SectorAverage(rc.sector, float(np.mean(rc.mean_offdiag[sel])), rc.n_members, len(sel))


def write_rolling_csv(rc: RollingCorrelation, path, frequency: str = "daily") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "mean_offdiag"])
        for d, v in zip(rc.dates, rc.mean_offdiag):
            w.writerow([format_date(d, frequency), fmt(v)])


def write_summary_csv(averages, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sector", "mu", "S_n", "n_windows"])
        for a in averages:
            w.writerow([a.sector, fmt(a.mu), a.n_members, a.n_windows])
