"""Equity-index robustness under inflation extremes.

Months whose inflation return sits in the top or bottom decile form the
"extreme" regime, every other month the "stable" one. The equity-robustness
score is the order-1 Wasserstein distance between the equity log returns
observed in the two regimes; a lower score means the index behaves the same
whatever inflation does.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DataError
from .formatting import fmt
from .panel import Column, ReturnsPanel, format_date

logger = logging.getLogger(__name__)

MIN_JOINT_OBS = 20
LOWER_Q, UPPER_Q = 0.10, 0.90


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    samples: np.ndarray
    label: str

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if s.size == 0:
            raise DataError(f"empty {self.label} distribution")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class RobustnessScore:
    entity: str
    er: float
    n_extreme: int
    n_stable: int
    mean_discrepancy: float | None = None


def _values(col):
    return np.asarray(col.values if isinstance(col, Column) else col, dtype=float)


def _joint(inflation, equity, min_obs=MIN_JOINT_OBS):
    x, y = _values(inflation), _values(equity)
    if isinstance(inflation, Column) and isinstance(equity, Column):
        if tuple(inflation.dates) != tuple(equity.dates):
            raise AlignmentError(
                f"dates of {inflation.name!r} and {equity.name!r} are not aligned"
            )
    if x.shape != y.shape:
        raise AlignmentError(f"series lengths differ ({x.size} vs {y.size})")
    if x.size < min_obs:
        raise DataError(f"need at least {min_obs} joint observations, got {x.size}")
    return x, y


def decile_cutoffs(x: np.ndarray) -> tuple[float, float]:
    return float(np.quantile(x, LOWER_Q)), float(np.quantile(x, UPPER_Q))


def decile_masks(x) -> tuple[np.ndarray, np.ndarray]:
    """Bottom- and top-decile membership; values equal to a cutoff are included."""
    x = np.asarray(x, dtype=float)
    lo, hi = decile_cutoffs(x)
    return x <= lo, x >= hi


def split_by_inflation_deciles(inflation, equity, min_obs: int = MIN_JOINT_OBS):
    """Equity returns in extreme-inflation months vs the remaining months."""
    x, y = _joint(inflation, equity, min_obs)
    low, high = decile_masks(x)
    extreme = low | high
    return (
        EmpiricalDistribution(y[extreme], "extreme"),
        EmpiricalDistribution(y[~extreme], "stable"),
    )


def wasserstein_1d(p, q) -> float:
    """Order-1 Wasserstein distance as the area between the two empirical CDFs."""
    u = np.sort(_samples(p))
    v = np.sort(_samples(q))
    if u.size == 0 or v.size == 0:
        raise DataError("wasserstein_1d needs nonempty samples")
    grid = np.concatenate([u, v])
    grid.sort(kind="mergesort")
    widths = np.diff(grid)
    Fu = np.searchsorted(u, grid[:-1], side="right") / u.size
    Fv = np.searchsorted(v, grid[:-1], side="right") / v.size
    return float(np.sum(np.abs(Fu - Fv) * widths))


def _samples(d):
    return np.asarray(d.samples if isinstance(d, EmpiricalDistribution) else d, dtype=float)


def equity_robustness(inflation, equity, min_obs: int = MIN_JOINT_OBS) -> RobustnessScore:
    extreme, stable = split_by_inflation_deciles(inflation, equity, min_obs)
    name = equity.name if isinstance(equity, Column) else ""
    return RobustnessScore(
        name,
        wasserstein_1d(stable, extreme),
        len(extreme),
        len(stable),
        mean_return_discrepancy(inflation, equity, min_obs),
    )


def mean_return_discrepancy(inflation, equity, min_obs: int = MIN_JOINT_OBS) -> float:
    """Mean equity return in top-decile inflation months minus that in bottom-decile months."""
    x, y = _joint(inflation, equity, min_obs)
    low, high = decile_masks(x)
    return float(y[high].mean() - y[low].mean())


def robustness_table(
    inflation: ReturnsPanel, equity: ReturnsPanel, min_obs: int = MIN_JOINT_OBS
) -> tuple[list[RobustnessScore], dict]:
    """Score every entity present in both panels.

    The inflation panel is restricted to the equity panel's dates, which must
    all occur in it. Entities missing from one side, or too short to split,
    are skipped with a warning. Returns the scores and the conditional
    samples per entity.
    """
    index = {d: k for k, d in enumerate(inflation.dates)}
    missing = [d for d in equity.dates if d not in index]
    if missing:
        raise AlignmentError(
            f"{len(missing)} equity dates have no inflation observation "
            f"(first: {format_date(missing[0], equity.frequency)})"
        )
    rows = [index[d] for d in equity.dates]
    scores, samples = [], {}
    for name in equity.entities:
        if name not in inflation.entities:
            logger.warning("skipping %s: no inflation series", name)
            continue
        infl = Column(name, equity.dates, inflation.column(name).values[rows])
        eq = equity.column(name)
        try:
            score = equity_robustness(infl, eq, min_obs)
            samples[name] = split_by_inflation_deciles(infl, eq, min_obs)
        except DataError as exc:
            logger.warning("skipping %s: %s", name, exc)
            continue
        scores.append(score)
    for name in inflation.entities:
        if name not in equity.entities:
            logger.warning("skipping %s: no equity series", name)
    return scores, samples


def write_robustness_csv(scores, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity", "ER", "n_extreme", "n_stable", "mean_discrepancy"])
        for s in scores:
            w.writerow([s.entity, fmt(s.er), s.n_extreme, s.n_stable, fmt(s.mean_discrepancy)])


def write_samples_csv(extreme: EmpiricalDistribution, stable: EmpiricalDistribution, path) -> None:
    """Long layout ``(regime, log_return)`` for external density plots."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["regime", "log_return"])
        for dist in (extreme, stable):
            for v in dist.samples:
                w.writerow([dist.label, fmt(v)])
