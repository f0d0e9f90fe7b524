"""Date-indexed panels, CSV ingestion, log returns and L1 trajectories.

Every analysis in the package starts from a :class:`TimeSeriesPanel` of
positive levels (CPI index levels, equity index levels, prices). Log
returns are taken on those levels, so the series handed in must be strictly
positive; outputs are "log differences of the supplied series" whatever the
series actually measures.
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateError, DomainError, IngestionError

logger = logging.getLogger(__name__)

FREQUENCIES = ("monthly", "daily")
MISSING_POLICIES = ("reject", "drop_row")

Date = tuple  # (year, month, day); monthly panels use day=1

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_DAY_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")


def parse_date(text: str, frequency: str | None = None) -> Date:
    """Parse ``YYYY-MM`` or ``YYYY-MM-DD`` into a ``(year, month, day)`` tuple."""
    text = text.strip()
    m = _DAY_RE.match(text)
    if m:
        y, mo, d = (int(g) for g in m.groups())
    else:
        m = _MONTH_RE.match(text)
        if not m:
            raise ValueError(f"unparseable date {text!r}")
        y, mo = (int(g) for g in m.groups())
        d = 1
    date(y, mo, d)  # calendar validation
    if frequency == "monthly":
        d = 1
    return (y, mo, d)


def format_date(d: Date, frequency: str = "daily") -> str:
    if frequency == "monthly":
        return f"{d[0]:04d}-{d[1]:02d}"
    return f"{d[0]:04d}-{d[1]:02d}-{d[2]:02d}"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


class Column(NamedTuple):
    """One entity's series with its dates."""

    name: str
    dates: tuple
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class _Panel:
    dates: tuple
    entities: tuple
    values: np.ndarray
    frequency: str = "monthly"
    dropped_rows: int = field(default=0, compare=False)

    _min_rows = 1

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(tuple(d) for d in self.dates))
        object.__setattr__(self, "entities", tuple(str(e) for e in self.entities))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.frequency not in FREQUENCIES:
            raise ValueError(f"frequency must be one of {FREQUENCIES}, got {self.frequency!r}")
        T, n = len(self.dates), len(self.entities)
        if n < 1:
            raise IngestionError("panel needs at least one entity")
        if len(set(self.entities)) != n:
            raise IngestionError("duplicate entity names")
        if T < self._min_rows:
            raise IngestionError(f"panel needs at least {self._min_rows} rows, got {T}")
        if self.values.shape != (T, n):
            raise IngestionError(f"values shape {self.values.shape} does not match ({T}, {n})")
        for k in range(1, T):
            if self.dates[k] <= self.dates[k - 1]:
                raise IngestionError(
                    f"dates not strictly increasing at row {k + 1} ({format_date(self.dates[k])})"
                )
        if not np.all(np.isfinite(self.values)):
            r, c = np.argwhere(~np.isfinite(self.values))[0]
            raise IngestionError(
                f"non-finite value for {self.entities[c]} at {format_date(self.dates[r])}"
            )

    @property
    def shape(self):
        return self.values.shape

    def index_of(self, entity: str) -> int:
        try:
            return self.entities.index(entity)
        except ValueError:
            raise KeyError(f"unknown entity {entity!r}") from None

    def column(self, entity: str) -> Column:
        return Column(entity, self.dates, self.values[:, self.index_of(entity)])

    def select(self, entities: Sequence[str]):
        idx = [self.index_of(e) for e in entities]
        return type(self)(self.dates, tuple(entities), self.values[:, idx], self.frequency)

    def between(self, start: Date | None = None, end: Date | None = None):
        """Rows with ``start <= date < end`` (either bound may be omitted)."""
        keep = [
            k for k, d in enumerate(self.dates)
            if (start is None or d >= start) and (end is None or d < end)
        ]
        return type(self)(
            tuple(self.dates[k] for k in keep), self.entities, self.values[keep], self.frequency
        )

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.dates == other.dates
            and self.entities == other.entities
            and self.frequency == other.frequency
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


class TimeSeriesPanel(_Panel):
    """T x n matrix of observations; ``values[t, i]`` is entity i at date t."""

    _min_rows = 2


class ReturnsPanel(_Panel):
    """Log returns; row t is dated by the later of the two observations."""


@dataclass(frozen=True, eq=False)
class NormalizedTrajectory:
    entity: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


# ---------------------------------------------------------------------------
# CSV


def _read_table(path, frequency, missing_policy):
    if missing_policy not in MISSING_POLICIES:
        raise ValueError(f"missing_policy must be one of {MISSING_POLICIES}")
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise IngestionError(f"{path}: header must be 'date,<entity1>,...'")
    entities = header[1:]
    if any(not e for e in entities):
        raise IngestionError(f"{path}: blank entity name in header")

    if frequency is None:
        first = rows[1][0].strip() if len(rows) > 1 else ""
        frequency = "monthly" if _MONTH_RE.match(first) else "daily"

    dates, values, dropped = [], [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
            )
        try:
            d = parse_date(row[0], frequency)
        except ValueError:
            raise IngestionError(f"{path}: row {lineno}, column 'date': unparseable date {row[0]!r}")
        rec, missing = [], False
        for name, cell in zip(entities, row[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                if missing_policy == "reject":
                    raise IngestionError(
                        f"{path}: row {lineno}, column {name!r}: missing value"
                    )
                missing = True
                continue
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: row {lineno}, column {name!r}: unparseable number {cell!r}"
                )
            if not math.isfinite(v):
                raise IngestionError(f"{path}: row {lineno}, column {name!r}: non-finite value")
            rec.append(v)
        if missing:
            dropped += 1
            continue
        dates.append(d)
        values.append(rec)

    seen = set()
    for d in dates:
        if d in seen:
            raise IngestionError(f"{path}: duplicate date {format_date(d)}")
        seen.add(d)
    for k in range(1, len(dates)):
        if dates[k] < dates[k - 1]:
            raise IngestionError(f"{path}: dates not strictly increasing at {format_date(dates[k])}")
    if dropped:
        logger.info("%s: %d row%s dropped", path, dropped, "" if dropped == 1 else "s")
    return dates, entities, np.array(values, dtype=float).reshape(len(dates), len(entities)), frequency, dropped


def load_csv(path, frequency: str | None = None, missing_policy: str = "reject") -> TimeSeriesPanel:
    """Read a ``date,<entity>...`` CSV of levels.

    ``frequency=None`` infers monthly from ``YYYY-MM`` dates. Rows with a
    blank cell raise under ``reject``; under ``drop_row`` they are removed and
    counted in ``panel.dropped_rows``.
    """
    dates, entities, values, frequency, dropped = _read_table(path, frequency, missing_policy)
    return TimeSeriesPanel(dates, entities, values, frequency, dropped_rows=dropped)


def load_returns_csv(path, frequency: str | None = None, missing_policy: str = "reject") -> ReturnsPanel:
    """Read a CSV that already holds log returns."""
    dates, entities, values, frequency, dropped = _read_table(path, frequency, missing_policy)
    return ReturnsPanel(dates, entities, values, frequency, dropped_rows=dropped)


def write_csv(panel: _Panel, path) -> None:
    """Write a panel in the input schema; floats use shortest round-trip repr."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.entities])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([format_date(d, panel.frequency), *(repr(float(v)) for v in row)])


# ---------------------------------------------------------------------------
# transforms


def log_returns(panel: TimeSeriesPanel) -> ReturnsPanel:
    """``out[t, i] = ln(values[t+1, i] / values[t, i])``."""
    v = panel.values
    bad = np.argwhere(v <= 0)
    if bad.size:
        r, c = bad[0]
        raise DomainError(
            f"non-positive level {v[r, c]!r} for {panel.entities[c]} at "
            f"{format_date(panel.dates[r], panel.frequency)}"
        )
    out = np.log(v[1:] / v[:-1])
    return ReturnsPanel(panel.dates[1:], panel.entities, out, panel.frequency)


def l1_normalize(returns: ReturnsPanel, entity: str) -> NormalizedTrajectory:
    x = returns.column(entity).values
    norm = np.sum(np.abs(x))
    if norm == 0:
        raise DegenerateError(f"degenerate trajectory: {entity} has all-zero returns")
    return NormalizedTrajectory(entity, x / norm)


def normalized_trajectories(returns: ReturnsPanel) -> list[NormalizedTrajectory]:
    return [l1_normalize(returns, e) for e in returns.entities]
