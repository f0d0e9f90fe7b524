"""Synthetic fixtures so every analysis can run without proprietary data.

All generators are deterministic given ``seed``.
"""
from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .panel import ReturnsPanel, TimeSeriesPanel
from .sectorcorr import SectorMap

COUNTRIES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8")
OUTLIERS = ("C1", "C6")


def monthly_dates(start: tuple, count: int) -> tuple:
    y, m = start[0], start[1]
    out = []
    for _ in range(count):
        out.append((y, m, 1))
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return tuple(out)


def business_dates(start: tuple, count: int) -> tuple:
    d = date(*start)
    out = []
    while len(out) < count:
        if d.weekday() < 5:
            out.append((d.year, d.month, d.day))
        d += timedelta(days=1)
    return tuple(out)


def _bump(t, center, width):
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def cpi_panel(
    seed: int = 0,
    n_months: int = 801,
    entities=COUNTRIES,
    outliers=OUTLIERS,
    lead_months=(48, 96),
    noise: float = 0.0005,
) -> TimeSeriesPanel:
    """Monthly CPI-like levels sharing one inflation hump.

    Outlier entities reach the hump ``lead_months`` earlier than the rest
    (one lead per outlier), mimicking an early onset of inflation.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_months - 1, dtype=float)
    center, width = 0.35 * n_months, 0.04 * n_months
    leads = dict(zip(outliers, lead_months))
    cols = []
    for e in entities:
        c = center - leads.get(e, 0)
        r = 0.002 + 0.008 * _bump(t, c, width) + 0.002 * _bump(t, c + 2.2 * width, width)
        r = r + noise * rng.standard_normal(t.size)
        cols.append(100.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)])))
    return TimeSeriesPanel(monthly_dates((1955, 1), n_months), entities, np.column_stack(cols), "monthly")


def near_identical_returns(seed: int = 0, n_series: int = 10, n_similar: int = 8,
                           length: int = 120, eps: float = 1e-3) -> ReturnsPanel:
    """``n_similar`` copies of one return series, each with L1 noise of size about ``eps / 2``.

    The remaining series are independent draws. Returned as a returns panel
    whose L1-normalized rows are within about ``eps`` of each other.
    """
    rng = np.random.default_rng(seed)
    base = rng.standard_normal(length)
    base /= np.abs(base).sum()
    cols = []
    for _ in range(n_similar):
        z = rng.standard_normal(length)
        cols.append(base + 0.5 * eps * z / np.abs(z).sum())
    for _ in range(n_series - n_similar):
        z = rng.standard_normal(length)
        cols.append(z / np.abs(z).sum())
    names = [f"S{k}" for k in range(1, n_series + 1)]
    return ReturnsPanel(monthly_dates((2000, 1), length), names, np.column_stack(cols), "monthly")


def equity_panel(seed: int = 1, cpi: TimeSeriesPanel | None = None, start=(1990, 1)) -> TimeSeriesPanel:
    """Monthly equity index levels for the CPI entities from ``start`` onward."""
    rng = np.random.default_rng(seed)
    cpi = cpi if cpi is not None else cpi_panel()
    dates = tuple(d for d in cpi.dates if d >= (start[0], start[1], 1))
    cols = []
    for k, _ in enumerate(cpi.entities):
        vol = 0.03 + 0.003 * k
        r = 0.006 + vol * rng.standard_normal(len(dates) - 1)
        cols.append(1000.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)])))
    return TimeSeriesPanel(dates, cpi.entities, np.column_stack(cols), "monthly")


SECTORS = {"Energy": 0.8, "Utilities": 0.6, "Financials": 0.45, "Healthcare": 0.3}


def sector_prices(seed: int = 2, n_days: int = 400, per_sector: int = 4):
    """Daily prices with one common factor per sector; loadings set the correlation level."""
    rng = np.random.default_rng(seed)
    names, mapping, cols = [], {}, []
    for sector, rho in SECTORS.items():
        f = rng.standard_normal(n_days - 1)
        for k in range(per_sector):
            e = f"{sector[:3].upper()}{k + 1}"
            z = np.sqrt(rho) * f + np.sqrt(1 - rho) * rng.standard_normal(n_days - 1)
            r = 0.0003 + 0.015 * z
            names.append(e)
            mapping[e] = sector
            cols.append(50.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)])))
    panel = TimeSeriesPanel(business_dates((2005, 1, 3), n_days), names, np.column_stack(cols), "daily")
    return panel, SectorMap(mapping)


ASSETS = ("EQUITY", "GAS", "METALS", "ENERGY", "COMMOD", "REIT", "CRYPTO")


def asset_prices(seed: int = 3, n_days: int = 330, dominant: str = "CRYPTO") -> TimeSeriesPanel:
    """Daily asset prices; ``dominant`` has by far the largest mean return."""
    rng = np.random.default_rng(seed)
    T = n_days - 1
    market = rng.standard_normal(T)
    cols = []
    for k, a in enumerate(ASSETS):
        beta = 0.5 if a != dominant else 0.2
        vol = 0.01 + 0.002 * k
        mean = 0.012 if a == dominant else 0.0004
        if a == dominant:
            vol = 0.04
        z = beta * market + np.sqrt(1 - beta ** 2) * rng.standard_normal(T)
        r = mean + vol * z
        cols.append(100.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)])))
    return TimeSeriesPanel(business_dates((2016, 1, 4), n_days), ASSETS, np.column_stack(cols), "daily")


def shifted_pair(seed: int = 0, length: int = 200, shift: int = 3):
    """A random trajectory and a copy delayed by ``shift`` steps (so ``b[t] = a[t - shift]``)."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(length + abs(shift))
    if shift >= 0:
        return a[shift:], a[:length]
    return a[:length], a[-shift:]


def portfolio_instance(seed: int = 0, n_assets: int = 4, window: int = 250):
    """Random daily returns window (rows x assets) for optimizer checks."""
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n_assets, n_assets)) * 0.01
    return rng.normal(size=(window, n_assets)) @ L + rng.normal(0.001, 0.002, size=n_assets)
