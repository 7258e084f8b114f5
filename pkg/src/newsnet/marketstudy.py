"""Returns, rolling CAPM abnormal returns, CAR and event-window market studies."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .events import EventProfile, SentimentEvent, significance_tier
from .statkit import DensityEstimate, kde, mann_whitney_u

log = logging.getLogger(__name__)

PHASES = ("before", "on", "after")
KDE_MIN_EVENTS = 20  # a density is estimated only with more events than this


class PriceDomainError(ValueError):
    pass


class CapmFitError(ValueError):
    pass


def log_return(p_prev: float, p: float) -> float:
    if not (p_prev > 0 and p > 0):
        raise PriceDomainError(f"prices must be positive, got {p_prev} and {p}")
    return math.log(p / p_prev)


def volatility_proxy(p_prev: float, p: float) -> float:
    """Absolute daily log-return."""
    return abs(log_return(p_prev, p))


@dataclass(frozen=True)
class MarketPanel:
    """Closing prices on a trading calendar; NaN marks a missing close."""

    tickers: tuple[str, ...]
    calendar: tuple[dt.date, ...]
    close: np.ndarray  # tickers x days
    index_close: np.ndarray  # days

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.calendar, self.calendar[1:])):
            raise ValueError("calendar must be strictly increasing")
        if self.close.shape != (len(self.tickers), len(self.calendar)) or self.index_close.shape != (len(self.calendar),):
            raise ValueError("price arrays do not match tickers x calendar")
        with np.errstate(invalid="ignore"):
            if (self.close <= 0).any() or (self.index_close <= 0).any() or np.isnan(self.index_close).any():
                raise PriceDomainError("prices must be positive; the index needs a close on every trading day")

    def returns(self) -> np.ndarray:
        """Log-returns per ticker; NaN on the first day and next to missing closes."""
        r = np.full(self.close.shape, np.nan)
        r[:, 1:] = np.log(self.close[:, 1:] / self.close[:, :-1])
        return r

    def index_returns(self) -> np.ndarray:
        r = np.full(len(self.calendar), np.nan)
        r[1:] = np.log(self.index_close[1:] / self.index_close[:-1])
        return r

    def date_index(self, day: dt.date) -> int:
        i = bisect.bisect_left(self.calendar, day)
        if i == len(self.calendar) or self.calendar[i] != day:
            raise KeyError(day)
        return i


def _read_rows(lines: Iterable[str], header: list[str]) -> list[dict[str, str]]:
    reader = csv.DictReader(line for line in lines if not line.startswith("#"))
    if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != header:
        raise ValueError(f"expected CSV header {','.join(header)}, got {reader.fieldnames}")
    return list(reader)


def read_market(market_lines: Iterable[str], index_lines: Iterable[str]) -> MarketPanel:
    """Build a panel from ``date,ticker,close`` and ``date,close`` CSVs.

    The calendar holds the days with an index close and at least one stock
    close. Stock closes on other days are ignored.
    """
    stock: dict[str, dict[dt.date, float]] = defaultdict(dict)
    for n, row in enumerate(_read_rows(market_lines, ["date", "ticker", "close"]), start=2):
        price = float(row["close"])
        if not price > 0:
            raise PriceDomainError(f"line {n}: non-positive close {price}")
        stock[row["ticker"]][dt.date.fromisoformat(row["date"])] = price
    index: dict[dt.date, float] = {}
    for n, row in enumerate(_read_rows(index_lines, ["date", "close"]), start=2):
        price = float(row["close"])
        if not price > 0:
            raise PriceDomainError(f"index line {n}: non-positive close {price}")
        index[dt.date.fromisoformat(row["date"])] = price
    traded = {d for series in stock.values() for d in series}
    calendar = tuple(sorted(traded & set(index)))
    tickers = tuple(sorted(stock))
    close = np.array([[stock[t].get(d, np.nan) for d in calendar] for t in tickers], dtype=float).reshape(len(tickers), len(calendar))
    return MarketPanel(tickers, calendar, close, np.array([index[d] for d in calendar], dtype=float))


def write_market(panel: MarketPanel, market_handle, index_handle) -> None:
    w = csv.writer(market_handle, lineterminator="\n")
    w.writerow(["date", "ticker", "close"])
    for j, d in enumerate(panel.calendar):
        for i, t in enumerate(panel.tickers):
            if not np.isnan(panel.close[i, j]):
                w.writerow([d.isoformat(), t, repr(float(panel.close[i, j]))])
    w = csv.writer(index_handle, lineterminator="\n")
    w.writerow(["date", "close"])
    for d, p in zip(panel.calendar, panel.index_close):
        w.writerow([d.isoformat(), repr(float(p))])


# --- CAPM -------------------------------------------------------------------


@dataclass(frozen=True)
class CapmFit:
    alpha: float
    beta: float
    window: tuple[dt.date, dt.date] | None = None
    n: int = 0


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    mx, my = x.mean(), y.mean()
    dx = x - mx
    sxx = float(dx @ dx)
    if sxx <= 1e-30 * max(1.0, float(x @ x)):
        raise CapmFitError("index returns have zero variance in the fit window")
    beta = float(dx @ (y - my)) / sxx
    return float(my - beta * mx), beta


def fit_capm(
    stock_returns: Sequence[float],
    index_returns: Sequence[float],
    calendar: Sequence[dt.date],
    at: dt.date,
    window: int = 180,
    min_pairs: int = 120,
) -> CapmFit:
    """OLS of stock on index returns over the ``window`` trading days before ``at``."""
    i = list(calendar).index(at)
    if i < window:
        raise CapmFitError(f"only {i} trading days before {at}, need {window}")
    y = np.asarray(stock_returns, dtype=float)[i - window : i]
    x = np.asarray(index_returns, dtype=float)[i - window : i]
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < min_pairs:
        raise CapmFitError(f"{int(ok.sum())} paired returns before {at}, need {min_pairs}")
    alpha, beta = _ols(x[ok], y[ok])
    return CapmFit(alpha, beta, (calendar[i - window], calendar[i - 1]), int(ok.sum()))


def abnormal_return(fit: CapmFit, r: float, r_m: float) -> float:
    return r - fit.alpha - fit.beta * r_m


def rolling_abnormal_returns(market: MarketPanel, window: int = 180, min_pairs: int = 120) -> np.ndarray:
    """AR for every ticker and day from a CAPM fitted on the preceding window.

    Cells are NaN where the return is missing or no valid fit exists.
    """
    r, rm = market.returns(), market.index_returns()
    n_days = len(market.calendar)
    out = np.full(r.shape, np.nan)
    if n_days <= window:
        return out
    xw = np.lib.stride_tricks.sliding_window_view(rm, window)[:-1]  # row k: days [k, k+window)
    for i in range(len(market.tickers)):
        yw = np.lib.stride_tricks.sliding_window_view(r[i], window)[:-1]
        ok = ~(np.isnan(xw) | np.isnan(yw))
        n = ok.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mx = np.where(ok, xw, 0.0).sum(axis=1) / n
            my = np.where(ok, yw, 0.0).sum(axis=1) / n
            dx = np.where(ok, xw - mx[:, None], 0.0)
            dy = np.where(ok, yw - my[:, None], 0.0)
            sxx = (dx * dx).sum(axis=1)
            scale = np.where(ok, xw * xw, 0.0).sum(axis=1)
            beta = (dx * dy).sum(axis=1) / sxx
            alpha = my - beta * mx
            ar = r[i, window:] - alpha - beta * rm[window:]
        valid = (n >= min_pairs) & (sxx > 1e-30 * np.maximum(1.0, scale))
        out[i, window:] = np.where(valid, ar, np.nan)
    return out


# --- CAR --------------------------------------------------------------------


def car_series(ar: Sequence[float], trail: int = 7) -> np.ndarray:
    """CAR(t) = sum of AR over [t - trail, t]; NaN where any term is missing."""
    x = np.asarray(ar, dtype=float)
    out = np.full(len(x), np.nan)
    if len(x) > trail:
        out[trail:] = np.lib.stride_tricks.sliding_window_view(x, trail + 1).sum(axis=1)
    return out


def event_car(ar: Sequence[float], t0: int, span: int = 7, trail: int = 7) -> np.ndarray | None:
    """CAR at offsets -span..span around index ``t0``; None if any needed AR is missing."""
    x = np.asarray(ar, dtype=float)
    lo, hi = t0 - span - trail, t0 + span + 1
    if lo < 0 or hi > len(x) or np.isnan(x[lo:hi]).any():
        return None
    return car_series(x[lo:hi], trail)[trail:]


# --- event-window study -----------------------------------------------------


@dataclass(frozen=True)
class MarketProfile:
    direction: str
    car: EventProfile
    vol: EventProfile


@dataclass
class WindowStudy:
    profiles: dict[str, dict[str, MarketProfile]]  # group -> direction -> profile
    dropped: list[tuple[SentimentEvent, str]] = field(default_factory=list)


def _profile(samples: np.ndarray, ref_for: callable, span: int) -> EventProfile:
    offsets = tuple(range(-span, span + 1))
    mean = samples.mean(axis=0)
    med = np.median(samples, axis=0)
    p = np.full(len(offsets), np.nan)
    for i in range(len(offsets)):
        ref = ref_for(i)
        if ref.size:
            p[i] = mann_whitney_u(samples[:, i], ref).p_value
    return EventProfile(offsets, mean, med, p, len(samples))


def event_window_study(
    events: Sequence[SentimentEvent],
    market: MarketPanel,
    groups: Mapping[str, Iterable[str]],
    ar: np.ndarray | None = None,
    span: int = 7,
    trail: int = 7,
) -> WindowStudy:
    """CAR and volatility profiles around sentiment events, per group and direction.

    An event needs AR on [T - span - trail, T + span] and returns on
    [T - span, T + span]; otherwise it is dropped and listed with the reason.

    CAR p-values compare each offset's CAR sample against the CAR of the
    group's member companies on days more than ``span`` trading days away
    from any of their events, which realises the zero-CAR null as a
    two-sample Mann-Whitney test. Reference days are thinned to every
    ``trail + 1``-th trading day so that no two reference CARs share an AR
    term; overlapping sums would make the reference strongly autocorrelated
    and the test anti-conservative. Volatility p-values compare each offset's
    sample against the pooled pre-event sample (offsets -span..-1, without
    the offset itself).
    """
    if ar is None:
        ar = rolling_abnormal_returns(market)
    vol = np.abs(market.returns())
    row = {t: i for i, t in enumerate(market.tickers)}
    n_days = len(market.calendar)
    by_ticker: dict[str, list[SentimentEvent]] = defaultdict(list)
    for e in events:
        by_ticker[e.ticker].append(e)
    study = WindowStudy({})
    for label, members in sorted(groups.items()):
        members = sorted(set(members))
        cars: dict[str, list[np.ndarray]] = defaultdict(list)
        vols: dict[str, list[np.ndarray]] = defaultdict(list)
        reference = []
        for t in members:
            if t not in row:
                for e in by_ticker.get(t, []):
                    study.dropped.append((e, "no market data for ticker"))
                continue
            i = row[t]
            near = np.zeros(n_days, dtype=bool)
            for e in sorted(by_ticker.get(t, [])):
                try:
                    t0 = market.date_index(e.date)
                except KeyError:
                    study.dropped.append((e, "event day is not a trading day"))
                    continue
                near[max(0, t0 - span) : t0 + span + 1] = True
                c = event_car(ar[i], t0, span, trail)
                v = vol[i, t0 - span : t0 + span + 1] if t0 - span >= 0 and t0 + span < n_days else None
                if c is None or v is None or np.isnan(v).any():
                    study.dropped.append((e, "incomplete market window"))
                    log.info("event %s %s dropped: incomplete market window", e.ticker, e.date)
                    continue
                cars[e.direction].append(c)
                vols[e.direction].append(v)
            cs = car_series(ar[i], trail)
            stride = np.arange(n_days) % (trail + 1) == 0
            reference.append(cs[stride & ~near & ~np.isnan(cs)])
        ref = np.concatenate(reference) if reference else np.array([])
        out = {}
        for direction in sorted(cars):
            c, v = np.vstack(cars[direction]), np.vstack(vols[direction])
            if ref.size == 0:
                car_prof = EventProfile(tuple(range(-span, span + 1)), c.mean(0), np.median(c, 0), np.full(2 * span + 1, np.nan), len(c))
            else:
                car_prof = _profile(c, lambda i: ref, span)
            pre = list(range(span))
            vol_prof = _profile(v, lambda i: v[:, [j for j in pre if j != i]].ravel(), span)
            out[direction] = MarketProfile(direction, car_prof, vol_prof)
        if out:
            study.profiles[label] = out
    return study


PROFILE_HEADER = ["offset", "mean_car", "median_car", "p_car", "mean_vol", "median_vol", "p_vol", "direction"]


def _cell(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_market_profiles(profiles: Mapping[str, MarketProfile], handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for direction in sorted(profiles):
        mp = profiles[direction]
        for k, tau in enumerate(mp.car.offsets):
            w.writerow([
                tau,
                _cell(mp.car.mean[k]), _cell(mp.car.median[k]), _cell(mp.car.p_values[k]),
                _cell(mp.vol.mean[k]), _cell(mp.vol.median[k]), _cell(mp.vol.p_values[k]),
                direction,
            ])


def significant_offsets(profile: EventProfile) -> dict[str, list[int]]:
    tiers = [significance_tier(p) for p in profile.p_values]
    return {tier: [o for o, t in zip(profile.offsets, tiers) if t == tier] for tier in ("strong", "weak")}


# --- distribution study -----------------------------------------------------


@dataclass(frozen=True)
class PhaseDistribution:
    sample: np.ndarray
    counts: np.ndarray | None
    edges: np.ndarray | None
    density: DensityEstimate | None


@dataclass
class DistributionStudy:
    group: str
    n_events: int
    phases: dict[tuple[str, str], PhaseDistribution]  # (phase, metric) -> distribution


def histogram(sample: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bins = int(min(100, max(1, math.ceil(math.sqrt(len(sample))))))
    return np.histogram(sample, bins=bins)


def group_distribution_study(
    group_events: Sequence[SentimentEvent],
    market: MarketPanel,
    members: Iterable[str],
    ar: np.ndarray | None = None,
    span: int = 7,
    label: str = "",
    kde_min_events: int = KDE_MIN_EVENTS,
) -> DistributionStudy:
    """Member AR and volatility before [T-span, T), on T and after (T, T+span].

    Histograms are always produced for non-empty samples; the kernel density
    only when there are more than ``kde_min_events`` (default 20) group events.
    """
    if ar is None:
        ar = rolling_abnormal_returns(market)
    vol = np.abs(market.returns())
    rows = [i for i, t in enumerate(market.tickers) if t in set(members)]
    acc: dict[tuple[str, str], list[float]] = {(p, m): [] for p in PHASES for m in ("ar", "vol")}
    used = 0
    for e in sorted(group_events):
        try:
            t0 = market.date_index(e.date)
        except KeyError:
            continue
        used += 1
        spans = {
            "before": range(max(0, t0 - span), t0),
            "on": range(t0, t0 + 1),
            "after": range(t0 + 1, min(len(market.calendar), t0 + span + 1)),
        }
        for phase, days in spans.items():
            cols = list(days)
            for metric, data in (("ar", ar), ("vol", vol)):
                block = data[np.ix_(rows, cols)].ravel()
                acc[(phase, metric)].extend(block[~np.isnan(block)].tolist())
    out = {}
    for key, values in acc.items():
        sample = np.array(values)
        if sample.size == 0:
            out[key] = PhaseDistribution(sample, None, None, None)
            continue
        counts, edges = histogram(sample)
        density = kde(sample) if used > kde_min_events else None
        out[key] = PhaseDistribution(sample, counts, edges, density)
    return DistributionStudy(label, used, out)


def write_density(d: DensityEstimate, handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["grid", "density"])
    for x, y in zip(d.grid, d.density):
        w.writerow([f"{x:.10g}", f"{y:.10g}"])


def write_histogram(counts: np.ndarray, edges: np.ndarray, handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["bin_left", "bin_right", "count"])
    for k, c in enumerate(counts):
        w.writerow([f"{edges[k]:.10g}", f"{edges[k + 1]:.10g}", int(c)])
