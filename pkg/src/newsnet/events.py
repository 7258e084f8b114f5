"""Sentiment event days, neighbour spillover profiles and event cross-structure."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .network import InsufficientWindowError, Network
from .sentiment import SentimentPanel
from .statkit import mann_whitney_u

log = logging.getLogger(__name__)

POSITIVE, NEGATIVE = "positive", "negative"
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True, order=True)
class SentimentEvent:
    ticker: str
    date: dt.date
    direction: str
    z_score: float

    def __post_init__(self):
        if self.direction not in (POSITIVE, NEGATIVE):
            raise ValueError(f"bad direction {self.direction!r}")

    @property
    def sign(self) -> int:
        return 1 if self.direction == POSITIVE else -1


def significance_tier(p: float) -> str:
    """'strong' for p < 0.01, 'weak' for 0.01 <= p < 0.05, else ''."""
    if p is None or np.isnan(p):
        return ""
    if p < 0.01:
        return "strong"
    if p < 0.05:
        return "weak"
    return ""


@dataclass(frozen=True)
class EventProfile:
    """Statistic per relative trading day; NaN where no value exists."""

    offsets: tuple[int, ...]
    mean: np.ndarray
    median: np.ndarray
    p_values: np.ndarray
    n_events: int

    @classmethod
    def empty(cls, span: int = 7) -> "EventProfile":
        offsets = tuple(range(-span, span + 1))
        nan = np.full(len(offsets), np.nan)
        return cls(offsets, nan.copy(), nan.copy(), nan.copy(), 0)

    @property
    def tiers(self) -> list[str]:
        return [significance_tier(p) for p in self.p_values]

    def at(self, offset: int) -> tuple[float, float, float]:
        i = self.offsets.index(offset)
        return float(self.mean[i]), float(self.median[i]), float(self.p_values[i])


def detect_events(
    series: Sequence[float],
    calendar: Sequence[dt.date],
    ticker: str = "",
    lookback: int = 180,
    z: float = 2.0,
    min_obs: int = 30,
) -> list[SentimentEvent]:
    """Days whose value leaves the band mu +- z*sigma of the preceding window.

    The window is the ``lookback`` trading days before the day, using only
    present (non-NaN) values; sigma is the population standard deviation.
    Days without a full lookback, with fewer than ``min_obs`` present values
    or with sigma below 1e-12 are skipped.
    """
    x = np.asarray(series, dtype=float)
    if len(x) != len(calendar):
        raise ValueError("series and calendar differ in length")
    if len(x) <= lookback:
        return []
    windows = np.lib.stride_tricks.sliding_window_view(x, lookback)[:-1]  # window t covers [t, t+lookback)
    today = x[lookback:]
    present = ~np.isnan(windows)
    n = present.sum(axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mu = np.nanmean(windows, axis=1)
        sigma = np.nanstd(windows, axis=1)
    ok = (n >= min_obs) & (sigma >= SIGMA_FLOOR) & ~np.isnan(today)
    out = []
    for k in np.flatnonzero(ok):
        v, m, s = today[k], mu[k], sigma[k]
        if v > m + z * s:
            direction = POSITIVE
        elif v < m - z * s:
            direction = NEGATIVE
        else:
            continue
        out.append(SentimentEvent(ticker, calendar[k + lookback], direction, float((v - m) / s)))
    return out


def detect_panel_events(panel: SentimentPanel, **kwargs) -> list[SentimentEvent]:
    events = []
    for i, t in enumerate(panel.tickers):
        events.extend(detect_events(panel.values[i], panel.calendar, ticker=t, **kwargs))
    return sorted(events, key=lambda e: (e.date, e.ticker))


def top_k_neighbours(g: Network, c: str, k: int = 10) -> tuple[str, ...]:
    """The min(k, degree) heaviest neighbours of ``c``; ties go to the smaller ticker."""
    ranked = sorted(g.neighbours(c).items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(t for t, _ in ranked[:k])


def neighbour_sentiment(g: Network, c: str, panel: SentimentPanel, day: dt.date, k: int = 10) -> float | None:
    """Unweighted mean of the present sentiments of the top-k neighbours on ``day``."""
    try:
        j = panel.date_index(day)
    except KeyError:
        return None
    return _neighbour_mean(g, c, panel, j, k)


def _neighbour_mean(g: Network, c: str, panel: SentimentPanel, j: int, k: int) -> float | None:
    rows = {t: i for i, t in enumerate(panel.tickers)}
    vals = [panel.values[rows[t], j] for t in top_k_neighbours(g, c, k) if t in rows]
    vals = [v for v in vals if not np.isnan(v)]
    return float(np.sum(vals)) / len(vals) if vals else None


NetworkProvider = Callable[[dt.date], Network]


def event_offset_values(
    event: SentimentEvent,
    panel: SentimentPanel,
    networks: NetworkProvider,
    k: int = 10,
    span: int = 7,
) -> np.ndarray | None:
    """Neighbour sentiment at offsets -span..span around one event (NaN if absent).

    The network is the one built for the event day and is reused at every
    offset. Returns None when no network can be built for the event day.
    """
    try:
        g = networks(event.date)
    except InsufficientWindowError:
        return None
    if event.ticker not in g.nodes:
        return None
    t0 = panel.date_index(event.date)
    rows = {t: i for i, t in enumerate(panel.tickers)}
    idx = [rows[t] for t in top_k_neighbours(g, event.ticker, k) if t in rows]
    out = np.full(2 * span + 1, np.nan)
    lo, hi = max(0, t0 - span), min(len(panel.calendar), t0 + span + 1)
    if idx and lo < hi:
        block = panel.values[idx, lo:hi]
        present = ~np.isnan(block)
        n = present.sum(axis=0)
        total = np.where(present, block, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[lo - t0 + span : hi - t0 + span] = np.where(n > 0, total / np.maximum(n, 1), np.nan)
    return out


def group_event_profile(
    group: Iterable[str],
    events: Sequence[SentimentEvent],
    panel: SentimentPanel,
    networks: NetworkProvider,
    k: int = 10,
    span: int = 7,
) -> EventProfile:
    """Group aggregate neighbour sentiment around the events of group members.

    ``mean`` averages each company's neighbour sentiment over its own events
    first and then over companies. ``median`` is taken over the pooled
    per-event values. The p-value at offset tau is a two-sided Mann-Whitney U
    test of the per-event values at tau against the pooled pre-event values
    (offsets -span..-1, without tau itself), i.e. a test of no change relative
    to the run-up.
    """
    members = set(group)
    stray = [e for e in events if e.ticker not in members]
    if stray:
        raise ValueError(f"events outside the group: {sorted({e.ticker for e in stray})}")
    per_company: dict[str, list[np.ndarray]] = defaultdict(list)
    for e in sorted(events):
        vals = event_offset_values(e, panel, networks, k, span)
        if vals is None:
            log.info("event %s %s skipped: no network for the event day", e.ticker, e.date)
            continue
        per_company[e.ticker].append(vals)
    n_events = sum(len(v) for v in per_company.values())
    if n_events == 0:
        return EventProfile.empty(span)
    offsets = tuple(range(-span, span + 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        company_means = np.array([np.nanmean(np.vstack(v), axis=0) for _, v in sorted(per_company.items())])
        mean = np.nanmean(company_means, axis=0)
    pooled = np.vstack([row for v in per_company.values() for row in v])
    median = np.full(len(offsets), np.nan)
    p = np.full(len(offsets), np.nan)
    for i, tau in enumerate(offsets):
        col = pooled[:, i]
        col = col[~np.isnan(col)]
        if col.size:
            median[i] = np.median(col)
        ref = pooled[:, [j for j, o in enumerate(offsets) if o < 0 and o != tau]].ravel()
        ref = ref[~np.isnan(ref)]
        if col.size and ref.size:
            p[i] = mann_whitney_u(col, ref).p_value
    return EventProfile(offsets, mean, median, p, n_events)


def event_series(events: Iterable[SentimentEvent], tickers: Sequence[str], calendar: Sequence[dt.date]) -> np.ndarray:
    """Tickers x days matrix with +1 / -1 on positive / negative event days, else 0."""
    row = {t: i for i, t in enumerate(tickers)}
    col = {d: j for j, d in enumerate(calendar)}
    out = np.zeros((len(tickers), len(calendar)))
    for e in events:
        out[row[e.ticker], col[e.date]] = e.sign
    return out


def event_correlation_matrix(series: np.ndarray) -> np.ndarray:
    """Pearson correlation between rows; rows with zero variance give NaN entries."""
    x = np.asarray(series, dtype=float)
    centred = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt((centred**2).sum(axis=1))
    valid = norms > 0
    out = np.full((len(x), len(x)), np.nan)
    if valid.any():
        z = centred[valid] / norms[valid, None]
        out[np.ix_(valid, valid)] = np.clip(z @ z.T, -1.0, 1.0)
    return out


def explained_variance(series: np.ndarray, n_factors: int = 5) -> float:
    """Share of total variance carried by the top principal components.

    Rows are series. Zero-variance rows are dropped; the result is the sum of
    the largest ``n_factors`` eigenvalues of the correlation matrix over its
    trace. This is a principal-component proxy for a factor model.
    """
    x = np.asarray(series, dtype=float)
    if np.isnan(x).any():
        raise ValueError("series contain NaN; fill absent values first")
    x = x[x.std(axis=1) > 0]
    if len(x) < n_factors:
        raise ValueError(f"{len(x)} series with nonzero variance, need at least {n_factors}")
    corr = np.corrcoef(x)
    eig = np.linalg.eigvalsh(corr)[::-1]
    return float(min(1.0, eig[:n_factors].sum() / np.trace(corr)))


# --- I/O ------------------------------------------------------------------


def write_events(events: Iterable[SentimentEvent], handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["ticker", "date", "direction", "z"])
    for e in sorted(events, key=lambda e: (e.date, e.ticker)):
        w.writerow([e.ticker, e.date.isoformat(), e.direction, repr(e.z_score)])


def read_events(lines: Iterable[str]) -> list[SentimentEvent]:
    reader = csv.DictReader(line for line in lines if not line.startswith("#"))
    if reader.fieldnames != ["ticker", "date", "direction", "z"]:
        raise ValueError("events CSV header must be ticker,date,direction,z")
    return [SentimentEvent(r["ticker"], dt.date.fromisoformat(r["date"]), r["direction"], float(r["z"])) for r in reader]


def _cell(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_profile(profile: EventProfile, handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["offset", "mean", "median", "p"])
    for i, tau in enumerate(profile.offsets):
        w.writerow([tau, _cell(profile.mean[i]), _cell(profile.median[i]), _cell(profile.p_values[i])])


def read_profile(lines: Iterable[str], n_events: int = 0) -> EventProfile:
    reader = csv.DictReader(line for line in lines if not line.startswith("#"))
    rows = list(reader)

    def col(name):
        return np.array([float(r[name]) if r[name] else np.nan for r in rows])

    return EventProfile(tuple(int(r["offset"]) for r in rows), col("mean"), col("median"), col("p"), n_events)


def profile_index(entries: Mapping[str, tuple[str, EventProfile]]) -> dict:
    """JSON-ready index: key -> {file, n_events, significant offsets}."""
    out = {}
    for key, (path, prof) in sorted(entries.items()):
        out[key] = {
            "file": path,
            "n_events": prof.n_events,
            "significant": {tier: [o for o, t in zip(prof.offsets, prof.tiers) if t == tier] for tier in ("strong", "weak")},
        }
    return out
