"""Daily sentiment panels, period/sector aggregation and concentration curves."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Article, Corpus, DateRange

NEUTRAL_EPS = 1e-12


@dataclass(frozen=True)
class SentimentPanel:
    """Companies x dates matrix of mean sentiment; NaN marks no mentions."""

    tickers: tuple[str, ...]
    calendar: tuple[dt.date, ...]
    values: np.ndarray

    def row(self, ticker: str) -> np.ndarray:
        return self.values[self.tickers.index(ticker)]

    def date_index(self, day: dt.date) -> int:
        i = bisect.bisect_left(self.calendar, day)
        if i == len(self.calendar) or self.calendar[i] != day:
            raise KeyError(day)
        return i

    def value(self, ticker: str, day: dt.date) -> float | None:
        v = self.values[self.tickers.index(ticker), self.date_index(day)]
        return None if np.isnan(v) else float(v)

    def __eq__(self, other):
        if not isinstance(other, SentimentPanel):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.calendar == other.calendar
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class ConcentrationCurve:
    points: np.ndarray  # (n + 1, 2): article fraction, sentiment fraction
    degenerate: bool = False

    def article_share_for(self, sentiment_share: float) -> float:
        """Smallest article fraction whose cumulative sentiment reaches the share."""
        idx = int(np.searchsorted(self.points[:, 1], sentiment_share - 1e-12, side="left"))
        return float(self.points[min(idx, len(self.points) - 1), 0])


def daily_sentiment(corpus: Corpus, tickers: Sequence[str], calendar: Sequence[dt.date]) -> SentimentPanel:
    """Mean sentiment per company and calendar day over all its mentions.

    An article dated between two calendar days counts toward the next
    calendar day, so news from non-trading days lands on the following
    trading day. Articles after the last calendar day are ignored.
    """
    cal = tuple(calendar)
    row = {t: i for i, t in enumerate(tickers)}
    sums = np.zeros((len(tickers), len(cal)))
    counts = np.zeros((len(tickers), len(cal)), dtype=np.int64)
    for a in corpus:
        j = bisect.bisect_left(cal, a.date)
        if j == len(cal):
            continue
        for m in a.target_mentions():
            i = row.get(m.canonical)
            if i is not None:
                sums[i, j] += m.sentiment
                counts[i, j] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return SentimentPanel(tuple(tickers), cal, values)


def period_aggregate(
    panel: SentimentPanel, grouping: Mapping[str, str], periods: Sequence[DateRange]
) -> dict[str, list[float | None]]:
    """Mean of all present company-day cells of each label within each period."""
    missing = [t for t in panel.tickers if t not in grouping]
    if missing:
        raise KeyError(f"tickers without a group: {missing}")
    members: dict[str, list[int]] = defaultdict(list)
    for i, t in enumerate(panel.tickers):
        members[grouping[t]].append(i)
    cal = np.array([d.toordinal() for d in panel.calendar])
    out: dict[str, list[float | None]] = {}
    for label in sorted(members):
        block = panel.values[members[label]]
        cells = []
        for p in periods:
            cols = (cal >= p.start.toordinal()) & (cal <= p.end.toordinal())
            vals = block[:, cols]
            vals = vals[~np.isnan(vals)]
            cells.append(float(vals.mean()) if vals.size else None)
        out[label] = cells
    return out


def group_series(panel: SentimentPanel, members: Iterable[str]) -> np.ndarray:
    """Daily average over the present values of the member companies."""
    rows = [panel.tickers.index(t) for t in members]
    block = panel.values[rows]
    present = ~np.isnan(block)
    n = present.sum(axis=0)
    total = np.where(present, block, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, total / np.maximum(n, 1), np.nan)


def _article_company_means(article: Article, tickers: Iterable[str]) -> dict[str, float]:
    wanted = set(tickers)
    acc: dict[str, list[float]] = defaultdict(list)
    for m in article.target_mentions():
        if m.canonical in wanted:
            acc[m.canonical].append(m.sentiment)
    return {t: sum(v) / len(v) for t, v in acc.items()}


def sentiment_bearing(article: Article, tickers: Iterable[str], eps: float = NEUTRAL_EPS) -> bool:
    """True if some target company's mean sentiment in the article is non-neutral."""
    return any(abs(s) > eps for s in _article_company_means(article, tickers).values())


def article_sentiment_mass(article: Article, tickers: Iterable[str]) -> float:
    return sum(abs(s) for s in _article_company_means(article, tickers).values())


def concentration_curve(corpus: Corpus, tickers: Sequence[str], eps: float = NEUTRAL_EPS) -> ConcentrationCurve:
    """Cumulative share of total non-neutral sentiment against share of articles.

    Only sentiment-bearing articles count; they are ranked by descending
    total absolute sentiment toward the target companies.
    """
    if len(corpus) == 0:
        raise ValueError("concentration curve of an empty corpus")
    masses = np.array([article_sentiment_mass(a, tickers) for a in corpus])
    masses = masses[masses > eps]
    total = masses.sum()
    if masses.size == 0 or total <= 0:
        return ConcentrationCurve(np.array([[0.0, 0.0], [1.0, 1.0]]), degenerate=True)
    ordered = np.sort(masses)[::-1]
    n = ordered.size
    x = np.arange(n + 1) / n
    y = np.concatenate([[0.0], np.cumsum(ordered) / total])
    y[-1] = 1.0
    return ConcentrationCurve(np.column_stack([x, y]))


def write_panel(panel: SentimentPanel, handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["date", *panel.tickers])
    for j, day in enumerate(panel.calendar):
        col = panel.values[:, j]
        w.writerow([day.isoformat(), *("" if np.isnan(v) else repr(float(v)) for v in col)])


def read_panel(lines: Iterable[str]) -> SentimentPanel:
    reader = csv.reader(line for line in lines if not line.startswith("#"))
    header = next(reader)
    if not header or header[0] != "date":
        raise ValueError("panel CSV must start with a 'date' column")
    tickers = tuple(header[1:])
    days, cols = [], []
    for rec in reader:
        days.append(dt.date.fromisoformat(rec[0]))
        cols.append([float(v) if v != "" else np.nan for v in rec[1:]])
    values = np.array(cols, dtype=float).T if cols else np.zeros((len(tickers), 0))
    return SentimentPanel(tickers, tuple(days), values.reshape(len(tickers), len(days)))
