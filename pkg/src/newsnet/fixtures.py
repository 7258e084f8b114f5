"""Deterministic synthetic inputs: universe, news corpus, stock and index prices.

The generator plants the structures the pipeline is meant to find: sector
blocks in the co-mention pattern, company sentiment spikes that spill over
to same-sector companies, and abnormal returns on spike days.

Sentiment noise is uniform. A uniform on [-a, a] never leaves its own
mean +- 2 sd band (2 sd = 1.155 a), so noise crosses the 2-sigma event rule
only through sampling error in the window estimates, and then only barely.
Planted spikes score far higher, and a spillover well below the band shows
up in neighbour profiles without creating events of its own. A spike is
only observable on days the company is mentioned.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SECTORS = ("Financials", "Technology", "Energy")
SECTOR_STEMS = {"Financials": "Bank", "Technology": "Soft", "Energy": "Oil"}


@dataclass
class FixtureSpec:
    n_per_sector: int = 10
    n_days: int = 700
    start: dt.date = dt.date(2007, 1, 1)
    articles_per_day: float = 5.0
    p_in_sector: float = 0.9
    spikes_per_company: int = 3
    spike_size: float = 0.8
    spillover: float = 0.035
    spillover_days: int = 5
    jump: float = 0.05
    day_noise: float = 0.25
    mention_noise: float = 0.02
    return_noise: float = 0.005
    seed: int = 0


@dataclass
class Fixture:
    spec: FixtureSpec
    universe: list[tuple[str, str, str, str]]
    calendar: list[dt.date]
    articles: list[dict]
    close: np.ndarray
    index_close: np.ndarray
    spikes: list[tuple[str, dt.date, int]] = field(default_factory=list)

    @property
    def tickers(self) -> list[str]:
        return [u[0] for u in self.universe]

    @property
    def sectors(self) -> dict[str, str]:
        return {u[0]: u[2] for u in self.universe}


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, day = [], start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def _universe(spec: FixtureSpec) -> list[tuple[str, str, str, str]]:
    rows = []
    for s, sector in enumerate(SECTORS):
        stem = SECTOR_STEMS[sector]
        for i in range(spec.n_per_sector):
            ticker = f"{stem[:2].upper()}{chr(65 + i)}"
            full = f"{stem} {chr(65 + i)}{'xyz'[s]} Holdings Inc"
            rows.append((ticker, full, sector, f"{stem}{chr(65 + i)}"))
    return rows


def _spread_days(rng: np.random.Generator, lo: int, hi: int, k: int, gap: int) -> list[int]:
    """``k`` sorted days in [lo, hi) at least ``gap`` apart."""
    if k == 0:
        return []
    slack = hi - lo - (k - 1) * gap
    if slack <= 0:
        raise ValueError("calendar too short for the requested spikes")
    offsets = np.sort(rng.integers(0, slack, k))
    return [int(lo + o + j * gap) for j, o in enumerate(offsets)]


def generate(spec: FixtureSpec | None = None) -> Fixture:
    spec = spec or FixtureSpec()
    rng = np.random.default_rng(spec.seed)
    universe = _universe(spec)
    tickers = [u[0] for u in universe]
    n = len(tickers)
    sector_of = np.repeat(np.arange(len(SECTORS)), spec.n_per_sector)
    cal = business_days(spec.start, spec.n_days)
    n_days = len(cal)

    # latent daily sentiment with planted spikes and same-sector spillover
    latent = rng.normal(0.05, 0.05, (n, 1)) + rng.uniform(-spec.day_noise, spec.day_noise, (n, n_days))
    ar_jump = np.zeros((n, n_days))
    spikes = []
    for i in range(n):
        for d in _spread_days(rng, 200, n_days - 20, spec.spikes_per_company, gap=25):
            sign = 1 if rng.random() < 0.5 else -1
            latent[i, d] += sign * spec.spike_size
            peers = np.flatnonzero((sector_of == sector_of[i]) & (np.arange(n) != i))
            latent[peers, d : d + spec.spillover_days] += sign * spec.spillover
            ar_jump[i, d] += sign * spec.jump
            spikes.append((tickers[i], cal[d], sign))

    # articles: mostly single-sector co-mentions
    articles = []
    variants = ("{full}", "{short}", "{short} Corp", "{alias}")
    n_arts = rng.poisson(spec.articles_per_day, n_days)
    for d, k in enumerate(n_arts):
        for a in range(int(k)):
            sector = rng.integers(len(SECTORS))
            pool = np.flatnonzero(sector_of == sector) if rng.random() < spec.p_in_sector else np.arange(n)
            size = int(rng.integers(2, 5))
            chosen = rng.choice(pool, size=min(size, len(pool)), replace=False)
            mentions = []
            for i in chosen:
                full, alias = universe[i][1], universe[i][3]
                short = full.rsplit(" ", 1)[0]
                form = variants[int(rng.integers(len(variants)))]
                name = form.format(full=full, short=short, alias=alias)
                s = float(np.clip(latent[i, d] + rng.uniform(-spec.mention_noise, spec.mention_noise), -1, 1))
                mentions.append({"raw_name": name, "sentiment": round(s, 6)})
            day = cal[d]
            if a == 0 and d % 17 == 5 and d + 1 < n_days and (cal[d + 1] - day).days > 1:
                day = day + dt.timedelta(days=1)  # weekend story, rolls to the next trading day
            articles.append({"article_id": f"A{d:04d}-{a:02d}", "date": day.isoformat(), "mentions": mentions})

    # prices: CAPM returns plus abnormal jumps on spike days
    rm = rng.normal(0.0002, 0.01, n_days)
    alpha = rng.normal(0.0, 0.0003, n)
    beta = rng.uniform(0.6, 1.4, n)
    eps = rng.normal(0.0, spec.return_noise, (n, n_days))
    r = alpha[:, None] + beta[:, None] * rm[None, :] + eps + ar_jump
    r[:, 0] = 0.0
    rm[0] = 0.0
    close = 50.0 * np.exp(np.cumsum(r, axis=1))
    index_close = 1000.0 * np.exp(np.cumsum(rm))
    return Fixture(spec, universe, cal, articles, close, index_close, spikes)


def write_fixture(fx: Fixture, directory: str | Path) -> dict[str, Path]:
    """Write universe.csv, corpus.jsonl, market.csv and index.csv; return their paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / name for k, name in (("universe", "universe.csv"), ("corpus", "corpus.jsonl"), ("market", "market.csv"), ("index", "index.csv"))}
    with paths["universe"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "full_name", "sector", "aliases"])
        w.writerows(fx.universe)
    with paths["corpus"].open("w") as fh:
        for a in fx.articles:
            fh.write(json.dumps(a, sort_keys=True) + "\n")
    with paths["market"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "close"])
        for j, day in enumerate(fx.calendar):
            for i, t in enumerate(fx.tickers):
                w.writerow([day.isoformat(), t, f"{fx.close[i, j]:.6f}"])
    with paths["index"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "close"])
        for day, p in zip(fx.calendar, fx.index_close):
            w.writerow([day.isoformat(), f"{p:.6f}"])
    return paths
