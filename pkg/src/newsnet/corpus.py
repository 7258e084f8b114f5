"""Article ingestion, entity-name normalisation and coverage matrices."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import json
import logging
import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_SUFFIXES = ("llc", "group", "inc", "corp", "co", "ltd", "ag", "se", "plc")

_CONNECTORS = {"of", "and", "&", "de", "the", "for"}
_BRACKET = re.compile(r"\(([A-Z]{2,6})\)")
_CAPITALISED = re.compile(r"^[A-Z][\w&.'\-]*$")


class CorpusError(ValueError):
    """Base class for ingestion failures."""


class ParseError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SentimentRangeError(ParseError):
    pass


class DuplicateArticleError(CorpusError):
    def __init__(self, ids: Sequence[str]):
        self.ids = tuple(ids)
        super().__init__("duplicate article_id: " + ", ".join(self.ids))


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class DateRange:
    """Inclusive calendar-date interval."""

    start: dt.date
    end: dt.date

    def __post_init__(self):
        if self.end < self.start:
            raise ConfigurationError(f"empty date range {self.start}..{self.end}")

    def __contains__(self, day: dt.date) -> bool:
        return self.start <= day <= self.end

    @property
    def label(self) -> str:
        if self.start.day == 1 and self.start.month in (1, 4, 7, 10):
            q = (self.start.month - 1) // 3 + 1
            q_end = quarter_end(self.start)
            if self.end == q_end:
                return f"{self.start.year}Q{q}"
        return f"{self.start.isoformat()}_{self.end.isoformat()}"


@dataclass(frozen=True)
class Mention:
    raw_name: str
    canonical: str
    sentiment: float
    article_id: str
    is_target: bool = True


@dataclass(frozen=True)
class Article:
    article_id: str
    date: dt.date
    mentions: tuple[Mention, ...]
    sentences: tuple[str, ...] = ()

    def target_mentions(self) -> Iterator[Mention]:
        return (m for m in self.mentions if m.is_target)


@dataclass(frozen=True)
class Company:
    ticker: str
    full_name: str
    sector: str
    aliases: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Corpus:
    articles: tuple[Article, ...] = ()
    _dates: tuple[dt.date, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_dates", tuple(a.date for a in self.articles))

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self.articles)

    @property
    def span(self) -> DateRange | None:
        if not self.articles:
            return None
        return DateRange(self._dates[0], self._dates[-1])

    def between(self, start: dt.date, end: dt.date) -> tuple[Article, ...]:
        """Articles dated within ``[start, end]`` (both inclusive)."""
        lo = bisect.bisect_left(self._dates, start)
        hi = bisect.bisect_right(self._dates, end)
        return self.articles[lo:hi]


@dataclass(frozen=True)
class CoverageMatrix:
    companies: tuple[str, ...]
    articles: tuple[str, ...]
    counts: np.ndarray
    window: DateRange

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


def quarter_end(day: dt.date) -> dt.date:
    q_last_month = ((day.month - 1) // 3) * 3 + 3
    if q_last_month == 12:
        return dt.date(day.year, 12, 31)
    return dt.date(day.year, q_last_month + 1, 1) - dt.timedelta(days=1)


def quarter_ranges(start: dt.date, end: dt.date) -> list[DateRange]:
    """Calendar quarters intersecting ``[start, end]``, clipped to it."""
    out = []
    cur = dt.date(start.year, ((start.month - 1) // 3) * 3 + 1, 1)
    while cur <= end:
        q_end = quarter_end(cur)
        out.append(DateRange(max(cur, start), min(q_end, end)))
        cur = q_end + dt.timedelta(days=1)
    return out


# --- name normalisation ---------------------------------------------------


def _clean(raw: str) -> str:
    s = unicodedata.normalize("NFKC", raw).casefold()
    s = " ".join(s.split())
    return s.strip(" .,;:")


def canonical_form(raw: str, suffixes: Sequence[str] = DEFAULT_SUFFIXES) -> str:
    """Case-folded name with trailing corporate suffixes removed.

    >>> canonical_form("Goldman Sachs Group, Inc.")
    'goldman sachs'
    """
    s = _clean(raw)
    suffix_set = set(suffixes)
    while True:
        tokens = s.split(" ")
        if len(tokens) < 2 or tokens[-1].strip(".,") not in suffix_set:
            return s
        s = _clean(" ".join(tokens[:-1]))


def build_alias_table(universe: Iterable[Company], suffixes: Sequence[str] = DEFAULT_SUFFIXES) -> dict[str, str]:
    table: dict[str, str] = {}
    for c in universe:
        for name in (c.ticker, c.full_name, *sorted(c.aliases)):
            for key in (_clean(name), canonical_form(name, suffixes)):
                if not key:
                    continue
                prev = table.setdefault(key, c.ticker)
                if prev != c.ticker:
                    log.warning("alias %r maps to both %s and %s; keeping %s", key, prev, c.ticker, prev)
    return table


def normalize_entity_name(
    raw: str, alias_table: Mapping[str, str], suffixes: Sequence[str] = DEFAULT_SUFFIXES
) -> str | None:
    """Resolve a raw organisation name to a ticker, or ``None``."""
    hit = alias_table.get(_clean(raw))
    if hit is None:
        hit = alias_table.get(canonical_form(raw, suffixes))
    return hit


def extract_bracket_aliases(sentence: str) -> list[tuple[str, str]]:
    """Pairs of (long form, abbreviation) from ``Long Name (ABBR)`` patterns."""
    pairs = []
    for match in _BRACKET.finditer(sentence):
        tokens = sentence[: match.start()].split()
        phrase: list[str] = []
        for tok in reversed(tokens):
            if _CAPITALISED.match(tok):
                phrase.append(tok)
            elif tok.lower() in _CONNECTORS and phrase:
                phrase.append(tok)
            else:
                break
        while phrase and not _CAPITALISED.match(phrase[-1]):
            phrase.pop()
        phrase.reverse()
        if len(phrase) >= 2:
            pairs.append((" ".join(phrase), match.group(1)))
    return pairs


def extend_aliases(
    table: dict[str, str], pairs: Iterable[tuple[str, str]], suffixes: Sequence[str] = DEFAULT_SUFFIXES
) -> int:
    """Add bracket-derived aliases whose other half already resolves. Returns additions."""
    added = 0
    for long_form, abbr in pairs:
        t_long = normalize_entity_name(long_form, table, suffixes)
        t_abbr = normalize_entity_name(abbr, table, suffixes)
        if t_long and not t_abbr:
            table[_clean(abbr)] = t_long
            added += 1
        elif t_abbr and not t_long:
            table[canonical_form(long_form, suffixes)] = t_abbr
            added += 1
    return added


# --- parsing --------------------------------------------------------------


def _decode(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", lineno)
    for key in ("article_id", "date", "mentions"):
        if key not in rec:
            raise ParseError(f"missing field {key!r}", lineno)
    try:
        rec["date"] = dt.date.fromisoformat(rec["date"])
    except (TypeError, ValueError):
        raise ParseError(f"bad date {rec['date']!r}", lineno) from None
    if not isinstance(rec["mentions"], list):
        raise ParseError("mentions must be a list", lineno)
    for m in rec["mentions"]:
        if not isinstance(m, dict) or "raw_name" not in m or "sentiment" not in m:
            raise ParseError("mention needs raw_name and sentiment", lineno)
        s = m["sentiment"]
        if isinstance(s, bool) or not isinstance(s, (int, float)):
            raise ParseError(f"non-numeric sentiment {s!r}", lineno)
        if not -1.0 <= s <= 1.0:
            raise SentimentRangeError(f"sentiment {s} outside [-1, 1]", lineno)
    sentences = rec.get("sentences") or []
    if isinstance(sentences, str):
        sentences = [sentences]
    rec["sentences"] = tuple(sentences)
    rec["article_id"] = str(rec["article_id"])
    return rec


def parse_corpus(
    source: Iterable[str],
    universe: Sequence[Company],
    suffixes: Sequence[str] = DEFAULT_SUFFIXES,
    period: DateRange | None = None,
) -> Corpus:
    """Decode line-delimited article records into a date-sorted corpus.

    Bracket aliases found in optional ``sentences`` extend the alias table
    before names are resolved. Mentions that do not resolve to the universe
    are kept with ``is_target=False`` and their cleaned name as canonical.
    Articles outside ``period`` (when given) are skipped.
    """
    records = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        records.append(_decode(line, lineno))

    counts = Counter(r["article_id"] for r in records)
    dupes = sorted(aid for aid, n in counts.items() if n > 1)
    if dupes:
        raise DuplicateArticleError(dupes)

    table = build_alias_table(universe, suffixes)
    pairs = [p for r in records for s in r["sentences"] for p in extract_bracket_aliases(s)]
    if pairs:
        n_added = extend_aliases(table, pairs, suffixes)
        log.debug("bracket aliases: %d pairs, %d added", len(pairs), n_added)

    articles = []
    skipped = 0
    for r in records:
        if period is not None and r["date"] not in period:
            skipped += 1
            continue
        mentions = []
        for m in r["mentions"]:
            ticker = normalize_entity_name(m["raw_name"], table, suffixes)
            canonical = ticker if ticker else (canonical_form(m["raw_name"], suffixes) or m["raw_name"])
            mentions.append(Mention(m["raw_name"], canonical, float(m["sentiment"]), r["article_id"], ticker is not None))
        articles.append(Article(r["article_id"], r["date"], tuple(mentions), r["sentences"]))
    if skipped:
        log.info("skipped %d articles outside %s..%s", skipped, period.start, period.end)
    articles.sort(key=lambda a: a.date)
    return Corpus(tuple(articles))


def serialize_corpus(corpus: Corpus) -> Iterator[str]:
    """Line-delimited records that :func:`parse_corpus` reads back unchanged."""
    for a in corpus:
        rec = {
            "article_id": a.article_id,
            "date": a.date.isoformat(),
            "mentions": [
                {"raw_name": m.raw_name, "sentiment": m.sentiment, "canonical": m.canonical, "target": m.is_target}
                for m in a.mentions
            ],
        }
        if a.sentences:
            rec["sentences"] = list(a.sentences)
        yield json.dumps(rec, ensure_ascii=False, sort_keys=True)


def read_universe(lines: Iterable[str]) -> list[Company]:
    """Companies from CSV ``ticker,full_name,sector,aliases`` (aliases pipe-separated)."""
    reader = csv.DictReader(lines)
    missing = {"ticker", "full_name", "sector"} - set(reader.fieldnames or ())
    if missing:
        raise ParseError(f"universe header lacks {sorted(missing)}", 1)
    out, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        ticker = (row["ticker"] or "").strip()
        if not ticker:
            raise ParseError("empty ticker", lineno)
        if ticker in seen:
            raise ParseError(f"duplicate ticker {ticker}", lineno)
        seen.add(ticker)
        aliases = frozenset(a.strip() for a in (row.get("aliases") or "").split("|") if a.strip())
        out.append(Company(ticker, row["full_name"].strip(), row["sector"].strip(), aliases))
    return out


def write_universe(universe: Sequence[Company]) -> Iterator[list[str]]:
    yield ["ticker", "full_name", "sector", "aliases"]
    for c in universe:
        yield [c.ticker, c.full_name, c.sector, "|".join(sorted(c.aliases))]


# --- selection and coverage ----------------------------------------------


def select_frequent_companies(corpus: Corpus, quarters: Sequence[DateRange], min_mentions: int = 4) -> set[str]:
    """Tickers mentioned strictly more than ``min_mentions`` times in every quarter."""
    if not quarters:
        raise ConfigurationError("no quarters given")
    selected: set[str] | None = None
    for q in quarters:
        counts = Counter(m.canonical for a in corpus.between(q.start, q.end) for m in a.target_mentions())
        frequent = {t for t, n in counts.items() if n > min_mentions}
        selected = frequent if selected is None else selected & frequent
        if not selected:
            return set()
    return selected or set()


def build_coverage_matrix(
    corpus: Corpus, companies: Sequence[str], window: DateRange, mode: str = "mentions"
) -> CoverageMatrix:
    """Companies x articles count matrix for ``window``.

    ``mode="mentions"`` counts mentions of the company in the article;
    ``mode="articles"`` records a 0/1 indicator. Articles that mention none
    of ``companies`` are dropped.
    """
    if not companies:
        raise ConfigurationError("coverage matrix needs at least one company")
    if mode not in ("mentions", "articles"):
        raise ConfigurationError(f"unknown coverage mode {mode!r}")
    row = {t: i for i, t in enumerate(companies)}
    columns: list[str] = []
    cols: list[np.ndarray] = []
    for a in corpus.between(window.start, window.end):
        col = np.zeros(len(companies), dtype=np.int64)
        for m in a.target_mentions():
            i = row.get(m.canonical)
            if i is not None:
                col[i] += 1
        if col.any():
            if mode == "articles":
                col = (col > 0).astype(np.int64)
            columns.append(a.article_id)
            cols.append(col)
    if not cols:
        span = corpus.span
        if span is None or window.end < span.start or window.start > span.end:
            warnings.warn(f"window {window.start}..{window.end} lies outside the corpus span", stacklevel=2)
        counts = np.zeros((len(companies), 0), dtype=np.int64)
    else:
        counts = np.stack(cols, axis=1)
    return CoverageMatrix(tuple(companies), tuple(columns), counts, window)
