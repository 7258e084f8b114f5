"""Command line pipeline: ingest -> network -> groups -> events -> study -> report.

Stages talk to each other only through files under the output directory.
Every CSV/TSV/JSONL output starts with a ``#config_hash=`` line and every
JSON output carries a ``config_hash`` key; a stage refuses intermediates
whose hash differs from the current configuration.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as dt
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from . import __version__
from .community import (
    Partition,
    UndefinedModularityError,
    comparison_report,
    group_composition,
    louvain,
    read_partition,
    write_partition,
)
from .corpus import (
    Company,
    ConfigurationError,
    Corpus,
    CorpusError,
    DateRange,
    build_coverage_matrix,
    parse_corpus,
    quarter_ranges,
    read_universe,
    select_frequent_companies,
    serialize_corpus,
)
from .events import (
    NEGATIVE,
    POSITIVE,
    detect_events,
    detect_panel_events,
    event_correlation_matrix,
    event_series,
    explained_variance,
    group_event_profile,
    profile_index,
    read_events,
    write_events,
    write_profile,
)
from .marketstudy import (
    PHASES,
    CapmFitError,
    PriceDomainError,
    event_window_study,
    group_distribution_study,
    read_market,
    rolling_abnormal_returns,
    significant_offsets,
    write_density,
    write_histogram,
    write_market_profiles,
)
from .network import (
    ConvergenceError,
    DynamicNetworks,
    InsufficientWindowError,
    betweenness_centrality,
    build_network,
    dynamic_network,
    eigenvector_centrality,
    network_stats,
    outlier_edges,
    weight_split,
    write_edges,
)
from .sentiment import daily_sentiment, group_series, read_panel, write_panel

log = logging.getLogger("newsnet")

EXIT_OK, EXIT_MISSING, EXIT_INVALID, EXIT_COMPUTE = 0, 2, 3, 4

INPUT_KEYS = ("corpus", "universe", "market", "index")
DEFAULTS: dict[str, Any] = {
    "lookback_event": 180,
    "z": 2.0,
    "min_obs": 30,
    "k_neighbours": 10,
    "network_window": 60,
    "car_window": 7,
    "resolution": 1.0,
    "kde_min_events": 20,
    "min_mentions": 4,
    "capm_window": 180,
    "capm_min_pairs": 120,
    "n_factors": 5,
    "coverage_mode": "mentions",
    "group_start": "",
    "group_end": "",
}
POSITIVE_KEYS = ("lookback_event", "z", "min_obs", "k_neighbours", "network_window", "car_window",
                 "resolution", "capm_window", "capm_min_pairs", "n_factors")


class MissingInputError(Exception):
    pass


class ValidationError(Exception):
    pass


class ComputationError(Exception):
    pass


# --- configuration ----------------------------------------------------------


def _coerce(key: str, raw: str) -> Any:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw.strip()


def parse_config_text(text: str, base: Path) -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment; input paths are relative to ``base``."""
    out: dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in INPUT_KEYS:
            out[key] = base / value
        elif key in DEFAULTS:
            out[key] = _coerce(key, value)
        else:
            raise ConfigurationError(f"config line {n}: unknown key {key!r}")
    return out


@dataclass
class RunConfig:
    inputs: dict[str, Path]
    params: dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    @classmethod
    def build(cls, config_file: Path | None, overrides: dict[str, str], inputs: dict[str, str | None]) -> "RunConfig":
        values: dict[str, Any] = {}
        if config_file is not None:
            if not config_file.exists():
                raise MissingInputError(f"config file not found: {config_file}")
            values.update(parse_config_text(config_file.read_text(), config_file.parent))
        for key, raw in overrides.items():
            if key not in DEFAULTS:
                raise ConfigurationError(f"unknown parameter {key!r}")
            values[key] = _coerce(key, raw)
        for key, path in inputs.items():
            if path is not None:
                values[key] = Path(path)
        params = dict(DEFAULTS)
        params.update({k: v for k, v in values.items() if k in DEFAULTS})
        cfg = cls({k: values[k] for k in INPUT_KEYS if k in values}, params)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for key in POSITIVE_KEYS:
            if not self.params[key] > 0:
                raise ConfigurationError(f"{key} must be positive, got {self.params[key]}")
        if self.params["min_mentions"] < 0 or self.params["kde_min_events"] < 0:
            raise ConfigurationError("min_mentions and kde_min_events must be non-negative")
        if self.params["coverage_mode"] not in ("mentions", "articles"):
            raise ConfigurationError(f"coverage_mode must be mentions or articles, got {self.params['coverage_mode']!r}")
        for key in ("group_start", "group_end"):
            if self.params[key]:
                try:
                    dt.date.fromisoformat(self.params[key])
                except ValueError:
                    raise ConfigurationError(f"{key} must be an ISO date") from None

    def input(self, key: str) -> Path:
        path = self.inputs.get(key)
        if path is None:
            raise MissingInputError(f"no {key} file configured (set '{key} = PATH' or --{key})")
        if not Path(path).exists():
            raise MissingInputError(f"{key} file not found: {path}")
        return Path(path)

    def input_digests(self) -> dict[str, str]:
        return {k: hashlib.sha256(self.input(k).read_bytes()).hexdigest() for k in INPUT_KEYS}

    def config_hash(self) -> str:
        """Digest of the analysis parameters and the input file contents (not their paths)."""
        payload = json.dumps({"params": self.params, "inputs": self.input_digests()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# --- output helpers ---------------------------------------------------------


class Workspace:
    def __init__(self, root: Path, cfg: RunConfig):
        self.root = root
        self.cfg = cfg
        self.hash = cfg.config_hash()

    def path(self, rel: str) -> Path:
        return self.root / rel

    @contextlib.contextmanager
    def text(self, rel: str) -> Iterator:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"#config_hash={self.hash}\n")
            yield fh

    def json(self, rel: str, payload: dict) -> None:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        body = {"config_hash": self.hash, "params": self.cfg.params, **payload}
        p.write_text(json.dumps(_plain(body), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def read_lines(self, rel: str) -> list[str]:
        p = self.path(rel)
        if not p.exists():
            raise MissingInputError(f"intermediate {p} not found; run the earlier stage first")
        lines = p.read_text(encoding="utf-8").splitlines(keepends=True)
        first = lines[0].strip() if lines else ""
        if first != f"#config_hash={self.hash}":
            raise ValidationError(f"{p} was produced with a different configuration ({first or 'no hash'}); re-run the earlier stages")
        return lines[1:]

    def read_json(self, rel: str) -> dict:
        p = self.path(rel)
        if not p.exists():
            raise MissingInputError(f"intermediate {p} not found; run the earlier stage first")
        data = json.loads(p.read_text(encoding="utf-8"))
        if data.get("config_hash") != self.hash:
            raise ValidationError(f"{p} was produced with a different configuration; re-run the earlier stages")
        return data


def _plain(x):
    """Make numpy scalars, NaN and dates JSON friendly."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, Path):
        return x.name
    if isinstance(x, (dt.date,)):
        return x.isoformat()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if np.isnan(x) else float(x)
    return x


# --- shared state -----------------------------------------------------------


@dataclass
class Ingested:
    corpus: Corpus
    companies: list[Company]
    selected: list[str]
    calendar: tuple[dt.date, ...]

    @property
    def sectors(self) -> dict[str, str]:
        return {c.ticker: c.sector for c in self.companies}


def load_ingested(ws: Workspace) -> Ingested:
    company_lines = ws.read_lines("ingest/companies.csv")
    companies = read_universe(company_lines)
    selected = [row["ticker"] for row in csv.DictReader(company_lines) if row["selected"] == "1"]
    corpus = parse_corpus(ws.read_lines("ingest/corpus.jsonl"), companies)
    calendar = tuple(dt.date.fromisoformat(r["date"]) for r in csv.DictReader(ws.read_lines("ingest/calendar.csv")))
    return Ingested(corpus, companies, selected, calendar)


def load_groups(ws: Workspace) -> dict[str, list[str]]:
    p = read_partition(ws.read_lines("groups/partition.csv"))
    return {f"G{g}": members for g, members in p.groups().items()}


def group_window(ws: Workspace, corpus: Corpus) -> DateRange:
    start, end = ws.cfg.params["group_start"], ws.cfg.params["group_end"]
    span = corpus.span
    if span is None:
        raise ComputationError("corpus is empty")
    first = span.start.year
    return DateRange(
        dt.date.fromisoformat(start) if start else dt.date(first, 1, 1),
        dt.date.fromisoformat(end) if end else dt.date(first, 12, 31),
    )


# --- stages -----------------------------------------------------------------


def cmd_ingest(ws: Workspace) -> dict:
    cfg = ws.cfg
    with cfg.input("universe").open(encoding="utf-8") as fh:
        universe = read_universe(fh)
    with cfg.input("corpus").open(encoding="utf-8") as fh:
        corpus = parse_corpus(fh, universe)
    with cfg.input("market").open(encoding="utf-8") as m, cfg.input("index").open(encoding="utf-8") as i:
        market = read_market(m, i)
    selected: set[str] = set()
    if corpus.span is not None:
        quarters = quarter_ranges(corpus.span.start, corpus.span.end)
        selected = select_frequent_companies(corpus, quarters, cfg.params["min_mentions"])
    no_prices = sorted(selected - set(market.tickers))
    if no_prices:
        log.warning("dropping %d frequent companies without prices: %s", len(no_prices), no_prices)
    selected = sorted(selected & set(market.tickers))
    counts = {c.ticker: 0 for c in universe}
    for a in corpus:
        for m_ in a.target_mentions():
            counts[m_.canonical] = counts.get(m_.canonical, 0) + 1

    with ws.text("ingest/corpus.jsonl") as fh:
        for line in serialize_corpus(corpus):
            fh.write(line + "\n")
    with ws.text("ingest/companies.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "full_name", "sector", "aliases", "mentions", "selected"])
        for c in universe:
            w.writerow([c.ticker, c.full_name, c.sector, "|".join(sorted(c.aliases)), counts[c.ticker], int(c.ticker in selected)])
    with ws.text("ingest/calendar.csv") as fh:
        fh.write("date\n")
        for d in market.calendar:
            fh.write(d.isoformat() + "\n")
    panel = daily_sentiment(corpus, selected, market.calendar)
    with ws.text("ingest/sentiment.csv") as fh:
        write_panel(panel, fh)
    summary = {
        "articles": len(corpus),
        "target_mentions": sum(counts.values()),
        "companies_in_universe": len(universe),
        "companies_selected": len(selected),
        "trading_days": len(market.calendar),
        "corpus_span": [corpus.span.start, corpus.span.end] if corpus.span else None,
    }
    ws.json("ingest/summary.json", {"summary": summary})
    return summary


def _window_specs(spec: str, ing: Ingested, lookback: int) -> list[tuple[str, DateRange | dt.date]]:
    span = ing.corpus.span
    if span is None:
        return []
    if spec == "static":
        return [("static", span)]
    if spec == "quarterly":
        # clipped first/last quarters keep the quarter name
        return [(f"{q.start.year}Q{(q.start.month - 1) // 3 + 1}", q) for q in quarter_ranges(span.start, span.end)]
    day = dt.date.fromisoformat(window_spec(spec))
    return [(f"at_{day.isoformat()}", day)]


def window_spec(spec: str) -> str:
    """argparse type for --window: static, quarterly or an ISO date."""
    if spec in ("static", "quarterly"):
        return spec
    try:
        dt.date.fromisoformat(spec)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown window spec {spec!r}; use static, quarterly or YYYY-MM-DD") from None
    return spec


def cmd_network(ws: Workspace, spec: str = "quarterly") -> dict:
    ing = load_ingested(ws)
    if len(ing.selected) == 1:
        raise ComputationError("fewer than two selected companies; nothing to network")
    p = ws.cfg.params
    sectors = ing.sectors
    stats_rows, cent_rows, out_rows = [], [], {"in": [], "out": []}
    for label, window in _window_specs(spec, ing, p["network_window"]):
        if isinstance(window, dt.date):
            try:
                g = dynamic_network(ing.corpus, ing.selected, window, ing.calendar, p["network_window"], p["coverage_mode"])
            except InsufficientWindowError as exc:
                raise ValidationError(str(exc)) from None
        else:
            g = build_network(build_coverage_matrix(ing.corpus, ing.selected, window, p["coverage_mode"]))
        with ws.text(f"network/edges_{label}.tsv") as fh:
            write_edges(g, fh)
        st = network_stats(g)
        split = weight_split(g, sectors)
        med_in, med_out = split.medians
        stats_rows.append([label, len(g.edges), st["avg_degree"], st["clustering_coefficient"], st["avg_path_length"], med_in, med_out])
        if g.edges:
            ev = eigenvector_centrality(g)
            bc = betweenness_centrality(g)
            cent_rows.extend([label, t, ev[t], bc[t]] for t in g.nodes)
        for side, edges in (("in", split.in_edges), ("out", split.out_edges)):
            if edges:
                for (u, v), wgt in outlier_edges(list(edges.values()), edges):
                    out_rows[side].append([label, u, v, wgt, sectors[u], sectors[v]])
    with ws.text("network/stats.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "n_edges", "avg_degree", "clustering_coefficient", "avg_path_length", "median_in_sector", "median_out_sector"])
        w.writerows([_fmt(v) for v in row] for row in stats_rows)
    with ws.text("network/centrality.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "ticker", "eigenvector", "betweenness"])
        w.writerows([_fmt(v) for v in row] for row in cent_rows)
    for side in ("in", "out"):
        with ws.text(f"network/outliers_{side}_sector.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "src", "dst", "weight", "src_sector", "dst_sector"])
            w.writerows([_fmt(v) for v in row] for row in out_rows[side])
    return {"windows": len(stats_rows)}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else f"{float(v):.10g}"
    return str(v)


def cmd_groups(ws: Workspace) -> dict:
    ing = load_ingested(ws)
    if not ing.selected:
        return _empty_groups(ws)
    if len(ing.selected) == 1:
        raise ComputationError("only one selected company; nothing to group")
    window = group_window(ws, ing.corpus)
    g = build_network(build_coverage_matrix(ing.corpus, ing.selected, window, ws.cfg.params["coverage_mode"]))
    if not g.edges:
        raise ComputationError(f"no co-mentions in the group window {window.start}..{window.end}")
    part = louvain(g, ws.cfg.params["resolution"])
    sectors = {t: ing.sectors[t] for t in ing.selected}
    truth = Partition.from_labels(sectors)
    with ws.text("groups/partition.csv") as fh:
        write_partition(part, fh)
    report = comparison_report(part, truth)
    ws.json("groups/comparison.json", {
        "window": [window.start, window.end],
        "k": part.k,
        "modularity": part.modularity,
        "sector_labels": {str(i): s for s, i in sorted((s, truth.assignment[t]) for t, s in sectors.items())},
        **report,
    })
    with ws.text("groups/composition.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "sector", "count"])
        for grp, row in group_composition(part, sectors).items():
            for sector, n in row.items():
                w.writerow([f"G{grp}", sector, n])
    return {"k": part.k, "nmi": report["nmi"], "f1": report["f1"]}


def _empty_groups(ws: Workspace) -> dict:
    """No selected companies (e.g. an empty corpus): header-only tables and null scores."""
    with ws.text("groups/partition.csv") as fh:
        fh.write("ticker,group\n")
    ws.json("groups/comparison.json", {"window": None, "k": 0, "modularity": None, "sector_labels": {},
                                       "nmi": None, "f1": None, "contingency": []})
    with ws.text("groups/composition.csv") as fh:
        fh.write("group,sector,count\n")
    return {"k": 0, "nmi": None, "f1": None}


def cmd_events(ws: Workspace) -> dict:
    ing = load_ingested(ws)
    panel = read_panel(ws.read_lines("ingest/sentiment.csv"))
    groups = load_groups(ws)
    p = ws.cfg.params
    detect = dict(lookback=p["lookback_event"], z=p["z"], min_obs=p["min_obs"])
    events = detect_panel_events(panel, **detect)
    with ws.text("events/events.csv") as fh:
        write_events(events, fh)

    group_events = []
    for label, members in groups.items():
        series = group_series(panel, [m for m in members if m in panel.tickers])
        group_events.extend(detect_events(series, panel.calendar, ticker=label, **detect))
    with ws.text("events/group_events.csv") as fh:
        write_events(group_events, fh)

    nets = DynamicNetworks(ing.corpus, ing.selected, ing.calendar, p["network_window"], p["coverage_mode"])
    entries = {}
    for label, members in groups.items():
        for direction in (POSITIVE, NEGATIVE):
            subset = [e for e in events if e.ticker in set(members) and e.direction == direction]
            prof = group_event_profile(members, subset, panel, nets, k=p["k_neighbours"], span=p["car_window"])
            rel = f"events/profiles/{label}_{direction}.csv"
            with ws.text(rel) as fh:
                write_profile(prof, fh)
            entries[f"{label}_{direction}"] = (rel.split("/", 1)[1], prof)
    ws.json("events/profiles/index.json", {"profiles": profile_index(entries)})

    series = event_series(events, panel.tickers, panel.calendar)
    corr = event_correlation_matrix(series) if len(panel.tickers) else np.zeros((0, 0))
    with ws.text("events/correlation.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *panel.tickers])
        for t, row in zip(panel.tickers, corr):
            w.writerow([t, *(_fmt(v) for v in row)])

    factors = {"n_factors": p["n_factors"], "method": "principal-component share of correlation-matrix trace"}
    daily = np.nan_to_num(panel.values, nan=0.0)
    for name, data in (("daily_sentiment", daily), ("event_series", series)):
        try:
            factors[name] = explained_variance(data, p["n_factors"])
        except ValueError as exc:
            factors[name] = None
            factors[f"{name}_note"] = str(exc)
    ws.json("events/factors.json", factors)
    return {"events": len(events), "group_events": len(group_events)}


def cmd_study(ws: Workspace) -> dict:
    p = ws.cfg.params
    groups = load_groups(ws)
    events = read_events(ws.read_lines("events/events.csv"))
    group_events = read_events(ws.read_lines("events/group_events.csv"))
    with ws.cfg.input("market").open(encoding="utf-8") as m, ws.cfg.input("index").open(encoding="utf-8") as i:
        market = read_market(m, i)
    ar = rolling_abnormal_returns(market, p["capm_window"], p["capm_min_pairs"])
    study = event_window_study(events, market, groups, ar=ar, span=p["car_window"], trail=p["car_window"])
    index: dict[str, dict] = {}
    for label, profiles in study.profiles.items():
        with ws.text(f"study/car_vol/{label}.csv") as fh:
            write_market_profiles(profiles, fh)
        index[label] = {
            direction: {
                "n_events": mp.car.n_events,
                "car_significant": significant_offsets(mp.car),
                "vol_significant": significant_offsets(mp.vol),
            }
            for direction, mp in profiles.items()
        }
    distributions = {}
    for label, members in groups.items():
        mine = [e for e in group_events if e.ticker == label]
        ds = group_distribution_study(mine, market, members, ar=ar, span=p["car_window"], label=label, kde_min_events=p["kde_min_events"])
        files = {}
        for (phase, metric), d in sorted(ds.phases.items(), key=lambda kv: (PHASES.index(kv[0][0]), kv[0][1])):
            stem = f"study/distributions/{label}_{phase}_{metric}"
            entry = {"n": int(d.sample.size)}
            if d.counts is not None:
                with ws.text(f"{stem}_hist.csv") as fh:
                    write_histogram(d.counts, d.edges, fh)
                entry["histogram"] = f"{stem.split('/', 1)[1]}_hist.csv"
            if d.density is not None:
                with ws.text(f"{stem}_density.csv") as fh:
                    write_density(d.density, fh)
                entry["density"] = f"{stem.split('/', 1)[1]}_density.csv"
                entry["bandwidth"] = d.density.bandwidth
            files[f"{phase}_{metric}"] = entry
        distributions[label] = {"n_events": ds.n_events, "kde": ds.n_events > p["kde_min_events"], "files": files}
    dropped = [{"ticker": e.ticker, "date": e.date, "direction": e.direction, "reason": why} for e, why in study.dropped]
    ws.json("study/index.json", {"event_windows": index, "distributions": distributions, "dropped_events": dropped})
    return {"groups": len(index), "dropped": len(dropped)}


REPORT_SOURCES = (
    "ingest/summary.json",
    "groups/comparison.json",
    "events/factors.json",
    "events/profiles/index.json",
    "study/index.json",
)


def cmd_report(ws: Workspace) -> dict:
    parts = {rel: ws.read_json(rel) for rel in REPORT_SOURCES}
    for rel in ("network/stats.csv", "events/events.csv"):
        ws.read_lines(rel)
    stats = list(csv.DictReader(ws.read_lines("network/stats.csv")))
    n_events = sum(1 for _ in csv.DictReader(ws.read_lines("events/events.csv")))
    comparison = parts["groups/comparison.json"]
    body = {
        "version": __version__,
        "inputs": {k: {"file": ws.cfg.input(k).name, "sha256": d} for k, d in ws.cfg.input_digests().items()},
        "ingest": parts["ingest/summary.json"]["summary"],
        "network": {"windows": [row["window"] for row in stats], "stats": stats},
        "groups": {k: comparison[k] for k in ("k", "modularity", "nmi", "f1", "window")},
        "events": {"company_events": n_events, "profiles": parts["events/profiles/index.json"]["profiles"]},
        "factors": {k: v for k, v in parts["events/factors.json"].items() if k not in ("config_hash", "params")},
        "study": {k: v for k, v in parts["study/index.json"].items() if k not in ("config_hash", "params")},
    }
    ws.json("report.json", body)
    return {"report": str(ws.path("report.json"))}


PIPELINE = ("ingest", "network", "groups", "events", "study", "report")


def run_stage(ws: Workspace, name: str, args: argparse.Namespace) -> dict:
    if name == "ingest":
        return cmd_ingest(ws)
    if name == "network":
        return cmd_network(ws, getattr(args, "window", "quarterly"))
    if name == "groups":
        return cmd_groups(ws)
    if name == "events":
        return cmd_events(ws)
    if name == "study":
        return cmd_study(ws)
    if name == "report":
        return cmd_report(ws)
    raise ValueError(name)


def cmd_fixture(out: Path, seed: int) -> dict:
    from .fixtures import FixtureSpec, generate, write_fixture

    paths = write_fixture(generate(FixtureSpec(seed=seed)), out)
    cfg = out / "newsnet.cfg"
    lines = [f"{k} = {paths[k].name}" for k in INPUT_KEYS]
    lines += [f"{k} = {v}" for k, v in DEFAULTS.items() if v != ""]
    cfg.write_text("# synthetic fixture configuration\n" + "\n".join(lines) + "\n")
    return {"config": str(cfg)}


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="newsnet", description="News co-occurrence networks, sentiment events and market event studies.")
    parser.add_argument("--config", type=Path, help="flat key = value configuration file")
    parser.add_argument("--out", type=Path, default=Path("newsnet-out"), help="output directory (default: newsnet-out)")
    parser.add_argument("--seed", type=int, default=0, help="seed for synthetic fixture generation only")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration parameter")
    for key in INPUT_KEYS:
        parser.add_argument(f"--{key}", help=f"{key} input file (overrides the config file)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fixture", help="write the bundled synthetic inputs and a config file into --out")
    sub.add_parser("ingest", help="validate inputs; write normalised corpus, companies, calendar and daily sentiment")
    net = sub.add_parser("network", help="co-occurrence networks, statistics, centralities and outlier edges")
    net.add_argument("--window", type=window_spec, default="quarterly", help="static, quarterly or an end date YYYY-MM-DD (default quarterly)")
    sub.add_parser("groups", help="Louvain groups and comparison with sectors")
    sub.add_parser("events", help="sentiment events, neighbour profiles, correlation and factor share")
    sub.add_parser("study", help="CAR and volatility around events; group AR/volatility distributions")
    sub.add_parser("report", help="collect all stage outputs into report.json")
    run = sub.add_parser("run", help="all stages from ingest to report")
    run.add_argument("--window", type=window_spec, default="quarterly", help="network window spec for the network stage")
    return parser


def _overrides(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fixture":
            result = cmd_fixture(args.out, args.seed)
            print(json.dumps(result, sort_keys=True))
            return EXIT_OK
        cfg = RunConfig.build(args.config, _overrides(args.set), {k: getattr(args, k) for k in INPUT_KEYS})
        ws = Workspace(args.out, cfg)
        stages = PIPELINE if args.command == "run" else (args.command,)
        for name in stages:
            result = run_stage(ws, name, args)
            print(json.dumps({"stage": name, **_plain(result)}, sort_keys=True))
        return EXIT_OK
    except (MissingInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValidationError, ConfigurationError, CorpusError, PriceDomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ComputationError, CapmFitError, ConvergenceError, UndefinedModularityError, InsufficientWindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
