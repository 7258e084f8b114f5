"""Acceptance criteria 1-9. Each test prints one ``criterion N: PASS|FAIL`` line.

The lines are also repeated in the pytest terminal summary (see conftest.py).
"""

import csv
import datetime as dt
import io
import itertools
import json
import math
import time

import numpy as np
import pytest

from newsnet.community import Partition, louvain, modularity, nmi
from newsnet.corpus import CoverageMatrix, DateRange, build_coverage_matrix, parse_corpus, read_universe
from newsnet.events import SentimentEvent, detect_events
from newsnet.fixtures import generate
from newsnet.marketstudy import (
    MarketPanel,
    car_series,
    event_car,
    event_window_study,
    fit_capm,
    group_distribution_study,
)
from newsnet.network import Network, build_network, weight_split
from newsnet.statkit import kde, kde_evaluate, mann_whitney_u

from oracles import cosine_bruteforce, modularity_bruteforce, permutation_mwu_p_matrix
from pipeline import data_lines, fixture_inputs, run_pipeline, tree_digest

WIN = DateRange(dt.date(2007, 1, 1), dt.date(2007, 12, 31))


def calendar(n, start=dt.date(2006, 1, 2)):
    return [start + dt.timedelta(days=i) for i in range(n)]


def panel_from_returns(r, rm, cal):
    close = 100 * np.exp(np.cumsum(r, axis=1))
    return MarketPanel(tuple(f"S{i}" for i in range(len(r))), cal, close, 100 * np.exp(np.cumsum(rm)))


# --- 1 ----------------------------------------------------------------------


def small_weighted_graph(rng):
    n = int(rng.integers(2, 9))
    nodes = tuple(f"N{i}" for i in range(n))
    edges = {(nodes[i], nodes[j]): float(rng.uniform(0.01, 1.0))
             for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.5}
    if not edges:
        edges[(nodes[0], nodes[1])] = float(rng.uniform(0.01, 1.0))
    return Network(nodes, edges)


def test_criterion_1_modularity_oracle(criterion):
    with criterion(1, "modularity matches brute force; louvain >= singletons") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            g = small_weighted_graph(rng)
            random_part = Partition.from_labels({u: int(rng.integers(0, 3)) for u in g.nodes})
            found = louvain(g)
            singles = Partition({u: i for i, u in enumerate(g.nodes)})
            for p in (random_part, found, singles):
                expect = modularity_bruteforce(g.nodes, g.weight, p.assignment)
                worst = max(worst, abs(modularity(g, p) - expect))
            assert modularity(g, found) >= modularity(g, singles) - 1e-12
        elapsed = time.perf_counter() - t0
        info.update(graphs=200, max_abs_err=f"{worst:.1e}", seconds=f"{elapsed:.1f}")
        assert worst <= 1e-12
        assert elapsed < 30


# --- 2 ----------------------------------------------------------------------


def block_coverage(seed, n_tickers=90, n_articles=2000, p_in=0.3, p_out=0.02, n_blocks=3):
    rng = np.random.default_rng(seed)
    block_of = np.arange(n_tickers) * n_blocks // n_tickers
    article_block = rng.integers(0, n_blocks, n_articles)
    p = np.where(block_of[:, None] == article_block[None, :], p_in, p_out)
    counts = (rng.random((n_tickers, n_articles)) < p).astype(np.int64)
    names = tuple(f"T{i:02d}" for i in range(n_tickers))
    m = CoverageMatrix(names, tuple(f"a{j}" for j in range(n_articles)), counts, WIN)
    return m, Partition.from_labels(dict(zip(names, block_of.tolist())))


def test_criterion_2_planted_communities(criterion):
    with criterion(2, "planted 3-block recovery, NMI >= 0.9 in >= 95% of seeds") as info:
        t0 = time.perf_counter()
        scores = []
        for seed in range(20):
            m, truth = block_coverage(seed)
            scores.append(nmi(louvain(build_network(m)), truth))
        elapsed = time.perf_counter() - t0
        good = sum(s >= 0.9 for s in scores)
        info.update(seeds_ok=f"{good}/20", min_nmi=f"{min(scores):.3f}", seconds=f"{elapsed:.1f}")
        assert good >= 19
        assert elapsed < 60


# --- 3 ----------------------------------------------------------------------


def test_criterion_3_cosine_network(criterion):
    with criterion(3, "cosine weights match brute force; in-sector median > out-sector") as info:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(10):
            rows = rng.poisson(0.5, size=(20, 50))
            names = tuple(f"C{i:02d}" for i in range(20))
            g = build_network(CoverageMatrix(names, tuple(f"a{j}" for j in range(50)), rows, WIN))
            for i, j in itertools.combinations(range(20), 2):
                worst = max(worst, abs(g.weight(names[i], names[j]) - cosine_bruteforce(rows[i], rows[j])))
        fx = generate()
        universe = read_universe(io.StringIO("ticker,full_name,sector,aliases\n" + "".join(",".join(u) + "\n" for u in fx.universe)))
        corpus = parse_corpus([json.dumps(a) for a in fx.articles], universe)
        net = build_network(build_coverage_matrix(corpus, fx.tickers, corpus.span))
        med_in, med_out = weight_split(net, fx.sectors).medians
        info.update(max_abs_err=f"{worst:.1e}", median_in=f"{med_in:.4f}", median_out=f"{med_out:.4f}")
        assert worst <= 1e-12
        assert med_in > med_out


# --- 4 ----------------------------------------------------------------------


def test_criterion_4_event_detection(criterion):
    with criterion(4, "z=5 spike, constant series, mu+2sigma boundary") as info:
        alt = np.array([0.1 if i % 2 == 0 else -0.1 for i in range(180)])
        ev = detect_events(np.append(alt, 0.5), calendar(181), ticker="A")
        assert len(ev) == 1 and ev[0].direction == "positive"
        assert abs(ev[0].z_score - 5.0) <= 1e-9
        assert detect_events(np.full(400, 0.3), calendar(400)) == []
        # +-0.5 alternating has mean 0 and population sd 0.5, so 1.0 sits exactly on mu + 2 sigma
        edge = np.append(np.array([0.5 if i % 2 == 0 else -0.5 for i in range(180)]), 1.0)
        assert detect_events(edge, calendar(181)) == []
        info.update(z=f"{ev[0].z_score:.12f}")


# --- 5 ----------------------------------------------------------------------


def test_criterion_5_capm_ar_car(criterion):
    with criterion(5, "CAPM recovery, residual mean, CAR telescoping and closed form") as info:
        rng = np.random.default_rng(5)
        cal = calendar(400)
        worst_fit = worst_resid = 0.0
        for _ in range(20):
            alpha, beta = rng.normal(0, 0.002), rng.uniform(-0.5, 2.5)
            rm = rng.normal(0, 0.01, 400)
            fit = fit_capm(alpha + beta * rm, rm, cal, cal[300])
            worst_fit = max(worst_fit, abs(fit.alpha - alpha), abs(fit.beta - beta))
            r = alpha + beta * rm + rng.normal(0, 0.01, 400)
            noisy = fit_capm(r, rm, cal, cal[300])
            resid = r[120:300] - noisy.alpha - noisy.beta * rm[120:300]
            worst_resid = max(worst_resid, abs(resid.mean()))
        worst_tel = 0.0
        for _ in range(1000):
            eps = rng.normal(0, 0.01, int(rng.integers(10, 80)))
            c = car_series(eps, 7)
            d = np.diff(c)[7:] - (eps[8:] - eps[:-8])
            worst_tel = max(worst_tel, float(np.abs(d).max()) if d.size else 0.0)
        const = event_car(np.full(40, 0.01), 20)
        closed = [sum(0.01 for _ in range(t - 7, t + 1)) for t in range(13, 28)]
        info.update(fit_err=f"{worst_fit:.1e}", resid_mean=f"{worst_resid:.1e}", telescoping_err=f"{worst_tel:.1e}")
        assert worst_fit <= 1e-10
        assert worst_resid <= 1e-12
        assert worst_tel <= 1e-14
        assert np.allclose(const, closed, atol=1e-15, rtol=0) and abs(const[0] - 0.08) <= 1e-15


# --- 6 ----------------------------------------------------------------------


def jump_study(seed, jump, n_tickers=10, n_events=5, noise=0.002, n_days=260):
    """Event days drawn at random per ticker; AR = noise plus ``jump`` on event days."""
    rng = np.random.default_rng(seed)
    cal = calendar(n_days)
    ar = rng.normal(0, noise, (n_tickers, n_days))
    events = []
    for i in range(n_tickers):
        for d in 30 + 40 * np.arange(n_events) + rng.integers(0, 20, n_events):
            ar[i, d] += jump
            events.append(SentimentEvent(f"S{i}", cal[d], "positive", 3.0))
    market = panel_from_returns(ar, rng.normal(0, 0.01, n_days), cal)
    study = event_window_study(events, market, {"g": market.tickers}, ar=ar)
    return study.profiles["g"]["positive"].car.p_values


def test_criterion_6_significance(criterion):
    with criterion(6, "exact MWU vs enumeration; planted jump; permuted-date null") as info:
        rng = np.random.default_rng(6)
        sizes = list(itertools.product(range(1, 9), repeat=2))
        worst = 0.0
        for k in range(500):
            n, m = sizes[k % len(sizes)]
            if k % 2:
                x, y = rng.normal(size=n), rng.normal(size=m)
            else:
                x, y = rng.integers(0, 4, n).astype(float), rng.integers(0, 4, m).astype(float)
            for two_sided in (True, False):
                got = mann_whitney_u(x, y, two_sided=two_sided)
                assert got.method == "exact"
                worst = max(worst, abs(got.p_value - permutation_mwu_p_matrix(x, y, two_sided)))
        planted = 0
        for seed in range(20):
            p = jump_study(seed, 0.02)
            planted += bool((p[7:] < 0.01).all() and (p[:7] >= 0.01).all())
        n_null = 1000
        rate = np.mean([jump_study(10_000 + k, 0.0)[7] < 0.05 for k in range(n_null)])
        info.update(mwu_max_err=f"{worst:.1e}", planted_ok=f"{planted}/20", null_rate=f"{rate:.3f}")
        assert worst <= 1e-12
        assert planted >= 18
        assert 0.03 <= rate <= 0.07


# --- 7 ----------------------------------------------------------------------


def test_criterion_7_kde(criterion):
    with criterion(7, "KDE integral, single-point closed form, suppression rule") as info:
        rng = np.random.default_rng(7)
        worst = 0.0
        for n in (10, 11, 25, 100, 1000):
            for sample in (rng.normal(size=n), rng.exponential(size=n), rng.integers(0, 3, n).astype(float), rng.standard_t(2, n)):
                worst = max(worst, abs(kde(sample).integral() - 1.0))
        point_err = 0.0
        for h in (1e-3, 0.37, 2.0):
            d = kde_evaluate([0.25], [0.25], h)
            point_err = max(point_err, abs(d.density[0] - 1.0 / (h * math.sqrt(math.pi))))
        cal = calendar(900)
        market = panel_from_returns(rng.normal(0, 0.01, (2, 900)), rng.normal(0, 0.01, 900), cal)
        ar = rng.normal(0, 1, (2, 900))
        events = [SentimentEvent("g", cal[d], "positive", 2.5) for d in 20 + 30 * np.arange(21)]
        few = group_distribution_study(events[:20], market, market.tickers, ar=ar)
        enough = group_distribution_study(events, market, market.tickers, ar=ar)
        info.update(max_integral_err=f"{worst:.1e}", point_err=f"{point_err:.1e}")
        assert worst <= 1e-2
        assert point_err <= 1e-12
        assert all(p.density is None and p.counts is not None for p in few.phases.values())
        assert all(p.density is not None for p in enough.phases.values())


# --- 8 and 9 ------------------------------------------------------------------


@pytest.fixture(scope="module")
def bundled_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundled")
    paths = fixture_inputs(root / "in")
    t0 = time.perf_counter()
    run_pipeline(paths, root / "first")
    elapsed = time.perf_counter() - t0
    return root, paths, elapsed


def test_criterion_8_determinism(criterion, bundled_run):
    with criterion(8, "two pipeline runs give byte-identical trees") as info:
        root, paths, _ = bundled_run
        run_pipeline(paths, root / "second")
        a, b = tree_digest(root / "first"), tree_digest(root / "second")
        info.update(files=len(a))
        assert a == b


SCHEMAS = {
    "network/edges_*.tsv": ["src\tdst\tweight"],
    "network/stats.csv": ["window,n_edges,avg_degree,clustering_coefficient,avg_path_length,median_in_sector,median_out_sector"],
    "network/centrality.csv": ["window,ticker,eigenvector,betweenness"],
    "network/outliers_*_sector.csv": ["window,src,dst,weight,src_sector,dst_sector"],
    "groups/partition.csv": ["ticker,group"],
    "groups/composition.csv": ["group,sector,count"],
    "events/events.csv": ["ticker,date,direction,z"],
    "events/group_events.csv": ["ticker,date,direction,z"],
    "events/profiles/*.csv": ["offset,mean,median,p"],
    "study/car_vol/*.csv": ["offset,mean_car,median_car,p_car,mean_vol,median_vol,p_vol,direction"],
    "study/distributions/*_hist.csv": ["bin_left,bin_right,count"],
    "study/distributions/*_density.csv": ["grid,density"],
}


def test_criterion_9_end_to_end(criterion, bundled_run):
    with criterion(9, "bundled fixture ingest->study under 2 minutes with every format") as info:
        root, _, elapsed = bundled_run
        out = root / "first"
        counts = {}
        for pattern, (header,) in SCHEMAS.items():
            files = sorted(out.glob(pattern))
            assert files, pattern
            counts[pattern] = len(files)
            for p in files:
                lines = data_lines(p)
                assert lines[0] == header, p
                delim = "\t" if p.suffix == ".tsv" else ","
                width = len(header.split(delim))
                assert all(len(row) == width for row in csv.reader(lines[1:], delimiter=delim)), p
        for p in out.rglob("*.json"):
            assert "config_hash" in json.loads(p.read_text()), p
        report = json.loads((out / "report.json").read_text())
        assert report["groups"]["nmi"] == pytest.approx(1.0)
        info.update(seconds=f"{elapsed:.1f}", files=sum(1 for p in out.rglob("*") if p.is_file()),
                    densities=counts["study/distributions/*_density.csv"])
        assert elapsed < 120
