"""Co-occurrence networks built from coverage matrices, plus structural metrics."""

from __future__ import annotations

import bisect
import datetime as dt
import heapq
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, CoverageMatrix, DateRange, build_coverage_matrix
from .statkit import iqr, median, quantile

Pair = tuple[str, str]


class InsufficientWindowError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"power iteration did not converge after {iterations} steps (residual {residual:.3e})")


def edge_key(u: str, v: str) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Network:
    """Undirected weighted graph; ``edges`` keys are lexicographically ordered pairs."""

    nodes: tuple[str, ...]
    edges: Mapping[Pair, float]
    window: DateRange | None = None
    _adj: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[str, dict[str, float]] = {u: {} for u in self.nodes}
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError(f"self-edge on {u}")
            if not 0.0 < w <= 1.0:
                raise ValueError(f"edge weight {w} for {(u, v)} outside (0, 1]")
            adj[u][v] = w
            adj[v][u] = w
        object.__setattr__(self, "_adj", adj)

    def neighbours(self, u: str) -> dict[str, float]:
        return self._adj[u]

    def weight(self, u: str, v: str) -> float:
        return self._adj[u].get(v, 0.0)

    def degree(self, u: str) -> int:
        return len(self._adj[u])

    def adjacency(self) -> np.ndarray:
        idx = {u: i for i, u in enumerate(self.nodes)}
        a = np.zeros((len(self.nodes), len(self.nodes)))
        for (u, v), w in self.edges.items():
            a[idx[u], idx[v]] = a[idx[v], idx[u]] = w
        return a


@dataclass(frozen=True)
class WeightSplit:
    in_edges: dict[Pair, float]
    out_edges: dict[Pair, float]

    @property
    def in_sector(self) -> list[float]:
        return [self.in_edges[p] for p in sorted(self.in_edges)]

    @property
    def out_sector(self) -> list[float]:
        return [self.out_edges[p] for p in sorted(self.out_edges)]

    @property
    def medians(self) -> tuple[float | None, float | None]:
        return (
            median(self.in_sector) if self.in_edges else None,
            median(self.out_sector) if self.out_edges else None,
        )


def build_network(m: CoverageMatrix) -> Network:
    """Cosine similarity between coverage rows; all-zero rows stay isolated."""
    counts = np.asarray(m.counts)
    if len(m.companies) < 2:
        raise ValueError("a network needs at least two companies")
    if np.issubdtype(counts.dtype, np.integer):
        gram = (counts.astype(np.int64) @ counts.T.astype(np.int64)).astype(float)
    else:
        gram = counts @ counts.T
    sq = np.diag(gram).copy()
    edges: dict[Pair, float] = {}
    n = len(m.companies)
    for i in range(n):
        if sq[i] == 0:
            continue
        for j in range(i + 1, n):
            if sq[j] == 0 or gram[i, j] == 0:
                continue
            w = min(1.0, gram[i, j] / math.sqrt(sq[i] * sq[j]))
            edges[edge_key(m.companies[i], m.companies[j])] = w
    return Network(tuple(m.companies), edges, m.window)


def dynamic_network(
    corpus: Corpus,
    tickers: Sequence[str],
    end_day: dt.date,
    calendar: Sequence[dt.date],
    lookback: int = 60,
    mode: str = "mentions",
) -> Network:
    """Network over the news of the ``lookback`` trading days before ``end_day``.

    The window is ``[calendar[i - lookback], end_day)`` where ``i`` is the
    position of ``end_day`` in the calendar; news dated ``end_day`` is excluded.
    """
    i = bisect.bisect_left(calendar, end_day)
    if i < lookback:
        raise InsufficientWindowError(f"only {i} trading days before {end_day}, need {lookback}")
    start = calendar[i - lookback]
    window = DateRange(start, end_day - dt.timedelta(days=1))
    with warnings.catch_warnings():
        # an empty window is an edgeless network here, not a problem
        warnings.simplefilter("ignore")
        m = build_coverage_matrix(corpus, tickers, window, mode=mode)
    return build_network(m)


class DynamicNetworks:
    """Memoised :func:`dynamic_network` keyed by end day."""

    def __init__(self, corpus: Corpus, tickers: Sequence[str], calendar: Sequence[dt.date], lookback: int = 60, mode: str = "mentions"):
        self.corpus = corpus
        self.tickers = tuple(tickers)
        self.calendar = tuple(calendar)
        self.lookback = lookback
        self.mode = mode
        self._cache: dict[dt.date, Network] = {}

    def __call__(self, day: dt.date) -> Network:
        g = self._cache.get(day)
        if g is None:
            g = dynamic_network(self.corpus, self.tickers, day, self.calendar, self.lookback, self.mode)
            self._cache[day] = g
        return g


def network_stats(g: Network) -> dict[str, float | None]:
    """Average degree, mean local clustering and mean shortest-path length (unweighted)."""
    n = len(g.nodes)
    if n == 0:
        return {"avg_degree": 0.0, "clustering_coefficient": 0.0, "avg_path_length": None}
    avg_degree = 2.0 * len(g.edges) / n
    local = []
    for u in g.nodes:
        nb = list(g.neighbours(u))
        k = len(nb)
        if k < 2:
            local.append(0.0)
            continue
        links = sum(1 for a in range(k) for b in range(a + 1, k) if nb[b] in g.neighbours(nb[a]))
        local.append(links / (k * (k - 1) / 2))
    total = pairs = 0
    for s in g.nodes:
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.neighbours(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        total += sum(dist.values())
        pairs += len(dist) - 1
    return {
        "avg_degree": avg_degree,
        "clustering_coefficient": float(np.mean(local)),
        "avg_path_length": total / pairs if pairs else None,
    }


def eigenvector_centrality(g: Network, tol: float = 1e-10, max_iter: int = 10000) -> dict[str, float]:
    """Dominant eigenvector of the weighted adjacency matrix, unit Euclidean norm.

    Iterates ``x <- (A + I) x`` from the uniform vector. The shift keeps the
    iteration from oscillating on bipartite graphs and does not change the
    eigenvectors.
    """
    if not g.edges:
        raise ValueError("eigenvector centrality needs at least one edge")
    a = g.adjacency()
    n = len(g.nodes)
    x = np.full(n, 1.0 / math.sqrt(n))
    residual = math.inf
    for it in range(1, max_iter + 1):
        nxt = a @ x + x
        nxt /= np.linalg.norm(nxt)
        residual = float(np.abs(nxt - x).max())
        x = nxt
        if residual < tol:
            return {u: float(v) for u, v in zip(g.nodes, np.maximum(x, 0.0))}
    raise ConvergenceError(max_iter, residual)


def betweenness_centrality(g: Network) -> dict[str, float]:
    """Brandes betweenness with edge length ``1 / weight``, normalised by C(n-1, 2)."""
    score = {u: 0.0 for u in g.nodes}
    for s in g.nodes:
        stack: list[str] = []
        preds: dict[str, list[str]] = {u: [] for u in g.nodes}
        sigma = dict.fromkeys(g.nodes, 0.0)
        sigma[s] = 1.0
        dist: dict[str, float] = {s: 0.0}
        done: set[str] = set()
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            stack.append(u)
            for v, w in g.neighbours(u).items():
                if v in done:
                    continue
                nd = d + 1.0 / w
                old = dist.get(v)
                tie = 1e-12 * max(1.0, nd)
                if old is None or nd < old - tie:
                    dist[v] = nd
                    sigma[v] = sigma[u]
                    preds[v] = [u]
                    heapq.heappush(heap, (nd, v))
                elif abs(nd - old) <= tie:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        delta = dict.fromkeys(g.nodes, 0.0)
        while stack:
            v = stack.pop()
            for u in preds[v]:
                delta[u] += sigma[u] / sigma[v] * (1.0 + delta[v])
            if v != s:
                score[v] += delta[v]
    n = len(g.nodes)
    # each unordered pair was counted from both endpoints
    norm = (n - 1) * (n - 2) if n > 2 else None
    return {u: (s / norm if norm else 0.0) for u, s in score.items()}


def weight_split(g: Network, sectors: Mapping[str, str]) -> WeightSplit:
    missing = [u for u in g.nodes if u not in sectors]
    if missing:
        raise KeyError(f"nodes without a sector: {missing}")
    inside, outside = {}, {}
    for (u, v), w in g.edges.items():
        (inside if sectors[u] == sectors[v] else outside)[(u, v)] = w
    return WeightSplit(inside, outside)


def outlier_threshold(sample: Sequence[float]) -> float:
    return quantile(sample, 0.75) + 1.5 * iqr(sample)


def outlier_edges(sample: Sequence[float], edges: Mapping[Pair, float] | Iterable[tuple[Pair, float]]) -> list[tuple[Pair, float]]:
    """Edges heavier than Q3 + 1.5 IQR of ``sample``, heaviest first, ties by pair."""
    if len(sample) == 0:
        raise ValueError("outlier filter needs a non-empty sample")
    limit = outlier_threshold(sample)
    items = edges.items() if isinstance(edges, Mapping) else edges
    hits = [(p, w) for p, w in items if w > limit]
    return sorted(hits, key=lambda pw: (-pw[1], pw[0]))


def write_edges(g: Network, handle) -> None:
    handle.write("src\tdst\tweight\n")
    for (u, v) in sorted(g.edges):
        handle.write(f"{u}\t{v}\t{g.edges[(u, v)]:.10g}\n")


def read_edges(lines: Iterable[str], nodes: Sequence[str] | None = None) -> Network:
    rows = [ln.rstrip("\n") for ln in lines if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0].split("\t") != ["src", "dst", "weight"]:
        raise ValueError("edge list must start with header src\\tdst\\tweight")
    edges: dict[Pair, float] = {}
    seen: set[str] = set()
    for row in rows[1:]:
        u, v, w = row.split("\t")
        edges[edge_key(u, v)] = float(w)
        seen.update((u, v))
    node_list = tuple(nodes) if nodes is not None else tuple(sorted(seen))
    return Network(node_list, edges)
