"""Louvain community detection and partition comparison."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .network import Network


class UndefinedModularityError(ValueError):
    pass


class DegenerateScoreError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Node -> group id, with ids dense from 0 in order of first appearance."""

    assignment: Mapping[str, int]
    modularity: float | None = field(default=None, compare=False)

    @classmethod
    def from_labels(cls, labels: Mapping[str, object], order: Iterable[str] | None = None, modularity: float | None = None) -> "Partition":
        ids: dict[object, int] = {}
        out = {}
        for node in (order if order is not None else sorted(labels)):
            lab = labels[node]
            if lab not in ids:
                ids[lab] = len(ids)
            out[node] = ids[lab]
        return cls(out, modularity)

    @property
    def k(self) -> int:
        return len(set(self.assignment.values()))

    def groups(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = defaultdict(list)
        for node in sorted(self.assignment):
            out[self.assignment[node]].append(node)
        return dict(sorted(out.items()))


def modularity(g: Network, p: Partition, resolution: float = 1.0) -> float:
    """Weighted modularity with a multiplicative resolution on the null model."""
    missing = [u for u in g.nodes if u not in p.assignment]
    if missing:
        raise KeyError(f"partition misses nodes {missing}")
    two_m = 2.0 * sum(g.edges.values())
    if two_m == 0:
        raise UndefinedModularityError("modularity is undefined on a graph without edge weight")
    inner: dict[int, float] = defaultdict(float)
    tot: dict[int, float] = defaultdict(float)
    for (u, v), w in g.edges.items():
        cu, cv = p.assignment[u], p.assignment[v]
        tot[cu] += w
        tot[cv] += w
        if cu == cv:
            inner[cu] += 2.0 * w
    return sum(inner[c] / two_m - resolution * (tot[c] / two_m) ** 2 for c in tot)


class _Level:
    """Graph on integer nodes; ``loops[i]`` is the ordered-pair weight inside node i."""

    def __init__(self, adj: list[dict[int, float]], loops: list[float]):
        self.adj = adj
        self.loops = loops
        self.degree = [sum(a.values()) + s for a, s in zip(adj, loops)]


def _one_level(level: _Level, two_m: float, resolution: float) -> tuple[list[int], bool]:
    n = len(level.adj)
    comm = list(range(n))
    tot = list(level.degree)
    moved_any = False
    while True:
        moved = False
        for i in range(n):
            k_i = level.degree[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in level.adj[i].items():
                links[comm[j]] += w
            old = comm[i]
            tot[old] -= k_i
            best, best_gain = old, links.get(old, 0.0) - resolution * tot[old] * k_i / two_m
            eps = 1e-12 * max(1.0, k_i)
            for c in sorted(links):
                gain = links[c] - resolution * tot[c] * k_i / two_m
                if gain > best_gain + eps:
                    best, best_gain = c, gain
            tot[best] += k_i
            comm[i] = best
            if best != old:
                moved = True
        if not moved:
            break
        moved_any = True
    return comm, moved_any


def _renumber(comm: list[int]) -> list[int]:
    ids: dict[int, int] = {}
    return [ids.setdefault(c, len(ids)) for c in comm]


def _aggregate(level: _Level, comm: list[int]) -> _Level:
    k = max(comm) + 1
    adj: list[dict[int, float]] = [defaultdict(float) for _ in range(k)]
    loops = [0.0] * k
    for i, nbrs in enumerate(level.adj):
        ci = comm[i]
        loops[ci] += level.loops[i]
        for j, w in nbrs.items():
            cj = comm[j]
            if ci == cj:
                loops[ci] += w  # each internal edge is visited from both ends
            else:
                adj[ci][cj] += w
    return _Level([dict(a) for a in adj], loops)


def louvain(g: Network, resolution: float = 1.0) -> Partition:
    """Two-phase Louvain optimisation of modularity.

    Nodes are visited in ascending id order and candidate communities in
    ascending community id, so the result is deterministic. A node moves
    only on a strictly positive gain. Passes repeat on the coarsened graph
    until a level makes no move.
    """
    if not g.edges:
        raise ValueError("louvain needs at least one edge")
    order = sorted(g.nodes)
    index = {u: i for i, u in enumerate(order)}
    adj: list[dict[int, float]] = [{} for _ in order]
    for (u, v), w in g.edges.items():
        adj[index[u]][index[v]] = w
        adj[index[v]][index[u]] = w
    level = _Level(adj, [0.0] * len(order))
    two_m = sum(level.degree)
    membership = list(range(len(order)))
    while True:
        comm, moved = _one_level(level, two_m, resolution)
        if not moved:
            break
        comm = _renumber(comm)
        membership = [comm[c] for c in membership]
        level = _aggregate(level, comm)
    q = sum(s / two_m - resolution * (d / two_m) ** 2 for s, d in zip(level.loops, level.degree))
    return Partition.from_labels({u: membership[index[u]] for u in order}, order=order, modularity=q)


# --- partition comparison -------------------------------------------------


def _contingency(p: Partition, q: Partition) -> Counter:
    if set(p.assignment) != set(q.assignment):
        raise ValueError("partitions cover different node sets")
    return Counter((p.assignment[u], q.assignment[u]) for u in p.assignment)


def _entropy(sizes: Iterable[int], n: int) -> float:
    return -sum(s / n * math.log(s / n) for s in sizes if s)


def nmi(p: Partition, q: Partition) -> float:
    """Mutual information normalised by the geometric mean of the entropies."""
    table = _contingency(p, q)
    n = sum(table.values())
    if n == 0:
        raise ValueError("empty partitions")
    a = Counter(p.assignment.values())
    b = Counter(q.assignment.values())
    ha, hb = _entropy(a.values(), n), _entropy(b.values(), n)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    mi = sum(c / n * math.log(c * n / (a[i] * b[j])) for (i, j), c in table.items())
    return min(1.0, max(0.0, mi / math.sqrt(ha * hb)))


def _pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_counts(p: Partition, q: Partition) -> tuple[int, int, int]:
    """Co-member pairs in p, in q, and in both."""
    table = _contingency(p, q)
    both = sum(_pairs(c) for c in table.values())
    in_p = sum(_pairs(c) for c in Counter(p.assignment.values()).values())
    in_q = sum(_pairs(c) for c in Counter(q.assignment.values()).values())
    return in_p, in_q, both


def pairwise_f1(p: Partition, q: Partition) -> float:
    """F1 of the node pairs that ``p`` groups together, scored against ``q``."""
    in_p, in_q, both = pair_counts(p, q)
    if in_q == 0:
        raise DegenerateScoreError("reference partition has no co-member pairs; recall undefined")
    if in_p == 0:
        raise DegenerateScoreError("partition has no co-member pairs; precision undefined")
    if both == 0:
        return 0.0
    precision, recall = both / in_p, both / in_q
    return 2 * precision * recall / (precision + recall)


def group_composition(p: Partition, sectors: Mapping[str, str]) -> dict[int, dict[str, int]]:
    """Counts of sector labels inside each group (all sectors listed per group)."""
    all_sectors = sorted({sectors[u] for u in p.assignment})
    table = {g: dict.fromkeys(all_sectors, 0) for g in sorted(set(p.assignment.values()))}
    for u, g in p.assignment.items():
        table[g][sectors[u]] += 1
    return table


def comparison_report(p: Partition, reference: Partition) -> dict:
    try:
        f1 = pairwise_f1(p, reference)
    except DegenerateScoreError:
        f1 = None
    table = _contingency(p, reference)
    return {
        "nmi": nmi(p, reference),
        "f1": f1,
        "contingency": [[g, r, n] for (g, r), n in sorted(table.items())],
    }


def write_partition(p: Partition, handle) -> None:
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["ticker", "group"])
    for u in sorted(p.assignment):
        w.writerow([u, p.assignment[u]])


def read_partition(lines: Iterable[str]) -> Partition:
    reader = csv.DictReader(line for line in lines if not line.startswith("#"))
    if reader.fieldnames != ["ticker", "group"]:
        raise ValueError("partition CSV header must be ticker,group")
    return Partition({row["ticker"]: int(row["group"]) for row in reader})
