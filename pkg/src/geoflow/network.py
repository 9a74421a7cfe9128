"""Weighted interaction network built from city-pair flows, plus summary statistics.

Edge weights are trip counts. Distance statistics (diameter, average shortest
path, clustering) are computed on the unweighted skeleton: any positive weight
counts as one link.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .geo import City
from .ingest import FlowTable


class InteractionNetwork:
    """Undirected weighted graph over a fixed city list.

    Nodes are cities (isolated cities allowed); edges carry positive weights,
    no self-loops, no parallel edges. Edges are stored index-based with
    ``i < j`` and sorted, so iteration order is deterministic.
    """

    def __init__(self, cities: Sequence[City], edges: Iterable[tuple[str, str, float]]):
        ids = [c.id for c in cities]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate city ids")
        self.cities = list(cities)
        self.ids = tuple(ids)
        self._index = {cid: k for k, cid in enumerate(ids)}
        adj: list[dict[int, float]] = [dict() for _ in ids]
        edge_list = []
        for id_i, id_j, w in edges:
            if id_i not in self._index or id_j not in self._index:
                raise ValueError(f"edge ({id_i!r}, {id_j!r}) references unknown city")
            if id_i == id_j:
                raise ValueError(f"self-loop at {id_i!r}")
            w = float(w)
            if not w > 0:
                raise ValueError(f"edge ({id_i!r}, {id_j!r}) has non-positive weight {w}")
            i, j = self._index[id_i], self._index[id_j]
            if i > j:
                i, j = j, i
            if j in adj[i]:
                raise ValueError(f"duplicate edge ({id_i!r}, {id_j!r})")
            adj[i][j] = w
            adj[j][i] = w
            edge_list.append((i, j, w))
        edge_list.sort()
        self.edges: tuple[tuple[int, int, float], ...] = tuple(edge_list)
        self.adj: tuple[dict[int, float], ...] = tuple(adj)

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def index(self, city_id: str) -> int:
        try:
            return self._index[city_id]
        except KeyError:
            raise KeyError(f"unknown city id {city_id!r}") from None

    def degree(self, i: int) -> int:
        return len(self.adj[i])

    def strength(self, i: int) -> float:
        # Summation over sorted neighbor index keeps float results
        # order-independent of edge insertion.
        return float(sum(self.adj[i][j] for j in sorted(self.adj[i])))

    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=float)


def build_network(flows: FlowTable, cities: Sequence[City]) -> InteractionNetwork:
    """Build the interaction network for ``cities`` from a flow table.

    Every flow endpoint must be a known city. Cities with no flows become
    isolated nodes.
    """
    return InteractionNetwork(cities, ((i, j, float(w)) for (i, j), w in flows.items()))


@dataclass(frozen=True)
class NetworkStats:
    """Global summary statistics.

    ``density``, ``avg_degree`` and ``avg_clustering`` cover the whole graph;
    ``diameter`` and ``avg_shortest_path`` cover the largest connected
    component when ``connected`` is False (``component_nodes`` says how large
    it is). For a graph with no edges both path statistics are 0.
    """

    n_nodes: int
    n_edges: int
    density: float
    avg_degree: float
    diameter: int
    avg_shortest_path: float
    avg_clustering: float
    connected: bool
    component_nodes: int


def _components(g: InteractionNetwork) -> list[list[int]]:
    seen = [False] * g.n_nodes
    comps = []
    for start in range(g.n_nodes):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def _bfs_hops(g: InteractionNetwork, source: int, members: set[int]) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.adj[u]:
            if v in members and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _local_clustering(g: InteractionNetwork, i: int) -> float:
    neigh = sorted(g.adj[i])
    k = len(neigh)
    if k < 2:
        return 0.0
    links = 0
    for a in range(k):
        adj_a = g.adj[neigh[a]]
        for b in range(a + 1, k):
            if neigh[b] in adj_a:
                links += 1
    return 2.0 * links / (k * (k - 1))


def compute_stats(g: InteractionNetwork) -> NetworkStats:
    """Compute global statistics on the unweighted skeleton.

    density = 2E / (N(N-1)) and avg_degree = 2E / N hold by construction.
    Shortest paths are hop counts via BFS over the largest component.
    """
    n, e = g.n_nodes, g.n_edges
    if n == 0:
        raise ValueError("empty graph")
    density = 2.0 * e / (n * (n - 1)) if n > 1 else 0.0
    avg_degree = 2.0 * e / n
    clustering = sum(_local_clustering(g, i) for i in range(n)) / n

    comps = _components(g)
    largest = max(comps, key=len)
    connected = len(comps) == 1
    diameter = 0
    avg_path = 0.0
    if len(largest) > 1:
        members = set(largest)
        total = 0
        count = 0
        for src in largest:
            dist = _bfs_hops(g, src, members)
            if len(dist) != len(largest):
                raise AssertionError("BFS did not cover the component")
            for v, d in dist.items():
                if v > src:
                    total += d
                    count += 1
                    if d > diameter:
                        diameter = d
        avg_path = total / count
    return NetworkStats(
        n_nodes=n,
        n_edges=e,
        density=density,
        avg_degree=avg_degree,
        diameter=diameter,
        avg_shortest_path=avg_path,
        avg_clustering=clustering,
        connected=connected,
        component_nodes=len(largest),
    )


@dataclass(frozen=True)
class WeightDistribution:
    """Logarithmically binned edge-weight histogram with a power-law fit.

    ``slope`` is the least-squares slope of log(count) against log(bin
    center); for weights following p(w) ~ w^-gamma the raw counts in
    log-spaced bins fall off with slope 1 - gamma, so ``exponent`` reports
    1 - slope. ``fitted`` is False when fewer than two bins are occupied.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    slope: float
    exponent: float
    fitted: bool

    @property
    def centers(self) -> np.ndarray:
        return np.sqrt(self.bin_edges[:-1] * self.bin_edges[1:])


def fit_log_binned_slope(
    values: np.ndarray, bin_ratio: float = 2.0, fit_range: Optional[tuple[float, float]] = None
) -> WeightDistribution:
    """Bin positive values into geometric bins and fit a log-log slope.

    Bins start at the minimum value and grow by ``bin_ratio``. Only occupied
    bins enter the fit; ``fit_range`` restricts the fit to bins whose
    geometric center lies inside [lo, hi].
    """
    values = np.asarray(values, dtype=float)
    if values.size < 10:
        raise ValueError(f"need at least 10 values, got {values.size}")
    if not np.all(values > 0):
        raise ValueError("values must be positive")
    if not bin_ratio > 1.0:
        raise ValueError(f"bin_ratio must exceed 1, got {bin_ratio}")
    lo = values.min()
    hi = values.max()
    n_bins = 1
    while lo * bin_ratio**n_bins <= hi:
        n_bins += 1
    edges = lo * bin_ratio ** np.arange(n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    if counts.sum() != values.size:
        raise AssertionError("binning lost values")

    centers = np.sqrt(edges[:-1] * edges[1:])
    mask = counts > 0
    if fit_range is not None:
        mask = mask & (centers >= fit_range[0]) & (centers <= fit_range[1])
    if mask.sum() < 2:
        return WeightDistribution(edges, counts, slope=float("nan"), exponent=float("nan"), fitted=False)
    slope, _ = np.polyfit(np.log(centers[mask]), np.log(counts[mask].astype(float)), 1)
    return WeightDistribution(edges, counts, slope=float(slope), exponent=float(1.0 - slope), fitted=True)


def weight_distribution(
    g: InteractionNetwork, bin_ratio: float = 2.0, fit_range: Optional[tuple[float, float]] = None
) -> WeightDistribution:
    """Edge-weight histogram of ``g`` in geometric bins, with slope fit."""
    if g.n_edges < 10:
        raise ValueError(f"need at least 10 edges, got {g.n_edges}")
    return fit_log_binned_slope(g.weights(), bin_ratio=bin_ratio, fit_range=fit_range)


@dataclass(frozen=True)
class FlowComparison:
    """Agreement between two flow tables on their common pairs.

    ``r_squared`` is the coefficient of determination of a linear regression
    of table B weights on table A weights over common pairs. ``top_ratios``
    lists the pairs with the largest A/B ratio, descending.
    """

    n_common: int
    r_squared: float
    top_ratios: tuple[tuple[str, str, float, float, float], ...]


def compare_flows(a: FlowTable, b: FlowTable, top_k: int = 50) -> FlowComparison:
    """Compare two flow tables over the pairs present in both.

    Requires at least 3 common pairs. Ratio ranking breaks ties by pair id so
    the output is deterministic.
    """
    common = sorted(set(a.pairs()) & set(b.pairs()))
    if len(common) < 3:
        raise ValueError(f"need at least 3 common pairs, got {len(common)}")
    wa = np.array([a.get(*p) for p in common], dtype=float)
    wb = np.array([b.get(*p) for p in common], dtype=float)

    slope, intercept = np.polyfit(wa, wb, 1)
    resid = wb - (slope * wa + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((wb - wb.mean()) ** 2))
    if ss_tot == 0.0:
        # B constant over common pairs: the regression explains nothing.
        r_squared = 1.0 if ss_res == 0.0 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot

    ratio = wa / wb
    order = sorted(range(len(common)), key=lambda k: (-ratio[k], common[k]))
    top = tuple(
        (common[k][0], common[k][1], float(wa[k]), float(wb[k]), float(ratio[k]))
        for k in order[: max(0, top_k)]
    )
    return FlowComparison(n_common=len(common), r_squared=float(r_squared), top_ratios=top)
