"""Weighted-modularity community detection: multilevel moving, consensus runs.

Modularity of a partition c on a weighted graph:

    Q = (1/2m) * sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)

with k_i the weighted degree (strength) of node i and 2m the total strength.
The multilevel heuristic repeats two phases: greedy local moving of single
nodes (only strictly improving moves are accepted) and aggregation of the
found communities into super-nodes. Runs are seeded; a consensus pass over
many seeds measures how often node pairs are split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .network import InteractionNetwork


@dataclass(frozen=True)
class Partition:
    """Community labels aligned with a network's node order.

    Labels are contiguous integers 0..n_communities-1, renumbered by first
    appearance along the node order.
    """

    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.labels) == 0:
            raise ValueError("empty partition")
        distinct = set(self.labels)
        if distinct != set(range(len(distinct))):
            raise ValueError("labels must be contiguous integers starting at 0")

    @property
    def n_communities(self) -> int:
        return max(self.labels) + 1

    def communities(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.n_communities)]
        for node, c in enumerate(self.labels):
            groups[c].append(node)
        return groups


def canonical_labels(raw: Sequence[int]) -> Partition:
    """Renumber arbitrary labels to 0..C-1 by first appearance."""
    mapping: dict[int, int] = {}
    out = []
    for lab in raw:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return Partition(labels=tuple(out))


def modularity(g: InteractionNetwork, partition: Partition) -> float:
    """Weighted modularity Q of ``partition`` on ``g``.

    The intra-community weight and the total strength are accumulated with
    the same per-node summation order, so the all-in-one partition yields
    exactly 0.0 rather than rounding noise.
    """
    if g.n_nodes == 0:
        raise ValueError("empty graph")
    if len(partition.labels) != g.n_nodes:
        raise ValueError(f"partition covers {len(partition.labels)} nodes, graph has {g.n_nodes}")
    if g.n_edges == 0 or not g.total_weight > 0:
        raise ValueError("modularity undefined for a graph with zero total weight")

    labels = partition.labels
    n_comm = partition.n_communities
    strengths = np.zeros(g.n_nodes)
    intra = np.zeros(g.n_nodes)
    for i in range(g.n_nodes):
        s = 0.0
        w_in = 0.0
        for j in sorted(g.adj[i]):
            w = g.adj[i][j]
            s += w
            if labels[j] == labels[i]:
                w_in += w
        strengths[i] = s
        intra[i] = w_in
    two_m = float(sum(strengths))
    intra_total = float(sum(intra))
    comm_strength = [0.0] * n_comm
    for i in range(g.n_nodes):
        comm_strength[labels[i]] += strengths[i]
    q = intra_total / two_m
    for ks in comm_strength:
        q -= (ks / two_m) ** 2
    return q


class _LevelGraph:
    """Working graph for one aggregation level: adjacency dicts plus self-loops."""

    def __init__(self, adj: list[dict[int, float]], loops: list[float]):
        self.adj = adj
        self.loops = loops
        self.n = len(adj)
        # strength counts self-loops twice, matching the aggregated A_ii term
        self.strength = [sum(adj[i][j] for j in sorted(adj[i])) + 2.0 * loops[i] for i in range(self.n)]
        self.two_m = sum(self.strength)

    @classmethod
    def from_network(cls, g: InteractionNetwork) -> "_LevelGraph":
        return cls([dict(a) for a in g.adj], [0.0] * g.n_nodes)

    def modularity(self, comm: list[int]) -> float:
        tot = [0.0] * (max(comm) + 1)
        intra = 0.0
        for i in range(self.n):
            tot[comm[i]] += self.strength[i]
            intra += 2.0 * self.loops[i]
            for j, w in self.adj[i].items():
                if comm[j] == comm[i]:
                    intra += w
        q = intra / self.two_m
        for ks in tot:
            q -= (ks / self.two_m) ** 2
        return q


def _local_move(
    level: _LevelGraph,
    rng: np.random.Generator,
    validate: bool,
    init: Optional[list[int]] = None,
) -> tuple[list[int], bool]:
    """Greedy single-node moving until a full sweep makes no move.

    Starts from ``init`` (default: every node its own community). Gains are
    compared in the reduced form k_{i,C} - Sigma_tot(C) * k_i / 2m, which
    orders target communities identically to the modularity change. Only
    strictly positive improvements over staying are taken; equal-gain targets
    resolve to the lowest community label. A node may also escape to a fresh
    singleton community when even that beats staying.
    """
    n = level.n
    comm = list(range(n)) if init is None else list(init)
    sigma_tot: dict[int, float] = {}
    for i in range(n):
        sigma_tot[comm[i]] = sigma_tot.get(comm[i], 0.0) + level.strength[i]
    next_free = max(comm) + 1
    two_m = level.two_m
    improved_any = False
    q_before = level.modularity(comm) if validate else 0.0

    while True:
        moved = False
        for i in rng.permutation(n):
            i = int(i)
            ci = comm[i]
            k_i = level.strength[i]
            w_to: dict[int, float] = {}
            for j, w in level.adj[i].items():
                cj = comm[j]
                w_to[cj] = w_to.get(cj, 0.0) + w
            # Gains are evaluated with i removed from its community.
            sigma_tot[ci] -= k_i
            stay_gain = w_to.get(ci, 0.0) - sigma_tot[ci] * k_i / two_m
            best_c = ci
            best_gain = stay_gain
            for c in sorted(w_to):
                if c == ci:
                    continue
                gain = w_to[c] - sigma_tot.get(c, 0.0) * k_i / two_m
                if gain > best_gain or (gain == best_gain and c < best_c):
                    best_c = c
                    best_gain = gain
            if 0.0 > best_gain:
                # A fresh singleton (gain 0) beats every occupied target.
                best_c = next_free
                best_gain = 0.0
            if best_c != ci and best_gain > stay_gain:
                comm[i] = best_c
                sigma_tot[best_c] = sigma_tot.get(best_c, 0.0) + k_i
                if best_c == next_free:
                    next_free += 1
                moved = True
                improved_any = True
                if validate:
                    q_after = level.modularity(comm)
                    if not q_after > q_before:
                        raise AssertionError(
                            f"local move did not increase modularity: {q_before} -> {q_after}"
                        )
                    q_before = q_after
            else:
                sigma_tot[ci] += k_i
        if not moved:
            break
    return comm, improved_any


def _aggregate(level: _LevelGraph, comm: list[int]) -> tuple[_LevelGraph, list[int]]:
    """Collapse communities into super-nodes; returns the new graph and the relabeling."""
    labels = sorted(set(comm))
    remap = {lab: k for k, lab in enumerate(labels)}
    m = len(labels)
    adj: list[dict[int, float]] = [dict() for _ in range(m)]
    loops = [0.0] * m
    for i in range(level.n):
        ci = remap[comm[i]]
        loops[ci] += level.loops[i]
        for j, w in level.adj[i].items():
            if j < i:
                continue
            cj = remap[comm[j]]
            if ci == cj:
                loops[ci] += w
            else:
                adj[ci][cj] = adj[ci].get(cj, 0.0) + w
                adj[cj][ci] = adj[cj].get(ci, 0.0) + w
    return _LevelGraph(adj, loops), [remap[c] for c in comm]


def detect_multilevel(g: InteractionNetwork, seed=0, validate: bool = False) -> Partition:
    """Multilevel modularity maximization; deterministic for a fixed seed.

    ``seed`` is anything ``numpy.random.default_rng`` accepts (int or
    SeedSequence) and feeds the per-sweep node ordering. With ``validate`` every
    accepted move re-evaluates Q on the level graph and asserts a strict
    increase. A graph with no edges returns all singletons.
    """
    if g.n_nodes == 0:
        raise ValueError("empty graph")
    if g.n_edges == 0:
        return canonical_labels(list(range(g.n_nodes)))
    rng = np.random.default_rng(seed)
    n = g.n_nodes
    assignment = list(range(n))  # original node -> current community
    while True:
        # Restart moving at the original graph from the current partition;
        # after the first cascade this polishes single misplaced nodes.
        level = _LevelGraph.from_network(g)
        comm, improved = _local_move(level, rng, validate, init=assignment)
        if not improved:
            break
        level, assignment = _aggregate(level, comm)
        while level.n > 1:
            comm, improved = _local_move(level, rng, validate)
            if not improved:
                break
            level, relabeled = _aggregate(level, comm)
            assignment = [relabeled[assignment[i]] for i in range(n)]
    return canonical_labels(assignment)


@dataclass(frozen=True)
class ConsensusResult:
    """Outcome of repeated seeded detection runs.

    ``reference`` is the partition with the highest modularity (first such
    run on ties). ``pair_split_frequency`` maps a canonical city-id pair to
    the fraction of runs that separated the two cities.
    """

    partitions: tuple[Partition, ...]
    modularities: tuple[float, ...]
    reference_index: int
    pair_split_frequency: dict[tuple[str, str], float]

    @property
    def reference(self) -> Partition:
        return self.partitions[self.reference_index]


def consensus(
    g: InteractionNetwork,
    runs: int = 20,
    seed: int = 0,
    pairs: Optional[Iterable[tuple[str, str]]] = None,
    threads: int = 1,
) -> ConsensusResult:
    """Run detection under ``runs`` independent seeds and score pair stability.

    Child seeds are spawned from ``seed`` so the ensemble is reproducible.
    ``pairs`` defaults to the graph's edges; a natural choice is the spatial
    neighbor pairs of the Voronoi diagram, giving border stability.
    ``threads`` caps concurrent runs; every run owns a pre-spawned seed and
    results are collected in run order, so the outcome does not depend on it.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if pairs is None:
        pair_list = [(g.ids[i], g.ids[j]) for i, j, _ in g.edges]
    else:
        pair_list = [tuple(p) for p in pairs]
    for id_i, id_j in pair_list:
        if id_i == id_j:
            raise ValueError(f"self-pair {id_i!r}")
        g.index(id_i), g.index(id_j)

    children = np.random.SeedSequence(seed).spawn(runs)
    if threads == 1:
        partitions = [detect_multilevel(g, seed=children[r]) for r in range(runs)]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            partitions = list(pool.map(lambda s: detect_multilevel(g, seed=s), children))
    mods = [modularity(g, p) for p in partitions]
    reference_index = int(np.argmax(mods))  # argmax takes the first maximum

    freq: dict[tuple[str, str], float] = {}
    for id_i, id_j in pair_list:
        i, j = g.index(id_i), g.index(id_j)
        split = sum(1 for p in partitions if p.labels[i] != p.labels[j])
        key = (id_i, id_j) if id_i < id_j else (id_j, id_i)
        freq[key] = split / runs
    return ConsensusResult(
        partitions=tuple(partitions),
        modularities=tuple(mods),
        reference_index=reference_index,
        pair_split_frequency=freq,
    )


def spatial_connectivity(
    labels: Mapping[str, int], adjacency: Iterable[tuple[str, str]]
) -> dict[int, int]:
    """Count spatially connected pieces of each community.

    ``adjacency`` lists neighbor pairs (for example Voronoi cell neighbors)
    and must cover every labeled node; a community whose members form one
    connected patch under the adjacency scores 1.
    """
    neighbors: dict[str, set[str]] = {node: set() for node in labels}
    covered: set[str] = set()
    for id_i, id_j in adjacency:
        if id_i not in labels or id_j not in labels:
            raise ValueError(f"adjacency pair ({id_i!r}, {id_j!r}) references unlabeled node")
        covered.add(id_i)
        covered.add(id_j)
        if id_i != id_j:
            neighbors[id_i].add(id_j)
            neighbors[id_j].add(id_i)
    missing = set(labels) - covered
    if missing:
        raise ValueError(f"nodes missing from adjacency: {sorted(missing)}")

    pieces: dict[int, int] = {}
    seen: set[str] = set()
    for node in sorted(labels):
        if node in seen:
            continue
        c = labels[node]
        stack = [node]
        seen.add(node)
        while stack:
            u = stack.pop()
            for v in neighbors[u]:
                if v not in seen and labels[v] == c:
                    seen.add(v)
                    stack.append(v)
        pieces[c] = pieces.get(c, 0) + 1
    return pieces
