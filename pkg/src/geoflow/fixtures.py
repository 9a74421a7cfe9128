"""Synthetic data generators: planted gravity flows, check-in realizations,
planted-partition graphs, and the bundled demo fixture.

Everything here is seeded and deterministic so that fixtures can be
regenerated bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence

import numpy as np

from .geo import City, DistanceMatrix, build_distance_matrix, write_cities
from .gravity import GravityModel
from .ingest import CheckInRecord, FlowTable, write_checkins
from .network import InteractionNetwork


def clustered_cities(
    n_per_region: int = 10,
    centers: Sequence[tuple[float, float]] = ((31.0, 104.0), (36.5, 114.5), (28.5, 118.5)),
    spread_deg: float = 1.4,
    seed: int = 7,
) -> list[City]:
    """Cities in well-separated spatial clusters; region labels follow clusters."""
    rng = np.random.default_rng(seed)
    cities = []
    k = 0
    for r, (clat, clon) in enumerate(centers):
        for _ in range(n_per_region):
            lat = clat + rng.uniform(-spread_deg, spread_deg)
            lon = clon + rng.uniform(-spread_deg, spread_deg)
            cities.append(
                City(id=f"c{k:03d}", name=f"City {k:03d}", lat=float(lat), lon=float(lon), region=f"R{r}")
            )
            k += 1
    return cities


def scattered_cities(n: int, seed: int = 0, lat_range=(20.0, 45.0), lon_range=(80.0, 125.0)) -> list[City]:
    """Cities scattered uniformly over a rectangular window, single region."""
    rng = np.random.default_rng(seed)
    return [
        City(
            id=f"c{k:03d}",
            name=f"City {k:03d}",
            lat=float(rng.uniform(*lat_range)),
            lon=float(rng.uniform(*lon_range)),
            region="R0",
        )
        for k in range(n)
    ]


def grid_cities(n: int, cols: int = 10, origin=(30.0, 100.0), step_deg: float = 0.5) -> list[City]:
    """Cities on a regular grid; geometry is a placeholder for graph tests."""
    out = []
    for k in range(n):
        r, c = divmod(k, cols)
        out.append(
            City(id=f"n{k:03d}", name=f"Node {k:03d}", lat=origin[0] + r * step_deg, lon=origin[1] + c * step_deg)
        )
    return out


@dataclass(frozen=True)
class PlantedGravity:
    """Ground truth behind a synthetic flow table."""

    cities: tuple[City, ...]
    dm: DistanceMatrix
    model: GravityModel
    flows: FlowTable


def planted_gravity_flows(
    cities: Sequence[City],
    beta: float,
    seed: int = 0,
    size_sigma: float = 1.0,
    min_flow: float = 1000.0,
    total_flow: Optional[float] = None,
    noise_sigma: float = 0.0,
    intra_region_boost: float = 1.0,
    intra_beta: Optional[float] = None,
) -> PlantedGravity:
    """Flows generated from a gravity model with lognormal sizes.

    Sizes are normalized to mean 1. The prefactor k is set so the smallest
    pair flow is about ``min_flow`` before rounding to integer trip counts,
    or so the table sums to about ``total_flow`` when that is given; pairs
    rounding to zero are dropped (unobserved). ``noise_sigma`` applies
    multiplicative lognormal noise. Two-regime tables come from
    ``intra_region_boost`` (scales flows whose endpoints share a region) or
    ``intra_beta`` (same-region pairs decay with their own exponent).
    """
    rng = np.random.default_rng(seed)
    dm = build_distance_matrix(cities)
    n = len(cities)
    sizes = rng.lognormal(mean=0.0, sigma=size_sigma, size=n)
    sizes /= sizes.mean()

    iu, ju = np.triu_indices(n, k=1)
    d = dm.values[iu, ju]
    if not np.all(d > 0):
        raise ValueError("planted cities must have distinct locations")
    if intra_beta is not None or intra_region_boost != 1.0:
        regions = [c.region for c in cities]
        intra = np.array([regions[a] == regions[b] for a, b in zip(iu, ju)])
    if intra_beta is not None:
        decay = np.where(intra, intra_beta, beta)
        raw = sizes[iu] * sizes[ju] * d ** (-decay)
    else:
        raw = sizes[iu] * sizes[ju] * d ** (-beta)
    if intra_region_boost != 1.0:
        raw = raw * np.where(intra, intra_region_boost, 1.0)
    k = total_flow / raw.sum() if total_flow is not None else min_flow / raw.min()
    w = k * raw
    if noise_sigma > 0.0:
        w = w * rng.lognormal(mean=0.0, sigma=noise_sigma, size=w.size)
    w = np.rint(w).astype(int)

    flows = FlowTable()
    for a, b, count in zip(iu, ju, w):
        if count >= 1:
            flows.add(cities[a].id, cities[b].id, int(count))
    model = GravityModel(beta=beta, k=float(k), sizes={c.id: float(s) for c, s in zip(cities, sizes)})
    return PlantedGravity(cities=tuple(cities), dm=dm, model=model, flows=flows)


def realize_checkins(
    cities: Sequence[City],
    flows: FlowTable,
    seed: int = 0,
    start: Optional[datetime] = None,
    n_fake_users: int = 0,
    fake_offset_deg: float = 0.5,
) -> list[CheckInRecord]:
    """Check-in records whose extracted trips reproduce ``flows`` exactly.

    Each observed pair gets one dedicated user alternating between the two
    cities: c trips need c+1 visits. Honest records place the user at the
    venue. ``n_fake_users`` adds users whose every record reports a position
    ``fake_offset_deg`` away from the venue; the spoof filter should remove
    them entirely, and with it their would-be trips.
    """
    loc = {c.id: (c.lat, c.lon) for c in cities}
    base = start or datetime(2012, 3, 1, tzinfo=timezone.utc)
    records: list[CheckInRecord] = []
    for u, ((id_i, id_j), count) in enumerate(flows.items()):
        t = base + timedelta(days=u)
        for v in range(count + 1):
            cid = id_i if v % 2 == 0 else id_j
            lat, lon = loc[cid]
            records.append(
                CheckInRecord(
                    user_id=f"u{u:05d}",
                    timestamp=t + timedelta(hours=v),
                    city_id=cid,
                    lat=lat,
                    lon=lon,
                    venue_lat=lat,
                    venue_lon=lon,
                )
            )
    rng = np.random.default_rng(seed)
    ids = [c.id for c in cities]
    for f in range(n_fake_users):
        picks = rng.choice(len(ids), size=3, replace=False)
        t = base + timedelta(days=400 + f)
        for v, pk in enumerate(picks):
            cid = ids[int(pk)]
            lat, lon = loc[cid]
            records.append(
                CheckInRecord(
                    user_id=f"fake{f:03d}",
                    timestamp=t + timedelta(hours=v),
                    city_id=cid,
                    lat=lat + fake_offset_deg,
                    lon=lon + fake_offset_deg,
                    venue_lat=lat,
                    venue_lon=lon,
                )
            )
    return records


def planted_partition_network(
    n_blocks: int = 4,
    block_size: int = 15,
    p_in: float = 0.5,
    p_out: float = 0.02,
    seed: int = 0,
    weight: float = 1.0,
) -> tuple[InteractionNetwork, list[int]]:
    """Random graph with equal planted blocks; returns the network and true labels."""
    n = n_blocks * block_size
    cities = grid_cities(n)
    labels = [k // block_size for k in range(n)]
    rng = np.random.default_rng(seed)
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            p = p_in if labels[a] == labels[b] else p_out
            if rng.random() < p:
                edges.append((cities[a].id, cities[b].id, weight))
    return InteractionNetwork(cities, edges), labels


def two_cliques_network(clique_size: int = 5, bridge_weight: float = 1.0) -> tuple[InteractionNetwork, list[int]]:
    """Two complete graphs joined by a single bridge edge."""
    n = 2 * clique_size
    cities = grid_cities(n)
    labels = [0] * clique_size + [1] * clique_size
    edges = []
    for block in (range(clique_size), range(clique_size, n)):
        block = list(block)
        for x in range(len(block)):
            for y in range(x + 1, len(block)):
                edges.append((cities[block[x]].id, cities[block[y]].id, 1.0))
    edges.append((cities[clique_size - 1].id, cities[clique_size].id, bridge_weight))
    return InteractionNetwork(cities, edges), labels


def random_weighted_network(n: int, p: float, seed: int = 0, max_weight: int = 9) -> InteractionNetwork:
    """Erdos-Renyi graph with integer weights in [1, max_weight]."""
    cities = grid_cities(n)
    rng = np.random.default_rng(seed)
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                edges.append((cities[a].id, cities[b].id, float(rng.integers(1, max_weight + 1))))
    return InteractionNetwork(cities, edges)


# Bundled demo fixture: 30 clustered cities, pure beta=0.8 gravity flows
# realized as alternating check-in users plus spoofed users.
FIXTURE_BETA = 0.8
FIXTURE_SEED = 20120301


def build_demo_fixture() -> tuple[list[City], list[CheckInRecord], PlantedGravity]:
    cities = clustered_cities(seed=FIXTURE_SEED)
    planted = planted_gravity_flows(
        cities, beta=FIXTURE_BETA, seed=FIXTURE_SEED, size_sigma=0.8, total_flow=20000.0
    )
    records = realize_checkins(cities, planted.flows, seed=FIXTURE_SEED, n_fake_users=25)
    return cities, records, planted


def write_demo_fixture(directory) -> None:
    """Write cities.csv and checkins.csv for the bundled demo."""
    import os

    cities, records, _ = build_demo_fixture()
    write_cities(cities, os.path.join(directory, "cities.csv"))
    write_checkins(records, os.path.join(directory, "checkins.csv"))
