"""Voronoi regionalization of cities and GeoJSON export.

Cities are treated as points in the (lon, lat) plane; the study areas are a
few hundred kilometers across, where the equirectangular distortion does not
change which generator is nearest in practice. Each cell is constructed by
clipping the study rectangle against the perpendicular-bisector half-plane of
every other generator, keeping a source label per edge, so cell adjacency
falls out of the construction instead of a separate Delaunay pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from shapely.geometry import MultiPolygon, Polygon, mapping
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from .geo import City

# Edge labels >= 0 name the neighbor generator; negatives name rectangle sides.
RECT_BOTTOM, RECT_RIGHT, RECT_TOP, RECT_LEFT = -1, -2, -3, -4


@dataclass(frozen=True)
class ClipRect:
    """Axis-aligned study rectangle in (lon, lat) degrees."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError(f"degenerate clip rectangle {self}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


@dataclass(frozen=True)
class VoronoiCell:
    """Convex cell of one generator.

    ``vertices`` is (k, 2) in counterclockwise order; ``edge_labels[t]``
    labels the edge from vertex t to vertex t+1 (cyclic) with the neighbor
    generator index or a negative rectangle-side code.
    """

    site: int
    vertices: np.ndarray
    edge_labels: tuple[int, ...]

    @property
    def area(self) -> float:
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def edge(self, t: int) -> tuple[tuple[float, float], tuple[float, float]]:
        k = len(self.edge_labels)
        a = self.vertices[t]
        b = self.vertices[(t + 1) % k]
        return ((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))


@dataclass(frozen=True)
class VoronoiDiagram:
    """Clipped Voronoi cells for a city list, with the adjacency they induce.

    ``neighbor_pairs`` holds index pairs (i < j) of generators whose cells
    share a boundary edge of positive length.
    """

    cities: tuple[City, ...]
    points: np.ndarray
    clip: ClipRect
    cells: tuple[VoronoiCell, ...]
    neighbor_pairs: frozenset[tuple[int, int]]

    def neighbor_id_pairs(self) -> list[tuple[str, str]]:
        out = []
        for i, j in sorted(self.neighbor_pairs):
            id_i, id_j = self.cities[i].id, self.cities[j].id
            out.append((id_i, id_j) if id_i < id_j else (id_j, id_i))
        return sorted(out)


def _clip_half_plane(verts, labels, a, b, c, new_label, tol):
    """Clip a convex CCW polygon to {(x, y): a*x + b*y <= c}.

    Each surviving original edge keeps its label; the cut introduces one edge
    labeled ``new_label``. Zero-length edges from grazing cuts are dropped.
    """
    n = len(verts)
    vals = [a * vx + b * vy - c for vx, vy in verts]
    out_v: list[tuple[float, float]] = []
    out_l: list[int] = []
    for t in range(n):
        p = verts[t]
        fp = vals[t]
        q = verts[(t + 1) % n]
        fq = vals[(t + 1) % n]
        if fp <= 0.0:
            out_v.append(p)
            out_l.append(labels[t])
            if fq > 0.0:
                s = fp / (fp - fq)
                out_v.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
                out_l.append(new_label)
        elif fq <= 0.0:
            s = fp / (fp - fq)
            out_v.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
            out_l.append(labels[t])
    # Merge coincident consecutive vertices: the zero-length outgoing edge and
    # its label vanish, the successor keeps the position.
    m = len(out_v)
    keep_v: list[tuple[float, float]] = []
    keep_l: list[int] = []
    for t in range(m):
        nx = out_v[(t + 1) % m]
        if abs(out_v[t][0] - nx[0]) <= tol and abs(out_v[t][1] - nx[1]) <= tol:
            continue
        keep_v.append(out_v[t])
        keep_l.append(out_l[t])
    return keep_v, keep_l


def _build_cell(site: int, points: np.ndarray, clip: ClipRect, tol: float) -> VoronoiCell:
    verts = [
        (clip.min_x, clip.min_y),
        (clip.max_x, clip.min_y),
        (clip.max_x, clip.max_y),
        (clip.min_x, clip.max_y),
    ]
    labels = [RECT_BOTTOM, RECT_RIGHT, RECT_TOP, RECT_LEFT]
    px, py = float(points[site, 0]), float(points[site, 1])

    d2 = (points[:, 0] - px) ** 2 + (points[:, 1] - py) ** 2
    order = np.argsort(d2, kind="stable")
    r2_max = max((vx - px) ** 2 + (vy - py) ** 2 for vx, vy in verts)
    for j in order:
        j = int(j)
        if j == site:
            continue
        # A bisector at distance d/2 cannot cut a cell enclosed in radius R
        # when (d/2)^2 >= R^2; sites are sorted, so no later one can either.
        if d2[j] >= 4.0 * r2_max:
            break
        qx, qy = float(points[j, 0]), float(points[j, 1])
        a = 2.0 * (qx - px)
        b = 2.0 * (qy - py)
        c = qx * qx + qy * qy - px * px - py * py
        new_v, new_l = _clip_half_plane(verts, labels, a, b, c, j, tol)
        if len(new_v) < 3:
            raise AssertionError(f"cell of generator {site} collapsed")
        verts, labels = new_v, new_l
        r2_max = max((vx - px) ** 2 + (vy - py) ** 2 for vx, vy in verts)
    return VoronoiCell(site=site, vertices=np.array(verts), edge_labels=tuple(labels))


def voronoi(cities: Sequence[City], clip: Optional[ClipRect] = None, padding: float = 0.05) -> VoronoiDiagram:
    """Clipped Voronoi diagram of the cities in the (lon, lat) plane.

    The default clip rectangle is the bounding box padded on every side by
    ``padding`` times the larger box extent (so collinear generators still get
    a proper rectangle). Coincident generators are rejected, and every
    generator must lie inside the clip rectangle.
    """
    if len(cities) < 2:
        raise ValueError("need at least two cities")
    ids = [c.id for c in cities]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate city ids")
    points = np.array([(c.lon, c.lat) for c in cities], dtype=float)
    seen: dict[tuple[float, float], str] = {}
    for c in cities:
        key = (c.lon, c.lat)
        if key in seen:
            raise ValueError(f"coincident generators {seen[key]!r} and {c.id!r}")
        seen[key] = c.id

    if clip is None:
        pad = padding * max(float(np.ptp(points[:, 0])), float(np.ptp(points[:, 1])))
        if not pad > 0:
            raise ValueError("cannot derive a clip rectangle from the city layout")
        clip = ClipRect(
            min_x=float(points[:, 0].min() - pad),
            min_y=float(points[:, 1].min() - pad),
            max_x=float(points[:, 0].max() + pad),
            max_y=float(points[:, 1].max() + pad),
        )
    for c, (x, y) in zip(cities, points):
        if not clip.contains(x, y):
            raise ValueError(f"city {c.id!r} lies outside the clip rectangle")

    tol = 1e-12 * float(np.hypot(clip.width, clip.height))
    cells = tuple(_build_cell(i, points, clip, tol) for i in range(len(cities)))

    pairs = set()
    for cell in cells:
        k = len(cell.edge_labels)
        for t, lab in enumerate(cell.edge_labels):
            if lab < 0:
                continue
            (x1, y1), (x2, y2) = cell.edge(t)
            if np.hypot(x2 - x1, y2 - y1) > tol:
                pairs.add((min(cell.site, lab), max(cell.site, lab)))
    return VoronoiDiagram(
        cities=tuple(cities),
        points=points,
        clip=clip,
        cells=cells,
        neighbor_pairs=frozenset(pairs),
    )


@dataclass(frozen=True)
class BorderSegment:
    """Shared cell edge between two generators assigned to different regions."""

    city_i: str
    city_j: str
    coords: tuple[tuple[float, float], tuple[float, float]]
    split_frequency: float


@dataclass(frozen=True)
class RegionMap:
    """Communities dissolved into polygons plus the borders between them."""

    regions: dict
    borders: tuple[BorderSegment, ...]
    clip: ClipRect

    @property
    def total_area(self) -> float:
        return float(sum(geom.area for geom in self.regions.values()))


class _VertexSnapper:
    """Merge nearly coincident vertices onto one representative.

    The two cells flanking a shared edge compute its endpoints through
    different clipping sequences, so the coordinates differ by rounding
    noise; without snapping the dissolve leaves hairline slivers.
    """

    def __init__(self, tol: float):
        self.tol = tol
        self._reps: dict[tuple[int, int], tuple[float, float]] = {}

    def snap(self, x: float, y: float) -> tuple[float, float]:
        qx = round(x / self.tol)
        qy = round(y / self.tol)
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                rep = self._reps.get((qx + dx, qy + dy))
                if rep is not None and abs(rep[0] - x) <= self.tol and abs(rep[1] - y) <= self.tol:
                    return rep
        self._reps[(qx, qy)] = (x, y)
        return (x, y)


def merge_regions(
    diagram: VoronoiDiagram,
    labels: Mapping[str, int],
    split_frequency: Mapping[tuple[str, str], float],
) -> RegionMap:
    """Dissolve cells into one polygon per community and annotate borders.

    ``labels`` must cover exactly the diagram's cities. ``split_frequency``
    maps canonical city-id pairs to the fraction of detection runs separating
    them; it must cover every cross-community neighbor pair.
    """
    diagram_ids = {c.id for c in diagram.cities}
    missing = diagram_ids - set(labels)
    if missing:
        raise ValueError(f"labels missing for cities: {sorted(missing)}")
    extra = set(labels) - diagram_ids
    if extra:
        raise ValueError(f"labels for unknown cities: {sorted(extra)}")
    for pair, f in split_frequency.items():
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"split frequency {f} for pair {pair} outside [0, 1]")

    snapper = _VertexSnapper(tol=1e-9 * float(np.hypot(diagram.clip.width, diagram.clip.height)))
    by_comm: dict[int, list[Polygon]] = {}
    for cell in diagram.cells:
        cid = diagram.cities[cell.site].id
        coords = [snapper.snap(float(x), float(y)) for x, y in cell.vertices]
        by_comm.setdefault(labels[cid], []).append(Polygon(coords))
    regions = {comm: unary_union(polys) for comm, polys in sorted(by_comm.items())}

    borders = []
    for i, j in sorted(diagram.neighbor_pairs):
        id_i, id_j = diagram.cities[i].id, diagram.cities[j].id
        if labels[id_i] == labels[id_j]:
            continue
        key = (id_i, id_j) if id_i < id_j else (id_j, id_i)
        if key not in split_frequency:
            raise ValueError(f"no split frequency for border pair {key}")
        coords = _shared_edge(diagram, i, j)
        borders.append(
            BorderSegment(city_i=key[0], city_j=key[1], coords=coords, split_frequency=float(split_frequency[key]))
        )
    borders.sort(key=lambda s: (s.city_i, s.city_j))
    return RegionMap(regions=regions, borders=tuple(borders), clip=diagram.clip)


def _shared_edge(diagram: VoronoiDiagram, i: int, j: int):
    tol = 1e-12 * float(np.hypot(diagram.clip.width, diagram.clip.height))
    for a, b in ((i, j), (j, i)):
        cell = diagram.cells[a]
        for t, lab in enumerate(cell.edge_labels):
            if lab == b:
                coords = cell.edge(t)
                (x1, y1), (x2, y2) = coords
                if np.hypot(x2 - x1, y2 - y1) > tol:
                    return coords
    raise AssertionError(f"neighbor pair ({i}, {j}) has no shared edge")


def _oriented(geom):
    if isinstance(geom, Polygon):
        return orient(geom, sign=1.0)
    if isinstance(geom, MultiPolygon):
        return MultiPolygon([orient(p, sign=1.0) for p in geom.geoms])
    raise ValueError(f"unexpected geometry type {geom.geom_type}")


def to_geojson(region_map: RegionMap) -> dict:
    """RFC 7946 FeatureCollection: one feature per region, one per border.

    Coordinates are (lon, lat); polygon exteriors are counterclockwise.
    Feature order (regions by label, borders by pair) is deterministic.
    """
    features = []
    for comm in sorted(region_map.regions):
        geom = _oriented(region_map.regions[comm])
        features.append(
            {
                "type": "Feature",
                "geometry": mapping(geom),
                "properties": {"kind": "region", "community": int(comm)},
            }
        )
    for seg in region_map.borders:
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [list(seg.coords[0]), list(seg.coords[1])]},
                "properties": {
                    "kind": "border",
                    "city_i": seg.city_i,
                    "city_j": seg.city_j,
                    "split_frequency": seg.split_frequency,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_geojson(region_map: RegionMap, path) -> None:
    obj = to_geojson(region_map)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
