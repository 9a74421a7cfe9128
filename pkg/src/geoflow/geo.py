"""Great-circle geometry: cities, pairwise distances, and the cities.csv format.

All distances are kilometers on a sphere of radius 6371.0088 km. Travel
between cities is treated as great-circle; actual route lengths (road, rail,
air corridors) are not modeled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class City:
    """A city collapsed to a single representative coordinate.

    ``region`` is an optional label used to split flows into intra- and
    inter-region groups; it plays no role in distance computations.
    """

    id: str
    name: str
    lat: float
    lon: float
    region: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("city id must be non-empty")
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"city {self.id!r}: non-finite coordinates")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"city {self.id!r}: latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"city {self.id!r}: longitude {self.lon} outside [-180, 180]")

    @property
    def location(self) -> tuple[float, float]:
        """(lat, lon) in degrees."""
        return (self.lat, self.lon)


def great_circle_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance in kilometers between two (lat, lon) points.

    Uses the mean Earth radius 6371.0088 km. The haversine form is stable for
    short distances where the spherical law of cosines loses precision.
    """
    lat1, lon1 = float(a[0]), float(a[1])
    lat2, lon2 = float(b[0]), float(b[1])
    for v, name, lim in (
        (lat1, "latitude", 90.0),
        (lat2, "latitude", 90.0),
        (lon1, "longitude", 180.0),
        (lon2, "longitude", 180.0),
    ):
        if not math.isfinite(v):
            raise ValueError(f"non-finite {name}")
        if abs(v) > lim:
            raise ValueError(f"{name} {v} outside [-{lim}, {lim}]")
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # h can exceed 1 by rounding for near-antipodal pairs; clamp before asin.
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise great-circle distances for a fixed city list.

    ``values`` is an (n, n) float array in kilometers with a zero diagonal.
    The array is owned by the matrix and must not be mutated.
    """

    ids: tuple[str, ...]
    values: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise ValueError(f"distance array shape {self.values.shape} does not match {n} ids")
        object.__setattr__(self, "_index", {cid: i for i, cid in enumerate(self.ids)})
        if len(self._index) != n:
            raise ValueError("duplicate city ids")

    @property
    def n(self) -> int:
        return len(self.ids)

    def index(self, city_id: str) -> int:
        try:
            return self._index[city_id]
        except KeyError:
            raise KeyError(f"unknown city id {city_id!r}") from None

    def distance(self, id_i: str, id_j: str) -> float:
        return float(self.values[self.index(id_i), self.index(id_j)])


def build_distance_matrix(cities: Sequence[City]) -> DistanceMatrix:
    """Compute all pairwise great-circle distances for ``cities``.

    Requires at least two cities and unique ids. Cities may share a location;
    the corresponding off-diagonal entry is then zero, which downstream
    consumers that need positive distances must reject themselves.
    """
    if len(cities) < 2:
        raise ValueError("need at least two cities")
    ids = tuple(c.id for c in cities)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate city ids")
    lat = np.radians(np.array([c.lat for c in cities], dtype=float))
    lon = np.radians(np.array([c.lon for c in cities], dtype=float))
    dphi = lat[:, None] - lat[None, :]
    dlam = lon[:, None] - lon[None, :]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlam / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    np.fill_diagonal(d, 0.0)
    # Enforce exact symmetry; rounding in the vectorized form is below 1e-12
    # but downstream code asserts d[i, j] == d[j, i].
    d = (d + d.T) / 2.0
    return DistanceMatrix(ids=ids, values=d)


# cities.csv: header id,name,lat,lon,region; region may be empty.
_CITY_FIELDS = ["id", "name", "lat", "lon", "region"]


def read_cities(path) -> list[City]:
    """Read a cities.csv file. Raises ValueError on malformed rows."""
    cities: list[City] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _CITY_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(_CITY_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                region = row["region"].strip() or None
                cities.append(
                    City(
                        id=row["id"].strip(),
                        name=row["name"].strip(),
                        lat=float(row["lat"]),
                        lon=float(row["lon"]),
                        region=region,
                    )
                )
            except (TypeError, ValueError, AttributeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad city row: {exc}") from exc
    ids = [c.id for c in cities]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate city ids")
    return cities


def write_cities(cities: Iterable[City], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CITY_FIELDS)
        for c in cities:
            writer.writerow([c.id, c.name, repr(c.lat), repr(c.lon), c.region or ""])
