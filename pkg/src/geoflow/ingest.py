"""Check-in ingestion: fake-location filtering, trajectories, trips, and flows.

A check-in carries the user's reported position and, when the service knows
it, the registered venue position. Records whose reported position is far
from the venue are treated as location spoofing and dropped. Surviving
records are grouped per user, ordered by time, and consecutive visits to
different cities become directed trips, which aggregate into undirected
city-pair flows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional, Sequence

from .geo import great_circle_distance

DEFAULT_FAKE_THRESHOLD_KM = 5.0


@dataclass(frozen=True)
class CheckInRecord:
    """One geo-tagged check-in.

    ``venue_lat``/``venue_lon`` are the registered venue coordinates; both are
    None when the venue location is unknown, in which case the record cannot
    be screened for spoofing and is kept.
    """

    user_id: str
    timestamp: datetime
    city_id: str
    lat: float
    lon: float
    venue_lat: Optional[float] = None
    venue_lon: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("empty user_id")
        if not self.city_id:
            raise ValueError("empty city_id")
        if (self.venue_lat is None) != (self.venue_lon is None):
            raise ValueError(f"user {self.user_id!r}: venue coordinates must be both set or both absent")

    @property
    def has_venue(self) -> bool:
        return self.venue_lat is not None


@dataclass(frozen=True)
class Trajectory:
    """A user's check-in sequence reduced to (city_id, timestamp), time-ordered."""

    user_id: str
    visits: tuple[tuple[str, datetime], ...]


class FlowTable:
    """Undirected city-pair trip counts.

    Pairs are stored canonically with the lexicographically smaller id first,
    so (a, b) and (b, a) address the same entry.
    """

    def __init__(self) -> None:
        self._counts: dict[tuple[str, str], int] = {}

    @staticmethod
    def canonical(id_i: str, id_j: str) -> tuple[str, str]:
        if id_i == id_j:
            raise ValueError(f"self-pair {id_i!r}")
        return (id_i, id_j) if id_i < id_j else (id_j, id_i)

    def add(self, id_i: str, id_j: str, count: int = 1) -> None:
        if count < 1 or count != int(count):
            raise ValueError(f"count must be a positive integer, got {count}")
        pair = self.canonical(id_i, id_j)
        self._counts[pair] = self._counts.get(pair, 0) + int(count)

    def get(self, id_i: str, id_j: str) -> int:
        return self._counts.get(self.canonical(id_i, id_j), 0)

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._counts)

    def items(self) -> Iterator[tuple[tuple[str, str], int]]:
        for pair in sorted(self._counts):
            yield pair, self._counts[pair]

    def total(self) -> int:
        return sum(self._counts.values())

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return self.canonical(*pair) in self._counts

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlowTable):
            return NotImplemented
        return self._counts == other._counts


def filter_fakes(
    records: Sequence[CheckInRecord], threshold_km: float = DEFAULT_FAKE_THRESHOLD_KM
) -> list[CheckInRecord]:
    """Drop records whose reported position is more than ``threshold_km`` from the venue.

    Records without venue coordinates pass through. Order is preserved, so the
    filter is idempotent and commutes with trajectory building.
    """
    if not threshold_km > 0:
        raise ValueError(f"threshold_km must be positive, got {threshold_km}")
    kept = []
    for rec in records:
        if rec.has_venue:
            gap = great_circle_distance((rec.lat, rec.lon), (rec.venue_lat, rec.venue_lon))
            if gap > threshold_km:
                continue
        kept.append(rec)
    return kept


def build_trajectories(records: Sequence[CheckInRecord], known_cities: Iterable[str]) -> list[Trajectory]:
    """Group records per user and sort each group by timestamp.

    Ties in timestamp keep input order (stable sort). Every record must
    reference a city id in ``known_cities``. Trajectories are returned sorted
    by user id.
    """
    known = set(known_cities)
    per_user: dict[str, list[tuple[datetime, int, str]]] = {}
    for pos, rec in enumerate(records):
        if rec.city_id not in known:
            raise ValueError(f"record for user {rec.user_id!r} references unknown city {rec.city_id!r}")
        per_user.setdefault(rec.user_id, []).append((rec.timestamp, pos, rec.city_id))
    out = []
    for user_id in sorted(per_user):
        rows = sorted(per_user[user_id], key=lambda r: (r[0], r[1]))
        out.append(Trajectory(user_id=user_id, visits=tuple((city, ts) for ts, _, city in rows)))
    return out


def extract_trips(trajectory: Trajectory, max_gap=None) -> list[tuple[str, str]]:
    """Turn consecutive visits to different cities into directed trips.

    Consecutive visits to the same city produce nothing, so inserting repeat
    check-ins never changes the trip list. When ``max_gap`` (a timedelta) is
    given, a pair of visits further apart in time than the gap is not linked.
    """
    if max_gap is not None and max_gap.total_seconds() <= 0:
        raise ValueError("max_gap must be positive")
    trips = []
    visits = trajectory.visits
    for (city_a, t_a), (city_b, t_b) in zip(visits, visits[1:]):
        if city_a == city_b:
            continue
        if max_gap is not None and (t_b - t_a) > max_gap:
            continue
        trips.append((city_a, city_b))
    return trips


def aggregate_flows(trips: Iterable[tuple[str, str]]) -> FlowTable:
    """Count trips per unordered city pair. Total count equals the trip count."""
    table = FlowTable()
    for id_i, id_j in trips:
        table.add(id_i, id_j)
    return table


# checkins.csv: header below; timestamps RFC 3339, venue columns may be empty.
_CHECKIN_FIELDS = ["user_id", "timestamp", "city_id", "lat", "lon", "venue_lat", "venue_lon"]


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def read_checkins(path) -> list[CheckInRecord]:
    """Read a checkins.csv file. Raises ValueError on malformed rows."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _CHECKIN_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(_CHECKIN_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                vlat = row["venue_lat"].strip()
                vlon = row["venue_lon"].strip()
                records.append(
                    CheckInRecord(
                        user_id=row["user_id"].strip(),
                        timestamp=_parse_timestamp(row["timestamp"]),
                        city_id=row["city_id"].strip(),
                        lat=float(row["lat"]),
                        lon=float(row["lon"]),
                        venue_lat=float(vlat) if vlat else None,
                        venue_lon=float(vlon) if vlon else None,
                    )
                )
            except (TypeError, ValueError, AttributeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad check-in row: {exc}") from exc
    return records


def write_checkins(records: Iterable[CheckInRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CHECKIN_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.user_id,
                    rec.timestamp.isoformat(),
                    rec.city_id,
                    repr(rec.lat),
                    repr(rec.lon),
                    "" if rec.venue_lat is None else repr(rec.venue_lat),
                    "" if rec.venue_lon is None else repr(rec.venue_lon),
                ]
            )


# flows.csv: header city_i,city_j,weight with canonical pair order.
_FLOW_FIELDS = ["city_i", "city_j", "weight"]


def read_flows(path) -> FlowTable:
    table = FlowTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _FLOW_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(_FLOW_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                table.add(row["city_i"].strip(), row["city_j"].strip(), int(row["weight"]))
            except (TypeError, ValueError, AttributeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad flow row: {exc}") from exc
    return table


def write_flows(table: FlowTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_FLOW_FIELDS)
        for (id_i, id_j), count in table.items():
            writer.writerow([id_i, id_j, count])
