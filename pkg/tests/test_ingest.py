"""Check-in filtering, trajectory building, trip extraction, and flow tables."""

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow.geo import great_circle_distance
from geoflow.ingest import (
    CheckInRecord,
    FlowTable,
    Trajectory,
    aggregate_flows,
    build_trajectories,
    extract_trips,
    filter_fakes,
    read_checkins,
    read_flows,
    write_checkins,
    write_flows,
)

T0 = datetime(2012, 3, 1, tzinfo=timezone.utc)


def rec(user, minutes, city, lat=30.0, lon=100.0, venue=None):
    vlat, vlon = venue if venue is not None else (None, None)
    return CheckInRecord(
        user_id=user,
        timestamp=T0 + timedelta(minutes=minutes),
        city_id=city,
        lat=lat,
        lon=lon,
        venue_lat=vlat,
        venue_lon=vlon,
    )


class TestFilterFakes:
    def test_honest_record_kept(self):
        r = rec("u", 0, "a", 30.0, 100.0, venue=(30.0, 100.0))
        assert filter_fakes([r]) == [r]

    def test_far_record_dropped(self):
        # ~0.5 degrees of latitude is ~55 km, far above the 5 km default.
        r = rec("u", 0, "a", 30.5, 100.0, venue=(30.0, 100.0))
        assert filter_fakes([r]) == []

    def test_no_venue_passes_through(self):
        r = rec("u", 0, "a", 30.0, 100.0)
        assert filter_fakes([r]) == [r]

    def test_threshold_boundary(self):
        near = rec("u", 0, "a", 30.0, 100.0, venue=(30.01, 100.0))  # ~1.1 km
        gap = great_circle_distance((30.0, 100.0), (30.01, 100.0))
        assert filter_fakes([near], threshold_km=gap + 1e-9) == [near]
        assert filter_fakes([near], threshold_km=gap * 0.5) == []

    def test_against_independent_recheck(self):
        rng = np.random.default_rng(3)
        records = []
        for k in range(200):
            lat, lon = float(rng.uniform(20, 40)), float(rng.uniform(90, 120))
            off = float(rng.choice([0.0, 0.001, 0.2]))
            records.append(rec(f"u{k}", k, "a", lat + off, lon, venue=(lat, lon)))
        kept = filter_fakes(records, threshold_km=5.0)
        expect = [
            r
            for r in records
            if great_circle_distance((r.lat, r.lon), (r.venue_lat, r.venue_lon)) <= 5.0
        ]
        assert kept == expect

    def test_idempotent_and_order_preserving(self):
        rng = np.random.default_rng(4)
        records = [
            rec(f"u{k}", k, "a", 30.0 + float(rng.choice([0.0, 1.0])), 100.0, venue=(30.0, 100.0))
            for k in range(50)
        ]
        once = filter_fakes(records)
        assert filter_fakes(once) == once
        positions = [records.index(r) for r in once]
        assert positions == sorted(positions)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            filter_fakes([], threshold_km=0.0)
        with pytest.raises(ValueError):
            filter_fakes([], threshold_km=-1.0)

    def test_venue_must_be_paired(self):
        with pytest.raises(ValueError):
            CheckInRecord(
                user_id="u", timestamp=T0, city_id="a", lat=0.0, lon=0.0, venue_lat=1.0, venue_lon=None
            )


class TestTrajectories:
    def test_sorts_by_time(self):
        records = [rec("u", 30, "b"), rec("u", 10, "a"), rec("u", 20, "c")]
        trajs = build_trajectories(records, ["a", "b", "c"])
        assert len(trajs) == 1
        assert [c for c, _ in trajs[0].visits] == ["a", "c", "b"]

    def test_two_users_interleaved(self):
        records = [rec("u1", 0, "a"), rec("u2", 1, "b"), rec("u1", 2, "c"), rec("u2", 3, "a")]
        trajs = build_trajectories(records, ["a", "b", "c"])
        assert [t.user_id for t in trajs] == ["u1", "u2"]
        assert [c for c, _ in trajs[0].visits] == ["a", "c"]
        assert [c for c, _ in trajs[1].visits] == ["b", "a"]

    def test_ties_keep_input_order(self):
        records = [rec("u", 5, "a"), rec("u", 5, "b"), rec("u", 5, "c")]
        trajs = build_trajectories(records, ["a", "b", "c"])
        assert [c for c, _ in trajs[0].visits] == ["a", "b", "c"]

    def test_unknown_city_rejected(self):
        with pytest.raises(ValueError):
            build_trajectories([rec("u", 0, "zz")], ["a", "b"])

    def test_bulk_shuffled_against_ground_truth(self):
        rng = np.random.default_rng(9)
        truth = {}
        records = []
        for u in range(60):
            seq = [(f"c{int(rng.integers(0, 8))}", int(t)) for t in sorted(rng.choice(10000, size=40, replace=False))]
            truth[f"u{u:03d}"] = [c for c, _ in seq]
            for c, t in seq:
                records.append(rec(f"u{u:03d}", t, c))
        order = rng.permutation(len(records))
        shuffled = [records[int(k)] for k in order]
        trajs = build_trajectories(shuffled, [f"c{k}" for k in range(8)])
        assert len(trajs) == 60
        for t in trajs:
            assert [c for c, _ in t.visits] == truth[t.user_id]


class TestExtractTrips:
    def test_basic(self):
        t = Trajectory("u", tuple((c, T0 + timedelta(hours=k)) for k, c in enumerate("abca")))
        assert extract_trips(t) == [("a", "b"), ("b", "c"), ("c", "a")]

    def test_repeats_collapse(self):
        t = Trajectory("u", tuple((c, T0 + timedelta(hours=k)) for k, c in enumerate("aabbbca")))
        assert extract_trips(t) == [("a", "b"), ("b", "c"), ("c", "a")]

    def test_single_visit_no_trips(self):
        t = Trajectory("u", (("a", T0),))
        assert extract_trips(t) == []

    def test_max_gap_breaks_link(self):
        t = Trajectory("u", (("a", T0), ("b", T0 + timedelta(hours=30)), ("c", T0 + timedelta(hours=31))))
        assert extract_trips(t, max_gap=timedelta(hours=24)) == [("b", "c")]
        assert extract_trips(t) == [("a", "b"), ("b", "c")]

    def test_max_gap_positive(self):
        t = Trajectory("u", (("a", T0),))
        with pytest.raises(ValueError):
            extract_trips(t, max_gap=timedelta(0))

    @settings(max_examples=100, deadline=None)
    @given(seq=st.lists(st.sampled_from("abcd"), min_size=0, max_size=30))
    def test_matches_adjacent_scan(self, seq):
        t = Trajectory("u", tuple((c, T0 + timedelta(minutes=k)) for k, c in enumerate(seq)))
        expect = [(seq[k], seq[k + 1]) for k in range(len(seq) - 1) if seq[k] != seq[k + 1]]
        assert extract_trips(t) == expect

    @settings(max_examples=60, deadline=None)
    @given(
        seq=st.lists(st.sampled_from("abc"), min_size=2, max_size=12),
        pos=st.integers(min_value=0, max_value=11),
    )
    def test_inserting_repeat_is_noop(self, seq, pos):
        pos = min(pos, len(seq) - 1)
        dup = seq[: pos + 1] + [seq[pos]] + seq[pos + 1 :]
        t1 = Trajectory("u", tuple((c, T0 + timedelta(minutes=k)) for k, c in enumerate(seq)))
        t2 = Trajectory("u", tuple((c, T0 + timedelta(minutes=k)) for k, c in enumerate(dup)))
        assert extract_trips(t1) == extract_trips(t2)


class TestFlows:
    def test_directions_merge(self):
        flows = aggregate_flows([("a", "b"), ("b", "a"), ("a", "b")])
        assert flows.get("a", "b") == 3
        assert flows.get("b", "a") == 3
        assert len(flows) == 1

    def test_empty(self):
        flows = aggregate_flows([])
        assert len(flows) == 0
        assert flows.total() == 0

    def test_self_trip_rejected(self):
        with pytest.raises(ValueError):
            aggregate_flows([("a", "a")])

    def test_conservation_and_counts_random(self):
        rng = np.random.default_rng(12)
        ids = [f"c{k}" for k in range(15)]
        trips = []
        for _ in range(5000):
            i, j = rng.choice(15, size=2, replace=False)
            trips.append((ids[int(i)], ids[int(j)]))
        flows = aggregate_flows(trips)
        assert flows.total() == len(trips)
        # independent hash-count over canonical pairs
        expect = {}
        for i, j in trips:
            key = (i, j) if i < j else (j, i)
            expect[key] = expect.get(key, 0) + 1
        assert dict(flows.items()) == expect

    def test_add_validation(self):
        flows = FlowTable()
        with pytest.raises(ValueError):
            flows.add("a", "b", 0)
        with pytest.raises(ValueError):
            flows.add("a", "a", 1)

    def test_contains_and_pairs_sorted(self):
        flows = FlowTable()
        flows.add("b", "a", 2)
        flows.add("c", "a", 1)
        assert ("a", "b") in flows
        assert ("b", "a") in flows
        assert flows.pairs() == [("a", "b"), ("a", "c")]


class TestCsv:
    def test_checkins_roundtrip(self, tmp_path):
        records = [
            rec("u1", 0, "a", 30.125, 100.5, venue=(30.125, 100.5)),
            rec("u2", 5, "b", 31.0, 101.0),
        ]
        path = tmp_path / "checkins.csv"
        write_checkins(records, path)
        assert read_checkins(path) == records

    def test_checkins_z_suffix_and_naive(self, tmp_path):
        path = tmp_path / "checkins.csv"
        path.write_text(
            "user_id,timestamp,city_id,lat,lon,venue_lat,venue_lon\n"
            "u,2012-03-01T10:00:00Z,a,30.0,100.0,,\n"
            "v,2012-03-01T10:00:00,a,30.0,100.0,,\n"
        )
        records = read_checkins(path)
        assert records[0].timestamp == datetime(2012, 3, 1, 10, tzinfo=timezone.utc)
        assert records[1].timestamp == records[0].timestamp

    def test_checkins_bad_rows(self, tmp_path):
        path = tmp_path / "checkins.csv"
        path.write_text(
            "user_id,timestamp,city_id,lat,lon,venue_lat,venue_lon\nu,not-a-time,a,30.0,100.0,,\n"
        )
        with pytest.raises(ValueError):
            read_checkins(path)
        path.write_text("user,when\nu,2012-03-01T10:00:00Z\n")
        with pytest.raises(ValueError):
            read_checkins(path)

    def test_flows_roundtrip(self, tmp_path):
        flows = FlowTable()
        flows.add("a", "b", 5)
        flows.add("c", "a", 2)
        path = tmp_path / "flows.csv"
        write_flows(flows, path)
        assert read_flows(path) == flows

    def test_flows_bad_weight(self, tmp_path):
        path = tmp_path / "flows.csv"
        path.write_text("city_i,city_j,weight\na,b,0\n")
        with pytest.raises(ValueError):
            read_flows(path)
