"""Command-line interface.

Subcommands cover the pipeline stages: ingest, net-stats, compare,
fit-gravity, synth, communities, spatialize, and pipeline (all stages on one
input). Options can come from a flat ``key=value`` config file via
``--config``; explicit flags win. Reports are JSON with sorted keys and no
timestamps, so reruns with identical inputs, config, and seed are
byte-identical. ``--threads`` caps worker threads where stages can run
concurrently and never affects results.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional

import numpy as np

from . import community as community_mod
from . import gravity as gravity_mod
from . import ingest as ingest_mod
from . import network as network_mod
from . import spatialize as spatialize_mod
from . import synth as synth_mod
from .geo import build_distance_matrix, read_cities


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 on usage errors instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_DEFAULTS = {
    "fake_threshold": 5.0,
    "max_gap_hours": None,
    "seed": 0,
    "runs": 20,
    "n_trips": 100000,
    "bin_width": 100.0,
    "d_min": 0.0,
    "top_k": 50,
    "threads": 1,
    "beta_min": 0.1,
    "beta_max": 2.0,
    "beta_step": 0.1,
    "swarm_size": 50,
    "iterations": 500,
    "bin_ratio": 2.0,
    "padding": 0.05,
}

_CONFIG_CASTS = {
    "fake_threshold": float,
    "max_gap_hours": float,
    "seed": int,
    "runs": int,
    "n_trips": int,
    "bin_width": float,
    "d_min": float,
    "top_k": int,
    "threads": int,
    "beta_min": float,
    "beta_max": float,
    "beta_step": float,
    "swarm_size": int,
    "iterations": int,
    "bin_ratio": float,
    "padding": float,
}


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                cfg[key] = _CONFIG_CASTS[key](value.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return cfg


def _opt(args, config: dict, key: str):
    """Effective option value: flag beats config beats default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return _DEFAULTS[key]


def _num(v: float):
    """NaN is not valid JSON; report it as null."""
    v = float(v)
    return None if math.isnan(v) else v


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_labels(labels: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["city_id", "community"])
        for cid in sorted(labels):
            writer.writerow([cid, labels[cid]])


def _read_labels(path) -> dict:
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["city_id", "community"]:
            raise ValueError(f"{path}: expected header city_id,community")
        for lineno, row in enumerate(reader, start=2):
            try:
                labels[row["city_id"].strip()] = int(row["community"])
            except (TypeError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad label row: {exc}") from exc
    if not labels:
        raise ValueError(f"{path}: no labels")
    return labels


def _write_splits(freq: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["city_i", "city_j", "split_frequency"])
        for (id_i, id_j) in sorted(freq):
            writer.writerow([id_i, id_j, repr(freq[(id_i, id_j)])])


def _read_splits(path) -> dict:
    freq = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "city_i",
            "city_j",
            "split_frequency",
        ]:
            raise ValueError(f"{path}: expected header city_i,city_j,split_frequency")
        for lineno, row in enumerate(reader, start=2):
            try:
                pair = (row["city_i"].strip(), row["city_j"].strip())
                freq[pair] = float(row["split_frequency"])
            except (TypeError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad split row: {exc}") from exc
    return freq


def _beta_grid(args, config) -> list[float]:
    lo = _opt(args, config, "beta_min")
    hi = _opt(args, config, "beta_max")
    step = _opt(args, config, "beta_step")
    if not step > 0:
        raise ValueError(f"beta_step must be positive, got {step}")
    if not 0 < lo <= hi:
        raise ValueError(f"bad beta range [{lo}, {hi}]")
    grid = [round(lo + k * step, 10) for k in range(int(round((hi - lo) / step)) + 1)]
    return [b for b in grid if b <= hi + 1e-12]


# ---------------------------------------------------------------- subcommands


def _cmd_ingest(args, config) -> int:
    cities = read_cities(args.cities)
    records = ingest_mod.read_checkins(args.checkins)
    threshold = _opt(args, config, "fake_threshold")
    kept = ingest_mod.filter_fakes(records, threshold_km=threshold)
    trajectories = ingest_mod.build_trajectories(kept, (c.id for c in cities))
    max_gap_hours = _opt(args, config, "max_gap_hours")
    from datetime import timedelta

    max_gap = timedelta(hours=max_gap_hours) if max_gap_hours is not None else None
    trips = []
    for traj in trajectories:
        trips.extend(ingest_mod.extract_trips(traj, max_gap=max_gap))
    flows = ingest_mod.aggregate_flows(trips)
    ingest_mod.write_flows(flows, args.out)
    if args.report:
        _write_json(
            {
                "fake_threshold_km": threshold,
                "max_gap_hours": max_gap_hours,
                "records_read": len(records),
                "records_kept": len(kept),
                "users": len(trajectories),
                "trips": len(trips),
                "pairs": len(flows),
                "total_flow": flows.total(),
            },
            args.report,
        )
    print(f"ingest: {len(records)} records -> {len(trips)} trips over {len(flows)} pairs")
    return 0


def _cmd_net_stats(args, config) -> int:
    cities = read_cities(args.cities)
    flows = ingest_mod.read_flows(args.flows)
    g = network_mod.build_network(flows, cities)
    stats = network_mod.compute_stats(g)
    report = {
        "n_nodes": stats.n_nodes,
        "n_edges": stats.n_edges,
        "density": stats.density,
        "avg_degree": stats.avg_degree,
        "diameter": stats.diameter,
        "avg_shortest_path": stats.avg_shortest_path,
        "avg_clustering": stats.avg_clustering,
        "connected": stats.connected,
        "component_nodes": stats.component_nodes,
    }
    if g.n_edges >= 10:
        dist = network_mod.weight_distribution(g, bin_ratio=_opt(args, config, "bin_ratio"))
        report["weight_distribution"] = {
            "bin_edges": [float(e) for e in dist.bin_edges],
            "counts": [int(c) for c in dist.counts],
            "slope": _num(dist.slope),
            "exponent": _num(dist.exponent),
            "fitted": dist.fitted,
        }
    else:
        report["weight_distribution"] = None
    _write_json(report, args.out)
    print(
        f"net-stats: {stats.n_nodes} nodes, {stats.n_edges} edges, "
        f"diameter={stats.diameter}, <l>={stats.avg_shortest_path:.3f}"
    )
    return 0


def _cmd_compare(args, config) -> int:
    flows_a = ingest_mod.read_flows(args.flows_a)
    flows_b = ingest_mod.read_flows(args.flows_b)
    cmp = network_mod.compare_flows(flows_a, flows_b, top_k=_opt(args, config, "top_k"))
    _write_json(
        {
            "n_common": cmp.n_common,
            "r_squared": cmp.r_squared,
            "top_ratios": [
                {"city_i": i, "city_j": j, "flow_a": a, "flow_b": b, "ratio": r}
                for i, j, a, b, r in cmp.top_ratios
            ],
        },
        args.out,
    )
    print(f"compare: {cmp.n_common} common pairs, r_squared={cmp.r_squared:.4f}")
    return 0


def _fit_to_json(fit: gravity_mod.GravityFit) -> dict:
    return {
        "beta": fit.model.beta,
        "k": fit.model.k,
        "gof": fit.gof,
        "sizes": {cid: s for cid, s in sorted(fit.model.sizes.items())},
        "beta_gof": {str(b): v for b, v in sorted(fit.beta_gof.items())},
        "seed": fit.seed,
        "n_pairs": fit.n_pairs,
    }


def _cmd_fit_gravity(args, config) -> int:
    cities = read_cities(args.cities)
    flows = ingest_mod.read_flows(args.flows)
    dm = build_distance_matrix(cities)
    cfg = gravity_mod.PsoConfig(
        swarm_size=_opt(args, config, "swarm_size"),
        iterations=_opt(args, config, "iterations"),
    )
    fit = gravity_mod.fit_pso(
        flows, dm, betas=_beta_grid(args, config), config=cfg, seed=_opt(args, config, "seed")
    )
    _write_json(_fit_to_json(fit), args.out)
    print(f"fit-gravity: beta={fit.model.beta} gof={fit.gof:.6f} pairs={fit.n_pairs}")
    return 0


def _load_fit(path) -> gravity_mod.GravityModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return gravity_mod.GravityModel(beta=obj["beta"], k=obj["k"], sizes=dict(obj["sizes"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: not a gravity fit report: {exc}") from exc


def _cmd_synth(args, config) -> int:
    cities = read_cities(args.cities)
    model = _load_fit(args.fit)
    by_id = {c.id: c for c in cities}
    missing = sorted(set(model.sizes) - set(by_id))
    if missing:
        raise ValueError(f"fitted cities missing from city list: {missing}")
    model_cities = [by_id[cid] for cid in sorted(model.sizes)]
    dm = build_distance_matrix(model_cities)

    seed = _opt(args, config, "seed")
    n_trips = _opt(args, config, "n_trips")
    bin_width = _opt(args, config, "bin_width")
    pmf = synth_mod.build_trip_pmf(model, dm)
    trips = synth_mod.sample_trips(pmf, n_trips, seed=seed)
    disp = synth_mod.trip_displacements(trips, dm)
    hist = synth_mod.displacement_distribution(disp, bin_width=bin_width)
    expo = synth_mod.fit_exponential(disp, d_min=_opt(args, config, "d_min"))

    report = {
        "n_trips": n_trips,
        "seed": seed,
        "bin_width": bin_width,
        "histogram": {
            "bin_edges": [float(e) for e in hist.bin_edges],
            "counts": [int(c) for c in hist.counts],
            "densities": [float(d) for d in hist.densities],
        },
        "exponential": {
            "alpha": expo.alpha,
            "log_likelihood": expo.log_likelihood,
            "n_samples": expo.n_samples,
            "d_min": expo.d_min,
        },
    }
    if args.flows:
        flows = ingest_mod.read_flows(args.flows)
        obs_pairs = flows.pairs()
        obs = np.repeat(
            np.array([dm.distance(i, j) for i, j in obs_pairs]),
            np.array([flows.get(i, j) for i, j in obs_pairs], dtype=int),
        )
        ks = synth_mod.compare_distributions(obs, disp)
        report["ks_vs_observed"] = {
            "statistic": ks.statistic,
            "p_value": ks.p_value,
            "n_observed": ks.n_a,
            "n_synthetic": ks.n_b,
        }
    else:
        report["ks_vs_observed"] = None
    _write_json(report, args.out)
    if args.out_trips:
        with open(args.out_trips, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["city_i", "city_j"])
            writer.writerows(trips)
    print(f"synth: {n_trips} trips, alpha={expo.alpha:.6g}")
    return 0


def _cmd_communities(args, config) -> int:
    cities = read_cities(args.cities)
    flows = ingest_mod.read_flows(args.flows)
    g = network_mod.build_network(flows, cities)
    diagram = spatialize_mod.voronoi(cities, padding=_opt(args, config, "padding"))
    pairs = diagram.neighbor_id_pairs()
    result = community_mod.consensus(
        g,
        runs=_opt(args, config, "runs"),
        seed=_opt(args, config, "seed"),
        pairs=pairs,
        threads=_opt(args, config, "threads"),
    )
    labels = {cid: int(lab) for cid, lab in zip(g.ids, result.reference.labels)}
    _write_labels(labels, args.out)
    if args.splits:
        _write_splits(result.pair_split_frequency, args.splits)
    if args.report:
        pieces = community_mod.spatial_connectivity(labels, pairs)
        _write_json(
            {
                "runs": len(result.partitions),
                "seed": _opt(args, config, "seed"),
                "n_communities": result.reference.n_communities,
                "reference_modularity": result.modularities[result.reference_index],
                "modularities": list(result.modularities),
                "spatial_pieces": {str(c): n for c, n in sorted(pieces.items())},
            },
            args.report,
        )
    print(
        f"communities: {result.reference.n_communities} communities, "
        f"Q={result.modularities[result.reference_index]:.4f} over {len(result.partitions)} runs"
    )
    return 0


def _cmd_spatialize(args, config) -> int:
    cities = read_cities(args.cities)
    labels = _read_labels(args.labels)
    splits = _read_splits(args.splits) if args.splits else {}
    diagram = spatialize_mod.voronoi(cities, padding=_opt(args, config, "padding"))
    region_map = spatialize_mod.merge_regions(diagram, labels, splits)
    spatialize_mod.write_geojson(region_map, args.out)
    print(f"spatialize: {len(region_map.regions)} regions, {len(region_map.borders)} border segments")
    return 0


def _cmd_pipeline(args, config) -> int:
    import os

    os.makedirs(args.out_dir, exist_ok=True)

    def path(name):
        return os.path.join(args.out_dir, name)

    cities = read_cities(args.cities)
    records = ingest_mod.read_checkins(args.checkins)
    kept = ingest_mod.filter_fakes(records, threshold_km=_opt(args, config, "fake_threshold"))
    trajectories = ingest_mod.build_trajectories(kept, (c.id for c in cities))
    max_gap_hours = _opt(args, config, "max_gap_hours")
    from datetime import timedelta

    max_gap = timedelta(hours=max_gap_hours) if max_gap_hours is not None else None
    trips = []
    for traj in trajectories:
        trips.extend(ingest_mod.extract_trips(traj, max_gap=max_gap))
    flows = ingest_mod.aggregate_flows(trips)
    ingest_mod.write_flows(flows, path("flows.csv"))

    g = network_mod.build_network(flows, cities)
    stats = network_mod.compute_stats(g)
    stats_report = {
        "n_nodes": stats.n_nodes,
        "n_edges": stats.n_edges,
        "density": stats.density,
        "avg_degree": stats.avg_degree,
        "diameter": stats.diameter,
        "avg_shortest_path": stats.avg_shortest_path,
        "avg_clustering": stats.avg_clustering,
        "connected": stats.connected,
        "component_nodes": stats.component_nodes,
    }
    if g.n_edges >= 10:
        dist = network_mod.weight_distribution(g, bin_ratio=_opt(args, config, "bin_ratio"))
        stats_report["weight_distribution"] = {
            "bin_edges": [float(e) for e in dist.bin_edges],
            "counts": [int(c) for c in dist.counts],
            "slope": _num(dist.slope),
            "exponent": _num(dist.exponent),
            "fitted": dist.fitted,
        }
    else:
        stats_report["weight_distribution"] = None
    _write_json(stats_report, path("netstats.json"))

    dm = build_distance_matrix(cities)
    seed = _opt(args, config, "seed")
    cfg = gravity_mod.PsoConfig(
        swarm_size=_opt(args, config, "swarm_size"),
        iterations=_opt(args, config, "iterations"),
    )
    fit = gravity_mod.fit_pso(flows, dm, betas=_beta_grid(args, config), config=cfg, seed=seed)
    _write_json(_fit_to_json(fit), path("fit.json"))

    n_trips = _opt(args, config, "n_trips")
    bin_width = _opt(args, config, "bin_width")
    model_cities = [c for c in cities if c.id in fit.model.sizes]
    dm_fit = build_distance_matrix(sorted(model_cities, key=lambda c: c.id))
    pmf = synth_mod.build_trip_pmf(fit.model, dm_fit)
    synth_trips = synth_mod.sample_trips(pmf, n_trips, seed=seed)
    disp = synth_mod.trip_displacements(synth_trips, dm_fit)
    hist = synth_mod.displacement_distribution(disp, bin_width=bin_width)
    expo = synth_mod.fit_exponential(disp, d_min=_opt(args, config, "d_min"))
    obs_pairs = flows.pairs()
    obs = np.repeat(
        np.array([dm.distance(i, j) for i, j in obs_pairs]),
        np.array([flows.get(i, j) for i, j in obs_pairs], dtype=int),
    )
    ks = synth_mod.compare_distributions(obs, disp)
    _write_json(
        {
            "n_trips": n_trips,
            "seed": seed,
            "bin_width": bin_width,
            "histogram": {
                "bin_edges": [float(e) for e in hist.bin_edges],
                "counts": [int(c) for c in hist.counts],
                "densities": [float(d) for d in hist.densities],
            },
            "exponential": {
                "alpha": expo.alpha,
                "log_likelihood": expo.log_likelihood,
                "n_samples": expo.n_samples,
                "d_min": expo.d_min,
            },
            "ks_vs_observed": {
                "statistic": ks.statistic,
                "p_value": ks.p_value,
                "n_observed": ks.n_a,
                "n_synthetic": ks.n_b,
            },
        },
        path("synth.json"),
    )

    diagram = spatialize_mod.voronoi(cities, padding=_opt(args, config, "padding"))
    pairs = diagram.neighbor_id_pairs()
    result = community_mod.consensus(
        g, runs=_opt(args, config, "runs"), seed=seed, pairs=pairs, threads=_opt(args, config, "threads")
    )
    labels = {cid: int(lab) for cid, lab in zip(g.ids, result.reference.labels)}
    _write_labels(labels, path("labels.csv"))
    _write_splits(result.pair_split_frequency, path("splits.csv"))
    pieces = community_mod.spatial_connectivity(labels, pairs)
    _write_json(
        {
            "runs": len(result.partitions),
            "seed": seed,
            "n_communities": result.reference.n_communities,
            "reference_modularity": result.modularities[result.reference_index],
            "modularities": list(result.modularities),
            "spatial_pieces": {str(c): n for c, n in sorted(pieces.items())},
        },
        path("communities.json"),
    )

    region_map = spatialize_mod.merge_regions(diagram, labels, result.pair_split_frequency)
    spatialize_mod.write_geojson(region_map, path("regions.geojson"))

    _write_json(
        {
            "artifacts": [
                "flows.csv",
                "netstats.json",
                "fit.json",
                "synth.json",
                "labels.csv",
                "splits.csv",
                "communities.json",
                "regions.geojson",
            ],
            "n_cities": len(cities),
            "n_pairs": len(flows),
            "total_flow": flows.total(),
            "beta": fit.model.beta,
            "gof": fit.gof,
            "alpha": expo.alpha,
            "n_communities": result.reference.n_communities,
        },
        path("pipeline.json"),
    )
    print(
        f"pipeline: beta={fit.model.beta} gof={fit.gof:.6f} "
        f"communities={result.reference.n_communities} -> {args.out_dir}"
    )
    return 0


# -------------------------------------------------------------------- parser


def _add_common(sp):
    sp.add_argument("--config", help="flat key=value config file; flags override it")
    sp.add_argument("--threads", type=int, help="cap worker threads (never changes results)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="geoflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="check-ins -> trip flows")
    p.add_argument("--cities", required=True)
    p.add_argument("--checkins", required=True)
    p.add_argument("--out", required=True, help="output flows.csv")
    p.add_argument("--report", help="optional JSON summary path")
    p.add_argument("--fake-threshold", dest="fake_threshold", type=float)
    p.add_argument("--max-gap-hours", dest="max_gap_hours", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("net-stats", help="interaction-network statistics")
    p.add_argument("--cities", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--out", required=True, help="output JSON report")
    p.add_argument("--bin-ratio", dest="bin_ratio", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_net_stats)

    p = sub.add_parser("compare", help="compare two flow tables on common pairs")
    p.add_argument("--flows-a", dest="flows_a", required=True)
    p.add_argument("--flows-b", dest="flows_b", required=True)
    p.add_argument("--out", required=True, help="output JSON report")
    p.add_argument("--top-k", dest="top_k", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("fit-gravity", help="fit the gravity model by swarm search")
    p.add_argument("--cities", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--out", required=True, help="output fit JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--beta-min", dest="beta_min", type=float)
    p.add_argument("--beta-max", dest="beta_max", type=float)
    p.add_argument("--beta-step", dest="beta_step", type=float)
    p.add_argument("--swarm-size", dest="swarm_size", type=int)
    p.add_argument("--iterations", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_fit_gravity)

    p = sub.add_parser("synth", help="sample synthetic trips from a fit")
    p.add_argument("--cities", required=True)
    p.add_argument("--fit", required=True, help="fit JSON from fit-gravity")
    p.add_argument("--out", required=True, help="output JSON report")
    p.add_argument("--flows", help="observed flows for a KS comparison")
    p.add_argument("--out-trips", dest="out_trips", help="optional CSV of sampled trips")
    p.add_argument("--n-trips", dest="n_trips", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--d-min", dest="d_min", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("communities", help="consensus community detection")
    p.add_argument("--cities", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--out", required=True, help="output labels.csv")
    p.add_argument("--splits", help="optional split-frequency CSV path")
    p.add_argument("--report", help="optional JSON summary path")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--padding", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_communities)

    p = sub.add_parser("spatialize", help="Voronoi regions and borders as GeoJSON")
    p.add_argument("--cities", required=True)
    p.add_argument("--labels", required=True, help="labels.csv from communities")
    p.add_argument("--splits", help="split-frequency CSV for border annotation")
    p.add_argument("--out", required=True, help="output GeoJSON path")
    p.add_argument("--padding", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_spatialize)

    p = sub.add_parser("pipeline", help="run every stage on one input")
    p.add_argument("--cities", required=True)
    p.add_argument("--checkins", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--fake-threshold", dest="fake_threshold", type=float)
    p.add_argument("--max-gap-hours", dest="max_gap_hours", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--n-trips", dest="n_trips", type=int)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--d-min", dest="d_min", type=float)
    p.add_argument("--beta-min", dest="beta_min", type=float)
    p.add_argument("--beta-max", dest="beta_max", type=float)
    p.add_argument("--beta-step", dest="beta_step", type=float)
    p.add_argument("--swarm-size", dest="swarm_size", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--bin-ratio", dest="bin_ratio", type=float)
    p.add_argument("--padding", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on usage errors and --help; keep main() returning
        return int(exc.code or 0)
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except (ValueError, KeyError) as exc:
        print(f"geoflow: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"geoflow: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"geoflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
