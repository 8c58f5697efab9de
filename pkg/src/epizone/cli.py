"""Command-line pipeline: ingest -> R(t) -> DTW -> graph -> zoning.

Subcommands run the whole chain (`pipeline`) or a single stage on
prior-stage files (`rt`, `distances`, `graph`, `cluster`), plus `excess`
for the mortality differential and `synth` for ground-truth scenarios.
Configuration comes from an optional JSON file; command-line flags win
over file values, file values win over defaults. `EPIZONE_THREADS` caps
DTW parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__, report
from .core import Calendar, IncidenceSeries, validate_dataset
from .dtwdist import DtwConfig, distance_matrix
from .errors import ConfigError, EpizoneError
from .geograph import (
    build_contiguity,
    build_gabriel,
    build_knn,
    ensure_connected,
    minimum_spanning_tree,
)
from .ingest import (
    aggregate_mortality,
    compute_excess,
    parse_aggregation_csv,
    parse_geometry,
    parse_incidence_csv,
    parse_mortality_csv,
)
from .repro import discretize_gamma_si, estimate_rt, smooth_rt
from .synth import adjusted_rand_index, make_scenario, scenario_from_json
from .zoner import skater_partition


@dataclass
class PipelineConfig:
    mode: str = "cases"  # cases | excess_mortality
    incidence: Optional[str] = None
    geometry: Optional[str] = None
    mortality: Optional[str] = None
    aggregation: Optional[str] = None
    target_year: Optional[int] = None
    end_date: Optional[str] = None  # truncate the calendar here (ISO date)
    si_mean: float = 6.5
    si_sd: float = 4.0
    si_max_lag: int = 30
    smooth_window: int = 7
    dtw_step: str = "symmetric2"
    dtw_window: Optional[int] = None
    dtw_normalize: bool = True
    graph: str = "auto"  # auto | contiguity | gabriel | knn:K
    k: int = 4
    min_size: int = 2
    objective: str = "ssd_analogue"
    seed: int = 0
    out: str = "out"

    @classmethod
    def load(cls, config_path: Optional[str], overrides: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        values: dict = {}
        if config_path:
            if not os.path.exists(config_path):
                raise ConfigError(f"input not found: {config_path}")
            with open(config_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            unknown = set(doc) - known
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            values.update(doc)
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**values)
        if cfg.mode not in ("cases", "excess_mortality"):
            raise ConfigError(f"unknown mode {cfg.mode!r}")
        return cfg

    def echo(self) -> dict:
        return dataclasses.asdict(self)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EPIZONE_THREADS", "1")))
    except ValueError:
        return 1


def _require_file(path: Optional[str], what: str) -> str:
    if not path:
        raise ConfigError(f"missing required input: {what}")
    if not os.path.exists(path):
        raise ConfigError(f"input not found: {path}")
    return path


def _truncate(series: list[IncidenceSeries], end_date: Optional[str]) -> list[IncidenceSeries]:
    if end_date is None:
        return series
    end = dt.date.fromisoformat(end_date)
    out = []
    for s in series:
        n_days = (end - s.calendar.start_date).days + 1
        if n_days < 1:
            raise ConfigError(f"end date {end} precedes the calendar start")
        n_days = min(n_days, s.calendar.length)
        cal = Calendar(s.calendar.start_date, n_days)
        out.append(
            IncidenceSeries(
                s.unit,
                cal,
                s.counts[:n_days],
                s.imputed[:n_days] if s.imputed is not None else None,
            )
        )
    return out


def _load_series(cfg: PipelineConfig) -> list[IncidenceSeries]:
    if cfg.mode == "cases":
        series = parse_incidence_csv(_require_file(cfg.incidence, "incidence"))
    else:
        panels = parse_mortality_csv(_require_file(cfg.mortality, "mortality"))
        if cfg.aggregation:
            mapping = parse_aggregation_csv(_require_file(cfg.aggregation, "aggregation"))
            panels = aggregate_mortality(panels, mapping)
        if cfg.target_year is None:
            raise ConfigError("excess_mortality mode needs target_year")
        series = [compute_excess(p, cfg.target_year)[1] for p in panels]
    return _truncate(series, cfg.end_date)


def _build_graph(cfg: PipelineConfig, geoms):
    mode = cfg.graph
    if mode == "auto":
        mode = "contiguity" if all(g.polygon is not None for g in geoms) else "gabriel"
    if mode == "contiguity":
        g = build_contiguity(geoms)
    elif mode == "gabriel":
        g = build_gabriel(geoms)
    elif mode.startswith("knn:"):
        g = build_knn(geoms, int(mode.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown graph mode {cfg.graph!r}")
    return ensure_connected(g, geoms)


class _ArtifactTracker:
    """Collects paths written during a run so failures leave nothing behind."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute the full chain and write all artifacts; returns the report."""
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tracker = _ArtifactTracker(out_dir)
    try:
        series = _load_series(cfg)
        geoms = parse_geometry(_require_file(cfg.geometry, "geometry"))
        dataset = validate_dataset(series, geoms)

        si = discretize_gamma_si(cfg.si_mean, cfg.si_sd, cfg.si_max_lag)
        rts = [smooth_rt(estimate_rt(s, si), cfg.smooth_window) for s in dataset.series]
        report.write_rt_csv(tracker.path("rt.csv"), rts)

        dtw_cfg = DtwConfig(cfg.dtw_step, cfg.dtw_window, cfg.dtw_normalize)
        dmat = distance_matrix(rts, dtw_cfg, threads=_threads())
        report.write_distance_csv(tracker.path("distances.csv"), dmat)

        graph = _build_graph(cfg, dataset.geometries)
        report.write_graph_csv(tracker.path("graph.csv"), graph, dmat)
        tree = minimum_spanning_tree(graph, dmat)
        report.write_tree_csv(tracker.path("mst.csv"), tree)

        part = skater_partition(tree, dmat, cfg.k, cfg.min_size, cfg.objective)
        report.write_clusters_csv(tracker.path("clusters.csv"), part)

        payload = {
            "config": cfg.echo(),
            "versions": _versions(),
            "k": part.k,
            "n_units": len(part.units),
            "objective": part.objective,
            "cluster_costs": list(part.cluster_costs),
            "removed_edges": [
                [part.units[i].id, part.units[j].id] for i, j in part.removed_edges
            ],
        }
        report.write_report_json(tracker.path("report.json"), payload)

        report.render_map(tracker.path("map.svg"), dataset.geometries, part)
        report.render_trends(tracker.path("trends.svg"), rts, part)
        return payload
    except Exception:
        tracker.cleanup()
        raise


def _versions() -> dict:
    import matplotlib
    import numpy
    import scipy

    return {
        "epizone": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    run_pipeline(cfg)
    return 0


def cmd_excess(args) -> int:
    panels = parse_mortality_csv(_require_file(args.mortality, "mortality"))
    if args.aggregation:
        mapping = parse_aggregation_csv(_require_file(args.aggregation, "aggregation"))
        panels = aggregate_mortality(panels, mapping)
    rows = []
    for p in panels:
        raw, floored = compute_excess(p, args.target_year)
        for d, r, f in zip(floored.calendar.dates(), raw, floored.counts):
            rows.append((p.unit.id, d, r, f))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_excess_csv(out / "excess.csv", rows)
    return 0


def cmd_synth(args) -> int:
    sc = scenario_from_json(_require_file(args.scenario, "scenario"))
    si = discretize_gamma_si(args.si_mean, args.si_sd, args.si_max_lag)
    series, geoms, truth = make_scenario(sc, si)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_incidence_csv(out / "incidence.csv", series)
    report.write_geojson(out / "geometry.geojson", geoms)
    report.write_clusters_csv(out / "truth.csv", truth)
    return 0


def cmd_rt(args) -> int:
    series = parse_incidence_csv(_require_file(args.incidence, "incidence"))
    si = discretize_gamma_si(args.si_mean, args.si_sd, args.si_max_lag)
    rts = [smooth_rt(estimate_rt(s, si), args.smooth_window) for s in series]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_rt_csv(out / "rt.csv", rts)
    return 0


def cmd_distances(args) -> int:
    rts = report.read_rt_csv(_require_file(args.rt, "rt"))
    dtw_cfg = DtwConfig(args.dtw_step, args.dtw_window, args.dtw_normalize)
    dmat = distance_matrix(rts, dtw_cfg, threads=_threads())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_distance_csv(out / "distances.csv", dmat)
    return 0


def cmd_graph(args) -> int:
    geoms = parse_geometry(_require_file(args.geometry, "geometry"))
    dmat = report.read_distance_csv(_require_file(args.distances, "distances"))
    cfg = PipelineConfig(graph=args.graph)
    graph = _build_graph(cfg, geoms)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_graph_csv(out / "graph.csv", graph, dmat)
    tree = minimum_spanning_tree(graph, dmat)
    report.write_tree_csv(out / "mst.csv", tree)
    return 0


def cmd_cluster(args) -> int:
    dmat = report.read_distance_csv(_require_file(args.distances, "distances"))
    graph = report.read_graph_csv(_require_file(args.graph_csv, "graph"), dmat.units)
    tree = minimum_spanning_tree(graph, dmat)
    part = skater_partition(tree, dmat, args.k, args.min_size, args.objective)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_clusters_csv(out / "clusters.csv", part)
    payload = {
        "versions": _versions(),
        "k": part.k,
        "n_units": len(part.units),
        "objective": part.objective,
        "cluster_costs": list(part.cluster_costs),
        "removed_edges": [
            [part.units[i].id, part.units[j].id] for i, j in part.removed_edges
        ],
    }
    report.write_report_json(out / "report.json", payload)
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _config_from_args(args) -> PipelineConfig:
    overrides = {
        "mode": args.mode,
        "incidence": args.incidence,
        "geometry": args.geometry,
        "mortality": args.mortality,
        "aggregation": args.aggregation,
        "target_year": args.target_year,
        "end_date": args.end_date,
        "si_mean": args.si_mean,
        "si_sd": args.si_sd,
        "si_max_lag": args.si_max_lag,
        "smooth_window": args.smooth_window,
        "dtw_step": args.dtw_step,
        "dtw_window": args.dtw_window,
        "dtw_normalize": args.dtw_normalize,
        "graph": args.graph,
        "k": args.k,
        "min_size": args.min_size,
        "objective": args.objective,
        "seed": args.seed,
        "out": args.out,
    }
    return PipelineConfig.load(args.config, overrides)


def _add_si_flags(p):
    p.add_argument("--si-mean", type=float, default=None, dest="si_mean")
    p.add_argument("--si-sd", type=float, default=None, dest="si_sd")
    p.add_argument("--si-max-lag", type=int, default=None, dest="si_max_lag")


def _add_dtw_flags(p):
    p.add_argument("--dtw-step", choices=["symmetric1", "symmetric2"], default=None)
    p.add_argument("--dtw-window", type=int, default=None)
    p.add_argument(
        "--dtw-normalize",
        type=lambda s: s.lower() in ("1", "true", "yes"),
        default=None,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epizone", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full zoning pipeline")
    p.add_argument("--config", default=None)
    p.add_argument("--mode", choices=["cases", "excess_mortality"], default=None)
    p.add_argument("--incidence", default=None)
    p.add_argument("--geometry", default=None)
    p.add_argument("--mortality", default=None)
    p.add_argument("--aggregation", default=None)
    p.add_argument("--target-year", type=int, default=None, dest="target_year")
    p.add_argument("--end-date", default=None, dest="end_date")
    _add_si_flags(p)
    p.add_argument("--smooth-window", type=int, default=None, dest="smooth_window")
    _add_dtw_flags(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--min-size", type=int, default=None, dest="min_size")
    p.add_argument("--objective", choices=["ssd_analogue", "mean_pairwise"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("excess", help="compute the mortality differential")
    p.add_argument("--mortality", required=True)
    p.add_argument("--aggregation", default=None)
    p.add_argument("--target-year", type=int, required=True, dest="target_year")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_excess)

    p = sub.add_parser("synth", help="generate a synthetic scenario dataset")
    p.add_argument("--scenario", required=True)
    p.add_argument("--si-mean", type=float, default=6.5, dest="si_mean")
    p.add_argument("--si-sd", type=float, default=4.0, dest="si_sd")
    p.add_argument("--si-max-lag", type=int, default=30, dest="si_max_lag")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rt", help="estimate R(t) from an incidence CSV")
    p.add_argument("--incidence", required=True)
    p.add_argument("--si-mean", type=float, default=6.5, dest="si_mean")
    p.add_argument("--si-sd", type=float, default=4.0, dest="si_sd")
    p.add_argument("--si-max-lag", type=int, default=30, dest="si_max_lag")
    p.add_argument("--smooth-window", type=int, default=7, dest="smooth_window")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_rt)

    p = sub.add_parser("distances", help="DTW distance matrix from rt.csv")
    p.add_argument("--rt", required=True)
    p.add_argument("--dtw-step", choices=["symmetric1", "symmetric2"], default="symmetric2")
    p.add_argument("--dtw-window", type=int, default=None)
    p.add_argument(
        "--dtw-normalize",
        type=lambda s: s.lower() in ("1", "true", "yes"),
        default=True,
    )
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("graph", help="spatial graph + MST from geometry and distances")
    p.add_argument("--geometry", required=True)
    p.add_argument("--distances", required=True)
    p.add_argument("--graph", default="auto", dest="graph")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("cluster", help="partition the MST into k zones")
    p.add_argument("--distances", required=True)
    p.add_argument("--graph-csv", required=True, dest="graph_csv")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--min-size", type=int, default=2, dest="min_size")
    p.add_argument("--objective", choices=["ssd_analogue", "mean_pairwise"], default="ssd_analogue")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_cluster)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EpizoneError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except FileNotFoundError as exc:
        print(
            json.dumps({"error": "ConfigError", "message": f"input not found: {exc.filename}"}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
