"""Command-line entry point: a thin client over the package modules.

Every subcommand writes machine-readable outputs to explicit ``--out`` paths
and is replay-deterministic given identical inputs and seed. Exit codes:
0 success, 2 usage error, 65 validation failure, 66 missing input file.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import benchmark, evaluation, exchange, pipeline, scoring, synthworld
from .geo import BoundingRegion, enumerate_tiles

EX_DATAERR = 65
EX_NOINPUT = 66

DEFAULT_REGION = "37.0,-96.0,37.27,-95.66"


def _parse_region(text: str) -> BoundingRegion:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("region must be min_lat,min_lon,max_lat,max_lon")
    min_lat, min_lon, max_lat, max_lon = (float(p) for p in parts)
    return BoundingRegion(min_lat=min_lat, min_lon=min_lon, max_lat=max_lat, max_lon=max_lon)


class ErrorMappingGroup(click.Group):
    """Translate domain errors into sysexits-style codes with a one-line message."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (FileNotFoundError, pipeline.MissingTilesError) as exc:
            click.echo(f"ogdetect: {exc}", err=True)
            raise SystemExit(EX_NOINPUT)
        except (
            ValueError,
            KeyError,
            scoring.ScoringError,
            exchange.ExchangeFormatError,
        ) as exc:
            click.echo(f"ogdetect: {exc}", err=True)
            raise SystemExit(EX_DATAERR)


def _command(name: str):
    return cli.command(name)


@click.group(cls=ErrorMappingGroup)
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    default=None,
    help="JSON config file keyed by subcommand; explicit flags win.",
)
@click.pass_context
def cli(ctx: click.Context, config: str | None) -> None:
    """Facility-detection pipeline: synthetic worlds, tile scoring, detection,
    evaluation, benchmark comparison, and the review service."""
    if config is not None:
        ctx.default_map = json.loads(Path(config).read_text())


# ---------------------------------------------------------------------------


@_command("synth")
@click.option("--seed", type=int, default=0, show_default=True, help="World seed.")
@click.option("--facilities", type=int, default=5, show_default=True, help="Facility count.")
@click.option("--region", default=DEFAULT_REGION, show_default=True,
              help="min_lat,min_lon,max_lat,max_lon")
@click.option("--noise", type=float, default=0.5, show_default=True, help="Terrain noise in [0,1].")
@click.option("--render/--no-render", default=True, show_default=True,
              help="Materialize tile PNGs (detect can also render on demand).")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="World directory.")
def synth_cmd(seed, facilities, region, noise, render, out) -> None:
    """Generate a deterministic synthetic world with planted facilities."""
    spec = synthworld.random_world(_parse_region(region), seed, facilities, terrain_noise=noise)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    synthworld.save_world_spec(spec, out_dir / "world.json")
    rendered = synthworld.render_world(spec, out_dir) if render else 0
    truth = synthworld.ground_truth(spec)
    click.echo(
        f"world written to {out_dir} (facilities={len(truth)}, rendered_tiles={rendered})"
    )


@_command("grid")
@click.option("--region", required=True, help="min_lat,min_lon,max_lat,max_lon")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Manifest CSV path.")
def grid_cmd(region, out) -> None:
    """Enumerate the tile grid covering a region into a tiles.csv manifest."""
    tiles = enumerate_tiles(_parse_region(region))
    lines = ["col,row,filename"]
    lines += [f"{t.col},{t.row},{exchange.tile_filename(t)}" for t in tiles]
    Path(out).write_text("\n".join(lines) + "\n")
    click.echo(f"{len(tiles)} tiles -> {out}")


@_command("score")
@click.option("--tiles", "tiles_dir", required=True, type=click.Path(file_okay=False),
              help="Directory of {col}_{row}.png tiles (tiles.csv manifest optional).")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="scores.csv path.")
@click.option("--workers", type=int, default=None, help="Parallel scoring processes.")
def score_cmd(tiles_dir, out, workers) -> None:
    """Score a tile directory with the built-in heuristic scorer."""
    directory = Path(tiles_dir)
    if not directory.is_dir():
        raise FileNotFoundError(f"tile directory not found: {directory}")
    if (directory / exchange.TILES_MANIFEST).exists():
        tiles = [t for t, _ in exchange.read_tile_manifest(directory)]
    else:
        tiles = sorted(
            (exchange.parse_tile_filename(p.name) for p in directory.glob("*.png")),
            key=lambda t: (t.row, t.col),
        )
    if not tiles:
        raise ValueError(f"no tiles found in {directory}")
    source = pipeline.DirectoryImageSource(directory)
    results = pipeline.score_tiles(source, tiles, scoring.heuristic_score, workers=workers)
    exchange.write_scores_csv(Path(out), results)
    click.echo(f"{len(results)} tiles scored -> {out}")


def _load_exclusions(path: str | None) -> list[pipeline.ExclusionZone]:
    if path is None:
        return []
    doc = json.loads(Path(path).read_text())
    zones = []
    for z in doc:
        zones.append(
            pipeline.ExclusionZone(
                region=BoundingRegion(
                    min_lat=z["min_lat"], min_lon=z["min_lon"],
                    max_lat=z["max_lat"], max_lon=z["max_lon"],
                ),
                reason=z.get("reason", ""),
            )
        )
    return zones


@_command("detect")
@click.option("--world", "world_dir", type=click.Path(file_okay=False), default=None,
              help="World directory from synth (world.json; PNGs optional).")
@click.option("--tiles", "tiles_dir", type=click.Path(file_okay=False), default=None,
              help="Tile PNG directory (requires --region).")
@click.option("--region", default=None, help="min_lat,min_lon,max_lat,max_lon (with --tiles).")
@click.option("--scores", "scores_path", type=click.Path(dir_okay=False), default=None,
              help="Precomputed scores.csv (e.g. from an external scorer).")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--adjacency", type=click.Choice(["4", "8"]), default="4", show_default=True)
@click.option("--exclusions", type=click.Path(dir_okay=False), default=None,
              help="JSON list of exclusion zones.")
@click.option("--workers", type=int, default=None, help="Parallel scoring processes.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
def detect_cmd(world_dir, tiles_dir, region, scores_path, threshold, adjacency,
               exclusions, workers, out) -> None:
    """Run the deployment pipeline and export detections."""
    if (world_dir is None) == (tiles_dir is None):
        raise ValueError("provide exactly one of --world or --tiles")
    if world_dir is not None:
        spec = synthworld.load_world_spec(Path(world_dir) / "world.json")
        bounds = spec.region
        if (Path(world_dir) / exchange.TILES_MANIFEST).exists():
            source = pipeline.DirectoryImageSource(Path(world_dir))
        else:
            source = synthworld.SyntheticImageSource(spec)
    else:
        if region is None:
            raise ValueError("--tiles requires --region")
        bounds = _parse_region(region)
        source = pipeline.DirectoryImageSource(Path(tiles_dir))
    precomputed = exchange.read_scores_csv(Path(scores_path)) if scores_path else None
    result = pipeline.run_deployment(
        bounds,
        source,
        scoring.heuristic_score,
        pipeline.OperatingPoint(threshold),
        zones=_load_exclusions(exclusions),
        adjacency=int(adjacency),
        workers=workers,
        precomputed=precomputed,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline.write_detections_geojson(out_dir / "detections.geojson", result.detections)
    pipeline.write_detections_csv(out_dir / "detections.csv", result.detections)
    pipeline.write_manifest(out_dir / "manifest.json", result.manifest)
    m = result.manifest
    click.echo(
        f"tiles={m['tile_count']} positive={m['positive_count']} "
        f"detections={m['detection_count']} -> {out_dir}"
    )


@_command("metrics")
@click.option("--scores", "scores_path", required=True, type=click.Path(dir_okay=False),
              help="Labeled scores CSV (id,split,label,probability,negative_category).")
@click.option("--threshold", type=float, required=True)
@click.option("--split", type=click.Choice(["train", "validation", "test", "all"]),
              default="all", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report JSON path.")
def metrics_cmd(scores_path, threshold, split, out) -> None:
    """Confusion counts and metrics at a threshold."""
    scores = evaluation.read_labeled_scores_csv(Path(scores_path))
    if split != "all":
        scores = [s for s in scores if s.split == split]
    if not scores:
        raise ValueError(f"no examples in split {split!r}")
    counts = evaluation.confusion(scores, threshold)
    report = evaluation.compute_metrics(counts)
    if out:
        evaluation.write_metrics_report(Path(out), counts, report, threshold)
    click.echo(
        f"accuracy={report.accuracy:.4f} precision={report.precision:.3f} "
        f"recall={report.recall:.3f} f1={report.f1:.3f} "
        f"(tp={counts.tp} fp={counts.fp} fn={counts.fn} tn={counts.tn})"
    )


@_command("select-threshold")
@click.option("--scores", "scores_path", required=True, type=click.Path(dir_okay=False))
@click.option("--split", type=click.Choice(["train", "validation", "test", "all"]),
              default="validation", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Selection JSON path.")
def select_threshold_cmd(scores_path, split, out) -> None:
    """Pick the threshold with highest precision subject to recall 1.0."""
    scores = evaluation.read_labeled_scores_csv(Path(scores_path))
    if split != "all":
        scores = [s for s in scores if s.split == split]
    op = evaluation.select_operating_point(scores)
    counts = evaluation.confusion(scores, op.threshold)
    precision = evaluation.compute_metrics(counts).precision
    if out:
        Path(out).write_text(
            json.dumps({"threshold": op.threshold, "precision": precision}, sort_keys=True) + "\n"
        )
    click.echo(f"threshold={op.threshold!r} precision={precision:.4f} recall=1.0")


def _matching_inputs(detections_path, datasets_path, training_path):
    detections = benchmark.read_detected_facilities_geojson(Path(detections_path))
    records = benchmark.read_facility_records_csv(Path(datasets_path))
    training = (
        benchmark.read_training_locations_csv(Path(training_path)) if training_path else []
    )
    return detections, records, training


@_command("match")
@click.option("--detections", "detections_path", required=True, type=click.Path(dir_okay=False),
              help="Verified detections GeoJSON (confirmed-facility export).")
@click.option("--datasets", "datasets_path", required=True, type=click.Path(dir_okay=False),
              help="Benchmark records CSV (source,facility_type,lat,lon,raw_id).")
@click.option("--training", "training_path", type=click.Path(dir_okay=False), default=None,
              help="Training locations CSV (lat,lon).")
@click.option("--dedup-km", type=float, default=benchmark.DEDUP_RADIUS_KM, show_default=True)
@click.option("--coverage-km", type=float, default=benchmark.COVERAGE_RADIUS_KM, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
def match_cmd(detections_path, datasets_path, training_path, dedup_km, coverage_km, out) -> None:
    """Dedup benchmark records and match detections against them."""
    detections, records, training = _matching_inputs(detections_path, datasets_path, training_path)
    combined = benchmark.dedup(records, radius_km=dedup_km)
    cov = benchmark.coverage(combined, detections, radius_km=coverage_km)
    new = benchmark.new_detections(combined, detections, training, radius_km=coverage_km)
    doc = {
        ftype: {
            "cluster_total": cov.per_type[ftype].total,
            "covered": cov.per_type[ftype].covered,
            "coverage_fraction": cov.per_type[ftype].fraction,
            "new_detection_ids": new[ftype],
        }
        for ftype in benchmark.FACILITY_TYPES
    }
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "match.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    click.echo(f"match report -> {out_dir / 'match.json'}")


@_command("report")
@click.option("--detections", "detections_path", required=True, type=click.Path(dir_okay=False))
@click.option("--datasets", "datasets_path", required=True, type=click.Path(dir_okay=False))
@click.option("--training", "training_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
def report_cmd(detections_path, datasets_path, training_path, out) -> None:
    """Render the benchmark-comparison table to CSV and JSON."""
    detections, records, training = _matching_inputs(detections_path, datasets_path, training_path)
    combined = benchmark.dedup(records)
    cov = benchmark.coverage(combined, detections)
    new = benchmark.new_detections(combined, detections, training)
    table = benchmark.table1_report(detections, cov, new)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "table1.csv").write_text(table.to_csv())
    (out_dir / "table1.json").write_text(table.to_json())
    click.echo(table.to_csv().rstrip())


@_command("serve")
@click.option("--detections", "detections_path", required=True, type=click.Path(dir_okay=False),
              help="Detections GeoJSON from detect.")
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False),
              help="Review event log (created if absent).")
@click.option("--tiles", "tiles_dir", required=True, type=click.Path(file_okay=False),
              help="Tile PNG directory.")
@click.option("--featuremaps", type=click.Path(file_okay=False), default=None,
              help="Directory of {col}_{row}.ogfm files.")
@click.option("--weights", type=click.Path(dir_okay=False), default=None,
              help="Classifier weights .ogfw file.")
@click.option("--datasets", type=click.Path(dir_okay=False), default=None,
              help="Benchmark records CSV for /reports/table1.")
@click.option("--training", type=click.Path(dir_okay=False), default=None,
              help="Training locations CSV.")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Built review-UI assets to serve at /ui.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(detections_path, log_path, tiles_dir, featuremaps, weights, datasets,
              training, ui_dir, host, port) -> None:
    """Run the review service."""
    import uvicorn

    from .service import ApiConfig, create_app

    app = create_app(
        ApiConfig(
            detections_path=Path(detections_path),
            event_log_path=Path(log_path),
            tile_image_dir=Path(tiles_dir),
            feature_map_dir=Path(featuremaps) if featuremaps else None,
            weights_path=Path(weights) if weights else None,
            benchmark_records_path=Path(datasets) if datasets else None,
            training_locations_path=Path(training) if training else None,
            ui_dir=Path(ui_dir) if ui_dir else None,
        )
    )
    uvicorn.run(app, host=host, port=port)


def main() -> None:
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()
