"""Acceptance suite: every exit criterion at its stated tolerance, one
pass/fail line per criterion (visible with ``pytest -s`` or on failure).

Run: ``pytest tests/test_acceptance.py -v``
"""

import json
import random
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from click.testing import CliRunner

from ogdetect import benchmark, evaluation, exchange, pipeline, scoring, synthworld
from ogdetect.cli import cli
from ogdetect.evaluation import ConfusionCounts, LabeledScore, compute_metrics
from ogdetect.geo import (
    BoundingRegion,
    GeoPoint,
    ProjectedPoint,
    TileIndex,
    haversine_km,
    project,
    unproject,
)
from ogdetect.store import ReviewEvent, ReviewStore, fold_events

from fixtures import build_table1_fixture
from oracles import bfs_components, best_threshold_brute_force, transitive_closure_clusters


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] FAIL - {name}", file=sys.stderr)
        raise
    elapsed = time.perf_counter() - start
    if budget_s is not None and elapsed >= budget_s:
        print(f"[ACCEPTANCE] FAIL - {name} (over budget: {elapsed:.2f}s >= {budget_s}s)",
              file=sys.stderr)
        raise AssertionError(f"{name}: runtime {elapsed:.2f}s exceeds budget {budget_s}s")
    print(f"[ACCEPTANCE] PASS - {name} ({elapsed:.2f}s)", file=sys.stderr)


def test_metrics_reproduction():
    with criterion("metrics reproduction (reported test-set confusion)", budget_s=1.0):
        m = compute_metrics(ConfusionCounts(tp=9, fp=3, fn=0, tn=694))
        assert abs(m.accuracy - 0.9958) <= 0.0005
        assert abs(m.precision - 0.750) <= 0.001
        assert m.recall == 1.0
        assert abs(m.f1 - 0.857) <= 0.001


def test_table1_arithmetic():
    with criterion("benchmark comparison table arithmetic", budget_s=1.0):
        fx = build_table1_fixture()
        combined = benchmark.dedup(fx.records)
        cov = benchmark.coverage(combined, fx.detections)
        new = benchmark.new_detections(combined, fx.detections, fx.training)
        table = benchmark.table1_report(fx.detections, cov, new)
        report = table.to_dict()
        assert report == fx.expected
        assert report["oil_refinery"]["coverage_percent"] == "73.5"
        assert report["petroleum_terminal"]["coverage_percent"] == "23.9"
        assert report["oil_refinery"]["new_detections"] == 6
        assert report["petroleum_terminal"]["new_detections"] == 142
        # report roundtrips through its own CSV parser
        assert benchmark.parse_table1_csv(table.to_csv()) == table
        # a detection counted as new never matches any cluster
        new_ids = set(new["oil_refinery"]) | set(new["petroleum_terminal"])
        covering_ids = {
            d.id
            for d in fx.detections
            if any(
                haversine_km(d.location, c.representative) <= 3.0
                for c in combined.clusters
            )
        }
        assert not (new_ids & covering_ids)


def test_threshold_selection_oracle():
    with criterion("operating-point selection vs brute-force oracle", budget_s=10.0):
        rng = np.random.default_rng(2024)
        for trial in range(1000):
            n = int(rng.integers(10, 501))
            labels = rng.random(n) < float(rng.uniform(0.05, 0.5))
            if not labels.any():
                labels[int(rng.integers(0, n))] = True
            probs = rng.random(n)
            if trial % 3 == 0:
                probs = np.round(probs, 2)  # force score ties
            scores = [
                LabeledScore(
                    example_id=str(i),
                    label="positive" if labels[i] else "negative",
                    probability=float(probs[i]),
                    split="validation",
                )
                for i in range(n)
            ]
            op = evaluation.select_operating_point(scores)
            expected_tau, _ = best_threshold_brute_force(labels, probs)
            assert op.threshold == expected_tau
            counts = evaluation.confusion(scores, op.threshold)
            assert counts.fn == 0 and counts.tp == int(labels.sum())  # recall exactly 1.0


def test_merge_oracle():
    with criterion("tile merge vs BFS connected-components oracle", budget_s=10.0):
        rng = random.Random(777)
        for trial in range(500):
            adjacency = 4 if trial % 2 == 0 else 8
            side = rng.randint(5, 100)
            density = rng.uniform(0.05, 0.5)
            positive = {
                TileIndex(c, r)
                for r in range(side)
                for c in range(side)
                if rng.random() < density
            }
            lookup = {t: 0.5 + 0.5 * rng.random() for t in positive}
            detections = pipeline.merge_positive_tiles(positive, lookup, adjacency=adjacency)
            assert [d.member_tiles for d in detections] == bfs_components(positive, adjacency)
            union = set()
            for d in detections:
                assert not (union & d.member_tiles)
                union |= d.member_tiles
            assert union == positive


def test_dedup_oracle():
    with criterion("dedup vs transitive-closure oracle", budget_s=10.0):
        rng = random.Random(4242)
        for trial in range(300):
            n = rng.randint(5, 200)
            pts = [
                GeoPoint(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25))
                for _ in range(n)
            ]
            records = [
                benchmark.FacilityRecord("GOGI", "oil_refinery", p, f"r{i}")
                for i, p in enumerate(pts)
            ]
            combined = benchmark.dedup(records, radius_km=2.0)
            got = sorted(
                tuple(sorted(int(m.raw_id[1:]) for m in c.members))
                for c in combined.clusters
            )
            expected = sorted(
                tuple(sorted(grp)) for grp in transitive_closure_clusters(pts, 2.0)
            )
            assert got == expected
            if trial % 25 == 0:  # partition invariant under permutation
                shuffled = records[:]
                rng.shuffle(shuffled)
                assert benchmark.dedup(shuffled, radius_km=2.0) == combined


def test_cam_oracle():
    with criterion("CAM vs elementwise formula oracle", budget_s=5.0):
        rng = np.random.default_rng(99)
        for _ in range(25):
            channels = int(rng.integers(1, 65))
            features = rng.normal(size=(channels, 15, 15))
            weights = rng.normal(size=channels)
            cam = scoring.compute_cam(features, weights)
            expected = np.empty((15, 15))
            for y in range(15):
                for x in range(15):
                    s = 0.0
                    for c in range(channels):
                        s += weights[c] * features[c, y, x]
                    expected[y, x] = max(0.0, s)
            assert np.abs(cam.raw - expected).max() <= 1e-6
        # constant feature maps upsample to constants
        const = scoring.compute_cam(np.full((3, 15, 15), 2.0), np.array([1.0, 0.5, 0.25]))
        assert (const.raw == 3.5).all()
        assert (const.upsampled == 1.0).all()
        # all-negative weighted sums yield an all-zero CAM
        zero = scoring.compute_cam(np.ones((2, 15, 15)), np.array([-1.0, -0.5]))
        assert (zero.raw == 0.0).all()
        assert (zero.upsampled == 0.0).all()


def test_geodesy():
    with criterion("projection roundtrip and haversine check", budget_s=1.0):
        rng = np.random.default_rng(7)
        lats = rng.uniform(-84.9, 84.9, size=10_000)
        lons = rng.uniform(-180.0, 180.0, size=10_000)
        for lat, lon in zip(lats, lons):
            p = GeoPoint(float(lat), float(lon))
            back = unproject(project(p))
            assert abs(back.lat - p.lat) <= 1e-9
            assert abs(back.lon - p.lon) <= 1e-9
        d = haversine_km(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
        assert abs(d - 111.195) <= 0.001


def _e2e_region(tiles_per_side: int) -> BoundingRegion:
    a = unproject(ProjectedPoint(5.0, 5.0))
    b = unproject(
        ProjectedPoint(tiles_per_side * 1250.0 - 5.0, tiles_per_side * 1250.0 - 5.0)
    )
    return BoundingRegion(min_lat=a.lat, min_lon=a.lon, max_lat=b.lat, max_lon=b.lon)


def test_end_to_end_synthetic_deployment(tmp_path):
    with criterion("end-to-end synthetic deployment (10,000 tiles)", budget_s=60.0):
        region = _e2e_region(100)
        spec = synthworld.random_world(region, seed=2024, n_facilities=20)
        centers = [project(f.center) for f in spec.facilities]
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                dx = abs(centers[i].x - centers[j].x)
                dy = abs(centers[i].y - centers[j].y)
                assert max(dx, dy) > 4 * 1250.0  # strict separation

        world = tmp_path / "world"
        world.mkdir()
        synthworld.save_world_spec(spec, world / "world.json")

        runner = CliRunner()
        outputs = []
        for run, workers in (("a", 2), ("b", 3)):
            out = tmp_path / run
            res = runner.invoke(
                cli,
                ["detect", "--world", str(world), "--threshold", "0.5",
                 "--workers", str(workers), "--out", str(out)],
            )
            assert res.exit_code == 0, res.output
            outputs.append(out)

        # reruns with different worker counts are bit-identical
        a, b = outputs
        assert (a / "detections.geojson").read_bytes() == (b / "detections.geojson").read_bytes()
        assert (a / "detections.csv").read_bytes() == (b / "detections.csv").read_bytes()
        manifest_a = json.loads((a / "manifest.json").read_text())
        manifest_b = json.loads((b / "manifest.json").read_text())
        manifest_a.pop("wall_time_s")
        manifest_b.pop("wall_time_s")
        assert manifest_a == manifest_b
        assert manifest_a["tile_count"] == 10_000

        detections = pipeline.read_detections_geojson(a / "detections.geojson")
        truth = synthworld.ground_truth(spec)
        assert len(detections) == 20  # exactly K detections: recall 1.0, zero FP
        assert {d.member_tiles for d in detections} == {gt.tiles for gt in truth}
        for det, gt in zip(detections, truth):
            assert det.member_tiles == gt.tiles
            assert haversine_km(det.centroid, gt.center) * 1000.0 <= 1250.0


def test_store_replay_and_reported_counts(tmp_path):
    with criterion("store replay and verified per-type counts", budget_s=30.0):
        # 500 ingested detections: 114 refineries, 336 terminals, 50 rejected
        detections = []
        for i in range(500):
            tile = TileIndex(i * 7, i % 13)
            detections.append(
                pipeline.Detection(
                    id=f"det-{i:06d}",
                    member_tiles=frozenset({tile}),
                    centroid=unproject(ProjectedPoint((i * 7 + 0.5) * 1250.0, (i % 13 + 0.5) * 1250.0)),
                    max_probability=0.95,
                    mean_probability=0.9,
                    best_tile=tile,
                )
            )
        log_path = tmp_path / "reviews.ndjson"
        store = ReviewStore(log_path=log_path)
        store.ingest(detections)

        rng = random.Random(11)
        events = []

        def stamp(k):
            return f"2024-06-01T00:{k // 60:02d}:{k % 60:02d}Z"

        k = 0
        for i in range(114):
            events.append(ReviewEvent(f"det-{i:06d}", "classify", "expert", stamp(k),
                                      "oil_refinery", rng.randint(0, 60)))
            k += 1
        for i in range(114, 450):
            subtype = "crude_oil_terminal" if i % 3 else "lng_terminal"
            events.append(ReviewEvent(f"det-{i:06d}", "classify", "expert", stamp(k),
                                      subtype, rng.randint(0, 40)))
            k += 1
        for i in range(450, 500):
            events.append(ReviewEvent(f"det-{i:06d}", "reject", "expert", stamp(k)))
            k += 1
        # a correction: reopen one refinery and reclassify it
        events.append(ReviewEvent("det-000000", "reopen", "expert", stamp(k)))
        events.append(ReviewEvent("det-000000", "classify", "expert", stamp(k + 1),
                                  "oil_refinery", 12))
        for event in events:
            store.apply_review(event)

        # replaying the log from empty reproduces live state byte-for-byte
        replayed = ReviewStore(log_path=log_path)
        replayed.ingest(detections)
        replayed.replay_log()
        assert replayed.snapshot() == store.snapshot()

        # pure fold over the in-memory event list agrees too
        assert fold_events(detections, events).snapshot() == store.snapshot()

        counts = store.verified_type_counts()
        assert counts == {"oil_refinery": 114, "petroleum_terminal": 336}


def test_full_scale_results_not_reproduced():
    """The continental-scale figures (5M tiles, threshold 0.81, the actual
    discovery counts, imagery download) need the real imagery and trained
    network; the scorer exchange protocol is the supported integration path
    and is verified bit-exact here."""
    with criterion("external-scorer protocol contract (full scale out of reach)"):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = Path(tmp)
            rng = np.random.default_rng(5)
            img = rng.integers(0, 256, (500, 500, 3), dtype=np.uint8)
            tile = TileIndex(-12, 34)
            exchange.write_tile_request(tmp_path, [(tile, img)])
            manifest = exchange.read_tile_manifest(tmp_path)
            assert manifest[0][0] == tile
            assert np.array_equal(exchange.load_tile_png(tmp_path / manifest[0][1]), img)

            scores = [scoring.TileScore(tile, 0.8123456789012345)]
            exchange.write_scores_csv(tmp_path / "scores.csv", scores)
            assert exchange.read_scores_csv(tmp_path / "scores.csv") == scores

            features = rng.normal(size=(64, 15, 15)).astype(np.float32)
            weights = rng.normal(size=64).astype(np.float32)
            exchange.write_feature_map(tmp_path / "fm.ogfm", features)
            exchange.write_weights(tmp_path / "w.ogfw", weights)
            assert np.array_equal(exchange.read_feature_map(tmp_path / "fm.ogfm"), features)
            assert np.array_equal(exchange.read_weights(tmp_path / "w.ogfw"), weights)
