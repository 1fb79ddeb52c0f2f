"""File formats: catalog/config JSON, plan JSON, trace JSONL, metrics CSV.

All formats are text, deterministic (sorted keys, fixed column order), and
round-trip exactly. JSON artifacts embed the run manifest under a "manifest"
key; line- and row-oriented formats (JSONL, CSV) get a ``<path>.manifest.json``
sidecar instead so their record schema stays flat.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .cluster_sim import ClusterConfig, CostParams, MetricsSeries
from .costfit import CostModel, Trial
from .manifest import RunManifest
from .scheduler import Binding, BucketPlan, PlanEntry
from .shapes import Bucket, LatentGeometry, MediaShape, build_catalog


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_manifest_sidecar(path, manifest: RunManifest) -> None:
    _dump_json(str(path) + ".manifest.json", manifest.to_dict())


# --- catalog ----------------------------------------------------------------

def load_catalog(path):
    """Read a catalog document; returns (buckets, weights, geometry).

    Accepts either a bare array of {"frames","height","width","count"} or an
    object {"shapes": [...], "geometry": {...}}. Sampling weights are the
    normalized sample counts.
    """
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, list):
        shape_docs, geom_doc = doc, {}
    else:
        shape_docs, geom_doc = doc["shapes"], doc.get("geometry", {})
    geom = LatentGeometry(
        temporal_factor=geom_doc.get("temporal_factor", 8),
        width_factor=geom_doc.get("width_factor", 16),
        height_factor=geom_doc.get("height_factor", 16),
        text_tokens=geom_doc.get("text_tokens", 0),
    )
    shapes = [
        (MediaShape(s["frames"], s["height"], s["width"]), s["count"])
        for s in shape_docs
    ]
    catalog = build_catalog(shapes, geom)
    total = sum(b.sample_count for b in catalog)
    weights = [b.sample_count / total for b in catalog]
    return catalog, weights, geom


def save_catalog(path, catalog: list[Bucket], geom: LatentGeometry) -> None:
    doc = {
        "shapes": [
            {
                "frames": b.shape.frames,
                "height": b.shape.height,
                "width": b.shape.width,
                "count": b.sample_count,
            }
            for b in catalog
        ],
        "geometry": {
            "temporal_factor": geom.temporal_factor,
            "width_factor": geom.width_factor,
            "height_factor": geom.height_factor,
            "text_tokens": geom.text_tokens,
        },
    }
    _dump_json(path, doc)


# --- cluster config ---------------------------------------------------------

def load_cluster_config(path, seed_override: int | None = None) -> ClusterConfig:
    doc = json.loads(Path(path).read_text())
    cost = doc.get("cost", {})
    return ClusterConfig(
        num_workers=doc.get("num_workers", 16),
        cost=CostParams(
            a=cost.get("a", 2.0), b=cost.get("b", 1e-9), p=cost.get("p", 2.0)
        ),
        noise_sigma=doc.get("noise_sigma", 0.03),
        seed=seed_override if seed_override is not None else doc.get("seed", 42),
        steps=doc.get("steps", 500),
    )


# --- bucket plans -----------------------------------------------------------

def save_plan(path, plan: BucketPlan, manifest: RunManifest) -> None:
    entries = [
        {
            "frames": e.bucket.shape.frames,
            "height": e.bucket.shape.height,
            "width": e.bucket.shape.width,
            "seq_len": e.bucket.seq_len,
            "sample_count": e.bucket.sample_count,
            "batch_size": e.batch_size,
            "binding": e.binding.value if e.binding is not None else None,
        }
        for e in plan.entries
    ]
    _dump_json(path, {"entries": entries, "manifest": manifest.to_dict()})


def load_plan(path) -> BucketPlan:
    doc = json.loads(Path(path).read_text())
    entries = []
    for e in doc["entries"]:
        bucket = Bucket(
            MediaShape(e["frames"], e["height"], e["width"]),
            e["seq_len"],
            e["sample_count"],
        )
        binding = Binding(e["binding"]) if e["binding"] is not None else None
        entries.append(PlanEntry(bucket, e["batch_size"], binding))
    return BucketPlan(tuple(entries))


# --- cost model -------------------------------------------------------------

def save_model(path, model: CostModel, manifest: RunManifest) -> None:
    _dump_json(
        path,
        {
            "a": model.a,
            "b": model.b,
            "p": model.p,
            "r2": model.r2,
            "manifest": manifest.to_dict(),
        },
    )


def load_model(path) -> CostModel:
    doc = json.loads(Path(path).read_text())
    return CostModel(a=doc["a"], b=doc["b"], p=doc["p"], r2=doc["r2"])


# --- trial traces (JSONL) ---------------------------------------------------

def save_trace(path, trials: list[Trial], workers: list[int] | None = None) -> None:
    with open(path, "w") as fh:
        for i, t in enumerate(trials):
            row = {"batch": t.batch, "seq_len": t.seq_len, "step_time_sync": t.step_time}
            if workers is not None:
                row["worker"] = workers[i]
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_trace(path) -> list[Trial]:
    trials = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        trials.append(Trial(row["batch"], row["seq_len"], row["step_time_sync"]))
    return trials


# --- metrics ----------------------------------------------------------------

METRICS_COLUMNS = [
    "step",
    "policy",
    "t_sync",
    "cv_step",
    "compute_cv",
    "tokens_per_sec",
    "theta",
]


def save_metrics_csv(path, series_by_policy: dict[str, MetricsSeries]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for policy, s in series_by_policy.items():
            for i in range(len(s.t_sync)):
                writer.writerow(
                    [
                        i,
                        policy,
                        repr(float(s.t_sync[i])),
                        repr(float(s.cv_step[i])),
                        repr(float(s.compute_cv[i])),
                        repr(float(s.tokens_per_sec[i])),
                        repr(float(s.theta[i])),
                    ]
                )


def save_summary(path, summary: dict, manifest: RunManifest) -> None:
    _dump_json(path, {**summary, "manifest": manifest.to_dict()})
