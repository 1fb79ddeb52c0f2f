"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
status lines.
"""

import json
import math
import time

import numpy as np
import pytest

from adaptiveload import adaln, io
from adaptiveload.cli import EXIT_OK, main
from adaptiveload.cluster_sim import (
    ClusterConfig,
    default_catalog,
    default_dual_constraint,
    default_token_budget,
    run_experiment,
    throughput,
)
from adaptiveload.costfit import GridSpec, Trial, derive_m_comp, fit_cost_model
from adaptiveload.scheduler import DualConstraint, dual_constraint_batch, emit_plan
from adaptiveload.shapes import LatentGeometry, MediaShape, sequence_length

GEOM = LatentGeometry()


def _report(num, name, elapsed):
    print(f"ACCEPTANCE {num} [{name}]: PASS ({elapsed:.2f}s)")


def test_criterion_1_table_arithmetic():
    t0 = time.time()
    assert sequence_length(MediaShape(233, 640, 640), GEOM) == 48000
    assert sequence_length(MediaShape(257, 640, 640), GEOM) == 52800
    assert throughput(3, MediaShape(233, 640, 640), GEOM, 62.0) == pytest.approx(2322, abs=2)
    assert throughput(3, MediaShape(233, 640, 640), GEOM, 56.0) == pytest.approx(2571, abs=2)
    assert throughput(3, MediaShape(257, 640, 640), GEOM, 68.0) == pytest.approx(2328, abs=2)
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report(1, "table arithmetic", elapsed)


def test_criterion_2_batch_rule_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    grid = GridSpec().values()
    for _ in range(10_000):
        s = int(rng.integers(100, 100_000))
        c = DualConstraint(
            float(rng.integers(1_000, 1_000_000)),
            float(rng.uniform(1e4, 1e12)),
            float(rng.choice(grid)),
        )
        got, _ = dual_constraint_batch(s, c)
        # independent oracle: linear search for the largest admissible B
        b = 0
        sp = float(s) ** c.p
        while (b + 1) * s <= c.m_mem and (b + 1) <= c.m_comp / sp:
            b += 1
        assert got == max(1, b)
    elapsed = time.time() - t0
    assert elapsed < 5.0
    _report(2, "batch rule oracle equivalence", elapsed)


def test_criterion_3_fitter_recovery():
    t0 = time.time()
    pairs = [(bb, ss) for bb in (1, 2, 3) for ss in (8000, 24000, 48000)]
    for p_true in GridSpec().values():
        trials = [Trial(b, s, 2.0 + 1e-9 * b * float(s) ** p_true) for b, s in pairs]
        model = fit_cost_model(trials)
        assert model.p == p_true
        assert abs(model.r2 - 1.0) <= 1e-9
        m_comp = derive_m_comp(model, 62.0)
        assert abs((model.a + model.b * m_comp) - 62.0) / 62.0 <= 1e-9
    rng = np.random.default_rng(7)
    noisy = []
    for _ in range(100):
        b = int(rng.integers(1, 5))
        s = int(rng.choice([1600, 4800, 9600, 24000, 48000, 52800]))
        noisy.append(Trial(b, s, float((2.0 + 1e-9 * b * s**2) * (1 + rng.normal(0, 0.05)))))
    model = fit_cost_model(noisy)
    assert abs(model.p - 2.0) <= 0.1
    assert model.r2 >= 0.95
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report(3, "fitter recovery", elapsed)


@pytest.fixture(scope="module")
def ab_result():
    catalog, weights = default_catalog()
    plan_a = emit_plan(catalog, default_token_budget())
    plan_b = emit_plan(catalog, default_dual_constraint())
    cfg = ClusterConfig(num_workers=16, steps=500, seed=42)
    return run_experiment(catalog, weights, plan_a, plan_b, cfg)


def test_criterion_4_correlation_direction(ab_result):
    t0 = time.time()
    from adaptiveload.costfit import correlation_report

    rep = correlation_report(ab_result.trials_a, 2.0)
    assert rep["corr_load"] >= 0.9
    assert rep["corr_load"] - rep["corr_tokens"] >= 0.3
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report(4, "correlation direction", elapsed)


def test_criterion_5_ab_simulation(ab_result):
    t0 = time.time()
    summary = ab_result.summary
    cv_base = summary["policy_a"]["mean_compute_cv"]
    cv_adapt = summary["policy_b"]["mean_compute_cv"]
    assert (cv_base - cv_adapt) / cv_base >= 0.40
    assert summary["relative_delta"]["tokens_per_sec"] >= 0.15
    elapsed = time.time() - t0
    assert elapsed < 30.0
    _report(5, "A/B simulation", elapsed)


def test_criterion_6_operator_fidelity():
    t0 = time.time()
    report = adaln.gradcheck(tolerance=1e-4)
    assert report.passed, [e for e in report.entries if not e["pass"]]

    tile_configs = [(1, 1), (3, 7), (16, 128), (64, 1), (32, 999)]
    rng = np.random.default_rng(99)
    for n, d in adaln.DEFAULT_SIZES:
        x = rng.standard_normal((n, d))
        scale = 0.3 * rng.standard_normal(d)
        shift = 0.3 * rng.standard_normal(d)
        dy = rng.standard_normal((n, d))
        out = adaln.adaln_forward(x, scale, shift)
        xhat = (x - out.mu[:, None]) * out.rstd[:, None]
        ref_shift = np.array([math.fsum(dy[:, j]) for j in range(d)])
        ref_scale = np.array([math.fsum(dy[:, j] * xhat[:, j]) for j in range(d)])
        for d_tile, n_tile in tile_configs:
            tc = adaln.TileConfig(min(d_tile, d), min(n_tile, n))
            g64 = adaln.adaln_backward_dtile(dy, x, scale, out.mu, out.rstd, tc)
            assert np.abs(g64.dscale - ref_scale).max() / np.abs(ref_scale).max() <= 1e-12
            assert np.abs(g64.dshift - ref_shift).max() / np.abs(ref_shift).max() <= 1e-12
            g32 = adaln.adaln_backward_dtile(
                dy, x, scale, out.mu, out.rstd, tc, fp32_accum=True
            )
            assert np.abs(g32.dscale - ref_scale).max() / np.abs(ref_scale).max() <= 1e-5
            assert np.abs(g32.dshift - ref_shift).max() / np.abs(ref_shift).max() <= 1e-5
    elapsed = time.time() - t0
    assert elapsed < 60.0
    _report(6, "operator fidelity", elapsed)


def test_criterion_7_memory_model_band():
    t0 = time.time()
    d, eb, sb = 5120, 2, 4
    ns = [8192 * k for k in range(1, 9)]
    naive = np.array(
        [adaln.activation_bytes(n, d, eb, sb, adaln.MemoryMode.NAIVE) for n in ns], float
    )
    fused = np.array(
        [adaln.activation_bytes(n, d, eb, sb, adaln.MemoryMode.FUSED) for n in ns], float
    )
    ratios = fused / naive
    assert (ratios >= 0.30).all() and (ratios <= 0.44).all()
    for series in (naive, fused):
        coeffs = np.polyfit(ns, series, 1)
        pred = np.polyval(coeffs, ns)
        ss_res = float(((series - pred) ** 2).sum())
        ss_tot = float(((series - series.mean()) ** 2).sum())
        assert 1.0 - ss_res / ss_tot >= 0.999
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report(7, "memory model band", elapsed)


def test_criterion_8_determinism_and_round_trip(tmp_path):
    t0 = time.time()
    catalog, _ = default_catalog()
    for d in (tmp_path / "run1", tmp_path / "run2"):
        d.mkdir()
        io.save_catalog(d / "catalog.json", catalog, GEOM)
        (d / "cluster.json").write_text(
            json.dumps(
                {
                    "num_workers": 16,
                    "cost": {"a": 2.0, "b": 1e-9, "p": 2.0},
                    "noise_sigma": 0.03,
                    "seed": 42,
                    "steps": 100,
                }
            )
        )
        assert main([
            "benchmark", "--catalog", str(d / "catalog.json"),
            "--cluster-config", str(d / "cluster.json"), "--out", str(d / "trace.jsonl"),
        ]) == EXIT_OK
        assert main([
            "fit", "--trace", str(d / "trace.jsonl"), "--out", str(d / "model.json"),
        ]) == EXIT_OK
        assert main([
            "plan", "--catalog", str(d / "catalog.json"), "--model", str(d / "model.json"),
            "--target-sync", "8", "--m-mem", "480000", "--out", str(d / "plan_b.json"),
        ]) == EXIT_OK
        assert main([
            "plan", "--catalog", str(d / "catalog.json"), "--token-budget", "480000",
            "--out", str(d / "plan_a.json"),
        ]) == EXIT_OK
        assert main([
            "simulate", "--catalog", str(d / "catalog.json"),
            "--plan-a", str(d / "plan_a.json"), "--plan-b", str(d / "plan_b.json"),
            "--cluster-config", str(d / "cluster.json"),
            "--out-csv", str(d / "metrics.csv"), "--out-summary", str(d / "summary.json"),
        ]) == EXIT_OK
    names = ["trace.jsonl", "model.json", "plan_a.json", "plan_b.json",
             "metrics.csv", "summary.json"]
    for name in names:
        b1 = (tmp_path / "run1" / name).read_bytes()
        b2 = (tmp_path / "run2" / name).read_bytes()
        assert b1 == b2, f"{name} not byte-identical"

    d = tmp_path / "run1"
    plan = io.load_plan(d / "plan_b.json")
    from adaptiveload.manifest import RunManifest

    manifest = RunManifest.from_dict(
        json.loads((d / "plan_b.json").read_text())["manifest"]
    )
    io.save_plan(tmp_path / "rt.json", plan, manifest)
    assert io.load_plan(tmp_path / "rt.json") == plan
    model = io.load_model(d / "model.json")
    io.save_model(tmp_path / "rt_model.json", model, manifest)
    assert io.load_model(tmp_path / "rt_model.json") == model
    trace = io.load_trace(d / "trace.jsonl")
    io.save_trace(tmp_path / "rt.jsonl", trace)
    assert io.load_trace(tmp_path / "rt.jsonl") == trace
    elapsed = time.time() - t0
    assert elapsed < 30.0
    _report(8, "determinism and round-trip", elapsed)
