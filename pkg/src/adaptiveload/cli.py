"""Command-line surface: benchmark -> fit -> plan -> simulate -> kernel-check.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import adaln, io
from .cluster_sim import RefitConfig, run_experiment
from .costfit import GridSpec, derive_m_comp, fit_cost_model, generate_sweep, grid_profile
from .errors import AdaptiveLoadError
from .manifest import RunManifest, config_digest
from .scheduler import DualConstraint, TokenBudget, emit_plan

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_CHECK = 4


def _basename(value):
    # manifests record basenames so a chain rerun in a different directory
    # stays byte-identical
    return os.path.basename(value) if isinstance(value, str) else value


def _manifest(command: str, args_ns, inputs: dict, outputs: dict, seed=None) -> RunManifest:
    payload = {
        k: _basename(v) for k, v in sorted(vars(args_ns).items()) if k != "func"
    }
    return RunManifest(
        command=command,
        inputs={k: _basename(v) for k, v in inputs.items()},
        outputs={k: _basename(v) for k, v in outputs.items()},
        seed=seed,
        config_digest=config_digest(payload),
    )


def cmd_benchmark(args) -> int:
    catalog, _, _ = io.load_catalog(args.catalog)
    cfg = io.load_cluster_config(args.cluster_config, seed_override=args.seed)
    sweep = generate_sweep(
        catalog, args.levels_short, args.levels_long, args.threshold
    )
    rng = np.random.default_rng(cfg.seed)
    from .costfit import Trial

    trials = []
    for b, s in sweep.trials:
        base = cfg.cost.a + cfg.cost.b * b * float(s) ** cfg.cost.p
        noise = max(0.01, 1.0 + rng.normal(0.0, cfg.noise_sigma))
        trials.append(Trial(b, s, base * noise))
    io.save_trace(args.out, trials)
    io.write_manifest_sidecar(
        args.out,
        _manifest(
            "benchmark",
            args,
            {"catalog": args.catalog, "cluster_config": args.cluster_config},
            {"trace": args.out},
            seed=cfg.seed,
        ),
    )
    print(f"benchmark: wrote {len(trials)} trials to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    trials = io.load_trace(args.trace)
    grid = GridSpec(args.p_min, args.p_max, args.p_step)
    model = fit_cost_model(trials, grid)
    if args.verbose:
        for p, r2 in grid_profile(trials, grid):
            print(f"p={p:.2f}  r2={r2:.6f}")
    io.save_model(
        args.out,
        model,
        _manifest("fit", args, {"trace": args.trace}, {"model": args.out}),
    )
    print(f"fit: a={model.a:.6g} b={model.b:.6g} p={model.p} r2={model.r2:.6f}")
    return EXIT_OK


def cmd_plan(args) -> int:
    catalog, _, _ = io.load_catalog(args.catalog)
    if args.token_budget is not None:
        policy = TokenBudget(args.token_budget)
    else:
        if args.model is None or args.target_sync is None or args.m_mem is None:
            raise AdaptiveLoadError(
                "dual-constraint planning needs --model, --target-sync, and --m-mem"
            )
        model = io.load_model(args.model)
        m_comp = derive_m_comp(model, args.target_sync)
        policy = DualConstraint(m_mem=args.m_mem, m_comp=m_comp, p=model.p)
    plan = emit_plan(catalog, policy)
    io.save_plan(
        args.out,
        plan,
        _manifest(
            "plan",
            args,
            {"catalog": args.catalog, "model": args.model or ""},
            {"plan": args.out},
        ),
    )
    print(f"plan: wrote {len(plan.entries)} entries to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    catalog, weights, geom = io.load_catalog(args.catalog)
    plan_a = io.load_plan(args.plan_a)
    plan_b = io.load_plan(args.plan_b)
    cfg = io.load_cluster_config(args.cluster_config, seed_override=args.seed)
    refit = None
    if args.refit_every:
        if args.target_sync is None or args.m_mem is None:
            raise AdaptiveLoadError("--refit-every needs --target-sync and --m-mem")
        refit = RefitConfig(args.refit_every, args.target_sync, args.m_mem)
    result = run_experiment(catalog, weights, plan_a, plan_b, cfg, geom, refit_b=refit)
    io.save_metrics_csv(args.out_csv, {"A": result.series_a, "B": result.series_b})
    manifest = _manifest(
        "simulate",
        args,
        {
            "catalog": args.catalog,
            "plan_a": args.plan_a,
            "plan_b": args.plan_b,
            "cluster_config": args.cluster_config,
        },
        {"csv": args.out_csv, "summary": args.out_summary},
        seed=cfg.seed,
    )
    io.write_manifest_sidecar(args.out_csv, manifest)
    io.save_summary(args.out_summary, result.summary, manifest)
    if args.emit_trace:
        io.save_trace(args.emit_trace, result.trials_b)
        io.write_manifest_sidecar(args.emit_trace, manifest)
    delta = result.summary["relative_delta"]
    print(
        f"simulate: tokens/sec delta {delta['tokens_per_sec']:+.2%}, "
        f"compute CV delta {delta['compute_cv']:+.2%}"
    )
    return EXIT_OK


def _parse_sizes(text: str):
    sizes = []
    for part in text.split(","):
        n, d = part.lower().split("x")
        sizes.append((int(n), int(d)))
    return tuple(sizes)


def cmd_kernel_check(args) -> int:
    sizes = _parse_sizes(args.sizes) if args.sizes else adaln.DEFAULT_SIZES
    tiles = None
    if args.tiles:
        d_tile, n_tile = (int(v) for v in args.tiles.lower().split("x"))
        tiles = adaln.TileConfig(d_tile=d_tile, n_tile=n_tile)
    report = adaln.gradcheck(
        sizes=sizes,
        tolerance=args.tolerance,
        tiles=tiles,
        fp32_accum=args.fp32_accum,
    )
    memory_table = []
    for n, d in sizes:
        naive = adaln.activation_bytes(n, d, args.element_bytes, args.stat_bytes, adaln.MemoryMode.NAIVE)
        fused = adaln.activation_bytes(n, d, args.element_bytes, args.stat_bytes, adaln.MemoryMode.FUSED)
        memory_table.append(
            {"n": n, "d": d, "naive_bytes": naive, "fused_bytes": fused, "ratio": fused / naive}
        )
    doc = {
        "backend": adaln.BACKEND,
        "tolerance": report.tolerance,
        "entries": list(report.entries),
        "passed": report.passed,
        "activation_memory": memory_table,
        "manifest": _manifest(
            "kernel-check", args, {}, {"report": args.out or ""}
        ).to_dict(),
    }
    text = json.dumps(doc, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for e in report.entries:
        status = "pass" if e["pass"] else "FAIL"
        print(
            f"kernel-check: N={e['n']} D={e['d']} {e['variant']}/{e['tensor']} "
            f"max_rel_err={e['max_rel_err']:.3e} {status}"
        )
    return EXIT_OK if report.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptiveload")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("benchmark", help="run a shape sweep against the simulator")
    p.add_argument("--catalog", required=True)
    p.add_argument("--cluster-config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--levels-short", type=int, default=2)
    p.add_argument("--levels-long", type=int, default=4)
    p.add_argument("--threshold", type=int, default=20_000)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("fit", help="fit the cost model from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p-min", type=float, default=1.6)
    p.add_argument("--p-max", type=float, default=2.4)
    p.add_argument("--p-step", type=float, default=0.05)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plan", help="emit a bucket plan")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--target-sync", type=float, default=None)
    p.add_argument("--m-mem", type=float, default=None)
    p.add_argument("--token-budget", type=int, default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="A/B simulate two plans")
    p.add_argument("--catalog", required=True)
    p.add_argument("--plan-a", required=True)
    p.add_argument("--plan-b", required=True)
    p.add_argument("--cluster-config", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-summary", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--refit-every", type=int, default=0)
    p.add_argument("--target-sync", type=float, default=None)
    p.add_argument("--m-mem", type=float, default=None)
    p.add_argument("--emit-trace", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kernel-check", help="verify the fused operator gradients")
    p.add_argument("--sizes", default=None, help="comma list like 8x16,64x128")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--tiles", default=None, help="d_tile x n_tile, e.g. 32x128")
    p.add_argument("--fp32-accum", action="store_true")
    p.add_argument("--element-bytes", type=int, default=2)
    p.add_argument("--stat-bytes", type=int, default=4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kernel_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdaptiveLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
