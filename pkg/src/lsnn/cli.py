"""Command line entry point: ``lsnn run|reproduce|verify|cross-section|breaking-lines``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import artifacts
from .benchmarks import BUILTIN_IDS, builtin_problem
from .config import ConfigError, RunConfig, load_config
from .geometry import build_mesh
from .metrics import FIGURE_LINES, cross_section, error_metrics
from .network import breaking_lines, load_checkpoint

log = logging.getLogger("lsnn")

OUTPUT_ROOT_ENV = "LSNN_OUTPUT_ROOT"


def output_path(path: str) -> Path:
    """Relative paths land under $LSNN_OUTPUT_ROOT (default: current directory)."""
    p = Path(path)
    if p.is_absolute():
        return p
    return Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / p


def _write_manifest(out: Path, cfg_text: str, started: float, extra: dict) -> None:
    data = artifacts.manifest(cfg_text, extra)
    data["wall_clock_s"] = time.perf_counter() - started
    (out / "manifest.json").write_text(json.dumps(data, indent=2, default=str) + "\n")


def _dump_init(cfg: RunConfig, out: Path) -> None:
    from .initializer import assemble_system, solve_output_weights, uniform_hyperplanes

    problem = builtin_problem(cfg.problem)
    mesh = build_mesh(problem.domain, cfg.h, problem.beta)
    spec = cfg.run_spec()
    basis = uniform_hyperplanes(problem.domain, int(cfg.arch.split("-")[1]))
    system = assemble_system(basis, mesh, problem, spec.loss_config(problem).boundary_weight)
    c = solve_output_weights(system)
    n = len(c)
    with open(out / "init_system.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row"] + [f"A{j}" for j in range(n)] + ["F", "c"])
        for i in range(n):
            w.writerow([i, *(repr(float(v)) for v in system.A[i]), repr(float(system.F[i])), repr(float(c[i]))])


def _train(cfg: RunConfig, out: Path, args) -> int:
    from .reproduce import scale_spec
    from .trainer import best_of_seeds

    spec = scale_spec(cfg.run_spec(), args.iters_scale)
    seeds = cfg.seed_list()
    best, reports = best_of_seeds(spec, len(seeds), base_seed=seeds[0], out_dir=out,
                                  n_jobs=args.jobs)
    if cfg.eval_h:
        problem = builtin_problem(cfg.problem)
        eval_mesh = build_mesh(problem.domain, cfg.eval_h, problem.beta)
        for r in reports:
            if r.ok:
                r.metrics = error_metrics(r.params, problem, eval_mesh, r.cfg)
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(artifacts.METRICS_HEADER)
        w.writerows(artifacts.metrics_row(r) for r in reports)
    (out / "best_seed.txt").write_text(f"{best.seed}\n")
    m = best.metrics
    print(f"{spec.problem} {spec.arch}: best seed {best.seed} rel_l2={m.rel_l2:.6f} "
          f"rel_vbeta={m.rel_vbeta:.6f} loss_ratio={m.loss_ratio:.6f} params={m.param_count_paper}")
    return 0 if all(r.ok for r in reports) else 1


def _continuation(cfg: RunConfig, out: Path, args) -> int:
    from .continuation import DEFAULT_PLAN, ContinuationPlan, run_continuation

    plan = ContinuationPlan.parse(cfg.stages) if cfg.stages else DEFAULT_PLAN
    if args.iters_scale != 1.0:
        plan = plan.scaled(args.iters_scale)
    results = run_continuation(plan, seed=cfg.seed_list()[0], h=cfg.h, out_dir=out)
    with open(out / "continuation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "problem", "network", "rel_l2", "rel_vbeta", "loss_ratio", "u_rel_l2", "params"])
        for i, r in enumerate(results):
            m = r.metrics
            w.writerow([i, r.stage.problem, r.stage.arch, m.rel_l2, m.rel_vbeta, m.loss_ratio,
                        r.target_rel_l2, m.param_count_paper])
            print(f"stage {i} {r.stage.problem} {r.stage.arch}: rel_l2={m.rel_l2:.6f} u_rel_l2={r.target_rel_l2:.6f}")
    return 0


def _verify(out: Path | None, seed: int, suites=None) -> int:
    from .verify import run_verify

    checks = run_verify(seed, suites)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} [{c.suite}] {c.name}: {c.detail}")
    counts = {}
    for c in checks:
        p, f = counts.get(c.suite, (0, 0))
        counts[c.suite] = (p + c.passed, f + (not c.passed))
    for s, (p, f) in counts.items():
        print(f"{s}: {p} passed, {f} failed")
    if out is not None:
        with open(out / "verify.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["suite", "check", "passed", "detail"])
            w.writerows([c.suite, c.name, int(c.passed), c.detail] for c in checks)
    return 0 if all(c.passed for c in checks) else 1


def _report(cfg: RunConfig, out: Path) -> int:
    params = load_checkpoint(cfg.checkpoint)
    problem = builtin_problem(cfg.problem)
    mesh = build_mesh(problem.domain, cfg.eval_h or cfg.h, problem.beta)
    m = error_metrics(params, problem, mesh, cfg.run_spec().loss_config(problem))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["problem", "network", "rel_l2", "rel_vbeta", "loss_ratio", "params_paper"])
        w.writerow([problem.id, str(params.arch), m.rel_l2, m.rel_vbeta, m.loss_ratio, m.param_count_paper])
    line = FIGURE_LINES.get(problem.id.split(":")[0], "x=0")
    artifacts.write_cross_section(cross_section(params, problem, line), out / "cross_section.csv")
    artifacts.write_breaking_lines(breaking_lines(params, problem.domain), out / "breaking_lines.csv")
    print(f"{problem.id} {params.arch}: rel_l2={m.rel_l2:.6f} rel_vbeta={m.rel_vbeta:.6f} loss_ratio={m.loss_ratio:.6f}")
    return 0


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.iters_scale <= 0:
        print("config error: --iters-scale must be positive", file=sys.stderr)
        return 2
    if args.eval_h is not None:
        cfg.eval_h = args.eval_h
    out = output_path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    if args.dump_init:
        _dump_init(cfg, out)
    if cfg.mode == "train":
        status = _train(cfg, out, args)
    elif cfg.mode == "continuation":
        status = _continuation(cfg, out, args)
    elif cfg.mode == "verify":
        status = _verify(out, cfg.seed_list()[0])
    else:
        status = _report(cfg, out)
    _write_manifest(out, cfg.text, started, {"mode": cfg.mode, "iters_scale": args.iters_scale,
                                             "seeds": cfg.seed_list(), "status": status})
    print(f"artifacts: {out}")
    return status


def cmd_reproduce(args) -> int:
    from .reproduce import reproduce

    out = output_path(args.out or f"table{args.table}")
    started = time.perf_counter()
    reproduce(args.table, out, iters_scale=args.iters_scale, base_seed=args.seed, n_jobs=args.jobs)
    _write_manifest(out, f"reproduce {args.table}", started,
                    {"table": args.table, "iters_scale": args.iters_scale, "seed": args.seed})
    with open(out / "comparison.csv") as fh:
        sys.stdout.write(fh.read())
    print(f"artifacts: {out}")
    return 0


def cmd_verify(args) -> int:
    out = output_path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    return _verify(out, args.seed, args.suite or None)


def cmd_cross_section(args) -> int:
    params = load_checkpoint(args.checkpoint)
    section = cross_section(params, builtin_problem(args.problem), args.line, samples=args.samples)
    out = Path(args.out) if args.out else None
    if out is None:
        w = csv.writer(sys.stdout)
        w.writerow(artifacts.CROSS_HEADER)
        w.writerows(zip(section.t, section.points[:, 0], section.points[:, 1], section.exact, section.approx))
    else:
        artifacts.write_cross_section(section, out)
    return 0


def cmd_breaking_lines(args) -> int:
    params = load_checkpoint(args.checkpoint)
    lines = breaking_lines(params, builtin_problem(args.problem).domain)
    if args.out:
        artifacts.write_breaking_lines(lines, Path(args.out))
    else:
        w = csv.writer(sys.stdout)
        w.writerow(artifacts.LINES_HEADER)
        for pid, bl in enumerate(lines):
            for a, b in zip(bl.points[:-1], bl.points[1:]):
                w.writerow([bl.layer, bl.neuron, pid, a[0], a[1], b[0], b[1]])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsnn", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configuration file")
    p.add_argument("config")
    p.add_argument("--iters-scale", type=float, default=1.0,
                   help="multiply iteration counts and schedule periods")
    p.add_argument("--eval-h", type=float, default=None, help="evaluate metrics on a mesh of this size")
    p.add_argument("--dump-init", action="store_true",
                   help="write the initial Galerkin system (A, F, c) to init_system.csv")
    p.add_argument("--jobs", type=int, default=1, help="seeds trained in parallel")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="reproduce one of the result tables")
    p.add_argument("table", type=int, choices=range(1, 8))
    p.add_argument("--iters-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--suite", action="append", choices=["construction", "gradient", "spd", "embedding"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cross-section", help="trace a checkpoint along a line")
    p.add_argument("checkpoint")
    p.add_argument("line", help="'x=<c>' or 'y=<a>*x+<b>'")
    p.add_argument("--problem", required=True, choices=list(BUILTIN_IDS))
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cross_section)

    p = sub.add_parser("breaking-lines", help="breaking lines of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--problem", required=True, choices=list(BUILTIN_IDS))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_breaking_lines)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
