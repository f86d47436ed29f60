"""Command-line front end.

Every command writes line-delimited JSON records to stdout (field names are
listed in docs/schema.md) and a short human summary to stderr.  Exit status
is 0 on success, 1 on runtime failure and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from . import __version__
from .applications import (
    EmptyClusterError,
    densest_k_path,
    extract_cluster,
    is_clique,
)
from .graph import GraphFormatError, build_kernel_graph, read_edge_list, read_points_csv, write_edge_list, write_points_csv
from .replicator import IterationConfig, PathSchedule, iter_pfrd, reciprocal_schedule, run_drd, run_pfrd
from .structfit import FitConfig, fit_lines, fitting_error
from .synth import (
    DISTRIBUTIONS,
    PlantedCliqueSpec,
    gen_lines,
    gen_planted_clique,
    standard_planted_spec,
    scaled_planted_spec,
)

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _parse_number(text: str) -> float:
    return float(Fraction(text.strip()))


def parse_schedule(spec: str) -> PathSchedule:
    """``recip:kstart:kend:step[,1]`` or ``list:v1,v2,...`` (values may be ``1/k``)."""
    kind, _, body = spec.partition(":")
    if kind == "recip":
        main, _, tail = body.partition(",")
        parts = main.split(":")
        if len(parts) != 3:
            raise UsageError(f"schedule {spec!r}: expected recip:kstart:kend:step[,1]")
        try:
            k_start, k_end, step = (int(p) for p in parts)
        except ValueError:
            raise UsageError(f"schedule {spec!r}: entry {main!r} is not three integers") from None
        if tail not in ("", "1"):
            raise UsageError(f"schedule {spec!r}: entry {tail!r} must be 1 if present")
        try:
            return reciprocal_schedule(k_start, k_end, step, append_one=tail == "1")
        except ValueError as exc:
            raise UsageError(f"schedule {spec!r}: {exc}") from None
    if kind == "list":
        values = []
        for i, item in enumerate(body.split(",")):
            try:
                values.append(_parse_number(item))
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"schedule {spec!r}: entry {i} ({item!r}) is not a number") from None
        try:
            return PathSchedule(tuple(values))
        except ValueError as exc:
            raise UsageError(f"schedule {spec!r}: {exc}") from None
    raise UsageError(f"schedule {spec!r}: unknown kind {kind!r} (use recip: or list:)")


def default_clique_schedule(n: int) -> PathSchedule:
    """The finest standard sweep (step 10), rescaled to ``n`` vertices."""
    k_start = max(10, (n - 1) // 10 * 10)
    if n < 20:
        return reciprocal_schedule(n, 1, 1, append_one=True)
    return reciprocal_schedule(k_start, 10, 10, append_one=True)


def _feasible(schedule: PathSchedule, n: int, spec: str) -> None:
    try:
        schedule.check_feasible(n)
    except ValueError as exc:
        raise UsageError(f"schedule {spec!r}: {exc}") from None


class Emitter:
    def __init__(self, out: TextIO):
        self.out = out

    def __call__(self, record: dict) -> None:
        record = {"schema_version": SCHEMA_VERSION, **record}
        self.out.write(json.dumps(record, sort_keys=False) + "\n")
        self.out.flush()


def _iter_cfg(args) -> IterationConfig:
    return IterationConfig(args.delta2, args.delta3, args.prune, args.max_iters)


def _support(x: np.ndarray, threshold: float) -> list:
    idx = np.flatnonzero(x > threshold)
    return [[int(i), float(x[i])] for i in idx]


def _entry_record(entry, threshold: float) -> dict:
    return {
        "type": "entry",
        "epsilon": entry.epsilon,
        "iterations": entry.iterations,
        "converged": entry.converged,
        "f_value": entry.f_value,
        "support_size": entry.support_size,
        "support": _support(entry.x, threshold),
    }


def _config_echo(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _header(emit: Emitter, args) -> None:
    emit({"type": "run", "command": args.command, "version": __version__, "seed": getattr(args, "seed", None), "config": _config_echo(args)})


def _emit_threshold(args) -> float:
    return args.delta3 if args.emit_threshold is None else args.emit_threshold


def cmd_evolve(args, emit: Emitter) -> int:
    g = read_edge_list(args.graph)
    schedule = parse_schedule(args.schedule)
    _feasible(schedule, g.n, args.schedule)
    _header(emit, args)
    thr = _emit_threshold(args)
    last = None
    for entry in iter_pfrd(g, schedule, _iter_cfg(args)):
        emit(_entry_record(entry, thr))
        last = entry
    print(f"{len(schedule)} stages; final f={last.f_value:.6g}, support={last.support_size}", file=sys.stderr)
    return 0


def cmd_clique(args, emit: Emitter) -> int:
    g = read_edge_list(args.graph)
    if not g.is_unweighted:
        raise UsageError("clique search expects an unweighted graph")
    schedule = parse_schedule(args.schedule) if args.schedule else default_clique_schedule(g.n)
    if schedule.samples[-1] != 1.0:
        raise UsageError("clique schedule must end at 1")
    _feasible(schedule, g.n, args.schedule or "default")
    _header(emit, args)
    thr = _emit_threshold(args)
    last = None
    for entry in iter_pfrd(g, schedule, _iter_cfg(args)):
        if args.trace:
            emit(_entry_record(entry, thr))
        last = entry
    cluster = extract_cluster(last.state, args.delta1)
    members = list(cluster.members)
    clique = is_clique(g, members)
    record = {
        "type": "clique",
        "members": members,
        "size": len(members),
        "is_clique": clique,
        "objective": 1.0 - 1.0 / len(members) if clique else None,
        "state_objective": last.f_value,
        "converged": last.converged,
        "delta1": cluster.delta1,
    }
    emit(record)
    print(f"{'clique' if clique else 'NOT a clique'} of size {len(members)}", file=sys.stderr)
    return 0


def _parse_ks(text: str) -> list[int]:
    ks = []
    for i, item in enumerate(text.split(",")):
        try:
            ks.append(int(item))
        except ValueError:
            raise UsageError(f"--k entry {i} ({item!r}) is not an integer") from None
    return ks


def cmd_dks(args, emit: Emitter) -> int:
    g = read_edge_list(args.graph)
    ks = _parse_ks(args.k)
    try:
        results = densest_k_path(g, ks, _iter_cfg(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _header(emit, args)
    for r in results:
        emit({"type": "dks", "k": r.k, "members": list(r.members), "weight": r.weight, "converged": r.converged})
        print(f"k={r.k}: weight {r.weight:.6g}", file=sys.stderr)
    return 0


def cmd_density(args, emit: Emitter) -> int:
    pts = read_points_csv(args.points)
    if args.bandwidth <= 0:
        raise UsageError("--bandwidth must be positive")
    g = build_kernel_graph(pts, args.bandwidth, args.truncation)
    schedule = parse_schedule(args.schedule) if args.schedule else reciprocal_schedule(g.n, 1, max(1, g.n // 10), append_one=True)
    _feasible(schedule, g.n, args.schedule or "default")
    _header(emit, args)
    for entry in iter_pfrd(g, schedule, _iter_cfg(args)):
        try:
            members = list(extract_cluster(entry.state, args.delta1).members)
        except EmptyClusterError:
            members = []
        emit({"type": "cluster", "epsilon": entry.epsilon, "iterations": entry.iterations,
              "converged": entry.converged, "f_value": entry.f_value, "members": members})
        print(f"eps={entry.epsilon:.6g}: {len(members)} points", file=sys.stderr)
    return 0


def _fit_config(args) -> FitConfig:
    delta4 = args.delta4
    if delta4 is None:
        delta4 = 3 * args.sigma if args.sigma else 0.03
    return FitConfig(
        delta4=delta4,
        epsilon_m=_parse_number(args.epsilon_m),
        hypotheses=args.hypotheses,
        consensus_threshold=args.consensus,
        seed=args.seed,
        schedule_step=args.schedule_step,
        delta1=args.delta1,
        refine=args.refine,
    )


def cmd_fit(args, emit: Emitter) -> int:
    pts = read_points_csv(args.points)
    try:
        cfg = _fit_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _header(emit, args)
    res = fit_lines(pts, cfg, _iter_cfg(args))
    for s in res.structures:
        emit({"type": "structure", **s.record()})
    print(f"{len(res.structures)} structures", file=sys.stderr)
    return 0


# bench ---------------------------------------------------------------------

SCALES = {"small": (20, 180), "desk": (100, 900)}


def _sweep_schedules(n: int) -> dict[str, PathSchedule | None]:
    """DRD and the three standard sweeps, scaled so that ``n = 1000`` is exact."""
    f = n / 1000

    def sweep(k0, k1, step):
        s = max(1, round(step * f))
        return reciprocal_schedule(max(1, round(k0 * f)), max(1, round(k1 * f)), s, append_one=True)

    return {
        "DRD": None,
        "PFRD(Phi1)": sweep(900, 100, 100),
        "PFRD(Phi2)": sweep(950, 50, 50),
        "PFRD(Phi3)": sweep(990, 10, 10),
    }


def _trial_seed(seed: int, *parts: int) -> int:
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


def bench_table1(trials: int, seed: int, scale: str, cfg: IterationConfig, emit: Emitter) -> list[dict]:
    m1, m2 = SCALES[scale]
    cells = []
    for di, dist in enumerate(DISTRIBUTIONS):
        graphs = []
        for t in range(trials):
            s = _trial_seed(seed, di, t)
            spec = standard_planted_spec(dist, s) if (m1, m2) == (100, 900) else scaled_planted_spec(m1, m2, dist, s)
            graphs.append(gen_planted_clique(spec))
        for name, schedule in _sweep_schedules(m1 + m2).items():
            hits, elapsed = 0, 0.0
            for g, planted in graphs:
                t0 = time.perf_counter()
                if schedule is None:
                    state = run_drd(g, cfg)[0]
                else:
                    state = run_pfrd(g, schedule, cfg).final.state
                elapsed += time.perf_counter() - t0
                try:
                    hits += extract_cluster(state).members == planted
                except EmptyClusterError:
                    pass
            cell = {"type": "bench_cell", "bench": "table1", "distribution": dist, "method": name,
                    "trials": trials, "success_rate": hits / trials, "mean_time": elapsed / trials}
            emit(cell)
            cells.append(cell)
    return cells


def bench_table4(trials: int, seed: int, sigma: float, hypotheses: int, emit: Emitter) -> list[dict]:
    errors, exact, elapsed = [], 0, 0.0
    cfg_base = dict(delta4=3 * sigma, hypotheses=hypotheses, refine=5)
    for t in range(trials):
        s = _trial_seed(seed, t)
        pts, lines, _ = gen_lines(100, 300, sigma, s)
        t0 = time.perf_counter()
        res = fit_lines(pts, FitConfig(seed=s, **cfg_base))
        elapsed += time.perf_counter() - t0
        err = fitting_error(res.structures, lines, pts, sigma, mode="projected")
        exact += len(res.structures) == 3
        if not err.failed:
            errors.append(err.value)
    cell = {"type": "bench_cell", "bench": "table4", "sigma": sigma, "trials": trials,
            "mean_error": float(np.mean(errors)) if errors else None,
            "exact_count_rate": exact / trials, "mean_time": elapsed / trials}
    emit(cell)
    return [cell]


def _print_table1(cells: list[dict]) -> None:
    methods = list(dict.fromkeys(c["method"] for c in cells))
    print("distribution  " + "  ".join(f"{m:>18}" for m in methods), file=sys.stderr)
    for dist in DISTRIBUTIONS:
        row = [c for c in cells if c["distribution"] == dist]
        txt = "  ".join(f"{100 * c['success_rate']:6.1f}% ({c['mean_time']:6.3f}s)" for c in row)
        print(f"{dist:<12}  {txt}", file=sys.stderr)


def cmd_bench(args, emit: Emitter) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    _header(emit, args)
    if args.name == "table1":
        _print_table1(bench_table1(args.trials, args.seed, args.scale, _iter_cfg(args), emit))
    else:
        sigma = args.sigma or 0.01
        (cell,) = bench_table4(args.trials, args.seed, sigma, args.hypotheses, emit)
        print(f"sigma={sigma}: mean error {cell['mean_error']}, 3 lines in "
              f"{100 * cell['exact_count_rate']:.0f}% ({cell['mean_time']:.3f}s)", file=sys.stderr)
    return 0


def cmd_gen(args, emit: Emitter) -> int:
    out = Path(args.out)
    meta: dict
    if args.kind == "planted":
        spec = PlantedCliqueSpec(args.m1, args.m2, args.alpha, args.beta, args.distribution, args.seed)
        g, planted = gen_planted_clique(spec)
        with out.open("w") as fh:
            write_edge_list(g, fh, header=f"planted clique {args.distribution} seed={args.seed}")
        meta = {"kind": "planted", **spec.metadata(), "planted": list(planted)}
    else:
        pts, lines, labels = gen_lines(args.n_inliers, args.n_outliers, args.sigma or 0.0, args.seed)
        with out.open("w") as fh:
            write_points_csv(pts, fh, header=f"lines sigma={args.sigma} seed={args.seed}")
        meta = {"kind": "lines", "n_inliers": args.n_inliers, "n_outliers": args.n_outliers,
                "sigma": args.sigma, "seed": args.seed, "lines": lines.tolist(), "labels": labels.tolist()}
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    emit({"type": "generated", "path": str(out), "meta": str(out) + ".meta.json"})
    return 0


def _add_iteration_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta2", type=float, default=1e-4, help="l1 change that ends a stage")
    p.add_argument("--delta3", type=float, default=1e-12, help="underflow threshold for pruning")
    p.add_argument("--prune", action="store_true", help="drop components below delta3")
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--emit-threshold", type=float, default=None,
                   help="only report support entries above this (default: delta3)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pfrd", description="Path-following replicator dynamics on graphs.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="follow the solution path and stream every stage")
    p.add_argument("--graph", required=True)
    p.add_argument("--schedule", default="list:1")
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("clique", help="maximum clique candidate")
    p.add_argument("--graph", required=True)
    p.add_argument("--schedule", default=None)
    p.add_argument("--delta1", type=float, default=None)
    p.add_argument("--trace", action="store_true", help="also emit one record per stage")
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_clique)

    p = sub.add_parser("dks", help="densest k-subgraph candidates for one or more k")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", required=True, help="comma-separated sizes, e.g. 4,8")
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_dks)

    p = sub.add_parser("density", help="high-density regions of a point cloud")
    p.add_argument("--points", required=True)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--truncation", type=float, default=None, help="drop kernel edges longer than this")
    p.add_argument("--schedule", default=None)
    p.add_argument("--delta1", type=float, default=None)
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("fit", help="fit multiple lines to a point set")
    p.add_argument("--points", required=True)
    p.add_argument("--delta4", type=float, default=None, help="inlier threshold (default 3*sigma or 0.03)")
    p.add_argument("--sigma", type=float, default=None, help="noise level used to pick delta4")
    p.add_argument("--epsilon-m", default="1/50", help="final cap; ceil(1/eps) is the minimum line size")
    p.add_argument("--hypotheses", type=int, default=1000)
    p.add_argument("--consensus", type=float, default=None, help="hypothesis agreement threshold (default delta4)")
    p.add_argument("--schedule-step", type=int, default=10)
    p.add_argument("--refine", type=int, default=5, help="TLS refit rounds on inliers")
    p.add_argument("--delta1", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="run a benchmark table")
    p.add_argument("name", choices=["table1", "table4"])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--hypotheses", type=int, default=1000)
    _add_iteration_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic instance and its metadata")
    p.add_argument("kind", choices=["planted", "lines"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m1", type=int, default=100)
    p.add_argument("--m2", type=int, default=900)
    p.add_argument("--alpha", type=float, default=0.11)
    p.add_argument("--beta", type=float, default=0.005)
    p.add_argument("--distribution", choices=DISTRIBUTIONS, default="uniform")
    p.add_argument("--n-inliers", type=int, default=100)
    p.add_argument("--n-outliers", type=int, default=300)
    p.add_argument("--sigma", type=float, default=0.01)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    emit = Emitter(sys.stdout)
    t0 = time.perf_counter()
    try:
        code = args.func(args, emit)
    except UsageError as exc:
        print(f"pfrd {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, GraphFormatError, ValueError, RuntimeError) as exc:
        print(f"pfrd {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(f"wall time {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
