"""Command-line entry point: ``plantedmatch <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime failures.
Machine output goes to stdout or ``--out``; progress goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import combinatorics as cb
from . import experiments as ex
from .augmenting import (
    EXACT_MATCHING_MAX_V,
    build_aug_graph,
    error_cycles,
    estimate_edge_probability,
    max_matching,
)
from .lap import mle, solve_assignment
from .model import aligned_inner_products, error_report, generate_instance, instance_to_json, load_instance
from .theory import theory_profile
from .tracking import estimate_Tmax, simulate_tracking, tracking_csv
from .verify import mgf_recurrence_report, run_identities


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _progress(done, total):
    if total and (done == total or done % max(1, total // 20) == 0):
        _log(f"  {done}/{total}")


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a finite non-negative number, got {text}")
    return v


# subcommands


def cmd_gen(args):
    inst = generate_instance(args.n, args.d, args.sigma2, args.seed, random_planted=not args.identity)
    if args.format == "json":
        _emit(instance_to_json(inst) + "\n", args.out)
    else:
        rows = [
            {"role": role, "index": i, **{f"c{k}": float(v) for k, v in enumerate(pt)}}
            for role, pts in (("x", inst.points_x), ("y", inst.points_y))
            for i, pt in enumerate(pts)
        ]
        _emit(_csv(rows), args.out)
    return 0


def _read_matrix(path):
    text = Path(path).read_text()
    mat = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    if mat.shape[0] != mat.shape[1]:
        raise UsageError(f"cost matrix must be square, got {mat.shape}")
    return mat


def cmd_solve(args):
    if (args.instance is None) == (args.matrix is None):
        raise UsageError("give exactly one of --instance or --matrix")
    if args.instance:
        inst = load_instance(args.instance)
        sol = mle(inst, check_unique=True)
        rep = error_report(sol.permutation, inst.planted)
        result = {
            "permutation": sol.permutation.image.tolist(),
            "objective": sol.objective,
            "direction": sol.direction,
            "unique": sol.unique,
            "error_count": rep.error_count,
            "poly_rate": rep.poly_rate,
        }
    else:
        sol = solve_assignment(_read_matrix(args.matrix), args.direction, check_unique=True)
        result = {
            "permutation": sol.permutation.image.tolist(),
            "objective": sol.objective,
            "direction": sol.direction,
            "unique": sol.unique,
        }
    if args.format == "json":
        _emit(_json(result), args.out)
    else:
        _emit(_csv([{"row": i, "column": int(j)} for i, j in enumerate(result["permutation"])]), args.out)
    return 0


def cmd_theory(args):
    prof = theory_profile(args.n, args.d, args.sigma2, t_max=args.tmax)
    if args.format == "json":
        _emit(_json(prof.to_dict()), args.out)
    else:
        rows = [{"t": t, "S": prof.S_table[t], "c": prof.c_curve[t]} for t in sorted(prof.S_table)]
        _emit(_csv(rows), args.out)
    return 0


def cmd_augmenting(args):
    if args.phat:
        est = estimate_edge_probability(args.d, args.sigma2, args.trials, args.seed, method=args.method)
        result = asdict(est)
        if args.format == "json":
            _emit(_json(result), args.out)
        else:
            _emit(_csv([result]), args.out)
        return 0
    inst = generate_instance(args.n, args.d, args.sigma2, args.seed, random_planted=False)
    mode = "exact" if inst.n <= EXACT_MATCHING_MAX_V else "greedy"
    g = build_aug_graph(aligned_inner_products(inst))
    match = max_matching(g, mode)
    sol = mle(inst)
    cycles = error_cycles(sol.permutation, inst.planted)
    rep = error_report(sol.permutation, inst.planted)
    result = {
        "n": inst.n,
        "d": inst.d,
        "sigma2": inst.sigma2,
        "seed": inst.seed,
        "aug_edges": len(g.edges),
        "M": match.size,
        "matching_mode": mode,
        "error_count": rep.error_count,
        "error_cycles": [list(c) for c in cycles],
    }
    if args.format == "json":
        _emit(_json(result), args.out)
    else:
        _emit(_csv([{"cycle": k, "length": len(c), "vertices": " ".join(map(str, c))} for k, c in enumerate(cycles)]),
              args.out)
    return 0


def _combinat_rows(table, t, seed, trials):
    if table == "matchings":
        return [{"t": t, "k": k, "count": c} for k, c in enumerate(cb.matchings_on_cycle(t).counts)]
    if table == "forests":
        m = cb.matchings_on_cycle(2 * t)
        return [
            {"t": t, "k": k, "E_k": v, "M_2t_k": m[k]} for k, v in cb.forest_counts_via_spectrum(t, exact=True).items()
        ]
    if table == "cycles":
        mode = "exhaustive" if t <= cb.EXHAUSTIVE_MAX_ELL else "sampled"
        dist = cb.cycle_count_distribution(t, mode, trials=trials, seed=seed)
        return [{"ell": t, "cycles": k, "probability": p, "source": dist.source} for k, p in sorted(dist.pmf.items())]
    if table == "mgf":
        rows = []
        for ell in range(4, t + 1, 2):
            for a in (float(ell), 2.0 * ell):
                lhs, rhs, ok, hyp = cb.cycle_mgf_bound_check(ell, a, "counting")
                rows.append({"ell": ell, "a": a, "mgf": lhs, "bound": rhs, "ok": ok,
                             "two_step_recurrence": float(cb.mgf_recurrence(ell, a))})
        return rows
    raise UsageError(f"unknown table {table!r}")


def cmd_combinat(args):
    if args.recipe:
        spec = ex.load_recipe(args.recipe)
        if not isinstance(spec, dict):
            raise UsageError("combinat --recipe needs a cycle_counts recipe")
        rows = []
        for table, ts in spec["tables"].items():
            for t in ts:
                rows.extend(_combinat_rows(table, int(t), args.seed, int(spec.get("trials", args.trials))))
    else:
        rows = _combinat_rows(args.table, args.t, args.seed, args.trials)
    _emit(_json(rows) if args.format == "json" else _csv(rows), args.out)
    return 0


def cmd_track(args):
    if args.recipe:
        cfg = ex.load_recipe(args.recipe)
        if not isinstance(cfg, ex.TrackingSweepConfig):
            raise UsageError("track --recipe needs a tracking recipe")
        if args.seed is not None:
            cfg = ex.TrackingSweepConfig.from_dict({**cfg.to_dict(), "master_seed": args.seed})
        rows = ex.run_tracking_sweep(cfg, progress=_progress)
        _emit(_json(rows) if args.format == "json" else _csv(rows), args.out)
        return 0
    seed = 0 if args.seed is None else args.seed
    if args.tmax:
        est = estimate_Tmax(args.n, args.d, args.delta, args.trials, args.K, seed, rescale=args.rescale)
        result = {"n": args.n, "d": args.d, "delta": args.delta, "K_cap": args.K, **asdict(est)}
        result["times"] = list(est.times)
        _emit(_json(result) if args.format == "json" else _csv([{k: v for k, v in result.items() if k != "times"}]),
              args.out)
        return 0
    run = simulate_tracking(args.n, args.d, args.delta, args.K, seed, rescale=args.rescale)
    if args.format == "json":
        result = {
            "n": run.n, "d": run.d, "delta": run.delta, "K": run.K, "seed": run.seed,
            "fixed_points": run.fixed_points.tolist(), "step_errors": run.step_errors.tolist(),
            "composed": run.composed.image.tolist(),
        }
        _emit(_json(result), args.out)
    else:
        _emit(tracking_csv(run), args.out)
    return 0


def cmd_sweep(args):
    cfg = ex.load_recipe(args.config)
    if isinstance(cfg, ex.TrackingSweepConfig):
        rows = ex.run_tracking_sweep(cfg, progress=_progress)
        _emit(_json(rows) if args.format == "json" else _csv(rows), args.out)
        return 0
    if not isinstance(cfg, ex.SweepConfig):
        raise UsageError("sweep --config needs a sweep or tracking recipe")
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.n:
        overrides["n"] = args.n
    if overrides:
        cfg = ex.SweepConfig.from_dict({**cfg.to_dict(), **overrides})
    _log(f"sweep: {len(ex.cells(cfg))} cells x {cfg.trials} trials")
    records = ex.run_sweep_sorted(cfg, workers=args.workers, progress=_progress)
    failed = sum(r.status != "ok" for r in records)
    if failed:
        _log(f"sweep: {failed} failed trial rows (kept in the output)")
    if args.format == "json":
        _emit(_json(ex.summarize(records)), args.out)
    else:
        _emit(ex.records_to_csv(records, include_timing=args.include_timing), args.out)
        if args.summary:
            Path(args.summary).write_text(_json(ex.summarize(records)))
    return 0


def cmd_verify(args):
    results = run_identities()
    rows = [{"identity": r.name, "ok": r.ok, "detail": r.detail, "seconds": round(r.seconds, 3)} for r in results]
    if args.format == "json":
        _emit(_json(rows), args.out)
    else:
        lines = [f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}" for r in results]
        _emit("\n".join(lines) + "\n", args.out)
    _log(f"info: two-step cycle MGF recurrence vs enumeration (a = 2): {mgf_recurrence_report()}")
    return 0 if all(r.ok for r in results) else 2


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="plantedmatch", description="Planted geometric matching: simulation, theory tables and checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default, help="random seed (default: %(default)s)")
        sp.add_argument("--format", choices=("csv", "json"), default="json", help="output format (default: %(default)s)")
        sp.add_argument("--out", help="write output to this file instead of stdout")

    def model_args(sp):
        sp.add_argument("--n", type=_positive_int, required=True, help="number of points")
        sp.add_argument("--d", type=_positive_int, required=True, help="dimension")
        sp.add_argument("--sigma2", type=_nonneg_float, required=True, help="noise variance")

    sp = sub.add_parser("gen", help="generate an instance")
    model_args(sp)
    sp.add_argument("--identity", action="store_true", help="use the identity as the planted matching")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("solve", help="solve an instance file or a CSV cost matrix")
    sp.add_argument("--instance", help="instance JSON written by 'gen'")
    sp.add_argument("--matrix", help="square cost matrix as comma-separated rows")
    sp.add_argument("--direction", choices=("minimize", "maximize"), default="minimize",
                    help="objective direction for --matrix (default: %(default)s)")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("theory", help="closed-form quantities for (n, d, sigma2)")
    model_args(sp)
    sp.add_argument("--tmax", type=_positive_int, default=20, help="largest cycle length in the tables")
    common(sp)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("augmenting", help="augmenting-cycle analysis of one instance, or edge probability")
    sp.add_argument("--n", type=_positive_int, default=50, help="number of points")
    sp.add_argument("--d", type=_positive_int, required=True, help="dimension")
    sp.add_argument("--sigma2", type=_nonneg_float, required=True, help="noise variance")
    sp.add_argument("--phat", action="store_true", help="estimate the augmenting-edge probability instead")
    sp.add_argument("--trials", type=_positive_int, default=100_000, help="Monte Carlo samples for --phat")
    sp.add_argument("--method", choices=("scalar", "two_point", "plain"), default="scalar",
                    help="sampler for --phat (default: %(default)s)")
    common(sp)
    sp.set_defaults(func=cmd_augmenting)

    sp = sub.add_parser("combinat", help="combinatorial tables")
    sp.add_argument("--table", choices=("matchings", "forests", "cycles", "mgf"), default="matchings",
                    help="which table (default: %(default)s)")
    sp.add_argument("--t", type=_positive_int, default=8, help="cycle length t or ell")
    sp.add_argument("--trials", type=_positive_int, default=100_000, help="samples for sampled cycle counts")
    sp.add_argument("--recipe", help="cycle_counts recipe JSON")
    common(sp)
    sp.set_defaults(func=cmd_combinat)

    sp = sub.add_parser("track", help="iterated-MLE tracking of Brownian particles")
    sp.add_argument("--n", type=_positive_int, default=100, help="number of particles")
    sp.add_argument("--d", type=_positive_int, default=2, help="dimension")
    sp.add_argument("--delta", type=float, default=1e-3, help="time between snapshots")
    sp.add_argument("--K", type=int, default=1000, help="number of steps (step cap with --tmax)")
    sp.add_argument("--tmax", action="store_true", help="estimate Tmax instead of one run")
    sp.add_argument("--trials", type=_positive_int, default=20, help="trials for --tmax")
    sp.add_argument("--rescale", action="store_true", help="rescale snapshots to unit empirical variance")
    sp.add_argument("--recipe", help="tracking recipe JSON")
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("sweep", help="Monte Carlo sweep from a JSON config")
    sp.add_argument("--config", required=True, help="sweep config or recipe JSON")
    sp.add_argument("--trials", type=_positive_int, help="override trials per cell")
    sp.add_argument("--n", type=_positive_int, nargs="+", help="override the n grid")
    sp.add_argument("--workers", type=_positive_int, help=f"worker processes (default: ${ex.THREADS_ENV} or 1)")
    sp.add_argument("--include-timing", action="store_true", help="add wall_time to the CSV")
    sp.add_argument("--summary", help="also write the JSON summary here (csv format)")
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_sweep, format="csv")

    sp = sub.add_parser("verify", help="run the analytic identity suite")
    common(sp)
    sp.set_defaults(func=cmd_verify, format="csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"plantedmatch {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"plantedmatch {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
