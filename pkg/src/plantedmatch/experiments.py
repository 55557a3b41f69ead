"""Monte Carlo sweeps over (n, d, sigma2) with per-trial records and per-cell summaries.

A sweep is described by a JSON config::

    {
      "n": [200, 400],
      "d_rule": {"kind": "constant", "value": 2},        # or {"kind": "log", "a": 4}
                                                          # or {"kind": "superlog", "c": 1.0}
      "sigma2": {"kind": "threshold", "threshold": "perfect", "multipliers": [0.25, 1.0]},
                # or {"kind": "values", "values": [...]}
                # or {"kind": "power", "exponents": [-1.5]}   (sigma2 = n ** e)
      "trials": 50,
      "estimators": ["mle", "greedy_distance", "greedy_inner", "aug_matching_lower_bound"],
      "master_seed": 0,
      "random_planted": false,
      "paired_sigma2": true
    }

Omitted keys take the defaults of ``SweepConfig``.  Trial seeds are
``derive_seed(master_seed, n, d, trial)`` when ``paired_sigma2`` is true, so
every sigma2 of a given (n, d, trial) reuses the same x's and the same
standardized noise; otherwise the sigma2 index is also part of the key.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .augmenting import EXACT_MATCHING_MAX_V, build_aug_graph, max_matching
from .greedy import greedy_distance, greedy_inner_product
from .lap import mle
from .model import aligned_inner_products, derive_seed, error_report, generate_instance
from .theory import S, thresholds
from .tracking import estimate_Tmax

__all__ = [
    "SweepConfig",
    "TrialRecord",
    "ESTIMATORS",
    "CSV_SCHEMA",
    "resolve_d",
    "resolve_sigma2",
    "cells",
    "run_trial",
    "run_sweep",
    "run_sweep_sorted",
    "records_to_csv",
    "records_from_csv",
    "summarize",
    "predicted_log_rate",
    "two_cycle_rate",
    "error_rate_curve",
    "worker_count",
    "TrackingSweepConfig",
    "run_tracking_sweep",
    "load_recipe",
]

ESTIMATORS = ("mle", "greedy_distance", "greedy_inner", "aug_matching_lower_bound")
CSV_SCHEMA = "plantedmatch-trials/1"
THREADS_ENV = "PLANTEDMATCH_THREADS"


@dataclass(frozen=True)
class SweepConfig:
    n: tuple = (200,)
    d_rule: dict = field(default_factory=lambda: {"kind": "constant", "value": 2})
    sigma2: dict = field(default_factory=lambda: {"kind": "values", "values": [0.01]})
    trials: int = 10
    estimators: tuple = ("mle",)
    master_seed: int = 0
    random_planted: bool = False
    paired_sigma2: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.n or any(v < 2 for v in self.n):
            raise ValueError("n grid must be non-empty with every n >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ValueError(f"unknown or empty estimators: {sorted(bad)}")
        for n in self.n:
            resolve_d(self.d_rule, n)
            if not resolve_sigma2(self.sigma2, n, resolve_d(self.d_rule, n)):
                raise ValueError("sigma2 grid is empty")

    @classmethod
    def from_dict(cls, data: dict) -> SweepConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known - {"kind", "description"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path) -> SweepConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n"] = list(self.n)
        out["estimators"] = list(self.estimators)
        return out


@dataclass(frozen=True)
class TrialRecord:
    n: int
    d: int
    sigma2: float
    trial: int
    seed: int
    estimator: str
    error_count: int | None
    poly_rate: float | None
    M: int | None = None
    wall_time: float = 0.0
    status: str = "ok"
    message: str = ""

    def sort_key(self):
        return (self.n, self.d, self.sigma2, self.trial, ESTIMATORS.index(self.estimator))


def resolve_d(rule: dict, n: int) -> int:
    kind = rule.get("kind")
    if kind == "constant":
        d = int(rule["value"])
    elif kind == "log":
        d = int(round(float(rule["a"]) * math.log(n)))
    elif kind == "superlog":
        d = int(round(float(rule.get("c", 1.0)) * math.log(n) * math.log(math.log(n))))
    else:
        raise ValueError(f"unknown d rule {rule!r}")
    if d < 1:
        raise ValueError(f"d rule {rule!r} gives d = {d} at n = {n}")
    return d


def resolve_sigma2(spec: dict, n: int, d: int) -> list[float]:
    kind = spec.get("kind")
    if kind == "values":
        vals = [float(v) for v in spec["values"]]
    elif kind == "threshold":
        base = getattr(thresholds(n, d), spec.get("threshold", "perfect"))
        vals = [float(m) * base for m in spec["multipliers"]]
    elif kind == "power":
        vals = [float(n) ** float(e) for e in spec["exponents"]]
    else:
        raise ValueError(f"unknown sigma2 spec {spec!r}")
    if any(not (v >= 0 and math.isfinite(v)) for v in vals):
        raise ValueError("sigma2 values must be finite and non-negative")
    return vals


def cells(config: SweepConfig) -> list[tuple[int, int, int, float]]:
    """(n, d, sigma2 index, sigma2) in canonical order."""
    out = []
    for n in config.n:
        d = resolve_d(config.d_rule, n)
        for k, s2 in enumerate(resolve_sigma2(config.sigma2, n, d)):
            out.append((n, d, k, s2))
    return out


def _rate(count, n):
    return math.log(max(1, count)) / math.log(n)


def run_trial(n: int, d: int, sigma2: float, trial: int, seed: int, estimators, random_planted=False):
    """All requested estimators on one instance; failures become error rows."""
    out = []
    try:
        inst = generate_instance(n, d, sigma2, seed, random_planted=random_planted)
    except Exception as exc:  # noqa: BLE001 - isolate any failure into the record
        msg = f"{type(exc).__name__}: {exc}"
        return [TrialRecord(n, d, sigma2, trial, seed, e, None, None, status="error", message=msg) for e in estimators]
    m_value = None
    if "aug_matching_lower_bound" in estimators:
        t0 = time.perf_counter()
        try:
            mode = "exact" if n <= EXACT_MATCHING_MAX_V else "greedy"
            m_value = max_matching(build_aug_graph(aligned_inner_products(inst)), mode).size
            out.append(
                TrialRecord(n, d, sigma2, trial, seed, "aug_matching_lower_bound", m_value, _rate(m_value, n),
                            m_value, time.perf_counter() - t0)
            )
        except Exception as exc:  # noqa: BLE001
            out.append(TrialRecord(n, d, sigma2, trial, seed, "aug_matching_lower_bound", None, None,
                                   status="error", message=f"{type(exc).__name__}: {exc}"))
    for est in estimators:
        if est == "aug_matching_lower_bound":
            continue
        t0 = time.perf_counter()
        try:
            if est == "mle":
                count = error_report(mle(inst).permutation, inst.planted).error_count
            elif est == "greedy_distance":
                count = greedy_distance(inst).error_count
            else:
                count = greedy_inner_product(inst).error_count
            out.append(
                TrialRecord(n, d, sigma2, trial, seed, est, count, _rate(count, n),
                            m_value if est == "mle" else None, time.perf_counter() - t0)
            )
        except Exception as exc:  # noqa: BLE001
            out.append(TrialRecord(n, d, sigma2, trial, seed, est, None, None, status="error",
                                   message=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=2)}"))
    return out


def _trial_seed(config, n, d, k, trial):
    if config.paired_sigma2:
        return derive_seed(config.master_seed, n, d, trial)
    return derive_seed(config.master_seed, n, d, k, trial)


def _run_task(args):
    return run_trial(*args)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(config: SweepConfig, workers: int | None = None, progress=None):
    """Yield TrialRecords as trials complete (order depends on scheduling)."""
    workers = worker_count() if workers is None else max(1, int(workers))
    tasks = []
    for n, d, k, s2 in cells(config):
        for trial in range(config.trials):
            tasks.append(
                (n, d, s2, trial, _trial_seed(config, n, d, k, trial), config.estimators, config.random_planted)
            )
    done = 0
    if workers == 1:
        for task in tasks:
            yield from _run_task(task)
            done += 1
            if progress:
                progress(done, len(tasks))
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_task, task) for task in tasks]
        for fut in as_completed(futures):
            yield from fut.result()
            done += 1
            if progress:
                progress(done, len(tasks))


def run_sweep_sorted(config: SweepConfig, workers: int | None = None, progress=None) -> list[TrialRecord]:
    return sorted(run_sweep(config, workers, progress), key=TrialRecord.sort_key)


_COLUMNS = ["n", "d", "sigma2", "trial", "seed", "estimator", "error_count", "poly_rate", "M", "status", "message"]


def records_to_csv(records, include_timing: bool = False) -> str:
    """Canonically sorted CSV; the first line names the schema version.

    Wall times are left out by default so that reruns are byte-identical.
    """
    cols = _COLUMNS + (["wall_time"] if include_timing else [])
    buf = io.StringIO()
    buf.write(f"# schema: {CSV_SCHEMA}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in sorted(records, key=TrialRecord.sort_key):
        row = asdict(r)
        row["sigma2"] = repr(r.sigma2)
        row["poly_rate"] = "" if r.poly_rate is None else repr(r.poly_rate)
        row["wall_time"] = f"{r.wall_time:.6f}"
        wr.writerow(["" if row[c] is None else row[c] for c in cols])
    return buf.getvalue()


def records_from_csv(text: str) -> list[TrialRecord]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise ValueError("missing schema line")
    version = lines[0].split(":", 1)[1].strip()
    if version != CSV_SCHEMA:
        raise ValueError(f"unsupported schema {version!r}")
    out = []
    for row in csv.DictReader(lines[1:]):
        def opt(key, conv):
            v = row.get(key, "")
            return conv(v) if v not in ("", None) else None

        out.append(
            TrialRecord(
                n=int(row["n"]),
                d=int(row["d"]),
                sigma2=float(row["sigma2"]),
                trial=int(row["trial"]),
                seed=int(row["seed"]),
                estimator=row["estimator"],
                error_count=opt("error_count", int),
                poly_rate=opt("poly_rate", float),
                M=opt("M", int),
                wall_time=opt("wall_time", float) or 0.0,
                status=row["status"],
                message=row["message"],
            )
        )
    return out


def predicted_log_rate(a: float, sigma2: float) -> float:
    """Limit of log(1 v |E|)/log n for d ~ a log n inside the sublinear window, else nan.

    Equals 0 below the window (perfect recovery).
    """
    lower = 1.0 / math.expm1(4.0 / a)
    upper = 1.0 / ((2.0 * math.exp(1.0 / a) - 1.0) ** 2 - 1.0)
    if sigma2 < lower:
        return 0.0
    if sigma2 < upper:
        return 2.0 - 0.5 * a * math.log1p(1.0 / sigma2)
    return math.nan


def two_cycle_rate(a: float, sigma2: float) -> float:
    """Growth exponent of the mass of augmenting 2-cycles, clipped to [0, 1]."""
    return min(1.0, max(0.0, 2.0 - 0.5 * a * math.log1p(1.0 / sigma2)))


def summarize(records) -> list[dict]:
    """Per (n, d, sigma2, estimator) aggregates with theory annotations."""
    records = [r for r in records]
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.d, r.sigma2, r.estimator), []).append(r)
    out = []
    for (n, d, s2, est), rs in sorted(groups.items(), key=lambda kv: (*kv[0][:3], ESTIMATORS.index(kv[0][3]))):
        ok = [r for r in rs if r.status == "ok"]
        errs = np.array([r.error_count for r in ok], dtype=float)
        rates = np.array([r.poly_rate for r in ok], dtype=float)
        th = thresholds(n, d)
        row = {
            "n": n,
            "d": d,
            "sigma2": s2,
            "estimator": est,
            "trials": len(rs),
            "failed": len(rs) - len(ok),
        }
        if ok:
            q_err = np.quantile(errs, [0.1, 0.5, 0.9])
            q_rate = np.quantile(rates, [0.1, 0.5, 0.9])
            row.update(
                error_mean=float(errs.mean()),
                error_std=float(errs.std(ddof=1)) if errs.size > 1 else 0.0,
                error_q10=float(q_err[0]),
                error_q50=float(q_err[1]),
                error_q90=float(q_err[2]),
                rate_mean=float(rates.mean()),
                rate_std=float(rates.std(ddof=1)) if rates.size > 1 else 0.0,
                rate_q10=float(q_rate[0]),
                rate_q50=float(q_rate[1]),
                rate_q90=float(q_rate[2]),
                zero_error_fraction=float(np.mean(errs == 0)),
            )
        row.update(
            perfect_threshold=th.perfect,
            strong_threshold=th.strong_conjectured,
            greedy_third_threshold=th.greedy_third,
            c2=2.0 - d * S(s2, 2) / (2.0 * math.log(n)) if s2 > 0 else -math.inf,
        )
        out.append(row)
    return out


def error_rate_curve(a: float, sigma2_grid, n_list, trials: int, master_seed: int = 0, workers=None) -> list[dict]:
    """Mean MLE polynomial error rate at d = round(a log n) against the predicted curve.

    The predictions use the effective a = d / log n of the rounded dimension.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    config = SweepConfig(
        n=tuple(n_list),
        d_rule={"kind": "log", "a": a},
        sigma2={"kind": "values", "values": list(sigma2_grid)},
        trials=trials,
        estimators=("mle", "aug_matching_lower_bound"),
        master_seed=master_seed,
    )
    rows = []
    summary = summarize(run_sweep(config, workers))
    for row in summary:
        if row["estimator"] != "mle":
            continue
        a_eff = row["d"] / math.log(row["n"])
        m_row = next(
            r for r in summary
            if r["estimator"] == "aug_matching_lower_bound" and (r["n"], r["sigma2"]) == (row["n"], row["sigma2"])
        )
        rows.append(
            {
                "n": row["n"],
                "d": row["d"],
                "sigma2": row["sigma2"],
                "trials": row["trials"],
                "rate_mean": row.get("rate_mean", math.nan),
                "rate_std": row.get("rate_std", math.nan),
                "M_rate_mean": m_row.get("rate_mean", math.nan),
                "predicted": predicted_log_rate(a_eff, row["sigma2"]),
                "two_cycle_curve": two_cycle_rate(a_eff, row["sigma2"]),
            }
        )
    return rows


@dataclass(frozen=True)
class TrackingSweepConfig:
    """Tmax over a delta grid per dimension.  K_cap per point is ceil(cap_time / delta)."""

    n: int = 100
    deltas: dict = field(default_factory=lambda: {"1": [1e-4, 1e-5, 1e-6, 1e-7], "3": [1e-1, 1e-2, 1e-3, 1e-4]})
    trials: int = 20
    cap_time: float = 2.0
    master_seed: int = 7
    rescale: bool = False

    def __post_init__(self):
        if self.n < 2 or self.trials < 1 or not self.cap_time > 0:
            raise ValueError("need n >= 2, trials >= 1 and cap_time > 0")
        if not self.deltas or any(not v for v in self.deltas.values()):
            raise ValueError("delta grid must be non-empty")
        for d, grid in self.deltas.items():
            if int(d) < 1 or any(not dl > 0 for dl in grid):
                raise ValueError(f"bad delta grid for d = {d}")

    @classmethod
    def from_dict(cls, data: dict) -> TrackingSweepConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known - {"kind", "description"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        kw = {k: v for k, v in data.items() if k in known}
        if "deltas" in kw:
            kw["deltas"] = {str(k): [float(x) for x in v] for k, v in kw["deltas"].items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


def run_tracking_sweep(config: TrackingSweepConfig, progress=None) -> list[dict]:
    """One row per (d, delta).  All deltas of a dimension share trial seeds."""
    rows = []
    for d in sorted(config.deltas, key=int):
        for delta in config.deltas[d]:
            cap = int(math.ceil(config.cap_time / delta - 1e-9))
            est = estimate_Tmax(config.n, int(d), delta, config.trials, cap, config.master_seed, config.rescale)
            rows.append(
                {
                    "n": config.n,
                    "d": int(d),
                    "delta": float(delta),
                    "trials": config.trials,
                    "K_cap": cap,
                    "Tmax_mean": est.mean,
                    "Tmax_stderr": est.stderr,
                    "Tmax_restricted_mean": est.restricted_mean,
                    "censored_fraction": est.censored_fraction,
                    "heuristic": delta ** (1.0 - int(d) / 2.0) / config.n,
                }
            )
            if progress:
                progress(len(rows), sum(len(v) for v in config.deltas.values()))
    return rows


def load_recipe(path):
    """A recipe JSON is a sweep config, a tracking config (``kind`` "tracking")
    or a plain dict of cycle-count table parameters (``kind`` "cycle_counts")."""
    data = json.loads(Path(path).read_text())
    if data.get("kind") == "cycle_counts":
        return data
    if data.get("kind") == "tracking":
        return TrackingSweepConfig.from_dict(data)
    return SweepConfig.from_dict(data)
