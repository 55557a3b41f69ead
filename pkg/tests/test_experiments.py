import json
import math
from importlib import resources

import pytest

from plantedmatch import experiments as ex
from plantedmatch.experiments import (
    SweepConfig,
    TrackingSweepConfig,
    TrialRecord,
    cells,
    load_recipe,
    predicted_log_rate,
    records_from_csv,
    records_to_csv,
    resolve_d,
    run_sweep_sorted,
    run_tracking_sweep,
    summarize,
    two_cycle_rate,
)


def _cfg(**kw):
    base = dict(n=(40,), sigma2={"kind": "values", "values": [0.01, 0.05]}, trials=3,
                estimators=("mle", "greedy_distance", "greedy_inner", "aug_matching_lower_bound"), master_seed=3)
    base.update(kw)
    return SweepConfig(**base)


def test_single_cell_single_trial():
    recs = run_sweep_sorted(SweepConfig(n=(20,), trials=1))
    assert len(recs) == 1 and recs[0].estimator == "mle" and recs[0].status == "ok"


def test_rerun_is_byte_identical():
    cfg = _cfg()
    assert records_to_csv(run_sweep_sorted(cfg)) == records_to_csv(run_sweep_sorted(cfg))


def test_workers_do_not_change_output():
    cfg = _cfg(n=(30, 50))
    assert records_to_csv(run_sweep_sorted(cfg, workers=2)) == records_to_csv(run_sweep_sorted(cfg, workers=1))


def test_csv_round_trip():
    recs = run_sweep_sorted(_cfg())
    text = records_to_csv(recs)
    assert text.startswith("# schema: plantedmatch-trials/1\n")
    assert "wall_time" not in text.splitlines()[1]
    back = records_from_csv(text)
    strip = [TrialRecord(**{**r.__dict__, "wall_time": 0.0}) for r in recs]
    assert back == strip
    assert "wall_time" in records_to_csv(recs, include_timing=True).splitlines()[1]
    with pytest.raises(ValueError):
        records_from_csv(text.replace("trials/1", "trials/9"))


def test_records_are_consistent():
    for r in run_sweep_sorted(_cfg()):
        assert r.poly_rate == pytest.approx(math.log(max(1, r.error_count)) / math.log(r.n))
        assert 0 <= r.error_count <= r.n


def test_seeds_unique_per_cell_and_paired_over_sigma2():
    recs = [r for r in run_sweep_sorted(_cfg(n=(30, 40), trials=4)) if r.estimator == "mle"]
    by_sigma = {}
    for r in recs:
        by_sigma.setdefault(r.sigma2, set()).add((r.n, r.trial, r.seed))
    a, b = by_sigma.values()
    assert a == b
    assert len({s for _, _, s in a}) == len(a)
    unpaired = [r for r in run_sweep_sorted(_cfg(trials=2, paired_sigma2=False)) if r.estimator == "mle"]
    assert len({r.seed for r in unpaired}) == len(unpaired)


def test_failed_trials_become_rows(monkeypatch):
    def boom(*_a, **_k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(ex, "mle", boom)
    recs = run_sweep_sorted(_cfg(trials=2), workers=1)
    bad = [r for r in recs if r.estimator == "mle"]
    assert bad and all(r.status == "error" and "solver exploded" in r.message for r in bad)
    assert all(r.status == "ok" for r in recs if r.estimator != "mle")
    rows = summarize(recs)
    assert all(row["failed"] == row["trials"] for row in rows if row["estimator"] == "mle")


def test_summarize():
    rec = TrialRecord(50, 2, 0.1, 0, 1, "mle", 7, math.log(7) / math.log(50))
    (row,) = summarize([rec])
    assert row["error_mean"] == 7 and row["error_std"] == 0 and row["zero_error_fraction"] == 0
    assert row["perfect_threshold"] < row["strong_threshold"] < row["greedy_third_threshold"]
    with pytest.raises(ValueError):
        summarize([])


def test_cross_estimator_consistency():
    recs = run_sweep_sorted(_cfg(n=(60,), sigma2={"kind": "values", "values": [0.005, 0.02]}, trials=10))
    by = {(r.sigma2, r.trial, r.estimator): r for r in recs}
    for (s2, t, est), r in by.items():
        if est == "mle":
            assert r.M == by[(s2, t, "aug_matching_lower_bound")].error_count <= r.error_count
    for row in summarize(recs):
        if row["estimator"] == "mle":
            inner = next(x for x in summarize(recs) if x["sigma2"] == row["sigma2"] and x["estimator"] == "greedy_inner")
            assert row["error_mean"] <= inner["error_mean"]


def test_zero_fraction_monotone_in_sigma2():
    cfg = SweepConfig(n=(100,), sigma2={"kind": "threshold", "multipliers": [0.25, 1, 4, 16, 64]}, trials=30,
                      master_seed=11)
    rows = summarize(run_sweep_sorted(cfg))
    fr = [row["zero_error_fraction"] for row in rows]
    assert all(b <= a + 0.05 for a, b in zip(fr, fr[1:]))
    assert fr[0] >= 0.9


def test_threshold_cell_mean_bounded():
    cfg = SweepConfig(n=(200, 400, 800), sigma2={"kind": "threshold", "multipliers": [1.0]}, trials=30,
                      master_seed=12)
    for row in summarize(run_sweep_sorted(cfg, workers=2)):
        assert row["error_mean"] <= 10


def test_predicted_log_rate_edges():
    a = 4.0
    lower = 1 / math.expm1(4 / a)
    upper = 1 / ((2 * math.exp(1 / a) - 1) ** 2 - 1)
    assert predicted_log_rate(a, lower) == pytest.approx(0.0, abs=1e-12)
    assert predicted_log_rate(a, upper * (1 - 1e-12)) == pytest.approx(2 - a * math.log(2 * math.exp(1 / a) - 1))
    assert predicted_log_rate(a, lower / 2) == 0.0
    assert math.isnan(predicted_log_rate(a, 2 * upper))
    assert two_cycle_rate(a, 10.0) == 1.0 and two_cycle_rate(a, 1e-3) == 0.0


def test_d_rules():
    assert resolve_d({"kind": "constant", "value": 3}, 100) == 3
    assert resolve_d({"kind": "log", "a": 4}, 2000) == 30
    assert resolve_d({"kind": "superlog", "c": 1}, 1000) == round(math.log(1000) * math.log(math.log(1000)))
    for bad in ({"kind": "log", "a": 0.01}, {"kind": "cubic"}):
        with pytest.raises(ValueError):
            resolve_d(bad, 100)


def test_config_validation():
    for kw in ({"n": ()}, {"trials": 0}, {"estimators": ("oracle",)}, {"estimators": ()},
               {"sigma2": {"kind": "values", "values": []}}, {"sigma2": {"kind": "values", "values": [-1]}}):
        with pytest.raises(ValueError):
            _cfg(**kw)
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"n": [10], "colour": "red"})
    cfg = _cfg()
    assert SweepConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert len(cells(cfg)) == 2


def test_error_rate_curve_columns():
    rows = ex.error_rate_curve(4.0, [0.6], [50], trials=2, master_seed=1)
    (row,) = rows
    d = 16
    assert row["d"] == d
    assert row["predicted"] == pytest.approx(predicted_log_rate(d / math.log(50), 0.6))
    assert {"rate_mean", "M_rate_mean", "two_cycle_curve"} <= set(row)
    with pytest.raises(ValueError):
        ex.error_rate_curve(0.0, [0.6], [50], trials=1)


def test_tracking_sweep_small():
    cfg = TrackingSweepConfig(n=10, deltas={"1": [1e-2, 1e-3]}, trials=10, cap_time=0.5, master_seed=2)
    rows = run_tracking_sweep(cfg)
    assert [r["delta"] for r in rows] == [1e-2, 1e-3]
    assert rows[0]["K_cap"] == 50 and rows[1]["K_cap"] == 500
    assert all(0 <= r["censored_fraction"] <= 1 for r in rows)


@pytest.mark.parametrize("name", ["fig3_tracking.json", "fig5_error_rate.json", "cycle_counts.json"])
def test_recipes_load(name):
    path = resources.files("plantedmatch") / "recipes" / name
    obj = load_recipe(path)
    expected = {"fig3_tracking.json": TrackingSweepConfig, "fig5_error_rate.json": SweepConfig,
                "cycle_counts.json": dict}[name]
    assert isinstance(obj, expected)


def test_threads_env(monkeypatch):
    monkeypatch.setenv(ex.THREADS_ENV, "3")
    assert ex.worker_count() == 3
    monkeypatch.setenv(ex.THREADS_ENV, "many")
    assert ex.worker_count() == 1
