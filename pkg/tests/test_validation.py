import numpy as np
import pytest

from careflow.report import RunArtifacts
from careflow.scenario import Parameters
from careflow.transitions import FourByFour
from careflow.validation import (annualized_drift, determinism_check,
                                 icu_steady_state, pattern1_los,
                                 pattern2_capacity, pattern3_flows,
                                 write_summary)

PARAMS = Parameters()


def artifacts(census=None, census_icu=None, los=None, moves=None,
              categories=None, days=365):
    census = census or {}
    fids = sorted(census)
    return RunArtifacts(
        days=days, n_agents=1000, seed=1, facility_ids=fids,
        categories=categories or {fid: "STACH" for fid in fids},
        census={fid: np.asarray(v) for fid, v in census.items()},
        census_icu={fid: np.asarray(census_icu[fid]) if census_icu
                    else np.zeros(days, dtype=np.int64) for fid in census},
        los_stats=los or {}, moves=moves if moves is not None
        else np.zeros((4, 4)),
        init_census={fid: 0 for fid in fids},
        placeholders={fid: 0 for fid in fids})


def test_relative_error_definition():
    report = pattern1_los(
        artifacts(census={1: np.full(365, 50)},
                  los={1: (2000, 5.0, 2.0)}),
        {1: (5.2, 2.0)}, PARAMS)
    row = report.rows[0]
    assert row.relative_error == pytest.approx(abs(5.0 - 5.2) / 5.2)


def test_pattern1_gates_mean_and_sd():
    los = {1: (2000, 5.0, 2.0), 2: (2000, 5.0, 2.0), 3: (100, 9.9, 1.0)}
    expected = {1: (5.05, 2.02), 2: (6.0, 2.0), 3: (5.0, 1.0)}
    report = pattern1_los(
        artifacts(census={f: np.full(365, 10) for f in (1, 2, 3)}, los=los),
        expected, PARAMS)
    by_entity = {r.entity: r for r in report.rows}
    assert by_entity["1/mean"].passed and by_entity["1/mean"].checked
    assert not by_entity["2/mean"].passed  # 17% off
    assert not by_entity["3/mean"].checked  # below the admissions cutoff
    assert not report.passed


def test_pattern1_excludes_zero_admission_facilities():
    report = pattern1_los(
        artifacts(census={1: np.full(365, 10)}, los={1: (0, 0.0, 0.0)}),
        {1: (5.0, 2.0)}, PARAMS)
    assert report.rows == []
    assert report.passed


def test_constant_census_has_zero_slope():
    assert annualized_drift(np.full(365, 120.0)) == pytest.approx(0.0, abs=1e-12)


def test_drift_measures_trend():
    series = 1000.0 + np.arange(365) * (100.0 / 364.0)  # +10% over the year
    assert annualized_drift(series) == pytest.approx(0.1, abs=0.005)


def test_pattern2_flags_engineered_drift():
    """A 10%-per-year draining census must fail the trend gate."""
    days = np.arange(365, dtype=float)
    series = np.round(1000.0 - days * (100.0 / 364.0)).astype(int)
    report = pattern2_capacity(
        artifacts(census={1: series}), {1: float(series.mean())}, PARAMS)
    trend = [r for r in report.rows if r.entity.endswith("/trend")][0]
    assert trend.checked
    assert not trend.passed
    assert not report.passed


def test_pattern2_census_tolerance():
    report = pattern2_capacity(
        artifacts(census={1: np.full(365, 100), 2: np.full(365, 120),
                          3: np.full(365, 50)}),
        {1: 102.0, 2: 150.0, 3: 80.0}, PARAMS)
    rows = {r.entity: r for r in report.rows}
    assert rows["1/census"].passed and rows["1/census"].checked
    assert not rows["2/census"].passed       # 20% off, expected >= 100
    assert not rows["3/census"].checked      # small facility, informational


def test_pattern2_small_category_trend_not_gated():
    series = np.round(np.linspace(100, 90, 365)).astype(int)  # -10% drift
    report = pattern2_capacity(
        artifacts(census={1: series}, categories={1: "LTACH"}),
        {1: 95.0}, PARAMS)
    trend = [r for r in report.rows if r.entity == "LTACH/trend"][0]
    assert not trend.checked  # mean census below the power threshold


def test_pattern3_structural_zero_enforced():
    moves = np.zeros((4, 4))
    moves[0, 2] = 3.0  # community -> LTACH should be impossible
    targets = FourByFour(matrix=np.zeros((4, 4)))
    report = pattern3_flows(artifacts(census={}, moves=moves), targets, PARAMS)
    zero_row = [r for r in report.rows if r.entity == "COMMUNITY->LTACH"][0]
    assert not zero_row.passed
    assert not report.passed


def test_pattern3_tolerance_and_cutoff():
    targets = np.zeros((4, 4))
    targets[0, 1] = 100_000.0
    targets[1, 2] = 500.0
    moves = np.zeros((4, 4))
    moves[0, 1] = 96_000.0   # 4% low: pass
    moves[1, 2] = 5_000.0    # wildly off but below the target cutoff
    report = pattern3_flows(artifacts(census={}, moves=moves),
                            FourByFour(matrix=targets), PARAMS)
    rows = {r.entity: r for r in report.rows}
    assert rows["COMMUNITY->STACH"].passed and rows["COMMUNITY->STACH"].checked
    assert not rows["STACH->LTACH"].checked
    assert report.passed


def test_icu_trend_flags_drift():
    days = np.arange(365, dtype=float)
    drifting = np.round(800 + days * (160.0 / 364.0)).astype(int)
    art = artifacts(census={1: np.full(365, 900)},
                    census_icu={1: drifting})
    row = icu_steady_state(art, PARAMS)
    assert row.checked and not row.passed
    steady = artifacts(census={1: np.full(365, 900)},
                       census_icu={1: np.full(365, 800)})
    assert icu_steady_state(steady, PARAMS).passed


def test_determinism_check_detects_divergence(tmp_path):
    calls = {"n": 0}

    def flaky(out_dir):
        out_dir.mkdir(parents=True)
        calls["n"] += 1
        (out_dir / "events.csv").write_text(f"day\n{calls['n']}\n")

    ok, detail = determinism_check(flaky)
    assert not ok
    assert "events.csv" in detail

    def stable(out_dir):
        out_dir.mkdir(parents=True)
        (out_dir / "events.csv").write_text("day\n1\n")

    ok, detail = determinism_check(stable)
    assert ok and detail == ""


def test_summary_exit_semantics(tmp_path):
    report = pattern2_capacity(
        artifacts(census={1: np.full(365, 100)}), {1: 100.0}, PARAMS)
    ok = write_summary([report], [], tmp_path / "summary.csv")
    assert ok
    text = (tmp_path / "summary.csv").read_text()
    assert "1/census" in text
