import numpy as np
import pytest

from xxzquench import ed
from xxzquench import protocol as P
from xxzquench.errors import CapacityError, ParameterError, ToleranceError
from xxzquench.model import ModelParams, build_h0
from xxzquench.observables import concurrence
from xxzquench.trajectory import QuenchTrajectory

BASE = ModelParams(N=8, Delta=1.0, J1=-0.1)
EXACT = P.EngineConfig(engine="exact")


def traj(values, dt=1.0):
    return QuenchTrajectory(None, "test", dt * np.arange(len(values)), values)


# -- find_peak ------------------------------------------------------------------


def test_peak_of_simple_series():
    assert P.find_peak(traj([0, 0.3, 0.7, 0.4])) == P.PeakSummary(0.7, 2.0, False)


def test_peak_of_constant_series_is_earliest():
    assert P.find_peak(traj([0.2] * 5)) == P.PeakSummary(0.2, 0.0, False)


def test_peak_of_rising_series_is_flagged():
    assert P.find_peak(traj([0, 0.1, 0.2, 0.3])).attained_at_boundary
    assert not P.find_peak(traj([0, 0.1, 0.3, 0.2])).attained_at_boundary


def test_peak_ties_resolved_within_tolerance():
    s = P.find_peak(traj([0, 0.5, 0.1, 0.5 + 5e-7, 0.2, 0.0]))
    assert s.t_max == 1.0
    assert s.c_max == pytest.approx(0.5 + 5e-7)
    s = P.find_peak(traj([0, 0.5, 0.1, 0.5 + 2e-6, 0.2, 0.0]))
    assert s.t_max == 3.0


def test_peak_single_sample():
    assert P.find_peak(traj([0.4])) == P.PeakSummary(0.4, 0.0, False)


# -- run_quench --------------------------------------------------------------------


def test_engine_config_resolution_and_validation():
    assert P.EngineConfig().resolve(12) == "exact"
    assert P.EngineConfig().resolve(13) == "mps"
    assert P.EngineConfig(engine="mps").resolve(4) == "mps"
    with pytest.raises(ParameterError):
        P.EngineConfig(engine="fast")
    with pytest.raises(ParameterError):
        P.EngineConfig(dt=0)


def test_exact_quench_grid_and_provenance():
    tr = P.run_quench(BASE, EXACT, window=10, sample_dt=0.5)
    np.testing.assert_allclose(tr.times, 0.5 * np.arange(21))
    assert tr.engine == "exact"
    assert tr.provenance["window"] == 10 and tr.provenance["dt"] == 0.05
    assert tr.extras["max_bloch"] < 1e-10
    assert np.all(tr.discarded_weight == 0)
    s = P.find_peak(tr)
    assert s.c_max == pytest.approx(0.8506, abs=1e-4)
    assert s.t_max == 6.0


def test_exact_and_mps_runs_agree():
    rep = P.validate_engines(BASE, window=12)
    assert rep["passed"]
    assert rep["max_deviation"] < 1e-3
    assert abs(rep["t_max_exact"] - rep["t_max_mps"]) <= 0.5


def test_validate_raises_on_breach():
    with pytest.raises(ToleranceError):
        P.validate_engines(BASE, P.EngineConfig(dt=0.25), window=10, tol=1e-6)


def test_quench_triviality_without_quench():
    p = ModelParams(N=6, Delta=1.0, J1=1.0)
    tr = P.run_quench(p, EXACT, window=5)
    np.testing.assert_allclose(tr.concurrence, tr.concurrence[0], atol=1e-10)
    assert P.find_peak(tr).t_max == 0
    assert tr.concurrence[0] == pytest.approx(P.static_end_to_end_concurrence(p), abs=1e-12)


def test_sample_dt_must_be_multiple_of_dt():
    with pytest.raises(ParameterError):
        P.run_quench(BASE, P.EngineConfig(engine="mps"), window=1, sample_dt=0.33)


def test_bad_window_rejected():
    with pytest.raises(ParameterError):
        P.run_quench(BASE, EXACT, window=0)


def test_odd_and_ferromagnetic_points_are_flagged():
    tr = P.run_quench(ModelParams(N=7, Delta=1.0, J1=-0.1), EXACT, window=2)
    assert "odd-N" in tr.warnings
    tr = P.run_quench(ModelParams(N=6, Delta=-1.5, J1=-0.1), EXACT, window=2)
    assert "ferromagnetic-regime" in tr.warnings
    assert "degenerate-ground-state" in tr.warnings


def test_exact_engine_capacity():
    with pytest.raises(CapacityError):
        P.run_quench(ModelParams(N=16, J1=-0.1), P.EngineConfig(engine="exact", ed_cap=14), window=1)


# -- sweeps -----------------------------------------------------------------------


def test_delta_sweep_sorted_and_single_point_matches_run():
    res = P.sweep_delta([1.0, 0.5], BASE, EXACT, window=12)
    assert res.values == [0.5, 1.0]
    assert res.extras["argmax"] == 1.0
    one = P.sweep_delta([1.0], BASE, EXACT, window=12)
    assert one.summaries[0] == P.find_peak(P.run_quench(BASE, EXACT, window=12))


def test_sweep_records_failures_and_continues():
    res = P.sweep_delta([1.0, 2.0], ModelParams(N=16, J1=-0.1), P.EngineConfig(engine="exact"), window=1)
    assert res.summaries == [None, None]
    assert set(res.failures) == {1.0, 2.0}
    assert "CapacityError" in res.failures[1.0]
    assert res.extras["argmax"] is None


def test_j1_sweep_zero_requires_override():
    with pytest.raises(ParameterError):
        P.sweep_j1([0.0, -0.1], BASE, EXACT, window=2)
    res = P.sweep_j1([0.0], BASE, EXACT, window=2, allow_zero=True)
    assert res.summaries[0].c_max < 1e-10


def test_j1_sweep_spread_excludes_positive_side():
    res = P.sweep_j1([-0.2, -0.1, 0.4], BASE, EXACT, window=14)
    assert res.extras["argmax"] == -0.2
    assert res.summary_for(0.4).c_max < res.summary_for(-0.1).c_max
    t = [res.summary_for(v).t_max for v in (-0.2, -0.1)]
    assert res.extras["t_max_spread_negative"] == pytest.approx((max(t) - min(t)) / np.mean(t))


def test_parallel_sweep_matches_serial():
    a = P.sweep_delta([0.5, 1.0], BASE, EXACT, window=8)
    b = P.sweep_delta([1.0, 0.5], BASE, EXACT, window=8, workers=2)
    assert a.values == b.values
    assert a.summaries == b.summaries


def test_size_sweep_windows_fit_and_xi():
    res = P.sweep_size([12, 8, 10], BASE, EXACT, keep_trajectories=True)
    assert res.values == [8, 10, 12]
    assert [tr.times[-1] for tr in res.trajectories] == [10.0, 12.0, 15.0]
    assert res.extras["fit"]["points"] == 3
    assert res.extras["fit"]["r2"] > 0.99
    assert res.extras["xi"][8] == pytest.approx(0.675)


def test_odd_sizes_are_flagged_not_dropped():
    res = P.sweep_size([6, 7], BASE, EXACT, window=6)
    assert res.extras["odd_sizes"] == [7]
    assert res.summary_for(7) is not None


def test_boundary_points_excluded_from_fit():
    res = P.sweep_size([6, 8, 10], BASE, EXACT, window=5)
    assert res.extras["fit"]["points"] < 3
    assert res.extras["excluded"]


def test_linear_fit_exact_line():
    f = P.linear_fit([1, 2, 3], [3, 5, 7])
    assert f["slope"] == pytest.approx(2)
    assert f["intercept"] == pytest.approx(1)
    assert f["r2"] == pytest.approx(1)


@pytest.mark.parametrize("N,expected", [(40, 0.3947), (60, 0.3448), (1, 1.35)])
def test_xi_baseline(N, expected):
    assert P.xi_baseline(N) == pytest.approx(expected, abs=1e-4)


def test_xi_baseline_rejects_zero():
    with pytest.raises(ParameterError):
        P.xi_baseline(0)


# -- temperature --------------------------------------------------------------------


def test_low_temperature_matches_ground_state_run():
    p = ModelParams(N=6, Delta=1.0, J1=-0.1)
    cold = P.find_peak(P.thermal_trajectory(p, 1e-3, window=10))
    pure = P.find_peak(P.run_quench(p, EXACT, window=10))
    assert abs(cold.c_max - pure.c_max) < 1e-3


def test_high_temperature_kills_entanglement():
    p = ModelParams(N=6, Delta=1.0, J1=-0.1)
    res = P.sweep_temperature([5.0, 0.05], p, window=10)
    assert res.values == [0.05, 5.0]
    assert res.summaries[1].c_max < 1e-3
    assert res.extras["threshold"] == 5.0


def test_thermal_t0_is_gibbs_end_to_end_concurrence():
    p = ModelParams(N=6, Delta=1.0, J1=-0.1)
    tr = P.thermal_trajectory(p, 0.2, window=1)
    rho = ed.thermal_density(build_h0(p), 6, 0.2)
    assert tr.concurrence[0] == pytest.approx(concurrence(ed.partial_trace_pair(rho, 1, 6)), abs=1e-12)


def test_temperature_threshold_bisection_brackets():
    p = ModelParams(N=6, Delta=1.0, J1=-0.1)
    kt = P.temperature_threshold(p, 0.05, 3.0, tol=0.05, window=10)
    below = P.find_peak(P.thermal_trajectory(p, kt - 0.05, window=10)).c_max
    above = P.find_peak(P.thermal_trajectory(p, kt + 0.05, window=10)).c_max
    assert below >= 1e-3 > above
    with pytest.raises(ParameterError):
        P.temperature_threshold(p, 3.0, 4.0, window=10)


def test_temperature_sweep_guards():
    with pytest.raises(ParameterError):
        P.sweep_temperature([0.0], BASE)
    with pytest.raises(CapacityError):
        P.sweep_temperature([0.5], ModelParams(N=12, J1=-0.1))
