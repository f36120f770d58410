import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crnsmap.evaluation import Cell, aggregate_runs, compare_conditions, mse, report_json
from crnsmap.exploration import GREEDY, MissionConfig, RunLog
from crnsmap.field import make_step_field
from crnsmap.grid import GridSpec
from crnsmap.sensor import SamplingRegime

SPEC = GridSpec.from_extent(60, 50, 5)
FIELDS = {"high": make_step_field(SPEC, 30.0, 2.5, 5.0)}


def fake_log(points):
    """RunLog with records at (elapsed, distance, mse)."""
    return RunLog({}, [{"elapsed": e, "distance": d, "mse": m} for e, d, m in points])


class TestMse:
    def test_identical(self):
        a = np.arange(6.0).reshape(2, 3)
        assert mse(a, a) == 0.0

    def test_example(self):
        assert mse([1.0, 2.0], [2.0, 4.0]) == 2.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))

    @given(arrays(float, 12, elements=st.floats(-1e3, 1e3)), arrays(float, 12, elements=st.floats(-1e3, 1e3)))
    def test_symmetric_nonnegative(self, a, b):
        assert mse(a, b) == mse(b, a) >= 0.0


class TestAggregate:
    def test_single_run(self):
        log = fake_log([(60.0, 10.0, 4.0), (180.0, 20.0, 2.0), (300.0, 30.0, 1.0)])
        c = aggregate_runs([log], "time", 60.0)
        np.testing.assert_array_equal(c.abscissa, [60, 120, 180, 240, 300])
        np.testing.assert_array_equal(c.mean, [4, 4, 2, 2, 1])
        np.testing.assert_array_equal(c.std, 0.0)
        assert c.n_runs == 1

    def test_two_constants(self):
        a = fake_log([(0.0, 0.0, 1.0), (600.0, 50.0, 1.0)])
        b = fake_log([(0.0, 0.0, 3.0), (600.0, 50.0, 3.0)])
        c = aggregate_runs([a, b], "distance", 10.0)
        np.testing.assert_array_equal(c.mean, 2.0)
        np.testing.assert_array_equal(c.std, 1.0)
        assert len(c.abscissa) == 6

    def test_locf_tail(self):
        a = fake_log([(0.0, 0.0, 5.0), (120.0, 5.0, 2.0)])
        b = fake_log([(0.0, 0.0, 5.0), (600.0, 5.0, 4.0)])
        c = aggregate_runs([a, b], "time", 60.0)
        # after 120 s run a stays at its final MSE of 2
        np.testing.assert_array_equal(c.mean[2:-1], 3.5)
        assert c.mean[-1] == 3.0

    def test_identical_logs(self):
        log = fake_log([(30.0, 3.0, 2.0), (100.0, 9.0, 1.5)])
        one = aggregate_runs([log], "time", 10.0)
        many = aggregate_runs([log] * 4, "time", 10.0)
        np.testing.assert_array_equal(one.mean, many.mean)
        np.testing.assert_array_equal(many.std, 0.0)

    def test_end_beyond_support_warns(self):
        log = fake_log([(0.0, 0.0, 1.0), (120.0, 10.0, 0.5)])
        with pytest.warns(UserWarning):
            c = aggregate_runs([log], "time", 60.0, end=600.0)
        assert c.abscissa[-1] == 120.0

    def test_errors(self):
        with pytest.raises(ValueError):
            aggregate_runs([])
        with pytest.raises(ValueError):
            aggregate_runs([fake_log([])])

    def test_csv(self):
        c = aggregate_runs([fake_log([(0.0, 0.0, 1.0)])], "time")
        assert c.to_csv().splitlines() == ["time,mean_mse,std_mse,n_runs", "0.0,1.0,0.0,1"]


def cell(name, regime, strategy=GREEDY):
    return Cell(name, "high", MissionConfig(strategy, regime, 3600.0))


class TestCompare:
    def test_single_cell_single_seed(self):
        report, curves, logs = compare_conditions([cell("g", SamplingRegime.ami(0.025))], FIELDS, [0])
        assert len(logs["g"]) == 1
        entry = report["cells"]["g"]
        assert entry["n_runs"] == 1
        assert entry["final_mse"]["mean"] == logs["g"][0].footer["final_mse"]
        assert entry["final_mse"]["std"] == 0.0
        assert report["pairwise"] == [] and not report["failed"]
        assert set(curves["g"]) == {"time", "distance"}

    def test_fmi_short_measures_more(self):
        cells = [cell("long", SamplingRegime.fmi(600)), cell("short", SamplingRegime.fmi(300))]
        report, _, logs = compare_conditions(cells, FIELDS, [0, 1, 2])
        for a, b in zip(logs["short"], logs["long"]):
            assert a.footer["n_measurements"] >= b.footer["n_measurements"]
        (pair,) = report["pairwise"]
        assert (pair["a"], pair["b"]) == ("long", "short")

    def test_reproducible_bytes(self):
        cells = [cell("a", SamplingRegime.ami(0.03)), cell("f", SamplingRegime.fmi(300))]
        r1, _, _ = compare_conditions(cells, FIELDS, [4, 5], horizon=1800.0)
        r2, _, _ = compare_conditions(cells, FIELDS, [4, 5], horizon=1800.0)
        assert report_json(r1) == report_json(r2)

    def test_parallel_matches_serial(self):
        cells = [cell("a", SamplingRegime.ami(0.03))]
        r1, _, _ = compare_conditions(cells, FIELDS, [0, 1], horizon=1800.0)
        r2, _, _ = compare_conditions(cells, FIELDS, [0, 1], horizon=1800.0, jobs=2)
        assert report_json(r1) == report_json(r2)

    def test_cell_error_recorded(self):
        bad = Cell("bad", "missing", MissionConfig(GREEDY, SamplingRegime.fmi(300), 600.0))
        report, _, _ = compare_conditions([bad, cell("ok", SamplingRegime.fmi(300))], FIELDS, [0], horizon=1200.0)
        assert report["failed"]
        assert report["cells"]["bad"]["errors"]
        assert report["cells"]["ok"]["n_runs"] == 1
