import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnsmap.observations import ObservationRecord
from crnsmap.variography import (
    EmpiricalVariogram,
    VariogramError,
    VariogramFitWarning,
    VariogramModel,
    empirical_variogram,
    fit_gaussian_model,
    model_gamma,
    weighted_mean_rate,
    write_variogram_csv,
)

from oracles import naive_variogram


def obs_from(rates_durations, spacing=10.0):
    return [ObservationRecord(spacing * k, 0.0, t, r * t) for k, (r, t) in enumerate(rates_durations)]


def synthetic_emp(params, lags):
    model = VariogramModel(*params)
    g = model_gamma(model, lags)
    n = len(lags)
    return EmpiricalVariogram(
        lags=np.asarray(lags, float),
        gamma=g,
        weights=np.ones(n),
        pair_counts=np.ones(n, int),
        raw_gamma=g,
        bin_width=float(lags[1] - lags[0]),
        max_lag=float(lags[-1]),
        mean_rate=1.0,
        rate_variance=float(g.max()),
    )


class TestWeightedMeanRate:
    def test_constant(self):
        assert weighted_mean_rate(obs_from([(2, 10), (2, 50), (2, 7)])) == pytest.approx(2.0)

    def test_equal_durations(self):
        obs = [ObservationRecord(0, 0, 50, 100), ObservationRecord(1, 0, 50, 300)]
        assert weighted_mean_rate(obs) == pytest.approx(4.0)

    def test_unequal_durations(self):
        obs = [ObservationRecord(0, 0, 100, 100), ObservationRecord(1, 0, 50, 300)]
        assert weighted_mean_rate(obs) == pytest.approx(2.6666666666666665, rel=1e-15)

    def test_empty(self):
        with pytest.raises(VariogramError):
            weighted_mean_rate([])

    @given(
        st.lists(st.tuples(st.integers(0, 5000), st.integers(1, 1000)), min_size=1, max_size=10),
        st.data(),
    )
    def test_split_invariance(self, items, data):
        obs = [ObservationRecord(k, 0, t, c) for k, (c, t) in enumerate(items)]
        k = data.draw(st.integers(0, len(obs) - 1))
        o = obs[k]
        c1 = data.draw(st.floats(0, o.counts))
        t1 = data.draw(st.floats(0.01, 0.99)) * o.duration
        split = obs[:k] + [
            ObservationRecord(o.x, o.y, t1, c1),
            ObservationRecord(o.x, o.y, o.duration - t1, o.counts - c1),
        ] + obs[k + 1 :]
        assert weighted_mean_rate(split) == pytest.approx(weighted_mean_rate(obs), rel=1e-12, abs=1e-12)


class TestEmpiricalVariogram:
    def test_single_pair(self):
        obs = [ObservationRecord(0, 0, 100, 300), ObservationRecord(5, 0, 100, 500)]
        emp = empirical_variogram(obs, bin_width=10, max_lag=50)
        assert len(emp) == 1
        assert emp.weights[0] == pytest.approx(50.0)
        assert emp.gamma[0] == pytest.approx(1.96, rel=1e-12)
        assert emp.lags[0] == 5.0

    def test_identical_rates_floored(self):
        obs = [ObservationRecord(x, y, 100, 300) for x, y in [(0, 0), (3, 4), (20, 0), (0, 25)]]
        emp = empirical_variogram(obs, bin_width=10, max_lag=100)
        assert np.all(emp.raw_gamma < 0)
        assert np.all(emp.gamma == 0)

    def test_doubling_durations(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0, 60, (12, 2))
        rates = rng.uniform(2, 5, 12)
        t = rng.uniform(100, 600, 12)
        a = [ObservationRecord(x, y, ti, r * ti) for (x, y), r, ti in zip(pts, rates, t)]
        b = [ObservationRecord(x, y, 2 * ti, r * 2 * ti) for (x, y), r, ti in zip(pts, rates, t)]
        ea = empirical_variogram(a, 10, 40)
        eb = empirical_variogram(b, 10, 40)
        np.testing.assert_allclose(eb.weights, 2 * ea.weights, rtol=1e-12)
        # rate-difference term (gamma + m_hat * pairs / (2 N)) is unchanged
        sq_a = ea.raw_gamma + ea.mean_rate * ea.pair_counts / (2 * ea.weights)
        sq_b = eb.raw_gamma + eb.mean_rate * eb.pair_counts / (2 * eb.weights)
        np.testing.assert_allclose(sq_a, sq_b, rtol=1e-12)
        oracle = naive_variogram(pts.tolist(), [o.counts for o in b], [o.duration for o in b], 10, 40)
        np.testing.assert_allclose(eb.raw_gamma, [oracle[k][0] for k in sorted(oracle)], rtol=1e-12)

    @given(st.integers(2, 50), st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_matches_pairwise_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0, 100, (n, 2))
        t = rng.integers(1, 100, n) * 10.0
        c = rng.poisson(3.0 * t).astype(float)
        obs = [ObservationRecord(x, y, ti, ci) for (x, y), ti, ci in zip(pts, t, c)]
        oracle = naive_variogram(pts.tolist(), c.tolist(), t.tolist(), 10.0, 70.0)
        if not oracle:
            with pytest.raises(VariogramError):
                empirical_variogram(obs, 10.0, 70.0)
            return
        emp = empirical_variogram(obs, 10.0, 70.0)
        keys = sorted(oracle)
        np.testing.assert_array_equal(emp.lags, [(k + 0.5) * 10.0 for k in keys])
        np.testing.assert_allclose(emp.raw_gamma, [oracle[k][0] for k in keys], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(emp.weights, [oracle[k][1] for k in keys], rtol=1e-12)
        np.testing.assert_array_equal(emp.pair_counts, [oracle[k][2] for k in keys])

    def test_all_beyond_max_lag(self):
        obs = [ObservationRecord(0, 0, 10, 10), ObservationRecord(100, 0, 10, 10)]
        with pytest.raises(VariogramError):
            empirical_variogram(obs, 10, 50)

    def test_needs_distinct(self):
        with pytest.raises(VariogramError):
            empirical_variogram([ObservationRecord(0, 0, 10, 10)] * 2, 10, 50)


class TestModel:
    def test_at_zero(self):
        assert model_gamma(VariogramModel(0.3, 10, 2), 0.0) == 0.3

    def test_asymptote(self):
        m = VariogramModel(0.3, 10, 2)
        assert model_gamma(m, 100.0) == pytest.approx(2.0, abs=1e-9)

    def test_values(self):
        assert model_gamma(VariogramModel(0, 10, 2), 10.0) == pytest.approx(1.2642411176571153, rel=1e-14)
        assert model_gamma(VariogramModel(0.5, 20, 3), 20.0) == pytest.approx(2.080301397071394, rel=1e-14)

    @given(st.floats(0, 5), st.floats(0.1, 100), st.floats(0, 5))
    def test_monotone(self, p0, p1, extra):
        m = VariogramModel(p0, p1, p0 + extra)
        g = model_gamma(m, np.linspace(0, 500, 200))
        assert np.all(np.diff(g) >= -1e-12)

    @pytest.mark.parametrize("params", [(-0.1, 10, 1), (0, 0, 1), (1, 10, 0.5)])
    def test_invalid(self, params):
        with pytest.raises(VariogramError):
            VariogramModel(*params)


class TestFit:
    lags = np.arange(1, 9) * 3.0

    def test_roundtrip(self):
        m = fit_gaussian_model(synthetic_emp((0.0, 10.0, 2.0), self.lags))
        assert m.params == pytest.approx((0.0, 10.0, 2.0), abs=1e-3)
        assert m.source == "fit"

    def test_roundtrip_with_nugget(self):
        m = fit_gaussian_model(synthetic_emp((0.4, 12.0, 2.5), self.lags))
        assert m.params == pytest.approx((0.4, 12.0, 2.5), abs=1e-3)

    @pytest.mark.parametrize("c", [0.01, 3.0, 50.0])
    def test_scale_consistency(self, c):
        base = fit_gaussian_model(synthetic_emp((0.2, 10.0, 2.0), self.lags))
        emp = synthetic_emp((0.2, 10.0, 2.0), self.lags)
        scaled = EmpiricalVariogram(**{**emp.__dict__, "gamma": c * emp.gamma, "rate_variance": c * emp.rate_variance})
        m = fit_gaussian_model(scaled)
        assert m.nugget == pytest.approx(c * base.nugget, rel=1e-6, abs=1e-9)
        assert m.sill == pytest.approx(c * base.sill, rel=1e-6)
        assert m.range == pytest.approx(base.range, rel=1e-6)

    def test_fitted_gamma_zero_is_nugget(self):
        m = fit_gaussian_model(synthetic_emp((0.4, 12.0, 2.5), self.lags))
        assert model_gamma(m, 0.0) == m.nugget

    def test_too_few_bins_fallback(self):
        emp = synthetic_emp((0.0, 10.0, 2.0), self.lags[:2])
        prior = VariogramModel(0.0, 30.0, 1.0)
        with pytest.warns(VariogramFitWarning):
            m = fit_gaussian_model(emp, fallback=prior)
        assert m.params == prior.params and m.source == "prior"
        with pytest.raises(VariogramError):
            fit_gaussian_model(emp)

    def test_csv_export(self, tmp_path):
        emp = synthetic_emp((0.0, 10.0, 2.0), self.lags)
        m = fit_gaussian_model(emp)
        write_variogram_csv(tmp_path / "v.csv", emp, m)
        lines = (tmp_path / "v.csv").read_text().splitlines()
        assert lines[0] == "h,gamma_hat,weight,pairs,gamma_fit"
        assert len(lines) == 1 + len(self.lags)
        h, g, _, _, gf = lines[3].split(",")
        assert float(gf) == pytest.approx(float(g), abs=1e-6)
        assert math.isclose(float(h), self.lags[2])
