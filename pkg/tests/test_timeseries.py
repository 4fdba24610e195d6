import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sociotech import timeseries as ts
from sociotech.errors import MalformedRow, NonMonotonicTime, NonPositiveValue, TooFewPoints


def series(points, unit=""):
    return ts.TimeSeries("s", unit, tuple(points))


class TestLoadCsv:
    def test_simple(self):
        s = ts.load_csv(b"t,value\n0,1\n1,2\n2,4")
        assert s.points == ((0.0, 1.0), (1.0, 2.0), (2.0, 4.0))

    def test_text_and_streams(self):
        text = "t,value\n0,1\n1,2\n2,4\n"
        assert ts.load_csv(text) == ts.load_csv(io.BytesIO(text.encode())) == ts.load_csv(io.StringIO(text))

    def test_duplicate_time(self):
        with pytest.raises(NonMonotonicTime):
            ts.load_csv(b"t,value\n1,5\n1,6")

    def test_decreasing_time(self):
        with pytest.raises(NonMonotonicTime):
            ts.load_csv(b"t,value\n0,1\n2,2\n1,3")

    @pytest.mark.parametrize("body", ["t,value\n0,1\nx,2\n2,3", "t,value\n0,1\n1,\n2,3", "t,value\n0,1,9\n1,2\n2,3"])
    def test_malformed(self, body):
        with pytest.raises(MalformedRow):
            ts.load_csv(body)

    def test_bad_header(self):
        with pytest.raises(MalformedRow):
            ts.load_csv("time,v\n0,1\n1,2\n2,3")

    def test_non_finite(self):
        with pytest.raises(MalformedRow):
            ts.load_csv("t,value\n0,1\n1,nan\n2,3")

    def test_too_few(self):
        with pytest.raises(TooFewPoints):
            ts.load_csv("t,value\n0,1\n1,2")

    def test_positive_unit(self):
        with pytest.raises(NonPositiveValue):
            ts.load_csv("t,value\n0,1\n1,0\n2,3", unit="bits/s")
        # unitless series may cross zero
        assert len(ts.load_csv("t,value\n0,1\n1,0\n2,-3")) == 3


class TestBundled:
    def test_info_speed_values(self):
        s = ts.load_bundled("info_speed")
        assert [v for _, v in s.points] == [0.03, 3.0, 300.0, 60000.0, 1e9]
        assert s.unit == "bits/s"

    def test_world_population_span(self):
        s = ts.load_bundled("world_population")
        assert s.t[0] <= -500 and s.t[-1] >= 2000
        assert np.all(s.values > 0)

    def test_provenance_recorded(self):
        for name in ts.bundled_names():
            d = ts.load_dataset(name)
            assert d.series.name == name
            assert len(d.provenance) > 100


class TestSlice:
    def test_full_range_identity(self):
        s = ts.load_bundled("info_speed")
        assert ts.slice(s, s.t[0], s.t[-1]) == s

    def test_population_window(self):
        pop = ts.load_bundled("world_population")
        sub = ts.slice(pop, -500, 1962)
        assert sub.t[0] == -500 and sub.t[-1] == 1962
        assert sub.points == tuple(p for p in pop.points if -500 <= p[0] <= 1962)

    def test_empty_window(self):
        s = ts.load_bundled("info_speed")
        with pytest.raises(TooFewPoints):
            ts.slice(s, 3000, 4000, fit_ready=True)
        assert len(ts.slice(s, 3000, 4000)) == 0

    def test_reversed_bounds(self):
        with pytest.raises(ValueError):
            ts.slice(ts.load_bundled("info_speed"), 10, 0)


class TestDoublingTime:
    def test_exact_doubling(self):
        s = series([(t, 3 * 2 ** (t / 10)) for t in range(0, 100, 7)])
        prof = ts.doubling_time_profile(s)
        assert np.allclose(prof.values, 10.0, rtol=1e-12)

    def test_two_points(self):
        prof = ts.doubling_time_profile(series([(0, 1), (7, 2)]))
        assert prof.points == ((3.5, 7.0),)

    def test_info_speed_accelerates(self):
        prof = ts.doubling_time_profile(ts.load_bundled("info_speed"))
        assert ts.is_strictly_decreasing(prof)

    def test_zero_growth_sentinel(self):
        prof = ts.doubling_time_profile(series([(0, 1), (1, 2), (2, 2), (3, 8)]))
        assert math.isinf(prof.values[1])
        assert ts.is_strictly_decreasing(prof)

    def test_non_positive(self):
        with pytest.raises(NonPositiveValue):
            ts.doubling_time_profile(series([(0, 1), (1, 0), (2, 2)]))


times = st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=3, max_size=30, unique=True).map(sorted)


@given(times, st.data())
@settings(max_examples=100, deadline=None)
def test_csv_round_trip(ts_, data):
    vals = data.draw(st.lists(st.floats(-1e12, 1e12, allow_nan=False), min_size=len(ts_), max_size=len(ts_)))
    s = series(zip(ts_, vals))
    assert ts.load_csv(ts.to_csv(s), name="s") == s


@given(times, st.floats(-2e4, 2e4), st.floats(0.1, 2e4))
@settings(max_examples=100, deadline=None)
def test_slice_idempotent(ts_, a, width):
    s = series((t, 1.0) for t in ts_)
    once = ts.slice(s, a, a + width)
    assert ts.slice(once, a, a + width) == once


@given(st.floats(0.1, 100), st.floats(-0.05, 0.05).filter(lambda r: abs(r) > 1e-4))
@settings(max_examples=100, deadline=None)
def test_exponential_profile_constant(A, r):
    s = series((t, A * math.exp(r * t)) for t in np.linspace(0, 50, 12))
    prof = ts.doubling_time_profile(s).values
    assert np.max(np.abs(prof / (math.log(2) / r) - 1)) < 1e-9


@given(st.floats(1, 1e6), st.floats(2001, 3000))
@settings(max_examples=100, deadline=None)
def test_hyperbolic_profile_decreasing(C, t0):
    s = series((t, C / (t0 - t)) for t in np.linspace(1000, 2000, 15))
    assert ts.is_strictly_decreasing(ts.doubling_time_profile(s))
