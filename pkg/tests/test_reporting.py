"""Error statistics, CCDF and plot output."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from osnrnn.plotting import plot_ccdf, plot_error_histogram, plot_estimate_scatter, plot_history
from osnrnn.reporting import CCDF_GRID, ErrorStats, ccdf, write_csv

errors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=200)


class TestStats:
    @given(errors)
    def test_ccdf_properties(self, e):
        c = ccdf(e)
        assert c[0] == 1.0
        assert np.all(np.diff(c) <= 0) and np.all((c >= 0) & (c <= 1))

    def test_ccdf_values(self):
        c = ccdf([0.0, 0.1, -0.5, 2.0])
        assert c[list(CCDF_GRID).index(0.1)] == 0.75
        assert c[list(CCDF_GRID).index(1.0)] == 0.25
        assert np.all(np.isnan(ccdf([])))

    @given(errors)
    def test_stats_match_numpy(self, e):
        s = ErrorStats.from_errors(e)
        assert s.count == len(e)
        assert s.offset == pytest.approx(np.mean(e), abs=1e-12)
        assert s.sigma == pytest.approx(np.std(e, ddof=1), abs=1e-12)
        assert s.rmse == pytest.approx(np.sqrt(np.mean(np.square(e))), abs=1e-12)

    def test_formatting(self):
        assert ErrorStats.from_errors([0.1, 0.3]).formatted() == "(+0.20 ± 0.14) dB"
        assert ErrorStats.from_errors([]).count == 0

    def test_csv(self, tmp_path):
        write_csv(tmp_path / "a.csv", [{"x": 1, "y": 2.5}])
        assert (tmp_path / "a.csv").read_text().splitlines() == ["x,y", "1,2.5"]


class TestPlots:
    def test_svg_is_reproducible(self, tmp_path):
        curves = {"OSNR": ccdf([0.1, 0.4, 1.2])}
        a = plot_ccdf(curves, tmp_path / "a.svg")
        b = plot_ccdf(curves, tmp_path / "b.svg")
        assert a.read_bytes() == b.read_bytes()

    def test_all_figures_render(self, tmp_path):
        rng = np.random.default_rng(0)
        t = rng.uniform(12, 25, 30)
        e = t + rng.normal(0, 0.5, 30)
        paths = [
            plot_estimate_scatter(t, e, e > 13, tmp_path / "s.png"),
            plot_error_histogram(e - t, tmp_path / "h.png"),
            plot_history(np.linspace(2, 1, 10), np.linspace(2.2, 1.3, 10), tmp_path / "l.png"),
        ]
        assert all(p.stat().st_size > 1000 for p in paths)
