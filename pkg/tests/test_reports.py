import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapelab.exceptions import InsufficientDataError
from shapelab.reports import CSV_HEADER, RateReport, fit_line, fit_slope


def _rows(ns, risk, trials=1, seed=0):
    return [(n, t, risk(n, t), seed) for n in ns for t in range(trials)]


class TestFitSlope:
    def test_exact_power_law(self):
        slope, stderr = fit_slope(_rows([10, 100, 1000, 10_000], lambda n, t: 1.0 / n))
        assert slope == pytest.approx(-1.0, abs=1e-12)
        # residuals are at rounding level; their square root sets the floor
        assert stderr == pytest.approx(0.0, abs=1e-6)

    def test_noisy_power_law(self):
        rng = np.random.default_rng(0)
        ns = 2 ** np.arange(6, 14)
        rows = _rows(ns, lambda n, t: 3 * n ** (-2 / 3) * (1 + 0.01 * rng.standard_normal()), trials=20)
        slope, _ = fit_slope(rows)
        assert slope == pytest.approx(-2 / 3, abs=0.02)

    def test_constant_risk(self):
        slope, _ = fit_slope(_rows([4, 8, 16, 32], lambda n, t: 0.3))
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_trials_are_averaged_before_logs(self):
        rows = [(10, 0, 1.0, 0), (10, 1, 3.0, 0), (100, 0, 0.2, 0), (1000, 0, 0.02, 0)]
        slope, intercept, _ = fit_line(rows)
        ref = np.polyfit(np.log([10, 100, 1000]), np.log([2.0, 0.2, 0.02]), 1)
        assert slope == pytest.approx(ref[0])
        assert intercept == pytest.approx(ref[1])

    def test_needs_three_sizes(self):
        with pytest.raises(InsufficientDataError):
            fit_slope(_rows([10, 100], lambda n, t: 1.0 / n, trials=5))

    def test_needs_positive_risk(self):
        with pytest.raises(InsufficientDataError):
            fit_slope(_rows([10, 100, 1000], lambda n, t: 0.0))

    @given(st.floats(-3, 1), st.floats(0.01, 100))
    @settings(max_examples=50)
    def test_recovers_any_exponent(self, a, c):
        slope, _ = fit_slope(_rows([2, 20, 200, 2000], lambda n, t: c * float(n) ** a))
        assert slope == pytest.approx(a, abs=1e-9)


class TestRateReport:
    @pytest.fixture
    def report(self):
        return RateReport.from_rows(_rows([8, 16, 32], lambda n, t: 1.0 / n + 0.01 * t, trials=2), target=-1.0,
                                    tolerance=0.1)

    def test_pass_flag(self, report):
        assert report.passed == (abs(report.slope + 1.0) <= 0.1)
        assert RateReport.from_rows(report.rows).passed is None

    def test_csv_schema(self, report):
        parsed = list(csv.reader(io.StringIO(report.to_csv())))
        assert tuple(parsed[0]) == CSV_HEADER == ("n", "trial", "risk", "seed")
        assert len(parsed) == 1 + len(report.rows)
        assert float(parsed[1][2]) == report.rows[0][2]

    def test_json_keys(self, report):
        assert set(json.loads(report.to_json())) == {"slope", "intercept", "stderr", "target", "pass"}

    def test_mean_risk(self, report):
        assert report.mean_risk()[8] == pytest.approx(1 / 8 + 0.005)

    def test_huge_sizes(self):
        rows = [(10**k, 0, 10.0 ** (-k / 2), 0) for k in (20, 40, 60)]
        assert fit_slope(rows)[0] == pytest.approx(-0.5, abs=1e-12)
