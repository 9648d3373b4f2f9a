import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waamlayer.errors import ConfigError, DomainError, NonInvertibleError, RankDeficiencyError
from waamlayer.model import (
    COLD, HOT, CalibrationSample, ModelCoefficients, ProcessBounds, calibrate, invert,
    parse_samples, predict, read_coefficients, write_coefficients, write_samples, read_samples,
)


def ols_closed_form(v, h):
    """Slope/intercept of ln h on ln v from the textbook sums, no linear algebra."""
    x = [math.log(s) for s in v]
    y = [math.log(s) for s in h]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    slope = sxy / sxx
    return slope, my - slope * mx


class TestPredict:
    def test_unit_speed_gives_exp_b(self):
        assert predict(COLD, 1.0) == pytest.approx(5.1913822956936855, rel=1e-14)

    def test_zero_model_is_one(self):
        assert predict(ModelCoefficients(0.0, 0.0), 7.3) == 1.0

    def test_hot_at_ten(self):
        # exp(1.215 - 0.37 ln 10), evaluated with math.exp/log
        assert predict(HOT, 10.0) == pytest.approx(1.437698420178175, rel=1e-14)

    @pytest.mark.parametrize("v", [0.0, -1.0, float("nan")])
    def test_rejects_nonpositive_speed(self, v):
        with pytest.raises(DomainError):
            predict(COLD, v)

    def test_array_input(self):
        out = predict(COLD, np.array([1.0, 2.0, 4.0]))
        assert out.shape == (3,)
        assert np.all(np.diff(out) < 0)

    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    def test_monotone_decreasing(self, v1, v2):
        lo, hi = sorted((v1, v2))
        assert predict(COLD, lo) >= predict(COLD, hi)
        if hi > lo * (1 + 1e-9):
            assert predict(COLD, lo) > predict(COLD, hi)

    def test_log_linear_three_points(self):
        lv = np.log([2.0, 5.0, 11.0])
        lh = np.log(predict(HOT, np.exp(lv)))
        s1 = (lh[1] - lh[0]) / (lv[1] - lv[0])
        s2 = (lh[2] - lh[1]) / (lv[2] - lv[1])
        assert s1 == pytest.approx(s2, rel=1e-12)
        assert s1 == pytest.approx(HOT.a, rel=1e-12)


class TestInvert:
    def test_inverse_of_unit_speed(self):
        assert invert(COLD, math.exp(1.647)) == pytest.approx(1.0, rel=1e-14)

    def test_cold_two_mm(self):
        v = invert(COLD, 2.0)
        assert v == pytest.approx(7.885798438587435, rel=1e-13)
        assert predict(COLD, v) == pytest.approx(2.0, abs=1e-12)

    def test_zero_exponent_not_invertible(self):
        with pytest.raises(NonInvertibleError):
            invert(ModelCoefficients(0.0, 1.0), 2.0)

    @pytest.mark.parametrize("h", [0.0, -0.5])
    def test_rejects_nonpositive_height(self, h):
        with pytest.raises(DomainError):
            invert(COLD, h)

    def test_roundtrip_random(self, rng):
        v = rng.uniform(1, 20, 100)
        np.testing.assert_allclose(invert(COLD, predict(COLD, v)), v, rtol=1e-10)

    @settings(max_examples=200)
    @given(st.floats(-2.0, -0.05), st.floats(-3, 3), st.floats(0.05, 50))
    def test_roundtrip_both_ways(self, a, b, x):
        m = ModelCoefficients(a, b)
        assert invert(m, predict(m, x)) == pytest.approx(x, rel=1e-10)
        assert predict(m, invert(m, x)) == pytest.approx(x, rel=1e-10)


class TestBounds:
    def test_from_model_orders_heights(self):
        b = ProcessBounds.from_model(COLD, 3.0, 17.0)
        assert b.dh_max == pytest.approx(predict(COLD, 3.0))
        assert b.dh_min == pytest.approx(predict(COLD, 17.0))
        assert b.dh_min < b.dh_max

    def test_common_envelope_is_intersection(self):
        b = ProcessBounds.common([COLD, HOT])
        assert b.dh_min == pytest.approx(predict(COLD, 17.0))
        assert b.dh_max == pytest.approx(predict(HOT, 3.0))

    @pytest.mark.parametrize("args", [(0, 17, 1, 2), (5, 5, 1, 2), (3, 17, 2, 1), (3, 17, 0, 1)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            ProcessBounds(*args)


class TestCalibrate:
    def test_noiseless_recovery(self):
        v = np.arange(1.0, 21.0)
        samples = [CalibrationSample(x, predict(COLD, x)) for x in v]
        res = calibrate(samples)
        a_ref, b_ref = ols_closed_form(v, predict(COLD, v))
        assert res.coeffs.a == pytest.approx(a_ref, abs=1e-12)
        assert res.coeffs.a == pytest.approx(-0.4619, abs=1e-9)
        assert res.coeffs.b == pytest.approx(1.647, abs=1e-9)
        assert res.coeffs.b == pytest.approx(b_ref, abs=1e-12)
        assert res.r_squared == pytest.approx(1.0, abs=1e-12)
        assert res.residual_norm < 1e-12

    def test_two_points_define_line(self):
        res = calibrate([CalibrationSample(2.0, 3.0), CalibrationSample(8.0, 1.5)])
        assert res.coeffs.a == pytest.approx(math.log(0.5) / math.log(4.0), rel=1e-12)
        assert predict(res.coeffs, 2.0) == pytest.approx(3.0, rel=1e-12)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficiencyError):
            calibrate([CalibrationSample(3.0, 2.0), CalibrationSample(3.0, 2.1)])

    def test_rejects_nonpositive_sample(self):
        with pytest.raises(DomainError):
            CalibrationSample(3.0, 0.0)

    def test_noisy_slope_monte_carlo(self):
        v = np.arange(1.0, 21.0)
        hits = 0
        for seed in range(100):
            noise = np.random.default_rng(seed).normal(0.0, 0.05, v.size)
            h = predict(COLD, v) * np.exp(noise)
            res = calibrate([CalibrationSample(x, y) for x, y in zip(v, h)])
            hits += abs(res.coeffs.a - COLD.a) <= 0.05
        assert hits >= 95

    @settings(max_examples=50)
    @given(st.floats(-1.5, -0.1), st.floats(-1, 2))
    def test_idempotent_on_model_data(self, a, b):
        m = ModelCoefficients(a, b)
        v = np.linspace(2, 18, 9)
        res = calibrate([CalibrationSample(x, predict(m, x)) for x in v])
        assert res.coeffs.a == pytest.approx(a, abs=1e-9)
        assert res.coeffs.b == pytest.approx(b, abs=1e-9)


class TestFiles:
    def test_parse_errors_name_line(self):
        text = "v_t,dh\n1,2\n2,1.5\n3,1.2\n4,1.1\n5,1.0\nfive,0.9\n"
        with pytest.raises(ConfigError, match="line 7"):
            parse_samples(text)

    def test_bad_header(self):
        with pytest.raises(ConfigError, match="header"):
            parse_samples("speed,height\n1,2\n")

    def test_sample_roundtrip(self, tmp_path):
        samples = [CalibrationSample(1.5, 2.25), CalibrationSample(7.0, 0.1 + 0.2)]
        write_samples(tmp_path / "s.csv", samples)
        assert read_samples(tmp_path / "s.csv") == samples

    def test_coefficients_document(self, tmp_path):
        res = calibrate([CalibrationSample(x, predict(HOT, x)) for x in (2.0, 4.0, 9.0)],
                        label="hot")
        write_coefficients(tmp_path / "c.json", res)
        back = read_coefficients(tmp_path / "c.json")
        assert back == res.coeffs
        assert (tmp_path / "c.json").read_text().count("r_squared") == 1
