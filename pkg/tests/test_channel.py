import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from models import AirtimeError, DistanceLaw
from services.channel import (
    RAYLEIGH, Contender, LinkDraw, ReceivedPowerCdf, airtime, cdf_received_power, default_low_dr_optimize,
    fading_cdf, fading_pdf, resolve_capture, rx_power, sample_fading, sample_received_power,
)
from utils import db_to_linear, dbm_to_mw, linear_to_db


def lora(sf, payload, **kw):
    return airtime(sf, 125_000, 1, 8, True, payload, **kw)


class TestAirtime:
    def test_sf7_13_bytes(self):
        assert lora(7, 13, low_dr_optimize=0) == pytest.approx(0.046336, abs=1e-6)

    def test_sf8_12_bytes(self):
        assert lora(8, 12, low_dr_optimize=0) == pytest.approx(0.082432, abs=1e-6)

    @pytest.mark.parametrize('payload, expected_ms', [
        (12, 41.216), (14, 46.336), (16, 51.456), (18, 51.456), (20, 56.576), (24, 61.696),
    ])
    def test_sf7_coded_frame_sizes(self, payload, expected_ms):
        assert lora(7, payload) * 1e3 == pytest.approx(expected_ms, abs=1e-3)

    def test_non_decreasing_in_payload(self):
        times = [lora(7, n) for n in range(1, 60)]
        assert all(b >= a for a, b in zip(times, times[1:]))

    def test_larger_sf_is_longer(self):
        for sf in range(7, 12):
            assert lora(sf + 1, 12) > lora(sf, 12)

    def test_low_data_rate_default(self):
        assert default_low_dr_optimize(12, 125_000) == 1
        assert default_low_dr_optimize(8, 125_000) == 0

    @pytest.mark.parametrize('sf', [6, 13])
    def test_bad_sf(self, sf):
        with pytest.raises(AirtimeError) as exc:
            lora(sf, 12)
        assert exc.value.code == 'BadSf'

    def test_bad_payload(self):
        with pytest.raises(AirtimeError) as exc:
            lora(7, 0)
        assert exc.value.code == 'BadPayload'


class TestRxPower:
    def test_deep_fade(self):
        assert rx_power(1.0, 0.0, 100.0, 3.5) == 0.0

    def test_inverse_square(self):
        assert rx_power(1.0, 1.0, 20.0, 2.0) == pytest.approx(rx_power(1.0, 1.0, 10.0, 2.0) / 4)

    def test_identity(self):
        assert rx_power(10 ** 0.0, 1.0, 1.0, 3.5) == 1.0

    def test_link_draw(self, rng):
        draw = LinkDraw.draw(rng, 2.0, 10.0, 2.0)
        assert draw.rx_power_mw == 2.0 * draw.fading_a * 10.0 ** -2.0


class TestCapture:
    ZETA = dbm_to_mw(-126.0)

    def contenders(self, *dbm):
        return [Contender(i, dbm_to_mw(p)) for i, p in enumerate(dbm)]

    def test_clear_margin_wins(self):
        assert resolve_capture(self.contenders(-100, -110), self.ZETA, 6.0) == 0

    def test_no_margin(self):
        assert resolve_capture(self.contenders(-100, -97), self.ZETA, 6.0) is None

    def test_below_sensitivity(self):
        assert resolve_capture(self.contenders(-130), self.ZETA, 6.0) is None

    def test_empty(self):
        assert resolve_capture([], self.ZETA, 6.0) is None

    def test_equal_powers_lose(self):
        assert resolve_capture(self.contenders(-100, -100), self.ZETA, 0.0) is None

    def test_exact_threshold_loses(self):
        weak = 1e-10
        strong = weak * 10 ** (0.1 * 6.0)
        assert resolve_capture([Contender(0, strong), Contender(1, weak)], 0.0, 6.0) is None

    def test_three_contender_grid_matches_brute_force(self):
        grid = np.arange(-135.0, -95.0, 1.5)
        xi = 10 ** (0.1 * 6.0)
        for powers in itertools.product(grid, repeat=3):
            mw = [dbm_to_mw(p) for p in powers]
            expected = [
                i for i in range(3)
                if mw[i] >= self.ZETA and mw[i] > xi * max(mw[j] for j in range(3) if j != i)
            ]
            assert len(expected) <= 1
            winner = resolve_capture([Contender(i, p) for i, p in enumerate(mw)], self.ZETA, 6.0)
            assert winner == (expected[0] if expected else None), powers


class TestFading:
    def test_unit_mean(self, rng):
        draws = sample_fading(rng, 1_000_000)
        assert abs(draws.mean() - 1.0) < 0.01

    def test_cdf(self):
        assert fading_cdf(0.0) == 0.0
        assert fading_cdf(1.0) == pytest.approx(1 - math.exp(-1))
        assert fading_cdf(-1.0) == 0.0

    def test_pdf(self):
        assert fading_pdf(0.0) == 1.0
        assert fading_pdf(-1.0) == 0.0
        total, _ = integrate.quad(fading_pdf, 0.0, math.inf)
        assert total == pytest.approx(1.0, rel=1e-9)
        h = 1e-6
        for x in (0.1, 1.0, 3.0):
            slope = (fading_cdf(x + h) - fading_cdf(x - h)) / (2 * h)
            assert fading_pdf(x) == pytest.approx(slope, rel=1e-6)


class TestDecibels:
    def test_conversions(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert db_to_linear(6.0) == pytest.approx(3.981, rel=1e-3)
        assert dbm_to_mw(-120.0) == pytest.approx(1e-12)
        assert linear_to_db(db_to_linear(-7.5)) == pytest.approx(-7.5)
        assert linear_to_db(0.0) == -math.inf


class TestReceivedPowerCdf:
    GAMMA = 1.0e12
    ALPHA = 3.5

    def test_limits(self):
        law = DistanceLaw.annulus(500.0, 1500.0)
        assert cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, 0.0) == 0.0
        assert cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, math.inf) == 1.0

    def test_fixed_distance_closed_form(self):
        law = DistanceLaw.fixed(1000.0)
        x = 3e-3
        expected = -math.expm1(-x * 1000.0 ** self.ALPHA / self.GAMMA)
        assert cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, x) == pytest.approx(expected, rel=1e-12)

    def test_annulus_matches_monte_carlo(self, rng):
        law = DistanceLaw.annulus(500.0, 1500.0)
        samples = sample_received_power(rng, law, self.GAMMA, self.ALPHA, 1_000_000)
        n = samples.size
        for q in np.linspace(0.05, 0.95, 10):
            x = float(np.quantile(samples, q))
            empirical = np.count_nonzero(samples < x) / n
            se = math.sqrt(empirical * (1 - empirical) / n)
            value = cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, x)
            assert abs(value - empirical) < 4 * se + 1e-4

    def test_monotone(self):
        law = DistanceLaw.disc(2000.0)
        xs = np.logspace(-6, 3, 25)
        values = [cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, x) for x in xs]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_tabulated_matches_direct(self):
        law = DistanceLaw.annulus(500.0, 1500.0)
        table = ReceivedPowerCdf(law, self.GAMMA, self.ALPHA)
        for x in (1e-2, 1e-1, 1.0, 10.0):
            direct = cdf_received_power(law, RAYLEIGH.cdf, self.GAMMA, self.ALPHA, x)
            assert table(x) == pytest.approx(direct, abs=1e-3)
