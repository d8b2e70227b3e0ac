import math

import pytest

from models import (
    CodedFrameOverflow, DistanceLaw, FOutOfRange, Geometry, LoadRegimeWarning, Protocol, ScenarioConfig,
    UnsupportedProtocolForAnalysis, validate_config,
)
from services import analysis
from services.analysis import RelayAnalysis, expect, p_rw, s_c_forms
from services.channel import RAYLEIGH


@pytest.fixture
def model(default_cfg):
    return RelayAnalysis(default_cfg)


class TestExpect:
    def test_density_normalised(self):
        assert expect(lambda d: 1.0, [DistanceLaw.annulus(100.0, 300.0)]) == pytest.approx(1.0, abs=1e-9)

    def test_annulus_mean(self):
        # E[D] = 2/3 (b^3 - a^3) / (b^2 - a^2)
        assert expect(lambda d: d, [DistanceLaw.annulus(100.0, 300.0)]) == pytest.approx(650.0 / 3.0, rel=1e-8)

    def test_fading_mean(self):
        assert expect(lambda a: a, [RAYLEIGH]) == pytest.approx(1.0, rel=1e-6)

    def test_fixed_distance_collapses(self):
        assert expect(lambda d: d ** 2, [DistanceLaw.fixed(5.0)]) == 25.0

    def test_lower_limit(self):
        assert expect(lambda a: 1.0, [(RAYLEIGH, lambda outer: 1.0)]) == pytest.approx(math.exp(-1.0), rel=1e-6)

    def test_nested(self):
        value = expect(lambda d, a: a * d, [DistanceLaw.fixed(3.0), RAYLEIGH])
        assert value == pytest.approx(3.0, rel=1e-6)


class TestWindowAlgebra:
    def test_receive_window_probability(self):
        assert p_rw(1) == 0.5
        assert p_rw(11) == pytest.approx(11 / 12)
        with pytest.raises(ValueError):
            p_rw(0)

    def test_decodability_forms_agree(self):
        binomial_sum, closed = s_c_forms(0.3, 0.5, 4)
        assert binomial_sum == pytest.approx(0.512, abs=1e-15)
        assert closed == pytest.approx(0.512, abs=1e-15)

    def test_single_message_window_always_decodes(self):
        assert s_c_forms(0.2, 0.1, 1) == (1.0, 1.0)

    def test_coded_frame_size(self, default_cfg):
        assert default_cfg.coded_bytes(3) == 16
        assert default_cfg.coded_bytes(20) == 50


class TestLinkProbabilities:
    def test_lone_sensor_only_fades(self):
        cfg = validate_config(ScenarioConfig(n_sensors=1))
        # Auto gain puts the median 10 dB above sensitivity: a_min = ln2 / 10
        assert analysis.s_dir(cfg) == pytest.approx(math.exp(-math.log(2.0) / 10.0), rel=1e-6)

    def test_no_capture_no_floor_leaves_only_collisions(self):
        cfg = validate_config(ScenarioConfig(
            gamma_db=1.1, capture_threshold_db=300.0, sensitivity_dbm_by_sf={7: -250.0, 8: -250.0},
        ))
        assert analysis.s_dir(cfg) == pytest.approx(math.exp(-cfg.nu), rel=1e-5)

    def test_relay_gateway_link_is_fading_only(self, default_cfg):
        expected = math.exp(-default_cfg.sensitivity_mw(7) * 1000.0 ** 3.5 / default_cfg.gamma_linear)
        assert analysis.s_rg(default_cfg) == pytest.approx(expected, rel=1e-12)

    def test_default_direct_success(self, model):
        assert 0.85 < model.direct_frame < 0.89

    def test_both_not_more_likely_than_either(self, model):
        assert model.both_frame <= min(model.direct_frame, model.relay_frame) + 1e-9

    def test_no_traffic(self):
        model = RelayAnalysis(validate_config(ScenarioConfig(lambda_rate=0.0)))
        assert model.f == 1.0
        assert model.p_gr == 0.0
        result = model.performance()
        assert result.intermediates.s_c == 1.0
        assert result.rdc == 0.0
        assert result.l_av_s == 0.0

    def test_slot_probabilities_bounded(self, model):
        assert 0.0 <= model.p_gr <= 1.0
        assert model.p_gr + model.f <= 1.0 + 1e-12

    def test_exact_poisson_sum_is_close(self, default_scenario):
        exponential = analysis.performance(default_scenario).mlr
        exact = analysis.performance(default_scenario.with_overrides(poisson_sum='exact')).mlr
        assert abs(exact - exponential) < 1e-3

    def test_clustered_form_matches_general_with_clear_margins(self):
        base = ScenarioConfig(gamma_db=62.0)
        general = RelayAnalysis(validate_config(base.with_overrides(s_sr_method='general')))
        clustered = RelayAnalysis(validate_config(base.with_overrides(s_sr_method='clustered')))
        assert clustered.margins_clear
        assert abs(general.lost_at_gateway_relayed - clustered.lost_at_gateway_relayed) < 1e-4

    def test_clustered_form_needs_fixed_distances(self):
        cfg = validate_config(ScenarioConfig(
            s_sr_method='clustered', geometry=Geometry(sensor_relay=DistanceLaw.annulus(500.0, 1500.0)),
        ))
        with pytest.raises(ValueError):
            RelayAnalysis(cfg).lost_at_gateway_relayed

    def test_narrow_annulus_approaches_fixed_distance(self, default_cfg):
        narrow = validate_config(ScenarioConfig(
            gamma_db=default_cfg.gamma_db, geometry=Geometry(sensor_gateway=DistanceLaw.annulus(1990.0, 2010.0)),
        ))
        spread = RelayAnalysis(narrow)
        fixed = RelayAnalysis(default_cfg)
        assert spread.direct_frame == pytest.approx(fixed.direct_frame, abs=2e-3)
        assert spread.relay_frame == pytest.approx(fixed.relay_frame, rel=1e-12)

    def test_overload_clamps_empty_slot_probability(self):
        with pytest.warns(LoadRegimeWarning):
            cfg = validate_config(ScenarioConfig(capture_threshold_db=-20.0, n_sensors=40, lambda_rate=2.0))
        model = RelayAnalysis(cfg)
        with pytest.warns(FOutOfRange):
            assert model.f == 0.0
        assert model.f_raw < 0.0
        assert model.p_gr <= 1.0


class TestPerformance:
    def test_unreachable_gateway_falls_back_to_direct(self):
        cfg = validate_config(ScenarioConfig(geometry=Geometry(d_r=1e7)))
        model = RelayAnalysis(cfg)
        assert model.s_rg == 0.0
        assert model.performance().mlr == pytest.approx(1.0 - model.direct_frame, abs=1e-12)

    @pytest.mark.parametrize('n_r', [2, 5, 10])
    def test_cooperative_not_worse_than_single(self, model, n_r):
        single = model.window_result(n_r, Protocol.SINGLE_RELAY)
        coop = model.window_result(n_r, Protocol.COOPERATIVE)
        assert coop.mlr <= single.mlr
        assert coop.intermediates.p_rw == 1.0

    @pytest.mark.parametrize('n_r', [1, 5, 12])
    def test_cooperative_duty_cycle_ratio(self, model, n_r):
        single = model.window_result(n_r, Protocol.SINGLE_RELAY)
        coop = model.window_result(n_r, Protocol.COOPERATIVE)
        assert single.rdc / coop.rdc == pytest.approx((n_r + 0.5) / (n_r + 1), rel=1e-12)
        assert coop.rdc_schedule == pytest.approx(coop.l_av_s / (n_r * model.cfg.slot_len_s), rel=1e-12)
        assert coop.rdc_per_relay == pytest.approx(coop.rdc_schedule / 2, rel=1e-12)

    def test_single_relay_duty_cycle_fields_agree(self, model):
        result = model.window_result(7)
        assert result.rdc == result.rdc_schedule == result.rdc_per_relay

    def test_cooperative_single_slot_window_always_decodes(self):
        cfg = validate_config(ScenarioConfig(protocol=Protocol.COOPERATIVE, n_r=1))
        assert analysis.s_c(cfg) == 1.0

    def test_more_gain_means_fewer_losses(self, default_scenario):
        losses = [analysis.performance(default_scenario.with_overrides(gamma_db=g)).mlr for g in (-5, 0, 5, 10, 15)]
        assert losses == sorted(losses, reverse=True)

    def test_mean_airtime_grows_with_window(self, model):
        assert model.l_av(3) < model.l_av(8)

    def test_overflowing_coded_frame_warns(self, model):
        with pytest.warns(CodedFrameOverflow):
            model.window_result(20)

    def test_baselines_have_no_closed_form(self):
        cfg = validate_config(ScenarioConfig(protocol=Protocol.NO_RELAY))
        with pytest.raises(UnsupportedProtocolForAnalysis):
            analysis.performance(cfg)

    def test_result_document(self, model):
        doc = model.performance().to_dict()
        assert doc['protocol'] == 'SingleRelayCoded'
        assert doc['n_r'] == 11
        assert doc['mlr'] == pytest.approx(1.0 - doc['s_dir'] - doc['s_rel'], abs=1e-12)


class TestAudit:
    def test_deterministic(self, default_cfg):
        assert analysis.audit(default_cfg) == analysis.audit(default_cfg)

    def test_contents(self, default_cfg):
        doc = analysis.audit(default_cfg)
        assert doc['s_c_binomial_sum'] == pytest.approx(doc['s_c_closed_form'], abs=1e-12)
        assert doc['recovery_delay_slots'] == 6.0
        assert doc['p_tx'] == pytest.approx(default_cfg.p_tx)
        assert doc['f'] == pytest.approx(1.0 - default_cfg.n_sensors * doc['p_tx'] * doc['relay_frame'])
