import json

import pytest

from app import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_VALIDATION_FAILURE, main
from models import ConfigError, Geometry, Protocol, ScenarioConfig
from routes.optimal import cmd_optimal_nr, scan_n_r
from routes.simulate import cmd_simulate
from routes.sweep import SweepSpec, cmd_sweep, point_seed
from routes.validate import SKIPPED, check_point, default_grid
from services.reports import parse_csv, render_rows


class TestAnalyzeCommand:
    def test_default_scenario(self, capsys):
        assert main(['analyze']) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc['protocol'] == 'SingleRelayCoded'
        assert 0.0 < doc['mlr'] < 1.0
        assert doc['n_r'] == 11

    def test_csv(self, capsys):
        assert main(['analyze', '--protocol', 'Cooperative', '--nr', '3', '--format', 'csv']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith('# schema:')
        assert 'mlr' in lines[1].split(',')
        assert len(lines) == 3

    def test_baseline_has_no_model(self):
        assert main(['analyze', '--protocol', 'NoRelay']) == EXIT_CONFIG_ERROR

    def test_zero_window(self):
        assert main(['analyze', '--nr', '0']) == EXIT_CONFIG_ERROR

    def test_missing_scenario_file(self, tmp_path):
        assert main(['analyze', '--scenario', str(tmp_path / 'missing.json')]) == EXIT_CONFIG_ERROR

    def test_scenario_file_to_output_file(self, tmp_path):
        scenario = tmp_path / 'scenario.json'
        scenario.write_text(json.dumps({'n_sensors': 10, 'protocol': 'Cooperative', 'n_r': 2}))
        out = tmp_path / 'audit.json'
        assert main(['analyze', '--scenario', str(scenario), '--out', str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc['n_sensors'] == 10
        assert doc['protocol'] == 'Cooperative'


class TestSimulateCommand:
    def test_replications(self, strong_link_scenario):
        doc = cmd_simulate(strong_link_scenario, seed=9, n_slots=5000, replications=2)
        assert len(doc['runs']) == 2
        assert doc['runs'][0]['seed'] == 9
        assert doc['runs'][1]['seed'] != 9
        pooled = doc['pooled']
        assert pooled['messages_generated'] == sum(r['messages_generated'] for r in doc['runs'])

    def test_trace_and_output(self, tmp_path):
        out = tmp_path / 'sim.json'
        trace = tmp_path / 'trace.jsonl'
        code = main(['simulate', '--protocol', 'ImmediateForwarding', '--slots', '5000', '--seed', '3',
                     '--out', str(out), '--trace', str(trace)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc['pooled']['protocol'] == 'ImmediateForwarding'
        assert trace.read_text().strip()

    def test_csv(self, capsys):
        assert main(['simulate', '--slots', '3000', '--replications', '2', '--format', 'csv']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith('# schema:')
        assert len(lines) == 4

    def test_run_shorter_than_edges(self):
        assert main(['simulate', '--slots', '10']) == EXIT_CONFIG_ERROR


class TestSweepCommand:
    @pytest.fixture
    def window_sweep(self):
        spec = SweepSpec(axis='n_r', values=[3, 5, 8], protocols=['NoRelay', 'SingleRelayCoded'],
                         replications=1, slots=5000)
        return cmd_sweep(spec, workers=1)

    def test_rows_in_axis_order(self, window_sweep):
        assert [(r.axis_value, r.protocol) for r in window_sweep] == [
            (3, 'NoRelay'), (3, 'SingleRelayCoded'),
            (5, 'NoRelay'), (5, 'SingleRelayCoded'),
            (8, 'NoRelay'), (8, 'SingleRelayCoded'),
        ]
        assert all(not r.error for r in window_sweep)

    def test_window_free_rows_repeat_along_n_r(self, window_sweep):
        baseline = [r for r in window_sweep if r.protocol == 'NoRelay']
        assert len({r.mlr_sim for r in baseline}) == 1
        assert len({r.seed for r in baseline}) == 1
        assert all(r.mlr_analysis is None and r.n_r is None for r in baseline)

    def test_proposed_rows_carry_analysis(self, window_sweep):
        coded = [r for r in window_sweep if r.protocol == 'SingleRelayCoded']
        assert [r.n_r for r in coded] == [3, 5, 8]
        assert all(0.0 < r.mlr_analysis < 1.0 and r.rdc_analysis > 0.0 for r in coded)

    def test_csv_is_stable(self, window_sweep):
        text = render_rows(window_sweep, 'csv')
        assert text == render_rows(window_sweep, 'csv')
        records = parse_csv(text)
        assert len(records) == 6
        assert records[0]['mlr_analysis'] == ''
        assert records[1]['protocol'] == 'SingleRelayCoded'

    def test_seeds_depend_on_point(self):
        assert point_seed(1, 'SingleRelayCoded', 'n_r', 0, 0) != point_seed(1, 'SingleRelayCoded', 'n_r', 1, 0)
        assert point_seed(1, 'NoRelay', 'n_r', 0, 0) == point_seed(1, 'NoRelay', 'n_r', 1, 0)
        assert point_seed(1, 'NoRelay', 'n_sensors', 0, 0) != point_seed(1, 'NoRelay', 'n_sensors', 1, 0)

    def test_optimised_window_per_point(self):
        spec = SweepSpec(axis='n_sensors', values=[20], protocols=['Cooperative'], replications=1,
                         slots=3000, optimize_nr=True)
        (row,) = cmd_sweep(spec, workers=1)
        assert row.optimal
        assert row.n_r == 1

    def test_bad_spec(self):
        with pytest.raises(ConfigError) as exc:
            cmd_sweep(SweepSpec(axis='alpha', values=[2.0]), workers=1)
        assert exc.value.codes == ['BadValue']
        with pytest.raises(ConfigError):
            SweepSpec.from_dict({'axis': 'n_r', 'values': [1], 'colour': 'red'})

    def test_fractional_values_on_integer_axes(self):
        for axis in ('n_r', 'n_sensors'):
            with pytest.raises(ConfigError) as exc:
                cmd_sweep(SweepSpec(axis=axis, values=[5, 10.5], protocols=['NoRelay']), workers=1)
            assert exc.value.codes == ['BadValue']
        assert main(['sweep', '--axis', 'n_sensors', '--values', '10.5', '--workers', '1']) == EXIT_CONFIG_ERROR
        assert SweepSpec(axis='lambda_rate', values=[0.05]).validate().values == [0.05]

    def test_values_come_out_in_axis_order(self):
        spec = SweepSpec(axis='n_r', values=[8.0, 3, 5]).validate()
        assert spec.values == [3, 5, 8]
        assert all(isinstance(v, int) for v in spec.values)
        rows = cmd_sweep(SweepSpec(axis='n_sensors', values=[12, 4], protocols=['NoRelay'], replications=1,
                                   slots=3000), workers=1)
        assert [r.axis_value for r in rows] == [4, 12]

    def test_spec_file(self, tmp_path):
        spec = tmp_path / 'sweep.json'
        spec.write_text(json.dumps({
            'axis': 'n_sensors', 'values': [5, 10], 'protocols': ['NoRelay'], 'replications': 1, 'slots': 3000,
        }))
        out = tmp_path / 'rows.csv'
        assert main(['sweep', '--spec', str(spec), '--out', str(out), '--workers', '1']) == EXIT_OK
        records = parse_csv(out.read_text())
        assert [r['axis_value'] for r in records] == ['5', '10']

    def test_needs_an_axis(self):
        assert main(['sweep']) == EXIT_CONFIG_ERROR


class TestOptimalWindow:
    def test_interior_optimum(self, default_scenario):
        n_r, mlr = cmd_optimal_nr(default_scenario)
        assert 1 < n_r < 20
        scan = scan_n_r(default_scenario)
        assert mlr == min(scan.mlr_by_n_r.values())

    def test_optimum_shrinks_with_more_sensors(self, default_scenario):
        optima = [cmd_optimal_nr(default_scenario.with_overrides(n_sensors=n))[0] for n in (10, 20, 30, 40)]
        assert optima == sorted(optima, reverse=True)

    def test_cooperative_prefers_the_shortest_window(self, default_scenario):
        assert cmd_optimal_nr(default_scenario.with_overrides(protocol=Protocol.COOPERATIVE))[0] == 1

    def test_ties_go_to_the_smallest_window(self):
        scenario = ScenarioConfig(geometry=Geometry(d_r=1e7))
        assert cmd_optimal_nr(scenario, n_r_max=10)[0] == 1

    def test_sensor_list(self, capsys):
        assert main(['optimal-nr', '--sensor-list', '10', '20', '--nr-max', '12', '--format', 'csv']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'n_sensors,protocol,n_r_opt,mlr_opt'
        assert [line.split(',')[0] for line in lines[1:]] == ['10', '20']

    def test_baseline(self):
        assert main(['optimal-nr', '--protocol', 'UncodedForwarding']) == EXIT_CONFIG_ERROR


class TestValidateCommand:
    def test_default_grid(self):
        grid = default_grid()
        assert len(grid) == 18
        assert {s.protocol for s in grid} == {Protocol.SINGLE_RELAY, Protocol.COOPERATIVE}

    def test_no_traffic_is_skipped(self):
        point = check_point(ScenarioConfig(lambda_rate=0.0), n_slots=2000)
        assert point.status == SKIPPED
        assert point.reason

    def test_mismatched_model_fails(self, tmp_path):
        out = tmp_path / 'report.json'
        code = main(['validate', '--single', '--sensors', '40', '--nr', '5', '--analysis-xi-db', '-10',
                     '--slots', '100000', '--workers', '1', '--out', str(out)])
        assert code == EXIT_VALIDATION_FAILURE
        report = json.loads(out.read_text())
        assert not report['passed']
        assert report['counts']['fail'] == 1
