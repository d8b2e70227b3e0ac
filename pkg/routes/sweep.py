"""Parameter sweeps: one ResultRow per (protocol, axis value)."""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from config import Config
from models import ConfigError, ConfigIssue, Protocol, ScenarioConfig, load_scenario, validate_config
from services.analysis import RelayAnalysis
from services.reports import ResultRow, render_rows, write_output
from services.simulator import pool_metrics, run
from utils import derive_seed

AXES = {
    'n_r': int,
    'n_sensors': int,
    'lambda_rate': float,
    'gamma_db': float,
}


@dataclass
class SweepSpec:
    axis: str
    values: list
    protocols: list = field(default_factory=lambda: [p.value for p in Protocol])
    replications: int = Config.DEFAULT_REPLICATIONS
    seed: int = Config.DEFAULT_SEED
    scenario: str | None = None
    out: str | None = None
    slots: int = Config.DEFAULT_SLOTS
    optimize_nr: bool = False
    fmt: str = 'csv'

    def issues(self):
        problems = []
        if self.axis not in AXES:
            problems.append(ConfigIssue('BadValue', f"unknown sweep axis {self.axis!r}; expected one of {sorted(AXES)}"))
        if not self.values:
            problems.append(ConfigIssue('BadValue', 'sweep value list is empty'))
        for v in self.values or []:
            try:
                number = float(v)
            except (TypeError, ValueError):
                problems.append(ConfigIssue('BadValue', f"sweep value {v!r} is not a number"))
                continue
            if AXES.get(self.axis) is int and not number.is_integer():
                problems.append(ConfigIssue('BadValue', f"{self.axis} takes whole numbers, got {v!r}"))
        if not self.protocols:
            problems.append(ConfigIssue('BadValue', 'sweep protocol list is empty'))
        for name in self.protocols:
            try:
                Protocol(name)
            except ValueError:
                problems.append(ConfigIssue('BadProtocol', f"unknown protocol {name!r}"))
        if not isinstance(self.replications, int) or self.replications < 1:
            problems.append(ConfigIssue('BadValue', f"replications must be >= 1, got {self.replications!r}"))
        if self.slots < 1:
            problems.append(ConfigIssue('BadValue', f"slots must be >= 1, got {self.slots}"))
        return problems

    def validate(self):
        problems = self.issues()
        if problems:
            raise ConfigError(problems)
        self.values = sorted(AXES[self.axis](float(v)) for v in self.values)
        return self

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([ConfigIssue('UnknownKey', f"unknown sweep key {k!r}") for k in unknown])
        if 'axis' not in data or 'values' not in data:
            raise ConfigError([ConfigIssue('BadValue', "sweep spec needs 'axis' and 'values'")])
        return cls(**data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError([ConfigIssue('BadValue', f"cannot read sweep spec {path}: {e}")])
        return cls.from_dict(data)


def point_seed(seed, protocol, axis, value_index, replication):
    """Seed of one replication of one sweep point.

    Protocols without a receive window do not depend on n_r, so that axis is
    left out of their seed and their rows repeat exactly along it.
    """
    protocol = Protocol(protocol)
    order = list(Protocol).index(protocol)
    key = 0 if axis == 'n_r' and not protocol.has_windows else value_index + 1
    return derive_seed(seed, order, key, replication)


def _evaluate_point(task):
    """Worker body; never raises across the pool"""
    base, spec, protocol, value_index, value = task
    row = ResultRow(protocol=protocol, axis=spec.axis, axis_value=value, replications=spec.replications)
    try:
        cfg = validate_config(base.with_overrides(protocol=protocol, **{spec.axis: value}))
        row.n_r = cfg.n_r if Protocol(protocol).has_windows else None
        model = RelayAnalysis(cfg) if cfg.protocol.is_proposed else None

        if model is not None and spec.optimize_nr and spec.axis != 'n_r':
            from routes.optimal import scan_n_r
            best = scan_n_r(cfg).n_r_opt
            cfg = validate_config(cfg.with_overrides(n_r=best))
            model = RelayAnalysis(cfg)
            row.n_r = best
            row.optimal = True

        if model is not None:
            result = model.performance()
            row.mlr_analysis = result.mlr
            row.rdc_analysis = result.rdc

        row.seed = point_seed(spec.seed, protocol, spec.axis, value_index, 0)
        runs = [run(cfg, point_seed(spec.seed, protocol, spec.axis, value_index, rep), spec.slots)
                for rep in range(spec.replications)]
        pooled = pool_metrics(runs)
        row.mlr_sim = pooled.mlr_estimate
        row.mlr_sim_stderr = pooled.mlr_stderr
        row.rdc_sim = pooled.rdc_estimate
        return {'success': True, 'row': row}
    except Exception as e:
        logging.error(f"Error evaluating {protocol} at {spec.axis}={value}: {e}")
        row.error = str(e)
        return {'success': False, 'error': str(e), 'row': row}


def _mark_optimal_windows(rows):
    best = {}
    for row in rows:
        if row.axis != 'n_r' or row.mlr_analysis is None:
            continue
        current = best.get(row.protocol)
        if current is None or row.mlr_analysis < current.mlr_analysis:
            best[row.protocol] = row
    for row in best.values():
        row.optimal = True


def cmd_sweep(spec, base=None, workers=None):
    """Evaluate every sweep point and return rows in axis order"""
    spec.validate()
    if base is None:
        base = load_scenario(spec.scenario) if spec.scenario else ScenarioConfig.defaults()
    workers = Config.SWEEP_WORKERS if workers is None else workers

    tasks = [(base, spec, protocol, i, value)
             for i, value in enumerate(spec.values)
             for protocol in spec.protocols]
    logging.info(f"Sweep started: axis={spec.axis}, {len(spec.values)} values x {len(spec.protocols)} protocols, "
                 f"{spec.replications} replications, {workers} workers")

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, tasks))
    else:
        results = [_evaluate_point(t) for t in tasks]

    rows = [r['row'] for r in results]
    failed = sum(1 for r in results if not r['success'])
    if spec.optimize_nr and spec.axis == 'n_r':
        _mark_optimal_windows(rows)
    logging.info(f"Sweep finished: {len(rows)} rows, {failed} failed points")
    return rows


def handle(args):
    if args.spec:
        spec = SweepSpec.load(args.spec)
    else:
        if not args.axis:
            raise ConfigError([ConfigIssue('BadValue', 'give --spec or --axis with --values')])
        spec = SweepSpec(axis=args.axis, values=args.values or [])
    for name in ('protocols', 'replications', 'seed', 'scenario', 'slots'):
        value = getattr(args, name)
        if value is not None:
            setattr(spec, name, value)
    if args.optimize_nr:
        spec.optimize_nr = True
    if args.out is not None:
        spec.out = args.out
    if args.fmt is not None:
        spec.fmt = args.fmt

    rows = cmd_sweep(spec, workers=args.workers)
    write_output(render_rows(rows, spec.fmt), spec.out)
    return 0


def register(subparsers):
    parser = subparsers.add_parser('sweep', help='sweep one parameter across protocols')
    parser.add_argument('--spec', help='sweep spec JSON file')
    parser.add_argument('--scenario', help='base scenario JSON file')
    parser.add_argument('--axis', choices=sorted(AXES))
    parser.add_argument('--values', nargs='+', type=float)
    parser.add_argument('--protocols', nargs='+', choices=[p.value for p in Protocol])
    parser.add_argument('--replications', type=int)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--slots', type=int)
    parser.add_argument('--workers', type=int)
    parser.add_argument('--optimize-nr', action='store_true', dest='optimize_nr',
                        help='use the analytical optimum n_r for the proposed protocols at each point')
    parser.add_argument('--out')
    parser.add_argument('--format', choices=('csv', 'json'), dest='fmt')
    parser.set_defaults(handler=handle)
    return parser
