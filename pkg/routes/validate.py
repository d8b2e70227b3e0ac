import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from config import Config
from models import Protocol, ScenarioConfig, validate_config
from services.analysis import RelayAnalysis
from services.reports import write_output
from services.simulator import pool_metrics, run
from utils import add_scenario_arguments, derive_seed, dump_json, scenario_from_args

DEFAULT_GRID = {
    'n_sensors': (10, 20, 40),
    'n_r': (1, 5, 11),
    'protocols': (Protocol.SINGLE_RELAY.value, Protocol.COOPERATIVE.value),
}

PASS, FAIL, SKIPPED = 'pass', 'fail', 'skipped'


@dataclass
class ValidationPoint:
    protocol: str
    n_sensors: int
    n_r: int
    status: str = SKIPPED
    mlr_analysis: float | None = None
    mlr_sim: float | None = None
    mlr_sim_stderr: float | None = None
    mlr_tolerance: float | None = None
    rdc_analysis: float | None = None
    rdc_sim: float | None = None
    rdc_rel_error: float | None = None
    seed: int | None = None
    replications: int = 1
    reason: str = ''


def default_grid(base=None):
    base = ScenarioConfig.defaults() if base is None else base
    return [base.with_overrides(protocol=p, n_sensors=n, n_r=n_r)
            for p in DEFAULT_GRID['protocols']
            for n in DEFAULT_GRID['n_sensors']
            for n_r in DEFAULT_GRID['n_r']]


def check_point(scenario, n_slots=Config.DEFAULT_SLOTS, seed=Config.DEFAULT_SEED, analysis_overrides=None):
    """Compare analysis and simulation for one scenario.

    analysis_overrides changes only the analysis side, which is how a
    mismatched model is checked to fail. With random node distances the
    simulation is pooled over several placements.
    """
    cfg = validate_config(scenario)
    ana_cfg = validate_config(cfg.with_overrides(**analysis_overrides)) if analysis_overrides else cfg
    point = ValidationPoint(cfg.protocol.value, cfg.n_sensors, cfg.n_r, seed=seed)

    result = RelayAnalysis(ana_cfg).performance()
    if cfg.geometry.is_fixed:
        metrics = run(cfg, seed, n_slots)
    else:
        point.replications = Config.VALIDATE_PLACEMENTS
        metrics = pool_metrics(run(cfg, derive_seed(seed, rep), n_slots) for rep in range(point.replications))
    point.mlr_analysis = result.mlr
    # The simulator runs the real two-relay schedule, so compare against its exact duty cycle
    point.rdc_analysis = result.rdc_schedule
    point.mlr_sim = metrics.mlr_estimate
    point.mlr_sim_stderr = metrics.mlr_stderr
    point.rdc_sim = metrics.rdc_estimate

    if metrics.messages_generated == 0 or math.isnan(metrics.mlr_estimate):
        point.reason = 'no messages generated; MLR undefined'
        return point

    point.mlr_tolerance = max(Config.VALIDATE_MLR_ABS_TOL, Config.VALIDATE_MLR_SIGMAS * metrics.mlr_stderr)
    failures = []
    if abs(result.mlr - metrics.mlr_estimate) > point.mlr_tolerance:
        failures.append(f"|mlr diff| {abs(result.mlr - metrics.mlr_estimate):.4f} > {point.mlr_tolerance:.4f}")
    if point.rdc_analysis > 0:
        point.rdc_rel_error = abs(point.rdc_analysis - metrics.rdc_estimate) / point.rdc_analysis
        if point.rdc_rel_error > Config.VALIDATE_RDC_REL_TOL:
            failures.append(f"rdc relative error {point.rdc_rel_error:.4f} > {Config.VALIDATE_RDC_REL_TOL}")
    elif metrics.rdc_estimate > 0:
        failures.append('analysis predicts no relay traffic but the relays transmitted')

    point.status = FAIL if failures else PASS
    point.reason = '; '.join(failures)
    return point


def _check_task(task):
    scenario, n_slots, seed, overrides = task
    try:
        return check_point(scenario, n_slots, seed, overrides)
    except Exception as e:
        logging.error(f"Error validating {scenario.protocol} n={scenario.n_sensors} n_r={scenario.n_r}: {e}")
        return ValidationPoint(str(getattr(scenario.protocol, 'value', scenario.protocol)), scenario.n_sensors,
                               scenario.n_r, status=FAIL, seed=seed, reason=str(e))


def cmd_validate(scenarios, n_slots=Config.DEFAULT_SLOTS, seed=Config.DEFAULT_SEED, analysis_overrides=None,
                 workers=None):
    """Validation report over a grid of scenarios"""
    workers = Config.SWEEP_WORKERS if workers is None else workers
    tasks = [(s, n_slots, derive_seed(seed, i), analysis_overrides) for i, s in enumerate(scenarios)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_check_task, tasks))
    else:
        points = [_check_task(t) for t in tasks]

    counts = {status: sum(1 for p in points if p.status == status) for status in (PASS, FAIL, SKIPPED)}
    for p in points:
        if p.status == FAIL:
            logging.warning(f"Validation failed: {p.protocol} n={p.n_sensors} n_r={p.n_r}: {p.reason}")
    logging.info(f"Validation finished: {counts[PASS]} passed, {counts[FAIL]} failed, {counts[SKIPPED]} skipped")
    return {
        'passed': counts[FAIL] == 0,
        'counts': counts,
        'slots': n_slots,
        'points': [asdict(p) for p in points],
    }


def handle(args):
    base = scenario_from_args(args)
    scenarios = [base] if args.single else default_grid(base)
    overrides = {'capture_threshold_db': args.analysis_xi_db} if args.analysis_xi_db is not None else None
    report = cmd_validate(scenarios, args.slots, args.seed, overrides, args.workers)
    write_output(dump_json(report), args.out)
    return 0 if report['passed'] else 2


def register(subparsers):
    parser = subparsers.add_parser('validate', help='cross-check analysis against simulation')
    add_scenario_arguments(parser)
    parser.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    parser.add_argument('--slots', type=int, default=Config.DEFAULT_SLOTS)
    parser.add_argument('--workers', type=int)
    parser.add_argument('--single', action='store_true', help='validate only the given scenario instead of the grid')
    parser.add_argument('--analysis-xi-db', type=float, dest='analysis_xi_db',
                        help='capture threshold used on the analysis side only (negative control)')
    parser.set_defaults(handler=handle)
    return parser
