import logging
from dataclasses import dataclass

from config import Config
from models import UnsupportedProtocolForAnalysis, validate_config
from services.analysis import RelayAnalysis
from services.reports import write_output
from utils import add_scenario_arguments, dump_json, scenario_from_args


@dataclass(frozen=True)
class WindowScan:
    n_sensors: int
    protocol: str
    n_r_opt: int
    mlr_opt: float
    mlr_by_n_r: dict

    def to_dict(self):
        return {
            'n_sensors': self.n_sensors,
            'protocol': self.protocol,
            'n_r_opt': self.n_r_opt,
            'mlr_opt': self.mlr_opt,
            'mlr_by_n_r': {str(k): v for k, v in self.mlr_by_n_r.items()},
        }


def scan_n_r(scenario, n_r_max=Config.NR_SCAN_MAX):
    """Analytical MLR for every n_r in 1..n_r_max; ties go to the smaller window"""
    cfg = validate_config(scenario)
    if not cfg.protocol.is_proposed:
        raise UnsupportedProtocolForAnalysis(f"no window scan for {cfg.protocol.value}")
    if n_r_max < 1:
        raise ValueError(f"n_r_max must be >= 1, got {n_r_max}")

    model = RelayAnalysis(cfg)
    mlrs = {}
    best_n_r, best_mlr = None, None
    for n_r in range(1, n_r_max + 1):
        mlr = model.window_result(n_r).mlr
        mlrs[n_r] = mlr
        if best_mlr is None or mlr < best_mlr:
            best_n_r, best_mlr = n_r, mlr
    return WindowScan(cfg.n_sensors, cfg.protocol.value, best_n_r, best_mlr, mlrs)


def cmd_optimal_nr(scenario, n_r_max=Config.NR_SCAN_MAX):
    """(n_r*, mlr*) for one scenario"""
    scan = scan_n_r(scenario, n_r_max)
    return scan.n_r_opt, scan.mlr_opt


def handle(args):
    base = scenario_from_args(args)
    sensor_counts = args.sensor_list or [None]
    scans = []
    for n in sensor_counts:
        scenario = base if n is None else base.with_overrides(n_sensors=n)
        scan = scan_n_r(scenario, args.n_r_max)
        logging.info(f"Optimal window for n={scan.n_sensors} ({scan.protocol}): n_r*={scan.n_r_opt}, mlr*={scan.mlr_opt:.6f}")
        scans.append(scan)

    if args.fmt == 'csv':
        lines = ['n_sensors,protocol,n_r_opt,mlr_opt']
        lines += [f"{s.n_sensors},{s.protocol},{s.n_r_opt},{s.mlr_opt:.10g}" for s in scans]
        text = '\n'.join(lines) + '\n'
    else:
        text = dump_json([s.to_dict() for s in scans])
    write_output(text, args.out)
    return 0


def register(subparsers):
    parser = subparsers.add_parser('optimal-nr', help='receive window size that minimises the analytical MLR')
    add_scenario_arguments(parser)
    parser.add_argument('--nr-max', type=int, default=Config.NR_SCAN_MAX, dest='n_r_max')
    parser.add_argument('--sensor-list', type=int, nargs='+', dest='sensor_list',
                        help='repeat the scan for each sensor count')
    parser.set_defaults(handler=handle)
    return parser
