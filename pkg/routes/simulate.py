import logging

from config import Config
from models import validate_config
from services.reports import metrics_to_csv, write_output
from services.simulator import pool_metrics, run
from utils import add_scenario_arguments, derive_seed, dump_json, format_duration, scenario_from_args


def replication_seed(seed, replication):
    return seed if replication == 0 else derive_seed(seed, replication)


def cmd_simulate(scenario, seed=Config.DEFAULT_SEED, n_slots=Config.DEFAULT_SLOTS, replications=1, trace_path=None):
    """Run one scenario for a number of replications and pool the metrics"""
    cfg = validate_config(scenario)
    runs = []
    for rep in range(replications):
        # Only the first replication is traced
        trace = trace_path if rep == 0 else None
        runs.append(run(cfg, replication_seed(seed, rep), n_slots, trace_path=trace))
    pooled = pool_metrics(runs)
    logging.info(f"Simulated {replications} x {n_slots} slots ({format_duration(n_slots * cfg.slot_len_s)} of network time)")
    return {
        'scenario': cfg.to_dict(),
        'runs': [r.to_dict() for r in runs],
        'pooled': pooled.to_dict(),
    }


def handle(args):
    doc = cmd_simulate(scenario_from_args(args), args.seed, args.slots, args.replications, args.trace)
    if args.fmt == 'csv':
        text = metrics_to_csv(doc['runs'])
    else:
        text = dump_json(doc)
    write_output(text, args.out)
    return 0


def register(subparsers):
    parser = subparsers.add_parser('simulate', help='slot-level Monte Carlo simulation')
    add_scenario_arguments(parser)
    parser.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    parser.add_argument('--slots', type=int, default=Config.DEFAULT_SLOTS)
    parser.add_argument('--replications', type=int, default=1)
    parser.add_argument('--trace', help='write a JSON-lines event trace of the first replication')
    parser.set_defaults(handler=handle)
    return parser
