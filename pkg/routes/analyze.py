import logging

from models import UnsupportedProtocolForAnalysis, validate_config
from services.analysis import RelayAnalysis
from services.reports import metrics_to_csv, write_output
from utils import add_scenario_arguments, dump_json, scenario_from_args


def cmd_analyze(scenario):
    """Audit document of every analytical intermediate for one scenario"""
    cfg = validate_config(scenario)
    if not cfg.protocol.is_proposed:
        raise UnsupportedProtocolForAnalysis(
            f"{cfg.protocol.value} has no closed-form model; use the simulate command")
    doc = RelayAnalysis(cfg).audit()
    logging.info(f"Analysis done: protocol={cfg.protocol.value}, n_r={cfg.n_r}, mlr={doc['mlr']:.6f}, rdc={doc['rdc']:.6f}")
    return doc


def handle(args):
    doc = cmd_analyze(scenario_from_args(args))
    text = metrics_to_csv([doc]) if args.fmt == 'csv' else dump_json(doc)
    write_output(text, args.out)
    return 0


def register(subparsers):
    parser = subparsers.add_parser('analyze', help='closed-form MLR and RDC with all intermediates')
    add_scenario_arguments(parser)
    parser.set_defaults(handler=handle)
    return parser
