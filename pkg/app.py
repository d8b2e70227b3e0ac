import argparse
import logging
import sys

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from config import Config
from models import ConfigError, RelayModelError

# Configure logging
logging.basicConfig(
    level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
    format='%(asctime)s %(levelname)s %(message)s',
    stream=sys.stderr,
)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_VALIDATION_FAILURE = 2


def create_parser():
    parser = argparse.ArgumentParser(
        prog='coded-relay',
        description='Coded relaying for slotted LoRa sensor networks: analysis, simulation and sweeps',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    # Register commands
    from routes.analyze import register as register_analyze
    from routes.simulate import register as register_simulate
    from routes.sweep import register as register_sweep
    from routes.optimal import register as register_optimal
    from routes.validate import register as register_validate

    register_analyze(subparsers)
    register_simulate(subparsers)
    register_sweep(subparsers)
    register_optimal(subparsers)
    register_validate(subparsers)
    return parser


def main(argv=None):
    parser = create_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        for issue in e.errors:
            logging.error(f"Configuration error: {issue}")
        return EXIT_CONFIG_ERROR
    except RelayModelError as e:
        logging.error(f"Error running {args.command}: {e}")
        return EXIT_CONFIG_ERROR
    except (OSError, ValueError) as e:
        logging.error(f"Error running {args.command}: {e}")
        return EXIT_CONFIG_ERROR
