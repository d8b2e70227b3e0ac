import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value not in (None, '') else default


class Config:
    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()

    # Simulation defaults
    DEFAULT_SEED = _env_int('DEFAULT_SEED', 20240601)
    DEFAULT_SLOTS = _env_int('DEFAULT_SLOTS', 1_000_000)
    DEFAULT_REPLICATIONS = _env_int('DEFAULT_REPLICATIONS', 5)
    TRAFFIC_CHUNK_SLOTS = _env_int('TRAFFIC_CHUNK_SLOTS', 4096)

    # Sweep worker pool (bounded)
    SWEEP_WORKERS = _env_int('SWEEP_WORKERS', min(os.cpu_count() or 1, 8))

    # Analysis
    QUAD_TOL = _env_float('QUAD_TOL', 1e-6)
    NR_SCAN_MAX = _env_int('NR_SCAN_MAX', 20)

    # Load regime: warn when lambda * slot length exceeds this
    LOAD_WARNING_THRESHOLD = _env_float('LOAD_WARNING_THRESHOLD', 0.05)

    # Analysis vs simulation validation thresholds
    VALIDATE_MLR_ABS_TOL = _env_float('VALIDATE_MLR_ABS_TOL', 0.015)
    VALIDATE_MLR_SIGMAS = _env_float('VALIDATE_MLR_SIGMAS', 4.0)
    VALIDATE_RDC_REL_TOL = _env_float('VALIDATE_RDC_REL_TOL', 0.03)
    # Node placements pooled per point when distances are random
    VALIDATE_PLACEMENTS = _env_int('VALIDATE_PLACEMENTS', 8)

    # Batch means for standard errors
    STDERR_BATCHES = _env_int('STDERR_BATCHES', 20)

    # Result files
    CSV_SCHEMA = 'coded-relay-results/1'
