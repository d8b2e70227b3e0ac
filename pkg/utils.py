import json
import math
import warnings

import numpy as np
from scipy import integrate as sp_integrate



def db_to_linear(db):
    return 10.0 ** (0.1 * db)


def linear_to_db(value):
    return 10.0 * math.log10(value) if value > 0 else float('-inf')


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return linear_to_db(mw)


def format_duration(seconds):
    """Format duration in seconds to human readable format"""
    if not seconds:
        return "N/A"

    hours, remainder = divmod(int(seconds), 3600)
    minutes, seconds = divmod(remainder, 60)

    if hours > 0:
        return f"{hours}h {minutes}m {seconds}s"
    elif minutes > 0:
        return f"{minutes}m {seconds}s"
    else:
        return f"{seconds}s"


def integrate(fn, a, b, tol=1e-6):
    """Adaptive quadrature of fn over [a, b]; b may be +inf.

    Raises QuadratureNonConvergence instead of returning a silently poor value.
    """
    from models import QuadratureNonConvergence

    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('error', sp_integrate.IntegrationWarning)
        try:
            value, _ = sp_integrate.quad(fn, a, b, epsrel=tol, epsabs=tol * 1e-3, limit=200)
        except sp_integrate.IntegrationWarning as e:
            raise QuadratureNonConvergence(f"quadrature over [{a}, {b}] did not converge: {e}")
    if not math.isfinite(value):
        raise QuadratureNonConvergence(f"quadrature over [{a}, {b}] returned {value}")
    return value


def batch_means_stderr(outcomes, n_batches=20):
    """Standard error of the mean of a correlated 0/1 sequence via batch means"""
    x = np.asarray(outcomes, dtype=float)
    n = x.size
    if n == 0:
        return float('nan')
    batches = min(n_batches, n)
    if batches < 2:
        return 0.0
    size = n // batches
    means = x[:size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def json_default(obj):
    """json.dumps hook for numpy scalars and arrays"""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, np.floating):
        return _finite(float(obj))
    return obj


def dump_json(document):
    """Stable JSON text; NaN and infinities become null"""
    return json.dumps(_finite(document), indent=2, sort_keys=True, default=json_default, allow_nan=False)


# Command-line helpers shared by the routes

def add_scenario_arguments(parser):
    parser.add_argument('--scenario', help='scenario JSON file (defaults when omitted)')
    parser.add_argument('--protocol', help='override the scenario protocol')
    parser.add_argument('--nr', type=int, dest='n_r', help='override the receive window size')
    parser.add_argument('--sensors', type=int, dest='n_sensors', help='override the number of sensors')
    parser.add_argument('--out', default='-', help="output path ('-' for stdout)")
    parser.add_argument('--format', choices=('csv', 'json'), default='json', dest='fmt')


def scenario_from_args(args):
    """ScenarioConfig from --scenario plus any command-line overrides"""
    from models import ScenarioConfig, load_scenario

    cfg = load_scenario(args.scenario) if getattr(args, 'scenario', None) else ScenarioConfig.defaults()
    overrides = {}
    for name in ('protocol', 'n_r', 'n_sensors'):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg


def derive_seed(*parts):
    """Deterministic 63-bit seed from a tuple of non-negative integers"""
    seq = np.random.SeedSequence([int(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
