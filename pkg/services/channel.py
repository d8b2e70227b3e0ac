"""Physical layer shared by gateway and relays.

Covers frame airtime, path loss with block fading, the sensitivity floor and
same-SF capture. Everything here is a pure function of its arguments.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from models import AirtimeError
from utils import db_to_linear, integrate


def default_low_dr_optimize(sf, bandwidth_hz):
    """Low data rate optimization is mandated for SF11/12 at 125 kHz"""
    return 1 if sf >= 11 and bandwidth_hz <= 125_000 else 0


def airtime(sf, bandwidth_hz, coding_rate, preamble_symbols, explicit_header, payload_bytes,
            low_dr_optimize=None):
    """LoRa time on air in seconds (Semtech formula, CRC on).

    coding_rate is 1..4 for 4/5..4/8. low_dr_optimize=None picks the usual
    setting for the SF/bandwidth pair.
    """
    if not 7 <= sf <= 12:
        raise AirtimeError('BadSf', f"spreading factor must be in [7, 12], got {sf}")
    if payload_bytes < 1:
        raise AirtimeError('BadPayload', f"payload must be at least 1 byte, got {payload_bytes}")

    de = default_low_dr_optimize(sf, bandwidth_hz) if low_dr_optimize is None else int(low_dr_optimize)
    ih = 0 if explicit_header else 1

    t_sym = (2 ** sf) / bandwidth_hz
    t_preamble = (preamble_symbols + 4.25) * t_sym
    n_payload = 8 + max(
        math.ceil((8 * payload_bytes - 4 * sf + 28 + 16 - 20 * ih) / (4 * (sf - 2 * de))) * (coding_rate + 4),
        0,
    )
    return t_preamble + n_payload * t_sym


def rx_power(gamma_linear, fading_a, distance_m, alpha):
    """Received power in mW: gamma * A * d^-alpha"""
    return gamma_linear * fading_a * distance_m ** (-alpha)


# Fading

@dataclass(frozen=True)
class FadingLaw:
    """Distribution of the power-fading coefficient A (unit mean)"""
    name: str
    cdf: Callable
    pdf: Callable
    sampler: Callable

    def sample(self, rng, size=None):
        return self.sampler(rng, size)

    def support(self):
        return 0.0, math.inf


def _rayleigh_cdf(x):
    return -np.expm1(-np.maximum(x, 0.0))


def _rayleigh_pdf(x):
    return np.where(np.asarray(x) >= 0, np.exp(-np.maximum(x, 0.0)), 0.0)


def _rayleigh_sample(rng, size):
    return rng.standard_exponential(size)


# Block Rayleigh fading: |h|^2 is exponential with unit mean
RAYLEIGH = FadingLaw('rayleigh', _rayleigh_cdf, _rayleigh_pdf, _rayleigh_sample)


def fading_cdf(x):
    return float(_rayleigh_cdf(x))


def fading_pdf(x):
    return float(_rayleigh_pdf(x))


def sample_fading(rng, size=None):
    return _rayleigh_sample(rng, size)


@dataclass(frozen=True)
class LinkDraw:
    distance_m: float
    fading_a: float
    rx_power_mw: float

    @classmethod
    def draw(cls, rng, gamma_linear, distance_m, alpha, fading=RAYLEIGH):
        """One block-fading realisation of a link"""
        a = float(fading.sample(rng))
        return cls(distance_m, a, rx_power(gamma_linear, a, distance_m, alpha))


# Capture

class Contender(NamedTuple):
    frame_id: int
    rx_power_mw: float


def resolve_capture(contenders, sensitivity_mw, capture_threshold_db):
    """Return the frame that survives same-SF contention, or None.

    The winner must be at or above the sensitivity floor and stronger than
    every other contender by strictly more than the capture threshold.
    """
    if not contenders:
        return None
    best = None
    runner_up = 0.0
    for c in contenders:
        if best is None or c.rx_power_mw > best.rx_power_mw:
            if best is not None:
                runner_up = max(runner_up, best.rx_power_mw)
            best = c
        else:
            runner_up = max(runner_up, c.rx_power_mw)

    if best.rx_power_mw < sensitivity_mw:
        return None
    if len(contenders) == 1:
        return best.frame_id
    xi = db_to_linear(capture_threshold_db)
    if best.rx_power_mw > xi * runner_up:
        return best.frame_id
    return None


# Received-power distribution

def cdf_received_power(law, fading_cdf_fn, gamma_linear, alpha, x, tol=1e-8):
    """P(gamma * A * D^-alpha < x) for D drawn from law"""
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if law.is_fixed:
        return float(fading_cdf_fn(x * law.d ** alpha / gamma_linear))

    lo, hi = law.support()
    value = integrate(lambda u: float(fading_cdf_fn(x * u ** alpha / gamma_linear)) * float(law.pdf(u)),
                      lo, hi, tol)
    return min(max(value, 0.0), 1.0)


class ReceivedPowerCdf:
    """Callable F_R for one distance law.

    Fixed distances are evaluated in closed form; other laws are tabulated
    once on a log-spaced power grid and interpolated in log-power.
    """

    GRID_POINTS = 1500

    def __init__(self, law, gamma_linear, alpha, fading=RAYLEIGH, tol=1e-8):
        self.law = law
        self.gamma = gamma_linear
        self.alpha = alpha
        self.fading = fading
        self._grid = None
        self._values = None
        if not law.is_fixed:
            lo, hi = law.support()
            near = lo if lo > 0 else hi * 1e-3
            x_lo = gamma_linear * hi ** (-alpha) * 1e-9
            x_hi = gamma_linear * near ** (-alpha) * 1e4
            self._grid = np.linspace(math.log(x_lo), math.log(x_hi), self.GRID_POINTS)
            self._values = np.array([
                cdf_received_power(law, fading.cdf, gamma_linear, alpha, math.exp(g), tol) for g in self._grid
            ])

    def __call__(self, x):
        if x <= 0:
            return 0.0
        if self.law.is_fixed:
            return float(self.fading.cdf(x * self.law.d ** self.alpha / self.gamma))
        return float(np.interp(math.log(x), self._grid, self._values, left=0.0, right=1.0))


def sample_received_power(rng, law, gamma_linear, alpha, size, fading=RAYLEIGH):
    """Monte Carlo draws of the received power for a node drawn from law"""
    d = law.sample(rng, size) if not law.is_fixed else np.full(size, law.d)
    a = fading.sample(rng, size)
    return rx_power(gamma_linear, a, d, alpha)


