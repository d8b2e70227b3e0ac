"""Closed-form message loss rate and relay duty cycle of the coded relaying protocols.

Expectations over fading and node distances are computed by deterministic
adaptive quadrature, so every number produced here is seed-free.
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from functools import cached_property

from scipy.stats import binom, poisson

from models import (
    DistanceLaw, FOutOfRange, CodedFrameOverflow, Protocol, UnsupportedProtocolForAnalysis, ensure_validated,
)
from services.channel import RAYLEIGH, FadingLaw, ReceivedPowerCdf
from utils import integrate

# Fading loss below this counts as a clear link margin
CLEAR_MARGIN_LOSS = 1e-6


@dataclass(frozen=True)
class LinkProbabilities:
    s_dir: float
    s_sr: float
    s_rg: float
    s_c: float
    p_gr: float
    f: float
    p_rw: float
    nu: float

    def check(self):
        for name in ('s_dir', 's_sr', 's_rg', 's_c', 'p_gr', 'f', 'p_rw'):
            value = getattr(self, name)
            assert 0.0 <= value <= 1.0, f"{name}={value} outside [0, 1]"
        assert self.p_gr + self.f <= 1.0 + 1e-12, f"p_gr + f = {self.p_gr + self.f} > 1"
        assert self.nu >= 0.0
        return self


@dataclass(frozen=True)
class PerformanceResult:
    protocol: Protocol
    n_r: int
    mlr: float
    rdc: float
    rdc_schedule: float
    rdc_per_relay: float
    l_av_s: float
    s_rel: float
    intermediates: LinkProbabilities

    def to_dict(self):
        data = {
            'protocol': self.protocol.value,
            'n_r': self.n_r,
            'mlr': self.mlr,
            'rdc': self.rdc,
            'rdc_schedule': self.rdc_schedule,
            'rdc_per_relay': self.rdc_per_relay,
            'l_av_s': self.l_av_s,
            's_rel': self.s_rel,
        }
        data.update(asdict(self.intermediates))
        return data


def expect(fn, laws, tol=1e-6):
    """E[fn(X1, ..., Xk)] for independent Xi drawn from laws.

    Each entry of laws is a FadingLaw or DistanceLaw, or a (law, lower) pair
    where lower(outer_values) gives a lower integration limit below which fn
    is known to vanish. Fixed distances collapse their dimension exactly.
    """
    laws = list(laws)

    def nest(prefix, idx):
        if idx == len(laws):
            return fn(*prefix)
        entry = laws[idx]
        law, lower = entry if isinstance(entry, tuple) else (entry, None)
        if isinstance(law, DistanceLaw) and law.is_fixed:
            return nest(prefix + (law.d,), idx + 1)
        lo, hi = law.support()
        if lower is not None:
            lo = max(lo, lower(prefix))
        if lo >= hi:
            return 0.0
        return integrate(lambda x: float(law.pdf(x)) * nest(prefix + (x,), idx + 1), lo, hi, tol)

    return nest((), 0)


def p_rw(n_r):
    """Probability that a frame falls in the single relay's receive window"""
    if n_r < 1:
        raise ValueError(f"n_r must be >= 1, got {n_r}")
    return n_r / (n_r + 1.0)


def s_c_forms(p_gr, f, n_r):
    """Decodability of a coded frame: (binomial sum, closed form)"""
    others = n_r - 1
    terms = [math.comb(others, m) * p_gr ** m * f ** (others - m) for m in range(others + 1)]
    return math.fsum(terms), (p_gr + f) ** others


class RelayAnalysis:
    """Analytical model of one scenario.

    Link-level quantities do not depend on the window size and are computed
    once; window_result() evaluates any n_r against them.
    """

    def __init__(self, cfg, fading: FadingLaw = RAYLEIGH):
        self.cfg = ensure_validated(cfg)
        self.fading = fading
        c = self.cfg
        self.gamma = c.gamma_linear
        self.alpha = c.alpha
        self.xi = c.xi_linear
        self.zeta_sensor = c.sensitivity_mw(c.sf_sensor)
        self.zeta_relay = c.sensitivity_mw(c.sf_relay)
        self.n = c.n_sensors
        self.p_tx = c.p_tx
        self.nu = c.nu
        self.tol = c.quad_tol
        self.gw_law = c.geometry.sensor_gateway
        self.relay_law = c.geometry.sensor_relay
        self._cdf_gw = ReceivedPowerCdf(self.gw_law, self.gamma, self.alpha, fading)
        self._cdf_relay = ReceivedPowerCdf(self.relay_law, self.gamma, self.alpha, fading)

    # Building blocks

    def a_min(self, d, zeta=None):
        """Smallest fading coefficient that keeps a frame above sensitivity"""
        zeta = self.zeta_sensor if zeta is None else zeta
        return zeta * d ** self.alpha / self.gamma

    def lambda_gw(self, a, d):
        """Probability that one interferer at the gateway is weak enough to be captured over"""
        return self._cdf_gw(self.gamma * a * d ** (-self.alpha) / self.xi)

    def lambda_relay(self, a, d):
        return self._cdf_relay(self.gamma * a * d ** (-self.alpha) / self.xi)

    def interference_survival(self, x):
        """E[x^K] with K ~ Poisson(nu) interferers.

        The exponential form extends the sum to infinity; the exact form keeps
        the n - 1 terms that are physically possible.
        """
        base = math.exp(-self.nu * (1.0 - x))
        if self.cfg.poisson_sum == 'exact':
            return base * float(poisson.cdf(self.n - 1, self.nu * x))
        return base

    def _above_sensitivity(self):
        return self.fading, lambda outer: self.a_min(outer[-1])

    # Link expectations

    @cached_property
    def direct_frame(self):
        """S_dir: the gateway receives a frame directly"""
        return expect(lambda d, a: self.interference_survival(self.lambda_gw(a, d)),
                      [self.gw_law, self._above_sensitivity()], self.tol)

    @cached_property
    def relay_frame(self):
        """A frame sent in a receive window is captured by the relay"""
        return expect(lambda d, a: self.interference_survival(self.lambda_relay(a, d)),
                      [self.relay_law, self._above_sensitivity()], self.tol)

    @cached_property
    def both_frame(self):
        """A frame sent in a receive window reaches both the relay and the gateway"""
        return expect(
            lambda d0, a0, d1, a1: self.interference_survival(self.lambda_gw(a0, d0) * self.lambda_relay(a1, d1)),
            [self.gw_law, self._above_sensitivity(), self.relay_law, self._above_sensitivity()],
            self.tol,
        )

    @property
    def margins_clear(self):
        if not (self.gw_law.is_fixed and self.relay_law.is_fixed):
            return False
        loss_gw = float(self.fading.cdf(self.a_min(self.gw_law.d)))
        loss_relay = float(self.fading.cdf(self.a_min(self.relay_law.d)))
        return max(loss_gw, loss_relay) <= CLEAR_MARGIN_LOSS

    @cached_property
    def lost_at_gateway_relayed(self):
        """Per-frame probability of gateway loss with relay reception, given the frame is in a receive window"""
        method = self.cfg.s_sr_method
        if method == 'auto':
            method = 'clustered' if self.margins_clear else 'general'
        if method == 'general':
            return max(self.relay_frame - self.both_frame, 0.0)
        if not (self.gw_law.is_fixed and self.relay_law.is_fixed):
            raise ValueError('clustered s_sr form needs fixed distances on both sensor links')

        # Clustered sensors with negligible fading loss
        d0, d1 = self.gw_law.d, self.relay_law.d
        relay_only = expect(lambda a1: self.interference_survival(self.lambda_relay(a1, d1)),
                            [self.fading], self.tol)
        both = expect(lambda a0, a1: self.interference_survival(self.lambda_gw(a0, d0) * self.lambda_relay(a1, d1)),
                      [self.fading, self.fading], self.tol)
        return max(relay_only - both, 0.0)

    @cached_property
    def s_rg(self):
        """Relay-to-gateway delivery; relay frames only suffer fading"""
        return 1.0 - float(self.fading.cdf(self.a_min(self.cfg.geometry.d_r, self.zeta_relay)))

    @cached_property
    def f_raw(self):
        return 1.0 - self.n * self.p_tx * self.relay_frame

    @cached_property
    def f(self):
        """Probability that the relay captures nothing in a receive-window slot"""
        value = self.f_raw
        if not 0.0 <= value <= 1.0:
            message = f"empty-slot probability f={value:.6f} outside [0, 1]; clamped (load beyond the linear model)"
            logging.warning(message)
            warnings.warn(message, FOutOfRange, stacklevel=2)
        return min(max(value, 0.0), 1.0)

    @cached_property
    def p_gr(self):
        """Per-slot probability that the relay captures a frame the gateway also received"""
        value = self.n * self.p_tx * self.both_frame
        return min(max(value, 0.0), 1.0 - self.f)

    # Window-dependent results

    def s_c(self, n_r):
        binomial_sum, closed = s_c_forms(self.p_gr, self.f, n_r)
        if n_r <= 64:
            assert abs(binomial_sum - closed) <= 1e-12, f"s_c forms disagree: {binomial_sum} vs {closed}"
        return closed

    def l_av(self, n_r):
        """Mean coded-frame airtime per transmit window, seconds"""
        c = self.cfg
        q = 1.0 - self.f
        return math.fsum(
            float(binom.pmf(m, n_r, q)) * c.frame_airtime(c.sf_relay, c.coded_bytes(m)) for m in range(1, n_r + 1)
        )

    def window_result(self, n_r, protocol=None):
        c = self.cfg
        protocol = c.protocol if protocol is None else Protocol(protocol)
        if not protocol.is_proposed:
            raise UnsupportedProtocolForAnalysis(f"no closed-form model for {protocol.value}")

        # Both relays together behave like one full-duplex relay that always listens
        prw = 1.0 if protocol is Protocol.COOPERATIVE else p_rw(n_r)
        s_dir = self.direct_frame
        s_sr = prw * self.lost_at_gateway_relayed
        s_c = self.s_c(n_r)
        s_rel = s_sr * self.s_rg * s_c
        mlr = 1.0 - s_dir - s_rel
        assert -1e-12 <= mlr <= 1.0 + 1e-12, f"mlr={mlr} outside [0, 1]"
        mlr = min(max(mlr, 0.0), 1.0)

        worst = c.frame_airtime(c.sf_relay, c.coded_bytes(n_r))
        if worst > c.slot_len_s:
            message = (f"coded frame with {n_r} messages needs {worst * 1e3:.3f} ms, "
                       f"longer than the {c.slot_len_s * 1e3:.3f} ms transmit slot")
            logging.warning(message)
            warnings.warn(message, CodedFrameOverflow, stacklevel=2)

        l_av = self.l_av(n_r)
        if protocol is Protocol.COOPERATIVE:
            n_s = n_r - 1
            per_relay = l_av / ((n_r + n_s + 1) * c.slot_len_s)
            rdc = l_av / ((n_r + 0.5) * c.slot_len_s)
            # Both relays over the 2 * n_r slot cycle they actually run
            rdc_schedule = 2.0 * per_relay
        else:
            rdc = l_av / ((n_r + 1) * c.slot_len_s)
            per_relay = rdc
            rdc_schedule = rdc

        links = LinkProbabilities(
            s_dir=s_dir, s_sr=s_sr, s_rg=self.s_rg, s_c=s_c, p_gr=self.p_gr, f=self.f, p_rw=prw, nu=self.nu,
        ).check()
        return PerformanceResult(protocol, n_r, mlr, rdc, rdc_schedule, per_relay, l_av, s_rel, links)

    def performance(self):
        return self.window_result(self.cfg.n_r)

    def audit(self):
        """Flat key-value document of every intermediate"""
        result = self.performance()
        binomial_sum, closed = s_c_forms(self.p_gr, self.f, result.n_r)
        doc = result.to_dict()
        doc.update({
            'n_sensors': self.n,
            'p_tx': self.p_tx,
            'slot_len_s': self.cfg.slot_len_s,
            'gamma_db': self.cfg.gamma_db,
            'poisson_sum': self.cfg.poisson_sum,
            'p_gr_frame': self.both_frame,
            'relay_frame': self.relay_frame,
            'f_raw': self.f_raw,
            's_c_binomial_sum': binomial_sum,
            's_c_closed_form': closed,
            'recovery_delay_slots': (result.n_r + 1) / 2.0,
        })
        return doc


# Module-level entry points

def s_dir(cfg):
    return RelayAnalysis(cfg).direct_frame


def s_sr(cfg):
    model = RelayAnalysis(cfg)
    prw = 1.0 if model.cfg.protocol is Protocol.COOPERATIVE else p_rw(model.cfg.n_r)
    return prw * model.lost_at_gateway_relayed


def s_rg(cfg):
    return RelayAnalysis(cfg).s_rg


def p_gr(cfg):
    return RelayAnalysis(cfg).p_gr


def f(cfg):
    return RelayAnalysis(cfg).f


def s_c(cfg):
    model = RelayAnalysis(cfg)
    return model.s_c(model.cfg.n_r)


def performance(cfg):
    return RelayAnalysis(cfg).performance()


def mlr(cfg):
    return performance(cfg)


def rdc(cfg):
    return performance(cfg)


def audit(cfg):
    return RelayAnalysis(cfg).audit()
