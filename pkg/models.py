"""Domain types shared by the channel model, the analysis and the simulator."""

import dataclasses
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from config import Config
from utils import db_to_linear, dbm_to_mw


class Protocol(str, Enum):
    NO_RELAY = 'NoRelay'
    IMMEDIATE = 'ImmediateForwarding'
    UNCODED = 'UncodedForwarding'
    SINGLE_RELAY = 'SingleRelayCoded'
    COOPERATIVE = 'Cooperative'

    @property
    def is_proposed(self):
        """Protocols that have a closed-form model"""
        return self in (Protocol.SINGLE_RELAY, Protocol.COOPERATIVE)

    @property
    def has_windows(self):
        """Protocols driven by a receive/transmit window schedule"""
        return self in (Protocol.UNCODED, Protocol.SINGLE_RELAY, Protocol.COOPERATIVE)

    @property
    def relay_count(self):
        if self is Protocol.NO_RELAY:
            return 0
        return 2 if self is Protocol.COOPERATIVE else 1


class Phase(str, Enum):
    RECEIVE = 'Receive'
    TRANSMIT = 'Transmit'
    SLEEP = 'Sleep'


# Errors

class RelayModelError(Exception):
    """Base class for all model errors"""


@dataclass(frozen=True)
class ConfigIssue:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


class ConfigError(RelayModelError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('; '.join(str(e) for e in self.errors))

    @property
    def codes(self):
        return [e.code for e in self.errors]


class AirtimeError(RelayModelError):
    def __init__(self, code, message):
        self.code = code
        super().__init__(f"{code}: {message}")


class QuadratureNonConvergence(RelayModelError):
    pass


class UnsupportedProtocolForAnalysis(RelayModelError):
    pass


# Warnings

class LoadRegimeWarning(UserWarning):
    pass


class FOutOfRange(UserWarning):
    pass


class CodedFrameOverflow(UserWarning):
    pass


class SequenceWrapWarning(UserWarning):
    pass


# Geometry

@dataclass(frozen=True)
class DistanceLaw:
    """Distance distribution in meters.

    FixedDistance(d) is a point mass; UniformAnnulus and UniformDisc place the
    node uniformly by area, so the pdf grows linearly with the radius.
    """
    variant: str
    d: float = 0.0
    r_min: float = 0.0
    r_max: float = 0.0

    FIXED = 'FixedDistance'
    ANNULUS = 'UniformAnnulus'
    DISC = 'UniformDisc'

    @classmethod
    def fixed(cls, d):
        return cls(cls.FIXED, d=float(d), r_min=float(d), r_max=float(d))

    @classmethod
    def annulus(cls, r_min, r_max):
        return cls(cls.ANNULUS, r_min=float(r_min), r_max=float(r_max))

    @classmethod
    def disc(cls, r_max):
        return cls(cls.DISC, r_min=0.0, r_max=float(r_max))

    @property
    def is_fixed(self):
        return self.variant == self.FIXED

    def support(self):
        return self.r_min, self.r_max

    def pdf(self, x):
        if self.is_fixed:
            raise ValueError('FixedDistance has no density')
        x = np.asarray(x, dtype=float)
        inside = (x >= self.r_min) & (x <= self.r_max)
        dens = 2.0 * x / (self.r_max ** 2 - self.r_min ** 2)
        return np.where(inside, dens, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_fixed:
            return np.where(x >= self.d, 1.0, 0.0)
        clipped = np.clip(x, self.r_min, self.r_max)
        return (clipped ** 2 - self.r_min ** 2) / (self.r_max ** 2 - self.r_min ** 2)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.is_fixed:
            return np.full_like(q, self.d)
        return np.sqrt(self.r_min ** 2 + q * (self.r_max ** 2 - self.r_min ** 2))

    def sample(self, rng, size):
        # Inverse-cdf sampling keeps samples consistent with cdf()
        return self.ppf(rng.random(size))

    def median(self):
        return float(self.ppf(0.5))

    def issues(self, label):
        problems = []
        if self.variant not in (self.FIXED, self.ANNULUS, self.DISC):
            problems.append(ConfigIssue('BadGeometry', f"{label}: unknown distance law {self.variant!r}"))
        elif self.is_fixed and not self.d > 0:
            problems.append(ConfigIssue('BadGeometry', f"{label}: distance must be positive"))
        elif self.variant == self.ANNULUS and not (0 < self.r_min <= self.r_max):
            problems.append(ConfigIssue('BadGeometry', f"{label}: annulus needs 0 < r_min <= r_max"))
        elif self.variant == self.DISC and not self.r_max > 0:
            problems.append(ConfigIssue('BadGeometry', f"{label}: disc radius must be positive"))
        return problems

    def to_dict(self):
        if self.is_fixed:
            return {'variant': self.variant, 'd': self.d}
        if self.variant == self.DISC:
            return {'variant': self.variant, 'r_max': self.r_max}
        return {'variant': self.variant, 'r_min': self.r_min, 'r_max': self.r_max}

    @classmethod
    def from_dict(cls, data, label):
        data = dict(data)
        variant = data.pop('variant', None)
        allowed = {cls.FIXED: {'d'}, cls.ANNULUS: {'r_min', 'r_max'}, cls.DISC: {'r_max'}}
        if variant not in allowed:
            raise ConfigError([ConfigIssue('BadGeometry', f"{label}: unknown distance law {variant!r}")])
        unknown = set(data) - allowed[variant]
        if unknown:
            raise ConfigError([ConfigIssue('UnknownKey', f"{label}: unknown keys {sorted(unknown)}")])
        try:
            if variant == cls.FIXED:
                return cls.fixed(data['d'])
            if variant == cls.DISC:
                return cls.disc(data['r_max'])
            return cls.annulus(data['r_min'], data['r_max'])
        except KeyError as e:
            raise ConfigError([ConfigIssue('BadGeometry', f"{label}: missing {e.args[0]!r}")])


@dataclass(frozen=True)
class Geometry:
    sensor_gateway: DistanceLaw = DistanceLaw.fixed(2000.0)
    sensor_relay: DistanceLaw = DistanceLaw.fixed(1000.0)
    d_r: float = 1000.0

    @property
    def is_fixed(self):
        return self.sensor_gateway.is_fixed and self.sensor_relay.is_fixed

    def to_dict(self):
        return {
            'sensor_gateway': self.sensor_gateway.to_dict(),
            'sensor_relay': self.sensor_relay.to_dict(),
            'd_r': self.d_r,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {'sensor_gateway', 'sensor_relay', 'd_r'}
        if unknown:
            raise ConfigError([ConfigIssue('UnknownKey', f"geometry: unknown keys {sorted(unknown)}")])
        base = cls()
        return cls(
            sensor_gateway=DistanceLaw.from_dict(data['sensor_gateway'], 'geometry.sensor_gateway')
            if 'sensor_gateway' in data else base.sensor_gateway,
            sensor_relay=DistanceLaw.from_dict(data['sensor_relay'], 'geometry.sensor_relay')
            if 'sensor_relay' in data else base.sensor_relay,
            d_r=float(data.get('d_r', base.d_r)),
        )


DEFAULT_SENSITIVITY_DBM = {7: -123.0, 8: -126.0, 9: -129.0, 10: -132.0, 11: -134.5, 12: -137.0}

AUTO = 'auto'


@dataclass(frozen=True)
class ScenarioConfig:
    """All channel, traffic, geometry and protocol parameters of one scenario.

    Fields that accept "auto" are resolved by validate_config().
    """
    n_sensors: int = 20
    lambda_rate: float = 1.0 / 17.5
    slot_len_s: float | str = AUTO
    sf_sensor: int = 8
    sf_relay: int = 7
    bandwidth_hz: float = 125_000.0
    coding_rate: int = 1
    preamble_symbols: int = 8
    explicit_header: bool = True
    low_dr_optimize: int | str = AUTO
    b_pl: int = 10
    b_id: int = 1
    b_seq: int = 1
    path_loss_exponent: float = 3.5
    gamma_db: float | str = AUTO
    sensitivity_dbm_by_sf: dict = field(default_factory=lambda: dict(DEFAULT_SENSITIVITY_DBM))
    capture_threshold_db: float = 6.0
    geometry: Geometry = field(default_factory=Geometry)
    protocol: Protocol = Protocol.SINGLE_RELAY
    n_r: int = 11
    n_s: int | str = AUTO
    cap_uncoded: int | str = AUTO
    warmup_slots: int | str = AUTO
    cooldown_slots: int | str = AUTO
    poisson_sum: str = 'exponential'
    s_sr_method: str = AUTO
    quad_tol: float = Config.QUAD_TOL

    def __post_init__(self):
        if isinstance(self.protocol, str) and not isinstance(self.protocol, Protocol):
            try:
                object.__setattr__(self, 'protocol', Protocol(self.protocol))
            except ValueError:
                pass

    @classmethod
    def defaults(cls):
        return cls()

    def with_overrides(self, **changes):
        """Return an unvalidated copy with the given fields replaced"""
        values = {f.name: getattr(self, f.name) for f in dataclasses.fields(ScenarioConfig)}
        if isinstance(self, ValidatedConfig) and {'n_r', 'protocol'} & set(changes):
            # Window-derived fields follow the new schedule
            for name in ('n_s', 'warmup_slots', 'cooldown_slots'):
                values[name] = AUTO
        values.update(changes)
        return ScenarioConfig(**values)

    def to_dict(self):
        data = {}
        for f in dataclasses.fields(ScenarioConfig):
            value = getattr(self, f.name)
            if f.name == 'geometry':
                value = value.to_dict()
            elif f.name == 'protocol':
                value = value.value
            elif f.name == 'sensitivity_dbm_by_sf':
                value = {str(k): v for k, v in sorted(value.items())}
            data[f.name] = value
        return data


@dataclass(frozen=True)
class ValidatedConfig(ScenarioConfig):
    """A ScenarioConfig with every "auto" field resolved and all invariants checked"""

    @property
    def gamma_linear(self):
        return db_to_linear(self.gamma_db)

    @property
    def xi_linear(self):
        return db_to_linear(self.capture_threshold_db)

    @property
    def alpha(self):
        return self.path_loss_exponent

    def sensitivity_mw(self, sf):
        return dbm_to_mw(self.sensitivity_dbm_by_sf[sf])

    @property
    def message_bytes(self):
        """Payload of one sensor frame (id + sequence number + data)"""
        return self.b_id + self.b_seq + self.b_pl

    def coded_bytes(self, m):
        """Payload of a coded frame summing m messages"""
        return self.b_pl + m * (self.b_id + self.b_seq)

    def frame_airtime(self, sf, payload_bytes):
        from services.channel import airtime
        de = self.low_dr_optimize
        if de == AUTO:
            de = None
        return airtime(sf, self.bandwidth_hz, self.coding_rate, self.preamble_symbols,
                       self.explicit_header, payload_bytes, de)

    @property
    def p_tx(self):
        return p_tx(self)

    @property
    def nu(self):
        """Mean number of interferers seen by one frame"""
        return (self.n_sensors - 1) * self.p_tx

    @property
    def cycle_slots(self):
        return self.n_r + self.n_s + 1


def p_tx(cfg):
    """Probability that a sensor transmits in a given slot"""
    return -math.expm1(-cfg.lambda_rate * cfg.slot_len_s)


def _is_int(value):
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def check_config(cfg):
    """Return every invariant violation of cfg (empty list when valid)"""
    from services.channel import airtime

    problems = []
    if not _is_int(cfg.n_sensors) or cfg.n_sensors < 1:
        problems.append(ConfigIssue('BadSensorCount', f"n_sensors must be an integer >= 1, got {cfg.n_sensors!r}"))
    if not isinstance(cfg.lambda_rate, (int, float)) or cfg.lambda_rate < 0 or math.isnan(cfg.lambda_rate):
        problems.append(ConfigIssue('NegativeRate', f"lambda_rate must be >= 0, got {cfg.lambda_rate!r}"))
    for name in ('sf_sensor', 'sf_relay'):
        sf = getattr(cfg, name)
        if not _is_int(sf) or not 7 <= sf <= 12:
            problems.append(ConfigIssue('BadSf', f"{name} must be in [7, 12], got {sf!r}"))
        elif sf not in cfg.sensitivity_dbm_by_sf:
            problems.append(ConfigIssue('BadValue', f"no sensitivity entry for SF{sf}"))
    if not _is_int(cfg.n_r) or cfg.n_r < 1:
        problems.append(ConfigIssue('InvalidWindow', f"n_r must be >= 1, got {cfg.n_r!r}"))
    elif cfg.n_s != AUTO:
        if cfg.protocol is Protocol.COOPERATIVE and cfg.n_s != cfg.n_r - 1:
            problems.append(ConfigIssue('InvalidWindow', f"cooperative schedule needs n_s = n_r - 1, got n_s={cfg.n_s}"))
        elif not _is_int(cfg.n_s) or cfg.n_s < 0:
            problems.append(ConfigIssue('InvalidWindow', f"n_s must be >= 0, got {cfg.n_s!r}"))
        elif cfg.protocol is not Protocol.COOPERATIVE and cfg.n_s != 0:
            problems.append(ConfigIssue('InvalidWindow', f"only the cooperative schedule has a sleep window, got n_s={cfg.n_s}"))
    for name in ('b_pl', 'b_id', 'b_seq'):
        if not _is_int(getattr(cfg, name)) or getattr(cfg, name) < 1:
            problems.append(ConfigIssue('BadValue', f"{name} must be a positive integer"))
    if cfg.coding_rate not in (1, 2, 3, 4):
        problems.append(ConfigIssue('BadValue', f"coding_rate must be 1..4 (4/5..4/8), got {cfg.coding_rate!r}"))
    if not cfg.bandwidth_hz > 0:
        problems.append(ConfigIssue('BadValue', 'bandwidth_hz must be positive'))
    if not cfg.path_loss_exponent > 0:
        problems.append(ConfigIssue('BadValue', 'path_loss_exponent must be positive'))
    if cfg.poisson_sum not in ('exponential', 'exact'):
        problems.append(ConfigIssue('BadValue', f"poisson_sum must be 'exponential' or 'exact', got {cfg.poisson_sum!r}"))
    if cfg.s_sr_method not in (AUTO, 'general', 'clustered'):
        problems.append(ConfigIssue('BadValue', f"unknown s_sr_method {cfg.s_sr_method!r}"))
    if not isinstance(cfg.protocol, Protocol):
        problems.append(ConfigIssue('BadProtocol', f"unknown protocol {cfg.protocol!r}"))
    problems.extend(cfg.geometry.sensor_gateway.issues('geometry.sensor_gateway'))
    problems.extend(cfg.geometry.sensor_relay.issues('geometry.sensor_relay'))
    if not cfg.geometry.d_r > 0:
        problems.append(ConfigIssue('BadGeometry', 'geometry.d_r must be positive'))

    # The slot check needs a computable sensor airtime
    phy_ok = (_is_int(cfg.sf_sensor) and 7 <= cfg.sf_sensor <= 12 and cfg.coding_rate in (1, 2, 3, 4)
              and cfg.bandwidth_hz > 0 and all(_is_int(getattr(cfg, n)) and getattr(cfg, n) >= 1
                                               for n in ('b_pl', 'b_id', 'b_seq')))
    if cfg.slot_len_s != AUTO:
        if not isinstance(cfg.slot_len_s, (int, float)) or not cfg.slot_len_s > 0:
            problems.append(ConfigIssue('SlotTooShort', f"slot_len_s must be positive, got {cfg.slot_len_s!r}"))
        elif phy_ok:
            frame = airtime(cfg.sf_sensor, cfg.bandwidth_hz, cfg.coding_rate, cfg.preamble_symbols,
                            cfg.explicit_header, cfg.b_id + cfg.b_seq + cfg.b_pl,
                            None if cfg.low_dr_optimize == AUTO else cfg.low_dr_optimize)
            if cfg.slot_len_s < frame:
                problems.append(ConfigIssue(
                    'SlotTooShort', f"slot of {cfg.slot_len_s * 1e3:.3f} ms is shorter than a sensor frame ({frame * 1e3:.3f} ms)"))
    return problems


def validate_config(cfg):
    """Resolve "auto" fields and check all invariants.

    Raises ConfigError listing every violation found.
    """
    if isinstance(cfg, ValidatedConfig):
        return cfg

    problems = check_config(cfg)
    if problems:
        raise ConfigError(problems)

    from services.channel import airtime

    de = None if cfg.low_dr_optimize == AUTO else cfg.low_dr_optimize
    slot_len = cfg.slot_len_s
    if slot_len == AUTO:
        frame = airtime(cfg.sf_sensor, cfg.bandwidth_hz, cfg.coding_rate, cfg.preamble_symbols,
                        cfg.explicit_header, cfg.b_id + cfg.b_seq + cfg.b_pl, de)
        # Round up to the next millisecond
        slot_len = math.ceil(round(frame * 1e3, 9)) / 1e3

    if cfg.protocol is Protocol.COOPERATIVE:
        n_s = cfg.n_r - 1
    else:
        n_s = 0

    gamma_db = cfg.gamma_db
    if gamma_db == AUTO:
        # Median received power at the nominal gateway distance sits 10 dB above sensitivity
        d_nom = cfg.geometry.sensor_gateway.median()
        zeta = dbm_to_mw(cfg.sensitivity_dbm_by_sf[cfg.sf_sensor])
        gamma = 10.0 * zeta * d_nom ** cfg.path_loss_exponent / math.log(2.0)
        gamma_db = 10.0 * math.log10(gamma)

    # Window-free protocols use a unit window so their edge exclusion does not depend on n_r
    window_r, window_s = (cfg.n_r, n_s) if cfg.protocol.has_windows else (1, 0)
    warmup = 2 * (window_r + 1) if cfg.warmup_slots == AUTO else cfg.warmup_slots
    cooldown = 2 * (window_r + window_s + 1) if cfg.cooldown_slots == AUTO else cfg.cooldown_slots

    cap = cfg.cap_uncoded
    if cap == AUTO:
        relay_frame = airtime(cfg.sf_relay, cfg.bandwidth_hz, cfg.coding_rate, cfg.preamble_symbols,
                              cfg.explicit_header, cfg.b_id + cfg.b_seq + cfg.b_pl, de)
        cap = max(1, math.floor(round(slot_len / relay_frame, 9)))

    values = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(ScenarioConfig)}
    values.update(
        slot_len_s=float(slot_len), n_s=int(n_s), gamma_db=float(gamma_db), warmup_slots=int(warmup),
        cooldown_slots=int(cooldown), cap_uncoded=int(cap),
        sensitivity_dbm_by_sf={int(k): float(v) for k, v in cfg.sensitivity_dbm_by_sf.items()},
    )
    validated = ValidatedConfig(**values)

    load = cfg.lambda_rate * validated.slot_len_s
    if load > Config.LOAD_WARNING_THRESHOLD:
        message = f"lambda * slot length = {load:.4f} exceeds {Config.LOAD_WARNING_THRESHOLD}; the light-traffic model may not hold"
        logging.warning(message)
        warnings.warn(message, LoadRegimeWarning, stacklevel=2)
    return validated


def ensure_validated(cfg):
    return cfg if isinstance(cfg, ValidatedConfig) else validate_config(cfg)


# Scenario documents

def scenario_from_dict(data):
    """Build a ScenarioConfig from a JSON document; unknown keys are errors"""
    data = dict(data)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([ConfigIssue('UnknownKey', f"unknown scenario key {k!r}") for k in unknown])

    if 'geometry' in data:
        data['geometry'] = Geometry.from_dict(data['geometry'])
    if 'sensitivity_dbm_by_sf' in data:
        table = dict(DEFAULT_SENSITIVITY_DBM)
        table.update({int(k): float(v) for k, v in data['sensitivity_dbm_by_sf'].items()})
        data['sensitivity_dbm_by_sf'] = table
    if 'protocol' in data:
        try:
            data['protocol'] = Protocol(data['protocol'])
        except ValueError:
            raise ConfigError([ConfigIssue('BadProtocol', f"unknown protocol {data['protocol']!r}")])
    return ScenarioConfig(**data)


def load_scenario(path):
    """Load a scenario JSON file"""
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError([ConfigIssue('BadValue', f"cannot read scenario {path}: {e}")])
    if not isinstance(data, dict):
        raise ConfigError([ConfigIssue('BadValue', f"scenario {path} must be a JSON object")])
    cfg = scenario_from_dict(data)
    logging.info(f"Scenario loaded from {path}: protocol={cfg.protocol.value}, n={cfg.n_sensors}, n_r={cfg.n_r}")
    return cfg


# Messages and randomness

@dataclass(frozen=True, slots=True)
class SensorMessage:
    sensor_id: int
    seq: int
    payload: bytes
    created_slot: int
    uid: int = -1

    @property
    def key(self):
        """On-air identity of the message"""
        return self.sensor_id, self.seq


STREAM_IDS = ('traffic', 'fading-gw', 'fading-relay', 'geometry', 'tie-break')


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: str

    def generator(self):
        index = STREAM_IDS.index(self.stream_id)
        seq = np.random.SeedSequence(int(self.seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(index,))
        return np.random.Generator(np.random.PCG64(seq))


def make_streams(seed):
    """One independent generator per stream label"""
    return {sid: RngStream(seed, sid).generator() for sid in STREAM_IDS}
