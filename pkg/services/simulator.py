"""Slot-driven Monte Carlo engine for sensors, relays and the gateway.

Sensors queue Poisson arrivals and send one frame per slot. Every receiver
draws its own block-fading coefficient per frame. Relays follow their
protocol's window schedule and the gateway decodes XOR-coded frames against
what it already holds.
"""

import json
import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from config import Config
from models import (
    ConfigError, ConfigIssue, Phase, Protocol, SensorMessage, SequenceWrapWarning, ensure_validated, make_streams,
)
from services.channel import Contender, resolve_capture
from utils import batch_means_stderr, mw_to_dbm

# Outcome codes per message
LOST, DIRECT, VIA_RELAY = 0, 1, 2


def xor_bytes(payloads):
    """Bitwise XOR of equal-length byte strings"""
    acc = np.zeros(len(payloads[0]), dtype=np.uint8)
    for p in payloads:
        acc ^= np.frombuffer(p, dtype=np.uint8)
    return acc.tobytes()


# Frames

@dataclass(frozen=True)
class CodedFrame:
    xor_payload: bytes
    id_list: tuple
    rw_start: int
    sources: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.id_list:
            raise ValueError('a coded frame sums at least one message')

    @classmethod
    def from_buffer(cls, messages, rw_start):
        return cls(
            xor_payload=xor_bytes([m.payload for m in messages]),
            id_list=tuple(m.key for m in messages),
            rw_start=rw_start,
            sources=tuple(m.uid for m in messages),
        )

    def payload_bytes_on_air(self, cfg):
        return cfg.coded_bytes(len(self.id_list))


@dataclass(frozen=True)
class RelayFrame:
    """One sensor message re-encapsulated by a relay"""
    message: SensorMessage

    def payload_bytes_on_air(self, cfg):
        return cfg.message_bytes


# Gateway

@dataclass(frozen=True)
class Recovered:
    key: tuple
    payload: bytes
    uid: int


@dataclass(frozen=True)
class NothingNew:
    pass


@dataclass(frozen=True)
class Discarded:
    missing_count: int


class GatewayStore:
    """Messages the gateway holds, keyed by (sensor_id, seq).

    Sequence numbers wrap, so a lookup only accepts entries obtained at or
    after the start of the window the asking frame covers.
    """

    def __init__(self):
        self._entries = {}

    def __len__(self):
        return len(self._entries)

    def add(self, key, payload, slot, uid=-1):
        """Store a message; returns False when it is already held"""
        entry = self._entries.get(key)
        if entry is not None and entry[1] >= slot:
            return False
        self._entries[key] = (payload, slot, uid)
        return True

    def has(self, key, since_slot=0):
        entry = self._entries.get(key)
        return entry is not None and entry[1] >= since_slot

    def payload(self, key):
        return self._entries[key][0]


def decode_coded_frame(store, frame):
    """Try to extract one new message from a coded frame"""
    missing = [i for i, key in enumerate(frame.id_list) if not store.has(key, frame.rw_start)]
    if not missing:
        return NothingNew()
    if len(missing) > 1:
        return Discarded(len(missing))

    idx = missing[0]
    known = [store.payload(key) for i, key in enumerate(frame.id_list) if i != idx]
    payload = xor_bytes([frame.xor_payload] + known)
    key = frame.id_list[idx]
    uid = frame.sources[idx] if frame.sources else -1
    store.add(key, payload, frame.rw_start, uid)
    return Recovered(key, payload, uid)


# Relays

@dataclass
class RelayState:
    relay_id: int
    protocol: Protocol
    n_r: int
    n_s: int = 0
    offset: int = 0
    buffer: list = field(default_factory=list)
    pending: SensorMessage | None = None
    airtime_s: float = 0.0
    transmit_slots: int = 0

    @property
    def cycle(self):
        return self.n_r + self.n_s + 1

    def position(self, slot):
        return (slot - self.offset) % self.cycle

    def phase(self, slot):
        if self.protocol is Protocol.IMMEDIATE:
            # Half-duplex: forwarding blocks reception for that slot
            return Phase.TRANSMIT if self.pending is not None else Phase.RECEIVE
        pos = self.position(slot)
        if pos < self.n_r:
            return Phase.RECEIVE
        if pos == self.n_r:
            return Phase.TRANSMIT
        return Phase.SLEEP

    def next_transmit_slot(self, slot):
        if self.protocol is Protocol.IMMEDIATE:
            return slot if self.pending is not None else math.inf
        return slot + (self.n_r - self.position(slot)) % self.cycle

    def receive_slots(self, start, stop):
        """Number of scheduled receive slots in [start, stop)"""
        if stop <= start:
            return 0
        if self.protocol is Protocol.IMMEDIATE:
            return stop - start

        def before(t):
            full, rest = divmod(t - self.offset, self.cycle)
            return full * self.n_r + min(rest, self.n_r)

        return before(stop) - before(start)

    def capture(self, message):
        if self.protocol is Protocol.IMMEDIATE:
            self.pending = message
        else:
            self.buffer.append(message)
            assert len(self.buffer) <= self.n_r


def relay_transmit(relay, protocol, cap_uncoded=1, rng=None, slot=0):
    """Frames a relay sends in its transmit slot; the buffer is emptied"""
    protocol = Protocol(protocol)
    if protocol is Protocol.IMMEDIATE:
        message, relay.pending = relay.pending, None
        return [RelayFrame(message)] if message is not None else []

    buffered, relay.buffer = relay.buffer, []
    if not buffered:
        return []
    if protocol in (Protocol.SINGLE_RELAY, Protocol.COOPERATIVE):
        return [CodedFrame.from_buffer(buffered, slot - relay.n_r)]
    if protocol is Protocol.UNCODED:
        if len(buffered) > cap_uncoded:
            chosen = np.sort(rng.choice(len(buffered), size=cap_uncoded, replace=False))
            buffered = [buffered[i] for i in chosen]
        return [RelayFrame(m) for m in buffered]
    return []


def build_relays(cfg):
    protocol = cfg.protocol
    if protocol is Protocol.NO_RELAY:
        return []
    if protocol is Protocol.IMMEDIATE:
        return [RelayState(0, protocol, n_r=1)]
    if protocol is Protocol.COOPERATIVE:
        # Relay B listens while relay A transmits or sleeps
        return [
            RelayState(0, protocol, cfg.n_r, cfg.n_s, offset=0),
            RelayState(1, protocol, cfg.n_r, cfg.n_s, offset=cfg.n_r),
        ]
    return [RelayState(0, protocol, cfg.n_r, 0)]


def listeners(relays, slot):
    return [r for r in relays if r.phase(slot) is Phase.RECEIVE]


# Traffic

class TrafficSource:
    """Poisson arrival counts per sensor, drawn a chunk of slots at a time"""

    def __init__(self, rng, n_sensors, mean_per_slot, n_slots, chunk_slots=Config.TRAFFIC_CHUNK_SLOTS):
        self.rng = rng
        self.n_sensors = n_sensors
        self.mean = mean_per_slot
        self.n_slots = n_slots
        self.chunk_slots = chunk_slots
        self._next_chunk = 0
        self._chunk_start = 0
        self._counts = None
        self._slots = []
        self._idx = 0

    def _draw_chunk(self):
        size = min(self.chunk_slots, self.n_slots - self._next_chunk)
        if self.mean > 0:
            counts = self.rng.poisson(self.mean, size=(size, self.n_sensors))
        else:
            counts = np.zeros((size, self.n_sensors), dtype=np.int64)
        self._counts = counts
        self._chunk_start = self._next_chunk
        self._slots = (np.flatnonzero(counts.any(axis=1)) + self._chunk_start).tolist()
        self._idx = 0
        self._next_chunk += size

    def next_arrival_slot(self):
        while self._idx >= len(self._slots):
            if self._next_chunk >= self.n_slots:
                return math.inf
            self._draw_chunk()
        return self._slots[self._idx]

    def arrivals(self, slot):
        """(sensor_id, count) pairs arriving at slot"""
        if self.next_arrival_slot() != slot:
            return []
        self._idx += 1
        row = self._counts[slot - self._chunk_start]
        return [(int(i), int(row[i])) for i in np.flatnonzero(row)]


# Run state and metrics

@dataclass
class RunMetrics:
    protocol: str
    seed: int
    n_slots: int
    messages_generated: int
    messages_delivered_direct: int
    messages_delivered_via_relay: int
    messages_lost: int
    mlr_estimate: float
    mlr_stderr: float
    relay_airtime_s: list
    total_time_s: float
    rdc_estimate: float
    rdc_per_relay: float
    relay_receptions: int = 0
    rw_slots: int = 0
    empty_rw_slots: int = 0
    both_received_slots: int = 0
    relay_frames_sent: int = 0
    relay_frames_delivered: int = 0
    decode_outcomes: dict = field(default_factory=dict)
    mean_recovery_delay_slots: float = float('nan')
    f_estimate: float = float('nan')
    p_gr_estimate: float = float('nan')
    direct_estimate: float = float('nan')
    s_rg_estimate: float = float('nan')
    seq_wrap_flag: bool = False
    outcomes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def check_conservation(self):
        total = self.messages_delivered_direct + self.messages_delivered_via_relay + self.messages_lost
        assert total == self.messages_generated, f"conservation broken: {total} != {self.messages_generated}"
        return self

    def to_dict(self):
        data = {k: v for k, v in self.__dict__.items() if k != 'outcomes'}
        data['decode_outcomes'] = dict(sorted(self.decode_outcomes.items()))
        return data


class World:
    """All mutable state of one run"""

    def __init__(self, cfg, seed, n_slots, warmup_slots, cooldown_slots, trace=None):
        self.cfg = cfg
        self.seed = seed
        self.n_slots = n_slots
        self.measure_start = warmup_slots
        self.measure_stop = n_slots - cooldown_slots
        self.slot = 0
        self.trace = trace

        streams = make_streams(seed)
        self.rng_traffic = streams['traffic']
        self.rng_gw = streams['fading-gw']
        self.rng_relay = streams['fading-relay']
        self.rng_tie = streams['tie-break']
        rng_geo = streams['geometry']

        n = cfg.n_sensors
        geo = cfg.geometry
        alpha = cfg.alpha
        self.relays = build_relays(cfg)
        # Node positions are drawn once per run
        d_gw = geo.sensor_gateway.sample(rng_geo, n) if not geo.sensor_gateway.is_fixed else np.full(n, geo.sensor_gateway.d)
        self.gain_gw = cfg.gamma_linear * d_gw ** (-alpha)
        self.gain_relay = []
        for _ in self.relays:
            law = geo.sensor_relay
            d = law.sample(rng_geo, n) if not law.is_fixed else np.full(n, law.d)
            self.gain_relay.append(cfg.gamma_linear * d ** (-alpha))
        self.gain_relay_gw = cfg.gamma_linear * geo.d_r ** (-alpha)

        self.zeta_sensor = cfg.sensitivity_mw(cfg.sf_sensor)
        self.zeta_relay = cfg.sensitivity_mw(cfg.sf_relay)
        self.relay_message_airtime = cfg.frame_airtime(cfg.sf_relay, cfg.message_bytes)

        self.traffic = TrafficSource(self.rng_traffic, n, cfg.lambda_rate * cfg.slot_len_s, n_slots)
        self.queues = [deque() for _ in range(n)]
        self.busy = set()
        self.next_seq = [0] * n
        self.seq_modulus = 2 ** (8 * cfg.b_seq)
        self.seq_last_sent = {}
        self.seq_horizon = 2 * cfg.cycle_slots
        self.seq_wrap_flag = False

        self.store = GatewayStore()
        self.created = []
        self.sent_slot = []
        self.outcome = []
        self.recovered_slot = {}

        self.relay_receptions = 0
        self.both_received = 0
        self.relay_frames_sent = 0
        self.relay_frames_delivered = 0
        self.decode_outcomes = {'recovered': 0, 'nothing_new': 0, 'discarded': 0, 'relay_link_lost': 0}

    def in_window(self, slot):
        return self.measure_start <= slot < self.measure_stop

    def emit(self, kind, nodes, powers_mw=()):
        if self.trace is None:
            return
        record = {
            'slot': self.slot,
            'kind': kind,
            'nodes': list(nodes),
            'powers_dbm': [round(mw_to_dbm(p), 3) for p in powers_mw],
        }
        self.trace.write(json.dumps(record) + '\n')

    def next_event_slot(self):
        if self.busy:
            return self.slot
        nxt = self.traffic.next_arrival_slot()
        for relay in self.relays:
            if relay.buffer or relay.pending is not None:
                nxt = min(nxt, relay.next_transmit_slot(self.slot))
        return nxt

    def skip_to(self, slot):
        self.slot = slot

    def new_message(self, sensor_id):
        seq = self.next_seq[sensor_id]
        self.next_seq[sensor_id] = (seq + 1) % self.seq_modulus
        uid = len(self.created)
        payload = self.rng_traffic.bytes(self.cfg.b_pl)
        self.created.append(self.slot)
        self.sent_slot.append(-1)
        self.outcome.append(LOST)
        return SensorMessage(sensor_id, seq, payload, self.slot, uid)

    def deliver(self, uid, how):
        if self.outcome[uid] == LOST:
            self.outcome[uid] = how
            if how == VIA_RELAY:
                self.recovered_slot[uid] = self.slot
            return True
        return False


def _sensor_transmissions(world):
    for sensor_id, count in world.traffic.arrivals(world.slot):
        for _ in range(count):
            world.queues[sensor_id].append(world.new_message(sensor_id))
        world.busy.add(sensor_id)

    sending = []
    for sensor_id in sorted(world.busy):
        queue = world.queues[sensor_id]
        msg = queue.popleft()
        if not queue:
            world.busy.discard(sensor_id)
        world.sent_slot[msg.uid] = world.slot
        last = world.seq_last_sent.get(msg.key)
        if last is not None and world.slot - last < world.seq_horizon and not world.seq_wrap_flag:
            world.seq_wrap_flag = True
            message = f"sequence numbers of sensor {msg.sensor_id} wrapped inside one decoding window"
            logging.warning(message)
            warnings.warn(message, SequenceWrapWarning, stacklevel=3)
        world.seq_last_sent[msg.key] = world.slot
        sending.append(msg)
    return sending


def _capture(sending, gains, rng, sensitivity_mw, capture_db):
    fading = rng.standard_exponential(len(sending))
    contenders = [Contender(i, float(gains[m.sensor_id] * a)) for i, (m, a) in enumerate(zip(sending, fading))]
    winner = resolve_capture(contenders, sensitivity_mw, capture_db)
    return winner, contenders


def _relay_frame_at_gateway(world, relay, frame):
    """Relay frames only suffer fading; they never share an SF with sensor frames"""
    world.relay_frames_sent += 1
    power = world.gain_relay_gw * float(world.rng_gw.standard_exponential())
    keys = frame.id_list if isinstance(frame, CodedFrame) else (frame.message.key,)
    world.emit('relay_tx', [relay.relay_id] + [list(k) for k in keys], [power])
    if power < world.zeta_relay:
        world.decode_outcomes['relay_link_lost'] += 1
        return
    world.relay_frames_delivered += 1

    if isinstance(frame, CodedFrame):
        result = decode_coded_frame(world.store, frame)
        if isinstance(result, Recovered):
            world.decode_outcomes['recovered'] += 1
            world.deliver(result.uid, VIA_RELAY)
            world.emit('decode', [list(result.key)])
        elif isinstance(result, Discarded):
            world.decode_outcomes['discarded'] += 1
        else:
            world.decode_outcomes['nothing_new'] += 1
        return

    msg = frame.message
    if world.store.add(msg.key, msg.payload, world.sent_slot[msg.uid], msg.uid):
        world.deliver(msg.uid, VIA_RELAY)
        world.decode_outcomes['recovered'] += 1
    else:
        world.decode_outcomes['nothing_new'] += 1


def step_slot(world):
    """Advance the world by one slot"""
    cfg = world.cfg
    slot = world.slot
    measured = world.in_window(slot)

    if cfg.protocol is Protocol.COOPERATIVE:
        assert len(listeners(world.relays, slot)) == 1, f"slot {slot}: cooperative relays must have one listener"

    sending = _sensor_transmissions(world)
    # Relays decide their phase before this slot's captures change it
    transmitting = [r for r in world.relays if r.phase(slot) is Phase.TRANSMIT]
    listening = [r for r in world.relays if r.phase(slot) is Phase.RECEIVE]

    direct_uid = None
    if sending:
        world.emit('tx', [m.sensor_id for m in sending])
        winner, contenders = _capture(sending, world.gain_gw, world.rng_gw, world.zeta_sensor, cfg.capture_threshold_db)
        if winner is not None:
            msg = sending[winner]
            world.store.add(msg.key, msg.payload, slot, msg.uid)
            world.deliver(msg.uid, DIRECT)
            direct_uid = msg.uid
            world.emit('rx_gateway', [msg.sensor_id, msg.seq], [contenders[winner].rx_power_mw])

        for relay in listening:
            winner, contenders = _capture(sending, world.gain_relay[relay.relay_id], world.rng_relay,
                                          world.zeta_sensor, cfg.capture_threshold_db)
            if winner is None:
                continue
            msg = sending[winner]
            relay.capture(msg)
            world.emit('rx_relay', [relay.relay_id, msg.sensor_id, msg.seq], [contenders[winner].rx_power_mw])
            if measured:
                world.relay_receptions += 1
                if msg.uid == direct_uid:
                    world.both_received += 1

    for relay in transmitting:
        frames = relay_transmit(relay, cfg.protocol, cfg.cap_uncoded, world.rng_tie, slot)
        if not frames:
            continue
        if measured:
            relay.transmit_slots += 1
            relay.airtime_s += sum(cfg.frame_airtime(cfg.sf_relay, fr.payload_bytes_on_air(cfg)) for fr in frames)
        for frame in frames:
            _relay_frame_at_gateway(world, relay, frame)

    world.slot = slot + 1
    return world


def run(cfg, seed=Config.DEFAULT_SEED, n_slots=None, warmup_slots=None, cooldown_slots=None, trace_path=None):
    """Simulate one scenario for n_slots slots and collect RunMetrics"""
    cfg = ensure_validated(cfg)
    n_slots = Config.DEFAULT_SLOTS if n_slots is None else int(n_slots)
    warmup = cfg.warmup_slots if warmup_slots is None else int(warmup_slots)
    cooldown = cfg.cooldown_slots if cooldown_slots is None else int(cooldown_slots)
    if n_slots <= warmup + cooldown:
        raise ConfigError([ConfigIssue('BadValue', f"n_slots={n_slots} must exceed warmup + cooldown = {warmup + cooldown}")])

    logging.info(f"Simulation started: protocol={cfg.protocol.value}, n={cfg.n_sensors}, n_r={cfg.n_r}, "
                 f"slots={n_slots}, seed={seed}")
    trace = open(trace_path, 'w', encoding='utf-8') if trace_path else None
    try:
        world = World(cfg, seed, n_slots, warmup, cooldown, trace)
        while world.slot < n_slots:
            nxt = world.next_event_slot()
            if nxt > world.slot:
                world.skip_to(min(nxt, n_slots))
                continue
            step_slot(world)
    finally:
        if trace is not None:
            trace.close()

    metrics = _collect(world)
    logging.info(f"Simulation finished: protocol={cfg.protocol.value}, generated={metrics.messages_generated}, "
                 f"mlr={metrics.mlr_estimate:.5f}, rdc={metrics.rdc_estimate:.5f}")
    return metrics


def _collect(world):
    cfg = world.cfg
    created = np.asarray(world.created, dtype=np.int64)
    outcome = np.asarray(world.outcome, dtype=np.int8)
    mask = (created >= world.measure_start) & (created < world.measure_stop)
    measured = outcome[mask]

    generated = int(measured.size)
    direct = int(np.count_nonzero(measured == DIRECT))
    via_relay = int(np.count_nonzero(measured == VIA_RELAY))
    lost = generated - direct - via_relay
    lost_flags = (measured == LOST).astype(float)
    mlr = lost / generated if generated else float('nan')

    window_slots = world.measure_stop - world.measure_start
    total_time = window_slots * cfg.slot_len_s
    airtimes = [r.airtime_s for r in world.relays]
    rdc = sum(airtimes) / total_time if world.relays else 0.0
    per_relay = rdc / len(world.relays) if world.relays else 0.0

    rw_slots = 0
    for relay in world.relays:
        if relay.protocol is Protocol.IMMEDIATE:
            rw_slots += window_slots - relay.transmit_slots
        else:
            rw_slots += relay.receive_slots(world.measure_start, world.measure_stop)

    delays = [world.recovered_slot[uid] - world.sent_slot[uid]
              for uid in np.flatnonzero(mask & (outcome == VIA_RELAY))]

    metrics = RunMetrics(
        protocol=cfg.protocol.value,
        seed=world.seed,
        n_slots=world.n_slots,
        messages_generated=generated,
        messages_delivered_direct=direct,
        messages_delivered_via_relay=via_relay,
        messages_lost=lost,
        mlr_estimate=mlr,
        mlr_stderr=batch_means_stderr(lost_flags, Config.STDERR_BATCHES) if generated else float('nan'),
        relay_airtime_s=airtimes,
        total_time_s=total_time,
        rdc_estimate=rdc,
        rdc_per_relay=per_relay,
        relay_receptions=world.relay_receptions,
        rw_slots=rw_slots,
        empty_rw_slots=rw_slots - world.relay_receptions,
        both_received_slots=world.both_received,
        relay_frames_sent=world.relay_frames_sent,
        relay_frames_delivered=world.relay_frames_delivered,
        decode_outcomes=dict(world.decode_outcomes),
        mean_recovery_delay_slots=float(np.mean(delays)) if delays else float('nan'),
        f_estimate=1.0 - world.relay_receptions / rw_slots if rw_slots else float('nan'),
        p_gr_estimate=world.both_received / rw_slots if rw_slots else float('nan'),
        direct_estimate=direct / generated if generated else float('nan'),
        s_rg_estimate=(world.relay_frames_delivered / world.relay_frames_sent
                       if world.relay_frames_sent else float('nan')),
        seq_wrap_flag=world.seq_wrap_flag,
        outcomes=measured,
    )
    return metrics.check_conservation()


def pool_metrics(runs):
    """Combine replications of one scenario.

    Counts add up; the MLR standard error comes from the spread of the
    per-replication estimates when there are at least two.
    """
    runs = list(runs)
    if not runs:
        raise ValueError('no runs to pool')
    generated = sum(r.messages_generated for r in runs)
    direct = sum(r.messages_delivered_direct for r in runs)
    via_relay = sum(r.messages_delivered_via_relay for r in runs)
    lost = sum(r.messages_lost for r in runs)
    total_time = sum(r.total_time_s for r in runs)
    airtime = [sum(vals) for vals in zip(*(r.relay_airtime_s for r in runs))] if runs[0].relay_airtime_s else []

    estimates = [r.mlr_estimate for r in runs if r.messages_generated]
    if len(estimates) >= 2:
        stderr = float(np.std(estimates, ddof=1) / math.sqrt(len(estimates)))
    else:
        stderr = runs[0].mlr_stderr

    rdc = sum(airtime) / total_time if airtime and total_time else 0.0
    rw_slots = sum(r.rw_slots for r in runs)
    receptions = sum(r.relay_receptions for r in runs)
    both = sum(r.both_received_slots for r in runs)
    sent = sum(r.relay_frames_sent for r in runs)
    delivered = sum(r.relay_frames_delivered for r in runs)
    outcomes = {}
    for r in runs:
        for k, v in r.decode_outcomes.items():
            outcomes[k] = outcomes.get(k, 0) + v
    delays = [r.mean_recovery_delay_slots * r.messages_delivered_via_relay for r in runs
              if r.messages_delivered_via_relay]

    pooled = RunMetrics(
        protocol=runs[0].protocol,
        seed=runs[0].seed,
        n_slots=sum(r.n_slots for r in runs),
        messages_generated=generated,
        messages_delivered_direct=direct,
        messages_delivered_via_relay=via_relay,
        messages_lost=lost,
        mlr_estimate=lost / generated if generated else float('nan'),
        mlr_stderr=stderr,
        relay_airtime_s=airtime,
        total_time_s=total_time,
        rdc_estimate=rdc,
        rdc_per_relay=rdc / len(airtime) if airtime else 0.0,
        relay_receptions=receptions,
        rw_slots=rw_slots,
        empty_rw_slots=rw_slots - receptions,
        both_received_slots=both,
        relay_frames_sent=sent,
        relay_frames_delivered=delivered,
        decode_outcomes=outcomes,
        mean_recovery_delay_slots=sum(delays) / via_relay if via_relay else float('nan'),
        f_estimate=1.0 - receptions / rw_slots if rw_slots else float('nan'),
        p_gr_estimate=both / rw_slots if rw_slots else float('nan'),
        direct_estimate=direct / generated if generated else float('nan'),
        s_rg_estimate=delivered / sent if sent else float('nan'),
        seq_wrap_flag=any(r.seq_wrap_flag for r in runs),
    )
    return pooled.check_conservation()
