"""
Physical-layer module for ASTRA AoI Tools.
Packet-level simulation of one frame: replica placement with residual timing
offsets, fractional overlaps, Rician-faded powers, per-pool capture-SIC
decoding and gateway OR fusion.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Set, Tuple

import numpy as np

from astra_aoi_tools.utils.errors import InvalidActionError
from astra_aoi_tools.utils.models import Action, SystemConfig

logger = logging.getLogger(__name__)

TAGGED_PACKET_ID = 0


@dataclass
class Replica:
    """One transmitted copy of a packet as seen by the receiver."""
    packet_id: int
    pool: int
    slot: int
    offset: float
    start: float
    power: float
    residual: float = 1.0
    decoded: bool = False


@dataclass
class DecodeResult:
    """Outcome of capture-SIC in one pool."""
    decoded_packets: Set[int] = field(default_factory=set)
    iterations: int = 0
    per_iteration_trace: List[Tuple[int, float]] = field(default_factory=list)
    replicas: List[Replica] = field(default_factory=list)


class FrameArrays(NamedTuple):
    """Column view of the replicas in a frame; every field has one entry per replica."""
    packet: np.ndarray
    pool: np.ndarray
    slot: np.ndarray
    offset: np.ndarray
    start: np.ndarray
    power: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                   np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def concat(cls, parts: Iterable['FrameArrays']):
        parts = [p for p in parts if len(p.packet)]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate(columns) for columns in zip(*parts)))

    def select(self, mask):
        return FrameArrays(*(column[mask] for column in self))

    def to_replicas(self) -> List[Replica]:
        return [
            Replica(packet_id=int(pk), pool=int(pl), slot=int(sl), offset=float(of), start=float(st), power=float(pw))
            for pk, pl, sl, of, st, pw in zip(*self)
        ]

    @classmethod
    def from_replicas(cls, replicas: List[Replica]):
        if not replicas:
            return cls.empty()
        return cls(
            np.array([r.packet_id for r in replicas], dtype=np.int64),
            np.array([r.pool for r in replicas], dtype=np.int64),
            np.array([r.slot for r in replicas], dtype=np.int64),
            np.array([r.offset for r in replicas], dtype=float),
            np.array([r.start for r in replicas], dtype=float),
            np.array([r.power for r in replicas], dtype=float),
        )


def overlap_length(interval_a, interval_b):
    """
    Length of the intersection of two half-open intervals.

    Args:
        interval_a (tuple): (start, end) of the first interval
        interval_b (tuple): (start, end) of the second interval

    Returns:
        float: |a ∩ b|, zero for disjoint or degenerate intervals
    """
    return max(0.0, min(interval_a[1], interval_b[1]) - max(interval_a[0], interval_b[0]))


def overlap_matrix(starts, T_p):
    """Pairwise overlap lengths of packets of duration T_p, with a zero diagonal."""
    starts = np.asarray(starts, dtype=float)
    ends = starts + T_p
    overlap = np.minimum(ends[:, None], ends[None, :]) - np.maximum(starts[:, None], starts[None, :])
    np.clip(overlap, 0.0, T_p, out=overlap)
    np.fill_diagonal(overlap, 0.0)
    return overlap


def sample_rician_gain(k, size, rng):
    """
    Draws unit-mean Rician power coefficients |h|^2.

    h is a line-of-sight term sqrt(K/(K+1)) plus a circularly-symmetric complex
    Gaussian of variance 1/(K+1).

    Args:
        k (float or None): Rician K-factor; None disables fading (all ones)
        size (int): Number of samples
        rng (numpy.random.Generator): Random source

    Returns:
        numpy.ndarray: Power coefficients
    """
    if k is None:
        return np.ones(size)
    los = np.sqrt(k / (k + 1.0))
    scale = np.sqrt(0.5 / (k + 1.0))
    real = los + scale * rng.standard_normal(size)
    imag = scale * rng.standard_normal(size)
    return real * real + imag * imag


def _check_action(action: Action, cfg: SystemConfig):
    if action.is_idle:
        raise InvalidActionError("The idle action places no replicas")
    if action.d > cfg.M:
        raise InvalidActionError(f"d={action.d} exceeds the {cfg.M} slots of a pool")
    if action.q > cfg.R:
        raise InvalidActionError(f"q={action.q} exceeds the {cfg.R} resource pools")


def tagged_arrays(action: Action, cfg: SystemConfig, rng, packet_id=TAGGED_PACKET_ID) -> FrameArrays:
    """Column form of place_tagged_replicas."""
    _check_action(action, cfg)
    pools = rng.random(cfg.R).argsort()[:action.q]
    slots = rng.random((action.q, cfg.M)).argsort(axis=1)[:, :action.d].ravel()
    count = action.d * action.q
    offset = rng.random(count) * cfg.T_s
    power = cfg.p_bar * sample_rician_gain(cfg.rician_k, count, rng)
    return FrameArrays(
        packet=np.full(count, packet_id, dtype=np.int64),
        pool=np.repeat(pools, action.d).astype(np.int64),
        slot=slots.astype(np.int64),
        offset=offset,
        start=slots * cfg.T_s + offset,
        power=power,
    )


def background_arrays(lambda_per_pool, cfg: SystemConfig, rng, first_packet_id=TAGGED_PACKET_ID + 1) -> FrameArrays:
    """Column form of generate_background."""
    if lambda_per_pool < 0:
        raise ValueError(f"Load must be non-negative, got {lambda_per_pool}")
    k = cfg.background_replicas
    counts = rng.poisson(lambda_per_pool * cfg.T_f / k, size=cfg.R)
    packets = int(counts.sum())
    if packets == 0:
        return FrameArrays.empty()

    total = packets * k
    if k == 1:
        slots = rng.integers(0, cfg.M, size=total)
    else:
        slots = rng.random((packets, cfg.M)).argsort(axis=1)[:, :k].ravel()
    offset = rng.random(total) * cfg.T_s
    power = cfg.p_bar * sample_rician_gain(cfg.rician_k, total, rng)
    ids = np.arange(first_packet_id, first_packet_id + packets, dtype=np.int64)
    return FrameArrays(
        packet=np.repeat(ids, k),
        pool=np.repeat(np.repeat(np.arange(cfg.R, dtype=np.int64), counts), k),
        slot=slots.astype(np.int64),
        offset=offset,
        start=slots * cfg.T_s + offset,
        power=power,
    )


def place_tagged_replicas(action: Action, cfg: SystemConfig, rng, packet_id=TAGGED_PACKET_ID) -> List[Replica]:
    """
    Places the replicas of a tagged device's packet.

    q pools are chosen uniformly without replacement; inside each, d distinct
    slots are chosen uniformly. Every replica gets its own residual offset in
    [0, T_s) and its own fading sample.

    Args:
        action (Action): Non-idle action (d, q)
        cfg (SystemConfig): System parameters
        rng (numpy.random.Generator): Random source
        packet_id (int): Identifier shared by all replicas

    Returns:
        list: d*q Replica objects
    """
    return tagged_arrays(action, cfg, rng, packet_id).to_replicas()


def generate_background(lambda_per_pool, cfg: SystemConfig, rng, first_packet_id=TAGGED_PACKET_ID + 1) -> List[Replica]:
    """
    Draws the interfering replicas of one frame.

    Each pool independently receives a Poisson number of background packets
    with mean lambda*T_f/k, each carrying k = cfg.background_replicas replicas in
    distinct slots, so the per-pool replica start intensity is lambda.

    Args:
        lambda_per_pool (float): Per-pool replica start-time intensity
        cfg (SystemConfig): System parameters
        rng (numpy.random.Generator): Random source
        first_packet_id (int): Identifier of the first background packet

    Returns:
        list: Background Replica objects across all pools
    """
    return background_arrays(lambda_per_pool, cfg, rng, first_packet_id).to_replicas()


def sic_decode(start, power, packet, cfg: SystemConfig, cancelled=None, stop_on=None, record=False):
    """
    Capture-SIC over the replicas of one pool given as arrays.

    Args:
        start (numpy.ndarray): Replica start times
        power (numpy.ndarray): Received powers
        packet (numpy.ndarray): Owning packet ids
        cfg (SystemConfig): System parameters
        cancelled (set, optional): Packets already decoded elsewhere; they start cancelled
        stop_on (int, optional): Stop as soon as this packet is decoded
        record (bool): Whether to keep the (packet, SINR) trace

    Returns:
        tuple: (decoded packet ids in decoding order, iterations, trace)
    """
    n = len(start)
    if n == 0:
        return [], 0, []

    power = np.asarray(power, dtype=float)
    packet = np.asarray(packet)
    overlap = overlap_matrix(start, cfg.T_p)
    residual = np.ones(n)
    active = np.ones(n, dtype=bool)
    if cancelled:
        hit = np.isin(packet, list(cancelled))
        residual[hit] = cfg.epsilon
        active[hit] = False

    decoded, trace = [], []
    iterations = 0
    while iterations < cfg.sic_max_iters and active.any():
        interference = overlap @ (residual * power) / cfg.T_p
        sinr = power / (cfg.sigma2 + interference)
        candidates = np.flatnonzero(active & (sinr >= cfg.gamma_th))
        if candidates.size == 0:
            break

        # strongest first; equal powers go to the lowest packet id
        order = np.lexsort((packet[candidates], -power[candidates]))
        chosen = candidates[order[0]]
        pkt = int(packet[chosen])
        siblings = packet == pkt
        residual[siblings] = cfg.epsilon
        active[siblings] = False
        decoded.append(pkt)
        iterations += 1
        if record:
            trace.append((pkt, float(sinr[chosen])))
        if stop_on is not None and pkt == stop_on:
            break

    return decoded, iterations, trace


def run_sic_pool(replicas: List[Replica], cfg: SystemConfig, cancelled=None) -> DecodeResult:
    """
    Runs capture-SIC on the replicas of a single pool.

    Each iteration decodes the strongest replica whose SINR reaches gamma_th and
    cancels every replica of its packet in the pool down to the residual factor
    epsilon. Decoding stops when no replica is decodable or after
    cfg.sic_max_iters iterations.

    Args:
        replicas (list): Replicas that all belong to one pool
        cfg (SystemConfig): System parameters
        cancelled (set, optional): Packets already cancelled before decoding starts

    Returns:
        DecodeResult: Decoded packets, iteration count, per-iteration trace and
        updated copies of the replicas
    """
    if not replicas:
        return DecodeResult()
    if len({r.pool for r in replicas}) > 1:
        raise ValueError("run_sic_pool expects replicas from a single pool")

    frame = FrameArrays.from_replicas(replicas)
    decoded, iterations, trace = sic_decode(frame.start, frame.power, frame.packet, cfg,
                                            cancelled=cancelled, record=True)
    done = set(decoded) | set(cancelled or ())
    updated = [
        dataclasses.replace(r, residual=cfg.epsilon if r.packet_id in done else 1.0, decoded=r.packet_id in done)
        for r in replicas
    ]
    return DecodeResult(decoded_packets=set(decoded), iterations=iterations,
                        per_iteration_trace=trace, replicas=updated)


def decode_frame_arrays(frame: FrameArrays, cfg: SystemConfig, target=None) -> Set[int]:
    """
    Decodes a whole frame and returns the set of decoded packet ids.

    Pools are decoded independently unless cfg.cross_pool_cancel is set, in which
    case pools are swept repeatedly and a packet decoded anywhere is cancelled
    everywhere. When a target packet is given, only what is needed to decide
    whether that packet is decoded is computed.
    """
    if target is not None and not cfg.cross_pool_cancel:
        pools = np.unique(frame.pool[frame.packet == target])
    else:
        pools = np.unique(frame.pool)

    decoded: Set[int] = set()
    if not cfg.cross_pool_cancel:
        for pool in pools:
            sel = frame.pool == pool
            got, _, _ = sic_decode(frame.start[sel], frame.power[sel], frame.packet[sel], cfg, stop_on=target)
            decoded.update(got)
            if target is not None and target in decoded:
                break
        return decoded

    progress = True
    while progress:
        progress = False
        for pool in pools:
            sel = frame.pool == pool
            got, _, _ = sic_decode(frame.start[sel], frame.power[sel], frame.packet[sel], cfg,
                                   cancelled=decoded, stop_on=target)
            if got:
                decoded.update(got)
                progress = True
            if target is not None and target in decoded:
                return decoded
    return decoded


def decode_frame(replicas: List[Replica], cfg: SystemConfig) -> Set[int]:
    """
    Decodes every pool of a frame and fuses the outcomes at the gateway.

    Args:
        replicas (list): Replicas across all pools
        cfg (SystemConfig): System parameters

    Returns:
        set: Packet ids decoded in at least one pool
    """
    return decode_frame_arrays(FrameArrays.from_replicas(replicas), cfg)


def frame_success(action: Action, lambda_per_pool, cfg: SystemConfig, rng) -> bool:
    """
    Simulates one frame for a tagged device and reports whether it delivered.

    Args:
        action (Action): Tagged device action
        lambda_per_pool (float): Per-pool background intensity
        cfg (SystemConfig): System parameters
        rng (numpy.random.Generator): Random source

    Returns:
        bool: True if at least one tagged replica is decoded in at least one selected pool
    """
    if action.is_idle:
        return False
    tagged = tagged_arrays(action, cfg, rng)
    background = background_arrays(lambda_per_pool, cfg, rng)
    frame = FrameArrays.concat([tagged, background])
    return TAGGED_PACKET_ID in decode_frame_arrays(frame, cfg, target=TAGGED_PACKET_ID)


def pool_batch_success(d, lambda_per_pool, cfg: SystemConfig, batch, rng) -> np.ndarray:
    """
    Capture-SIC on `batch` independent realizations of one selected pool.

    Each realization holds the d tagged replicas (packet 0, distinct slots) plus
    the Poisson background of that pool. Realizations are padded to a common
    size with zero-power entries, which neither interfere nor decode.

    Returns:
        numpy.ndarray: Boolean per realization, True when the tagged packet is decoded
    """
    k = cfg.background_replicas
    counts = rng.poisson(lambda_per_pool * cfg.T_f / k, size=batch)
    most = int(counts.max(initial=0))
    n = d + most * k

    tagged_slots = rng.random((batch, cfg.M)).argsort(axis=1)[:, :d]
    if k == 1:
        bg_slots = rng.integers(0, cfg.M, size=(batch, most))
    else:
        bg_slots = rng.random((batch, most, cfg.M)).argsort(axis=2)[:, :, :k].reshape(batch, most * k)
    slots = np.hstack([tagged_slots, bg_slots])
    start = slots * cfg.T_s + rng.random((batch, n)) * cfg.T_s
    power = cfg.p_bar * sample_rician_gain(cfg.rician_k, batch * n, rng).reshape(batch, n)

    bg_packet = np.repeat(np.arange(1, most + 1), k)
    packet = np.concatenate([np.zeros(d, dtype=np.int64), bg_packet])[None, :].repeat(batch, axis=0)
    valid = np.ones((batch, n), dtype=bool)
    valid[:, d:] = (bg_packet[None, :] <= counts[:, None])
    power[~valid] = 0.0
    packet[~valid] = -1

    ends = start + cfg.T_p
    overlap = np.minimum(ends[:, :, None], ends[:, None, :]) - np.maximum(start[:, :, None], start[:, None, :])
    np.clip(overlap, 0.0, cfg.T_p, out=overlap)
    overlap[:, np.arange(n), np.arange(n)] = 0.0

    residual = np.ones((batch, n))
    active = valid.copy()
    done = np.zeros(batch, dtype=bool)
    success = np.zeros(batch, dtype=bool)
    no_packet = np.iinfo(np.int64).max
    for _ in range(min(cfg.sic_max_iters, most + 1)):
        interference = np.einsum('bij,bj->bi', overlap, residual * power) / cfg.T_p
        sinr = power / (cfg.sigma2 + interference)
        candidates = active & (sinr >= cfg.gamma_th) & ~done[:, None]
        found = candidates.any(axis=1)
        done |= ~found
        if not found.any():
            break

        # strongest first; equal powers go to the lowest packet id
        strongest = np.where(candidates, power, -np.inf).max(axis=1)
        ties = candidates & (power == strongest[:, None])
        chosen = np.where(ties, packet, no_packet).min(axis=1)
        siblings = (packet == chosen[:, None]) & found[:, None]
        residual[siblings] = cfg.epsilon
        active[siblings] = False

        hit = found & (chosen == 0)
        success |= hit
        done |= hit
        if done.all():
            break
    return success


def estimate_success(action: Action, lambda_per_pool, cfg: SystemConfig, trials, rng, batch=512) -> int:
    """
    Counts successful frames over independent trials drawn from one stream.

    Pools are decoded independently and only the q selected pools can deliver
    the tagged packet, so each batch of frames is simulated pool by pool with
    pool_batch_success and fused with OR. With cross-pool cancellation the
    pools interact and frames are simulated one at a time with frame_success.

    Args:
        action (Action): Tagged device action
        lambda_per_pool (float): Per-pool background intensity
        cfg (SystemConfig): System parameters
        trials (int): Frames to simulate
        rng (numpy.random.Generator): Random source
        batch (int): Frames simulated together

    Returns:
        int: Number of successful frames
    """
    if action.is_idle:
        return 0
    _check_action(action, cfg)
    if lambda_per_pool < 0:
        raise ValueError(f"Load must be non-negative, got {lambda_per_pool}")
    if cfg.cross_pool_cancel:
        return sum(frame_success(action, lambda_per_pool, cfg, rng) for _ in range(trials))

    successes = 0
    for first in range(0, trials, batch):
        size = min(batch, trials - first)
        delivered = np.zeros(size, dtype=bool)
        for _ in range(action.q):
            delivered |= pool_batch_success(action.d, lambda_per_pool, cfg, size, rng)
        successes += int(delivered.sum())
    return successes
