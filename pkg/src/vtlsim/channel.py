"""Lossy broadcast medium keyed on distance to the shared intersection corner.

Delivery probability depends on s = d_tx + d_rx (both vehicles' distances
to the corner): flat ``p_max`` up to ``reliable_sum``, linear down to
``p_cutoff`` at ``cutoff_sum``, linear down to 0 at ``zero_sum``.

Every ``transmit`` call draws exactly one uniform per candidate receiver,
receivers visited in ascending id order, so replays are bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels

DEFAULT_INTERVAL_MS = 100
IPG_DISTANCES_FT = (50, 100, 150, 200, 250, 300)


class ChannelError(ValueError):
    pass


class NoPacketsReceived(ChannelError):
    pass


@dataclass
class IpgSample:
    receiver_id: int
    sender_id: int
    gap_ms: int


@dataclass
class ChannelModel:
    reliable_sum: float = 500.0
    cutoff_sum: float = 600.0
    zero_sum: float = 700.0
    p_max: float = 0.98
    p_cutoff: float = 0.10
    rng_seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_cutoff <= self.p_max <= 1.0:
            raise ChannelError("need 0 <= p_cutoff <= p_max <= 1")
        if not self.reliable_sum < self.cutoff_sum < self.zero_sum:
            raise ChannelError("need reliable_sum < cutoff_sum < zero_sum")
        if not 0 <= self.rng_seed < 2**64:
            raise ChannelError("rng_seed must be a u64")
        self.rng = np.random.default_rng(self.rng_seed)

    @classmethod
    def lossless(cls, rng_seed: int = 0) -> ChannelModel:
        return cls(reliable_sum=1e12, cutoff_sum=2e12, zero_sum=3e12,
                   p_max=1.0, p_cutoff=1.0, rng_seed=rng_seed)

    def delivery_probability(self, d_tx: float, d_rx: float) -> float:
        if d_tx < 0 or d_rx < 0 or math.isnan(d_tx) or math.isnan(d_rx):
            raise ChannelError(f"distances must be >= 0 (got {d_tx}, {d_rx})")
        s = d_tx + d_rx
        if s <= self.reliable_sum:
            return self.p_max
        if s < self.cutoff_sum:
            slope = (self.p_cutoff - self.p_max) / (self.cutoff_sum - self.reliable_sum)
            return slope * (s - self.reliable_sum) + self.p_max
        if s < self.zero_sum:
            slope = (0.0 - self.p_cutoff) / (self.zero_sum - self.cutoff_sum)
            return slope * (s - self.cutoff_sum) + self.p_cutoff
        return 0.0

    def delivery_probabilities(self, sums: Sequence[float]) -> np.ndarray:
        arr = np.asarray(sums, dtype=np.float64)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise ChannelError("distance sums must be >= 0")
        return kernels.delivery_probability_vec(
            arr, self.reliable_sum, self.cutoff_sum, self.zero_sum, self.p_max, self.p_cutoff)

    def transmit(self, frame: bytes, sender_id: int,
                 receivers: Iterable[tuple[int, float, float]]) -> set[int]:
        """Broadcast one frame.

        ``receivers`` holds ``(vehicle_id, d_tx, d_rx)`` per candidate. The
        sender is skipped without consuming a draw.
        """
        got = set()
        rand = self.rng.random
        for rid, d_tx, d_rx in sorted(receivers):
            if rid == sender_id:
                continue
            if rand() < self.delivery_probability(d_tx, d_rx):
                got.add(rid)
        return got


def mean_ipg(sender_distance: float, receiver_distance: float, n_packets: int = 10_000,
             interval_ms: int = DEFAULT_INTERVAL_MS, seed: int = 0,
             model: ChannelModel | None = None) -> tuple[float, int]:
    """Mean inter-packet gap (ms) and number received for a parked pair.

    ``model`` supplies the calibration only; draws come from a generator
    seeded with ``seed``.
    """
    if n_packets < 1000:
        raise ChannelError("n_packets must be >= 1000")
    if interval_ms <= 0:
        raise ChannelError("interval_ms must be > 0")
    model = model or ChannelModel()
    p = model.delivery_probability(sender_distance, receiver_distance)
    if p <= 0.0:
        raise NoPacketsReceived(
            f"delivery probability is 0 at {sender_distance}+{receiver_distance} ft")
    uniforms = np.random.default_rng(seed).random(n_packets)
    n, mean_slots = kernels.gap_stats(uniforms, p)
    if n < 2:
        raise NoPacketsReceived(f"only {n} packet(s) received out of {n_packets}")
    return mean_slots * interval_ms, n


def ipg_table(distances: Sequence[float] = IPG_DISTANCES_FT, n_packets: int = 2000,
              interval_ms: int = DEFAULT_INTERVAL_MS, seed: int = 0,
              model: ChannelModel | None = None) -> list[tuple[float, float, int]]:
    """Rows of (distance_ft, mean_ipg_ms, n_received), both vehicles at distance_ft.

    Each point gets an independent child stream of ``seed``.
    """
    children = np.random.SeedSequence(seed).spawn(len(distances))
    rows = []
    for d, child in zip(distances, children):
        child_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        ipg, n = mean_ipg(d, d, n_packets, interval_ms, child_seed, model)
        rows.append((float(d), ipg, n))
    return rows
