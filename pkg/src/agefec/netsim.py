"""Slotted simulation of the bottleneck path.

The path is: independent pre-queue chunk loss, a FIFO queue with finite
buffer and (possibly fractional) service rate q_s chunks per slot, independent
post-queue loss, then a fixed propagation delay.  Service uses a credit
accumulator so fractional rates average out exactly; a chunk can be served in
the slot it arrives, so the minimum end-to-end delay is 1 + propagation.

Within a slot the runners follow a fixed event order: (1) receiver processing
of this slot's deliveries, (2) controller feedback when a monitoring interval
completes, (3) sender injection, (4) queue service.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    AgeTracker,
    CodingParams,
    LossModel,
    ParameterError,
    ReceiverChunkStore,
    SlotTime,
)

SERVICE_RATE_PER_DATA_CHUNK = 1.4706

# Fates reported by BottleneckPath.inject / advance_slot.
LOST_IN = "lost_in"
DROPPED_BUFFER = "dropped_buffer"
ENQUEUED = "enqueued"
LOST_OUT = "lost_out"
IN_FLIGHT = "in_flight"


def stream(seed: int, label: str) -> random.Random:
    """Deterministic named RNG stream (stable across platforms)."""
    return random.Random(f"{seed}/{label}")


@dataclass(frozen=True)
class SimConfig:
    """Parameters shared by every simulation mode.

    q_s defaults to the service rate matched to k data chunks per sample;
    monitoring_interval is the feedback period (the adaptive controller treats
    it as an initial value and recomputes it each interval).
    """

    coding: CodingParams = field(default_factory=lambda: CodingParams(3, 4))
    avt: int = 5
    q_s: float | None = None
    buffer_capacity: int = 5000
    loss: LossModel = field(default_factory=lambda: LossModel(0.1, 0.1))
    propagation_delay: int = 1
    duration: int = 100_000
    monitoring_interval: int = 100
    rng_seed: int = 0
    initial_age: int | None = None
    # Fixed-sampling controller knobs.
    initial_rate: float | None = None
    sample_memory: int | None = None
    # Adaptive-sampling controller knobs.
    rtt_init: float | None = None
    sigma_min: float = 0.99
    sigma_max: float | None = None
    block_candidates: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.avt < 1:
            raise ParameterError(f"avt must be >= 1, got {self.avt}")
        if self.duration < 1:
            raise ParameterError(f"duration must be >= 1, got {self.duration}")
        if self.monitoring_interval < 1:
            raise ParameterError(f"monitoring_interval must be >= 1, got {self.monitoring_interval}")
        if self.buffer_capacity < 1:
            raise ParameterError(f"buffer_capacity must be >= 1, got {self.buffer_capacity}")
        if self.propagation_delay < 0:
            raise ParameterError(f"propagation_delay must be >= 0, got {self.propagation_delay}")
        if self.q_s is not None and self.q_s <= 0:
            raise ParameterError(f"q_s must be > 0, got {self.q_s}")

    @property
    def service_rate(self) -> float:
        if self.q_s is not None:
            return self.q_s
        return self.coding.k * SERVICE_RATE_PER_DATA_CHUNK


class BottleneckPath:
    """Erasure channel around a FIFO bottleneck queue.

    Chunks are opaque objects; the path records enqueue slots to measure
    delay.  Loss draws come from two dedicated RNG streams so a change on one
    loss point never perturbs the other.
    """

    def __init__(self, config: SimConfig) -> None:
        self.q_s = config.service_rate
        self.capacity = config.buffer_capacity
        self.p_in = config.loss.p_in
        self.p_out = config.loss.p_out
        self.propagation = config.propagation_delay
        self._rng_in = stream(config.rng_seed, "loss-in")
        self._rng_out = stream(config.rng_seed, "loss-out")
        self._queue: deque = deque()  # (obj, enqueue_slot)
        self._credit = 0.0
        self._pipe: deque = deque()  # (delivery_slot, obj, send_slot)
        self.injected = 0
        self.lost_in = 0
        self.dropped_buffer = 0
        self.lost_out = 0
        self.delivered = 0

    @property
    def occupancy(self) -> int:
        return len(self._queue)

    @property
    def in_flight(self) -> int:
        return len(self._pipe)

    def inject(self, chunks, now: SlotTime) -> list[str]:
        """Offer chunks to the path at slot `now`; returns one fate per chunk."""
        fates = []
        queue = self._queue
        rng = self._rng_in.random
        p_in = self.p_in
        for obj in chunks:
            self.injected += 1
            if p_in > 0.0 and rng() < p_in:
                self.lost_in += 1
                fates.append(LOST_IN)
            elif len(queue) >= self.capacity:
                self.dropped_buffer += 1
                fates.append(DROPPED_BUFFER)
            else:
                queue.append((obj, now))
                fates.append(ENQUEUED)
        return fates

    def advance_slot(self, now: SlotTime) -> list[tuple[object, str]]:
        """Serve the queue for one slot; call exactly once per slot after inject."""
        queue = self._queue
        credit = self._credit + self.q_s
        served = []
        if queue:
            rng = self._rng_out.random
            p_out = self.p_out
            delivery = now + 1 + self.propagation
            pipe = self._pipe
            while credit >= 1.0 and queue:
                obj, enq = queue.popleft()
                credit -= 1.0
                if p_out > 0.0 and rng() < p_out:
                    self.lost_out += 1
                    served.append((obj, LOST_OUT))
                else:
                    pipe.append((delivery, obj, enq))
                    served.append((obj, IN_FLIGHT))
        # Idle capacity is not banked: credit only carries while work remains.
        self._credit = credit if queue else 0.0
        return served

    def deliveries_at(self, now: SlotTime) -> list[tuple[object, int]]:
        """Chunks arriving at slot `now`, each with its end-to-end delay."""
        pipe = self._pipe
        out = []
        while pipe and pipe[0][0] == now:
            _, obj, send_slot = pipe.popleft()
            self.delivered += 1
            out.append((obj, now - send_slot))
        return out

    def conservation_holds(self) -> bool:
        accounted = (
            self.lost_in
            + self.dropped_buffer
            + self.lost_out
            + self.delivered
            + len(self._pipe)
            + len(self._queue)
        )
        return accounted == self.injected


@dataclass
class SimResult:
    """Outcome of one simulated run.

    `av` counts slots with age >= avt (the headline metric); `av_strict`
    counts age > avt, matching the per-interval accounting.  Interval rows
    and their column names feed the CSV writers unchanged.
    """

    schema: str
    columns: tuple[str, ...]
    rows: list[tuple]
    av: float
    av_strict: float
    mean_delay: float
    counts: dict[str, int]
    occupancy_max: int
    occupancy_mean: float
    age_trace: np.ndarray | None = None
    final_state: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "av": self.av,
            "av_strict": self.av_strict,
            "mean_delay": self.mean_delay,
            "occupancy_max": self.occupancy_max,
            "occupancy_mean": round(self.occupancy_mean, 6),
        }
        out.update({k: int(v) for k, v in self.counts.items()})
        return out


FIXED_RATE_COLUMNS = ("mi", "av_mi", "wbar_mi", "delivered")


def run_fixed_rate_sim(
    config: SimConfig, rate: float, collect_trace: bool = False
) -> SimResult:
    """Fixed-rate sender: whole codewords paced at `rate` codewords per slot.

    A credit accumulator emits complete codewords (n chunks of a fresh sample)
    with no feedback and no adaptation; the baseline the controllers are
    measured against, and the load generator for queue-stability checks.
    """
    if rate <= 0:
        raise ParameterError(f"rate must be > 0, got {rate}")
    k, n = config.coding.k, config.coding.n
    avt = config.avt
    path = BottleneckPath(config)
    store = ReceiverChunkStore(k)
    tracker = AgeTracker(avt, config.initial_age)
    t_tilde = config.monitoring_interval
    duration = config.duration

    send_credit = 0.0
    viol_ge = 0
    viol_gt = 0
    ivl_viol = 0
    ivl_delay_sum = 0
    ivl_delivered = 0
    delay_sum = 0
    delivered_total = 0
    occ_sum = 0
    occ_max = 0
    rows: list[tuple] = []
    ages = np.zeros(duration + 1, dtype=np.int64) if collect_trace else None
    if ages is not None:
        ages[0] = tracker.initial_age
    mi = 0

    serial = 0  # samples get serial ids so same-slot codewords stay distinct
    for t in range(1, duration + 1):
        best = None
        for obj, delay in path.deliveries_at(t):
            ivl_delay_sum += delay
            delay_sum += delay
            ivl_delivered += 1
            delivered_total += 1
            if store.add(obj[0], obj[1]) and (best is None or obj[2] > best):
                best = obj[2]
        age = tracker.step(t, () if best is None else (best,))
        if ages is not None:
            ages[t] = age
        if age >= avt:
            viol_ge += 1
        if age > avt:
            viol_gt += 1
            ivl_viol += 1
        if t % t_tilde == 0:
            mi += 1
            wbar = ivl_delay_sum / ivl_delivered if ivl_delivered else float("inf")
            rows.append((mi, ivl_viol / t_tilde, wbar, ivl_delivered))
            ivl_viol = ivl_delay_sum = ivl_delivered = 0
        send_credit += rate
        if send_credit >= 1.0:
            out = []
            while send_credit >= 1.0:
                send_credit -= 1.0
                serial += 1
                out.extend((serial, i, t) for i in range(n))
            path.inject(out, t)
        path.advance_slot(t)
        occ = path.occupancy
        occ_sum += occ
        if occ > occ_max:
            occ_max = occ

    return SimResult(
        schema="fixed-rate-interval/1",
        columns=FIXED_RATE_COLUMNS,
        rows=rows,
        av=viol_ge / duration,
        av_strict=viol_gt / duration,
        mean_delay=delay_sum / delivered_total if delivered_total else float("inf"),
        counts={
            "injected": path.injected,
            "lost_in": path.lost_in,
            "dropped_buffer": path.dropped_buffer,
            "lost_out": path.lost_out,
            "delivered": path.delivered,
            "in_flight": path.in_flight,
            "queued": path.occupancy,
        },
        occupancy_max=occ_max,
        occupancy_mean=occ_sum / duration,
        age_trace=ages,
        final_state={"rate": rate},
    )
