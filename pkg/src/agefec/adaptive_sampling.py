"""Adaptive-sampling sender: feedback drives rate, block length, and pacing.

The sender emits one codeword per sampling interval and retunes three knobs
at every feedback boundary: the codeword rate sigma, the block length n, and
the length of the next monitoring interval.  Receiver-side age accounting
works purely from decode timestamps, so feedback stays a few counters wide.

The same slot engine also drives several concurrent flows through one
bottleneck; a rate-allocation hook splits the controller's total rate across
flows, and with a single flow and no hook it reduces to the plain simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import pairwise

from .analysis import decode_probability, expected_violation_fraction
from .core import AgeTracker, ParameterError, ReceiverChunkStore
from .fixed_sampling import OMEGA, PHI, PSI
from .netsim import BottleneckPath, SimConfig, SimResult


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero for positive x."""
    return int(math.floor(x + 0.5))


def sigma_ceiling(k: int, avt: int) -> float:
    """Default upper rate limit: about 4.4 data-chunk times per threshold."""
    return round_half_up(4.4 * k) / avt


def sampling_interval(n: int, sigma: float) -> int:
    """Slots between codeword emissions at rate sigma; never below one."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    return max(1, round_half_up(n / sigma))


def monitoring_interval_length(avt: int, n: int) -> int:
    """Feedback period in slots, shrinking as the block length grows."""
    return max(1, round_half_up(avt * 100 / n))


def packet_delivery_ratio(delivered: int, sent: int) -> float:
    """Delivered over sent chunks for one interval; 0 when nothing was sent."""
    if sent <= 0:
        return 0.0
    return min(1.0, delivered / sent)


class DecodeLog:
    """Decode timestamps needed to score one monitoring interval.

    Only decodes that refresh the receiver (strictly newer generation than
    anything decoded before) are kept.  Rolling the log seeds the next
    interval with the last such event, so the first inter-decode gap of an
    interval reaches back across the boundary.
    """

    def __init__(self, initial_age: int) -> None:
        # Virtual pre-run decode so the very first gap starts at a known age.
        self._seed = (-initial_age, 0)
        self.events: list[tuple[int, int]] = []

    @property
    def freshest_gen(self) -> int:
        return self.events[-1][0] if self.events else self._seed[0]

    def record(self, gen: int, now: int) -> bool:
        if gen > self.freshest_gen:
            self.events.append((gen, now))
            return True
        return False

    def interval_entries(self) -> list[tuple[int, int]]:
        return [self._seed, *self.events]

    def roll(self) -> None:
        if self.events:
            self._seed = self.events[-1]
            self.events = []


def interval_age_violation(entries, interval_start: int, avt: int) -> float:
    """Violated slot count for one interval, from decode events alone.

    `entries` is the seed decode followed by the interval's fresh decodes,
    each a (generation, decode_slot) pair.  Each inter-decode gap contributes
    the part of its span spent above the age threshold; the leading term
    discounts violated slots that belong to the previous interval.  Can go
    negative when the interval start already sat far above the threshold;
    callers clamp before use.
    """
    g1, _ = entries[0]
    total = -abs(min(interval_start - g1, max(interval_start - g1 - avt, 0)))
    for (g_prev, d_prev), (_, d) in pairwise(entries):
        beta = d - d_prev
        gamma = avt - (d_prev - g_prev)
        total += min(beta - max(0, min(beta, gamma)), beta)
    return float(total)


def select_block_length(
    k: int,
    current_n: int,
    sigma: float,
    pdr: float,
    wbar: float,
    avt: int,
    candidates=None,
) -> int:
    """Pick the block length minimizing predicted age-violation time.

    Candidate redundancy levels are scored with a renewal model fed by the
    interval's measured chunk-loss rate and mean delay.  With no delivery
    evidence (pdr <= 0) the current choice stands.  Ties go to the shortest
    block.
    """
    if pdr <= 0.0:
        return current_n
    loss = 1.0 - pdr
    if candidates is None:
        candidates = range(k, 3 * k + 1)
    best_n = current_n
    best_f = math.inf
    for n_c in candidates:
        if n_c < k or n_c > 255:
            raise ParameterError(f"candidate block length {n_c} invalid for k={k}")
        t_s = sampling_interval(n_c, sigma)
        p_dec = decode_probability(k, n_c, loss)
        f = expected_violation_fraction(p_dec, t_s, wbar, avt)
        if f < best_f - 1e-12 or (abs(f - best_f) <= 1e-12 and n_c < best_n):
            best_f = f
            best_n = n_c
    return best_n


@dataclass(frozen=True)
class AdaptiveIntervalStats:
    """Feedback payload for one monitoring interval."""

    av_ratio: float  # clamped violated-time fraction from the decode log
    wbar_mi: float  # mean chunk delay; inf if nothing arrived
    pdr: float  # delivered / sent chunks
    min_delay: float = math.inf  # smallest delay seen this interval

    def __post_init__(self) -> None:
        if self.av_ratio < 0.0:
            raise ParameterError(f"av_ratio must be >= 0, got {self.av_ratio}")
        if not 0.0 <= self.pdr <= 1.0:
            raise ParameterError(f"pdr must lie in [0, 1], got {self.pdr}")


@dataclass(frozen=True)
class AdaptiveSamplingState:
    """Controller state carried across monitoring intervals."""

    sigma: float
    sigma_last: float
    min_rtt: float
    n: int
    t_s: int
    t_tilde: int
    av_ema: float = 0.0
    wbar_ema: float = 0.0
    ef: int = 0  # chances granted to an emptying pipe
    df: bool = False  # last move was a deliberate decrease
    mi: int = 0

    @classmethod
    def initial(
        cls,
        k: int,
        n: int,
        avt: int,
        rtt_init: float,
        sigma_min: float = 0.99,
        sigma_max: float | None = None,
        monitoring_interval: int | None = None,
    ) -> "AdaptiveSamplingState":
        if rtt_init < 0:
            raise ParameterError(f"rtt_init must be >= 0, got {rtt_init}")
        hi = sigma_ceiling(k, avt) if sigma_max is None else sigma_max
        hi = max(hi, sigma_min)  # degenerate configs collapse to a fixed rate
        # Start near two codewords per round trip, inside the allowed band.
        sigma = 2.0 * (n + 0.05 * n) / rtt_init if rtt_init > 0 else hi
        sigma = min(max(sigma, sigma_min), hi)
        t_tilde = (
            monitoring_interval_length(avt, n)
            if monitoring_interval is None
            else monitoring_interval
        )
        return cls(
            sigma=sigma,
            sigma_last=sigma,
            min_rtt=rtt_init,
            n=n,
            t_s=sampling_interval(n, sigma),
            t_tilde=t_tilde,
        )


def process_interval(
    state: AdaptiveSamplingState,
    stats: AdaptiveIntervalStats,
    avt: int,
    k: int,
    sigma_min: float = 0.99,
    sigma_max: float | None = None,
    candidates=None,
    probe_cap_over_n: bool = False,
) -> tuple[AdaptiveSamplingState, str]:
    """One feedback step; returns the committed state and the branch taken.

    Order matters: trend EMAs fold in the new interval, the path floor delay
    updates, the block length is re-selected from delivery evidence, then a
    single branch moves the rate, which is clamped and used to recompute both
    pacing intervals.  probe_cap_over_n tightens the cautious-probe cap from
    1.2 sigma to 1.2 sigma / n.
    """
    hi = sigma_ceiling(k, avt) if sigma_max is None else sigma_max
    hi = max(hi, sigma_min)
    av = stats.av_ratio
    w = stats.wbar_mi
    av_ema = OMEGA * av + (1.0 - OMEGA) * state.av_ema
    w_ema = state.wbar_ema if math.isinf(w) else PSI * w + (1.0 - PSI) * state.wbar_ema
    min_rtt = min(state.min_rtt, stats.min_delay)
    n = select_block_length(k, state.n, state.sigma, stats.pdr, w, avt, candidates)

    sigma = state.sigma
    ef = state.ef
    df = state.df
    if av == 0.0:
        sigma = state.sigma_last
        branch = "1"
    elif math.isinf(w) and ef >= 2 and stats.pdr == 0.0:
        # Pipe ran dry despite patience: restart from the bandwidth estimate.
        sigma = 2.0 * (1.05 * n) / max(min_rtt, 1e-9)
        ef = 0
        df = False
        branch = "2"
    elif av >= 0.9 and av_ema >= 0.9 and w >= avt:
        sigma = sigma / PHI + min(0.1, 1.0 / n)
        ef += 1
        df = True
        branch = "3"
    elif av >= 0.9 and w <= 2.0 * min_rtt and ef <= 2:
        # Violations without queueing delay: the rate is simply too low.
        sigma = PHI * sigma
        ef = 0
        df = False
        branch = "4"
    elif av <= av_ema:
        if stats.pdr >= 0.9:
            if sigma < 0.75 * hi:
                sigma = sigma * (1.0 + 1.0 / n)
                branch = "5a"
            else:
                sigma = sigma + ((hi - sigma) + sigma_min + 1.0) / max(
                    hi - sigma_min, 1e-9
                )
                branch = "5b"
            df = False
        elif w >= w_ema and not df:
            cap = 1.2 * sigma / n if probe_cap_over_n else 1.2 * sigma
            sigma = min(sigma + (av_ema - av) / n, cap)
            ef = 0
            branch = "5c"
        else:
            sigma = max(sigma - (av_ema - av), 0.2 * sigma)
            ef += 1
            df = True
            branch = "5d"
    else:
        if w > w_ema:
            sigma = max(sigma - (av - av_ema), 0.2 * sigma)
            df = True
            ef = 0
            branch = "6a"
        else:
            sigma = min(sigma + (av - av_ema), 1.2 * sigma)
            df = False
            ef = 0
            branch = "6b"

    sigma = min(max(sigma, sigma_min), hi)
    new = replace(
        state,
        sigma=sigma,
        sigma_last=sigma,
        av_ema=av_ema,
        wbar_ema=w_ema,
        ef=ef,
        df=df,
        min_rtt=min_rtt,
        n=n,
        t_s=sampling_interval(n, sigma),
        t_tilde=monitoring_interval_length(avt, n),
        mi=state.mi + 1,
    )
    return new, branch


class CodewordScheduler:
    """Emission clock for one flow; a codeword is due every t_s slots."""

    __slots__ = ("t_s", "next_send")

    def __init__(self, t_s: int, start: int = 1) -> None:
        self.t_s = t_s
        self.next_send = start

    def due(self, now: int) -> bool:
        return now >= self.next_send

    def mark_sent(self, now: int) -> None:
        self.next_send = now + self.t_s

    def set_interval(self, now: int, t_s: int) -> None:
        # A shorter interval takes effect immediately, a longer one only
        # stretches future gaps; pending emissions are never pushed back.
        self.t_s = t_s
        if self.next_send > now + t_s:
            self.next_send = now + t_s


ADAPTIVE_COLUMNS = (
    "mi",
    "sigma",
    "n",
    "t_s",
    "t_tilde",
    "av_raw",
    "av_ratio",
    "wbar_mi",
    "pdr",
    "ef",
    "df",
    "min_rtt",
    "branch",
)
FLOW_COLUMNS = ("mi", "flow", "sigma", "t_s", "av_raw", "av_ratio", "delivered")


class _FlowState:
    __slots__ = (
        "avt",
        "store",
        "tracker",
        "log",
        "sched",
        "serial",
        "viol_ge",
        "viol_gt",
        "ivl_delivered",
        "delivered",
        "decoded",
    )

    def __init__(self, avt: int, initial_age: int | None, k: int, t_s: int) -> None:
        self.avt = avt
        self.store = ReceiverChunkStore(k)
        self.tracker = AgeTracker(avt, initial_age)
        self.log = DecodeLog(self.tracker.initial_age)
        self.sched = CodewordScheduler(t_s)
        self.serial = 0
        self.viol_ge = 0
        self.viol_gt = 0
        self.ivl_delivered = 0
        self.delivered = 0
        self.decoded = 0


@dataclass
class FlowsOutcome:
    """Everything the single- and multi-flow front ends need."""

    system: SimResult
    flow_rows: list[tuple]
    flow_av: list[float]
    flow_av_strict: list[float]
    flow_delivered: list[int]
    flow_decoded: list[int]
    flow_sigmas: list[float]


def run_adaptive_flows(
    config: SimConfig,
    flow_count: int = 1,
    flow_avts=None,
    allocate=None,
) -> FlowsOutcome:
    """Drive one or more adaptive flows through a shared bottleneck.

    One controller instance watches aggregate statistics (worst per-flow
    violation ratio, pooled delays, pooled delivery ratio) and sets the total
    rate; `allocate` then splits it across flows.  With flow_count == 1 and
    no allocator the total is the flow's rate and this is the plain
    single-flow simulation.
    """
    if flow_count < 1:
        raise ParameterError(f"flow_count must be >= 1, got {flow_count}")
    if flow_count > 1 and allocate is None:
        raise ParameterError("multiple flows need a rate allocator")
    if flow_avts is None:
        flow_avts = (config.avt,) * flow_count
    flow_avts = tuple(flow_avts)
    if len(flow_avts) != flow_count:
        raise ParameterError(
            f"expected {flow_count} per-flow thresholds, got {len(flow_avts)}"
        )

    k, n0 = config.coding.k, config.coding.n
    avt = config.avt
    duration = config.duration
    sigma_min = config.sigma_min
    rtt_init = (
        config.rtt_init if config.rtt_init is not None else 2.0 * config.propagation_delay
    )
    # The rate ceiling is per flow; the aggregate controller gets one ceiling
    # per concurrent flow so sharing does not throttle the system.
    per_flow_max = config.sigma_max if config.sigma_max is not None else sigma_ceiling(k, avt)
    total_max = per_flow_max * flow_count
    state = AdaptiveSamplingState.initial(
        k,
        n0,
        avt,
        rtt_init,
        sigma_min=sigma_min,
        sigma_max=total_max,
        monitoring_interval=config.monitoring_interval,
    )
    if flow_count > 1:
        boosted = min(max(state.sigma * flow_count, sigma_min), total_max)
        state = replace(
            state, sigma=boosted, sigma_last=boosted,
            t_s=sampling_interval(n0, boosted),
        )
    n = state.n
    sigmas = [state.sigma / flow_count] * flow_count
    path = BottleneckPath(config)
    flows = [
        _FlowState(a, config.initial_age, k, sampling_interval(n, s))
        for a, s in zip(flow_avts, sigmas)
    ]

    mi_start = 0
    mi_end = state.t_tilde
    ivl_sent = 0
    ivl_delivered = 0
    ivl_delay_sum = 0
    ivl_min_delay = math.inf
    delay_sum = 0
    delivered_total = 0
    occ_sum = 0
    occ_max = 0
    rows: list[tuple] = []
    flow_rows: list[tuple] = []
    decoded_gens: list[list[int]] = [[] for _ in range(flow_count)]

    for t in range(1, duration + 1):
        for lst in decoded_gens:
            lst.clear()
        for obj, delay in path.deliveries_at(t):
            fl = flows[obj[0]]
            fl.ivl_delivered += 1
            fl.delivered += 1
            ivl_delivered += 1
            delivered_total += 1
            ivl_delay_sum += delay
            delay_sum += delay
            if delay < ivl_min_delay:
                ivl_min_delay = delay
            if fl.store.add(obj[1], obj[2]):
                fl.decoded += 1
                if fl.log.record(obj[3], t):
                    decoded_gens[obj[0]].append(obj[3])
        for fl, gens in zip(flows, decoded_gens):
            age = fl.tracker.step(t, gens)
            if age >= fl.avt:
                fl.viol_ge += 1
            if age > fl.avt:
                fl.viol_gt += 1

        if t == mi_end:
            ivl_len = t - mi_start
            raws = []
            ratios = []
            for fl in flows:
                raw = interval_age_violation(fl.log.interval_entries(), mi_start, fl.avt)
                raws.append(raw)
                ratios.append(max(0.0, raw) / ivl_len)
                fl.log.roll()
            stats = AdaptiveIntervalStats(
                av_ratio=max(ratios),
                wbar_mi=ivl_delay_sum / ivl_delivered if ivl_delivered else math.inf,
                pdr=packet_delivery_ratio(ivl_delivered, ivl_sent),
                min_delay=ivl_min_delay,
            )
            old_total = state.sigma
            state, branch = process_interval(
                state,
                stats,
                avt,
                k,
                sigma_min=sigma_min,
                sigma_max=total_max,
                candidates=config.block_candidates,
            )
            n = state.n
            if allocate is None:
                sigmas = [state.sigma]
            else:
                sigmas = list(allocate(sigmas, ratios, state.sigma, old_total, sigma_min))
            rows.append(
                (
                    state.mi,
                    state.sigma,
                    n,
                    state.t_s,
                    state.t_tilde,
                    max(raws),
                    stats.av_ratio,
                    stats.wbar_mi,
                    stats.pdr,
                    state.ef,
                    int(state.df),
                    state.min_rtt,
                    branch,
                )
            )
            for idx, (fl, sig) in enumerate(zip(flows, sigmas)):
                t_s_i = sampling_interval(n, sig)
                fl.sched.set_interval(t, t_s_i)
                if flow_count > 1:
                    flow_rows.append(
                        (state.mi, idx, sig, t_s_i, raws[idx], ratios[idx], fl.ivl_delivered)
                    )
                fl.ivl_delivered = 0
            ivl_sent = 0
            ivl_delivered = 0
            ivl_delay_sum = 0
            ivl_min_delay = math.inf
            mi_start = t
            mi_end = t + state.t_tilde

        for idx, fl in enumerate(flows):
            if fl.sched.due(t):
                fl.serial += 1
                path.inject([(idx, fl.serial, ci, t) for ci in range(n)], t)
                ivl_sent += n
                fl.sched.mark_sent(t)
        path.advance_slot(t)
        occ = path.occupancy
        occ_sum += occ
        if occ > occ_max:
            occ_max = occ

    system = SimResult(
        schema="adaptive-sampling-interval/1",
        columns=ADAPTIVE_COLUMNS,
        rows=rows,
        av=flows[0].viol_ge / duration,
        av_strict=flows[0].viol_gt / duration,
        mean_delay=delay_sum / delivered_total if delivered_total else math.inf,
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
        age_trace=None,
        final_state={
            "sigma": state.sigma,
            "n": state.n,
            "t_s": state.t_s,
            "t_tilde": state.t_tilde,
            "min_rtt": state.min_rtt,
            "mi": state.mi,
        },
    )
    return FlowsOutcome(
        system=system,
        flow_rows=flow_rows,
        flow_av=[fl.viol_ge / duration for fl in flows],
        flow_av_strict=[fl.viol_gt / duration for fl in flows],
        flow_delivered=[fl.delivered for fl in flows],
        flow_decoded=[fl.decoded for fl in flows],
        flow_sigmas=list(sigmas),
    )


def run_sim(config: SimConfig) -> SimResult:
    """Single-flow adaptive simulation over the bottleneck path."""
    return run_adaptive_flows(config).system
