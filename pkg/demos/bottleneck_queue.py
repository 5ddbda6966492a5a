#!/usr/bin/env python3
"""Why a fixed sending rate cannot win on freshness.

Sweeps a fixed codeword rate across the stability bound of a lossy
bottleneck and prints the age-violation rate and peak queue occupancy at
each point.  Too slow starves the receiver, too fast floods the queue;
the analytic bound sits right where the cliff appears.
"""

from agefec.analysis import rate_upper_bound
from agefec.core import CodingParams, LossModel
from agefec.netsim import SimConfig, run_fixed_rate_sim


def main() -> None:
    coding = CodingParams(3, 4)
    loss = LossModel(0.1, 0.1)
    config = SimConfig(
        coding=coding,
        avt=5,
        q_s=3 * 1.4706,
        loss=loss,
        buffer_capacity=5000,
        duration=50_000,
        rng_seed=0,
    )
    sigma_up = rate_upper_bound(config.service_rate, coding.n, loss.p_in)
    print(f"stable-rate bound: {sigma_up:.4f} codewords/slot")
    print(f"{'rate':>8} {'vs bound':>9} {'age-violation':>14} {'peak queue':>11}")
    for factor in (0.3, 0.6, 0.9, 1.0, 1.1, 1.3):
        rate = factor * sigma_up
        result = run_fixed_rate_sim(config, rate=rate)
        print(
            f"{rate:8.4f} {factor:8.1f}x {result.av:14.4f} "
            f"{result.occupancy_max:11d}"
        )


if __name__ == "__main__":
    main()
