#!/usr/bin/env python3
"""Closed-form freshness numbers for a coded flow over a lossy link.

Prints, for each age value, the probability a sample is decodable once
its chunks have had that many transmission chances, the probability the
realized age still exceeds it, and the long-run violated-time fraction a
renewal-model sender would see at a few sampling intervals.
"""

from agefec.analysis import (
    expected_violation_fraction,
    outage_probability,
    rate_upper_bound,
    sample_decode_prob,
)
from agefec.core import CodingParams, LossModel, total_loss_probability

CODING = CodingParams(3, 5)
LOSS = LossModel(0.1, 0.1)
AVT = 5


def main() -> None:
    p_chunk = total_loss_probability(LOSS)
    print(
        f"k={CODING.k} n={CODING.n}, per-chunk loss {p_chunk:.3f}, "
        f"threshold {AVT} slots"
    )
    print(f"{'age':>4} {'decodable':>10} {'outage':>10}")
    for e in range(AVT + 3):
        print(
            f"{e:4d} {sample_decode_prob(CODING, LOSS, e):10.6f} "
            f"{outage_probability(e, AVT + 2, CODING, LOSS):10.6f}"
        )

    one_shot = sample_decode_prob(CODING, LOSS, 0)
    print()
    print("violated-time fraction if a new codeword starts every T_s slots")
    print("(decode probability per codeword {:.4f}, delivery delay 2 slots):".format(one_shot))
    for t_s in (1, 2, 3, 5, 8):
        frac = expected_violation_fraction(one_shot, t_s, 2.0, AVT)
        print(f"  T_s={t_s}: {frac:.4f}")

    print()
    print(
        "stable-rate bound at q_s = 4.4118 chunks/slot: "
        f"{rate_upper_bound(4.4118, CODING.n, LOSS.p_in):.4f} codewords/slot"
    )


if __name__ == "__main__":
    main()
