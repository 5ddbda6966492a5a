#!/usr/bin/env python3
"""Systematic erasure coding walkthrough: encode, lose shares, decode."""

import random

from agefec.coding import decode_payload, encode_payload

K, N = 3, 5
PAYLOAD = b"status update #42: pressure 1013 hPa, temp 21.4 C"


def main() -> None:
    rng = random.Random(7)
    shares = encode_payload(PAYLOAD, K, N)
    print(f"payload ({len(PAYLOAD)} bytes) split into {K} data + {N - K} parity shares:")
    for idx, share in enumerate(shares):
        kind = "data" if idx < K else "parity"
        print(f"  share {idx} ({kind}): {share[:12].hex()}...")

    # drop any n - k shares; the rest always reconstruct
    for trial in range(3):
        keep = sorted(rng.sample(range(N), K))
        subset = {i: shares[i] for i in keep}
        decoded = decode_payload(subset, K, N, len(PAYLOAD))
        status = "ok" if decoded == PAYLOAD else "MISMATCH"
        print(f"trial {trial}: decoded from shares {keep} -> {status}")

    print(f"decoded text: {decoded.decode()}")


if __name__ == "__main__":
    main()
