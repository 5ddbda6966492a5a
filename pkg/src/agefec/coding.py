"""Systematic MDS erasure code over GF(256).

An n x k generator is built from a Vandermonde matrix with distinct
evaluation points and normalized so its top k rows are the identity: the
first k output chunks are the payload itself, and every k x k row subset
stays invertible, so any k of the n chunks reconstruct the payload exactly.
"""

from __future__ import annotations

import numpy as np

from .core import Chunk, CodingParams, CodingError, InsufficientChunksError, Sample

_PRIMITIVE_POLY = 0x11D

_EXP = [0] * 512
_LOG = [0] * 256
_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= _PRIMITIVE_POLY
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return _EXP[255 - _LOG[a]]


# 256x256 product table so chunk-sized vectors multiply via one fancy-index.
_MUL_TABLE = np.zeros((256, 256), dtype=np.uint8)
for _a in range(1, 256):
    for _b in range(1, 256):
        _MUL_TABLE[_a, _b] = _EXP[_LOG[_a] + _LOG[_b]]


def _mat_mul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0
            for t in range(inner):
                acc ^= gf_mul(a[i][t], b[t][j])
            out[i][j] = acc
    return out


def _mat_inv(m: list[list[int]]) -> list[list[int]]:
    """Gauss-Jordan inverse of a small matrix over GF(256)."""
    size = len(m)
    aug = [list(row) + [int(i == j) for j in range(size)] for i, row in enumerate(m)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col]), None)
        if pivot is None:
            raise CodingError("singular matrix: evaluation points not distinct")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = gf_inv(aug[col][col])
        aug[col] = [gf_mul(v, inv_p) for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [v ^ gf_mul(factor, p) for v, p in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


def _generator(k: int, n: int) -> list[list[int]]:
    vand = [[pow_gf(x, j) for j in range(k)] for x in range(n)]
    top_inv = _mat_inv([row[:] for row in vand[:k]])
    gen = _mat_mul(vand, top_inv)
    for i in range(k):
        assert gen[i] == [int(i == j) for j in range(k)], "generator not systematic"
    return gen


def pow_gf(x: int, e: int) -> int:
    if e == 0:
        return 1
    if x == 0:
        return 0
    return _EXP[(_LOG[x] * e) % 255]


_GENERATORS: dict[tuple[int, int], list[list[int]]] = {}


def _cached_generator(k: int, n: int) -> list[list[int]]:
    key = (k, n)
    gen = _GENERATORS.get(key)
    if gen is None:
        gen = _GENERATORS[key] = _generator(k, n)
    return gen


def encode_payload(payload: bytes, k: int, n: int) -> list[bytes]:
    """Split `payload` into k padded data chunks and emit n coded chunks."""
    chunk_len = -(-len(payload) // k) if payload else 1
    padded = payload.ljust(chunk_len * k, b"\0")
    data = np.frombuffer(padded, dtype=np.uint8).reshape(k, chunk_len)
    gen = _cached_generator(k, n)
    out: list[bytes] = [padded[i * chunk_len:(i + 1) * chunk_len] for i in range(k)]
    for i in range(k, n):
        acc = np.zeros(chunk_len, dtype=np.uint8)
        for j, coeff in enumerate(gen[i]):
            if coeff:
                acc ^= _MUL_TABLE[coeff, data[j]]
        out.append(acc.tobytes())
    return out


def decode_payload(shares: dict[int, bytes], k: int, n: int, payload_len: int) -> bytes:
    """Reconstruct the payload from any k of the n coded chunks.

    `shares` maps chunk index to chunk bytes; exactly the original
    `payload_len` bytes come back (padding stripped).
    """
    if len(shares) < k:
        raise InsufficientChunksError(f"got {len(shares)} distinct chunks, need {k}")
    indices = sorted(shares)[:k]
    if indices[0] < 0 or indices[-1] >= n:
        raise CodingError(f"chunk index out of range for n={n}: {indices}")
    lengths = {len(shares[i]) for i in indices}
    if len(lengths) != 1:
        raise CodingError(f"chunk lengths differ: {sorted(lengths)}")
    chunk_len = lengths.pop()
    gen = _cached_generator(k, n)
    if indices == list(range(k)):
        padded = b"".join(shares[i] for i in indices)
        return padded[:payload_len]
    sub = [gen[i] for i in indices]
    inv = _mat_inv(sub)
    received = np.stack([np.frombuffer(shares[i], dtype=np.uint8) for i in indices])
    rows = []
    for i in range(k):
        acc = np.zeros(chunk_len, dtype=np.uint8)
        for j, coeff in enumerate(inv[i]):
            if coeff:
                acc ^= _MUL_TABLE[coeff, received[j]]
        rows.append(acc)
    return np.concatenate(rows).tobytes()[:payload_len]


def encode_sample(sample: Sample, params: CodingParams) -> list[Chunk]:
    """Erasure-code a sample into its n chunks."""
    if len(sample.payload) != params.payload_bytes:
        raise CodingError(
            f"payload is {len(sample.payload)} bytes, expected {params.payload_bytes}"
        )
    pieces = encode_payload(sample.payload, params.k, params.n)
    return [
        Chunk(sample_id=sample.id, chunk_index=i, gen_time=sample.gen_time, payload=piece)
        for i, piece in enumerate(pieces)
    ]


def decode_sample(chunks, params: CodingParams) -> bytes:
    """Reconstruct a sample payload from k or more of its chunks."""
    chunks = list(chunks)
    if not chunks:
        raise InsufficientChunksError("no chunks supplied")
    ids = {c.sample_id for c in chunks}
    if len(ids) != 1:
        raise CodingError(f"chunks from different samples: {sorted(ids)}")
    indices = [c.chunk_index for c in chunks]
    if len(set(indices)) != len(indices):
        raise CodingError("duplicate chunk indices supplied")
    shares = {c.chunk_index: c.payload for c in chunks}
    return decode_payload(shares, params.k, params.n, params.payload_bytes)
