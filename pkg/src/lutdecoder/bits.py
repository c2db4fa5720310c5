"""Conversions between 0/1 arrays and packed integers (bit ``i`` = element ``i``)."""

from __future__ import annotations

import numpy as np


def pack(bits) -> int:
    value = 0
    for i, b in enumerate(np.asarray(bits, dtype=np.uint8).ravel()):
        if b:
            value |= 1 << i
    return value


def unpack(value: int, width: int) -> np.ndarray:
    return np.array([(value >> i) & 1 for i in range(width)], dtype=np.uint8)


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into int64 values."""
    rows = np.asarray(rows, dtype=np.int64)
    weights = np.left_shift(np.int64(1), np.arange(rows.shape[-1], dtype=np.int64))
    return rows @ weights


def unpack_rows(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return ((values[..., None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)


def popcount(values) -> np.ndarray:
    """Vectorized popcount for non-negative integers below 2**63."""
    v = np.asarray(values, dtype=np.uint64)
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    with np.errstate(over="ignore"):  # the byte-sum multiply wraps by design
        return ((v * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)
