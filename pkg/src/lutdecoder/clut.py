"""Compressed lookup tables.

Two schemes:

* ``FrameClut`` (``[d=3, m=2]`` only). The 8-bit address splits into the
  newest layer (upper nibble) and the oldest layer (lower nibble). Upper
  nibbles of weight 0 or 1 get a 16-entry data frame (segment A), weight 2 a
  10-entry frame holding lower nibbles 0..9 (segment B): 5*16 + 6*10 = 140
  entries. Corrections are re-encoded through a table of the distinct patterns
  and packed four per 16-bit word; state deltas are stored raw.
* ``RankClut`` (any configuration). Every address of popcount <= W is stored,
  at the position given by its combinatorial rank among such addresses.

Addresses whose oldest layer is empty always map to the all-zero entry (the
matcher never commits anything there), so both schemes answer them without
storage.
"""

from __future__ import annotations

import io
import math
import struct
import warnings
import zlib
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .bits import popcount
from .lut import (
    FLAG_CLUT,
    HEADER,
    DecoderConfig,
    Lut,
    LutEntry,
    SparseLut,
    _pack_dense,
    _unpack_dense,
    pack_header,
    split_payload,
    table_bytes,
    unpack_header,
)

SCHEME_FRAME = 0
SCHEME_RANK = 1

SEGMENT_A_UPPERS = (0x0, 0x1, 0x2, 0x4, 0x8)
SEGMENT_B_UPPERS = (0x3, 0x5, 0x6, 0x9, 0xA, 0xC)
FRAME_A = 16
FRAME_B = 10
FRAME_ENTRIES = len(SEGMENT_A_UPPERS) * FRAME_A + len(SEGMENT_B_UPPERS) * FRAME_B
FRAME_CUTOFF = 3

# word modes when a code is wider than 4 bits (2 mode bits + 14-bit body)
MODE_OVERFLOW = 0b00  # body = index of a raw group in the overflow area
MODE_SLICE_A_RAW = 0b01  # slice B all zero, slice A raw
MODE_SLICE_A_DELTA = 0b10  # slice B all zero, slice A = 3-bit base + four 2-bit deltas
MODE_BASE_DELTA = 0b11  # whole codes = base + four 2-bit deltas


class Miss:
    """Sentinel for an address the compressed table does not hold."""

    def __repr__(self):
        return "MISS"


MISS = Miss()


def _oldest_layer_empty(address: int, config: DecoderConfig) -> bool:
    return address & ((1 << config.syndrome_len) - 1) == 0


def frame_index(address: int) -> int | None:
    """Position of an 8-bit address among the 140 stored entries, or None."""
    upper, lower = address >> 4, address & 0xF
    if upper in SEGMENT_A_UPPERS:
        return SEGMENT_A_UPPERS.index(upper) * FRAME_A + lower
    if upper in SEGMENT_B_UPPERS and lower < FRAME_B:
        return len(SEGMENT_A_UPPERS) * FRAME_A + SEGMENT_B_UPPERS.index(upper) * FRAME_B + lower
    return None


def frame_addresses() -> list[int]:
    out = [(u << 4) | lo for u in SEGMENT_A_UPPERS for lo in range(FRAME_A)]
    out += [(u << 4) | lo for u in SEGMENT_B_UPPERS for lo in range(FRAME_B)]
    return out


# -- word packing ----------------------------------------------------------


def _slice_widths(code_width: int) -> tuple[int, int]:
    a = (code_width + 1) // 2
    return a, code_width - a


def pack_group(codes: list[int], code_width: int) -> tuple[int, int | None]:
    """Pack four codes into one 16-bit word.

    Codes are sliced vertically: slice A holds the low bits of every code,
    slice B the high bits. Returns ``(word, None)`` or, when no mode fits,
    ``(MODE_OVERFLOW word placeholder, raw group bits)``.
    """
    wa, wb = _slice_widths(code_width)
    slice_a = [c & ((1 << wa) - 1) for c in codes]
    slice_b = [c >> wa for c in codes]
    if 4 * code_width <= 16:
        word = 0
        for k, v in enumerate(slice_a):
            word |= v << (k * wa)
        for k, v in enumerate(slice_b):
            word |= v << (4 * wa + k * wb)
        return word, None
    body = None
    if not any(slice_b) and wa == 3:
        lo = min(slice_a)
        if max(slice_a) - lo <= 3:
            body = (MODE_SLICE_A_DELTA, lo | sum((v - lo) << (3 + 2 * k) for k, v in enumerate(slice_a)))
        else:
            body = (MODE_SLICE_A_RAW, sum(v << (3 * k) for k, v in enumerate(slice_a)))
    elif not any(slice_b) and 4 * wa <= 14:
        body = (MODE_SLICE_A_RAW, sum(v << (wa * k) for k, v in enumerate(slice_a)))
    elif max(codes) - min(codes) <= 3 and code_width + 8 <= 14:
        lo = min(codes)
        body = (MODE_BASE_DELTA, lo | sum((c - lo) << (code_width + 2 * k) for k, c in enumerate(codes)))
    if body is None:
        raw = sum(c << (code_width * k) for k, c in enumerate(codes))
        return MODE_OVERFLOW << 14, raw
    mode, bits = body
    return (mode << 14) | bits, None


def unpack_slot(word: int, slot: int, code_width: int, overflow: list[int]) -> int:
    """Code stored in ``slot`` (0..3) of a packed word."""
    wa, wb = _slice_widths(code_width)
    if 4 * code_width <= 16:
        a = (word >> (slot * wa)) & ((1 << wa) - 1)
        b = (word >> (4 * wa + slot * wb)) & ((1 << wb) - 1)
        return a | (b << wa)
    mode, body = word >> 14, word & 0x3FFF
    if mode == MODE_OVERFLOW:
        return (overflow[body] >> (code_width * slot)) & ((1 << code_width) - 1)
    if mode == MODE_SLICE_A_RAW:
        return (body >> (wa * slot)) & ((1 << wa) - 1)
    if mode == MODE_SLICE_A_DELTA:
        return (body & 0x7) + ((body >> (3 + 2 * slot)) & 0x3)
    return (body & ((1 << code_width) - 1)) + ((body >> (code_width + 2 * slot)) & 0x3)


# -- frame scheme ----------------------------------------------------------


@dataclass
class FrameClut:
    config: DecoderConfig
    code_width: int
    encoding_table: list[int]  # code -> packed correction pattern
    packed_words: list[int]  # 16-bit words, four codes each
    overflow: list[int]  # raw 4-code groups for words in overflow mode
    state_nibbles: list[int]  # raw state delta per stored entry
    weight_cutoff: int = FRAME_CUTOFF

    @property
    def entry_count(self) -> int:
        return len(self.state_nibbles)

    @property
    def payload_bytes(self) -> float:
        words = 2 * len(self.packed_words)
        over = len(self.overflow) * math.ceil(4 * self.code_width / 8)
        states = math.ceil(self.entry_count * self.config.syndrome_len / 8)
        return words + over + states

    @property
    def encoding_table_bytes(self) -> int:
        return math.ceil(len(self.encoding_table) * self.config.data_qubits / 8)

    def lookup_packed(self, address: int) -> int | None:
        if not 0 <= address < (1 << self.config.address_bits):
            raise ValueError(f"address {address} out of range")
        i = frame_index(address)
        if i is None:
            return 0 if _oldest_layer_empty(address, self.config) else None
        code = unpack_slot(self.packed_words[i // 4], i % 4, self.code_width, self.overflow)
        return self.encoding_table[code] | (self.state_nibbles[i] << self.config.data_qubits)


def compress_frame(lut: Lut, code_width: int | None = None) -> FrameClut:
    """Compress a full ``[d=3, m=2]`` table into the 140-entry frame layout.

    ``code_width`` defaults to the least number of bits that distinguishes the
    correction patterns present.
    """
    cfg = lut.config
    if (cfg.d, cfg.m) != (3, 2):
        raise ValueError("the frame scheme is defined for [d=3, m=2] only")
    n = cfg.data_qubits
    addresses = frame_addresses()
    patterns = [lut.packed(a) & ((1 << n) - 1) for a in addresses]
    states = [lut.packed(a) >> n for a in addresses]

    # codes by first occurrence in address order
    table: dict[int, int] = {}
    for _, pat in sorted(zip(addresses, patterns)):
        table.setdefault(pat, len(table))
    least = max(1, math.ceil(math.log2(len(table))))
    if code_width is None:
        code_width = least
    elif code_width < least:
        raise ValueError(f"{len(table)} patterns need at least {least}-bit codes")
    if code_width > 6:
        warnings.warn(f"{len(table)} distinct corrections: widening codes to {code_width} bits")
    codes = [table[p] for p in patterns]

    words, overflow = [], []
    for g in range(0, len(codes), 4):
        group = codes[g : g + 4]
        group += [0] * (4 - len(group))
        word, raw = pack_group(group, code_width)
        if raw is not None:
            word |= len(overflow)
            overflow.append(raw)
        words.append(word)

    for a in range(1 << cfg.address_bits):
        if frame_index(a) is None and _oldest_layer_empty(a, cfg) and lut.packed(a) != 0:
            raise AssertionError(f"address {a:#x} has an empty oldest layer but a nonzero entry")

    return FrameClut(
        config=cfg,
        code_width=code_width,
        encoding_table=sorted(table, key=table.get),
        packed_words=words,
        overflow=overflow,
        state_nibbles=states,
    )


# -- rank scheme -----------------------------------------------------------


class RankIndex:
    """Bijection between ``bits``-bit strings of popcount <= W and 0..count-1.

    Strings are ordered by popcount, then colexicographically: the rank of
    positions ``c_1 < ... < c_k`` inside its weight class is
    ``sum_i C(c_i, i)``.
    """

    def __init__(self, bits: int, W: int):
        self.bits = bits
        self.W = min(W, bits)
        self.binom = np.array(
            [[comb(n, k) for k in range(self.W + 2)] for n in range(bits + 1)], dtype=np.int64
        )
        self.offsets = np.concatenate(([0], np.cumsum([comb(bits, k) for k in range(self.W + 1)])))

    @property
    def count(self) -> int:
        return int(self.offsets[-1])

    @property
    def nbytes(self) -> int:
        return self.binom.nbytes + self.offsets.nbytes

    def rank(self, address: int) -> int | None:
        k = 0
        r = 0
        pos = 0
        a = address
        while a:
            if a & 1:
                k += 1
                if k > self.W:
                    return None
                r += comb(pos, k)
            a >>= 1
            pos += 1
        return int(self.offsets[k]) + r

    def rank_many(self, addresses: np.ndarray) -> np.ndarray:
        """Vectorized rank; -1 for addresses above the cutoff."""
        a = np.asarray(addresses, dtype=np.int64)
        k = np.zeros(len(a), dtype=np.int64)
        r = np.zeros(len(a), dtype=np.int64)
        for pos in range(self.bits):
            bit = (a >> pos) & 1
            k += bit
            r += bit * self.binom[pos, np.minimum(k, self.W + 1)]
        ok = k <= self.W
        out = np.full(len(a), -1, dtype=np.int64)
        out[ok] = self.offsets[k[ok]] + r[ok]
        return out

    def unrank(self, index: int) -> int:
        k = int(np.searchsorted(self.offsets, index, side="right")) - 1
        r = index - int(self.offsets[k])
        address = 0
        for i in range(k, 0, -1):
            c = i - 1
            while comb(c + 1, i) <= r:
                c += 1
            r -= comb(c, i)
            address |= 1 << c
        return address


@dataclass
class RankClut:
    config: DecoderConfig
    weight_cutoff: int
    entries: np.ndarray  # uint64 packed entries in rank order
    index: RankIndex = field(repr=False)

    @property
    def entry_count(self) -> int:
        return len(self.entries)

    @property
    def payload_bytes(self) -> float:
        return math.ceil(self.entry_count * self.config.entry_bits / 8)

    @property
    def index_bytes(self) -> int:
        return self.index.nbytes

    def lookup_packed(self, address: int) -> int | None:
        if not 0 <= address < (1 << self.config.address_bits):
            raise ValueError(f"address {address} out of range")
        r = self.index.rank(address)
        if r is None:
            return 0 if _oldest_layer_empty(address, self.config) else None
        return int(self.entries[r])

    def lookup_many(self, addresses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(addresses, dtype=np.int64)
        r = self.index.rank_many(a)
        miss = r < 0
        out = np.zeros(len(a), dtype=np.uint64)
        out[~miss] = self.entries[r[~miss]]
        empty = (a & ((1 << self.config.syndrome_len) - 1)) == 0
        return out, miss & ~empty


def compress_rank(entries: SparseLut | Lut, W: int | None = None) -> RankClut:
    """Rank-indexed store of every entry with address popcount <= W."""
    cfg = entries.config
    if W is None:
        if not isinstance(entries, SparseLut):
            raise ValueError("weight cutoff required for a dense table")
        W = entries.weight_cutoff
    index = RankIndex(cfg.address_bits, W)
    out = np.zeros(index.count, dtype=np.uint64)
    if isinstance(entries, SparseLut):
        if entries.weight_cutoff < index.W:
            raise ValueError("sparse table was built with a lower cutoff than requested")
        keep = popcount(entries.addresses) <= index.W
        out[index.rank_many(entries.addresses[keep])] = entries.entries[keep]
    else:
        addresses = np.arange(len(entries.entries), dtype=np.int64)
        keep = popcount(addresses) <= index.W
        out[index.rank_many(addresses[keep])] = entries.entries[keep]
    return RankClut(cfg, index.W, out, index)


# -- common API ------------------------------------------------------------

Clut = FrameClut | RankClut


def lookup(clut: Clut, address: int) -> LutEntry | Miss:
    v = clut.lookup_packed(address)
    return MISS if v is None else LutEntry.unpack(v, clut.config)


def memory_report(cluts: dict[str, Clut]) -> dict:
    """Bytes per type for compressed vs full tables, and reduction ratios.

    ``clut_bytes`` is the entry payload; ``overhead_bytes`` is the encoding
    table (frame scheme) or the rank offsets and binomial table (rank scheme).
    """
    rows = []
    for t, c in cluts.items():
        full = table_bytes(c.config)
        overhead = c.encoding_table_bytes if isinstance(c, FrameClut) else c.index_bytes
        rows.append(
            {
                "type": t,
                "clut_bytes": c.payload_bytes,
                "overhead_bytes": overhead,
                "full_bytes": full,
                "ratio": full / c.payload_bytes,
            }
        )
    clut_total = sum(r["clut_bytes"] for r in rows)
    overhead_total = sum(r["overhead_bytes"] for r in rows)
    full_total = sum(r["full_bytes"] for r in rows)
    return {
        "rows": rows,
        "clut_total": clut_total,
        "overhead_total": overhead_total,
        "full_total": full_total,
        "ratio": full_total / clut_total,
    }


def to_bytes(clut: Clut) -> bytes:
    cfg = clut.config
    out = io.BytesIO()
    if isinstance(clut, FrameClut):
        out.write(struct.pack("<BBB", SCHEME_FRAME, clut.weight_cutoff, clut.code_width))
        pat_bytes = (cfg.data_qubits + 7) // 8
        out.write(struct.pack("<H", len(clut.encoding_table)))
        for pat in clut.encoding_table:
            out.write(pat.to_bytes(pat_bytes, "little"))
        out.write(struct.pack("<H", len(clut.packed_words)))
        out.write(np.array(clut.packed_words, dtype="<u2").tobytes())
        group_bytes = math.ceil(4 * clut.code_width / 8)
        out.write(struct.pack("<H", len(clut.overflow)))
        for raw in clut.overflow:
            out.write(raw.to_bytes(group_bytes, "little"))
        out.write(_pack_dense(np.array(clut.state_nibbles, dtype=np.uint64), cfg.syndrome_len))
        count = clut.entry_count
    else:
        out.write(struct.pack("<BB", SCHEME_RANK, clut.weight_cutoff))
        out.write(_pack_dense(clut.entries, cfg.entry_bits))
        count = clut.entry_count
    payload = out.getvalue()
    header = pack_header(cfg, FLAG_CLUT, clut.weight_cutoff, count)
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def from_bytes(data: bytes) -> Clut:
    cfg, flags, cutoff, count = unpack_header(data)
    if not flags & FLAG_CLUT:
        raise ValueError("not a compressed table")
    payload = split_payload(data)
    try:
        return _parse_clut_payload(cfg, cutoff, count, payload)
    except (struct.error, IndexError) as exc:
        raise ValueError(f"malformed compressed payload: {exc}") from exc


def _parse_clut_payload(cfg: DecoderConfig, cutoff: int, count: int, payload: bytes) -> Clut:
    buf = io.BytesIO(payload)
    scheme, w = struct.unpack("<BB", buf.read(2))
    if w != cutoff:
        raise ValueError("weight cutoff mismatch between header and payload")
    if scheme == SCHEME_FRAME:
        (code_width,) = struct.unpack("<B", buf.read(1))
        pat_bytes = (cfg.data_qubits + 7) // 8
        (n_tab,) = struct.unpack("<H", buf.read(2))
        table = [int.from_bytes(buf.read(pat_bytes), "little") for _ in range(n_tab)]
        (n_words,) = struct.unpack("<H", buf.read(2))
        words = np.frombuffer(buf.read(2 * n_words), dtype="<u2").astype(int).tolist()
        (n_over,) = struct.unpack("<H", buf.read(2))
        group_bytes = math.ceil(4 * code_width / 8)
        overflow = [int.from_bytes(buf.read(group_bytes), "little") for _ in range(n_over)]
        rest = buf.read()
        if len(rest) != math.ceil(count * cfg.syndrome_len / 8) or len(words) != n_words:
            raise ValueError("frame payload length inconsistent with header")
        states = _unpack_dense(rest, count, cfg.syndrome_len).astype(int).tolist()
        return FrameClut(cfg, code_width, table, words, overflow, states, cutoff)
    if scheme == SCHEME_RANK:
        index = RankIndex(cfg.address_bits, cutoff)
        rest = buf.read()
        if count != index.count or len(rest) != math.ceil(count * cfg.entry_bits / 8):
            raise ValueError("rank payload length inconsistent with header")
        return RankClut(cfg, cutoff, _unpack_dense(rest, count, cfg.entry_bits), index)
    raise ValueError(f"unknown scheme id {scheme}")


def serialize(clut: Clut, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(clut))


def deserialize(path) -> Clut:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


__all__ = [
    "FRAME_ENTRIES",
    "HEADER",
    "MISS",
    "FrameClut",
    "RankClut",
    "RankIndex",
    "compress_frame",
    "compress_rank",
    "frame_index",
    "lookup",
    "memory_report",
    "to_bytes",
    "from_bytes",
]
