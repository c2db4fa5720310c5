"""LUT programming, size accounting and the on-disk table format.

Address layout: layer ``k`` of the window occupies bits ``[k*s, (k+1)*s)``,
oldest layer in the least significant block; inside a layer bit ``i`` is
stabilizer ``i``. Packed entries put correction bits for data qubits
``0..n_d-1`` in bits ``0..n_d-1`` and the state delta above them.
"""

from __future__ import annotations

import io
import math
import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import BinaryIO

import numpy as np

from .bits import pack, popcount, unpack
from .layout import CodeLayout, build_layout, check_stab_type
from .matching import DecodingGraph, build_graph, commit_oldest_layer, min_weight_match

DEFAULT_MAX_ADDRESS_BITS = 16
DEFAULT_WEIGHT_CUTOFF = 5
FULL_CUTOFF = 255

MAGIC = b"LLPT"
VERSION = 1
FLAG_SPARSE = 0x1
FLAG_CLUT = 0x2
HEADER = struct.Struct("<4sHHBBBBBB2xQ")
STAB_CODES = {"X": 0, "Z": 1}


@dataclass(frozen=True)
class DecoderConfig:
    d: int
    m: int
    stab_type: str

    def __post_init__(self):
        object.__setattr__(self, "stab_type", check_stab_type(self.stab_type))
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")

    @cached_property
    def layout(self) -> CodeLayout:
        return build_layout(self.d)

    @property
    def data_qubits(self) -> int:
        return self.d * self.d

    @property
    def syndrome_len(self) -> int:
        return self.layout.num_stabilizers(self.stab_type)

    @property
    def address_bits(self) -> int:
        return self.syndrome_len * self.m

    @property
    def entry_bits(self) -> int:
        return self.data_qubits + self.syndrome_len

    def graph(self, **kwargs) -> DecodingGraph:
        return build_graph(self.layout, self.stab_type, self.m, **kwargs)


@dataclass(frozen=True)
class LutEntry:
    correction: np.ndarray
    state_delta: np.ndarray

    def pack(self) -> int:
        return pack(self.correction) | (pack(self.state_delta) << len(self.correction))

    @classmethod
    def unpack(cls, value: int, config: DecoderConfig) -> LutEntry:
        n = config.data_qubits
        return cls(unpack(value & ((1 << n) - 1), n), unpack(value >> n, config.syndrome_len))

    @classmethod
    def zero(cls, config: DecoderConfig) -> LutEntry:
        return cls(np.zeros(config.data_qubits, np.uint8), np.zeros(config.syndrome_len, np.uint8))

    def __eq__(self, other):
        if not isinstance(other, LutEntry):
            return NotImplemented
        return np.array_equal(self.correction, other.correction) and np.array_equal(
            self.state_delta, other.state_delta
        )


@dataclass
class Lut:
    """Dense table: ``entries[address]`` is the packed entry."""

    config: DecoderConfig
    entries: np.ndarray  # uint64, length 2**address_bits

    def __len__(self) -> int:
        return len(self.entries)

    def packed(self, address: int) -> int:
        return int(self.entries[address])

    def entry(self, address: int) -> LutEntry:
        return LutEntry.unpack(self.packed(address), self.config)

    @property
    def nbytes(self) -> int:
        return table_bytes(self.config)


@dataclass
class SparseLut:
    """Entries for a downward-closed set of addresses (e.g. all with popcount <= W)."""

    config: DecoderConfig
    weight_cutoff: int
    addresses: np.ndarray  # int64, sorted
    entries: np.ndarray  # uint64, aligned with addresses

    def __len__(self) -> int:
        return len(self.addresses)

    def _index(self, address: int) -> int | None:
        i = int(np.searchsorted(self.addresses, address))
        if i < len(self.addresses) and self.addresses[i] == address:
            return i
        return None

    def __contains__(self, address: int) -> bool:
        return self._index(address) is not None

    def packed(self, address: int) -> int | None:
        i = self._index(address)
        return None if i is None else int(self.entries[i])

    def entry(self, address: int) -> LutEntry | None:
        v = self.packed(address)
        return None if v is None else LutEntry.unpack(v, self.config)

    def items(self):
        for a, e in zip(self.addresses.tolist(), self.entries.tolist()):
            yield a, e


# -- programming ----------------------------------------------------------


def _check_graph(config: DecoderConfig, graph: DecodingGraph) -> None:
    if (graph.layout.distance, graph.layers, graph.stab_type) != (config.d, config.m, config.stab_type):
        raise ValueError("decoding graph does not match the decoder configuration")


def entry_for_address(config: DecoderConfig, graph: DecodingGraph, address: int) -> LutEntry:
    """Program one entry by matching the decoded window directly."""
    _check_graph(config, graph)
    if not 0 <= address < (1 << config.address_bits):
        raise ValueError(f"address {address} out of range for {config.address_bits} bits")
    match = min_weight_match(graph, graph.events_from_address(address))
    correction, state_delta = commit_oldest_layer(graph, match)
    if config.m == 1:
        state_delta[:] = 0
    return LutEntry(correction, state_delta)


def _pair_tables(graph: DecodingGraph):
    n = graph.boundary
    use_int = graph._key_bits <= 62
    kdt = np.int64 if use_int else object
    pw = np.zeros((n, n), dtype=np.int64)
    pl = np.zeros((n, n), dtype=np.int64)
    pk = np.zeros((n, n), dtype=kdt)
    bw = np.zeros(n, dtype=np.int64)
    bl = np.zeros(n, dtype=np.int64)
    bk = np.zeros(n, dtype=kdt)
    for i in range(n):
        pc = graph.path(i, graph.boundary)
        bw[i], bl[i], bk[i] = pc.weight, pc.neg_log_prob, pc.key
        for j in range(n):
            pc = graph.path(i, j)
            pw[i, j], pl[i, j], pk[i, j] = pc.weight, pc.neg_log_prob, pc.key
    return pw, pl, pk, bw, bl, bk


def solve_addresses(graph: DecodingGraph, addresses: np.ndarray, dense: bool = False) -> np.ndarray:
    """Program packed entries for a sorted, downward-closed array of addresses at once.

    Runs the same subset recursion as :func:`min_weight_match`, but over
    addresses instead of per-window event subsets: every address's optimum is
    built from the optima of the addresses with its lowest event and one
    partner removed, one popcount level at a time.
    """
    addresses = np.asarray(addresses, dtype=np.int64)
    nb = graph.boundary
    pw, pl, pk, bw, bl, bk = _pair_tables(graph)
    count = len(addresses)
    W = np.zeros(count, dtype=np.int64)
    L = np.zeros(count, dtype=np.int64)
    K = np.zeros(count, dtype=pk.dtype)

    def where(x):
        if dense:
            return x
        pos = np.searchsorted(addresses, x)
        if np.any(pos >= count) or np.any(addresses[np.minimum(pos, count - 1)] != x):
            raise ValueError("address set is not downward closed")
        return pos

    pc = popcount(addresses)
    for level in range(1, int(pc.max(initial=0)) + 1):
        idx = np.nonzero(pc == level)[0]
        if not len(idx):
            continue
        A = addresses[idx]
        lowval = A & -A
        low = np.log2(lowval).astype(np.int64)
        rest = A ^ lowval
        r = where(rest)
        best_w = bw[low] + W[r]
        best_l = bl[low] + L[r]
        best_k = bk[low] ^ K[r]
        for j in range(nb):
            sel = np.nonzero((rest >> j) & 1)[0]
            if not len(sel):
                continue
            sub = where(rest[sel] ^ (1 << j))
            lo = low[sel]
            cw = pw[lo, j] + W[sub]
            cl = pl[lo, j] + L[sub]
            ck = pk[lo, j] ^ K[sub]
            ow, ol, ok = best_w[sel], best_l[sel], best_k[sel]
            better = (cw < ow) | ((cw == ow) & ((cl < ol) | ((cl == ol) & (ck < ok))))
            upd = sel[better]
            best_w[upd] = cw[better]
            best_l[upd] = cl[better]
            best_k[upd] = ck[better]
        W[idx], L[idx], K[idx] = best_w, best_l, best_k

    return _entries_from_keys(graph, addresses, K)


def _entries_from_keys(graph: DecodingGraph, addresses: np.ndarray, keys: np.ndarray) -> np.ndarray:
    n = graph.num_qubits
    s = graph.num_stabilizers
    top = graph._key_bits - 1
    corr = np.zeros(len(addresses), dtype=np.int64)
    synd = np.zeros(len(addresses), dtype=np.int64)
    touching = graph.layout.qubit_stabilizers(graph.stab_type)
    for q in range(n):
        bit = ((keys >> (top - q)) & 1).astype(np.int64)
        corr |= bit << q
        mask = sum(1 << i for i in touching[q])
        synd ^= bit * mask
    if graph.layers == 1:
        delta = np.zeros_like(corr)
        if np.any(((addresses & ((1 << s) - 1)) ^ synd) != 0):
            raise AssertionError("single-layer window left oldest-layer events unexplained")
    else:
        delta = (addresses & ((1 << s) - 1)) ^ synd
    return (corr | (delta << n)).astype(np.uint64)


def build_full_lut(
    config: DecoderConfig,
    graph: DecodingGraph | None = None,
    *,
    max_address_bits: int = DEFAULT_MAX_ADDRESS_BITS,
    force: bool = False,
) -> Lut:
    graph = graph or config.graph()
    _check_graph(config, graph)
    if config.address_bits > max_address_bits and not force:
        raise ValueError(
            f"[d={config.d},m={config.m}] {config.stab_type}-type needs {config.address_bits} "
            f"address bits (limit {max_address_bits}); pass force=True to build anyway"
        )
    addresses = np.arange(1 << config.address_bits, dtype=np.int64)
    return Lut(config, solve_addresses(graph, addresses, dense=True))


def addresses_up_to_weight(bits: int, w: int) -> np.ndarray:
    """Sorted array of all ``bits``-bit addresses with popcount <= ``w``."""
    from itertools import combinations

    out = [0]
    for k in range(1, min(w, bits) + 1):
        out.extend(sum(1 << b for b in combo) for combo in combinations(range(bits), k))
    return np.array(sorted(out), dtype=np.int64)


def build_weight_bounded_lut(
    config: DecoderConfig, graph: DecodingGraph | None = None, W: int = DEFAULT_WEIGHT_CUTOFF
) -> SparseLut:
    graph = graph or config.graph()
    _check_graph(config, graph)
    if not 0 <= W <= config.address_bits:
        raise ValueError(f"weight cutoff must lie in [0, {config.address_bits}], got {W}")
    addresses = addresses_up_to_weight(config.address_bits, W)
    return SparseLut(config, W, addresses, solve_addresses(graph, addresses))


def build_table(config: DecoderConfig, W: int | None = None, force_full: bool = False):
    """Full table when it fits the default guard (or ``force_full``), else weight-bounded."""
    if W is None and (config.address_bits <= DEFAULT_MAX_ADDRESS_BITS or force_full):
        return build_full_lut(config, force=force_full)
    return build_weight_bounded_lut(config, W=DEFAULT_WEIGHT_CUTOFF if W is None else W)


# -- size accounting -------------------------------------------------------


def table_bytes(config: DecoderConfig) -> float:
    return (1 << config.address_bits) * config.entry_bits / 8


def format_bytes(n: float) -> str:
    """Binary-prefixed size as printed in hardware tables: 416 B, 6.5 KB, 5.75 MB."""
    for unit, scale in (("GB", 1 << 30), ("MB", 1 << 20), ("KB", 1 << 10)):
        if n >= scale:
            value = n / scale
            break
    else:
        unit, value = "B", n
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    return f"{text} {unit}"


def size_report(d: int, m: int) -> dict:
    """Address/entry widths and table sizes for both LUTs of ``[d, m]`` (Z-type row first)."""
    rows = []
    for t in ("Z", "X"):
        cfg = DecoderConfig(d, m, t)
        size = table_bytes(cfg)
        rows.append(
            {
                "type": t,
                "address_bits": cfg.address_bits,
                "entry_bits": cfg.entry_bits,
                "table_bytes": size,
                "table": format_bytes(size),
            }
        )
    total = sum(r["table_bytes"] for r in rows)
    return {"d": d, "m": m, "rows": rows, "total_bytes": total, "total": format_bytes(total)}


def format_size_row(report: dict) -> str:
    rows = report["rows"]

    def join(key):
        vals = [str(r[key]) for r in rows]
        return vals[0] if len(set(vals)) == 1 else "/".join(vals)

    return (
        f"[d={report['d']},m={report['m']}]  address {join('address_bits')}  "
        f"entry {join('entry_bits')}  LUT {join('table')}  total {report['total']}"
    )


# -- file format -----------------------------------------------------------


def _pack_dense(entries: np.ndarray, width: int) -> bytes:
    out = io.BytesIO()
    chunk = 1 << 16  # chunk * width is a multiple of 8
    shifts = np.arange(width, dtype=np.uint64)
    for start in range(0, len(entries), chunk):
        part = entries[start : start + chunk].astype(np.uint64)
        bits = ((part[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        out.write(np.packbits(bits.ravel(), bitorder="little").tobytes())
    return out.getvalue()


def _unpack_dense(payload: bytes, count: int, width: int) -> np.ndarray:
    raw = np.frombuffer(payload, dtype=np.uint8)
    weights = np.left_shift(np.uint64(1), np.arange(width, dtype=np.uint64))
    out = np.empty(count, dtype=np.uint64)
    chunk = 1 << 16
    step = chunk * width // 8
    for n, start in enumerate(range(0, count, chunk)):
        k = min(chunk, count - start)
        bits = np.unpackbits(raw[n * step : n * step + (k * width + 7) // 8], bitorder="little")
        bits = bits[: k * width].reshape(k, width).astype(np.uint64)
        out[start : start + k] = bits @ weights
    return out


def entry_bytes(config: DecoderConfig) -> int:
    return (config.entry_bits + 7) // 8


def pack_header(config: DecoderConfig, flags: int, cutoff: int, count: int) -> bytes:
    return HEADER.pack(
        MAGIC, VERSION, flags, config.d, config.m, STAB_CODES[config.stab_type],
        cutoff, config.address_bits, config.entry_bits, count,
    )


def unpack_header(data: bytes) -> tuple[DecoderConfig, int, int, int]:
    if len(data) < HEADER.size:
        raise ValueError("truncated header")
    magic, version, flags, d, m, t, cutoff, abits, ebits, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if t not in (0, 1):
        raise ValueError(f"bad stabilizer type code {t}")
    config = DecoderConfig(d, m, "XZ"[t])
    if (config.address_bits, config.entry_bits) != (abits, ebits):
        raise ValueError("header widths inconsistent with d/m/type")
    return config, flags, cutoff, count


def split_payload(data: bytes) -> bytes:
    """Payload between header and trailing CRC, checked."""
    if len(data) < HEADER.size + 4:
        raise ValueError("truncated file")
    payload = data[HEADER.size : -4]
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise ValueError("checksum mismatch")
    return payload


def to_bytes(table: Lut | SparseLut) -> bytes:
    cfg = table.config
    if isinstance(table, Lut):
        header = pack_header(cfg, 0, FULL_CUTOFF, len(table.entries))
        payload = _pack_dense(table.entries, cfg.entry_bits)
    else:
        header = pack_header(cfg, FLAG_SPARSE, table.weight_cutoff, len(table.addresses))
        eb = entry_bytes(cfg)
        rec = np.zeros((len(table.addresses), 4 + eb), dtype=np.uint8)
        rec[:, :4] = table.addresses.astype("<u4").view(np.uint8).reshape(-1, 4)
        ent = table.entries.astype("<u8").view(np.uint8).reshape(-1, 8)
        rec[:, 4:] = ent[:, :eb]
        payload = rec.tobytes()
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def from_bytes(data: bytes) -> Lut | SparseLut:
    cfg, flags, cutoff, count = unpack_header(data)
    if flags & FLAG_CLUT:
        raise ValueError("file holds a compressed table; use clut.from_bytes")
    if flags & FLAG_SPARSE:
        eb = entry_bytes(cfg)
        expected = HEADER.size + count * (4 + eb) + 4
    else:
        if count != 1 << cfg.address_bits:
            raise ValueError("dense entry count does not match address width")
        expected = HEADER.size + math.ceil(count * cfg.entry_bits / 8) + 4
    if len(data) != expected:
        raise ValueError(f"file length {len(data)} inconsistent with header (expected {expected})")
    payload = split_payload(data)
    if flags & FLAG_SPARSE:
        rec = np.frombuffer(payload, dtype=np.uint8).reshape(count, 4 + eb)
        addresses = rec[:, :4].copy().view("<u4").ravel().astype(np.int64)
        ent = np.zeros((count, 8), dtype=np.uint8)
        ent[:, :eb] = rec[:, 4:]
        entries = ent.view("<u8").ravel().astype(np.uint64)
        return SparseLut(cfg, cutoff, addresses, entries)
    return Lut(cfg, _unpack_dense(payload, count, cfg.entry_bits))


def serialize(table: Lut | SparseLut, sink: BinaryIO | str) -> None:
    data = to_bytes(table)
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            fh.write(data)
    else:
        sink.write(data)


def deserialize(source: BinaryIO | str) -> Lut | SparseLut:
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return from_bytes(fh.read())
    return from_bytes(source.read())
