"""Streaming sliding-window decoder.

Every cycle the new syndrome is turned into a detection layer and pushed into
a FIFO of the last ``m`` layers. Once the FIFO is full the window is looked up
(oldest layer first, XORed with the internal state), the entry's correction
is folded into the error log, the internal state is replaced by the entry's
state delta and the oldest layer is dropped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .bits import pack, pack_rows, unpack
from .clut import FrameClut, RankClut
from .layout import CodeLayout, syndrome_of
from .lut import DecoderConfig, Lut, SparseLut, entry_for_address
from .matching import DecodingGraph


class Backend(Protocol):
    config: DecoderConfig

    def lookup(self, address: int) -> int | None: ...

    def lookup_many(self, addresses: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


class LutBackend:
    """Full or weight-bounded table."""

    def __init__(self, table: Lut | SparseLut):
        self.table = table
        self.config = table.config

    def lookup(self, address: int) -> int | None:
        return self.table.packed(address)

    def lookup_many(self, addresses):
        a = np.asarray(addresses, dtype=np.int64)
        if isinstance(self.table, Lut):
            return self.table.entries[a], np.zeros(len(a), dtype=bool)
        pos = np.searchsorted(self.table.addresses, a)
        pos = np.minimum(pos, len(self.table.addresses) - 1)
        hit = self.table.addresses[pos] == a
        out = np.where(hit, self.table.entries[pos], np.uint64(0)).astype(np.uint64)
        return out, ~hit


class ClutBackend:
    def __init__(self, clut: FrameClut | RankClut):
        self.clut = clut
        self.config = clut.config

    def lookup(self, address: int) -> int | None:
        return self.clut.lookup_packed(address)

    def lookup_many(self, addresses):
        a = np.asarray(addresses, dtype=np.int64)
        if isinstance(self.clut, RankClut):
            return self.clut.lookup_many(a)
        uniq, inv = np.unique(a, return_inverse=True)
        vals = [self.clut.lookup_packed(int(u)) for u in uniq]
        miss = np.array([v is None for v in vals], dtype=bool)
        packed = np.array([0 if v is None else v for v in vals], dtype=np.uint64)
        return packed[inv], miss[inv]


class OracleBackend:
    """Runs the matcher on every requested window (results memoized per address)."""

    def __init__(self, config: DecoderConfig, graph: DecodingGraph | None = None):
        self.config = config
        self.graph = graph or config.graph()
        self._memo: dict[int, int] = {}

    def lookup(self, address: int) -> int:
        v = self._memo.get(address)
        if v is None:
            v = entry_for_address(self.config, self.graph, address).pack()
            self._memo[address] = v
        return v

    def lookup_many(self, addresses):
        a = np.asarray(addresses, dtype=np.int64)
        uniq, inv = np.unique(a, return_inverse=True)
        packed = np.array([self.lookup(int(u)) for u in uniq], dtype=np.uint64)
        return packed[inv], np.zeros(len(a), dtype=bool)


def detect_events(prev, curr) -> np.ndarray:
    prev = np.asarray(prev, dtype=np.uint8)
    curr = np.asarray(curr, dtype=np.uint8)
    if prev.shape != curr.shape:
        raise ValueError(f"syndrome length mismatch: {prev.shape} vs {curr.shape}")
    return prev ^ curr


def final_syndrome_from_data(layout: CodeLayout, data_measurement) -> np.ndarray:
    """Z syndrome implied by a Z-basis readout of all data qubits (leading batch axes allowed)."""
    meas = np.asarray(data_measurement, dtype=np.uint8)
    if meas.ndim == 1:
        return syndrome_of(layout, "Z", meas)
    if meas.shape[-1] != layout.data_qubits:
        raise ValueError(f"expected {layout.data_qubits} data bits, got {meas.shape[-1]}")
    h = layout.check_matrix("Z").astype(np.int64)
    return ((meas.astype(np.int64) @ h.T) & 1).astype(np.uint8)


def logical_outcome(layout: CodeLayout, data_measurement, x_error_log) -> int:
    """Corrected logical Z readout; for a |0_L> memory experiment 1 means a logical error."""
    meas = np.asarray(data_measurement, dtype=np.uint8)
    log = np.asarray(x_error_log, dtype=np.uint8)
    if meas.shape != log.shape or meas.shape[-1] != layout.data_qubits:
        raise ValueError("measurement and error log must both cover every data qubit")
    support = sorted(layout.logical_z_support)
    return int(np.bitwise_xor.reduce((meas ^ log)[support]))


@dataclass
class DecoderState:
    config: DecoderConfig
    backend: Backend
    fifo: deque = field(default_factory=deque)  # detection layers as ints, oldest first
    internal_state: int = 0
    error_log: int = 0
    prev_syndrome: int = 0
    cycles_consumed: int = 0
    failure_flag: bool = False
    decoder_failures: int = 0
    corrections_applied: int = 0
    finished: bool = False
    addresses: list[int] = field(default_factory=list)

    @property
    def error_log_bits(self) -> np.ndarray:
        return unpack(self.error_log, self.config.data_qubits)

    def step(self, syndrome) -> np.ndarray | None:
        """Consume one syndrome round; returns the correction once the window is full."""
        if self.finished:
            raise RuntimeError("decoder already finished")
        syndrome = np.asarray(syndrome, dtype=np.uint8)
        if syndrome.shape != (self.config.syndrome_len,):
            raise ValueError(f"expected {self.config.syndrome_len} syndrome bits, got {syndrome.shape}")
        s = pack(syndrome)
        events = s ^ self.prev_syndrome
        self.prev_syndrome = s
        self.cycles_consumed += 1
        return self.push_events(events)

    def push_events(self, events: int) -> np.ndarray | None:
        cfg = self.config
        self.fifo.append(events)
        if len(self.fifo) < cfg.m:
            return None
        layers = list(self.fifo)
        layers[0] ^= self.internal_state
        address = 0
        for k, layer in enumerate(layers):
            address |= layer << (k * cfg.syndrome_len)
        self.addresses.append(address)
        packed = self.backend.lookup(address)
        if packed is None:
            self.failure_flag = True
            self.decoder_failures += 1
            packed = 0
        n = cfg.data_qubits
        correction = packed & ((1 << n) - 1)
        self.error_log ^= correction
        if correction:
            self.corrections_applied += 1
        self.internal_state = packed >> n
        self.fifo.popleft()
        if not self.fifo:
            self.internal_state = 0
        return unpack(correction, n)

    def finish(self, final_syndrome=None) -> np.ndarray:
        """Flush the window: optional constructed round, then m-1 zero detection layers."""
        if self.finished:
            raise RuntimeError("finish called twice")
        if final_syndrome is not None:
            self.step(final_syndrome)
        for _ in range(self.config.m - 1):
            self.push_events(0)
        self.finished = True
        return self.error_log_bits


@dataclass(frozen=True)
class TrialOutcome:
    logical_error: bool
    decoder_failures: int
    corrections_applied: int


def decode_trial(layout: CodeLayout, record, backends: dict[str, Backend]) -> TrialOutcome:
    """Decode both error types of one trial independently; Z-basis memory experiment."""
    failures = 0
    applied = 0
    x_log = None
    for t in ("Z", "X"):
        backend = backends[t]
        state = DecoderState(backend.config, backend)
        for row in record.syndromes(t):
            state.step(row)
        final = final_syndrome_from_data(layout, record.final_data_measurement) if t == "Z" else None
        log = state.finish(final)
        failures += state.decoder_failures
        applied += state.corrections_applied
        if t == "Z":
            x_log = log
    return TrialOutcome(
        logical_error=bool(logical_outcome(layout, record.final_data_measurement, x_log)),
        decoder_failures=failures,
        corrections_applied=applied,
    )


@dataclass
class BatchResult:
    error_logs: np.ndarray  # int64 packed error log per trial
    failures: np.ndarray  # CLUT misses per trial
    addresses: np.ndarray  # (trials, lookups) addresses in step order


def decode_batch(backend: Backend, syndromes: np.ndarray, final_syndromes: np.ndarray | None = None) -> BatchResult:
    """Run many independent trials of one decoder in lock-step.

    ``syndromes`` has shape ``(trials, cycles, s)``; ``final_syndromes``
    (``(trials, s)``) is the constructed round, if any.
    """
    cfg = backend.config
    s, n, m = cfg.syndrome_len, cfg.data_qubits, cfg.m
    rounds = pack_rows(syndromes)  # (trials, cycles)
    if final_syndromes is not None:
        rounds = np.concatenate([rounds, pack_rows(final_syndromes)[:, None]], axis=1)
    trials, cycles = rounds.shape
    prev = np.concatenate([np.zeros((trials, 1), np.int64), rounds[:, :-1]], axis=1)
    layers = np.concatenate([rounds ^ prev, np.zeros((trials, m - 1), np.int64)], axis=1)

    log = np.zeros(trials, dtype=np.int64)
    state = np.zeros(trials, dtype=np.int64)
    failures = np.zeros(trials, dtype=np.int64)
    steps = layers.shape[1] - m + 1
    addresses = np.zeros((trials, steps), dtype=np.int64)
    corr_mask = np.int64((1 << n) - 1)
    for t in range(steps):
        address = layers[:, t] ^ state
        for k in range(1, m):
            address |= layers[:, t + k] << (k * s)
        addresses[:, t] = address
        packed, miss = backend.lookup_many(address)
        packed = packed.astype(np.int64)
        failures += miss
        log ^= packed & corr_mask
        state = np.where(miss, 0, packed >> n)
    return BatchResult(log, failures, addresses)
