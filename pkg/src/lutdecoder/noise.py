"""Phenomenological-noise trial sampler.

Errors are tracked as a Pauli frame: two bits per data qubit (X and Z
components). Every cycle each data qubit picks up X, Y or Z with total
probability ``p``, each stabilizer measurement flips with probability ``p``,
and in the last cycle every data-qubit Z-basis readout flips with probability
``p``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .layout import CodeLayout

SWEEP_P_RANGE = (1e-3, 5e-2)
PAULI_COMPONENTS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


@dataclass(frozen=True)
class NoiseParams:
    p: float
    cycles: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValueError(f"p must lie in [0, 0.5), got {self.p}")
        if self.cycles < 1:
            raise ValueError(f"cycles must be >= 1, got {self.cycles}")
        if self.p > 0 and not SWEEP_P_RANGE[0] <= self.p <= SWEEP_P_RANGE[1]:
            warnings.warn(
                f"p={self.p} lies outside the validated range {SWEEP_P_RANGE}",
                stacklevel=3,
            )


@dataclass(frozen=True)
class TrialRecord:
    """Ground truth and observed data for one trial.

    Row ``t`` of the per-cycle arrays belongs to cycle ``t + 1``.
    """

    x_syndromes: np.ndarray  # (cycles, #X stabilizers)
    z_syndromes: np.ndarray  # (cycles, #Z stabilizers)
    final_data_measurement: np.ndarray  # (n_d,)
    truth_x_log: np.ndarray  # (n_d,) cumulative X component
    truth_z_log: np.ndarray
    measurement_flip_history: np.ndarray  # (cycles, #X + #Z), X stabilizers first
    final_measurement_flips: np.ndarray = field(repr=False, default=None)
    x_error_history: np.ndarray = field(repr=False, default=None)  # (cycles, n_d)
    z_error_history: np.ndarray = field(repr=False, default=None)

    @property
    def cycles(self) -> int:
        return self.x_syndromes.shape[0]

    def syndromes(self, stab_type: str) -> np.ndarray:
        return self.x_syndromes if stab_type.upper() == "X" else self.z_syndromes


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for trial ``trial_index`` of a run seeded with ``seed``."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial_index,)))
    )


def effective_edge_probabilities(params: NoiseParams | float) -> dict[str, float]:
    """Probability that a data qubit picks up the detected component, and of a readout flip."""
    p = params.p if isinstance(params, NoiseParams) else float(params)
    return {"space": 2.0 * p / 3.0, "time": p}


def _draw(rng: np.random.Generator, layout: CodeLayout, params: NoiseParams):
    n = layout.data_qubits
    n_stab = len(layout.x_stabilizers) + len(layout.z_stabilizers)
    draw = rng.random((params.cycles, n))
    meas = rng.random((params.cycles, n_stab)) < params.p
    final_flips = rng.random(n) < params.p
    return draw, meas, final_flips


def _pauli_components(draw: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    hit = draw < p
    # given a hit, draw / p is uniform on [0, 1): its thirds pick X, Y, Z
    scaled = np.minimum(draw * (3.0 / p), 2.0) if p > 0 else np.zeros_like(draw)
    kind = np.where(hit, scaled.astype(np.int64), -1)
    x_err = ((kind == 0) | (kind == 1)).astype(np.uint8)
    z_err = ((kind == 1) | (kind == 2)).astype(np.uint8)
    return x_err, z_err


def sample_trial(
    layout: CodeLayout,
    params: NoiseParams,
    trial_index: int = 0,
    *,
    forced: Mapping[int, Sequence[tuple[int, str]]] | None = None,
    measurement_noise: bool = True,
    drop_components: Iterable[str] = (),
) -> TrialRecord:
    """Sample one trial.

    Test hooks (keyword-only): ``forced`` maps a 1-based cycle number to
    ``(qubit, pauli)`` pairs injected in addition to the random errors;
    ``measurement_noise=False`` disables stabilizer and final readout flips;
    ``drop_components`` zeroes the ``"x"`` and/or ``"z"`` part of the random
    data errors. Hooks never change the random stream itself, so hooked and
    unhooked runs stay paired.
    """
    cycles = params.cycles
    draw, meas, final_flips = _draw(trial_rng(params.seed, trial_index), layout, params)
    x_err, z_err = _pauli_components(draw, params.p)
    n_x = len(layout.x_stabilizers)
    dropped = {c.lower() for c in drop_components}
    if "x" in dropped:
        x_err[:] = 0
    if "z" in dropped:
        z_err[:] = 0
    for cycle, errs in (forced or {}).items():
        if not 1 <= cycle <= cycles:
            raise ValueError(f"forced cycle {cycle} outside 1..{cycles}")
        for q, pauli in errs:
            ex, ez = PAULI_COMPONENTS[pauli.upper()]
            x_err[cycle - 1, q] ^= ex
            z_err[cycle - 1, q] ^= ez

    if not measurement_noise:
        meas[:] = False
        final_flips[:] = False
    meas = meas.astype(np.uint8)
    final_flips = final_flips.astype(np.uint8)

    cum_x = np.bitwise_xor.accumulate(x_err, axis=0)
    cum_z = np.bitwise_xor.accumulate(z_err, axis=0)
    hz = layout.check_matrix("Z").astype(np.int64)
    hx = layout.check_matrix("X").astype(np.int64)
    z_syn = ((cum_x.astype(np.int64) @ hz.T) & 1).astype(np.uint8) ^ meas[:, n_x:]
    x_syn = ((cum_z.astype(np.int64) @ hx.T) & 1).astype(np.uint8) ^ meas[:, :n_x]

    return TrialRecord(
        x_syndromes=x_syn,
        z_syndromes=z_syn,
        final_data_measurement=cum_x[-1] ^ final_flips,
        truth_x_log=cum_x[-1].copy(),
        truth_z_log=cum_z[-1].copy(),
        measurement_flip_history=meas,
        final_measurement_flips=final_flips,
        x_error_history=x_err,
        z_error_history=z_err,
    )


@dataclass(frozen=True)
class TrialBatch:
    """Trials ``start .. start+count-1`` stacked along a leading axis."""

    start: int
    x_syndromes: np.ndarray  # (trials, cycles, #X)
    z_syndromes: np.ndarray  # (trials, cycles, #Z)
    final_data_measurement: np.ndarray  # (trials, n_d)
    truth_x_log: np.ndarray
    truth_z_log: np.ndarray

    def __len__(self) -> int:
        return self.x_syndromes.shape[0]


def sample_batch(layout: CodeLayout, params: NoiseParams, start: int, count: int) -> TrialBatch:
    """Same trials as :func:`sample_trial` for indices ``start..start+count-1``, stacked."""
    n = layout.data_qubits
    n_x = len(layout.x_stabilizers)
    draws = np.empty((count, params.cycles, n))
    meas = np.empty((count, params.cycles, n_x + len(layout.z_stabilizers)), dtype=bool)
    finals = np.empty((count, n), dtype=bool)
    for i in range(count):
        draws[i], meas[i], finals[i] = _draw(trial_rng(params.seed, start + i), layout, params)
    x_err, z_err = _pauli_components(draws, params.p)
    cum_x = np.bitwise_xor.accumulate(x_err, axis=1)
    cum_z = np.bitwise_xor.accumulate(z_err, axis=1)
    hz = layout.check_matrix("Z").astype(np.int64)
    hx = layout.check_matrix("X").astype(np.int64)
    meas = meas.astype(np.uint8)
    z_syn = ((cum_x.astype(np.int64) @ hz.T) & 1).astype(np.uint8) ^ meas[:, :, n_x:]
    x_syn = ((cum_z.astype(np.int64) @ hx.T) & 1).astype(np.uint8) ^ meas[:, :, :n_x]
    return TrialBatch(
        start=start,
        x_syndromes=x_syn,
        z_syndromes=z_syn,
        final_data_measurement=cum_x[:, -1] ^ finals.astype(np.uint8),
        truth_x_log=cum_x[:, -1],
        truth_z_log=cum_z[:, -1],
    )


def _hex_row(row: np.ndarray) -> str:
    value = 0
    for i, b in enumerate(row):
        if b:
            value |= 1 << i
    return format(value, "x")


def _unhex_row(text: str, width: int) -> np.ndarray:
    value = int(text, 16)
    if value >> width:
        raise ValueError(f"hex row {text!r} wider than {width} bits")
    return np.array([(value >> i) & 1 for i in range(width)], dtype=np.uint8)


def write_trace(
    sink: IO[str], layout: CodeLayout, params: NoiseParams, records: Iterable[tuple[int, TrialRecord]]
) -> int:
    """Write one JSON line per trial; syndrome rows are hex (bit i = stabilizer i), oldest first."""
    count = 0
    for index, rec in records:
        line = {
            "trial": index,
            "d": layout.distance,
            "p": params.p,
            "cycles": rec.cycles,
            "x_syndromes": [_hex_row(r) for r in rec.x_syndromes],
            "z_syndromes": [_hex_row(r) for r in rec.z_syndromes],
            "final_data_measurement": _hex_row(rec.final_data_measurement),
            "truth_x_log": _hex_row(rec.truth_x_log),
            "truth_z_log": _hex_row(rec.truth_z_log),
        }
        sink.write(json.dumps(line) + "\n")
        count += 1
    return count


def read_trace(source: IO[str], layout: CodeLayout) -> Iterator[tuple[int, TrialRecord]]:
    n = layout.data_qubits
    n_x, n_z = len(layout.x_stabilizers), len(layout.z_stabilizers)
    for lineno, line in enumerate(source, 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj["d"] != layout.distance:
            raise ValueError(f"line {lineno}: trace distance {obj['d']} != {layout.distance}")
        x_syn = np.array([_unhex_row(r, n_x) for r in obj["x_syndromes"]], dtype=np.uint8)
        z_syn = np.array([_unhex_row(r, n_z) for r in obj["z_syndromes"]], dtype=np.uint8)
        if len(x_syn) != obj["cycles"] or len(z_syn) != obj["cycles"]:
            raise ValueError(f"line {lineno}: row count does not match cycles")
        yield obj["trial"], TrialRecord(
            x_syndromes=x_syn.reshape(-1, n_x),
            z_syndromes=z_syn.reshape(-1, n_z),
            final_data_measurement=_unhex_row(obj["final_data_measurement"], n),
            truth_x_log=_unhex_row(obj.get("truth_x_log", "0"), n),
            truth_z_log=_unhex_row(obj.get("truth_z_log", "0"), n),
            measurement_flip_history=np.zeros((obj["cycles"], n_x + n_z), dtype=np.uint8),
        )
