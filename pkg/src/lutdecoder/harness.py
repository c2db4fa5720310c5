"""Memory-experiment harness: trial loops, LER estimates, sweeps and CSV output."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from . import clut as clut_mod
from .bits import popcount
from .decoder import ClutBackend, LutBackend, OracleBackend, decode_batch, final_syndrome_from_data
from .layout import build_layout
from .lut import DEFAULT_MAX_ADDRESS_BITS, DEFAULT_WEIGHT_CUTOFF, DecoderConfig, build_table
from .noise import NoiseParams, sample_batch

BACKENDS = ("lut", "clut", "oracle")
CSV_FIELDS = ("p", "d", "m", "cycles", "trials", "logical_errors", "ler", "stderr", "decoder_failures")
CHUNK = 4096
WORKERS_ENV = "LUTDECODER_WORKERS"


class BuildError(RuntimeError):
    """A decoder backend could not be constructed."""


@dataclass(frozen=True)
class ExperimentSpec:
    d: int
    m: int
    cycles: int = 5
    trials: int = 100_000
    seed: int = 0
    p_list: tuple[float, ...] = (1e-2,)
    backend: str = "lut"
    weight_cutoff: int | None = None
    force_full: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not self.p_list:
            raise ValueError("p_list must not be empty")
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))


@dataclass(frozen=True)
class LerPoint:
    p: float
    d: int
    m: int
    cycles: int
    trials: int
    logical_errors: int
    decoder_failures: int
    failed_trials: int = 0

    @property
    def ler(self) -> float:
        return self.logical_errors / self.trials

    @property
    def stderr(self) -> float:
        return math.sqrt(self.ler * (1.0 - self.ler) / self.trials)

    @property
    def failure_rate(self) -> float:
        """Fraction of trials with at least one table miss."""
        return self.failed_trials / self.trials

    def row(self) -> dict:
        return {
            "p": self.p,
            "d": self.d,
            "m": self.m,
            "cycles": self.cycles,
            "trials": self.trials,
            "logical_errors": self.logical_errors,
            "ler": self.ler,
            "stderr": self.stderr,
            "decoder_failures": self.decoder_failures,
        }


@dataclass
class LerReport:
    spec: ExperimentSpec
    points: list[LerPoint]
    # per-trial logical outcomes and miss flags, keyed by p; only when requested
    outcomes: dict[float, np.ndarray] = field(default_factory=dict, repr=False)
    missed: dict[float, np.ndarray] = field(default_factory=dict, repr=False)

    def point(self, p: float) -> LerPoint:
        for pt in self.points:
            if math.isclose(pt.p, p):
                return pt
        raise KeyError(p)


# -- backends ---------------------------------------------------------------

_BACKEND_CACHE: dict[tuple, dict] = {}


def make_backends(
    d: int, m: int, kind: str = "lut", weight_cutoff: int | None = None, force_full: bool = False
) -> dict:
    """One backend per stabilizer type (cached per process)."""
    key = (d, m, kind, weight_cutoff, force_full)
    if key in _BACKEND_CACHE:
        return _BACKEND_CACHE[key]
    out = {}
    for t in ("Z", "X"):
        cfg = DecoderConfig(d, m, t)
        if kind == "oracle":
            out[t] = OracleBackend(cfg)
        elif kind == "lut":
            if weight_cutoff is None and cfg.address_bits > DEFAULT_MAX_ADDRESS_BITS and not force_full:
                raise BuildError(
                    f"full table for d={d} m={m} needs {cfg.address_bits} address bits; "
                    "pass force_full or a weight cutoff"
                )
            out[t] = LutBackend(build_table(cfg, W=weight_cutoff, force_full=force_full))
        elif kind == "clut":
            if (d, m) == (3, 2) and weight_cutoff is None:
                out[t] = ClutBackend(clut_mod.compress_frame(build_table(cfg)))
            else:
                w = DEFAULT_WEIGHT_CUTOFF if weight_cutoff is None else weight_cutoff
                out[t] = ClutBackend(clut_mod.compress_rank(build_table(cfg, W=w), W=w))
        else:
            raise ValueError(f"unknown backend {kind!r}")
    _BACKEND_CACHE[key] = out
    return out


# -- trial loop -------------------------------------------------------------


def decode_chunk(backends: dict, layout, batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Logical error flag, miss count and recorded addresses per trial of one batch."""
    fz = final_syndrome_from_data(layout, batch.final_data_measurement)
    rz = decode_batch(backends["Z"], batch.z_syndromes, fz)
    rx = decode_batch(backends["X"], batch.x_syndromes)
    n = layout.data_qubits
    top = sorted(layout.logical_z_support)
    top_mask = sum(1 << q for q in top)
    meas = (batch.final_data_measurement.astype(np.int64) << np.arange(n)).sum(axis=1)
    logical = (popcount((meas ^ rz.error_logs) & top_mask) & 1).astype(bool)
    return logical, rz.failures + rx.failures, rz.addresses


def _chunk_task(args) -> tuple[np.ndarray, np.ndarray]:
    d, m, kind, w, force_full, p, cycles, seed, start, count = args
    layout = build_layout(d)
    backends = make_backends(d, m, kind, w, force_full)
    batch = sample_batch(layout, NoiseParams(p, cycles, seed), start, count)
    logical, failures, _ = decode_chunk(backends, layout, batch)
    return logical, failures


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec, *, workers: int | None = None, keep_outcomes: bool = False) -> LerReport:
    """Estimate the LER at every ``p`` in ``spec.p_list``.

    Trials are split into fixed chunks whose random streams depend only on the
    trial index, so results do not depend on ``workers``.
    """
    workers = default_workers() if workers is None else max(1, workers)
    # build once up front so that configuration errors surface before any sampling
    make_backends(spec.d, spec.m, spec.backend, spec.weight_cutoff, spec.force_full)
    report = LerReport(spec, [])
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for p in spec.p_list:
            tasks = [
                (spec.d, spec.m, spec.backend, spec.weight_cutoff, spec.force_full, p, spec.cycles, spec.seed,
                 start, min(CHUNK, spec.trials - start))
                for start in range(0, spec.trials, CHUNK)
            ]
            results = list(pool.map(_chunk_task, tasks)) if pool else [_chunk_task(t) for t in tasks]
            logical = np.concatenate([r[0] for r in results])
            failures = np.concatenate([r[1] for r in results])
            report.points.append(
                LerPoint(
                    p=p,
                    d=spec.d,
                    m=spec.m,
                    cycles=spec.cycles,
                    trials=spec.trials,
                    logical_errors=int(logical.sum()),
                    decoder_failures=int(failures.sum()),
                    failed_trials=int((failures > 0).sum()),
                )
            )
            if keep_outcomes:
                report.outcomes[p] = logical
                report.missed[p] = failures > 0
    finally:
        if pool:
            pool.shutdown()
    if spec.output:
        write_csv(spec.output, report.points)
    return report


# -- analysis ---------------------------------------------------------------


def fit_scaling_exponent(points: Iterable[LerPoint] | Iterable[tuple[float, float]]) -> float:
    """Slope of log LER against log p; needs at least three points with nonzero LER."""
    pairs = []
    for pt in points:
        p, ler = (pt.p, pt.ler) if isinstance(pt, LerPoint) else pt
        if ler > 0:
            pairs.append((p, ler))
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 points with nonzero LER to fit, got {len(pairs)}")
    x = np.log([p for p, _ in pairs])
    y = np.log([ler for _, ler in pairs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass(frozen=True)
class RatioEstimate:
    p: float
    m_num: int
    m_den: int
    ratio: float
    stderr: float

    @property
    def significance(self) -> float:
        """Distance of the ratio from 1 in standard errors."""
        return (self.ratio - 1.0) / self.stderr if self.stderr > 0 else math.inf


def paired_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """Ratio of means of paired 0/1 outcomes with a delta-method standard error."""
    x = np.asarray(num, dtype=float)
    y = np.asarray(den, dtype=float)
    n = len(x)
    mx, my = x.mean(), y.mean()
    if my == 0:
        raise ValueError("denominator has no logical errors")
    r = mx / my
    cov = np.cov(x, y, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (n * my * my)
    return float(r), float(math.sqrt(max(var, 0.0)))


def sweep_rounds(spec: ExperimentSpec, m_values: Sequence[int], *, workers: int | None = None) -> list[RatioEstimate]:
    """LER(m_k) / LER(m_{k+1}) for consecutive window sizes, on shared trials."""
    reports = {
        m: run_experiment(replace(spec, m=m, output=None), workers=workers, keep_outcomes=True) for m in m_values
    }
    out = []
    for a, b in zip(m_values, m_values[1:]):
        for p in spec.p_list:
            r, se = paired_ratio(reports[a].outcomes[p], reports[b].outcomes[p])
            out.append(RatioEstimate(p, a, b, r, se))
    return out


def sweep_cycles(spec: ExperimentSpec, cycle_values: Sequence[int], *, workers: int | None = None) -> list[LerPoint]:
    points = []
    for c in cycle_values:
        points.extend(run_experiment(replace(spec, cycles=c, output=None), workers=workers).points)
    if spec.output:
        write_csv(spec.output, points)
    return points


def access_weight_histogram(
    d: int, m: int, p: float, *, cycles: int = 5, trials: int = 10_000, seed: int = 0, stab_type: str = "Z"
) -> np.ndarray:
    """Empirical distribution of address Hamming weight over all lookups of one decoder.

    Uses the oracle backend, so addresses of any weight are decoded exactly.
    """
    layout = build_layout(d)
    backends = make_backends(d, m, "oracle")
    cfg = backends[stab_type.upper()].config
    counts = np.zeros(cfg.address_bits + 1, dtype=np.int64)
    params = NoiseParams(p, cycles, seed)
    for start in range(0, trials, CHUNK):
        batch = sample_batch(layout, params, start, min(CHUNK, trials - start))
        if stab_type.upper() == "Z":
            _, _, addresses = decode_chunk(backends, layout, batch)
        else:
            addresses = decode_batch(backends["X"], batch.x_syndromes).addresses
        counts += np.bincount(popcount(addresses).ravel(), minlength=len(counts))
    return counts / counts.sum()


# -- CSV --------------------------------------------------------------------


def write_csv(sink: str | os.PathLike | IO[str], points: Iterable[LerPoint]) -> None:
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="") as fh:
            write_csv(fh, points)
        return
    writer = csv.DictWriter(sink, fieldnames=CSV_FIELDS)
    writer.writeheader()
    for pt in points:
        writer.writerow(pt.row())


def read_csv(source: str | os.PathLike | IO[str]) -> list[LerPoint]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [
        LerPoint(
            p=float(r["p"]),
            d=int(r["d"]),
            m=int(r["m"]),
            cycles=int(r["cycles"]),
            trials=int(r["trials"]),
            logical_errors=int(r["logical_errors"]),
            decoder_failures=int(r["decoder_failures"]),
        )
        for r in reader
    ]
