"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured values.
Run ``python tests/test_acceptance.py`` for the lines alone.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from lutdecoder.clut import compress_frame, memory_report
from lutdecoder.decoder import DecoderState, LutBackend, OracleBackend, decode_batch, final_syndrome_from_data
from lutdecoder.harness import ExperimentSpec, fit_scaling_exponent, make_backends, paired_ratio, run_experiment
from lutdecoder.layout import build_layout
from lutdecoder.lut import DecoderConfig, build_full_lut, format_size_row, size_report
from lutdecoder.matching import committed_edges, min_weight_match, odd_degree_nodes
from lutdecoder.noise import NoiseParams, sample_batch

KB = 1024
MB = 1024 * 1024
WORKERS = 1


def _timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


# -- checks -----------------------------------------------------------------


def check_size_table():
    expected = {
        (3, 2): "[d=3,m=2]  address 8  entry 13  LUT 416 B  total 832 B",
        (3, 3): "[d=3,m=3]  address 12  entry 13  LUT 6.5 KB  total 13 KB",
        (4, 2): "[d=4,m=2]  address 14/16  entry 23/24  LUT 46 KB/192 KB  total 238 KB",
        (4, 3): "[d=4,m=3]  address 21/24  entry 23/24  LUT 5.75 MB/48 MB  total 53.75 MB",
        (5, 2): "[d=5,m=2]  address 24  entry 37  LUT 74 MB  total 148 MB",
    }
    bad = [dm for dm, row in expected.items() if format_size_row(size_report(*dm)) != row]
    return not bad, f"5 rows checked, mismatches: {bad or 'none'}"


def check_layout_counts():
    expected = {3: (9, 4, 4, 17), 4: (16, 8, 7, 31), 5: (25, 12, 12, 49)}
    got = {}
    for d in expected:
        lay = build_layout(d)
        got[d] = (lay.data_qubits, len(lay.x_stabilizers), len(lay.z_stabilizers), lay.total_qubits)
    return got == expected, f"{got}"


def check_frame_clut():
    t0 = time.perf_counter()
    sizes = {}
    counts = {}
    for t in ("Z", "X"):
        c = compress_frame(build_full_lut(DecoderConfig(3, 2, t)))
        sizes[t], counts[t] = c.payload_bytes, c.entry_count
    elapsed = time.perf_counter() - t0
    ok = all(n == 140 for n in counts.values()) and all(b <= 140 for b in sizes.values()) and elapsed < 10
    return ok, f"entries {counts}, payload bytes {sizes}, ratio {416 / max(sizes.values()):.2f}x, {elapsed:.2f} s"


def check_clut_scaling():
    parts = []
    ok = True
    for (d, m), ceiling, min_ratio in (((4, 3), 702 * KB, 78.4), ((5, 2), 1.38 * MB, 107.0)):
        backends = make_backends(d, m, "clut")
        rep = memory_report({t: b.clut for t, b in backends.items()})
        total = rep["clut_total"] + rep["overhead_total"]
        ratio = rep["full_total"] / total
        ok &= total <= ceiling and ratio >= min_ratio
        parts.append(f"[d={d},m={m}] {total} B (ceiling {int(ceiling)} B), {ratio:.1f}x (min {min_ratio}x)")
    return ok, "; ".join(parts)


def check_oracle_equivalence(trials=10_000, p=1e-2, seed=2024):
    parts = []
    ok = True
    for d, m in ((3, 2), (3, 3), (4, 2)):
        lay = build_layout(d)
        batch = sample_batch(lay, NoiseParams(p, 5, seed), 0, trials)
        final = final_syndrome_from_data(lay, batch.final_data_measurement)
        mismatches = 0
        for t, syn, fin in (("Z", batch.z_syndromes, final), ("X", batch.x_syndromes, None)):
            cfg = DecoderConfig(d, m, t)
            a = decode_batch(LutBackend(build_full_lut(cfg)), syn, fin)
            b = decode_batch(OracleBackend(cfg), syn, fin)
            mismatches += int((a.error_logs != b.error_logs).sum())
        ok &= mismatches == 0
        parts.append(f"[{d},{m}] {mismatches} mismatches / {trials} trials")
    return ok, "; ".join(parts)


def check_clut_fidelity(trials=100_000, p=1e-2, seed=7):
    reps = {
        b: run_experiment(ExperimentSpec(3, 2, trials=trials, seed=seed, p_list=(p,), backend=b), workers=WORKERS)
        for b in ("lut", "clut")
    }
    full, comp = reps["lut"].points[0], reps["clut"].points[0]
    combined = math.hypot(full.stderr, comp.stderr)
    diff = abs(comp.ler - full.ler)
    fail_ok = comp.failure_rate <= comp.ler + 3 * comp.stderr
    ok = diff <= 2 * combined and fail_ok
    return ok, (
        f"LER lut {full.ler:.5f} clut {comp.ler:.5f} (|diff| {diff / combined:.2f} combined SE); "
        f"failure rate {comp.failure_rate:.5f} vs LER+3SE {comp.ler + 3 * comp.stderr:.5f}"
    )


def check_quadratic_scaling(trials=100_000, seed=11):
    ps = (1e-3, 2e-3, 5e-3, 1e-2)
    rep = run_experiment(ExperimentSpec(3, 2, cycles=5, trials=trials, seed=seed, p_list=ps), workers=WORKERS)
    slope = fit_scaling_exponent(rep.points)
    lers = ", ".join(f"{pt.p:g}:{pt.ler:.2e}" for pt in rep.points)
    return 1.7 <= slope <= 2.3, f"exponent {slope:.3f} (band [1.7, 2.3]); LER {lers}"


def check_rounds_benefit(trials=100_000, p=1e-2, seed=13):
    bands = {3: (1.05, 1.5), 4: (1.5, 2.6)}
    parts = []
    ok = True
    for d, (lo, hi) in bands.items():
        out = {}
        for m in (1, 2):
            spec = ExperimentSpec(d, m, cycles=5, trials=trials, seed=seed, p_list=(p,))
            out[m] = run_experiment(spec, workers=WORKERS, keep_outcomes=True).outcomes[p]
        ratio, se = paired_ratio(out[1], out[2])
        sig = (ratio - 1) / se
        good = sig >= 2 and lo <= ratio <= hi
        ok &= good
        parts.append(f"d={d} ratio {ratio:.3f} +- {se:.3f} ({sig:.1f} sigma; band [{lo}, {hi}]) {'ok' if good else 'out'}")
    return ok, "; ".join(parts)


def _committed_odd_nodes(graph, address, cache):
    if address not in cache:
        match = min_weight_match(graph, graph.events_from_address(address))
        cache[address] = odd_degree_nodes(graph, committed_edges(graph, match))
    return cache[address]


def check_explained_events(trials=10_000, p=1e-2, seed=17):
    parts = []
    ok = True
    for d, m in ((3, 2), (3, 3), (4, 2), (5, 2)):
        lay = build_layout(d)
        batch = sample_batch(lay, NoiseParams(p, 5, seed), 0, trials)
        final = final_syndrome_from_data(lay, batch.final_data_measurement)
        violations = 0
        for t, syn, fin in (("Z", batch.z_syndromes, final), ("X", batch.x_syndromes, None)):
            cfg = DecoderConfig(d, m, t)
            backend = OracleBackend(cfg)
            graph, s, cache = backend.graph, cfg.syndrome_len, {}
            rounds = syn if fin is None else np.concatenate([syn, fin[:, None]], axis=1)
            for k in range(trials):
                state = DecoderState(cfg, backend)
                for row in rounds[k]:
                    state.step(row)
                state.finish()
                layers = rounds[k] ^ np.vstack([np.zeros((1, s), np.uint8), rounds[k][:-1]])
                events = {(layer, i) for layer, i in zip(*np.nonzero(layers))}
                odd = set()
                for step, address in enumerate(state.addresses):
                    for node in _committed_odd_nodes(graph, address, cache):
                        odd ^= {(step + node // s, node % s)}
                violations += odd != events
        ok &= violations == 0
        parts.append(f"[{d},{m}] {violations} violations")
    return ok, f"{trials} trials per config, both types; " + "; ".join(parts)


def check_zero_padding():
    checked = bad = 0
    for m in (1, 2, 3):
        for t in ("Z", "X"):
            cfg = DecoderConfig(3, m, t)
            table = build_full_lut(cfg)
            s, n = cfg.syndrome_len, cfg.data_qubits
            addrs = np.arange(1 << cfg.address_bits)
            sel = (addrs & ((1 << s) - 1)) == 0
            corr = table.entries[sel] & np.uint64((1 << n) - 1)
            checked += int(sel.sum())
            bad += int((corr != 0).sum())
    return bad == 0, f"{checked} addresses with an empty oldest layer, {bad} with a nonzero correction"


CRITERIA = [
    ("size-table exactness", check_size_table, 1),
    ("layout counts", check_layout_counts, 1),
    ("CLUT frame scheme", check_frame_clut, 10),
    ("CLUT scaling", check_clut_scaling, 30 * 60),
    ("oracle equivalence", check_oracle_equivalence, 10 * 60),
    ("CLUT fidelity", check_clut_fidelity, 15 * 60),
    ("quadratic scaling", check_quadratic_scaling, 30 * 60),
    ("rounds benefit", check_rounds_benefit, 45 * 60),
    ("explained-events invariant", check_explained_events, 10 * 60),
    ("zero-padding safety", check_zero_padding, 60),
]


def _line(name, ok, detail, elapsed):
    return f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f} s]"


@pytest.mark.parametrize("name, check, budget", CRITERIA, ids=[c[0].replace(" ", "-") for c in CRITERIA])
def test_criterion(name, check, budget, capsys):
    ok, detail, elapsed = _timed(check)
    within = elapsed <= budget
    if not within:
        detail += f"; over the {budget} s budget"
    with capsys.disabled():
        print("\n" + _line(name, ok and within, detail, elapsed))
    assert ok and within, detail


if __name__ == "__main__":
    failed = 0
    for name, check, budget in CRITERIA:
        ok, detail, elapsed = _timed(check)
        ok = ok and elapsed <= budget
        failed += not ok
        print(_line(name, ok, detail, elapsed), flush=True)
    sys.exit(1 if failed else 0)
