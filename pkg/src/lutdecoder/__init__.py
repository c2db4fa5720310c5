"""Lookup-table decoders for small rotated surface codes.

Modules:
    layout   code geometry, stabilizers and logical supports
    noise    phenomenological-noise trial sampler and trace files
    matching decoding graphs and exact minimum-weight matching
    lut      table programming, size accounting and the table file format
    clut     compressed tables (frame and rank schemes)
    decoder  streaming sliding-window decoder
    harness  memory experiments, sweeps and CSV output
    cli      command-line entry point
"""

from __future__ import annotations

from .clut import FrameClut, RankClut, compress_frame, compress_rank
from .decoder import (
    ClutBackend,
    DecoderState,
    LutBackend,
    OracleBackend,
    decode_batch,
    decode_trial,
    detect_events,
    final_syndrome_from_data,
    logical_outcome,
)
from .harness import (
    ExperimentSpec,
    LerPoint,
    LerReport,
    access_weight_histogram,
    fit_scaling_exponent,
    run_experiment,
    sweep_cycles,
    sweep_rounds,
)
from .layout import CodeLayout, build_layout, syndrome_of
from .lut import DecoderConfig, Lut, LutEntry, SparseLut, build_table, size_report
from .matching import DecodingGraph, build_graph, commit_oldest_layer, min_weight_match
from .noise import NoiseParams, TrialRecord, sample_batch, sample_trial

__version__ = "0.1.0"
