from __future__ import annotations

from functools import lru_cache

import pytest

from lutdecoder.layout import build_layout
from lutdecoder.lut import DecoderConfig, build_table


@lru_cache(maxsize=None)
def cached_table(d: int, m: int, t: str, W: int | None = None):
    return build_table(DecoderConfig(d, m, t), W=W)


@pytest.fixture(scope="session")
def layouts():
    return {d: build_layout(d) for d in (2, 3, 4, 5)}


@pytest.fixture(scope="session")
def table():
    return cached_table
