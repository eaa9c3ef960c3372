"""Shared fixtures: small scenarios for unit tests, cached runs for reuse."""

from __future__ import annotations

import zlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mixnum.scenario import (default_scenario_dict, derive_dims,
                             scenario_from_dict)
from mixnum import ofdm

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_spec(**overrides):
    """Validated scenario from the built-in two-numerology carrier."""
    raw = default_scenario_dict()
    raw.update(overrides)
    return scenario_from_dict(raw)


def tiny_spec(**overrides):
    """Short-duration variant that keeps unit tests fast."""
    defaults = {"duration_symbols_base": 8, "max_iterations": 5}
    defaults.update(overrides)
    return make_spec(**defaults)


def rng(tag) -> np.random.Generator:
    """Deterministic generator keyed by an int or a short string label."""
    if isinstance(tag, str):
        tag = zlib.crc32(tag.encode("utf-8"))
    return np.random.Generator(
        np.random.Philox(key=np.array([2024, tag], dtype=np.uint64)))


@pytest.fixture(scope="session")
def desk_dims():
    """Derived geometry of the full-duration built-in scenario."""
    return derive_dims(make_spec(method="FC_ICEF"))


@pytest.fixture(scope="session")
def tiny_dims():
    return derive_dims(tiny_spec(method="FC_ICEF"))


@pytest.fixture(scope="session")
def tiny_grids(tiny_dims):
    spec = tiny_spec(method="FC_ICEF")
    return [ofdm.generate_grid(tiny_dims, m, spec.seed)
            for m in range(tiny_dims.num_bwps)]
