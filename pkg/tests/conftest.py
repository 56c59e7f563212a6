"""Shared samplers and fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from optdesign import Design, DesignSpace, Model, make_design, slr_model
from optdesign.mm import MMParams, mm_model


@pytest.fixture
def slr_01() -> Model:
    return slr_model(DesignSpace(0.0, 1.0))


@pytest.fixture
def slr_15() -> Model:
    return slr_model(DesignSpace(1.0, 5.0))


@pytest.fixture
def mm_params_half() -> MMParams:
    return MMParams(eps=0.5)


@pytest.fixture
def mm_half(mm_params_half) -> Model:
    return mm_model(mm_params_half)


def random_design(model: Model, rng: np.random.Generator, k: int | None = None,
                  min_sep_rel: float = 0.02, w_floor: float = 0.05) -> Design:
    """A random non-singular k-point design on the model's space."""
    space = model.space
    while True:
        kk = k if k is not None else int(rng.integers(2, 5))
        xs = np.sort(rng.uniform(space.lo, space.hi, kk))
        if kk > 1 and np.min(np.diff(xs)) < min_sep_rel * space.width:
            continue
        ws = rng.uniform(w_floor, 1.0, kk)
        ws /= ws.sum()
        design = make_design(list(zip(xs, ws)), space)
        if design.support_size >= 2:
            return design


def random_slr_model(rng: np.random.Generator, min_width: float = 0.5) -> Model:
    a = float(rng.uniform(-5.0, 4.0))
    b = a + float(rng.uniform(min_width, 6.0))
    return slr_model(DesignSpace(a, b))
