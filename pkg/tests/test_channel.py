from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodelife.channel import (build_quantizer, gain_from_uniform, gain_pdf, make_rng,
                              quantize, sample_gain)


def test_pdf():
    assert gain_pdf(0.0, 1.0) == 1.0
    assert gain_pdf(-1.0, 1.0) == 0.0
    assert gain_pdf(2.0, 2.0) == pytest.approx(math.exp(-1) / 2)


def test_pdf_integrates_to_one():
    x = np.linspace(0, 60, 600001)
    y = gain_pdf(x, 2.0)
    assert np.sum((y[1:] + y[:-1]) / 2 * np.diff(x)) == pytest.approx(1.0, abs=1e-6)


def test_inverse_cdf():
    assert gain_from_uniform(0.0, 1.0) == 0.0
    assert gain_from_uniform(0.5, 1.0) == pytest.approx(math.log(2))
    assert gain_from_uniform(1 - math.exp(-3), 2.0) == pytest.approx(6.0)


def test_sampling_is_seeded_and_exponential():
    a = sample_gain(make_rng(42), 1.5, 200000)
    b = sample_gain(make_rng(42), 1.5, 200000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_gain(make_rng(43), 1.5, 200000))
    se = 1.5 / math.sqrt(len(a))
    assert abs(a.mean() - 1.5) < 4 * se
    assert a.min() >= 0


def test_quantizer_levels():
    q = build_quantizer(1, 1.0)
    assert q.levels[0] == 0.0
    assert q.levels[1] == pytest.approx(math.log(2))
    assert math.isinf(q.levels[-1])
    q2 = build_quantizer(2, 1.0)
    assert q2.levels[1:4] == pytest.approx((math.log(4 / 3), math.log(2), math.log(4)))
    assert q2.n_intervals == 4


@pytest.mark.parametrize("b", [0, 17])
def test_quantizer_domain(b):
    with pytest.raises(ValueError):
        build_quantizer(b, 1.0)


@given(st.integers(1, 10), st.floats(0.1, 10.0))
def test_equal_probability_intervals(b, varsigma):
    q = build_quantizer(b, varsigma)
    probs = [q.interval_probability(i) for i in range(1, q.n_intervals + 1)]
    assert np.allclose(probs, 2.0 ** -b, rtol=1e-9, atol=1e-15)
    assert all(np.diff(q.levels) > 0)


def test_quantize_index():
    q = build_quantizer(2, 1.0)
    assert quantize(0.0, q) == 1
    assert quantize(q.levels[1], q) == 2
    assert quantize(100.0, q) == 4
    h = sample_gain(make_rng(3), 1.0, 100000)
    idx = quantize(h, q)
    assert idx.min() >= 1 and idx.max() <= 4
    lv = np.asarray(q.levels)
    assert np.all(lv[idx - 1] <= h) and np.all(h < lv[idx])
    counts = np.bincount(idx, minlength=5)[1:]
    assert np.all(np.abs(counts / len(h) - 0.25) < 0.01)


def test_nested_levels():
    coarse = build_quantizer(3, 1.0).levels[:-1]
    fine = build_quantizer(4, 1.0).levels[:-1]
    assert np.allclose(coarse, fine[::2], rtol=1e-14)
