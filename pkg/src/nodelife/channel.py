"""Rayleigh block fading: gain density, seeded sampling and the
equal-probability quantizer used for limited feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def gain_pdf(h2, varsigma: float):
    h2 = np.asarray(h2, dtype=float)
    out = np.where(h2 >= 0, np.exp(-h2 / varsigma) / varsigma, 0.0)
    return out if out.ndim else float(out)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded with a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def gain_from_uniform(u, varsigma: float):
    """Inverse-CDF transform of U(0,1) draws into exponential power gains."""
    return -varsigma * np.log1p(-np.asarray(u, dtype=float))


def sample_gain(rng: np.random.Generator, varsigma: float, size=None):
    return gain_from_uniform(rng.random(size), varsigma)


@dataclass(frozen=True)
class Quantizer:
    b: int
    levels: tuple  # c_1 = 0 < c_2 < ... < c_{2^B} < c_{2^B+1} = inf
    varsigma: float

    @property
    def n_intervals(self) -> int:
        return 2 ** self.b

    def interval_probability(self, i: int) -> float:
        lo, hi = self.levels[i - 1], self.levels[i]
        return float(np.exp(-lo / self.varsigma) - np.exp(-hi / self.varsigma))


def build_quantizer(b: int, varsigma: float) -> Quantizer:
    if not 1 <= b <= 16:
        raise ValueError(f"feedback bits must lie in [1, 16], got {b}")
    n = 2 ** b
    frac = np.arange(n) / n
    levels = -varsigma * np.log1p(-frac)
    return Quantizer(b=b, levels=tuple(float(c) for c in levels) + (float("inf"),),
                     varsigma=varsigma)


def quantize(h2, q: Quantizer):
    """1-based index i with c_i <= h2 < c_{i+1}."""
    idx = np.searchsorted(np.asarray(q.levels[:-1]), h2, side="right")
    return idx if np.ndim(idx) else int(idx)
