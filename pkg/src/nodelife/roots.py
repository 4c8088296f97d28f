"""Bracketed scalar root finding.

Double precision bisection is used throughout, with every returned root
checked against its residual by the callers (and the tests). Two entry points
share the same stopping rule: :func:`solve_bracketed` for one scalar problem
and :func:`bisect_array` for many independent problems evaluated with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import Infeasible, MaxIterations, NoSignChange
from .params import SystemParams

TOL_REL = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class RootSpec:
    residual: Callable[[float], float]
    bracket_lo: float
    bracket_hi: float
    tol_rel: float = TOL_REL
    max_iter: int = MAX_ITER
    f_tol: float | None = None  # optional absolute bound on |residual| at the root
    x_tol: float = 0.0  # absolute width, needed only for roots at or near zero


def solve_bracketed(spec: RootSpec) -> float:
    f = spec.residual
    lo, hi = float(spec.bracket_lo), float(spec.bracket_hi)
    if lo > hi:
        lo, hi = hi, lo
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChange(
            f"residual has no sign change on [{lo!r}, {hi!r}]: f={f_lo!r}, {f_hi!r}")
    for _ in range(spec.max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket exhausted at machine resolution
            return lo if abs(f_lo) <= abs(f_hi) else hi
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        x, fx = (lo, f_lo) if abs(f_lo) <= abs(f_hi) else (hi, f_hi)
        if hi - lo <= spec.tol_rel * abs(x) + spec.x_tol and (spec.f_tol is None or abs(fx) <= spec.f_tol):
            return x
    raise MaxIterations(f"no convergence after {spec.max_iter} bisection steps "
                        f"(bracket [{lo!r}, {hi!r}])")


def bisect_array(f: Callable[[np.ndarray], np.ndarray], lo, hi, *,
                 tol_rel: float = 0.0, x_tol: float = 0.0,
                 max_iter: int = MAX_ITER) -> np.ndarray:
    """Elementwise bisection of ``f`` over independent brackets [lo, hi].

    ``f`` must map an array of abscissae to residuals of the same shape, and
    ``f(lo)``, ``f(hi)`` must differ in sign elementwise. With the default
    ``tol_rel=0`` each bracket is halved until it cannot shrink further; a
    root at exactly zero additionally needs a positive ``x_tol``.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    f_lo, f_hi = f(lo), f(hi)
    bad = (np.sign(f_lo) == np.sign(f_hi)) & (f_lo != 0) & (f_hi != 0)
    if np.any(bad):
        raise NoSignChange(f"{int(bad.sum())} bracket(s) without sign change")
    done = (f_lo == 0) | (f_hi == 0)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        exhausted = (mid <= lo) | (mid >= hi)
        narrow = (hi - lo) <= tol_rel * np.abs(mid) + x_tol
        done |= exhausted | narrow
        if done.all():
            break
        f_mid = f(mid)
        done |= f_mid == 0
        same = np.sign(f_mid) == np.sign(f_lo)
        move_lo = ~done & same
        move_hi = ~done & ~same
        lo = np.where(move_lo, mid, lo)
        f_lo = np.where(move_lo, f_mid, f_lo)
        hi = np.where(move_hi, mid, hi)
        f_hi = np.where(move_hi, f_mid, f_hi)
        hit = f_mid == 0
        lo = np.where(hit, mid, lo)
        hi = np.where(hit, mid, hi)
        f_lo = np.where(hit, 0.0, f_lo)
        f_hi = np.where(hit, 0.0, f_hi)
    else:
        raise MaxIterations(f"bisection did not converge in {max_iter} steps")
    return np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)


def expand_bracket(f: Callable[[float], float], x0: float, factor: float,
                   max_steps: int = 64) -> tuple[float, float]:
    """Walk geometrically from ``x0`` (x *= factor) until ``f`` changes sign.

    Returns the last two abscissae, ordered. ``factor`` < 1 walks towards zero.
    """
    x_prev, f_prev = x0, f(x0)
    for _ in range(max_steps):
        x = x_prev * factor
        fx = f(x)
        if f_prev == 0 or np.sign(fx) != np.sign(f_prev):
            return (min(x, x_prev), max(x, x_prev))
        x_prev, f_prev = x, fx
    raise NoSignChange(f"no sign change within {max_steps} geometric steps from {x0!r}")


def block_time(x, z, params: SystemParams):
    """Compression plus transmission time for D_cp=x bits at M=exp(z)."""
    D = params.data_bits
    return params.tau * D * ((D / x) ** params.beta - 1.0) + x * params.t_s * math.log(2.0) / z


def time_minimizer(z, params: SystemParams):
    """D_cp minimizing the block time at fixed M = exp(z), capped at D."""
    D = params.data_bits
    ratio = (z * params.beta * params.tau / (params.t_s * math.log(2.0))) ** (1.0 / (params.beta + 1.0))
    return np.minimum(D * ratio, D)


def d_min_residual(d_min: float, params: SystemParams, m_max: float) -> float:
    return float(block_time(d_min, math.log(m_max), params)) - params.t_block


def solve_d_min(params: SystemParams, m_max: float) -> float:
    """Smallest compressed size that still fits in the block at rate log2(M_max)/T_s."""
    z = math.log(m_max)
    x_top = float(time_minimizer(z, params))

    def g(x: float) -> float:
        return d_min_residual(x, params, m_max)

    g_top = g(x_top)
    if g_top > 0:
        raise Infeasible(
            f"delay bound T={params.t_block:g} s cannot be met at any compression level "
            f"(shortest block time {g_top + params.t_block:.6g} s at M_max={m_max:g})")
    if g_top == 0:
        return x_top
    lo, hi = expand_bracket(g, x_top, 0.5)
    return solve_bracketed(RootSpec(g, lo, hi, f_tol=1e-13 * params.t_block))
