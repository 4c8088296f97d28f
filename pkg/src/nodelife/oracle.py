"""Exhaustive grid minimisation of the block energy.

Independent cross-check for the closed-form policies: the energy is assembled
from the elementary formulas in :mod:`nodelife.energy`, the radiated power is
obtained by inverting the BER bound directly, and every delay- and
power-feasible grid point is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import energy
from .errors import EmptyFeasibleSet
from .params import DerivedConstants, SystemParams, derive
from .roots import solve_d_min


@dataclass(frozen=True)
class GridSpec:
    m_points: int = 2000
    dcp_points: int = 2000
    spacing: str = "log"  # spacing along M; D_cp is always linear
    m_range: tuple | None = None  # default [2, M_max]
    dcp_range: tuple | None = None  # default [D_min, D]

    def __post_init__(self) -> None:
        if self.m_points < 2 or self.dcp_points < 2:
            raise ValueError("grids need at least two points per axis")
        if self.spacing not in ("log", "linear"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        for r in (self.m_range, self.dcp_range):
            if r is not None and not r[0] < r[1]:
                raise ValueError(f"empty grid range {r!r}")

    def refined(self) -> "GridSpec":
        """Grid with every interval halved; a superset of this one."""
        return replace(self, m_points=2 * self.m_points - 1, dcp_points=2 * self.dcp_points - 1)


@dataclass(frozen=True)
class GridMinimum:
    m: float
    d_cp: float
    psi: float
    n_feasible: int
    n_points: int

    def __iter__(self):
        return iter((self.m, self.d_cp, self.psi))


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    # i/(n-1) keeps nested grids bit-identical on shared points
    return lo + (hi - lo) * (np.arange(n) / (n - 1))


def m_axis(grid: GridSpec, m_max: float) -> np.ndarray:
    lo, hi = grid.m_range or (2.0, m_max)
    lo, hi = max(lo, 2.0), min(hi, m_max)
    if grid.spacing == "log":
        return np.exp(_axis(math.log(lo), math.log(hi), grid.m_points))
    return _axis(lo, hi, grid.m_points)


def zoomed(best: GridMinimum, grid: GridSpec, m_max: float, d_min: float, D: float,
           cells: int = 3) -> GridSpec:
    """Same-size grid spanning ``cells`` steps of ``grid`` around a previous argmin."""
    m_lo, m_hi = grid.m_range or (2.0, m_max)
    x_lo, x_hi = grid.dcp_range or (d_min, D)
    if grid.spacing == "log":
        step = (math.log(m_hi) - math.log(m_lo)) / (grid.m_points - 1)
        m_range = (best.m * math.exp(-cells * step), best.m * math.exp(cells * step))
    else:
        step = (m_hi - m_lo) / (grid.m_points - 1)
        m_range = (best.m - cells * step, best.m + cells * step)
    dx = (x_hi - x_lo) / (grid.dcp_points - 1)
    m_range = (max(m_range[0], m_lo), min(m_range[1], m_hi))
    dcp_range = (max(best.d_cp - cells * dx, x_lo), min(best.d_cp + cells * dx, x_hi))
    return replace(grid, m_range=m_range, dcp_range=dcp_range)


def required_power(m, gain, params: SystemParams, derived: DerivedConstants):
    """Radiated power at which the BER bound equals phi for design gain ``gain``."""
    gamma = (m - 1.0) * math.log(params.omega2 / params.phi) / params.omega1
    return gamma * params.sigma2 * params.d ** params.alpha / (derived.kappa * gain)


def _grid_minimize(gain: float, params: SystemParams, derived: DerivedConstants,
                   grid: GridSpec, d_min: float | None) -> GridMinimum:
    if d_min is None:
        d_min = solve_d_min(params, derived.m_max)
    D, T = params.data_bits, params.t_block
    ms = m_axis(grid, derived.m_max)
    x_lo, x_hi = grid.dcp_range or (d_min, D)
    x_lo, x_hi = max(x_lo, d_min), min(x_hi, D)
    xs = _axis(x_lo, x_hi, grid.dcp_points)
    xs[-1] = x_hi
    t_cp = energy.compression_time(D, xs, params.tau, params.beta)
    e_cp = t_cp * params.p_cp
    best = (math.inf, math.nan, math.nan)
    n_ok = 0
    rows = max(1, 2_000_000 // len(xs))
    for start in range(0, len(ms), rows):
        m = ms[start:start + rows, None]
        p_t = required_power(m, gain, params, derived)
        t_tx = energy.tx_time(xs[None, :], m, params.t_s)
        p_tx = energy.tx_power_total(p_t, m, derived.p_o, params.mu)
        psi = e_cp[None, :] + t_tx * p_tx
        ok = (t_cp[None, :] + t_tx <= T + energy.DELAY_TOL) & (p_t <= params.p_t_max)
        n_ok += int(ok.sum())
        if not ok.any():
            continue
        psi = np.where(ok, psi, np.inf)
        k = int(np.argmin(psi))
        i, j = divmod(k, psi.shape[1])
        if psi[i, j] < best[0]:
            best = (float(psi[i, j]), float(m[i, 0]), float(xs[j]))
    if n_ok == 0:
        raise EmptyFeasibleSet(f"no feasible point on a {grid.m_points}x{grid.dcp_points} grid")
    return GridMinimum(m=best[1], d_cp=best[2], psi=best[0], n_feasible=n_ok,
                       n_points=len(ms) * len(xs))


def grid_minimize_s1(h2: float, params: SystemParams, derived: DerivedConstants | None = None,
                     grid: GridSpec = GridSpec(), d_min: float | None = None) -> GridMinimum:
    """Brute-force optimum for a perfectly known gain ``h2``."""
    return _grid_minimize(h2, params, derived or derive(params), grid, d_min)


def grid_minimize_s3(params: SystemParams, derived: DerivedConstants | None = None,
                     grid: GridSpec = GridSpec(), d_min: float | None = None) -> GridMinimum:
    """Brute-force optimum under the outage-probability BER constraint.

    P{|h|^2 >= g} = exp(-g/varsigma) >= vartheta holds exactly when the power
    is designed for g = -varsigma ln(vartheta).
    """
    derived = derived or derive(params)
    g = -params.varsigma * math.log(params.vartheta)
    return _grid_minimize(g, params, derived, grid, d_min)
