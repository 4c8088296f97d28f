"""Timing, power, BER and lifetime formulas of the compress-then-transmit node.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .params import DerivedConstants, SystemParams

DELAY_TOL = 1e-12  # s, absolute slack accepted on T_cp + T_tx <= T
SECONDS_PER_DAY = 86400.0


def compression_time(D, d_cp, tau, beta):
    """Seconds needed to compress ``D`` raw bits down to ``d_cp`` bits."""
    d_cp = np.asarray(d_cp, dtype=float)
    if np.any(d_cp <= 0) or np.any(d_cp > D):
        raise ParameterError("compressed size must satisfy 0 < d_cp <= D")
    out = tau * D * ((D / d_cp) ** beta - 1.0)
    return out if out.ndim else float(out)


def tau_from_mcu(clock_hz: float, reg_bits: int) -> float:
    # one single-cycle instruction per register-width chunk of data
    instructions_per_program = 1.0
    clocks_per_instruction = 1.0
    return instructions_per_program * clocks_per_instruction * (1.0 / clock_hz) * (1.0 / reg_bits)


def tx_rate(m, t_s):
    return np.log2(m) / t_s


def tx_time(d_cp, m, t_s):
    return d_cp / tx_rate(m, t_s)


def par(m):
    """Peak-to-average power ratio of square M-QAM."""
    s = np.sqrt(m)
    return 3.0 * (s - 1.0) / (s + 1.0)


def tx_power_total(p_t, m, p_o, mu):
    """Radiated + amplifier + circuit power drawn while transmitting."""
    return par(m) / mu * p_t + p_o


def snr(p_t, h2, params: SystemParams, derived: DerivedConstants):
    return derived.kappa * p_t * h2 / (params.sigma2 * params.d ** params.alpha)


def ber_bound(m, gamma, omega1, omega2):
    return omega2 * np.exp(-omega1 * gamma / (m - 1.0))


@dataclass(frozen=True)
class BlockOutcome:
    t_cp: float
    t_tx: float
    p_tx: float
    psi: float  # J, compression + transmission energy of the block
    ber_bound: float  # nan when no channel gain was supplied
    feasible_delay: bool
    feasible_power: bool


def psi(m, d_cp, p_t, params: SystemParams, derived: DerivedConstants,
        h2: float | None = None) -> BlockOutcome:
    """Energy and timing of one block for a given (M, D_cp, P_t) decision."""
    t_cp = compression_time(params.data_bits, d_cp, params.tau, params.beta)
    t_tx = tx_time(d_cp, m, params.t_s)
    p_tx = tx_power_total(p_t, m, derived.p_o, params.mu)
    energy = t_cp * params.p_cp + t_tx * p_tx
    if h2 is None:
        ber = float("nan")
    else:
        ber = float(ber_bound(m, snr(p_t, h2, params, derived), params.omega1, params.omega2))
    return BlockOutcome(
        t_cp=float(t_cp),
        t_tx=float(t_tx),
        p_tx=float(p_tx),
        psi=float(energy),
        ber_bound=ber,
        feasible_delay=bool(t_cp + t_tx <= params.t_block + DELAY_TOL),
        feasible_power=bool(p_t <= params.p_t_max),
    )


def average_power(expected_psi: float, params: SystemParams) -> float:
    return (params.t_sen * params.p_sen + expected_psi) / params.t_block


def lifetime(expected_psi: float, params: SystemParams) -> float:
    """Seconds until the battery is empty at the given mean energy per block."""
    if expected_psi < 0:
        raise ParameterError(f"expected energy per block must be >= 0, got {expected_psi}")
    p_avg = average_power(expected_psi, params)
    if p_avg <= 0:
        raise ParameterError("average power is zero; lifetime is unbounded")
    return params.b_cap * params.v_op / p_avg
