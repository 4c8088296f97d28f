"""System parameters, unit conversions and derived constants.

Everything is stored in SI base units (W, s, m, bits, A*s, V). Conversions from
the engineering units used in configuration files (mW, us, ns/bit, dBm, kb)
happen only in :func:`table_defaults` and in :mod:`nodelife.config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import ParameterError


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0) * 1e-3


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ParameterError(f"power must be positive to express in dBm, got {p_w}")
    return 10.0 * math.log10(p_w / 1e-3)


@dataclass(frozen=True)
class SystemParams:
    """Physical and protocol constants of one sensor/sink link (SI units)."""

    mu: float  # PA drain efficiency
    varsigma: float  # scale of the exponential |h|^2 distribution
    p_cp: float  # W, MCU power while compressing
    p_syn: float  # W
    p_fil: float  # W
    p_mix: float  # W
    v_op: float  # V
    b_cap: float  # A*s
    t_s: float  # s, symbol period
    omega1: float
    omega2: float
    d: float  # m
    sigma2: float  # W, total noise power
    data_bits: float  # D, raw bits per block
    tau: float  # s/bit
    beta: float
    phi: float  # BER target
    t_block: float  # s, delay bound T
    lam: float = 0.125  # m, carrier wavelength
    alpha: float = 3.5
    l_max: int = 10  # M_max = 2**l_max
    t_sen: float = 0.0  # s
    p_sen: float = 0.0  # W
    vartheta: float = 0.9
    b_feedback: int = 6
    p_t_max: float = 0.1  # W, battery draw cap on the radiated power

    def __post_init__(self) -> None:
        nonneg = ("p_cp", "p_syn", "p_fil", "p_mix", "v_op", "b_cap", "t_s", "d",
                  "sigma2", "data_bits", "tau", "t_sen", "p_sen", "p_t_max")
        for name in nonneg:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v}")
        if not 0 < self.mu <= 1:
            raise ParameterError(f"mu must lie in (0, 1], got {self.mu}")
        if not self.varsigma > 0:
            raise ParameterError(f"varsigma must be > 0, got {self.varsigma}")
        if not 0 < self.vartheta < 1:
            raise ParameterError(f"vartheta must lie in (0, 1), got {self.vartheta}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if not 0 < self.phi < self.omega2:
            raise ParameterError(
                f"phi must lie in (0, omega2={self.omega2}), got {self.phi}")
        if not self.omega1 > 0:
            raise ParameterError(f"omega1 must be > 0, got {self.omega1}")
        if not self.t_block > 0:
            raise ParameterError(f"t_block must be > 0, got {self.t_block}")
        if self.data_bits <= 0 or self.t_s <= 0 or self.sigma2 <= 0 or self.lam <= 0:
            raise ParameterError("data_bits, t_s, sigma2 and lam must be strictly positive")
        if int(self.l_max) != self.l_max or self.l_max < 1:
            raise ParameterError(f"l_max must be an integer >= 1, got {self.l_max}")
        if int(self.b_feedback) != self.b_feedback or not 1 <= self.b_feedback <= 16:
            raise ParameterError(f"b_feedback must be an integer in [1, 16], got {self.b_feedback}")

    def with_(self, **changes) -> "SystemParams":
        """Copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DerivedConstants:
    kappa: float  # (lambda / 4 pi)^2
    p_o: float  # W, circuit power of the radio
    omega_cap: float  # W, negative whenever phi < omega2
    m_max: float  # 2**L
    theta_gate: float  # -varsigma ln(vartheta)


def table_defaults() -> SystemParams:
    """Published parameter table, converted to SI, plus the gap-filling defaults."""
    return SystemParams(
        mu=0.35,
        varsigma=1.0,
        p_cp=24e-3,
        p_syn=50e-3,
        p_fil=2.5e-3,
        p_mix=30.3e-3,
        v_op=3.0,
        b_cap=9000.0,
        t_s=16e-6,
        omega1=1.5,
        omega2=0.2,
        d=20.0,
        sigma2=dbm_to_watts(-174.0),
        data_bits=20e3,
        tau=0.35e-9,
        beta=5.0,
        phi=1e-3,
        t_block=50e-3,
    )


# -174 dBm/Hz integrated over the 1/T_s = 62.5 kHz symbol bandwidth.
DESK_SIGMA2_DBM = -174.0 + 10.0 * math.log10(1.0 / 16e-6)
DESK_DISTANCE_M = 150.0
DESK_P_T_MAX = 0.5  # W (27 dBm)


def desk_defaults() -> SystemParams:
    """Table values with bandwidth-scaled noise, a 150 m link and a 0.5 W cap.

    With the literal -174 dBm noise the radiated power is ~1e-11 W and every
    policy sits at M_max; this preset puts the transmit power in the same
    range as the circuit power so the rate/compression trade-off is visible.
    The larger cap keeps the uncompressed scheme from dropping a large share
    of its blocks near its delay limit.
    """
    return table_defaults().with_(sigma2=dbm_to_watts(DESK_SIGMA2_DBM), d=DESK_DISTANCE_M,
                                  p_t_max=DESK_P_T_MAX)


PRESETS = {"defaults": table_defaults, "desk": desk_defaults}


def derive(params: SystemParams) -> DerivedConstants:
    if params.phi >= params.omega2:
        raise ParameterError("phi >= omega2 makes the required transmit power non-positive")
    kappa = (params.lam / (4.0 * math.pi)) ** 2
    omega_cap = (params.sigma2 * params.d ** params.alpha * math.log(params.phi / params.omega2)
                 / (params.omega1 * kappa))
    return DerivedConstants(
        kappa=kappa,
        p_o=params.p_fil + params.p_mix + params.p_syn,
        omega_cap=omega_cap,
        m_max=float(2 ** int(params.l_max)),
        theta_gate=-params.varsigma * math.log(params.vartheta),
    )
