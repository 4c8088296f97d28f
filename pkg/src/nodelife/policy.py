"""Jointly optimal compression / modulation / power policies.

Every scenario reduces to one core problem. For a design gain ``g`` the BER
constraint fixes the radiated power at ``(M-1)|Omega|/g``; the remaining
energy per block, in ``z = ln M``, is

    psi(z, x) = tau D P_cp ((D/x)^beta - 1) + x c E(z) / z,
    E(z)      = a (e^{z/2} - 1)^2 + P_o,     a = 3|Omega| / (mu g),
    c         = T_s ln 2,

minimised subject to T_cp(x) + x c / z <= T, 2 <= M <= M_max, x <= D.
Perfect CGI uses g = |h|^2, quantized CGI uses the interval floor c_i, and
statistical CGI uses g = -varsigma ln(vartheta).

Stationarity in z does not depend on x:  z E'(z) - E(z) = 0.  Stationarity in
x gives x/D = (z tau beta P_cp / (c E))^(1/(beta+1)).  When the delay bound
binds, eliminating the multiplier ``lam = z E' - E`` gives
(x/D)^(beta+1) = tau beta (P_cp + lam) / (c E'), and the remaining unknown z
is found from the delay equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import energy
from .channel import Quantizer
from .errors import Infeasible, ParameterError
from .params import DerivedConstants, SystemParams, derive
from .roots import bisect_array, block_time, solve_d_min, time_minimizer

LN2 = math.log(2.0)
BRANCHES = ("unconstrained", "delay_active", "clamped")
UNCONSTRAINED, DELAY_ACTIVE, CLAMPED = 0, 1, 2
_SCAN_POINTS = 48


@dataclass(frozen=True)
class Policy:
    """Decision for one block (or one quantization interval)."""

    m_real: float
    m_practical: int
    d_cp: float
    p_t: float
    branch: str | None  # None for an outage entry
    gain: float  # design gain the policy was computed for
    feasible_power: bool = True
    outage: bool = False

    @property
    def rate(self) -> float:
        """Bits per symbol, log2(M)."""
        return math.log2(self.m_real)


def outage_policy(gain: float = 0.0) -> Policy:
    return Policy(m_real=float("nan"), m_practical=0, d_cp=0.0, p_t=0.0, branch=None,
                  gain=gain, feasible_power=False, outage=True)


@dataclass(frozen=True)
class StationaryPoint:
    m_tilde: float
    d_cp_tilde: float
    q_time: float
    m_hat: float  # nan unless the delay bound binds
    d_cp_hat: float
    xi: float


@dataclass
class PolicyBatch:
    """Column-wise policies for an array of design gains."""

    gain: np.ndarray
    m_real: np.ndarray
    d_cp: np.ndarray
    p_t: np.ndarray
    branch: np.ndarray  # int codes into BRANCHES
    m_practical: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.gain)

    def feasible_power(self, params: SystemParams) -> np.ndarray:
        return self.p_t <= params.p_t_max

    def psi(self, params: SystemParams, derived: DerivedConstants) -> np.ndarray:
        return _energy(np.log(self.m_real), self.d_cp, self.p_t, params, derived)

    def policy(self, i: int, params: SystemParams) -> Policy:
        feasible = bool(self.p_t[i] <= params.p_t_max)
        m_pr = int(self.m_practical[i]) if self.m_practical is not None else 0
        return Policy(m_real=float(self.m_real[i]), m_practical=m_pr, d_cp=float(self.d_cp[i]),
                      p_t=float(self.p_t[i]), branch=BRANCHES[int(self.branch[i])],
                      gain=float(self.gain[i]), feasible_power=feasible,
                      outage=not feasible)


@dataclass(frozen=True)
class PolicyTable:
    entries: tuple  # Policy per interval, index 0 <-> interval 1
    b: int
    quantizer: Quantizer

    def __getitem__(self, i: int) -> Policy:
        """Entry for the 1-based interval index ``i``."""
        return self.entries[i - 1]

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# transmit power from the BER constraint

def prop1_power(m, h2, derived: DerivedConstants):
    """Smallest radiated power meeting the BER target at gain ``h2``."""
    h2 = np.asarray(h2, dtype=float)
    if np.any(h2 <= 0):
        raise ParameterError("zero channel gain needs infinite transmit power")
    out = (1.0 - np.asarray(m, dtype=float)) * derived.omega_cap / h2
    return out if out.ndim else float(out)


def prop2_power(m, params: SystemParams, derived: DerivedConstants):
    """Radiated power making P{BER <= phi} = vartheta under Rayleigh fading."""
    out = (np.asarray(m, dtype=float) - 1.0) * derived.omega_cap / (
        params.varsigma * math.log(params.vartheta))
    return out if out.ndim else float(out)


def threshold_gate(h2, derived: DerivedConstants):
    """True where the gain clears -varsigma ln(vartheta) and the block is sent."""
    out = np.asarray(h2) > derived.theta_gate
    return out if out.ndim else bool(out)


def statistical_gain(params: SystemParams, derived: DerivedConstants) -> float:
    """Equivalent deterministic gain of the statistical-CGI power rule."""
    return derived.theta_gate


# ---------------------------------------------------------------------------
# the reduced objective and its stationarity conditions

def _amp(g, params, derived):
    return -3.0 * derived.omega_cap / (params.mu * np.asarray(g, dtype=float))


def _e_tx(z, a, p_o):
    return a * np.expm1(z / 2.0) ** 2 + p_o


def _de_tx(z, a):
    return a * np.expm1(z / 2.0) * np.exp(z / 2.0)


def rate_residual(z, a, p_o):
    """z E'(z) - E(z); zero at the unconstrained optimum, the delay multiplier otherwise."""
    u = np.exp(z / 2.0)
    return a * (u - 1.0) * ((z - 1.0) * u + 1.0) - p_o


def _energy(z, x, p_t, params, derived):
    D = params.data_bits
    t_cp = params.tau * D * ((D / x) ** params.beta - 1.0)
    m = np.exp(z)
    p_tx = energy.par(m) / params.mu * p_t + derived.p_o
    return t_cp * params.p_cp + x * params.t_s * LN2 / z * p_tx


def _x_free(z, a, params, derived):
    """Energy-optimal D_cp at fixed z, ignoring the delay bound (capped at D)."""
    D = params.data_bits
    ratio = (z * params.tau * params.beta * params.p_cp
             / (params.t_s * LN2 * _e_tx(z, a, derived.p_o))) ** (1.0 / (params.beta + 1.0))
    return np.minimum(D * ratio, D)


def _x_kkt(z, a, params, derived):
    """D_cp on the delay-active stationarity curve (capped at D)."""
    D = params.data_bits
    lam = rate_residual(z, a, derived.p_o)
    xi = params.tau * params.beta * (params.p_cp + lam) / (params.t_s * LN2 * _de_tx(z, a))
    xi = np.maximum(xi, 1e-300)
    return np.minimum(D * xi ** (1.0 / (params.beta + 1.0)), D)


def delay_residual(z, a, params, derived):
    """Block time minus T along the delay-active stationarity curve."""
    return block_time(_x_kkt(z, a, params, derived), z, params) - params.t_block


def _z_bounds(derived):
    return LN2, math.log(derived.m_max)


def _solve_rate(a, derived):
    """Unconstrained z (clamped to [ln 2, ln M_max]) for each amplifier coefficient."""
    z_lo, z_hi = _z_bounds(derived)
    a = np.asarray(a, dtype=float)
    r_lo = rate_residual(z_lo, a, derived.p_o)
    r_hi = rate_residual(z_hi, a, derived.p_o)
    z = np.where(r_lo >= 0, z_lo, z_hi)
    inner = (r_lo < 0) & (r_hi > 0)
    if inner.any():
        ai = a[inner]
        z[inner] = bisect_array(lambda zz: rate_residual(zz, ai, derived.p_o),
                                np.full(ai.shape, z_lo), np.full(ai.shape, z_hi))
    return z


def _time_roots(z, params):
    """Feasible D_cp interval [x_lo, x_hi] at fixed z (nan where empty)."""
    D, T = params.data_bits, params.t_block
    z = np.asarray(z, dtype=float)
    x_top = time_minimizer(z, params)
    ok = block_time(x_top, z, params) <= T
    x_lo = np.full(z.shape, np.nan)
    x_hi = np.full(z.shape, np.nan)
    if ok.any():
        zk, tk = z[ok], x_top[ok]
        # compression time alone exceeds T below this size
        x_left = 0.5 * D * (1.0 + T / (params.tau * D)) ** (-1.0 / params.beta)
        g = lambda xx: block_time(xx, zk, params) - T  # noqa: E731
        at_top = g(tk) == 0
        lo = bisect_array(g, np.minimum(x_left, tk), tk)
        x_lo[ok] = np.where(at_top, tk, lo)
        hi = np.full(zk.shape, D)
        over = g(np.full(zk.shape, D)) > 0
        if over.any():
            zo = zk[over]
            hi[over] = bisect_array(lambda xx: block_time(xx, zo, params) - T,
                                    tk[over], np.full(zo.shape, D))
        x_hi[ok] = hi
    return x_lo, x_hi


def _best_x_at(z, a, params, derived):
    """Energy-optimal delay-feasible D_cp at fixed z (nan where none exists)."""
    x_lo, x_hi = _time_roots(z, params)
    return np.clip(_x_free(z, a, params, derived), x_lo, x_hi)


def _core(g, params: SystemParams, derived: DerivedConstants, d_min: float):
    """Vectorized optimum (z, x, branch) for design gains ``g``."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if np.any(~(g > 0)):
        raise ParameterError("design gains must be strictly positive")
    T, D = params.t_block, params.data_bits
    z_lo, z_hi = _z_bounds(derived)
    a = _amp(g, params, derived)

    z0 = _solve_rate(a, derived)
    x0 = _x_free(z0, a, params, derived)
    q = block_time(x0, z0, params)
    slack = q < T

    z = z0.copy()
    x = x0.copy()
    branch = np.where((z0 > z_lo) & (z0 < z_hi) & (x0 < D), UNCONSTRAINED, CLAMPED)

    act = np.flatnonzero(~slack)
    if act.size:
        za, aa = z0[act], a[act]
        z_act = np.full(act.shape, z_hi)
        x_act = np.full(act.shape, np.nan)
        to_cap = za >= z_hi
        # scan the stationarity curve upward from the unconstrained z
        frac = np.arange(1, _SCAN_POINTS + 1) / _SCAN_POINTS
        zs = za[:, None] + (z_hi - za)[:, None] * frac[None, :]
        res = delay_residual(zs, aa[:, None], params, derived)
        res0 = delay_residual(za, aa, params, derived)
        start_ok = res0 <= 0  # only possible when z is clamped at ln 2
        crossed = res <= 0
        has = crossed.any(axis=1) & ~to_cap & ~start_ok
        if has.any():
            k = np.argmax(crossed[has], axis=1)
            rows = np.flatnonzero(has)
            hi_z = zs[rows, k]
            lo_z = np.where(k == 0, za[rows], zs[rows, np.maximum(k - 1, 0)])
            ah = aa[rows]
            zr = bisect_array(lambda zz: delay_residual(zz, ah, params, derived), lo_z, hi_z)
            z_act[rows] = zr
            x_act[rows] = _x_kkt(zr, ah, params, derived)
        # no crossing before M_max (or clamped start): best feasible x at a fixed z
        fixed = ~has
        if fixed.any():
            zf = np.where(start_ok[fixed], za[fixed], z_hi)
            z_act[fixed] = zf
            x_act[fixed] = _best_x_at(zf, aa[fixed], params, derived)
        # guard: never compress beyond D_min
        low = x_act < d_min
        if low.any():
            x_act[low] = d_min
            t_cp = params.tau * D * ((D / d_min) ** params.beta - 1.0)
            z_act[low] = np.minimum(d_min * params.t_s * LN2 / (T - t_cp), z_hi)
        z[act], x[act] = z_act, x_act
        t_act = block_time(x_act, z_act, params)
        tight = np.abs(t_act - T) <= 1e-9 * T
        branch[act] = np.where(tight, DELAY_ACTIVE, CLAMPED)

    if np.any(~np.isfinite(x)):
        raise Infeasible("no delay-feasible decision for some design gains")
    return g, z, x, branch, a


def _feasible_d_min(params, derived):
    try:
        return solve_d_min(params, derived.m_max)
    except Infeasible:
        raise
    except Exception as exc:  # pragma: no cover - solver failure surfaced as-is
        raise Infeasible(str(exc)) from exc


def solve_batch(gains, params: SystemParams, derived: DerivedConstants | None = None,
                d_min: float | None = None, practical: bool = True) -> PolicyBatch:
    """Optimal continuous-M policies for an array of design gains."""
    derived = derived or derive(params)
    if d_min is None:
        d_min = _feasible_d_min(params, derived)
    g, z, x, branch, a = _core(gains, params, derived, d_min)
    m = np.exp(z)
    batch = PolicyBatch(gain=g, m_real=m, d_cp=x,
                        p_t=(m - 1.0) * -derived.omega_cap / g, branch=branch)
    if practical:
        batch.m_practical = _practical(m, g, params, derived, d_min)
    return batch


def scenario1_solve(h2: float, params: SystemParams, derived: DerivedConstants | None = None,
                    d_min: float | None = None) -> Policy:
    """Perfect-CGI policy for one block with power gain ``h2``."""
    if not h2 > 0:
        raise ParameterError("zero channel gain needs infinite transmit power")
    return solve_batch([h2], params, derived, d_min).policy(0, params)


def scenario3_solve(params: SystemParams, derived: DerivedConstants | None = None,
                    d_min: float | None = None) -> Policy:
    """Fixed policy using only the fading statistics (BER met with prob. vartheta)."""
    derived = derived or derive(params)
    return solve_batch([statistical_gain(params, derived)], params, derived, d_min).policy(0, params)


def stationary_point(g: float, params: SystemParams,
                     derived: DerivedConstants | None = None) -> StationaryPoint:
    """Unconstrained and delay-active candidate points for design gain ``g``."""
    derived = derived or derive(params)
    a = _amp(np.array([g]), params, derived)
    z0 = _solve_rate(a, derived)
    x0 = _x_free(z0, a, params, derived)
    q = float(block_time(x0, z0, params)[0])
    m_hat = d_hat = xi = float("nan")
    if q >= params.t_block:
        pol = solve_batch([g], params, derived, practical=False)
        if pol.branch[0] == DELAY_ACTIVE:
            m_hat = float(pol.m_real[0])
            d_hat = float(pol.d_cp[0])
            xi = (d_hat / params.data_bits) ** (params.beta + 1.0)
    return StationaryPoint(m_tilde=float(np.exp(z0[0])), d_cp_tilde=float(x0[0]), q_time=q,
                           m_hat=m_hat, d_cp_hat=d_hat, xi=xi)


# ---------------------------------------------------------------------------
# practical (power-of-two) constellations

def _practical(m, g, params, derived, d_min):
    m = np.asarray(m, dtype=float)
    g = np.asarray(g, dtype=float)
    cap = derived.m_max
    lg = np.log2(m)
    nu1 = np.exp2(np.floor(lg))
    nu2 = np.exp2(np.ceil(lg))
    a = _amp(g, params, derived)
    z1 = np.log(nu1)
    d_breve = np.maximum(d_min, _x_free(z1, a, params, derived))
    q1 = block_time(d_breve, z1, params)
    pick_low = (np.abs(m - nu1) <= np.abs(m - nu2)) & (q1 < params.t_block)
    return np.minimum(cap, np.where(pick_low, nu1, nu2)).astype(np.int64)


def practical_modulation(m_star: float, h2: float, params: SystemParams,
                         derived: DerivedConstants | None = None,
                         d_min: float | None = None) -> int:
    """Power-of-two constellation closest to ``m_star`` that keeps the delay bound."""
    if m_star < 2:
        raise ParameterError(f"constellation size must be >= 2, got {m_star}")
    derived = derived or derive(params)
    if d_min is None:
        d_min = _feasible_d_min(params, derived)
    return int(_practical([m_star], [h2], params, derived, d_min)[0])


def practical_batch(batch: PolicyBatch, params: SystemParams,
                    derived: DerivedConstants | None = None, compress: bool = True) -> PolicyBatch:
    """Batch counterpart of :func:`practical_policy` (M fixed to ``m_practical``).

    With ``compress=False`` (the transmission-only baseline) D_cp stays at D and
    only M and P_t change.
    """
    derived = derived or derive(params)
    m = batch.m_practical.astype(float)
    z = np.log(m)
    if compress:
        x = _best_x_at(z, _amp(batch.gain, params, derived), params, derived)
    else:
        x = batch.d_cp.copy()
        x[params.data_bits * params.t_s / np.log2(m) > params.t_block + energy.DELAY_TOL] = np.nan
    if np.any(~np.isfinite(x)):
        raise Infeasible("a practical constellation cannot meet the delay bound")
    t = block_time(x, z, params)
    branch = np.where(np.abs(t - params.t_block) <= 1e-9 * params.t_block, DELAY_ACTIVE, CLAMPED)
    return PolicyBatch(gain=batch.gain, m_real=m, d_cp=x,
                       p_t=(m - 1.0) * -derived.omega_cap / batch.gain, branch=branch,
                       m_practical=batch.m_practical)


def practical_policy(policy: Policy, params: SystemParams,
                     derived: DerivedConstants | None = None) -> Policy:
    """Re-solve D_cp and P_t with M fixed at the policy's power-of-two size."""
    if policy.outage:
        return policy
    derived = derived or derive(params)
    m = float(policy.m_practical)
    z = np.array([math.log(m)])
    a = _amp(np.array([policy.gain]), params, derived)
    x = float(_best_x_at(z, a, params, derived)[0])
    if not math.isfinite(x):
        raise Infeasible(f"M={m:g} cannot meet the delay bound")
    p_t = (m - 1.0) * -derived.omega_cap / policy.gain
    t = float(block_time(x, z[0], params))
    branch = "delay_active" if abs(t - params.t_block) <= 1e-9 * params.t_block else "clamped"
    feasible = p_t <= params.p_t_max
    return Policy(m_real=m, m_practical=int(m), d_cp=x, p_t=p_t, branch=branch,
                  gain=policy.gain, feasible_power=feasible, outage=not feasible)


# ---------------------------------------------------------------------------
# quantized CGI and the no-compression baseline

def scenario2_table(params: SystemParams, derived: DerivedConstants | None,
                    q: Quantizer) -> PolicyTable:
    """Offline policy per feedback interval, designed for the interval floor c_i."""
    derived = derived or derive(params)
    levels = np.asarray(q.levels[1:-1])
    batch = solve_batch(levels, params, derived)
    entries = [outage_policy(0.0)]
    entries += [batch.policy(i, params) for i in range(len(levels))]
    return PolicyTable(entries=tuple(entries), b=q.b, quantizer=q)


def baseline_batch(gains, params: SystemParams,
                   derived: DerivedConstants | None = None) -> PolicyBatch:
    """Transmission-only policies with D_cp = D for an array of gains."""
    derived = derived or derive(params)
    g = np.atleast_1d(np.asarray(gains, dtype=float))
    if np.any(~(g > 0)):
        raise ParameterError("design gains must be strictly positive")
    D, T = params.data_bits, params.t_block
    z_lo, z_hi = _z_bounds(derived)
    z_req = D * params.t_s * LN2 / T
    if z_req > z_hi:
        raise Infeasible(
            f"without compression the delay bound T={T:g} s needs M={math.exp(z_req):.4g} "
            f"> M_max={derived.m_max:g}")
    a = _amp(g, params, derived)
    z0 = _solve_rate(a, derived)
    slack = D * params.t_s * LN2 / z0 < T
    z = np.where(slack, z0, np.maximum(z_req, z_lo))
    branch = np.where(slack, np.where((z0 > z_lo) & (z0 < z_hi), UNCONSTRAINED, CLAMPED),
                      DELAY_ACTIVE)
    m = np.exp(z)
    # practical rounding: the lower power of two only if it still meets the delay
    lg = np.log2(m)
    nu1, nu2 = np.exp2(np.floor(lg)), np.exp2(np.ceil(lg))
    ok1 = (np.abs(m - nu1) <= np.abs(m - nu2)) & (D * params.t_s / np.log2(nu1) < T)
    m_pr = np.minimum(derived.m_max, np.where(ok1, nu1, nu2)).astype(np.int64)
    return PolicyBatch(gain=g, m_real=m, d_cp=np.full(g.shape, float(D)),
                       p_t=(m - 1.0) * -derived.omega_cap / g, branch=branch, m_practical=m_pr)


def baseline_solve(h2: float, params: SystemParams,
                   derived: DerivedConstants | None = None) -> Policy:
    if not h2 > 0:
        raise ParameterError("zero channel gain needs infinite transmit power")
    return baseline_batch([h2], params, derived).policy(0, params)


def policy_energy(policy: Policy, params: SystemParams,
                  derived: DerivedConstants | None = None) -> float:
    """Energy of one block under ``policy``; outage blocks cost nothing."""
    if policy.outage:
        return 0.0
    derived = derived or derive(params)
    return energy.psi(policy.m_real, policy.d_cp, policy.p_t, params, derived).psi
