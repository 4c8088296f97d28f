"""Monte Carlo block simulation, exact quantized expectations, sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .channel import build_quantizer, make_rng, quantize, sample_gain
from .errors import Infeasible, ParameterError
from .params import SystemParams, derive
from .policy import (BRANCHES, baseline_batch, policy_energy, practical_batch,
                     practical_policy,
                     scenario2_table, scenario3_solve, solve_batch, threshold_gate)
from .roots import solve_d_min

SCENARIOS = ("s1", "s2", "s3", "s3_gated", "baseline")
DEFAULT_BLOCKS = 100_000

# sweep variable -> (SystemParams field, factor from sweep units to SI)
SWEEP_VARS = {
    "phi": ("phi", 1.0),
    "t_block": ("t_block", 1e-3),  # swept in ms
    "b_feedback": ("b_feedback", None),
    "vartheta": ("vartheta", 1.0),
}

CSV_COLUMNS = ("swept_var", "swept_value", "e_psi_j", "lifetime_s", "lifetime_days",
               "mean_dcp_ratio", "mean_rate_bps", "mean_m", "outage_frac",
               "branch_unconstrained", "branch_delay_active", "branch_clamped")


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple

    def apply(self, params: SystemParams, value) -> SystemParams:
        name, factor = SWEEP_VARS[self.variable]
        if factor is None:
            return params.with_(**{name: int(value)})
        return params.with_(**{name: float(value) * factor})


def parse_sweep(text: str) -> Sweep:
    """Parse ``var=lo:hi:n`` (linear), ``var=lo:hi:nL`` (log) or ``var=v1,v2,...``."""
    try:
        var, spec = (s.strip() for s in text.split("=", 1))
    except ValueError:
        raise ParameterError(f"sweep must look like var=lo:hi:n, got {text!r}") from None
    if var not in SWEEP_VARS:
        raise ParameterError(f"unknown sweep variable {var!r}; choose from {sorted(SWEEP_VARS)}")
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ParameterError(f"range sweep needs lo:hi:n, got {spec!r}")
        lo, hi, n = parts
        log = n.upper().endswith("L")
        n = int(n[:-1] if log else n)
        if n < 1:
            raise ParameterError("sweep needs at least one point")
        lo, hi = float(lo), float(hi)
        if log:
            if lo <= 0 or hi <= 0:
                raise ParameterError("log-spaced sweeps need positive bounds")
            values = np.geomspace(lo, hi, n) if n > 1 else np.array([lo])
        else:
            values = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
        values = tuple(float(v) for v in values)
    elif spec:
        values = tuple(float(v) for v in spec.split(","))
    else:
        values = ()
    if var == "b_feedback":
        values = tuple(int(round(v)) for v in values)
    return Sweep(var, values)


@dataclass
class SimConfig:
    scenario: str = "s1"
    blocks: int = DEFAULT_BLOCKS
    seed: int = 0
    sweep: Sweep | None = None
    output_path: str | None = None
    practical: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.blocks < 1:
            raise ParameterError("blocks must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass
class SweepRow:
    swept_var: str
    swept_value: float
    e_psi: float
    e_psi_se: float
    lifetime_s: float
    mean_dcp_ratio: float
    mean_rate_bps: float
    mean_m: float
    outage_frac: float
    branch_counts: tuple = (0, 0, 0)
    feasible: bool = True
    blocks: int = 0
    note: str = ""

    @property
    def lifetime_days(self) -> float:
        return self.lifetime_s / energy.SECONDS_PER_DAY


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)


def _infeasible_row(var, value, blocks, note) -> SweepRow:
    nan = float("nan")
    return SweepRow(var, value, nan, nan, nan, nan, nan, nan, nan, (0, 0, 0),
                    feasible=False, blocks=blocks, note=note)


def _lifetime_or_inf(e_psi: float, params: SystemParams) -> float:
    if energy.average_power(e_psi, params) <= 0:
        return math.inf
    return energy.lifetime(e_psi, params)


def _summarise(var, value, params, psi, sent, m, d_cp, branch) -> SweepRow:
    """Aggregate per-block arrays; ``sent`` marks blocks that were transmitted."""
    n = len(psi)
    psi = np.where(sent, psi, 0.0)
    e_psi = float(np.mean(psi))
    se = float(np.std(psi, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if sent.any():
        ms = m[sent]
        mean_ratio = float(np.mean(d_cp[sent]) / params.data_bits)
        mean_rate = float(np.mean(np.log2(ms)) / params.t_s)
        mean_m = float(np.mean(ms))
        counts = tuple(int(c) for c in np.bincount(branch[sent], minlength=len(BRANCHES)))
    else:
        mean_ratio = mean_rate = mean_m = float("nan")
        counts = (0, 0, 0)
    return SweepRow(var, value, e_psi, se, _lifetime_or_inf(e_psi, params), mean_ratio,
                    mean_rate, mean_m, float(1.0 - np.mean(sent)), counts, True, n)


def _fixed_policy_row(var, value, params, derived, pol, n) -> SweepRow:
    """Row for a policy applied unchanged to every block (no averaging needed)."""
    if pol.outage:
        nan = float("nan")
        return SweepRow(var, value, 0.0, 0.0, _lifetime_or_inf(0.0, params), nan, nan, nan,
                        1.0, (0, 0, 0), True, n)
    e = policy_energy(pol, params, derived)
    counts = [0, 0, 0]
    counts[BRANCHES.index(pol.branch)] = n
    return SweepRow(var, value, e, 0.0, _lifetime_or_inf(e, params),
                    pol.d_cp / params.data_bits, math.log2(pol.m_real) / params.t_s,
                    pol.m_real, 0.0, tuple(counts), True, n)


def _adaptive(gains, params, derived, d_min, practical, baseline=False):
    """Per-block policies for perfect-CGI style scenarios; returns block arrays."""
    n = len(gains)
    psi = np.zeros(n)
    m = np.full(n, np.nan)
    d_cp = np.full(n, np.nan)
    branch = np.zeros(n, dtype=np.int64)
    sent = gains > 0
    idx = np.flatnonzero(sent)
    if idx.size:
        g = gains[idx]
        if baseline:
            batch = baseline_batch(g, params, derived)
        else:
            batch = solve_batch(g, params, derived, d_min, practical=practical)
        if practical:
            batch = practical_batch(batch, params, derived, compress=not baseline)
        ok = batch.feasible_power(params)
        psi[idx] = np.where(ok, batch.psi(params, derived), 0.0)
        m[idx], d_cp[idx], branch[idx] = batch.m_real, batch.d_cp, batch.branch
        sent[idx] = ok
    return psi, sent, m, d_cp, branch


def _table_arrays(params, derived, practical):
    q = build_quantizer(int(params.b_feedback), params.varsigma)
    table = scenario2_table(params, derived, q)
    n = len(table)
    psi = np.zeros(n)
    m = np.full(n, np.nan)
    d_cp = np.full(n, np.nan)
    branch = np.zeros(n, dtype=np.int64)
    sent = np.zeros(n, dtype=bool)
    for k, pol in enumerate(table.entries):
        if practical and not pol.outage:
            pol = practical_policy(pol, params, derived)
        if pol.outage:
            continue
        psi[k] = policy_energy(pol, params, derived)
        m[k], d_cp[k] = pol.m_real, pol.d_cp
        branch[k] = BRANCHES.index(pol.branch)
        sent[k] = True
    return q, psi, sent, m, d_cp, branch


def simulate(config: SimConfig, params: SystemParams, swept: tuple = ("none", float("nan")),
             seed: int | None = None) -> SweepRow:
    """One Monte Carlo row: draw block gains, apply the scenario policy, average."""
    var, value = swept
    seed = config.seed if seed is None else seed
    n = config.blocks
    derived = derive(params)
    try:
        if config.scenario == "baseline":
            d_min = None
        else:
            d_min = solve_d_min(params, derived.m_max)

        if config.scenario == "s3":
            pol = scenario3_solve(params, derived, d_min)
            if config.practical:
                pol = practical_policy(pol, params, derived)
            return _fixed_policy_row(var, value, params, derived, pol, n)

        gains = sample_gain(make_rng(seed), params.varsigma, n)
        if config.scenario == "s2":
            q, t_psi, t_sent, t_m, t_d, t_b = _table_arrays(params, derived, config.practical)
            k = quantize(gains, q) - 1
            return _summarise(var, value, params, t_psi[k], t_sent[k], t_m[k], t_d[k], t_b[k])
        if config.scenario == "s3_gated":
            gains = np.where(threshold_gate(gains, derived), gains, 0.0)
        out = _adaptive(gains, params, derived, d_min, config.practical,
                        baseline=config.scenario == "baseline")
        return _summarise(var, value, params, *out)
    except Infeasible as exc:
        return _infeasible_row(var, value, n, str(exc))


def expected_psi_quantized(params: SystemParams, derived=None, b: int | None = None) -> float:
    """Exact mean block energy with B-bit feedback (each interval has mass 2^-B)."""
    derived = derived or derive(params)
    if b is not None:
        params = params.with_(b_feedback=int(b))
    _, psi, sent, *_ = _table_arrays(params, derived, practical=False)
    return float(np.sum(np.where(sent, psi, 0.0)) / len(psi))


def point_seed(seed: int, index: int) -> int:
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def _sweep_point(args):
    config, params, sweep, i, value = args
    return simulate(config, sweep.apply(params, value), (sweep.variable, value),
                    seed=point_seed(config.seed, i))


def sweep(config: SimConfig, params: SystemParams) -> SweepResult:
    """One :func:`simulate` row per swept value, each with its own derived seed."""
    if config.sweep is None:
        raise ParameterError("sweep() needs a sweep variable")
    jobs = []
    for i, v in enumerate(config.sweep.values):
        try:
            config.sweep.apply(params, v)
        except ParameterError as exc:
            raise ParameterError(f"sweep value {v!r} for {config.sweep.variable}: {exc}") from exc
        jobs.append((config, params, config.sweep, i, v))
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    return SweepResult(rows)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow([r.swept_var, _fmt(r.swept_value), _fmt(r.e_psi), _fmt(r.lifetime_s),
                    _fmt(r.lifetime_days), _fmt(r.mean_dcp_ratio), _fmt(r.mean_rate_bps),
                    _fmt(r.mean_m), _fmt(r.outage_frac), *(_fmt(c) for c in r.branch_counts)])
    return buf.getvalue()


def emit_csv(result: SweepResult, path) -> None:
    data = csv_text(result).encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc
