"""Command-line entry point: solve, sweep, simulate, validate, table."""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .channel import build_quantizer
from .config import RunConfig, load, param_overrides
from .errors import NodeLifeError
from .oracle import GridSpec, grid_minimize_s1, grid_minimize_s3
from .params import derive
from .policy import (baseline_solve, policy_energy, practical_policy, scenario1_solve,
                     scenario2_table, scenario3_solve)
from .roots import solve_d_min
from .sim import SCENARIOS, SweepResult, csv_text, emit_csv, parse_sweep, simulate, sweep

VALIDATE_TOL = 5e-3  # relative gap tolerated between closed form and grid


class ValidationFailed(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="defaults",
                        help="config file path, or a preset name (defaults, desk)")
    common.add_argument("--scenario", choices=SCENARIOS)
    common.add_argument("--seed", type=lambda s: int(s, 0))
    common.add_argument("--blocks", type=int)
    common.add_argument("--out", help="CSV output path (stdout when omitted)")
    common.add_argument("--workers", type=int)
    common.add_argument("--practical", action="store_true", default=None,
                        help="use power-of-two constellations")
    common.add_argument("--t-block-ms", type=float)
    common.add_argument("--phi", type=float)
    common.add_argument("--vartheta", type=float)
    common.add_argument("--b-feedback", type=int)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config parameter key, e.g. d_m=80")

    p = argparse.ArgumentParser(prog="nodelife", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="print the policy for one block")
    s.add_argument("--gain", type=float, default=1.0, help="channel power gain |h|^2")
    s.add_argument("--interval", type=int, help="feedback interval index (scenario s2)")

    sw = sub.add_parser("sweep", parents=[common], help="sweep one constraint, write CSV")
    sw.add_argument("--sweep", help="var=lo:hi:n, var=lo:hi:nL or var=v1,v2,...")

    sub.add_parser("simulate", parents=[common], help="single-point Monte Carlo run")

    v = sub.add_parser("validate", parents=[common], help="compare closed forms with a grid search")
    v.add_argument("--grid-points", type=int, default=500)
    v.add_argument("--gains", type=int, default=9, help="number of log-spaced test gains")

    sub.add_parser("table", parents=[common], help="dump the quantized-feedback policy table")
    return p


def resolve(args) -> RunConfig:
    cfg = load(args.config)
    overrides = {}
    if args.t_block_ms is not None:
        overrides["t_block"] = args.t_block_ms * 1e-3
    if args.phi is not None:
        overrides["phi"] = args.phi
    if args.vartheta is not None:
        overrides["vartheta"] = args.vartheta
    if args.b_feedback is not None:
        overrides["b_feedback"] = args.b_feedback
    pairs = []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise NodeLifeError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key, value))
    overrides.update(param_overrides(pairs))
    cfg.params = cfg.params.with_(**overrides)
    sim = cfg.sim
    for name, attr in (("scenario", "scenario"), ("seed", "seed"), ("blocks", "blocks"),
                       ("out", "output_path"), ("workers", "workers"),
                       ("practical", "practical")):
        value = getattr(args, name)
        if value is not None:
            setattr(sim, attr, value)
    if getattr(args, "sweep", None):
        sim.sweep = parse_sweep(args.sweep)
    sim.__post_init__()
    return cfg


def _describe(policy, params, derived) -> str:
    if policy.outage:
        return f"outage (gain={policy.gain:.6g}, P_t={policy.p_t:.6g} W)\n"
    e = policy_energy(policy, params, derived)
    lines = [
        f"branch        {policy.branch}",
        f"design gain   {policy.gain:.6g}",
        f"M             {policy.m_real:.6g}",
        f"M practical   {policy.m_practical}",
        f"D_cp          {policy.d_cp:.6g} bits ({policy.d_cp / params.data_bits:.4f} of D)",
        f"P_t           {policy.p_t:.6g} W",
        f"rate          {policy.rate / params.t_s:.6g} b/s",
        f"energy        {e:.6g} J",
    ]
    return "\n".join(lines) + "\n"


def cmd_solve(args, cfg: RunConfig) -> int:
    params, sim = cfg.params, cfg.sim
    derived = derive(params)
    sc = sim.scenario
    if sc == "baseline":
        pol = baseline_solve(args.gain, params, derived)
    elif sc == "s2":
        table = scenario2_table(params, derived, build_quantizer(int(params.b_feedback),
                                                                 params.varsigma))
        i = args.interval
        if i is None:
            i = int(np.searchsorted(table.quantizer.levels[:-1], args.gain, side="right"))
        if not 1 <= i <= len(table):
            raise NodeLifeError(f"interval must lie in [1, {len(table)}], got {i}")
        pol = table[i]
    elif sc == "s3":
        pol = scenario3_solve(params, derived)
    else:
        if sc == "s3_gated" and not args.gain > derived.theta_gate:
            sys.stdout.write(f"gated: gain {args.gain:.6g} <= threshold "
                             f"{derived.theta_gate:.6g}, block dropped\n")
            return 0
        pol = scenario1_solve(args.gain, params, derived)
    if sim.practical:
        pol = practical_policy(pol, params, derived)
    sys.stdout.write(_describe(pol, params, derived))
    return 0


def _write(result, sim) -> None:
    if sim.output_path:
        emit_csv(result, sim.output_path)
    else:
        sys.stdout.write(csv_text(result))


def cmd_sweep(args, cfg: RunConfig) -> int:
    if cfg.sim.sweep is None:
        raise NodeLifeError("sweep needs --sweep var=lo:hi:n or a [sim] sweep entry")
    _write(sweep(cfg.sim, cfg.params), cfg.sim)
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    row = simulate(cfg.sim, cfg.params)
    if not row.feasible:
        raise NodeLifeError(f"infeasible: {row.note}")
    _write(SweepResult([row]), cfg.sim)
    return 0


def cmd_validate(args, cfg: RunConfig) -> int:
    params = cfg.params
    derived = derive(params)
    d_min = solve_d_min(params, derived.m_max)
    grid = GridSpec(args.grid_points, args.grid_points)
    worst = -math.inf
    checks = [("s1", g) for g in np.geomspace(0.01, 100.0, args.gains)] + [("s3", math.nan)]
    for name, g in checks:
        if name == "s1":
            pol = scenario1_solve(float(g), params, derived, d_min)
            ref = grid_minimize_s1(float(g), params, derived, grid, d_min)
        else:
            pol = scenario3_solve(params, derived, d_min)
            ref = grid_minimize_s3(params, derived, grid, d_min)
            g = pol.gain
        e = policy_energy(pol, params, derived)
        gap = (e - ref.psi) / ref.psi
        worst = max(worst, gap)
        status = "ok" if gap <= VALIDATE_TOL else "MISMATCH"
        sys.stdout.write(f"{name} gain={g:<10.4g} closed={e:.8g} grid={ref.psi:.8g} "
                         f"gap={gap:+.3e} {status}\n")
    sys.stdout.write(f"worst gap {worst:+.3e} (tolerance {VALIDATE_TOL:g})\n")
    if worst > VALIDATE_TOL:
        raise ValidationFailed(f"closed form exceeds grid optimum by {worst:.3%}")
    return 0


def cmd_table(args, cfg: RunConfig) -> int:
    params = cfg.params
    derived = derive(params)
    q = build_quantizer(int(params.b_feedback), params.varsigma)
    table = scenario2_table(params, derived, q)
    out = ["interval,c_i,m_real,m_practical,d_cp,p_t,branch,energy_j"]
    for i in range(1, len(table) + 1):
        pol = table[i]
        e = policy_energy(pol, params, derived)
        out.append(f"{i},{q.levels[i - 1]:.12g},{pol.m_real:.12g},{pol.m_practical},"
                   f"{pol.d_cp:.12g},{pol.p_t:.12g},{pol.branch or 'outage'},{e:.12g}")
    sys.stdout.write("\n".join(out) + "\n")
    return 0


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "validate": cmd_validate, "table": cmd_table}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except ValidationFailed as exc:
        sys.stderr.write(f"nodelife: validation failed: {exc}\n")
        return 2
    except (NodeLifeError, ValueError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        sys.stderr.write(f"nodelife: error: {msg}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
