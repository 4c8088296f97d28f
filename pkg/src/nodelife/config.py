"""INI-style configuration files with units spelled in the key names.

Example::

    [params]
    preset = desk
    t_block_ms = 40
    sigma2_dbm = -126
    phi = 1e-4

    [sim]
    scenario = s1
    blocks = 100000
    seed = 7
    sweep = phi=1e-6:1e-2:9L
    output = lifetime_vs_ber.csv

Unknown sections or keys are errors, so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ParameterError
from .params import PRESETS, SystemParams, dbm_to_watts
from .sim import SimConfig, parse_sweep

# key -> (SystemParams field, factor to SI); sigma2_dbm is converted separately
PARAM_KEYS = {
    "mu": ("mu", 1.0),
    "varsigma": ("varsigma", 1.0),
    "p_cp_mw": ("p_cp", 1e-3),
    "p_syn_mw": ("p_syn", 1e-3),
    "p_fil_mw": ("p_fil", 1e-3),
    "p_mix_mw": ("p_mix", 1e-3),
    "p_sen_mw": ("p_sen", 1e-3),
    "p_t_max_mw": ("p_t_max", 1e-3),
    "v_op_v": ("v_op", 1.0),
    "b_cap_as": ("b_cap", 1.0),
    "t_s_us": ("t_s", 1e-6),
    "t_block_ms": ("t_block", 1e-3),
    "t_sen_ms": ("t_sen", 1e-3),
    "tau_ns_per_bit": ("tau", 1e-9),
    "data_kbits": ("data_bits", 1e3),
    "data_bits": ("data_bits", 1.0),
    "sigma2_dbm": ("sigma2", None),
    "d_m": ("d", 1.0),
    "lambda_m": ("lam", 1.0),
    "omega1": ("omega1", 1.0),
    "omega2": ("omega2", 1.0),
    "beta": ("beta", 1.0),
    "phi": ("phi", 1.0),
    "alpha": ("alpha", 1.0),
    "vartheta": ("vartheta", 1.0),
}
INT_KEYS = {"l_max": "l_max", "b_feedback": "b_feedback"}
SIM_KEYS = ("scenario", "blocks", "seed", "sweep", "output", "practical", "workers")


@dataclass
class RunConfig:
    params: SystemParams
    sim: SimConfig = field(default_factory=SimConfig)


def preset(name: str) -> SystemParams:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def param_overrides(items) -> dict:
    """Map (unit-suffixed key, text value) pairs to SI SystemParams fields."""
    out = {}
    for key, text in items:
        key = key.strip().lower()
        try:
            if key in PARAM_KEYS:
                name, factor = PARAM_KEYS[key]
                value = float(text)
                out[name] = dbm_to_watts(value) if factor is None else value * factor
            elif key in INT_KEYS:
                out[INT_KEYS[key]] = int(text)
            else:
                raise ParameterError(f"unknown parameter key {key!r}")
        except ValueError as exc:
            raise ParameterError(f"bad value for {key}: {text!r}") from exc
    return out


def parse_text(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParameterError(f"{source}: {exc}".replace("\n", " ")) from exc
    extra = set(cp.sections()) - {"params", "sim"}
    if extra:
        raise ParameterError(f"{source}: unknown section(s) {sorted(extra)}")

    items = dict(cp.items("params")) if cp.has_section("params") else {}
    base = preset(items.pop("preset", "defaults").strip())
    try:
        params = base.with_(**param_overrides(items.items()))
    except ParameterError as exc:
        raise ParameterError(f"{source}: {exc}") from exc

    sim_items = dict(cp.items("sim")) if cp.has_section("sim") else {}
    unknown = set(sim_items) - set(SIM_KEYS)
    if unknown:
        raise ParameterError(f"{source}: unknown [sim] key(s) {sorted(unknown)}")
    try:
        sim = SimConfig(
            scenario=sim_items.get("scenario", "s1").strip(),
            blocks=int(sim_items.get("blocks", SimConfig.blocks)),
            seed=int(sim_items.get("seed", "0"), 0),
            sweep=parse_sweep(sim_items["sweep"]) if "sweep" in sim_items else None,
            output_path=sim_items.get("output"),
            practical=cp.getboolean("sim", "practical", fallback=False),
            workers=int(sim_items.get("workers", 1)),
        )
    except ValueError as exc:
        raise ParameterError(f"{source}: {exc}") from exc
    return RunConfig(params, sim)


def load(path_or_preset: str) -> RunConfig:
    """Read a config file, or return a bare preset when given its name."""
    if path_or_preset in PRESETS:
        return RunConfig(preset(path_or_preset))
    try:
        with open(path_or_preset, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path_or_preset}: {exc.strerror or exc}") from exc
    return parse_text(text, source=str(path_or_preset))
