"""TOML run configuration.

Schema (every key optional unless noted; defaults reproduce the published
examples)::

    seed = 0                      # master seed
    u_la = 1.0                    # V, freely chosen generator of R_LA
    bandwidth_b = 1000.0          # Hz

    [quad]                        # required for simulate / attack / report
    r_ha = 10000.0
    r_lb = 5000.0
    r_la = 1000.0
    r_hb = 9000.0

    [cable]
    length_m = 2000.0
    cap_per_m = 100e-12
    ind_per_m = 0.7e-6
    frequency_scale = 1.0         # divide every frequency (B and crossovers) by this

    [design]                      # for `kljn design`
    mode = "zero-power"           # or "match-parallel", "match-serial"
    r_ha = 9000.0                 # three of the four resistors, per mode
    r_la = 500.0
    r_hb = 18000.0

    [simulation]                  # for `kljn simulate`
    mode = "analytic"             # or "montecarlo"
    n_bit_periods = 100
    periods = 200.0               # bit-period length in units of 1/B
    sample_rate_hz = 20000.0      # default: 20 x the fastest frequency in play
    bit_convention = "HL"         # secure state that encodes 1
    eve = "temperature"           # or omitted

    [attack]                      # for `kljn attack`
    attack = "crossover"          # or "temperature"
    channels = ["voltage"]
    n_trials = 500
    periods = 200.0
    mode = "montecarlo"
    bandwidths = [1000.0]         # sweep grid; defaults to [bandwidth_b]
    cable_scales = [1.0]          # sweep grid over cable C/L multipliers
    jobs = 1

Any key can be overridden from the command line with ``--set section.key=value``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .circuit import CableModel, ResistorQuad
from .errors import InvalidInput

REFERENCE_CABLE = {"length_m": 2000.0, "cap_per_m": 100e-12, "ind_per_m": 0.7e-6}

DEFAULTS = {
    "seed": 0,
    "u_la": 1.0,
    "bandwidth_b": 1000.0,
    "cable": {**REFERENCE_CABLE, "frequency_scale": 1.0},
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override; value parsed as a TOML literal."""
    if "=" not in assignment:
        raise InvalidInput(f"override {assignment!r} is not of the form key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise InvalidInput(f"cannot descend into non-table key {key!r}")
    node[keys[-1]] = _parse_value(raw.strip())
    return cfg


def load_config(path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            cfg = _merge(cfg, tomllib.loads(Path(path).read_text()))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def quad_from(table: dict) -> ResistorQuad:
    try:
        return ResistorQuad(table["r_ha"], table["r_lb"], table["r_la"], table["r_hb"])
    except KeyError as exc:
        raise InvalidInput(f"quad is missing {exc.args[0]}") from exc


def quad(cfg: dict) -> ResistorQuad:
    if "quad" not in cfg:
        raise InvalidInput("config has no [quad] table")
    return quad_from(cfg["quad"])


def frequency_scale(cfg: dict) -> float:
    scale = float(cfg["cable"].get("frequency_scale", 1.0))
    if scale <= 0:
        raise InvalidInput("cable.frequency_scale must be > 0")
    return scale


def cable(cfg: dict) -> CableModel:
    c = cfg["cable"]
    model = CableModel(c["length_m"], c.get("cap_per_m", 0.0), c.get("ind_per_m", 0.0))
    scale = frequency_scale(cfg)
    return model if scale == 1.0 else model.scaled(scale)


def bandwidth(cfg: dict, value: float | None = None) -> float:
    b = float(cfg["bandwidth_b"] if value is None else value)
    return b / frequency_scale(cfg)
