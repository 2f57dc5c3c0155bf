"""Command-line front end: ``kljn {design,tables,simulate,attack,report}``.

Exit codes: 0 success, 1 bad input, 2 infeasible design, 3 statistical guard.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from . import report, tables
from .campaign import SWEEP_STREAM, CampaignConfig, run_campaigns
from .circuit import (
    REPORT_ROWS,
    BitState,
    ResistorQuad,
    crossover_frequencies,
    full_report,
    match_parallel_fourth,
    match_serial_fourth,
    vmg_solve,
    zero_power_fourth,
)
from .errors import AmbiguousLevels, InfeasibleMatch, KLJNError, UnphysicalQuad
from .noise import SimulationGrid
from .protocol import SessionConfig, run_session
from .seeding import derive_seed

log = logging.getLogger("kljn")

OUTPUT_ENV = "KLJN_OUTPUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_GUARD = 0, 1, 2, 3

DESIGN_MODES = {
    # mode: (given resistors, designed resistor)
    "zero-power": (("r_hb", "r_la", "r_ha"), "r_lb"),
    "match-parallel": (("r_ha", "r_la", "r_lb"), "r_hb"),
    "match-serial": (("r_la", "r_hb", "r_ha"), "r_lb"),
}


class Run:
    """Resolved manifest for one invocation."""

    def __init__(self, args):
        overrides = list(args.set or [])
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        self.cfg = cfgmod.load_config(args.config, overrides)
        self.out = Path(args.out or os.environ.get(OUTPUT_ENV, "kljn-out"))
        self.format = args.format
        self.seed = int(self.cfg["seed"])
        self.hash = cfgmod.config_hash(self.cfg)
        self.subcommand = args.command

    def emit(self, stem: str, header, rows, payload=None) -> Path:
        if self.format == "json":
            data = payload if payload is not None else [dict(zip(header, r)) for r in rows]
            return report.write(self.out / f"{stem}.json", report.json_text(data, self.hash, self.seed))
        return report.write(self.out / f"{stem}.csv", report.csv_text(header, rows, self.hash, self.seed))


def _report_rows(values: dict) -> list[list]:
    return [[k, repr(values[k])] for k in REPORT_ROWS]


def cmd_design(run: Run, args) -> int:
    design = dict(run.cfg.get("design", {}))
    for key in ("r_ha", "r_lb", "r_la", "r_hb"):
        value = getattr(args, key)
        if value is not None:
            design[key] = value
    mode = args.mode or design.get("mode", "zero-power")
    if mode not in DESIGN_MODES:
        raise cfgmod.InvalidInput(f"unknown design mode {mode!r}")
    given, designed = DESIGN_MODES[mode]
    try:
        inputs = [float(design[k]) for k in given]
    except KeyError as exc:
        raise cfgmod.InvalidInput(f"design mode {mode} needs {', '.join(given)}; missing {exc.args[0]}")
    rule = {"zero-power": zero_power_fourth, "match-parallel": match_parallel_fourth,
            "match-serial": match_serial_fourth}[mode]
    fourth = rule(*inputs)
    resistors = dict(zip(given, inputs))
    resistors[designed] = fourth
    quad = ResistorQuad(**resistors)
    values = full_report(quad, float(run.cfg["u_la"]), cfgmod.cable(run.cfg), cfgmod.bandwidth(run.cfg))
    print(f"{designed} = {fourth:.6g} ohm")
    path = run.emit(f"design_{mode}", ["row", "value"], _report_rows(values),
                    {"mode": mode, designed: fourth, "report": values})
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_tables(run: Run, args) -> int:
    regenerated = tables.regenerate()
    flagged = []
    for name, cells in regenerated.items():
        run.emit(name, tables.TABLE_HEADER, tables.table_rows(cells))
        flagged += [c for c in cells if c.flagged]
    print(f"{sum(len(c) for c in regenerated.values())} cells regenerated, {len(flagged)} flagged (>1%)")
    for c in flagged:
        print(f"  {c.table} {c.row}[{c.column}]: computed {c.computed:.4g}, printed {c.printed:.4g} "
              f"({100 * c.deviation:.2f}%)")
    return EXIT_OK


def cmd_report(run: Run, args) -> int:
    values = full_report(cfgmod.quad(run.cfg), float(run.cfg["u_la"]), cfgmod.cable(run.cfg),
                         cfgmod.bandwidth(run.cfg))
    for k in REPORT_ROWS:
        print(f"{k:8s} {values[k]:.6g}")
    run.emit("report", ["row", "value"], _report_rows(values), values)
    return EXIT_OK


def session_config(cfg: dict) -> SessionConfig:
    sim = cfg.get("simulation", {})
    b = cfgmod.bandwidth(cfg)
    quad, cable = cfgmod.quad(cfg), cfgmod.cable(cfg)
    mode = sim.get("mode", "analytic")
    grid = None
    if mode == "montecarlo":
        cr = crossover_frequencies(quad, cable)
        channels = [cr.f_ucr_hl, cr.f_ucr_lh]
        if sim.get("eve"):
            channels += [cr.f_icr_hl, cr.f_icr_lh]
        periods = float(sim.get("periods", 200.0))
        if "sample_rate_hz" in sim:
            grid = SimulationGrid(float(sim["sample_rate_hz"]), periods / b)
        else:
            grid = SimulationGrid.covering(b, channels, periods)
    return SessionConfig(
        quad=quad, cable=cable, bandwidth_b=b, n_bit_periods=int(sim.get("n_bit_periods", 100)),
        master_seed=int(cfg["seed"]), u_la=float(cfg["u_la"]), grid=grid,
        bit_convention=BitState(sim.get("bit_convention", "HL")), mode=mode, eve=sim.get("eve"),
    )


def cmd_simulate(run: Run, args) -> int:
    record = run_session(session_config(run.cfg))
    payload = record.as_dict()
    report.write(run.out / "session.json", report.json_text(payload, run.hash, run.seed))
    if run.format == "csv":
        header = ["index", "seed", "true_state", "secure", "alice_decoded_peer", "bob_decoded_peer",
                  "u_ms", "i_ms", "eve_guess"]
        rows = [[p["index"], p["seed"], p["true_state"], p["secure"], p["alice_decoded_peer"],
                 p["bob_decoded_peer"], repr(p["u_ms"]), repr(p["i_ms"]),
                 p["eve"]["guessed_state"] if p["eve"] else ""] for p in payload["periods"]]
        run.emit("periods", header, rows)
    print(f"periods={len(record.periods)} discarded={record.discard_count} key_bits={payload['key_bits']} "
          f"decode_errors={record.decode_errors} keys_agree={payload['keys_agree']}")
    if payload["leak"]:
        leak = payload["leak"]
        print(f"eve p={leak['p']:.4f} 95% CI=({leak['ci_low']:.4f}, {leak['ci_high']:.4f})")
    return EXIT_OK


def campaign_configs(cfg: dict) -> dict[str, CampaignConfig]:
    """Expand the [attack] table into the {quad, B, cable} campaign grid."""
    att = cfg.get("attack", {})
    quads = [cfgmod.quad_from(dict(zip(("r_ha", "r_lb", "r_la", "r_hb"), q))) if isinstance(q, list)
             else cfgmod.quad_from(q) for q in att.get("quads", [])] or [cfgmod.quad(cfg)]
    bandwidths = [cfgmod.bandwidth(cfg, b) for b in att.get("bandwidths", [cfg["bandwidth_b"]])]
    scales = [float(s) for s in att.get("cable_scales", [1.0])]
    base_cable = cfgmod.cable(cfg)
    seed = int(cfg["seed"])
    out = {}
    for qi, quad in enumerate(quads):
        for b in bandwidths:
            gens = vmg_solve(quad, float(cfg["u_la"]), b)
            for s in scales:
                key = f"q{qi:02d}_B{b:014.4f}_c{s:012.4f}"
                # independent trials per grid point
                point_seed = derive_seed(seed, SWEEP_STREAM, len(out))
                out[key] = CampaignConfig(
                    quad=quad, gens=gens, cable=base_cable.scaled(s),
                    attack=att.get("attack", "crossover"),
                    channels=tuple(att.get("channels", ["voltage"])),
                    n_trials=int(att.get("n_trials", 500)), master_seed=point_seed,
                    periods=float(att.get("periods", 200.0)),
                    sample_rate_hz=att.get("sample_rate_hz"), segment_len=att.get("segment_len"),
                    overlap_fraction=float(att.get("overlap_fraction", 0.5)),
                    mode=att.get("mode", "montecarlo"),
                )
    return out


def cmd_attack(run: Run, args) -> int:
    configs = campaign_configs(run.cfg)
    jobs = int(args.jobs or run.cfg.get("attack", {}).get("jobs", 1))
    results = run_campaigns(configs, jobs=jobs)
    header = ["point", "r_ha", "r_lb", "r_la", "r_hb", "bandwidth_b", "cap_per_m", "ind_per_m",
              "attack", "channels", "master_seed", "n_trials", "n_correct", "p", "ci_low", "ci_high"]
    rows = []
    for key, res in results.items():
        report.write(run.out / f"trials_{key}.jsonl", report.jsonl_text(res.jsonl(), run.hash, run.seed))
        c, leak = res.config, res.report
        rows.append([key, c.quad.r_ha, c.quad.r_lb, c.quad.r_la, c.quad.r_hb, repr(c.bandwidth_b),
                     repr(c.cable.cap_per_m), repr(c.cable.ind_per_m), c.attack, "+".join(c.channels),
                     c.master_seed, leak.n_trials, leak.n_correct, repr(leak.p), repr(leak.wilson_95_interval[0]),
                     repr(leak.wilson_95_interval[1])])
        print(f"{key}: p={leak.p:.4f} CI=({leak.wilson_95_interval[0]:.4f}, "
              f"{leak.wilson_95_interval[1]:.4f})")
    run.emit("summary", header, rows)
    return EXIT_OK


COMMANDS = {"design": cmd_design, "tables": cmd_tables, "simulate": cmd_simulate,
            "attack": cmd_attack, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. --set cable.length_m=1000")
    common.add_argument("--out", "-o", help=f"output directory (default ${OUTPUT_ENV} or ./kljn-out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kljn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("design", parents=[common], help="design the fourth resistor")
    d.add_argument("--mode", choices=sorted(DESIGN_MODES))
    for key in ("r_ha", "r_lb", "r_la", "r_hb"):
        d.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    sub.add_parser("tables", parents=[common], help="regenerate the published tables")
    sub.add_parser("simulate", parents=[common], help="run a key-exchange session")
    a = sub.add_parser("attack", parents=[common], help="run attack campaigns")
    a.add_argument("--jobs", type=int)
    sub.add_parser("report", parents=[common], help="full design report for [quad]")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        run = Run(args)
        return COMMANDS[args.command](run, args)
    except (InfeasibleMatch, UnphysicalQuad) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AmbiguousLevels as exc:
        print(f"error: AmbiguousLevels: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (KLJNError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
