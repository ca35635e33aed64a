"""Command-line entry point: tune, simulate, compare, rootlocus, bode.

Every output file embeds a manifest line (tool version plus a hash of the
effective configuration), and the effective configuration itself is echoed to
the output directory, so a run can be reproduced exactly from its outputs.
Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import (CONVENTIONAL_HIGH_PI, CONVENTIONAL_LOW_PI, ConfigError,
                     RunConfig, load_config, render_config)
from .control import CascadeScheme, ConventionalScheme, weights_from_ratings
from .grid import power_plant_tf, voltage_loop_plant_tf
from .lti import NoCrossoverError, freq_response, tf_constant, tf_series
from .rootlocus import LocusResult, sweep_power_loop, sweep_voltage_loop
from .sim import (DEFAULT_ITAE_WINDOW, ItaeReport, SimResult, SimulationError,
                  itae_current, itae_voltage, run, voltage_settling)
from .tuning import InfeasibleDesignError, TuningSpec, design_pi, pi_tf, verify_design

log = logging.getLogger("dcgridlab")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

COMPARE_CASES = ("conventional-low", "conventional-high", "proposed")


@dataclass(frozen=True)
class RunManifest:
    """Provenance stamp carried by every output file."""

    tool: str
    version: str
    subcommand: str
    config_sha256: str
    deterministic: bool = True

    def as_dict(self) -> dict:
        return {"tool": self.tool, "version": self.version,
                "subcommand": self.subcommand,
                "config_sha256": self.config_sha256,
                "deterministic": self.deterministic}

    def comment_line(self) -> str:
        return (f"# {self.tool} {self.version} {self.subcommand} "
                f"config={self.config_sha256[:12]}")


def _manifest(cfg: RunConfig, subcommand: str) -> RunManifest:
    digest = hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()
    return RunManifest(tool="dcgrid-lab", version=__version__,
                       subcommand=subcommand, config_sha256=digest)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return format(x, ".12g")
    return str(x)


def write_csv(path: Path, manifest: RunManifest, header: Sequence[str],
              rows) -> None:
    # comma-separated, '.' decimal, LF endings: byte-stable for golden files
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest.comment_line() + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _json_safe(value):
    # keep the files standard JSON: non-finite numbers become null
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_json(path: Path, manifest: RunManifest, payload: dict) -> None:
    doc = _json_safe({"manifest": manifest.as_dict(), **payload})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _prepare_outdir(cfg: RunConfig, out: str) -> Path:
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "config_effective.ini", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(f"# dcgrid-lab {__version__} effective configuration\n")
        fh.write(render_config(cfg))
    return outdir


# ---------------------------------------------------------------------------
# subcommands


def cmd_tune(cfg: RunConfig, outdir: Path, mode: Optional[str]) -> int:
    manifest = _manifest(cfg, "tune")
    mode = mode or cfg.tuning.outer_plant_mode
    power_plant = power_plant_tf(cfg.grid, 0)
    power_spec = TuningSpec(cfg.tuning.power_crossover, cfg.tuning.power_margin)
    try:
        power = design_pi(power_plant, power_spec)
    except InfeasibleDesignError as exc:
        log.error("power loop design infeasible: %s", exc)
        return EXIT_NUMERICAL

    voltage_spec = TuningSpec(cfg.tuning.voltage_crossover, cfg.tuning.voltage_margin)
    results = {"power_loop": {
        "kp": power.gains.kp, "ki": power.gains.ki,
        "achieved_crossover_rad_s": power.achieved_crossover,
        "achieved_margin_deg": power.achieved_margin,
    }}
    chosen = None
    for m in ("as-written", "closed-inner"):
        plant = voltage_loop_plant_tf(cfg.grid, 0, power.gains, mode=m)
        try:
            tuned = design_pi(plant, voltage_spec)
            entry = {"kp": tuned.gains.kp, "ki": tuned.gains.ki,
                     "achieved_crossover_rad_s": tuned.achieved_crossover,
                     "achieved_margin_deg": tuned.achieved_margin}
            if m == mode:
                chosen = tuned
        except InfeasibleDesignError as exc:
            entry = {"infeasible": str(exc)}
        results[f"voltage_loop[{m}]"] = entry
    results["voltage_loop_mode"] = mode
    if chosen is None:
        log.error("voltage loop design infeasible in mode %s", mode)
        write_json(outdir / "gains.json", manifest, results)
        return EXIT_NUMERICAL

    write_json(outdir / "gains.json", manifest, results)
    for name, loop in (
            ("power", tf_series(pi_tf(power.gains), power_plant)),
            ("voltage", tf_series(pi_tf(chosen.gains),
                                  voltage_loop_plant_tf(cfg.grid, 0, power.gains,
                                                        mode=mode)))):
        pts = freq_response(loop, np.logspace(-2, 5, 400))
        write_csv(outdir / f"bode_{name}_loop.csv", manifest,
                  ("omega_rad_s", "magnitude_db", "phase_deg"),
                  ((p.omega, p.magnitude_db, p.phase_deg) for p in pts))
    print(f"power loop: kp={power.gains.kp:.6g} ki={power.gains.ki:.6g} "
          f"(crossover {power.achieved_crossover:.4g} rad/s, "
          f"margin {power.achieved_margin:.4g} deg)")
    print(f"voltage loop [{mode}]: kp={chosen.gains.kp:.6g} ki={chosen.gains.ki:.6g} "
          f"(crossover {chosen.achieved_crossover:.4g} rad/s, "
          f"margin {chosen.achieved_margin:.4g} deg)")
    return EXIT_OK


def _score_events(cfg: RunConfig, result: SimResult) -> list[dict]:
    events = [cfg.activation_time]
    events += [t for t, _ in cfg.load_steps if t > cfg.activation_time]
    boundaries = sorted(events) + [cfg.duration]
    scored = []
    for t0 in events:
        nxt = min(b for b in boundaries if b > t0)
        settle_window = nxt - t0
        report = ItaeReport(itae_v=itae_voltage(result, t0, DEFAULT_ITAE_WINDOW),
                            itae_i=itae_current(result, t0, DEFAULT_ITAE_WINDOW),
                            window_start=t0, window_length=DEFAULT_ITAE_WINDOW)
        scored.append({
            "event_time_s": report.window_start,
            "itae_v": report.itae_v,
            "itae_i": report.itae_i,
            "itae_window_s": report.window_length,
            "settling_v_s": voltage_settling(result, t0, settle_window),
        })
    return scored


def cmd_simulate(cfg: RunConfig, outdir: Path) -> int:
    manifest = _manifest(cfg, "simulate")
    try:
        result = run(cfg.scenario())
    except SimulationError as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_NUMERICAL
    rows = zip(result.time,
               result.power[:, 0], result.power[:, 1],
               result.bus_voltage,
               result.current[:, 0], result.current[:, 1],
               result.terminal_voltage[:, 0], result.terminal_voltage[:, 1],
               result.regulated_voltage,
               result.voltage_reference[:, 0], result.voltage_reference[:, 1])
    write_csv(outdir / "timeseries.csv", manifest,
              ("t_s", "dP1_w", "dP2_w", "dVg_bus_v", "I1_a", "I2_a",
               "Vterm1_v", "Vterm2_v", "Vreg_v", "ref1_v", "ref2_v"), rows)
    scored = _score_events(cfg, result)
    write_json(outdir / "itae.json", manifest,
               {"scheme": cfg.scheme_kind, "events": scored})
    for entry in scored:
        print(f"event t={entry['event_time_s']:g}s: "
              f"ITAE_V={entry['itae_v']:.6g} V*s^2  "
              f"ITAE_I={entry['itae_i']:.6g} A*s^2  "
              f"settling={entry['settling_v_s']:.4g} s")
    return EXIT_OK


def _case_scheme(cfg: RunConfig, case: str):
    if case == "proposed":
        return CascadeScheme(power_pi=cfg.power_pi, bus_voltage_pi=cfg.voltage_pi,
                             weights=weights_from_ratings(cfg.grid.rated_powers))
    gains = CONVENTIONAL_LOW_PI if case == "conventional-low" else CONVENTIONAL_HIGH_PI
    return ConventionalScheme(droop_resistance=cfg.droop_ohm,
                              voltage_pi=gains, current_pi=cfg.current_pi)


@dataclass(frozen=True)
class ComparisonRow:
    case: str
    event: str
    itae_v: float
    itae_i: float
    settling_v: float


@dataclass(frozen=True)
class ComparisonTable:
    """The full case-by-event grid; failed cases carry NaN markers."""

    rows: tuple[ComparisonRow, ...]

    def __post_init__(self):
        if {r.case for r in self.rows} != set(COMPARE_CASES):
            raise ValueError("comparison table must cover all three cases")

    def lookup(self, case: str, event: str) -> ComparisonRow:
        return next(r for r in self.rows if r.case == case and r.event == event)


def cmd_compare(cfg: RunConfig, outdir: Path) -> int:
    manifest = _manifest(cfg, "compare")
    rows: list[ComparisonRow] = []
    per_case: dict[str, Optional[list[dict]]] = {}
    failed = False
    for case in COMPARE_CASES:
        scenario = cfg.scenario(scheme=_case_scheme(cfg, case))
        try:
            result = run(scenario)
            scored = _score_events(cfg, result)
        except SimulationError as exc:
            log.error("case %s failed: %s", case, exc)
            per_case[case] = None
            rows.append(ComparisonRow(case, "FAILED", math.nan, math.nan, math.nan))
            failed = True
            continue
        per_case[case] = scored
        for entry in scored:
            rows.append(ComparisonRow(case, f"t={entry['event_time_s']:g}s",
                                      entry["itae_v"], entry["itae_i"],
                                      entry["settling_v_s"]))
    table = ComparisonTable(rows=tuple(rows))

    orderings = {}
    if not failed:
        events = [f"t={e['event_time_s']:g}s" for e in per_case["proposed"]]
        for event in events:
            p = table.lookup("proposed", event)
            hi = table.lookup("conventional-high", event)
            lo = table.lookup("conventional-low", event)
            orderings[event] = {
                "itae_v: proposed < conventional-high < conventional-low":
                    p.itae_v < hi.itae_v < lo.itae_v,
                "itae_i: proposed < conventional-low < conventional-high":
                    p.itae_i < lo.itae_i < hi.itae_i,
                "settling: proposed < conventional-high < conventional-low":
                    p.settling_v < hi.settling_v < lo.settling_v,
            }

    write_csv(outdir / "comparison.csv", manifest,
              ("case", "event", "itae_v", "itae_i", "settling_v_s"),
              ((r.case, r.event, r.itae_v, r.itae_i, r.settling_v)
               for r in table.rows))
    write_json(outdir / "comparison.json", manifest,
               {"cases": per_case, "orderings": orderings})

    for r in table.rows:
        print(f"{r.case:18s} {r.event:10s} itae_v={_fmt(r.itae_v):>14s} "
              f"itae_i={_fmt(r.itae_i):>14s} settling={_fmt(r.settling_v)}")
    for event, checks in orderings.items():
        for name, ok in checks.items():
            print(f"{event}: {name}: {'PASS' if ok else 'FAIL'}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def _locus_rows(result: LocusResult):
    for step in result.steps:
        for p in step.poles:
            yield (step.resistance, step.inductance, p.real, p.imag,
                   int(step.stable))


def cmd_rootlocus(cfg: RunConfig, outdir: Path, mode: Optional[str]) -> int:
    manifest = _manifest(cfg, "rootlocus")
    mode = mode or cfg.tuning.outer_plant_mode
    power = sweep_power_loop(cfg.grid, cfg.power_pi, cfg.sweep)
    voltage = sweep_voltage_loop(cfg.grid, cfg.power_pi, cfg.voltage_pi,
                                 cfg.sweep, mode=mode)
    write_csv(outdir / "rootlocus_power.csv", manifest,
              ("r1_ohm", "l1_h", "pole_re", "pole_im", "stable"),
              _locus_rows(power))
    write_csv(outdir / "rootlocus_voltage.csv", manifest,
              ("r1_ohm", "l1_h", "pole_re", "pole_im", "stable"),
              _locus_rows(voltage))
    summary = {}
    for name, locus in (("power", power), ("voltage", voltage)):
        dom = locus.terminal_dominant_pole
        summary[name] = {"all_stable": locus.all_stable,
                         "terminal_dominant_pole_re": dom.real,
                         "terminal_dominant_pole_im": dom.imag}
        print(f"{name} loop: all stable = {locus.all_stable}, "
              f"terminal dominant pole = {dom.real:.6g}{dom.imag:+.6g}j")
    write_json(outdir / "rootlocus_summary.json", manifest, summary)
    return EXIT_OK


def cmd_bode(cfg: RunConfig, outdir: Path, plant_name: str, converter: int,
             mode: Optional[str]) -> int:
    manifest = _manifest(cfg, "bode")
    mode = mode or cfg.tuning.outer_plant_mode
    annotation = None
    if plant_name == "unity":
        g = tf_constant(1.0)
    elif plant_name == "power":
        g = power_plant_tf(cfg.grid, converter)
    elif plant_name == "voltage":
        g = voltage_loop_plant_tf(cfg.grid, converter, cfg.power_pi, mode=mode)
    elif plant_name == "power-loop":
        g = tf_series(pi_tf(cfg.power_pi), power_plant_tf(cfg.grid, converter))
        annotation = verify_design(power_plant_tf(cfg.grid, converter), cfg.power_pi,
                                   TuningSpec(cfg.tuning.power_crossover,
                                              cfg.tuning.power_margin))
    elif plant_name == "voltage-loop":
        plant = voltage_loop_plant_tf(cfg.grid, converter, cfg.power_pi, mode=mode)
        g = tf_series(pi_tf(cfg.voltage_pi), plant)
        annotation = verify_design(plant, cfg.voltage_pi,
                                   TuningSpec(cfg.tuning.voltage_crossover,
                                              cfg.tuning.voltage_margin))
    else:
        log.error("unknown plant selector %r", plant_name)
        return EXIT_VALIDATION

    pts = freq_response(g, np.logspace(-2, 5, 400))
    path = outdir / f"bode_{plant_name}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest.comment_line() + "\n")
        if annotation is not None and annotation.ok:
            fh.write(f"# crossover_rad_s={_fmt(annotation.crossover)} "
                     f"margin_deg={_fmt(annotation.margin)}\n")
        fh.write("omega_rad_s,magnitude_db,phase_deg\n")
        for p in pts:
            fh.write(f"{_fmt(p.omega)},{_fmt(p.magnitude_db)},{_fmt(p.phase_deg)}\n")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcgrid-lab",
        description="DC microgrid control laboratory: loop tuning, impedance "
                    "sweeps, transient simulation and scheme comparison.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file; "
                       "omit for built-in bench defaults")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("tune", help="design power and bus-voltage PI gains")
    common(p)
    p.add_argument("--mode", choices=("as-written", "closed-inner"), default=None,
                   help="outer-loop plant composition")

    p = sub.add_parser("simulate", help="run one scenario and score its transients")
    common(p)

    p = sub.add_parser("compare", help="run the three-scheme comparison")
    common(p)

    p = sub.add_parser("rootlocus", help="cable-impedance pole sweep of both loops")
    common(p)
    p.add_argument("--mode", choices=("as-written", "closed-inner"), default=None)

    p = sub.add_parser("bode", help="export a frequency response as CSV")
    common(p)
    p.add_argument("--plant", default="power",
                   choices=("power", "voltage", "power-loop", "voltage-loop", "unity"))
    p.add_argument("--converter", type=int, default=0)
    p.add_argument("--mode", choices=("as-written", "closed-inner"), default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=logging.DEBUG if os.environ.get("DCGRIDLAB_VERBOSE") else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_VALIDATION
    try:
        outdir = _prepare_outdir(cfg, args.out)
        if args.subcommand == "tune":
            return cmd_tune(cfg, outdir, args.mode)
        if args.subcommand == "simulate":
            return cmd_simulate(cfg, outdir)
        if args.subcommand == "compare":
            return cmd_compare(cfg, outdir)
        if args.subcommand == "rootlocus":
            return cmd_rootlocus(cfg, outdir, args.mode)
        if args.subcommand == "bode":
            return cmd_bode(cfg, outdir, args.plant, args.converter, args.mode)
    except (SimulationError, NoCrossoverError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_VALIDATION
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
