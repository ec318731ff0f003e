"""
Command-line front end for the suspension-bridge simulator.

Usage:
    python runner.py [--config PATH] [--out DIR] [--seed-manifest]
                     [--debug-xi-one] [--printed-exponents] [--log-level LEVEL]
                     {cable,eigs,simulate,picard,energy-audit,force-compare}

Each command writes its tables into the output directory together with
manifest.json, and prints the manifest on stdout.
"""

import argparse
import logging
import math
import os
import sys
import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from utils.bridge_dynamics import (
    BridgeSystem,
    assemble_system,
    energy_bounds,
    energy_table,
    rhs_for,
    snapshot_table,
    theta_energy_share,
)
from utils.cable_profile import (
    CableParams,
    cable_tension_at_rest,
    compare_sag_conventions,
    profile_table,
    shape_ordering_diagnostic,
    solve_cable,
)
from utils.errors import BlowUpError, BridgeSimError, ParameterError
from utils.logging_setup import configure_logging
from utils.numerics_core import make_grid
from utils.outputs import RunOutputs, dump_json
from utils.restoring_forces import force_comparison_table, force_spread
from utils.scenarios import scenario_state
from utils.sim_config import (
    SimulationConfig,
    emit_config,
    load_config,
    with_debug_flags,
)
from utils.time_integration import (
    TrajectoryRecord,
    audit_total_44,
    energy_drift,
    galerkin_cauchy_check,
    horizon_ladder,
    integrate_steps,
    picard_solve,
    run,
)
from utils.weighted_spectral import basis_tables, reconstruct

load_dotenv()

logger = logging.getLogger("bridgesim")

OUT_DIR = os.getenv("BRIDGESIM_OUT_DIR")

# Thresholds reported next to the measured values
ENERGY_DRIFT_TOLERANCE = 1e-5
TOTAL_44_AUDIT_TOLERANCE = 1e-4
PICARD_MATCH_TOLERANCE = 1e-4
GALERKIN_MODE_COUNTS = (8, 16, 32)
GALERKIN_T_END = 1.0
GALERKIN_DT = 2e-4


def build_system(config: SimulationConfig) -> BridgeSystem:
    """Cable, bases, hanger law and nonlocal operator for the modal commands."""
    if abs(config.cable.span - math.pi) > 1e-12:
        raise ParameterError(
            f"cable.span must be pi for the modal commands, got {config.cable.span!r}"
        )
    grid = config.grid
    system = assemble_system(
        config.bridge,
        s0=config.cable.s0,
        panel_count=grid.panel_count,
        points_per_panel=grid.points_per_panel,
        fd_points=grid.fd_points,
        ivp_steps=config.cable.ivp_steps,
        tolerance=config.cable.tolerance,
        unit_weight=config.debug.xi_one,
    )
    logger.info("System assembled: n_modes=%d mode_flag=%s lambda_1=%.10g",
                system.n_modes, config.bridge.mode_flag, system.basis.lam[0])
    return system


def cmd_cable(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    bridge = config.bridge
    params = CableParams(H0=bridge.H0, m=bridge.m, load_mass=bridge.load_mass, g=bridge.g,
                         L=config.cable.span, s0=config.cable.s0)
    grid = make_grid(params.L, config.grid.panel_count, config.grid.points_per_panel)
    profile = solve_cable(params, config.cable.tolerance, grid, config.cable.ivp_steps)
    logger.info("Cable solved: apex=%.12g L_c=%.12g residual=%.3e",
                profile.apex_value, profile.L_c, profile.shoot_residual)
    outputs.table("profile.csv", profile_table(profile))

    ordering = shape_ordering_diagnostic(profile)
    comparison = compare_sag_conventions(config.compare.sag_span, config.compare.sag_ratio)
    outputs.json("sag_comparison.json", comparison.as_dict())

    return {
        "apex_value": profile.apex_value,
        "cable_length": profile.L_c,
        "shoot_residual": profile.shoot_residual,
        "tension_at_support": cable_tension_at_rest(profile, 0.0),
        "tension_at_midspan": cable_tension_at_rest(profile, 0.5 * params.L),
        "shape_ordering": ordering,
        "sag_confirmed_reading": comparison.confirmed_reading,
        "sag_midspan_gaps": {r.name: r.midspan_gap for r in comparison.readings},
    }


def cmd_eigs(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    system = build_system(config)
    basis = system.basis
    u_table, e_table, eigenvalues = basis_tables(basis)
    outputs.table("basis_u.csv", u_table)
    outputs.table("basis_e.csv", e_table)
    outputs.json("eigenvalues.json", eigenvalues)

    H0 = config.bridge.H0
    xi = basis.weight
    metrics = {
        "eigenvalues": eigenvalues,
        "fd_eigenvalues": [float(value) for value in basis.fd_lambda],
        "lambda_over_H0": [value / H0 for value in eigenvalues],
        "rayleigh_bounds": [H0 / float(np.max(xi)) ** 3, H0 / float(np.min(xi)) ** 3],
        "unit_weight": basis.unit_weight,
    }
    logger.info("Eigenvalues: lambda_1=%.10g lambda_%d=%.10g", eigenvalues[0],
                basis.n_modes, eigenvalues[-1])
    return metrics


def _write_trajectory(record: TrajectoryRecord, outputs: RunOutputs) -> None:
    outputs.table("trajectory.csv", snapshot_table(record.snapshots))
    outputs.table("energy.csv", energy_table(record.energy_times, record.energies))
    outputs.json_lines("events.jsonl", (event.as_dict() for event in record.events))


def _run_scenario(config: SimulationConfig, system: BridgeSystem,
                  outputs: RunOutputs) -> TrajectoryRecord:
    initial = scenario_state(config.initial.scenario, system, config.initial.amplitude,
                             config.initial.torsion_seed)
    logger.info("Running scenario %s with %s, dt=%g to t=%g", config.initial.scenario,
                config.integrator.method, config.integrator.dt, config.integrator.t_end)
    try:
        record = run(initial, system, config.integrator)
    except BlowUpError as e:
        if isinstance(e.partial, TrajectoryRecord) and e.partial.snapshots:
            _write_trajectory(e.partial, outputs)
        raise
    _write_trajectory(record, outputs)
    return record


def _trajectory_metrics(record: TrajectoryRecord) -> Dict[str, Any]:
    shares = [theta_energy_share(item) for item in record.energies]
    theta = np.array([np.max(np.abs(s.theta)) for s in record.snapshots])
    asymmetry = np.array([np.max(np.abs(s.p1 - s.p2)) for s in record.snapshots])
    slack = sum(1 for event in record.events if event.direction == "slack")
    return {
        "energy_drift": energy_drift(record),
        "total_44_audit": audit_total_44(record),
        "energy_bounds": energy_bounds(record.energies),
        "theta_energy_share": {"initial": shares[0], "final": shares[-1], "max": max(shares)},
        "max_abs_theta": float(theta.max()),
        "max_abs_p1_minus_p2": float(asymmetry.max()),
        "slack_events": slack,
        "taut_events": len(record.events) - slack,
    }


def cmd_simulate(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    system = build_system(config)
    metrics: Dict[str, Any] = {"scenario": config.initial.scenario}
    record = _run_scenario(config, system, outputs)
    metrics.update(_trajectory_metrics(record))
    share = metrics["theta_energy_share"]
    logger.info("Torsional energy share: initial=%.3e max=%.3e final=%.3e",
                share["initial"], share["max"], share["final"])
    return metrics


def cmd_energy_audit(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    system = build_system(config)
    metrics: Dict[str, Any] = {"scenario": config.initial.scenario}
    record = _run_scenario(config, system, outputs)
    drift = energy_drift(record)
    audit = audit_total_44(record)
    metrics.update({
        "energy_drift": drift,
        "total_44_audit": audit,
        "energy_bounds": energy_bounds(record.energies),
        "drift_tolerance": ENERGY_DRIFT_TOLERANCE,
        # excursion is reported only; the tolerance judges the secular trend
        "drift_tolerance_applies_to": "energy_drift.secular",
        "audit_tolerance": TOTAL_44_AUDIT_TOLERANCE,
        "audit_tolerance_applies_to": "total_44_audit.relative_mismatch",
        "drift_within_tolerance": drift["secular"] <= ENERGY_DRIFT_TOLERANCE,
        "audit_within_tolerance": audit["relative_mismatch"] <= TOTAL_44_AUDIT_TOLERANCE,
    })
    logger.info("Energy audit: secular drift=%.3e excursion=%.3e total_44 mismatch=%.3e",
                drift["secular"], drift["excursion"], audit["relative_mismatch"])
    return metrics


def cmd_picard(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    system = build_system(config)
    picard = config.picard
    initial = scenario_state(config.initial.scenario, system, config.initial.amplitude,
                             config.initial.torsion_seed)
    report = picard_solve(initial, system, picard)
    reference = integrate_steps(initial, rhs_for(system), picard.method,
                                picard.inner_dt, picard.n_steps)
    deviation = float(np.max(np.abs(report.trajectory.positions - reference.positions)))

    rows = [
        {"iteration": i + 1, "distance": d, "ratio": report.ratios[i - 1] if i > 0 else float("nan")}
        for i, d in enumerate(report.distances)
    ]
    outputs.table("picard_iterations.csv", pd.DataFrame(rows, columns=["iteration", "distance", "ratio"]))

    ladder = horizon_ladder(initial, system, picard)
    ratios = [ratio for _, ratio in ladder]
    galerkin = galerkin_cauchy_check(
        config.bridge, GALERKIN_MODE_COUNTS, GALERKIN_T_END, GALERKIN_DT,
        config.initial.scenario, config.initial.amplitude, s0=config.cable.s0,
        panel_count=config.grid.panel_count, points_per_panel=config.grid.points_per_panel,
        ivp_steps=config.cable.ivp_steps,
    )
    metrics = {
        "horizon": picard.horizon,
        "iterations": report.iterations,
        "distances": report.distances,
        "ratios": report.ratios,
        "fixed_point_deviation": deviation,
        "fixed_point_matches_verlet": deviation <= PICARD_MATCH_TOLERANCE,
        "horizon_ladder": [{"horizon": h, "ratio": r} for h, r in ladder],
        "ladder_monotone": all(a > b for a, b in zip(ratios, ratios[1:])),
        "galerkin_distances": galerkin,
        "galerkin_cauchy": galerkin["fine"] <= galerkin["coarse"],
    }
    outputs.json("picard.json", metrics)
    logger.info("Picard: %d iterations, fixed point deviation %.3e from %s",
                report.iterations, deviation, picard.method)
    return metrics


def cmd_force_compare(config: SimulationConfig, outputs: RunOutputs) -> Dict[str, Any]:
    system = build_system(config)
    basis = system.basis
    coeffs = np.zeros(basis.n_modes)
    coeffs[0] = config.compare.p_amplitude
    p = reconstruct(coeffs, basis, "weighted")
    p_prime = reconstruct(coeffs, basis, "weighted", derivative=1)
    table = force_comparison_table(system.profile, basis, config.bridge.AE, p, p_prime)
    outputs.table("force_compare.csv", table)
    spread = force_spread(table)
    logger.info("Cable force models: relative spread %.3e at p amplitude %g",
                spread, config.compare.p_amplitude)
    return {"p_amplitude": config.compare.p_amplitude, "relative_spread": spread}


COMMANDS: Dict[str, Callable[[SimulationConfig, RunOutputs], Dict[str, Any]]] = {
    "cable": cmd_cable,
    "eigs": cmd_eigs,
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "energy-audit": cmd_energy_audit,
    "force-compare": cmd_force_compare,
}


def seed_defaults(outputs: RunOutputs) -> None:
    """Write the default configuration as defaults.conf."""
    outputs.text("defaults.conf", emit_config(SimulationConfig()))


def execute(command: Optional[str], config: SimulationConfig, directory: str,
            seed_manifest: bool = False) -> Dict[str, Any]:
    """Run one command into directory and return its manifest."""
    outputs = RunOutputs(directory, config.output.formats)
    if seed_manifest:
        seed_defaults(outputs)
    if command is None:
        return outputs.manifest("seed-manifest", config, {})
    if command not in COMMANDS:
        raise ParameterError(f"unknown command {command!r}; expected one of {sorted(COMMANDS)}")

    start = time.time()
    metrics: Dict[str, Any] = {}
    try:
        metrics = COMMANDS[command](config, outputs)
    except BlowUpError as e:
        outputs.manifest(command, config, {"blow_up_time": e.time})
        raise
    logger.info("Command %s finished in %.2f seconds", command, time.time() - start)
    return outputs.manifest(command, config, metrics)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Spectral Galerkin simulator for a suspension bridge.")
    ap.add_argument("--config", help="Configuration document (default: $BRIDGESIM_CONFIG or built-in defaults)")
    ap.add_argument("--out", help="Output directory (default: $BRIDGESIM_OUT_DIR or output.directory)")
    ap.add_argument("--seed-manifest", action="store_true",
                    help="Write defaults.conf with every key at its default")
    ap.add_argument("--debug-xi-one", action="store_true",
                    help="Force the cable weight xi to 1 in the eigenproblem")
    ap.add_argument("--printed-exponents", action="store_true",
                    help="Use deck stiffness exponents k^2 and k instead of k^4 and k^2")
    ap.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default: $BRIDGESIM_LOG_LEVEL or INFO)")
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS), help="Command to run")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command is None and not args.seed_manifest:
        logger.error("Nothing to do: give a command or --seed-manifest")
        return 2

    try:
        config = with_debug_flags(load_config(args.config), xi_one=args.debug_xi_one,
                                  printed_exponents=args.printed_exponents)
        directory = args.out or OUT_DIR or config.output.directory
        manifest = execute(args.command, config, directory, args.seed_manifest)
    except BridgeSimError as e:
        logger.error("%s", e)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure: %s", e)
        return 1

    print(dump_json(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())
