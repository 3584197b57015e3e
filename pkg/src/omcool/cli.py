"""Command-line pipelines.

Subcommands:

  simulate         forward-model a drive sweep into analyzer traces
  analyze          invert traces from a run directory into occupancies
  cool-curve       simulate + analyze + closed-form reference columns
  eit              probe-reflection sweep and window widths
  budget           detection noise budget across the sweep
  validate-config  parse a config and echo the resolved parameters

Exit codes: 0 success, 1 configuration error, 2 unreadable or inconsistent
data, 3 completed with some points failed (flagged in the outputs).

Output directory precedence: --outdir flag, then OMCOOL_OUTDIR in the
environment, then the [output] section of the config. Spectra depend only
on the config (including its seed), never on wall time or worker count,
so a rerun is byte-identical.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, analysis, detection, specio, spectra, thermal
from .config import ConfigError, RunConfig, load_config
from .core import (
    BathState,
    CavityParams,
    DriveState,
    HBAR,
    MechParams,
    SystemParams,
    cooled_occupancy,
    input_power_for_photons,
    intracavity_state,
)

TWO_PI = 2.0 * math.pi


def _point_seed(seed: int, index: int, channel: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(index, channel))
    return int(ss.generate_state(1, np.uint64)[0])


def _resolve_outdir(explicit: str | None, config: RunConfig | None) -> str:
    outdir = explicit or os.environ.get("OMCOOL_OUTDIR")
    if not outdir and config is not None:
        outdir = config.output_dir
    if not outdir:
        raise ConfigError("no output directory: pass --outdir or set [output] directory")
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _environment_at(config: RunConfig, n_c: float) -> tuple[float, float, float]:
    """(gamma_i, t_device, n_bath) at one drive point.

    With [thermal] enabled the calibrated damping decomposition supplies
    drive-dependent heating and damping; otherwise the static values.
    """
    system = config.system
    if config.thermal_enabled:
        decomp = thermal.default_damping_decomposition(system.mech.gamma_i0)
        decomp = thermal.DampingDecomposition(
            gamma_i0=decomp.gamma_i0,
            t_base=system.bath.t_bath,
            thermal=thermal.PolynomialDamping(
                t_ref=system.bath.t_bath, coeff=decomp.thermal.coeff, power=decomp.thermal.power
            ),
            photon=decomp.photon,
            heating=decomp.heating,
        )
        breakdown = thermal.total_intrinsic_damping(n_c, decomp, system.mech.omega_m)
        return breakdown.gamma_i_total, breakdown.t_device, breakdown.n_bath
    return system.mech.gamma_i0, system.bath.t_bath, system.bath.n_occ


def _drive_at(config: RunConfig, n_c: float) -> DriveState:
    system = config.system
    detuning = system.mech.omega_m
    p_in = input_power_for_photons(system, detuning, n_c)
    return intracavity_state(system, detuning, p_in)


def _signal_metadata(config: RunConfig, index: int, n_c: float, drive: DriveState,
                     gamma_i: float, seed: int) -> dict:
    system = config.system
    return {
        "kind": "rsa_psd",
        "point_index": index,
        "n_c": float(n_c),
        "p_in_w": drive.p_in,
        "detuning_hz": drive.detuning / TWO_PI,
        "omega_o_hz": system.cavity.omega_o / TWO_PI,
        "kappa_hz": system.cavity.kappa / TWO_PI,
        "kappa_e_hz": system.cavity.kappa_e / TWO_PI,
        "omega_m_hz": system.mech.omega_m / TWO_PI,
        "mass_kg": system.mech.mass,
        "g_hz": system.g / TWO_PI,
        "gamma_i_hz_assumed": gamma_i / TWO_PI,
        "averages": config.averages,
        "seed": seed,
        "r_load_ohm": config.detector.r_load,
        "g_e_v_per_w": config.detector.volts_per_watt,
        "g_edfa": config.detector.edfa_gain,
        "l_1": config.l_1,
        "s_excess_v_rthz": config.s_excess,
    }


def _simulate_point(config: RunConfig, index: int, n_c: float, outdir: str) -> dict:
    system = config.system
    gamma_i, t_device, n_bath = _environment_at(config, n_c)
    drive = _drive_at(config, n_c)
    elements = spectra.scattering_elements(
        system, drive, spectra.default_spectrum_grid(
            system.mech.omega_m,
            gamma_i + 4.0 * system.g**2 * n_c / system.cavity.kappa,
            config.span_linewidths,
            config.points,
        ),
        gamma_i=gamma_i,
    )
    psd = spectra.photocurrent_psd(elements, n_bath)
    seed_signal = _point_seed(config.seed, index, 0)
    seed_background = _point_seed(config.seed, index, 1)
    synth = detection.synthesize_rsa_spectrum(
        psd,
        system,
        drive,
        config.detector,
        s_excess=config.s_excess,
        signal_efficiency=config.l_1,
        averages=config.averages,
        seed=seed_signal,
    )
    flat = spectra.PhotocurrentPSD(
        spectrum=spectra.Spectrum(
            omega=psd.spectrum.omega.copy(),
            values=np.ones_like(psd.spectrum.values),
            units="shot",
        ),
        n_bar=0.0,
        n_bath=0.0,
        gamma_total=psd.gamma_total,
    )
    background = detection.synthesize_rsa_spectrum(
        flat,
        system,
        drive,
        config.detector,
        s_excess=config.s_excess,
        signal_efficiency=config.l_1,
        averages=config.averages,
        seed=seed_background,
    )
    stem = f"point_{index:03d}"
    signal_name = f"{stem}_signal.csv"
    background_name = f"{stem}_background.csv"
    truth_name = f"{stem}_truth.json"
    specio.write_spectrum_csv(
        os.path.join(outdir, signal_name),
        synth.spectrum,
        _signal_metadata(config, index, n_c, drive, gamma_i, seed_signal),
    )
    bg_meta = _signal_metadata(config, index, n_c, drive, gamma_i, seed_background)
    bg_meta["kind"] = "rsa_background"
    specio.write_spectrum_csv(
        os.path.join(outdir, background_name), background.spectrum, bg_meta
    )
    specio.write_json(
        os.path.join(outdir, truth_name),
        {
            "n_c": float(n_c),
            "n_bar": psd.n_bar,
            "n_bath": n_bath,
            "t_device_k": t_device,
            "gamma_i_hz": gamma_i / TWO_PI,
            "gamma_total_hz": psd.gamma_total / TWO_PI,
            "omega_m_hz": system.mech.omega_m / TWO_PI,
            "seed_signal": seed_signal,
            "seed_background": seed_background,
        },
    )
    return {
        "index": index,
        "n_c": float(n_c),
        "signal": signal_name,
        "background": background_name,
        "truth": truth_name,
        "seed_signal": seed_signal,
        "seed_background": seed_background,
    }


def _run_points(worker, config: RunConfig, outdir: str, jobs: int) -> list[dict]:
    tasks = list(enumerate(config.n_c_values))
    if jobs <= 1:
        return [worker(config, idx, n_c, outdir) for idx, n_c in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(worker, config, idx, n_c, outdir) for idx, n_c in tasks]
        return [f.result() for f in futures]


def cmd_simulate(config: RunConfig, outdir: str, jobs: int = 1) -> int:
    entries = _run_points(_simulate_point, config, outdir, jobs)
    entries.sort(key=lambda e: e["index"])
    specio.write_json(
        os.path.join(outdir, "run_manifest.json"),
        {
            "kind": "rsa_sweep",
            "package_version": __version__,
            "config_sha256": config.sha256,
            "seed": config.seed,
            "averages": config.averages,
            "points": entries,
        },
    )
    return 0


def _system_from_metadata(meta: dict) -> tuple[SystemParams, DriveState, float]:
    cavity = CavityParams(
        omega_o=TWO_PI * meta["omega_o_hz"],
        kappa=TWO_PI * meta["kappa_hz"],
        kappa_e=TWO_PI * meta["kappa_e_hz"],
    )
    gamma_i = TWO_PI * meta["gamma_i_hz_assumed"]
    mech = MechParams(
        omega_m=TWO_PI * meta["omega_m_hz"],
        gamma_i0=gamma_i,
        mass=meta["mass_kg"],
    )
    # bath here is a placeholder; analysis infers the real temperature
    system = SystemParams(
        cavity=cavity, mech=mech, g=TWO_PI * meta["g_hz"], bath=BathState(0.0, 0.0)
    )
    drive = intracavity_state(system, TWO_PI * meta["detuning_hz"], meta["p_in_w"])
    return system, drive, gamma_i


def _analyze_point(signal_path: str, background_path: str) -> dict:
    signal, meta = specio.read_spectrum_csv(signal_path)
    background, bg_meta = specio.read_spectrum_csv(background_path)
    for key in ("n_c", "p_in_w", "gamma_i_hz_assumed"):
        if not math.isclose(meta[key], bg_meta[key], rel_tol=1e-12):
            raise ValueError(f"signal/background metadata disagree on {key}")
    system, drive, gamma_i = _system_from_metadata(meta)
    detector = detection.DetectorParams(
        r_load=meta["r_load_ohm"],
        edfa_gain=meta["g_edfa"],
        g_e=meta["g_e_v_per_w"],
    )
    diff = analysis.subtract_background(signal, background)
    row = {
        "n_c": meta["n_c"],
        "n_bar": math.nan,
        "n_bar_sigma": math.nan,
        "gamma_hz": math.nan,
        "gamma_i_hz_assumed": meta["gamma_i_hz_assumed"],
        "cooperativity": math.nan,
        "t_bath_inferred_k": math.nan,
        "ok": 0,
        "note": "",
    }
    try:
        fit = analysis.fit_lorentzian(diff)
        result = analysis.phonon_number(
            fit,
            system,
            drive,
            detector,
            gamma_i=gamma_i,
            signal_efficiency=meta["l_1"],
            errors=analysis.InputErrors(),
        )
    except (RuntimeError, ValueError) as err:
        row["note"] = str(err)
        return row
    row.update(
        n_bar=result.n_bar,
        n_bar_sigma=result.n_bar_sigma,
        gamma_hz=fit.gamma / TWO_PI,
        cooperativity=result.cooperativity,
        t_bath_inferred_k=result.t_bath_inferred,
        ok=1,
    )
    return row


_THERMOMETRY_HEADER = [
    "n_c",
    "n_bar",
    "n_bar_sigma",
    "gamma_hz",
    "gamma_i_hz_assumed",
    "cooperativity",
    "t_bath_inferred_k",
    "ok",
]


def cmd_analyze(rundir: str, outdir: str | None = None) -> int:
    manifest_path = os.path.join(rundir, "run_manifest.json")
    if not os.path.exists(manifest_path):
        print(f"error: no run_manifest.json in {rundir}", file=sys.stderr)
        return 2
    manifest = specio.read_json(manifest_path)
    outdir = outdir or rundir
    os.makedirs(outdir, exist_ok=True)
    rows = []
    notes = []
    for entry in manifest.get("points", []):
        signal_path = os.path.join(rundir, entry["signal"])
        background_path = os.path.join(rundir, entry["background"])
        row = _analyze_point(signal_path, background_path)
        rows.append(row)
        if not row["ok"]:
            notes.append(f"point {entry['index']} (n_c={row['n_c']:g}): {row['note']}")
    specio.write_table_csv(
        os.path.join(outdir, "thermometry.csv"),
        _THERMOMETRY_HEADER,
        [tuple(row[k] for k in _THERMOMETRY_HEADER) for row in rows],
    )
    lines = [
        "occupancy thermometry report",
        f"run: {manifest.get('config_sha256', 'unknown')[:12]}",
        f"points: {len(rows)}, fitted: {sum(r['ok'] for r in rows)}",
        "",
        f"{'n_c':>10} {'n_bar':>12} {'sigma':>10} {'gamma_Hz':>14} {'T_bath_K':>10}",
    ]
    for row in rows:
        lines.append(
            f"{row['n_c']:>10.4g} {row['n_bar']:>12.5g} {row['n_bar_sigma']:>10.3g} "
            f"{row['gamma_hz']:>14.6g} {row['t_bath_inferred_k']:>10.4g}"
        )
    if notes:
        lines.append("")
        lines.append("failed points:")
        lines.extend("  " + note for note in notes)
    lines.append("")
    lines.append("rows with ok=0 carry NaN estimates; their fitted linewidth did not")
    lines.append("resolve the backaction broadening above the assumed gamma_i.")
    with open(os.path.join(outdir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return 3 if notes else 0


def cmd_cool_curve(config: RunConfig, outdir: str, jobs: int = 1) -> int:
    status = cmd_simulate(config, outdir, jobs)
    if status != 0:
        return status
    status = cmd_analyze(outdir, outdir)
    if status not in (0, 3):
        return status
    manifest = specio.read_json(os.path.join(outdir, "run_manifest.json"))
    measured: dict[float, dict] = {}
    with open(os.path.join(outdir, "thermometry.csv"), encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = dict(zip(header, line.strip().split(",")))
            measured[float(cells["n_c"])] = cells
    rows = []
    for entry in manifest["points"]:
        n_c = entry["n_c"]
        system = config.system
        ideal = cooled_occupancy(system, n_c)
        gamma_i, _, n_bath = _environment_at(config, n_c)
        model = cooled_occupancy(system, n_c, gamma_i=gamma_i, n_bath=n_bath)
        cells = measured[n_c]
        rows.append(
            (
                n_c,
                float(cells["n_bar"]),
                float(cells["n_bar_sigma"]),
                ideal.n_bar,
                model.n_bar_rate,
                float(cells["gamma_hz"]),
                float(cells["gamma_i_hz_assumed"]),
                float(cells["t_bath_inferred_k"]),
                int(cells["ok"]),
            )
        )
    specio.write_table_csv(
        os.path.join(outdir, "cooling_curve.csv"),
        [
            "n_c",
            "n_bar",
            "n_bar_sigma",
            "n_bar_ideal",
            "n_bar_model",
            "gamma_hz",
            "gamma_i_hz_assumed",
            "t_bath_inferred_k",
            "ok",
        ],
        rows,
    )
    return status


def _eit_point(config: RunConfig, index: int, n_c: float, outdir: str) -> dict:
    system = config.system
    gamma_i, _, _ = _environment_at(config, n_c)
    drive = _drive_at(config, n_c)
    gamma_total = gamma_i + 4.0 * system.g**2 * n_c / system.cavity.kappa
    grid = spectra.default_spectrum_grid(
        system.mech.omega_m, gamma_total, config.span_linewidths, config.points
    )
    window = spectra.eit_reflection(
        system, drive, grid, omega_li=config.omega_li, gamma_i=gamma_i
    )
    name = f"eit_{index:03d}.csv"
    spectrum = spectra.Spectrum(omega=grid, values=window.reflect2, units="reflection")
    specio.write_spectrum_csv(
        os.path.join(outdir, name),
        spectrum,
        {
            "kind": "eit_reflection",
            "point_index": index,
            "n_c": float(n_c),
            "p_in_w": drive.p_in,
            "gamma_i_hz_assumed": gamma_i / TWO_PI,
            "omega_li_hz": config.omega_li / TWO_PI,
        },
    )
    center = int(np.argmin(np.abs(grid - window.dip_center)))
    return {
        "index": index,
        "n_c": float(n_c),
        "file": name,
        "p_in_w": drive.p_in,
        "width_hz": window.dip_width / TWO_PI,
        "width_halfdepth_hz": window.dip_width_halfdepth / TWO_PI,
        "gamma_model_hz": window.gamma_total_model / TWO_PI,
        "dip_center_hz": window.dip_center / TWO_PI,
        "reflect2_dip": window.reflect2_dip,
        "tau_center_s": float(window.group_delay[center]),
        "lockin_valid": int(window.lockin_valid),
    }


_EIT_HEADER = [
    "n_c",
    "p_in_w",
    "width_hz",
    "width_halfdepth_hz",
    "gamma_model_hz",
    "dip_center_hz",
    "reflect2_dip",
    "tau_center_s",
    "lockin_valid",
]


def cmd_eit(config: RunConfig, outdir: str, jobs: int = 1) -> int:
    entries = _run_points(_eit_point, config, outdir, jobs)
    entries.sort(key=lambda e: e["index"])
    specio.write_table_csv(
        os.path.join(outdir, "eit_summary.csv"),
        _EIT_HEADER,
        [tuple(e[k] for k in _EIT_HEADER) for e in entries],
    )
    return 0


_BUDGET_HEADER = [
    "n_c",
    "p_in_w",
    "gamma_i_hz",
    "gamma_om_hz",
    "n_bar_model",
    "s_shot_w_rthz",
    "s_amp_v_rthz",
    "s_background_v_rthz",
    "snr_shot",
    "snr_predicted",
    "n_imp",
    "n_imp_ideal",
]


def cmd_budget(config: RunConfig, outdir: str) -> int:
    rows = []
    system = config.system
    for n_c in config.n_c_values:
        gamma_i, _, n_bath = _environment_at(config, n_c)
        drive = _drive_at(config, n_c)
        model = cooled_occupancy(system, n_c, gamma_i=gamma_i, n_bath=n_bath)
        budget = detection.noise_budget(
            system,
            drive,
            gamma_i,
            model.n_bar_rate,
            config.detector,
            s_excess=config.s_excess,
            signal_efficiency=config.l_1,
        )
        rows.append(
            (
                float(n_c),
                drive.p_in,
                gamma_i / TWO_PI,
                model.gamma_om / TWO_PI,
                model.n_bar_rate,
                budget.s_shot,
                budget.s_shot_amplified,
                budget.s_background,
                budget.snr_shot,
                budget.snr_predicted,
                budget.n_imp,
                budget.n_imp_ideal,
            )
        )
    specio.write_table_csv(os.path.join(outdir, "budget.csv"), _BUDGET_HEADER, rows)
    return 0


def cmd_validate(path: str) -> int:
    try:
        config = load_config(path)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 2
    system = config.system
    cav, mech = system.cavity, system.mech
    print(f"config {config.sha256[:12]} parsed cleanly")
    print(f"  cavity:   omega_o/2pi = {cav.omega_o / TWO_PI:.6g} Hz, "
          f"kappa/2pi = {cav.kappa / TWO_PI:.6g} Hz, kappa_e/kappa = {cav.kappa_e / cav.kappa:.4f}")
    print(f"  mech:     omega_m/2pi = {mech.omega_m / TWO_PI:.6g} Hz, "
          f"gamma_i0/2pi = {mech.gamma_i0 / TWO_PI:.6g} Hz, Q = {mech.q_factor:.4g}")
    print(f"  bath:     T = {system.bath.t_bath:.4g} K, n_b = {system.bath.n_occ:.4g}")
    print(f"  coupling: g/2pi = {system.g / TWO_PI:.6g} Hz")
    print(f"  sweep:    {config.n_c_values.size} points, "
          f"n_c in [{config.n_c_values.min():.6g}, {config.n_c_values.max():.6g}]")
    print(f"  acquisition: averages = {config.averages}, points = {config.points}, "
          f"seed = {config.seed}")
    print(f"  thermal model: {'enabled' if config.thermal_enabled else 'disabled'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="omcool",
        description="Sideband-cooling forward models and calibrated thermometry.",
    )
    parser.add_argument("--version", action="version", version=f"omcool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name: str, help_text: str, jobs: bool) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="run configuration file")
        p.add_argument("--outdir", help="output directory (overrides config)")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        return p

    add_config_cmd("simulate", "forward-model a drive sweep", jobs=True)
    add_config_cmd("cool-curve", "simulate, analyze and compare", jobs=True)
    add_config_cmd("eit", "probe-reflection window sweep", jobs=True)
    add_config_cmd("budget", "detection noise budget", jobs=False)

    p_analyze = sub.add_parser("analyze", help="invert a simulated or measured run")
    p_analyze.add_argument("rundir", help="directory holding run_manifest.json")
    p_analyze.add_argument("--outdir", help="where to write results (default: rundir)")

    p_validate = sub.add_parser("validate-config", help="parse and echo a config")
    p_validate.add_argument("config", help="run configuration file")

    args = parser.parse_args(argv)

    if args.command == "validate-config":
        return cmd_validate(args.config)
    if args.command == "analyze":
        try:
            return cmd_analyze(args.rundir, args.outdir)
        except (OSError, ValueError) as err:
            print(f"data error: {err}", file=sys.stderr)
            return 2

    try:
        config = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 2

    try:
        outdir = _resolve_outdir(args.outdir, config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1

    try:
        if args.command == "simulate":
            return cmd_simulate(config, outdir, args.jobs)
        if args.command == "cool-curve":
            return cmd_cool_curve(config, outdir, args.jobs)
        if args.command == "eit":
            return cmd_eit(config, outdir, args.jobs)
        if args.command == "budget":
            return cmd_budget(config, outdir)
    except (OSError, ValueError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
