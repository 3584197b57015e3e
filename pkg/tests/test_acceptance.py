"""End-to-end acceptance checks for the cooling and thermometry toolkit.

Each test prints exactly one ACCEPTANCE NN PASS/FAIL line; run pytest
with -rP (the repo default) to see the lines for passing tests too.
Tolerances are stated inline next to each assertion.
"""

import csv
import math
import os
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from omcool.analysis import (
    InputErrors,
    fit_lorentzian,
    phonon_number,
    phonon_uncertainty,
    subtract_background,
)
from omcool.cli import main
from omcool.core import (
    backaction_rate,
    cooled_occupancy,
    input_power_for_photons,
    intracavity_state,
    thermal_occupancy,
)
from omcool.detection import DetectorParams, noise_budget, synthesize_rsa_spectrum
from omcool.sidebands import SidebandProblem, closed_form_sidebands, solve_sidebands
from omcool.spectra import (
    PhotocurrentPSD,
    Spectrum,
    default_spectrum_grid,
    eit_reflection,
    photocurrent_psd,
    sb_lorentzians,
    scattering_elements,
    unitarity_defect,
)
from omcool.thermal import (
    ThermoOpticModel,
    bound_temperature_rise,
    default_damping_decomposition,
    default_index_table,
    thermo_optic_shift,
    total_intrinsic_damping,
)

from conftest import TWO_PI, make_device


def report(num, body):
    try:
        message = body()
    except BaseException as err:
        print(f"ACCEPTANCE {num:02d} FAIL: {type(err).__name__}: {err}")
        raise
    print(f"ACCEPTANCE {num:02d} PASS: {message}")


def drive_for(device, n_c, detuning=None):
    if detuning is None:
        detuning = device.mech.omega_m
    p_in = input_power_for_photons(device, detuning, n_c)
    return intracavity_state(device, detuning, p_in)


def forward_psd(device, n_c, points=4001, span=20.0):
    drive = drive_for(device, n_c)
    gamma = device.mech.gamma_i0 + backaction_rate(device, n_c)
    grid = default_spectrum_grid(device.mech.omega_m, gamma, span, points)
    elements = scattering_elements(device, drive, grid)
    return drive, photocurrent_psd(elements, device.bath.n_occ)


ACCEPTANCE_CONFIG = """\
[cavity]
omega_o = 195 THz
kappa = 500 MHz
contrast = 0.25

[mechanics]
omega_m = 3.68 GHz
gamma_i0 = 35 kHz
mass = 330 fg

[bath]
t_bath = 17.6 K

[coupling]
g = 910 kHz

[sweep]
n_c = 500, 2000

[detection]
g_e = 40000 V/W
g_edfa = 100
r_load = 50 Ohm
l_0 = 1 dB
l_1 = 1 dB
s_excess = 8.5e-5 V_per_rtHz
omega_li = 100 kHz

[acquisition]
averages = 30000
seed = 99
points = 2001
span_linewidths = 20

[thermal]
enabled = true
"""


def test_acceptance_01_cooperativity_calibration(device):
    def body():
        n_c_unity = device.mech.gamma_i0 / backaction_rate(device, 1.0)
        assert abs(n_c_unity - 5.3) <= 0.1
        return f"unit cooperativity at n_c = {n_c_unity:.4f} (target 5.3 +- 0.1)"

    report(1, body)


def test_acceptance_02_quantum_limits(device):
    def body():
        result = cooled_occupancy(device, 2000.0)
        n_b = device.bath.n_occ
        assert abs(result.n_min - 1.15e-3) <= 1e-5
        assert abs(n_b - 99.7) <= 0.5

        import mpmath as mp

        mp.mp.dps = 50
        k_b = mp.mpf("1.380649e-23")
        hbar = mp.mpf("1.054571817e-34")
        om_m = 2 * mp.pi * mp.mpf("3.68e9")
        kappa = 2 * mp.pi * mp.mpf("500e6")
        g = 2 * mp.pi * mp.mpf("910e3")
        gamma_i = 2 * mp.pi * mp.mpf("35e3")
        coop = (4 * g**2 * 2000 / kappa) / gamma_i
        oracle = (k_b * mp.mpf("17.6") / (hbar * om_m)) / (1 + coop) + (
            kappa / (4 * om_m)
        ) ** 2
        rel = abs(result.n_bar - float(oracle)) / float(oracle)
        assert rel <= 1e-3
        assert result.n_bar == pytest.approx(0.26370, rel=1e-3)
        return (
            f"n_min = {result.n_min:.6g}, n_b(17.6 K) = {n_b:.4f}, ideal "
            f"n_bar(2000) = {result.n_bar:.5f} vs 50-digit oracle (rel {rel:.1e})"
        )

    report(2, body)


def test_acceptance_03_thermal_pipeline_bracket(device, tmp_path):
    def body():
        decomp = default_damping_decomposition(device.mech.gamma_i0)
        breakdown = total_intrinsic_damping(2000.0, decomp, device.mech.omega_m)
        model = cooled_occupancy(
            device, 2000.0, gamma_i=breakdown.gamma_i_total, n_bath=breakdown.n_bath
        )
        assert 0.6 <= model.n_bar_rate <= 1.1

        cfg = tmp_path / "run.cfg"
        cfg.write_text(ACCEPTANCE_CONFIG)
        outdir = tmp_path / "curve"
        assert main(["cool-curve", str(cfg), "--outdir", str(outdir)]) == 0
        with open(outdir / "cooling_curve.csv", newline="") as fh:
            top = [row for row in csv.DictReader(fh)][-1]
        measured = float(top["n_bar"])
        assert float(top["n_c"]) == 2000.0
        assert int(top["ok"]) == 1
        assert 0.6 <= measured <= 1.1
        return (
            f"top-drive occupancy in [0.6, 1.1]: thermal model {model.n_bar_rate:.4f}, "
            f"pipeline estimate {measured:.4f}"
        )

    report(3, body)


def test_acceptance_04_closed_loop_thermometry(bench_device, bare_detector):
    def body():
        start = time.monotonic()
        targets = (0.5, 1.0, 5.0, 50.0)
        worst_recovery = 0.0
        worst_budget_gap = 0.0
        analytic_at_top = math.nan
        for i, target in enumerate(targets):
            n_c = brentq(
                lambda x: cooled_occupancy(bench_device, x).n_bar_rate - target,
                0.5,
                1.0e5,
            )
            drive, psd = forward_psd(bench_device, n_c)
            budget = noise_budget(
                bench_device,
                drive,
                bench_device.mech.gamma_i0,
                psd.n_bar,
                bare_detector,
            )
            significance = (psd.n_bar / budget.n_imp) * math.sqrt(1000.0)
            assert significance >= 10.0  # 20 dB detection floor precondition

            synth = synthesize_rsa_spectrum(
                psd, bench_device, drive, bare_detector, averages=1000, seed=1000 + i
            )
            flat = PhotocurrentPSD(
                spectrum=Spectrum(
                    omega=psd.spectrum.omega.copy(),
                    values=np.ones_like(psd.spectrum.values),
                    units="shot",
                ),
                n_bar=0.0,
                n_bath=0.0,
                gamma_total=psd.gamma_total,
            )
            background = synthesize_rsa_spectrum(
                flat, bench_device, drive, bare_detector, averages=1000, seed=2000 + i
            )
            fit = fit_lorentzian(
                subtract_background(synth.spectrum, background.spectrum)
            )
            result = phonon_number(
                fit, bench_device, drive, bare_detector, errors=InputErrors()
            )
            recovery = abs(result.n_bar / target - 1.0)
            assert recovery <= 0.02  # 2% closed-loop accuracy
            worst_recovery = max(worst_recovery, recovery)

            unc = phonon_uncertainty(result, n_draws=10000, seed=i)
            gap = abs(unc.monte_carlo / unc.analytic - 1.0)
            assert gap <= 0.15  # analytic budget vs Monte Carlo
            worst_budget_gap = max(worst_budget_gap, gap)
            if target == 0.5:
                analytic_at_top = unc.analytic
                assert 0.040 <= unc.analytic <= 0.050  # 4.5% +- 0.5%

        elapsed = time.monotonic() - start
        assert elapsed < 60.0
        return (
            f"occupancy recovered at {{0.5, 1, 5, 50}} within 2% (worst "
            f"{100 * worst_recovery:.2f}%), analytic budget within 15% of Monte "
            f"Carlo (worst {100 * worst_budget_gap:.1f}%), top-drive total "
            f"{100 * analytic_at_top:.2f}%, {elapsed:.1f} s"
        )

    report(4, body)


def test_acceptance_05_eit_linewidth_agreement(device):
    def body():
        worst = 0.0
        for n_c in (1.0, 10.0, 100.0, 1000.0, 2000.0):
            gamma_model = device.mech.gamma_i0 + backaction_rate(device, n_c)
            drive = drive_for(device, n_c)

            span = max(40.0 * gamma_model, TWO_PI * 10e6)
            probe = np.linspace(
                device.mech.omega_m - 0.5 * span,
                device.mech.omega_m + 0.5 * span,
                20001,
            )
            window = eit_reflection(device, drive, probe)

            _, psd = forward_psd(device, n_c)
            fit = fit_lorentzian(
                subtract_background(
                    psd.spectrum,
                    Spectrum(
                        omega=psd.spectrum.omega.copy(),
                        values=np.ones_like(psd.spectrum.values),
                        units="shot",
                    ),
                )
            )
            for value in (window.dip_width, fit.gamma):
                rel = abs(value / gamma_model - 1.0)
                assert rel <= 0.01
                worst = max(worst, rel)
            cross = abs(window.dip_width / fit.gamma - 1.0)
            assert cross <= 0.01
            worst = max(worst, cross)
        return (
            "transparency-window width and cooled-line width agree with "
            f"gamma_i + 4 g^2 n_c / kappa within 1% over n_c in [1, 2000] "
            f"(worst {worst:.2e})"
        )

    report(5, body)


def test_acceptance_06_spectral_identities(device):
    def body():
        n_c = 500.0
        drive = drive_for(device, n_c)
        gamma = device.mech.gamma_i0 + backaction_rate(device, n_c)
        grid = default_spectrum_grid(device.mech.omega_m, gamma, 20.0, 10000)
        elements = scattering_elements(device, drive, grid)
        defect = unitarity_defect(elements)
        assert defect <= 1e-12

        n_bar = 0.85
        red = sb_lorentzians(n_bar, gamma, device.mech.omega_m, grid, side="red")
        blue = sb_lorentzians(n_bar, gamma, device.mech.omega_m, grid, side="blue")
        ratio = np.trapezoid(blue.values, blue.omega) / np.trapezoid(
            red.values, red.omega
        )
        expect = (n_bar + 1.0) / n_bar
        rel = abs(ratio / expect - 1.0)
        assert rel <= 1e-9
        return (
            f"scattering unitarity defect {defect:.2e} on a 10^4-point grid; "
            f"sideband area ratio matches (n+1)/n to {rel:.1e}"
        )

    report(6, body)


def test_acceptance_07_ladder_solver(device):
    def body():
        rng = np.random.default_rng(20260819)
        omega_m = device.mech.omega_m
        g = device.g
        worst = 0.0
        for _ in range(1000):
            f = 10.0 ** rng.uniform(-6.0, -4.0)
            kappa = rng.uniform(0.05, 0.5) * omega_m
            detuning = rng.uniform(0.6, 1.4) * omega_m
            kappa_e = rng.uniform(0.05, 1.0) * kappa
            cavity = type(device.cavity)(
                omega_o=device.cavity.omega_o, kappa=kappa, kappa_e=kappa_e
            )
            system = type(device)(
                cavity=cavity, mech=device.mech, g=g, bath=device.bath
            )
            drive = intracavity_state(
                system, detuning, input_power_for_photons(system, detuning, 100.0)
            )
            problem = SidebandProblem(
                cavity=cavity,
                drive=drive,
                omega_m=omega_m,
                g=g,
                beta_0=complex(f * omega_m / g),
            )
            solution = solve_sidebands(problem)
            a_0, a_plus, a_minus = closed_form_sidebands(problem)
            for p, reference in ((0, a_0), (1, a_plus), (-1, a_minus)):
                err = abs(solution.component(p) - reference) / abs(reference)
                worst = max(worst, err)
        assert worst <= 1e-6

        strong = SidebandProblem(
            cavity=device.cavity,
            drive=drive_for(device, 2000.0),
            omega_m=omega_m,
            g=g,
            beta_0=200.0 + 0.0j,
        )
        reference = solve_sidebands(strong, order=12)
        errors = []
        for order in range(1, 7):
            trial = solve_sidebands(strong, order=order)
            err = abs(trial.component(1) - reference.component(1)) / abs(
                reference.component(1)
            )
            errors.append(max(err, 1e-14))  # floor at double-precision noise
        assert all(a >= b for a, b in zip(errors, errors[1:]))
        assert errors[0] > 100.0 * errors[-1]
        return (
            f"ladder matches the weak-modulation closed form to {worst:.2e} over "
            f"1000 draws; truncation error falls monotonically "
            f"{errors[0]:.1e} -> {errors[-1]:.1e} at beta_0 = 200"
        )

    report(7, body)


def test_acceptance_08_thermo_optics():
    def body():
        table = default_index_table()
        model = ThermoOpticModel()
        _, d_lambda = thermo_optic_shift(300.0, model, table)
        assert d_lambda == pytest.approx(12.5e-9, rel=0.05)
        hi = bound_temperature_rise(15.0e-12, model, table, mode="max")
        lo = bound_temperature_rise(15.0e-12, model, table, mode="min")
        assert hi == pytest.approx(16.8, rel=0.03)
        assert lo == pytest.approx(7.8, rel=0.03)
        return (
            f"base-to-room shift {d_lambda * 1e9:.3f} nm (target 12.5 +- 5%); "
            f"15.0 pm shift brackets a rise of [{lo:.2f}, {hi:.2f}] K "
            f"(targets 7.8 and 16.8 +- 3%)"
        )

    report(8, body)


def test_acceptance_09_detection_budget(device, detector):
    def body():
        decomp = default_damping_decomposition(device.mech.gamma_i0)
        breakdown = total_intrinsic_damping(2000.0, decomp, device.mech.omega_m)
        model = cooled_occupancy(
            device, 2000.0, gamma_i=breakdown.gamma_i_total, n_bath=breakdown.n_bath
        )
        drive = drive_for(device, 2000.0)

        ideal = noise_budget(
            device,
            drive,
            breakdown.gamma_i_total,
            model.n_bar_rate,
            detector,
            s_excess=0.0,
            signal_efficiency=10.0 ** (-0.1),
        )
        assert ideal.snr_predicted == ideal.snr_shot  # bit-exact at zero excess

        real = noise_budget(
            device,
            drive,
            breakdown.gamma_i_total,
            model.n_bar_rate,
            detector,
            s_excess=8.5e-5,
            signal_efficiency=10.0 ** (-0.1),
        )
        assert 20.0 / 1.5 <= real.n_imp <= 20.0 * 1.5
        return (
            "zero excess noise leaves the predicted SNR bit-identical to the "
            f"shot-limited value; full-chain imprecision n_imp = {real.n_imp:.2f} "
            "(target 20 within x1.5)"
        )

    report(9, body)


def test_acceptance_10_determinism(tmp_path):
    def body():
        cfg = tmp_path / "run.cfg"
        cfg.write_text(ACCEPTANCE_CONFIG)
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert main(["simulate", str(cfg), "--outdir", str(first)]) == 0
        assert main(["simulate", str(cfg), "--outdir", str(second)]) == 0
        names = sorted(os.listdir(first))
        assert sorted(os.listdir(second)) == names
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
        return (
            f"two simulate runs of the same config produced byte-identical "
            f"output ({len(names)} files)"
        )

    report(10, body)
