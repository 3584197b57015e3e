"""Detection chain: amplifier, photoreceiver, spectrum analyzer, lock-in.

The chain referred to throughout: cavity output passes the collection
loss, is boosted by an optical amplifier with power gain G, lands on a
photoreceiver with conversion g_e volts per watt, and the voltage PSD is
read on a load r_load. Spectra synthesized here are reported as
S_VV / r_load in W/Hz, the convention the inverse analysis in
`omcool.analysis` assumes.

Shot noise of the carrier sets the background floor; excess amplifier
noise enters in quadrature as a voltage density s_excess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import HBAR, DriveState, SystemParams
from .spectra import PhotocurrentPSD, Spectrum


@dataclass(frozen=True)
class DetectorParams:
    """Photoreceiver and amplifier constants.

    edfa_gain is the optical power gain ahead of the receiver. g_e, when
    given, overrides responsivity * transimpedance; the split fields exist
    because calibrations quote them separately.
    """

    responsivity: float = 1.0       # A / W
    transimpedance: float = 4.0e4   # V / A
    r_load: float = 50.0            # ohm
    edfa_gain: float = 1.0          # optical power gain
    g_e: float | None = None        # V / W, overrides the product

    def __post_init__(self) -> None:
        if self.responsivity <= 0.0 or self.transimpedance <= 0.0:
            raise ValueError("responsivity and transimpedance must be positive")
        if self.r_load <= 0.0:
            raise ValueError("r_load must be positive")
        if self.edfa_gain <= 0.0:
            raise ValueError("edfa_gain must be positive")
        if self.g_e is not None and self.g_e <= 0.0:
            raise ValueError("g_e must be positive")

    @property
    def volts_per_watt(self) -> float:
        return self.g_e if self.g_e is not None else self.responsivity * self.transimpedance


def shot_noise_level(p_opt: float, omega_o: float) -> float:
    """Optical-power-referred shot noise density sqrt(2 hbar omega P), W/rtHz."""
    if p_opt < 0.0:
        raise ValueError("p_opt must be non-negative")
    return math.sqrt(2.0 * HBAR * omega_o * p_opt)


def amplified_shot_level(p_opt: float, omega_o: float, detector: DetectorParams) -> float:
    """Voltage density of the shot floor after gain, V/rtHz.

    The optical amplifier multiplies the power by its gain, so the
    carrier-beat voltage density scales with the full power gain, which is
    how the gain is calibrated in practice (ratio of electrical tone
    powers with the amplifier in and out).
    """
    return detector.edfa_gain * detector.volts_per_watt * shot_noise_level(p_opt, omega_o)


def sideband_power_squared(
    system: SystemParams,
    drive: DriveState,
    gamma_total: float,
    gamma_i: float,
    n_bar: float,
) -> float:
    """Squared beat power (W^2) of the cooled thermal sideband at the device.

    Closed form for the carrier-sideband beat: the scattered flux
    kappa (gamma_total - gamma_i) n_bar / ((Delta - omega_m)^2 + (kappa/2)^2)
    times the input flux and the detected-port fraction. Collection losses
    are applied by the caller.
    """
    if gamma_total <= gamma_i:
        raise ValueError("gamma_total must exceed gamma_i")
    if n_bar < 0.0:
        raise ValueError("n_bar must be non-negative")
    cav = system.cavity
    lorentz = (drive.detuning - system.mech.omega_m) ** 2 + (0.5 * cav.kappa) ** 2
    return (
        (HBAR * cav.omega_o) ** 2
        * (0.5 * cav.kappa_e)
        * drive.n_in
        / lorentz
        * cav.kappa
        * (gamma_total - gamma_i)
        * n_bar
    )


@dataclass(frozen=True)
class NoiseBudget:
    """Noise densities and detectability figures at one operating point."""

    s_shot: float            # W / rtHz, optical, at the receiver
    s_shot_amplified: float  # V / rtHz
    s_excess: float          # V / rtHz
    s_background: float      # V / rtHz, quadrature sum
    snr_shot: float
    snr_predicted: float
    n_imp: float
    n_imp_ideal: float


def noise_budget(
    system: SystemParams,
    drive: DriveState,
    gamma_i: float,
    n_bar: float,
    detector: DetectorParams,
    s_excess: float = 0.0,
    signal_efficiency: float = 1.0,
) -> NoiseBudget:
    """Assemble the detection budget for one drive point.

    snr_shot compares the sideband peak density against the shot floor
    alone; snr_predicted divides that by the excess-noise factor, so the
    two are identical when s_excess is zero. n_imp is the phonon-units
    background level: occupancy at which the thermal peak would match the
    measured background. n_imp_ideal keeps only the unavoidable part
    (perfect collection, no excess noise).
    """
    if not 0.0 < signal_efficiency <= 1.0:
        raise ValueError("signal_efficiency must lie in (0, 1]")
    if s_excess < 0.0:
        raise ValueError("s_excess must be non-negative")
    cav = system.cavity
    gamma_om = 4.0 * system.g**2 * drive.n_c / cav.kappa
    gamma_total = gamma_i + gamma_om
    p_in_primed = signal_efficiency * drive.p_in
    p_sb2 = sideband_power_squared(system, drive, gamma_total, gamma_i, n_bar)
    p_sb2_primed = signal_efficiency**2 * p_sb2

    s_shot = shot_noise_level(p_in_primed, cav.omega_o)
    s_amp = detector.edfa_gain * detector.volts_per_watt * s_shot
    snr_shot = (4.0 * p_sb2_primed / gamma_total) / (2.0 * HBAR * cav.omega_o * p_in_primed)
    f_excess = 1.0 + (s_excess / s_amp) ** 2 if s_amp > 0.0 else math.inf
    snr_predicted = snr_shot / f_excess
    n_imp = (
        (gamma_total / gamma_om)
        * (cav.kappa / (2.0 * signal_efficiency * cav.kappa_e))
        * f_excess
    )
    n_imp_ideal = 0.25 * gamma_total / gamma_om
    return NoiseBudget(
        s_shot=s_shot,
        s_shot_amplified=s_amp,
        s_excess=s_excess,
        s_background=math.hypot(s_amp, s_excess),
        snr_shot=snr_shot,
        snr_predicted=snr_predicted,
        n_imp=n_imp,
        n_imp_ideal=n_imp_ideal,
    )


@dataclass(frozen=True)
class SyntheticSpectrum:
    """Spectrum-analyzer trace with the generating truth attached.

    spectrum holds S_VV / r_load in W/Hz. truth records what produced the
    trace; analysis code must never read it, it exists for validation.
    """

    spectrum: Spectrum
    rng_seed: int
    averages: int
    truth: dict = field(repr=False)


def synthesize_rsa_spectrum(
    psd: PhotocurrentPSD,
    system: SystemParams,
    drive: DriveState,
    detector: DetectorParams,
    s_excess: float = 0.0,
    signal_efficiency: float = 1.0,
    averages: int = 1,
    seed: int = 0,
    add_noise: bool = True,
) -> SyntheticSpectrum:
    """Turn a shot-normalized photocurrent PSD into an analyzer trace.

    The mean trace is
    s_amp^2 (1 + eta (S_II - 1)) + s_excess^2 over r_load, with eta the
    collection efficiency between device and receiver, applied to both the
    carrier power behind s_amp^2 and the sideband term. Averaged power
    detection gives each bin a Gamma(averages) distribution around the
    mean, drawn from a PCG64 stream seeded by `seed`, so traces are fully
    reproducible.
    """
    if averages < 1:
        raise ValueError("averages must be at least 1")
    if not 0.0 < signal_efficiency <= 1.0:
        raise ValueError("signal_efficiency must lie in (0, 1]")
    if s_excess < 0.0:
        raise ValueError("s_excess must be non-negative")
    cav = system.cavity
    p_in_primed = signal_efficiency * drive.p_in
    s_amp = amplified_shot_level(p_in_primed, cav.omega_o, detector)
    mean_v2 = s_amp**2 * (1.0 + signal_efficiency * (psd.spectrum.values - 1.0)) + s_excess**2
    if add_noise:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        values = mean_v2 * rng.gamma(shape=float(averages), scale=1.0 / averages, size=mean_v2.size)
    else:
        values = mean_v2.copy()
    spectrum = Spectrum(
        omega=psd.spectrum.omega.copy(),
        values=values / detector.r_load,
        units="W/Hz",
    )
    truth = {
        "n_bar": psd.n_bar,
        "n_bath": psd.n_bath,
        "gamma_total": psd.gamma_total,
        "s_amp2": s_amp**2,
        "s_excess2": s_excess**2,
        "background_w_per_hz": (s_amp**2 + s_excess**2) / detector.r_load,
    }
    return SyntheticSpectrum(spectrum=spectrum, rng_seed=seed, averages=averages, truth=truth)


def excess_noise_level(s_background: float, s_amp: float) -> float:
    """Excess density from measured background and computed shot floor."""
    if s_background < s_amp:
        raise ValueError("background below the amplified shot floor")
    return math.sqrt(s_background**2 - s_amp**2)


def lockin_demodulate(
    reflect2: np.ndarray,
    phase: np.ndarray,
    carrier_power: float,
    mod_depth: float,
    detector: DetectorParams,
) -> tuple[np.ndarray, np.ndarray]:
    """In-phase and quadrature lock-in outputs for a swept probe.

    The probe tone of fractional depth mod_depth rides on a carrier of
    power carrier_power; the reflected tone demodulates to
    X = K |r|^2 cos(phi), Y = K |r|^2 sin(phi) with
    K = carrier_power mod_depth^2 responsivity transimpedance / (4 r_load).
    """
    k = (
        carrier_power
        * mod_depth**2
        * detector.responsivity
        * detector.transimpedance
        / (4.0 * detector.r_load)
    )
    reflect2 = np.asarray(reflect2, dtype=float)
    phase = np.asarray(phase, dtype=float)
    return k * reflect2 * np.cos(phase), k * reflect2 * np.sin(phase)


def lockin_invert(
    x: np.ndarray,
    y: np.ndarray,
    carrier_power: float,
    mod_depth: float,
    detector: DetectorParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of `lockin_demodulate`."""
    k = (
        carrier_power
        * mod_depth**2
        * detector.responsivity
        * detector.transimpedance
        / (4.0 * detector.r_load)
    )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.hypot(x, y) / k, np.arctan2(y, x)
