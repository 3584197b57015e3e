"""Scattering description of the cooled mode and its readout spectra.

Everything here lives in the resolved-sideband, rotating-wave regime with
the drive parked one mechanical frequency below the optical resonance.
The cavity is adiabatically eliminated, which is the right limit for a
cavity linewidth three orders of magnitude above the total mechanical
linewidth. Spectra are single-sided and evaluated on positive analysis
frequencies near omega_m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import lsq
from .core import CavityParams, DriveState, SystemParams


@dataclass(frozen=True)
class Spectrum:
    """One-dimensional single-sided spectrum on an angular frequency grid."""

    omega: np.ndarray
    values: np.ndarray
    units: str
    sidedness: str = "single"

    def __post_init__(self) -> None:
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if omega.ndim != 1 or omega.size < 2:
            raise ValueError("omega must be a 1-D grid with at least 2 points")
        if values.shape != omega.shape:
            raise ValueError("values must match omega in shape")
        if not np.all(np.diff(omega) > 0.0):
            raise ValueError("omega must be strictly ascending")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(values))):
            raise ValueError("spectrum contains non-finite entries")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)
        omega.setflags(write=False)
        values.setflags(write=False)

    @property
    def frequency_hz(self) -> np.ndarray:
        return self.omega / (2.0 * math.pi)


def default_spectrum_grid(
    center: float, gamma: float, span_linewidths: float = 20.0, points: int = 4001
) -> np.ndarray:
    """Uniform grid of `points` samples covering center +- span/2 linewidths."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if points < 16:
        raise ValueError("points must be at least 16")
    half = 0.5 * span_linewidths * gamma
    return np.linspace(center - half, center + half, points)


def _coupling_rate(system: SystemParams, n_c: float) -> float:
    return system.g * math.sqrt(n_c)


def optical_spring_shift(system: SystemParams, n_c: float, detuning: float) -> float:
    """Drive-induced mechanical frequency pull (rad/s), positive upward."""
    kappa = system.cavity.kappa
    om = system.mech.omega_m
    g2n = system.g**2 * n_c
    return g2n * (
        (detuning - om) / ((detuning - om) ** 2 + (0.5 * kappa) ** 2)
        + (detuning + om) / ((detuning + om) ** 2 + (0.5 * kappa) ** 2)
    )


@dataclass(frozen=True)
class ScatteringElements:
    """Detected-port scattering amplitudes on a grid near omega_m.

    s11 maps detected-port vacuum back to the detector, n_opt collects the
    undetected optical ports, s12 is the mechanical noise route. The three
    satisfy |s11|^2 + |n_opt|^2 + |s12|^2 = 1 identically.
    """

    omega: np.ndarray
    s11: np.ndarray
    n_opt: np.ndarray
    s12: np.ndarray
    omega_m_eff: float
    gamma_i: float
    gamma_om: float
    gamma_total: float
    big_g: float
    kappa: float
    kappa_e: float
    n_c: float

    def __post_init__(self) -> None:
        for name in ("omega", "s11", "n_opt", "s12"):
            getattr(self, name).setflags(write=False)


def scattering_elements(
    system: SystemParams,
    drive: DriveState,
    omega: np.ndarray,
    gamma_i: float | None = None,
    apply_spring: bool = False,
) -> ScatteringElements:
    """Evaluate the three scattering amplitudes on `omega` (rad/s).

    The drive must sit at detuning omega_m to within kappa/10; outside
    that window the rotating-wave reduction used here is not trustworthy
    and a ValueError is raised. A coupling rate above kappa/10 strains the
    adiabatic elimination and only warns.
    """
    if gamma_i is None:
        gamma_i = system.mech.gamma_i0
    if gamma_i <= 0.0:
        raise ValueError("gamma_i must be positive")
    cav = system.cavity
    om_eff = system.mech.omega_m
    if apply_spring:
        om_eff += optical_spring_shift(system, drive.n_c, drive.detuning)
    if abs(drive.detuning - system.mech.omega_m) > 0.1 * cav.kappa:
        raise ValueError(
            "scattering elements require detuning within kappa/10 of omega_m"
        )
    big_g = _coupling_rate(system, drive.n_c)
    if big_g > 0.1 * cav.kappa:
        warnings.warn(
            "coupling rate exceeds kappa/10; adiabatic cavity elimination is strained",
            stacklevel=2,
        )
    omega = np.asarray(omega, dtype=float)
    gamma_om = 4.0 * big_g**2 / cav.kappa
    gamma_total = gamma_i + gamma_om
    kappa_prime = cav.kappa_prime
    lor = 1.0 / (1j * (om_eff - omega) + 0.5 * gamma_total)

    background = 1.0 - cav.kappa_e / cav.kappa
    s11 = background + gamma_om * (0.5 * cav.kappa_e / cav.kappa) * lor
    n_opt = -math.sqrt(2.0 * kappa_prime * cav.kappa_e) / cav.kappa + gamma_om * math.sqrt(
        0.5 * kappa_prime * cav.kappa_e
    ) / cav.kappa * lor
    s12 = 1j * big_g * math.sqrt(2.0 * gamma_i * cav.kappa_e) / cav.kappa * lor
    return ScatteringElements(
        omega=omega,
        s11=s11,
        n_opt=n_opt,
        s12=s12,
        omega_m_eff=om_eff,
        gamma_i=gamma_i,
        gamma_om=gamma_om,
        gamma_total=gamma_total,
        big_g=big_g,
        kappa=cav.kappa,
        kappa_e=cav.kappa_e,
        n_c=drive.n_c,
    )


def unitarity_defect(elements: ScatteringElements) -> float:
    """Largest deviation of the scattering-weight sum from one."""
    total = (
        np.abs(elements.s11) ** 2
        + np.abs(elements.n_opt) ** 2
        + np.abs(elements.s12) ** 2
    )
    return float(np.max(np.abs(total - 1.0)))


@dataclass(frozen=True)
class PhotocurrentPSD:
    """Shot-normalized photocurrent spectrum and the occupancy behind it."""

    spectrum: Spectrum
    n_bar: float
    n_bath: float
    gamma_total: float


def _s12_abs2(elements: ScatteringElements, omega: np.ndarray) -> np.ndarray:
    num = 2.0 * elements.gamma_i * elements.kappa_e * elements.big_g**2 / elements.kappa**2
    return num / ((elements.omega_m_eff - omega) ** 2 + (0.5 * elements.gamma_total) ** 2)


def photocurrent_psd(elements: ScatteringElements, n_bath: float) -> PhotocurrentPSD:
    """Shot-normalized detected spectrum 1 + n_b (|s12(w)|^2 + |s12(-w)|^2).

    The negative-frequency term is the far tail of the image resonance and
    is evaluated from the closed form rather than demanding a mirrored
    grid. Off-resonant background is exactly 1 (shot noise).
    """
    if n_bath < 0.0:
        raise ValueError("n_bath must be non-negative")
    values = 1.0 + n_bath * (
        _s12_abs2(elements, elements.omega) + _s12_abs2(elements, -elements.omega)
    )
    spectrum = Spectrum(omega=elements.omega.copy(), values=values, units="shot")
    n_bar = elements.gamma_i * n_bath / elements.gamma_total
    return PhotocurrentPSD(
        spectrum=spectrum,
        n_bar=n_bar,
        n_bath=n_bath,
        gamma_total=elements.gamma_total,
    )


def blue_photocurrent_psd(
    system: SystemParams,
    n_c: float,
    omega: np.ndarray,
    gamma_i: float | None = None,
) -> PhotocurrentPSD:
    """Shot-normalized spectrum for the mirrored, blue-detuned drive.

    Anti-damping narrows the line to gamma_i - gamma_om and the sideband
    weight carries n_b + 1; only stable below the phonon-lasing threshold,
    above it a ValueError is raised.
    """
    if gamma_i is None:
        gamma_i = system.mech.gamma_i0
    cav = system.cavity
    big_g = _coupling_rate(system, n_c)
    gamma_om = 4.0 * big_g**2 / cav.kappa
    if gamma_om >= gamma_i:
        raise ValueError("blue drive beyond the anti-damping instability threshold")
    gamma_eff = gamma_i - gamma_om
    n_bath = system.bath.n_occ
    omega = np.asarray(omega, dtype=float)
    weight = (0.5 * cav.kappa_e / cav.kappa) * (4.0 * big_g**2 / cav.kappa) * gamma_i * (
        n_bath + 1.0
    )
    values = 1.0 + weight / ((system.mech.omega_m - omega) ** 2 + (0.5 * gamma_eff) ** 2)
    spectrum = Spectrum(omega=omega.copy(), values=values, units="shot")
    n_eff = gamma_i * n_bath / gamma_eff
    return PhotocurrentPSD(
        spectrum=spectrum, n_bar=n_eff, n_bath=n_bath, gamma_total=gamma_eff
    )


def sb_lorentzians(
    n_bar: float,
    gamma: float,
    omega_m: float,
    omega: np.ndarray,
    side: str = "red",
) -> Spectrum:
    """Motional sideband line with detailed-balance weighting.

    Unit-area Lorentzian in ordinary frequency scaled by n_bar on the red
    (anti-Stokes) side and n_bar + 1 on the blue (Stokes) side, so the
    integral over Hz returns the sideband weight in phonons.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if n_bar < 0.0:
        raise ValueError("n_bar must be non-negative")
    if side not in ("red", "blue"):
        raise ValueError("side must be 'red' or 'blue'")
    omega = np.asarray(omega, dtype=float)
    weight = n_bar if side == "red" else n_bar + 1.0
    half = 0.5 * gamma
    line = 2.0 * half / ((omega - omega_m) ** 2 + half**2)  # 2 pi * unit-area in omega
    return Spectrum(omega=omega.copy(), values=weight * line, units="phonon/Hz")


def sideband_area_ratio(n_bar: float) -> float:
    """Blue-to-red area ratio (n_bar + 1) / n_bar; diverges at zero."""
    if n_bar <= 0.0:
        raise ValueError("n_bar must be positive")
    return (n_bar + 1.0) / n_bar


def _eit_amplitude(
    delta: np.ndarray | float,
    kappa: float,
    kappa_e: float,
    drive_detuning: float,
    g2: float,
    gamma_i: float,
    omega_m_eff: float,
) -> np.ndarray | complex:
    mech = g2 / (1j * (omega_m_eff - delta) + 0.5 * gamma_i)
    return (0.5 * kappa_e) / (1j * (drive_detuning - delta) + 0.5 * kappa + mech)


@dataclass(frozen=True)
class EitSpectrum:
    """Two-photon probe reflection across the transparency window.

    detuning is the probe offset from the drive. dip_width is the full
    width of the interference window extracted by refitting the response
    model; dip_width_halfdepth is the direct half-depth width, which is
    pulled below gamma_total by interference with the cavity background.
    group_delay is the two-sideband phase measurement a lock-in at
    omega_li performs, valid only when the window resolves omega_li.
    """

    detuning: np.ndarray
    reflect2: np.ndarray
    phase: np.ndarray
    group_delay: np.ndarray
    dip_center: float
    dip_width: float
    dip_width_halfdepth: float
    reflect2_dip: float
    omega_li: float
    lockin_valid: bool
    gamma_total_model: float

    def __post_init__(self) -> None:
        for name in ("detuning", "reflect2", "phase", "group_delay"):
            getattr(self, name).setflags(write=False)


def _halfdepth_width(
    kappa: float,
    kappa_e: float,
    drive_detuning: float,
    g2: float,
    gamma_i: float,
    omega_m_eff: float,
    gamma_total: float,
) -> float:
    from scipy.optimize import brentq

    def refl2(delta: float) -> float:
        return float(
            np.abs(
                _eit_amplitude(
                    delta, kappa, kappa_e, drive_detuning, g2, gamma_i, omega_m_eff
                )
            )
            ** 2
        )

    background = float(
        np.abs((0.5 * kappa_e) / (1j * (drive_detuning - omega_m_eff) + 0.5 * kappa)) ** 2
    )
    floor = refl2(omega_m_eff)
    level = floor + 0.5 * (background - floor)
    span = 2.0 * gamma_total

    def objective(delta: float) -> float:
        return refl2(delta) - level

    lo = brentq(objective, omega_m_eff - span, omega_m_eff, xtol=1e-6 * gamma_total)
    hi = brentq(objective, omega_m_eff, omega_m_eff + span, xtol=1e-6 * gamma_total)
    return hi - lo


def eit_reflection(
    system: SystemParams,
    drive: DriveState,
    detuning: np.ndarray,
    omega_li: float = 2.0 * math.pi * 1.0e5,
    gamma_i: float | None = None,
    apply_spring: bool = False,
) -> EitSpectrum:
    """Swept-probe reflection of the driven cavity around the window.

    The window width is recovered by refitting the reflection model with
    the coupling weight, intrinsic mechanical rate and effective
    mechanical frequency free; cavity parameters stay pinned at their
    calibrated values. The fitted width gamma_i + 4 G^2 / kappa is what a
    linewidth comparison against the cooled spectrum should use.
    """
    if gamma_i is None:
        gamma_i = system.mech.gamma_i0
    if gamma_i <= 0.0:
        raise ValueError("gamma_i must be positive")
    if omega_li <= 0.0:
        raise ValueError("omega_li must be positive")
    cav = system.cavity
    om_eff = system.mech.omega_m
    if apply_spring:
        om_eff += optical_spring_shift(system, drive.n_c, drive.detuning)
    detuning = np.asarray(detuning, dtype=float)
    if not detuning[0] <= om_eff <= detuning[-1]:
        raise ValueError("probe grid must straddle the mechanical frequency")
    big_g = _coupling_rate(system, drive.n_c)
    g2 = big_g**2
    gamma_om = 4.0 * g2 / cav.kappa
    gamma_total = gamma_i + gamma_om

    amp = _eit_amplitude(detuning, cav.kappa, cav.kappa_e, drive.detuning, g2, gamma_i, om_eff)
    reflect2 = np.abs(amp) ** 2
    phase = -np.unwrap(np.angle(amp))

    # the lock-in compares the response one modulation step either side
    amp_hi = _eit_amplitude(
        detuning + omega_li, cav.kappa, cav.kappa_e, drive.detuning, g2, gamma_i, om_eff
    )
    amp_lo = _eit_amplitude(
        detuning - omega_li, cav.kappa, cav.kappa_e, drive.detuning, g2, gamma_i, om_eff
    )
    dphi = -(np.angle(amp_hi * np.conj(amp_lo)))
    group_delay = dphi / (2.0 * omega_li)

    if g2 == 0.0:
        # bare cavity: no transparency window to fit
        om_fit = om_eff
        dip_width = 0.0
    else:
        # refit the window against the sampled reflection
        scale0 = np.array([1.0, g2, gamma_i, om_eff])

        def residual(x: np.ndarray) -> np.ndarray:
            model = x[0] * np.abs(
                _eit_amplitude(detuning, cav.kappa, cav.kappa_e, drive.detuning, x[1], x[2], x[3])
            ) ** 2
            return model - reflect2

        def accept(x: np.ndarray) -> bool:
            return x[0] > 0.0 and x[1] >= 0.0 and x[2] > 0.0

        fit = lsq.levenberg_marquardt(residual, scale0, accept=accept, max_iter=100)
        g2_fit, gamma_i_fit, om_fit = fit.x[1], fit.x[2], fit.x[3]
        dip_width = gamma_i_fit + 4.0 * g2_fit / cav.kappa
    if g2 == 0.0:
        halfdepth = 0.0
    else:
        halfdepth = _halfdepth_width(
            cav.kappa, cav.kappa_e, drive.detuning, g2, gamma_i, om_eff, gamma_total
        )
    dip_amp = _eit_amplitude(om_eff, cav.kappa, cav.kappa_e, drive.detuning, g2, gamma_i, om_eff)
    return EitSpectrum(
        detuning=detuning,
        reflect2=reflect2,
        phase=phase,
        group_delay=group_delay,
        dip_center=float(om_fit),
        dip_width=float(dip_width),
        dip_width_halfdepth=float(halfdepth),
        reflect2_dip=float(np.abs(dip_amp) ** 2),
        omega_li=omega_li,
        lockin_valid=bool(omega_li < 0.5 * gamma_total),
        gamma_total_model=gamma_total,
    )
