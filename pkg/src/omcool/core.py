"""Static system description and closed-form cooling results.

Every frequency-like quantity in this package is an angular rate in rad/s.
Configuration files accept Hz-like units and convert at the boundary, see
`omcool.config`. Powers are in W, temperatures in K, masses in kg.

The model is a single optical resonance coupled to a single mechanical mode
by radiation pressure. The drive laser sits below the optical resonance;
``detuning`` is defined as omega_o - omega_l and is positive for a
red-detuned drive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23      # J / K
C_LIGHT = 299792458.0   # m / s


def thermal_occupancy(omega_m: float, t_bath: float) -> float:
    """Thermal occupancy n_b = k_B T / (hbar omega_m) of a mode at omega_m.

    The model keeps the linear high-temperature form throughout: the full
    Bose expression differs by x/2 with x = hbar omega_m / k_B T, about
    0.5% for a few-GHz mode above 15 K, and all bath temperatures used
    here are inferred by inverting this same relation, so the linear form
    stays self-consistent.
    """
    if omega_m <= 0.0:
        raise ValueError("omega_m must be positive")
    if t_bath < 0.0:
        raise ValueError("t_bath must be non-negative")
    return K_B * t_bath / (HBAR * omega_m)


def bath_temperature_from_occupancy(omega_m: float, n_occ: float) -> float:
    """Invert `thermal_occupancy`: T = hbar omega_m n / k_B."""
    if omega_m <= 0.0:
        raise ValueError("omega_m must be positive")
    if n_occ < 0.0:
        raise ValueError("n_occ must be non-negative")
    return HBAR * omega_m * n_occ / K_B


@dataclass(frozen=True)
class CavityParams:
    """Optical resonance.

    Parameters
    ----------
    omega_o : float
        Resonance frequency, rad/s.
    kappa : float
        Total energy decay rate (FWHM), rad/s.
    kappa_e : float
        Extrinsic coupling rate summed over both propagation directions of
        the coupling waveguide, rad/s. Only kappa_e / 2 feeds the detected
        direction.
    q_o : float | None
        Optional independently measured optical Q, cross-checked against
        omega_o / kappa at the 1% level.
    """

    omega_o: float
    kappa: float
    kappa_e: float
    q_o: float | None = None

    def __post_init__(self) -> None:
        if self.omega_o <= 0.0:
            raise ValueError("omega_o must be positive")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if not 0.0 < self.kappa_e <= self.kappa:
            raise ValueError("kappa_e must satisfy 0 < kappa_e <= kappa")
        if self.q_o is not None:
            q_model = self.omega_o / self.kappa
            if abs(self.q_o - q_model) > 0.01 * q_model:
                raise ValueError(
                    f"q_o={self.q_o:.4g} disagrees with omega_o/kappa="
                    f"{q_model:.4g} by more than 1%"
                )

    @property
    def q_factor(self) -> float:
        return self.omega_o / self.kappa

    @property
    def kappa_prime(self) -> float:
        """Loss rate seen by the undetected channels, kappa - kappa_e/2."""
        return self.kappa - 0.5 * self.kappa_e

    @property
    def eta_detect(self) -> float:
        """Fraction of cavity emission reaching the detected direction."""
        return 0.5 * self.kappa_e / self.kappa


@dataclass(frozen=True)
class MechParams:
    """Mechanical mode. gamma_i0 is the low-power intrinsic damping rate."""

    omega_m: float
    gamma_i0: float
    mass: float
    q_m: float | None = None

    def __post_init__(self) -> None:
        if self.omega_m <= 0.0:
            raise ValueError("omega_m must be positive")
        if self.gamma_i0 <= 0.0:
            raise ValueError("gamma_i0 must be positive")
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.q_m is not None:
            q_model = self.omega_m / self.gamma_i0
            if abs(self.q_m - q_model) > 0.01 * q_model:
                raise ValueError(
                    f"q_m={self.q_m:.4g} disagrees with omega_m/gamma_i0="
                    f"{q_model:.4g} by more than 1%"
                )

    @property
    def q_factor(self) -> float:
        return self.omega_m / self.gamma_i0

    @property
    def x_zpf(self) -> float:
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega_m))


@dataclass(frozen=True)
class BathState:
    """Thermal environment of the mechanical mode."""

    t_bath: float
    n_occ: float

    @classmethod
    def from_temperature(cls, omega_m: float, t_bath: float) -> "BathState":
        return cls(t_bath=t_bath, n_occ=thermal_occupancy(omega_m, t_bath))


@dataclass(frozen=True)
class SystemParams:
    """Cavity, mechanics, vacuum coupling rate g (rad/s) and bath."""

    cavity: CavityParams
    mech: MechParams
    g: float
    bath: BathState

    def __post_init__(self) -> None:
        if self.g <= 0.0:
            raise ValueError("g must be positive")

    @property
    def sideband_resolution(self) -> float:
        """kappa / omega_m; deep resolved-sideband operation needs << 1."""
        return self.cavity.kappa / self.mech.omega_m

    def with_bath(self, t_bath: float) -> "SystemParams":
        bath = BathState.from_temperature(self.mech.omega_m, t_bath)
        return SystemParams(self.cavity, self.mech, self.g, bath)


@dataclass(frozen=True)
class DriveState:
    """Steady state of the driven cavity.

    alpha_0 carries the input-output phase convention used by the sideband
    solver; only |alpha_0|^2 = n_c is physical on its own.
    """

    detuning: float
    p_in: float
    n_in: float
    n_c: float
    alpha_0: complex


def intracavity_state(system: SystemParams, detuning: float, p_in: float) -> DriveState:
    """Steady intracavity amplitude for drive power p_in (W) at the device.

    n_in is the photon flux P_in / (hbar omega_o). The Lorentzian response
    uses the full detuning, no rotating-wave step is taken here.
    """
    if not math.isfinite(p_in) or p_in < 0.0:
        raise ValueError("p_in must be finite and non-negative")
    if not math.isfinite(detuning):
        raise ValueError("detuning must be finite")
    cav = system.cavity
    n_in = p_in / (HBAR * cav.omega_o)
    alpha_in = math.sqrt(n_in)
    alpha_0 = -math.sqrt(0.5 * cav.kappa_e) * alpha_in / (1j * detuning + 0.5 * cav.kappa)
    return DriveState(
        detuning=detuning,
        p_in=p_in,
        n_in=n_in,
        n_c=abs(alpha_0) ** 2,
        alpha_0=alpha_0,
    )


def input_power_for_photons(system: SystemParams, detuning: float, n_c: float) -> float:
    """Inverse of `intracavity_state`: power (W) that sustains n_c photons."""
    if n_c < 0.0:
        raise ValueError("n_c must be non-negative")
    cav = system.cavity
    lorentz = detuning**2 + (0.5 * cav.kappa) ** 2
    n_in = n_c * lorentz / (0.5 * cav.kappa_e)
    return n_in * HBAR * cav.omega_o


def backaction_rate(system: SystemParams, n_c: float) -> float:
    """Optomechanical damping 4 g^2 n_c / kappa for a drive at detuning omega_m.

    Valid deep in the resolved-sideband regime; use
    `backaction_rate_detuned` away from that point.
    """
    return 4.0 * system.g**2 * n_c / system.cavity.kappa


def backaction_rate_detuned(system: SystemParams, n_c: float, detuning: float) -> float:
    """Net optomechanical damping at arbitrary detuning.

    Difference of anti-Stokes and Stokes scattering rates; reduces to
    4 g^2 n_c / kappa at detuning = omega_m when kappa << omega_m. Negative
    for a blue-detuned drive (anti-damping).
    """
    kappa = system.cavity.kappa
    om = system.mech.omega_m
    g2n = system.g**2 * n_c
    anti_stokes = 1.0 / ((detuning - om) ** 2 + (0.5 * kappa) ** 2)
    stokes = 1.0 / ((detuning + om) ** 2 + (0.5 * kappa) ** 2)
    return g2n * kappa * (anti_stokes - stokes)


@dataclass(frozen=True)
class CoolingResult:
    """Closed-form cooling figures at one drive photon number."""

    n_c: float
    gamma_om: float
    gamma_total: float
    cooperativity: float
    n_min: float
    n_bar: float
    n_bar_rate: float


def quantum_backaction_limit(cavity: CavityParams, omega_m: float) -> float:
    """Minimum occupancy (kappa / 4 omega_m)^2 in the resolved-sideband limit."""
    return (cavity.kappa / (4.0 * omega_m)) ** 2


def cooled_occupancy(
    system: SystemParams,
    n_c: float,
    gamma_i: float | None = None,
    n_bath: float | None = None,
) -> CoolingResult:
    """Steady-state phonon occupancy under resolved-sideband cooling.

    n_bar uses the closed form n_b / (1 + C) + n_min. n_bar_rate is the
    pure rate-equation value gamma_i n_b / (gamma_i + gamma_om), which is
    what the scattering spectra integrate to; the two agree to O(n_min).

    gamma_i defaults to the low-power intrinsic rate; pass the pump- and
    temperature-dependent value to model a heated device. n_bath likewise
    overrides the static bath occupancy.
    """
    if gamma_i is None:
        gamma_i = system.mech.gamma_i0
    if gamma_i <= 0.0:
        raise ValueError("gamma_i must be positive")
    if n_bath is None:
        n_bath = system.bath.n_occ
    gamma_om = backaction_rate(system, n_c)
    coop = gamma_om / gamma_i
    n_min = quantum_backaction_limit(system.cavity, system.mech.omega_m)
    n_bar = n_bath / (1.0 + coop) + n_min
    n_bar_rate = gamma_i * n_bath / (gamma_i + gamma_om)
    return CoolingResult(
        n_c=n_c,
        gamma_om=gamma_om,
        gamma_total=gamma_i + gamma_om,
        cooperativity=coop,
        n_min=n_min,
        n_bar=n_bar,
        n_bar_rate=n_bar_rate,
    )


def decoherence_figures(mech: MechParams, bath: BathState, gamma_i: float | None = None) -> tuple[float, float]:
    """Thermal decoherence time and coherent oscillation count.

    tau = hbar Q_m / (k_B T_b) is the time to absorb one phonon from the
    bath; the second element is tau * omega_m / 2 pi, the number of
    coherent cycles within tau. A directly measured mech.q_m takes
    precedence over omega_m / gamma_i unless gamma_i is passed explicitly.
    """
    if bath.t_bath <= 0.0:
        raise ValueError("bath temperature must be positive for decoherence figures")
    if gamma_i is not None:
        q_m = mech.omega_m / gamma_i
    elif mech.q_m is not None:
        q_m = mech.q_m
    else:
        q_m = mech.omega_m / mech.gamma_i0
    tau = HBAR * q_m / (K_B * bath.t_bath)
    n_osc = tau * mech.omega_m / (2.0 * math.pi)
    return tau, n_osc


def kappa_e_from_contrast(kappa: float, contrast: float) -> float:
    """Extrinsic rate from the on-resonance reflection dip contrast.

    The normalized resonant reflection is (1 - kappa_e / kappa)^2, so
    kappa_e = kappa (1 - sqrt(1 - contrast)). Returns the undercoupled
    root; the overcoupled branch maps to the same contrast but is not
    reachable for the devices this models.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    if not 0.0 <= contrast < 1.0:
        raise ValueError("contrast must lie in [0, 1)")
    return kappa * (1.0 - math.sqrt(1.0 - contrast))
