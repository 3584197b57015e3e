"""Inverse path: from analyzer traces to calibrated phonon occupancy.

The forward chain in `omcool.detection` writes traces as S_VV / r_load.
Analysis never touches synthesis truth; it sees the trace, the instrument
calibration and the assumed intrinsic damping, exactly what a measurement
provides. The occupancy estimator inverts the carrier-sideband beat
relation; every input it consumes is listed in the result's details so an
uncertainty budget can rerun it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import lsq
from .core import HBAR, DriveState, SystemParams, bath_temperature_from_occupancy
from .detection import DetectorParams
from .spectra import Spectrum


def subtract_background(signal: Spectrum, background: Spectrum) -> Spectrum:
    """Pointwise signal minus background; grids and units must agree."""
    if not np.array_equal(signal.omega, background.omega):
        raise ValueError("signal and background grids differ")
    if signal.units != background.units:
        raise ValueError(
            f"unit mismatch: {signal.units!r} vs {background.units!r}"
        )
    return Spectrum(
        omega=signal.omega.copy(),
        values=signal.values - background.values,
        units=signal.units,
    )


@dataclass(frozen=True)
class LorentzFit:
    """Three-parameter Lorentzian fit A / (1 + (2 (w - w_m) / gamma)^2).

    p_omega = amplitude * gamma / 4 is the line area integrated over
    ordinary frequency (gamma in rad/s), the quantity the occupancy
    estimator consumes. ci95 holds half-widths of 95% intervals in the
    order (amplitude, omega_m, gamma).
    """

    amplitude: float
    omega_m: float
    gamma: float
    covariance: np.ndarray
    ci95: np.ndarray
    residual_norm: float
    n_iterations: int
    converged: bool

    def __post_init__(self) -> None:
        self.covariance.setflags(write=False)
        self.ci95.setflags(write=False)

    @property
    def p_omega(self) -> float:
        return 0.25 * self.amplitude * self.gamma


def _initial_lorentzian_guess(omega: np.ndarray, values: np.ndarray) -> np.ndarray:
    width = max(5, values.size // 80)
    kernel = np.ones(width) / width
    smooth = np.convolve(values, kernel, mode="same")
    peak = int(np.argmax(smooth))
    amp0 = float(smooth[peak])
    om0 = float(omega[peak])
    above = smooth > 0.5 * amp0
    if np.any(above):
        idx = np.nonzero(above)[0]
        gamma0 = float(omega[idx[-1]] - omega[idx[0]])
    else:
        gamma0 = 0.0
    if gamma0 <= 0.0:
        gamma0 = 0.1 * float(omega[-1] - omega[0])
    if amp0 <= 0.0:
        amp0 = max(float(np.max(values)), 1e-30)
    return np.array([amp0, om0, gamma0])


def fit_lorentzian(spectrum: Spectrum, init: np.ndarray | None = None) -> LorentzFit:
    """Fit a background-free Lorentzian line to the spectrum.

    Expects the analyzer background to have been subtracted already. The
    starting point comes from a boxcar-smoothed peak search unless given.
    Raises if the optimizer fails to converge.
    """
    omega = spectrum.omega
    values = spectrum.values
    x0 = _initial_lorentzian_guess(omega, values) if init is None else np.asarray(init, float)

    def model_parts(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        amp, om, gam = x
        u = 2.0 * (omega - om) / gam
        return u, amp / (1.0 + u**2)

    def residual(x: np.ndarray) -> np.ndarray:
        return model_parts(x)[1] - values

    def jacobian(x: np.ndarray) -> np.ndarray:
        amp, _, gam = x
        u, line = model_parts(x)
        denom = 1.0 + u**2
        jac = np.empty((omega.size, 3))
        jac[:, 0] = line / amp
        jac[:, 1] = 4.0 * amp * u / (gam * denom**2)
        jac[:, 2] = 2.0 * amp * u**2 / (gam * denom**2)
        return jac

    def accept(x: np.ndarray) -> bool:
        return x[0] > 0.0 and x[2] > 0.0

    result = lsq.levenberg_marquardt(residual, x0, jacobian=jacobian, accept=accept)
    if not result.converged:
        raise RuntimeError("Lorentzian fit did not converge")
    ci95 = 1.96 * np.sqrt(np.clip(np.diag(result.covariance), 0.0, None))
    return LorentzFit(
        amplitude=float(result.x[0]),
        omega_m=float(result.x[1]),
        gamma=float(result.x[2]),
        covariance=result.covariance,
        ci95=ci95,
        residual_norm=result.residual_norm,
        n_iterations=result.n_iterations,
        converged=result.converged,
    )


def intrinsic_linewidth(gamma_red: float, gamma_blue: float) -> float:
    """Intrinsic damping from matched red and blue drive linewidths.

    Backaction broadens one and narrows the other by the same amount, so
    the mean cancels it.
    """
    if gamma_red <= 0.0 or gamma_blue <= 0.0:
        raise ValueError("linewidths must be positive")
    return 0.5 * (gamma_red + gamma_blue)


@dataclass(frozen=True)
class CalibrationRecord:
    """Raw bench calibration for one cooldown.

    Direction 0 drives the device through the detection-side coupler,
    direction 1 through the far side. dlambda are thermo-optic resonance
    shifts at the launched powers p_launch; their ratio splits the
    measured through transmission l_taper into the two half losses.
    p_tone_bypass and p_tone_amplified are electrical powers of the same
    calibration tone with the optical amplifier bypassed and inline.
    v_dc / p_dc fixes the receiver conversion.
    """

    p_launch_0: float
    p_launch_1: float
    dlambda_0: float
    dlambda_1: float
    l_taper: float
    p_tone_bypass: float
    p_tone_amplified: float
    v_dc: float
    p_dc: float
    r_load: float = 50.0

    def __post_init__(self) -> None:
        for name in (
            "p_launch_0",
            "p_launch_1",
            "dlambda_0",
            "dlambda_1",
            "p_tone_bypass",
            "p_tone_amplified",
            "v_dc",
            "p_dc",
            "r_load",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.l_taper <= 1.0:
            raise ValueError("l_taper must lie in (0, 1]")


@dataclass(frozen=True)
class InsertionLosses:
    l_0: float
    l_1: float
    asymmetry: float  # l_0 / l_1


def extract_insertion_losses(record: CalibrationRecord) -> InsertionLosses:
    """Split the through loss into input and output halves.

    The thermo-optic shift is proportional to the power reaching the
    device, so shift over launched power measures each direction's input
    loss up to a common device factor that cancels in the ratio.
    """
    rho = (record.dlambda_0 / record.dlambda_1) * (record.p_launch_1 / record.p_launch_0)
    l_0 = math.sqrt(record.l_taper * rho)
    l_1 = record.l_taper / l_0
    if not (0.0 < l_0 <= 1.0 and 0.0 < l_1 <= 1.0):
        raise ValueError(
            f"loss split left the physical range: l_0={l_0:.4g}, l_1={l_1:.4g}"
        )
    return InsertionLosses(l_0=l_0, l_1=l_1, asymmetry=rho)


def edfa_gain_from_tones(record: CalibrationRecord) -> float:
    """Optical power gain from the electrical tone-power ratio.

    The tone voltage scales with the optical power gain, so the electrical
    power ratio is the gain squared.
    """
    return math.sqrt(record.p_tone_amplified / record.p_tone_bypass)


def receiver_gain(record: CalibrationRecord) -> float:
    """DC conversion of the photoreceiver in V/W."""
    return record.v_dc / record.p_dc


def detector_from_calibration(record: CalibrationRecord) -> DetectorParams:
    return DetectorParams(
        r_load=record.r_load,
        edfa_gain=edfa_gain_from_tones(record),
        g_e=receiver_gain(record),
    )


def modulation_depth(p_tone: float, p_carrier: float, detector: DetectorParams) -> float:
    """Fractional optical modulation depth behind an electrical tone.

    beta = sqrt(2 P_tone r_load) / (G g_e P_carrier) with P_carrier the
    optical power at the amplifier input.
    """
    if p_tone < 0.0 or p_carrier <= 0.0:
        raise ValueError("powers must be positive")
    v_amp = math.sqrt(2.0 * p_tone * detector.r_load)
    return v_amp / (detector.edfa_gain * detector.volts_per_watt * p_carrier)


@dataclass(frozen=True)
class InputErrors:
    """Fractional one-sigma input uncertainties for the occupancy estimator.

    Defaults are the quoted bench values for the reference measurement;
    they are calibration-specific, not constants of nature.
    """

    p_omega: float = 0.006
    gamma_total: float = 0.006
    gamma_i: float = 0.016
    kappa: float = 0.007
    kappa_e: float = 0.007
    p_in: float = 0.040
    omega_o: float = 0.007
    omega_m: float = 0.006
    detuning: float = 0.003


_ESTIMATOR_INPUTS = (
    "p_omega",
    "gamma_total",
    "gamma_i",
    "kappa",
    "kappa_e",
    "p_in",
    "omega_o",
    "omega_m",
    "detuning",
)


def _n_bar_estimator(v: Mapping[str, float]) -> float:
    gamma_om = v["gamma_total"] - v["gamma_i"]
    if gamma_om <= 0.0:
        raise ValueError("fitted linewidth does not exceed the intrinsic damping")
    lorentz = (v["detuning"] - v["omega_m"]) ** 2 + (0.5 * v["kappa"]) ** 2
    return (
        (2.0 * v["r_load"] / (v["g_e"] ** 2 * v["g_det"] ** 2))
        * (v["p_omega"] / (HBAR * v["omega_o"]))
        * (1.0 / (v["kappa"] * gamma_om))
        * (lorentz / (0.5 * v["kappa_e"] * v["p_in"]))
    )


@dataclass(frozen=True)
class ThermometryResult:
    """Calibrated occupancy for one drive point."""

    n_bar: float
    n_bar_sigma: float
    gamma_total: float
    gamma_om: float
    cooperativity: float
    n_min: float
    t_bath_inferred: float
    details: dict = field(repr=False)


def phonon_number(
    fit: LorentzFit,
    system: SystemParams,
    drive: DriveState,
    detector: DetectorParams,
    gamma_i: float | None = None,
    signal_efficiency: float = 1.0,
    errors: InputErrors | None = None,
) -> ThermometryResult:
    """Invert a fitted sideband line into phonon occupancy.

    The fitted area is referred back through the chain gain, the
    collection efficiency and the cavity Lorentzian; dividing by the
    backaction rate gamma_fit - gamma_i leaves the occupancy. The implied
    bath temperature assumes the closed-form cooling relation and is NaN
    when the estimate sits below the backaction floor.

    When errors is given, n_bar_sigma is the analytic first-order budget;
    otherwise it is NaN and `phonon_uncertainty` can fill it in later.
    """
    if gamma_i is None:
        gamma_i = system.mech.gamma_i0
    if fit.gamma <= gamma_i:
        raise ValueError(
            f"fitted linewidth {fit.gamma:.4g} does not exceed gamma_i {gamma_i:.4g}"
        )
    cav = system.cavity
    g_det = detector.edfa_gain * signal_efficiency
    values = {
        "p_omega": fit.p_omega,
        "gamma_total": fit.gamma,
        "gamma_i": gamma_i,
        "kappa": cav.kappa,
        "kappa_e": cav.kappa_e,
        "p_in": drive.p_in,
        "omega_o": cav.omega_o,
        "omega_m": fit.omega_m,
        "detuning": drive.detuning,
        "r_load": detector.r_load,
        "g_e": detector.volts_per_watt,
        "g_det": g_det,
    }
    n_bar = _n_bar_estimator(values)
    gamma_om = fit.gamma - gamma_i
    coop = gamma_om / gamma_i
    n_min = (cav.kappa / (4.0 * system.mech.omega_m)) ** 2
    if n_bar > n_min:
        n_bath_implied = (n_bar - n_min) * (1.0 + coop)
        t_bath = bath_temperature_from_occupancy(system.mech.omega_m, n_bath_implied)
    else:
        t_bath = math.nan
    sigma = math.nan
    if errors is not None:
        sigma = n_bar * _analytic_budget(values, errors)[0]
    return ThermometryResult(
        n_bar=n_bar,
        n_bar_sigma=sigma,
        gamma_total=fit.gamma,
        gamma_om=gamma_om,
        cooperativity=coop,
        n_min=n_min,
        t_bath_inferred=t_bath,
        details=values,
    )


def _analytic_budget(
    values: Mapping[str, float], errors: InputErrors
) -> tuple[float, dict[str, float]]:
    terms: dict[str, float] = {}
    total = 0.0
    for name in _ESTIMATOR_INPUTS:
        frac = getattr(errors, name)
        step = 1e-6 * abs(values[name])
        hi = dict(values)
        lo = dict(values)
        hi[name] = values[name] + step
        lo[name] = values[name] - step
        dlog = (math.log(_n_bar_estimator(hi)) - math.log(_n_bar_estimator(lo))) / (
            2.0 * step / values[name]
        )
        term = dlog * frac
        terms[name] = abs(term)
        total += term * term
    return math.sqrt(total), terms


@dataclass(frozen=True)
class UncertaintyBudget:
    """Relative occupancy uncertainty, analytic and sampled."""

    analytic: float
    monte_carlo: float
    terms: dict
    n_draws: int
    seed: int


def phonon_uncertainty(
    result: ThermometryResult,
    errors: InputErrors | None = None,
    n_draws: int = 10000,
    seed: int = 0,
) -> UncertaintyBudget:
    """First-order quadrature budget cross-checked by Monte Carlo.

    Each estimator input is perturbed by its fractional error; the
    analytic number adds log-derivative terms in quadrature, the Monte
    Carlo draws all inputs as independent Gaussians and reports the
    sample spread over the mean.
    """
    if errors is None:
        errors = InputErrors()
    if n_draws < 100:
        raise ValueError("n_draws must be at least 100")
    values = result.details
    analytic, terms = _analytic_budget(values, errors)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    draws = np.empty(n_draws)
    scales = {name: getattr(errors, name) for name in _ESTIMATOR_INPUTS}
    perturbed = dict(values)
    factors = {
        name: rng.normal(loc=1.0, scale=scales[name], size=n_draws)
        for name in _ESTIMATOR_INPUTS
    }
    for i in range(n_draws):
        for name in _ESTIMATOR_INPUTS:
            perturbed[name] = values[name] * factors[name][i]
        draws[i] = _n_bar_estimator(perturbed)
    monte_carlo = float(np.std(draws, ddof=1) / np.mean(draws))
    return UncertaintyBudget(
        analytic=analytic,
        monte_carlo=monte_carlo,
        terms=terms,
        n_draws=n_draws,
        seed=seed,
    )


def inferred_bath_temperature(
    omega_m: float,
    n_bar: float,
    gamma_total: float,
    gamma_i: float,
    n_min: float = 0.0,
) -> float:
    """Local bath temperature implied by a measured occupancy."""
    if gamma_total <= gamma_i:
        raise ValueError("gamma_total must exceed gamma_i")
    coop = (gamma_total - gamma_i) / gamma_i
    n_bath = (n_bar - n_min) * (1.0 + coop)
    if n_bath <= 0.0:
        return math.nan
    return bath_temperature_from_occupancy(omega_m, n_bath)


@dataclass(frozen=True)
class ThermometryCurve:
    """Mode temperature against cryostat temperature with plateau search."""

    t_cryostat: np.ndarray
    t_mode: np.ndarray
    plateau_mean: float
    plateau_onset: float
    split_index: int
    has_plateau: bool

    def __post_init__(self) -> None:
        self.t_cryostat.setflags(write=False)
        self.t_mode.setflags(write=False)


def mode_thermometry_curve(t_cryostat: np.ndarray, t_mode: np.ndarray) -> ThermometryCurve:
    """Detect where the mode unpins from the cryostat.

    Below some temperature the mode thermalizes to a floor; above it the
    two track. The split index minimizes the summed squared error of a
    two-segment model: constant floor on the left, identity on the right.
    A split of zero means the identity alone fits best and no plateau is
    claimed.
    """
    t_cryostat = np.asarray(t_cryostat, dtype=float)
    t_mode = np.asarray(t_mode, dtype=float)
    if t_cryostat.shape != t_mode.shape or t_cryostat.ndim != 1:
        raise ValueError("t_cryostat and t_mode must be matching 1-D arrays")
    if t_cryostat.size < 3:
        raise ValueError("need at least 3 points")
    if not np.all(np.diff(t_cryostat) > 0.0):
        raise ValueError("t_cryostat must be ascending")
    n = t_cryostat.size
    best_sse = math.inf
    best_k = 0
    for k in range(n + 1):
        left = t_mode[:k]
        sse = float(np.sum((t_mode[k:] - t_cryostat[k:]) ** 2))
        if k > 0:
            sse += float(np.sum((left - left.mean()) ** 2))
        if sse < best_sse - 1e-30:
            best_sse = sse
            best_k = k
    has_plateau = best_k >= 2
    plateau_mean = float(np.mean(t_mode[:best_k])) if has_plateau else math.nan
    plateau_onset = float(t_cryostat[best_k - 1]) if has_plateau else math.nan
    return ThermometryCurve(
        t_cryostat=t_cryostat.copy(),
        t_mode=t_mode.copy(),
        plateau_mean=plateau_mean,
        plateau_onset=plateau_onset,
        split_index=best_k,
        has_plateau=has_plateau,
    )
