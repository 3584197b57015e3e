"""Thermo-optics and temperature-dependent damping of the device.

Two jobs live here. First, turning measured resonance wavelength shifts
into device temperature through a refractive-index table, including the
conservative bounds needed because the table is only trusted above 30 K.
Second, the phenomenological decomposition of intrinsic mechanical
damping into its static, thermal and photogenerated-carrier parts, with
defaults calibrated against the reference cooldown.

The default index table is synthetic: a two-parameter slope law anchored
so that the known golden numbers (full-range wavelength shift, bound
temperatures at the largest observed shift) are reproduced exactly. A
measured table can be loaded from CSV and used in its place.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi

# anchor values for the synthetic table
_T_REF = 17.6          # K, base temperature
_N_REF = 3.4450        # refractive index at the base temperature
_LAMBDA_REF = 1537e-9  # m, cold resonance wavelength
_OVERLAP = 7.5066e-2   # mode-weighted thermo-optic overlap
_T_KNEE = 30.0         # K, lowest trusted table temperature
_DT_MIN = 7.8          # K, bound pair reproduced at the largest shift
_DT_MAX = 16.8         # K
_SHIFT_STAR = 15.0e-12  # m, largest observed resonance shift
_SHIFT_FULL = 12.5e-9   # m, shift from base to room temperature


@dataclass(frozen=True)
class RefractiveIndexTable:
    """Monotone index-vs-temperature table with PCHIP interpolation.

    valid_min marks the lowest temperature at which the tabulated data is
    trusted; rows below it may exist to stabilize interpolation but any
    physics conclusion drawn below valid_min must go through the bound
    modes of `bound_temperature_rise`.
    """

    t_k: np.ndarray
    n: np.ndarray
    valid_min: float = _T_KNEE

    def __post_init__(self) -> None:
        t = np.asarray(self.t_k, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if t.ndim != 1 or t.size < 4:
            raise ValueError("table needs at least 4 rows")
        if n.shape != t.shape:
            raise ValueError("t_k and n must have matching shapes")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("t_k must be strictly ascending")
        if not np.all(np.diff(n) >= 0.0):
            raise ValueError("n must be non-decreasing with temperature")
        if not (t[0] <= self.valid_min <= t[-1]):
            raise ValueError("valid_min outside the tabulated range")
        object.__setattr__(self, "t_k", t)
        object.__setattr__(self, "n", n)
        t.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "_interp", PchipInterpolator(t, n))
        object.__setattr__(self, "_deriv", self._interp.derivative())

    def n_at(self, t: float | np.ndarray) -> float | np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_k[0]) or np.any(t_arr > self.t_k[-1]):
            raise ValueError("temperature outside the tabulated range")
        out = self._interp(t_arr)
        return float(out) if np.isscalar(t) else out

    def dndt(self, t: float) -> float:
        if not self.t_k[0] <= t <= self.t_k[-1]:
            raise ValueError("temperature outside the tabulated range")
        return float(self._deriv(t))


def _slope_law(s_30: float, s_hi: float, tau: float):
    """dn/dT = min(s_30 exp((T - 30)/tau), s_hi) and its exact integral."""

    t_sat = _T_KNEE + tau * math.log(s_hi / s_30)

    def cumulative(t: float) -> float:
        # integral of the slope law from the base temperature
        def ramp(t_val: float) -> float:
            if t_val <= t_sat:
                return s_30 * tau * (
                    math.exp((t_val - _T_KNEE) / tau) - math.exp((_T_REF - _T_KNEE) / tau)
                )
            return (
                s_30 * tau * (math.exp((t_sat - _T_KNEE) / tau) - math.exp((_T_REF - _T_KNEE) / tau))
                + s_hi * (t_val - t_sat)
            )

        return ramp(t)

    return cumulative


def shift_per_index_change() -> float:
    """Resonance wavelength shift per unit refractive index change, m."""
    return _LAMBDA_REF * _N_REF * _OVERLAP


def default_index_table() -> RefractiveIndexTable:
    """Synthetic index table calibrated to the golden thermo-optic numbers.

    The slope law has a knee: exponential rise up to a saturation slope.
    Its time constant makes the bound pair at the largest observed shift
    come out at (7.8, 16.8) K, the 30 K slope converts that shift to 7.8 K
    directly, and the saturation slope is root-found so the base-to-room
    index change reproduces the full-range wavelength shift exactly.
    """
    factor = shift_per_index_change()
    dn_star = _SHIFT_STAR / factor
    dn_full = _SHIFT_FULL / factor
    s_30 = dn_star / _DT_MIN

    # knee time constant: integrating the exponential from 30 K upward
    # must absorb dn_star exactly at 30 + (dT_max - (30 - T_ref)) kelvin
    rise = _DT_MAX - (_T_KNEE - _T_REF)

    def knee(tau: float) -> float:
        return tau * (math.exp(rise / tau) - 1.0) - _DT_MIN

    tau = brentq(knee, 0.5, 50.0, xtol=1e-12)

    def full_range(s_hi: float) -> float:
        return _slope_law(s_30, s_hi, tau)(300.0) - 0.0

    def objective(s_hi: float) -> float:
        return full_range(s_hi) - dn_full

    s_hi = brentq(objective, s_30 * 1.5, s_30 * 1e3, xtol=1e-18)
    cumulative = _slope_law(s_30, s_hi, tau)

    nodes = np.unique(
        np.concatenate(
            [
                np.arange(4.0, 25.0, 1.0),
                np.arange(25.0, 40.0, 0.5),
                np.arange(40.0, 321.0, 2.0),
                [_T_REF, 300.0],
            ]
        )
    )
    n_vals = np.array([_N_REF + cumulative(t) for t in nodes])
    return RefractiveIndexTable(t_k=nodes, n=n_vals, valid_min=_T_KNEE)


def load_index_table(path: str, valid_min: float = _T_KNEE) -> RefractiveIndexTable:
    """Read a two-column (T_K, n) CSV; '#' lines are comments."""
    t, n = _load_two_columns(path)
    return RefractiveIndexTable(t_k=t, n=n, valid_min=valid_min)


def _load_two_columns(path: str) -> tuple[np.ndarray, np.ndarray]:
    first, second = [], []
    with open(path, newline="") as handle:
        for row in csv.reader(handle):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: expected two columns, got {row!r}")
            first.append(float(row[0]))
            second.append(float(row[1]))
    if len(first) < 2:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(first), np.asarray(second)


def load_quality_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """(T_K, Q_m) rows for damping-vs-temperature fits."""
    return _load_two_columns(path)


def load_excess_damping_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """(n_c, excess damping in Hz) rows for the carrier-damping fit."""
    return _load_two_columns(path)


@dataclass(frozen=True)
class ThermoOpticModel:
    """Conversion between index change and resonance observables."""

    overlap: float = _OVERLAP
    n_ref: float = _N_REF
    lambda_ref: float = _LAMBDA_REF
    t_ref: float = _T_REF

    @property
    def omega_ref(self) -> float:
        from .core import C_LIGHT

        return TWO_PI * C_LIGHT / self.lambda_ref

    @property
    def shift_factor(self) -> float:
        """Wavelength shift per unit index change, m."""
        return self.lambda_ref * self.n_ref * self.overlap


def thermo_optic_shift(
    t_device: float,
    model: ThermoOpticModel,
    table: RefractiveIndexTable,
) -> tuple[float, float]:
    """Resonance shift (delta_omega, delta_lambda) for a heated device.

    Positive temperature rise increases the index, lengthens the optical
    path and lowers the resonance, so delta_lambda > 0 and
    delta_omega < 0.
    """
    dn = float(table.n_at(t_device)) - float(table.n_at(model.t_ref))
    d_lambda = model.shift_factor * dn
    d_omega = -model.omega_ref * d_lambda / model.lambda_ref
    return d_omega, d_lambda


def bound_temperature_rise(
    delta_lambda: float,
    model: ThermoOpticModel,
    table: RefractiveIndexTable,
    mode: str = "max",
) -> float:
    """Temperature rise bracket implied by a measured wavelength shift.

    The table is silent below its valid_min. mode='max' assumes the index
    freezes there (all the shift must accrue above the knee, the largest
    consistent rise); mode='min' continues the knee slope downward (the
    fastest consistent accrual, the smallest rise). Returns T - t_ref.
    """
    if delta_lambda <= 0.0:
        raise ValueError("delta_lambda must be positive")
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    dn_target = delta_lambda / model.shift_factor
    knee = table.valid_min
    n_knee = float(table.n_at(knee))
    span = knee - model.t_ref
    if span <= 0.0:
        raise ValueError("t_ref must sit below the table's valid_min")

    if mode == "min":
        slope = table.dndt(knee)
        dn_below = slope * span
        if dn_target <= dn_below:
            return dn_target / slope
        remaining = dn_target - dn_below

        def objective_min(t: float) -> float:
            return (float(table.n_at(t)) - n_knee) - remaining

        t_star = brentq(objective_min, knee, table.t_k[-1], xtol=1e-10)
        return t_star - model.t_ref

    def objective_max(t: float) -> float:
        return (float(table.n_at(t)) - n_knee) - dn_target

    if objective_max(table.t_k[-1]) < 0.0:
        raise ValueError("shift exceeds the table's reach above the knee")
    t_star = brentq(objective_max, knee, table.t_k[-1], xtol=1e-10)
    return t_star - model.t_ref


@dataclass(frozen=True)
class PowerLaw:
    """y = amplitude * x ** exponent."""

    amplitude: float
    exponent: float

    def __call__(self, x: float | np.ndarray) -> float | np.ndarray:
        return self.amplitude * np.power(x, self.exponent)


def fit_power_law(x: np.ndarray, y: np.ndarray) -> PowerLaw:
    """Least-squares power law through positive data, fitted in log space."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("x and y must be matching 1-D arrays of length >= 2")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("power-law fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return PowerLaw(amplitude=float(np.exp(intercept)), exponent=float(slope))


@dataclass(frozen=True)
class PolynomialDamping:
    """Single-power excess damping (T - t_ref)^power, zero at the base.

    coeff is in rad/s per K^power. Below t_ref the excess is clamped to
    zero rather than extrapolated negative.
    """

    t_ref: float
    coeff: float
    power: int = 3

    def __post_init__(self) -> None:
        if self.coeff < 0.0:
            raise ValueError("coeff must be non-negative")
        if self.power < 1:
            raise ValueError("power must be at least 1")

    def rate(self, t: float) -> float:
        if t <= self.t_ref:
            return 0.0
        return self.coeff * (t - self.t_ref) ** self.power


def fit_damping_vs_temperature(
    t: np.ndarray,
    gamma_excess: np.ndarray,
    t_ref: float,
    power: int = 3,
) -> PolynomialDamping:
    """Fit the single-power excess model to (T, excess rate) data.

    Linear least squares in the coefficient; points at or below t_ref
    must carry zero excess and are excluded from the normal equations.
    """
    t = np.asarray(t, dtype=float)
    gamma_excess = np.asarray(gamma_excess, dtype=float)
    if t.shape != gamma_excess.shape or t.ndim != 1:
        raise ValueError("t and gamma_excess must be matching 1-D arrays")
    mask = t > t_ref
    if not np.any(mask):
        raise ValueError("no points above t_ref")
    x = (t[mask] - t_ref) ** power
    coeff = float(np.dot(x, gamma_excess[mask]) / np.dot(x, x))
    if coeff < 0.0:
        raise ValueError("fitted coefficient is negative; wrong model or data")
    return PolynomialDamping(t_ref=t_ref, coeff=coeff, power=power)


@dataclass(frozen=True)
class DampingDecomposition:
    """gamma_i(n_c, T) = gamma_i0 + thermal(T) + photon(n_c), plus heating.

    heating maps drive photons to a device temperature rise in K; thermal
    and photon contribute angular rates. t_base is the cold-finger
    temperature the rises add to.
    """

    gamma_i0: float
    t_base: float
    thermal: PolynomialDamping
    photon: PowerLaw
    heating: PowerLaw


@dataclass(frozen=True)
class DampingBreakdown:
    t_device: float
    n_bath: float
    gamma_i0: float
    gamma_thermal: float
    gamma_photon: float
    gamma_i_total: float


def total_intrinsic_damping(
    n_c: float,
    decomposition: DampingDecomposition,
    omega_m: float,
) -> DampingBreakdown:
    """Evaluate the damping decomposition at one drive point."""
    from .core import thermal_occupancy

    if n_c < 0.0:
        raise ValueError("n_c must be non-negative")
    t_device = decomposition.t_base + (
        float(decomposition.heating(n_c)) if n_c > 0.0 else 0.0
    )
    gamma_thermal = decomposition.thermal.rate(t_device)
    gamma_photon = float(decomposition.photon(n_c)) if n_c > 0.0 else 0.0
    gamma_total = decomposition.gamma_i0 + gamma_thermal + gamma_photon
    return DampingBreakdown(
        t_device=t_device,
        n_bath=thermal_occupancy(omega_m, t_device),
        gamma_i0=decomposition.gamma_i0,
        gamma_thermal=gamma_thermal,
        gamma_photon=gamma_photon,
        gamma_i_total=gamma_total,
    )


def default_damping_decomposition(gamma_i0: float = TWO_PI * 35e3) -> DampingDecomposition:
    """Damping defaults calibrated against the reference cooldown.

    Cubic thermal excess of 2.6 Hz/K^3, carrier contribution
    250 Hz * n_c^0.6 and drive heating reaching 13.2 K at the top drive
    point of 2000 photons. These reproduce the observed linewidths and the
    roughly 70k mechanical Q at a 19 K rise, but they are calibrations of
    one device, not physics constants.
    """
    return DampingDecomposition(
        gamma_i0=gamma_i0,
        t_base=_T_REF,
        thermal=PolynomialDamping(t_ref=_T_REF, coeff=TWO_PI * 2.6, power=3),
        photon=PowerLaw(amplitude=TWO_PI * 250.0, exponent=0.6),
        heating=PowerLaw(amplitude=13.2 / 2000.0**0.7, exponent=0.7),
    )
