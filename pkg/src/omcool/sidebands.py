"""Classical sideband ladder of a driven cavity with a modulated resonance.

Coherent mechanical motion at omega_m phase-modulates the intracavity
field. In the laser frame the field is a ladder of tones at multiples of
omega_m; component p evolves as e^{-i p omega_m t}, so p = +1 is the
optical sideband above the laser. The steady state solves a tridiagonal
linear system; in the resolved-sideband, weak-modulation limit the first
ladder rung has a closed form, and the solver exists to quantify when that
limit holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HBAR, CavityParams, DriveState

_ORDER_CAP = 30


@dataclass(frozen=True)
class SidebandProblem:
    """One drive tone, one coherently oscillating mechanical mode.

    beta_0 is the complex phonon-ladder amplitude of the motion; its phase
    sets the sideband phases, |beta_0|^2 is the coherent phonon number.
    order is the default ladder truncation, counted in sidebands per side.
    """

    cavity: CavityParams
    drive: DriveState
    omega_m: float
    g: float
    beta_0: complex
    order: int = 2

    def __post_init__(self) -> None:
        if self.omega_m <= 0.0:
            raise ValueError("omega_m must be positive")
        if self.g < 0.0:
            raise ValueError("g must be non-negative")
        if self.order < 1:
            raise ValueError("order must be at least 1")

    @property
    def modulation_factor(self) -> float:
        """|g beta_0| / omega_m, the ladder expansion parameter."""
        return abs(self.g * self.beta_0) / self.omega_m


def build_coupling_matrix(problem: SidebandProblem, order: int) -> np.ndarray:
    """Tridiagonal ladder matrix for components p = -order .. +order.

    Row p reads (i(Delta - p omega_m) + kappa/2) alpha_p
    + i g (beta_0 alpha_{p-1} + conj(beta_0) alpha_{p+1}).
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    n = 2 * order + 1
    delta = problem.drive.detuning
    kappa = problem.cavity.kappa
    m = np.zeros((n, n), dtype=complex)
    for row, p in enumerate(range(-order, order + 1)):
        m[row, row] = 1j * (delta - p * problem.omega_m) + 0.5 * kappa
        if row > 0:
            m[row, row - 1] = 1j * problem.g * problem.beta_0
        if row < n - 1:
            m[row, row + 1] = 1j * problem.g * np.conj(problem.beta_0)
    return m


@dataclass(frozen=True)
class SidebandSolution:
    """Steady ladder amplitudes from a truncated solve."""

    order: int
    alpha: np.ndarray
    converged: bool

    def __post_init__(self) -> None:
        self.alpha.setflags(write=False)

    def component(self, p: int) -> complex:
        if abs(p) > self.order:
            raise ValueError(f"component {p} outside truncation order {self.order}")
        return complex(self.alpha[self.order + p])


def _solve_fixed(problem: SidebandProblem, order: int) -> np.ndarray:
    m = build_coupling_matrix(problem, order)
    rhs = np.zeros(2 * order + 1, dtype=complex)
    rhs[order] = -math.sqrt(0.5 * problem.cavity.kappa_e) * math.sqrt(problem.drive.n_in)
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as err:
        cond = np.linalg.cond(m)
        raise RuntimeError(
            f"ladder solve failed at order {order}, condition number {cond:.3g}"
        ) from err


def solve_sidebands(
    problem: SidebandProblem,
    order: int | None = None,
    tol: float = 1e-9,
) -> SidebandSolution:
    """Solve the ladder, refining the truncation until alpha_{+-1} settle.

    Passing an explicit order disables refinement; that path is for
    convergence studies. Otherwise the order grows by 2 from problem.order
    until both first sidebands are stable to tol relative, or the cap of
    30 is hit, which raises.
    """
    if order is not None:
        alpha = _solve_fixed(problem, order)
        return SidebandSolution(order=order, alpha=alpha, converged=True)

    current = max(1, problem.order)
    alpha = _solve_fixed(problem, current)
    while current < _ORDER_CAP:
        trial = current + 2
        alpha_next = _solve_fixed(problem, trial)
        stable = True
        for p in (-1, 1):
            a_lo = alpha[current + p]
            a_hi = alpha_next[trial + p]
            scale = max(abs(a_hi), abs(a_lo))
            if scale > 0.0 and abs(a_hi - a_lo) > tol * scale:
                stable = False
                break
        if stable:
            return SidebandSolution(order=trial, alpha=alpha_next, converged=True)
        current, alpha = trial, alpha_next
    raise RuntimeError(
        f"sideband ladder did not converge below order {_ORDER_CAP}; "
        f"modulation factor {problem.modulation_factor:.3g}"
    )


def closed_form_sidebands(problem: SidebandProblem) -> tuple[complex, complex, complex]:
    """First-order ladder amplitudes (alpha_0, alpha_+1, alpha_-1).

    Exact as modulation_factor -> 0; the relative error of the first
    sidebands scales as (2 g |beta_0|)^2 / (omega_m kappa) near resonance.
    """
    delta = problem.drive.detuning
    kappa = problem.cavity.kappa
    om = problem.omega_m
    alpha_0 = -math.sqrt(0.5 * problem.cavity.kappa_e) * math.sqrt(problem.drive.n_in) / (
        1j * delta + 0.5 * kappa
    )
    alpha_p = -1j * problem.g * problem.beta_0 * alpha_0 / (1j * (delta - om) + 0.5 * kappa)
    alpha_m = -1j * problem.g * np.conj(problem.beta_0) * alpha_0 / (
        1j * (delta + om) + 0.5 * kappa
    )
    return alpha_0, complex(alpha_p), complex(alpha_m)


@dataclass(frozen=True)
class SidebandPower:
    """Photodetected beat of both first sidebands against the carrier.

    a_cos and a_sin are the in-phase and quadrature photon-flux amplitudes
    of the beat note at omega_m; p_sb = hbar omega_o sqrt(a_cos^2 + a_sin^2)
    is the equivalent optical modulation power. The carrier is taken as the
    far-detuned input tone, which reflects essentially unattenuated.
    """

    a_cos: float
    a_sin: float
    p_sb: float


def detected_sideband_power(
    problem: SidebandProblem,
    solution: SidebandSolution | None = None,
) -> SidebandPower:
    """Beat amplitudes of the +-1 sidebands on the detected photocurrent.

    Both sidebands land at omega_m after detection; their beat phasors add
    as A_+ + conj(A_-), which interferes constructively or destructively
    with the motional phase. Uses the closed forms unless a ladder solution
    is supplied.
    """
    if solution is None:
        _, alpha_p, alpha_m = closed_form_sidebands(problem)
    else:
        alpha_p = solution.component(+1)
        alpha_m = solution.component(-1)
    root_flux = 2.0 * math.sqrt(0.5 * problem.cavity.kappa_e * problem.drive.n_in)
    beat = root_flux * (alpha_p + np.conj(alpha_m))
    a_cos = float(np.real(beat))
    a_sin = float(-np.imag(beat))
    p_sb = HBAR * problem.cavity.omega_o * abs(beat)
    return SidebandPower(a_cos=a_cos, a_sin=a_sin, p_sb=p_sb)


def spp_spectral_density(
    problem: SidebandProblem,
    omega: np.ndarray,
    gamma: float,
    n_bar: float,
) -> np.ndarray:
    """Detected beat-power spectral density of incoherent motion.

    The coherent amplitude is replaced by sqrt(n_bar) and the delta line
    at omega_m is broadened to a unit-area Lorentzian of FWHM gamma
    (rad/s), so the integral over omega returns the squared beat power
    p_sb^2 in W^2. gamma must be positive.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if n_bar < 0.0:
        raise ValueError("n_bar must be non-negative")
    omega = np.asarray(omega, dtype=float)
    thermal = SidebandProblem(
        cavity=problem.cavity,
        drive=problem.drive,
        omega_m=problem.omega_m,
        g=problem.g,
        beta_0=complex(math.sqrt(n_bar)),
        order=problem.order,
    )
    power = detected_sideband_power(thermal)
    half = 0.5 * gamma
    line = (half / math.pi) / ((omega - problem.omega_m) ** 2 + half**2)
    return power.p_sb**2 * line
