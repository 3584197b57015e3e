"""Shared fixtures: the reference device and detection chain."""

import math

import pytest

from omcool.core import (
    BathState,
    CavityParams,
    MechParams,
    SystemParams,
    kappa_e_from_contrast,
)
from omcool.detection import DetectorParams

TWO_PI = 2.0 * math.pi


def make_device(kappa_e: float | None = None, t_bath: float = 17.6) -> SystemParams:
    kappa = TWO_PI * 500e6
    if kappa_e is None:
        kappa_e = kappa_e_from_contrast(kappa, 0.25)
    cavity = CavityParams(omega_o=TWO_PI * 195e12, kappa=kappa, kappa_e=kappa_e)
    mech = MechParams(omega_m=TWO_PI * 3.68e9, gamma_i0=TWO_PI * 35e3, mass=330e-18)
    bath = BathState.from_temperature(mech.omega_m, t_bath)
    return SystemParams(cavity=cavity, mech=mech, g=TWO_PI * 910e3, bath=bath)


@pytest.fixture(scope="session")
def device() -> SystemParams:
    """Reference device: undercoupled cavity, 17.6 K bath."""
    return make_device()


@pytest.fixture(scope="session")
def bench_device() -> SystemParams:
    """Fully overcoupled variant used for closed-loop readout tests."""
    return make_device(kappa_e=TWO_PI * 500e6)


@pytest.fixture(scope="session")
def detector() -> DetectorParams:
    """Calibrated receiver: EDFA, 40 kV/W receiver, 50 ohm analyzer."""
    return DetectorParams(edfa_gain=100.0, g_e=4.0e4, r_load=50.0)


@pytest.fixture(scope="session")
def bare_detector() -> DetectorParams:
    """Unity-gain lossless receiver for algebraic round trips."""
    return DetectorParams(edfa_gain=1.0, g_e=4.0e4, r_load=50.0)
