"""Run configuration: a small INI-like format with explicit units.

Layout is `[section]` headers over `key = value [unit]` lines; `#` starts
a comment anywhere. Frequency-like keys require a unit suffix and are
converted to angular rad/s internally; dimensionless keys take bare
numbers. Unknown sections or keys are rejected with the offending line
number, as are malformed values.

Sections and keys:

  [cavity]     omega_o, kappa (freq, required); exactly one of
               kappa_e (freq) or contrast (fraction); q_o (bare, optional)
  [mechanics]  omega_m, gamma_i0 (freq); mass (kg/g/fg); q_m (optional)
  [bath]       t_bath (K)
  [coupling]   g (freq)
  [sweep]      n_c = logspace(a, b, n) | linspace(a, b, n) | v1, v2, ...
  [detection]  g_e (V/W), g_edfa (bare), r_load (Ohm), l_0, l_1
               (dB | fraction | %), s_excess (V_per_rtHz), omega_li (freq)
  [acquisition] averages, seed, points (int), span_linewidths (bare)
  [thermal]    enabled (true/false)
  [output]     directory (string)

Unit suffixes: Hz kHz MHz GHz THz; W mW uW nW pW; kg g fg; m mm um nm pm;
K; Ohm; V/W; V_per_rtHz; dB (power attenuation, 1 dB -> 0.794); fraction;
%. logspace endpoints are plain values, not exponents.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .core import (
    BathState,
    CavityParams,
    MechParams,
    SystemParams,
    kappa_e_from_contrast,
)
from .detection import DetectorParams

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12}
_POWER_UNITS = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9, "pW": 1e-12}
_MASS_UNITS = {"kg": 1.0, "g": 1e-3, "fg": 1e-18}
_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9, "pm": 1e-12}

# (kind, required) per key; sections absent from the file fall back to
# defaults wholesale, but an unknown key inside a present section is fatal
_SCHEMA: dict[str, dict[str, tuple[str, bool]]] = {
    "cavity": {
        "omega_o": ("freq", True),
        "kappa": ("freq", True),
        "kappa_e": ("freq", False),
        "contrast": ("fraction", False),
        "q_o": ("bare", False),
    },
    "mechanics": {
        "omega_m": ("freq", True),
        "gamma_i0": ("freq", True),
        "mass": ("mass", True),
        "q_m": ("bare", False),
    },
    "bath": {"t_bath": ("temperature", True)},
    "coupling": {"g": ("freq", True)},
    "sweep": {"n_c": ("list", True)},
    "detection": {
        "g_e": ("volts_per_watt", False),
        "g_edfa": ("bare", False),
        "r_load": ("resistance", False),
        "l_0": ("loss", False),
        "l_1": ("loss", False),
        "s_excess": ("noise_density", False),
        "omega_li": ("freq", False),
    },
    "acquisition": {
        "averages": ("int", False),
        "seed": ("int", False),
        "points": ("int", False),
        "span_linewidths": ("bare", False),
    },
    "thermal": {"enabled": ("bool", False)},
    "output": {"directory": ("string", False)},
}

_LIST_RE = re.compile(r"^(logspace|linspace)\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$")


def _parse_scaled(value: str, units: dict[str, float], kind: str, line: int) -> float:
    parts = value.split()
    if len(parts) != 2:
        raise ConfigError(f"{kind} value needs '<number> <unit>', got {value!r}", line)
    try:
        number = float(parts[0])
    except ValueError:
        raise ConfigError(f"bad number {parts[0]!r}", line) from None
    if parts[1] not in units:
        raise ConfigError(
            f"unknown {kind} unit {parts[1]!r}; choose from {', '.join(units)}", line
        )
    return number * units[parts[1]]


def _parse_value(kind: str, value: str, line: int):
    if kind == "freq":
        return TWO_PI * _parse_scaled(value, _FREQ_UNITS, "frequency", line)
    if kind == "power":
        return _parse_scaled(value, _POWER_UNITS, "power", line)
    if kind == "mass":
        return _parse_scaled(value, _MASS_UNITS, "mass", line)
    if kind == "length":
        return _parse_scaled(value, _LENGTH_UNITS, "length", line)
    if kind == "temperature":
        return _parse_scaled(value, {"K": 1.0}, "temperature", line)
    if kind == "resistance":
        return _parse_scaled(value, {"Ohm": 1.0}, "resistance", line)
    if kind == "volts_per_watt":
        return _parse_scaled(value, {"V/W": 1.0}, "conversion", line)
    if kind == "noise_density":
        return _parse_scaled(value, {"V_per_rtHz": 1.0}, "noise density", line)
    if kind == "loss":
        parts = value.split()
        if len(parts) != 2 or parts[1] not in ("dB", "fraction", "%"):
            raise ConfigError(
                f"loss value needs '<number> dB|fraction|%', got {value!r}", line
            )
        try:
            number = float(parts[0])
        except ValueError:
            raise ConfigError(f"bad number {parts[0]!r}", line) from None
        if parts[1] == "dB":
            if number < 0.0:
                raise ConfigError("loss in dB must be non-negative", line)
            return 10.0 ** (-number / 10.0)
        frac = number / 100.0 if parts[1] == "%" else number
        if not 0.0 < frac <= 1.0:
            raise ConfigError("loss fraction must lie in (0, 1]", line)
        return frac
    if kind == "fraction":
        parts = value.split()
        try:
            number = float(parts[0])
        except ValueError:
            raise ConfigError(f"bad number {parts[0]!r}", line) from None
        if len(parts) == 2 and parts[1] == "%":
            number /= 100.0
        elif len(parts) != 1:
            raise ConfigError(f"fraction takes a bare number or '%', got {value!r}", line)
        if not 0.0 <= number <= 1.0:
            raise ConfigError("fraction must lie in [0, 1]", line)
        return number
    if kind == "bare":
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"expected a bare number, got {value!r}", line) from None
    if kind == "int":
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"expected an integer, got {value!r}", line) from None
    if kind == "bool":
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "on"):
            return True
        if lowered in ("false", "no", "off"):
            return False
        raise ConfigError(f"expected true/false, got {value!r}", line)
    if kind == "string":
        return value.strip()
    if kind == "list":
        match = _LIST_RE.match(value.strip())
        if match:
            name, a_s, b_s, n_s = match.groups()
            try:
                a, b, n = float(a_s), float(b_s), int(n_s)
            except ValueError:
                raise ConfigError(f"bad list spec {value!r}", line) from None
            if n < 1:
                raise ConfigError("list length must be at least 1", line)
            if name == "logspace":
                if a <= 0.0 or b <= 0.0:
                    raise ConfigError("logspace endpoints must be positive", line)
                return np.geomspace(a, b, n)
            return np.linspace(a, b, n)
        try:
            return np.array([float(tok) for tok in value.split(",")])
        except ValueError:
            raise ConfigError(f"bad list value {value!r}", line) from None
    raise ConfigError(f"internal: unhandled kind {kind}", line)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration ready for the pipelines."""

    system: SystemParams
    n_c_values: np.ndarray
    detector: DetectorParams
    l_0: float
    l_1: float
    s_excess: float
    omega_li: float
    averages: int
    seed: int
    points: int
    span_linewidths: float
    thermal_enabled: bool
    output_dir: str
    sha256: str

    def __post_init__(self) -> None:
        self.n_c_values.setflags(write=False)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def parse_config(text: str) -> RunConfig:
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            match = re.match(r"^\[([a-z_]+)\]$", line)
            if not match:
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = match.group(1)
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ConfigError("key outside any section", lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        entries[(section, key)] = (value, lineno)

    parsed: dict[tuple[str, str], object] = {}
    for (sec, key), (value, lineno) in entries.items():
        kind, _ = _SCHEMA[sec][key]
        parsed[(sec, key)] = _parse_value(kind, value, lineno)
    for sec, keys in _SCHEMA.items():
        for key, (_, required) in keys.items():
            if required and (sec, key) not in parsed:
                raise ConfigError(f"missing required key {key!r} in section [{sec}]")

    has_ke = ("cavity", "kappa_e") in parsed
    has_contrast = ("cavity", "contrast") in parsed
    if has_ke == has_contrast:
        raise ConfigError("section [cavity] needs exactly one of kappa_e or contrast")
    kappa = float(parsed[("cavity", "kappa")])
    if has_ke:
        kappa_e = float(parsed[("cavity", "kappa_e")])
    else:
        kappa_e = kappa_e_from_contrast(kappa, float(parsed[("cavity", "contrast")]))

    def get(sec: str, key: str, default):
        return parsed.get((sec, key), default)

    try:
        cavity = CavityParams(
            omega_o=float(parsed[("cavity", "omega_o")]),
            kappa=kappa,
            kappa_e=kappa_e,
            q_o=None if ("cavity", "q_o") not in parsed else float(parsed[("cavity", "q_o")]),
        )
        mech = MechParams(
            omega_m=float(parsed[("mechanics", "omega_m")]),
            gamma_i0=float(parsed[("mechanics", "gamma_i0")]),
            mass=float(parsed[("mechanics", "mass")]),
            q_m=None if ("mechanics", "q_m") not in parsed else float(parsed[("mechanics", "q_m")]),
        )
        bath = BathState.from_temperature(mech.omega_m, float(parsed[("bath", "t_bath")]))
        system = SystemParams(
            cavity=cavity, mech=mech, g=float(parsed[("coupling", "g")]), bath=bath
        )
        detector = DetectorParams(
            r_load=float(get("detection", "r_load", 50.0)),
            edfa_gain=float(get("detection", "g_edfa", 100.0)),
            g_e=float(get("detection", "g_e", 4.0e4)),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    n_c_values = np.asarray(parsed[("sweep", "n_c")], dtype=float)
    if n_c_values.size < 1 or np.any(n_c_values <= 0.0):
        raise ConfigError("sweep n_c values must be positive")

    averages = int(get("acquisition", "averages", 1000))
    points = int(get("acquisition", "points", 4001))
    seed = int(get("acquisition", "seed", 12345))
    span = float(get("acquisition", "span_linewidths", 20.0))
    if averages < 1:
        raise ConfigError("averages must be at least 1")
    if points < 16:
        raise ConfigError("points must be at least 16")
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    if span <= 0.0:
        raise ConfigError("span_linewidths must be positive")

    return RunConfig(
        system=system,
        n_c_values=n_c_values,
        detector=detector,
        l_0=float(get("detection", "l_0", 10.0 ** (-0.1))),
        l_1=float(get("detection", "l_1", 10.0 ** (-0.1))),
        s_excess=float(get("detection", "s_excess", 8.5e-5)),
        omega_li=float(get("detection", "omega_li", TWO_PI * 1.0e5)),
        averages=averages,
        seed=seed,
        points=points,
        span_linewidths=span,
        thermal_enabled=bool(get("thermal", "enabled", False)),
        output_dir=str(get("output", "directory", "runs")),
        sha256=config_hash(text),
    )


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        return parse_config(handle.read())
