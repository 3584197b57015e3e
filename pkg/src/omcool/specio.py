"""On-disk formats for spectra, truth sidecars, manifests and summaries.

Spectrum files are CSV with '#'-prefixed `key = value` metadata lines
ahead of a `frequency_Hz,psd_value` header. Frequencies are ordinary Hz
in files and converted to angular rad/s at the boundary. Floats are
written with repr-faithful precision so a rerun with the same seed is
byte-identical; nothing here writes wall-clock time for the same reason.

Truth sidecars record what synthesized a trace and exist only for
validation; the analysis pipeline must never read them.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict

import numpy as np

from .analysis import CalibrationRecord
from .spectra import Spectrum

SCHEMA_VERSION = 1
TWO_PI = 2.0 * math.pi

_META_RE = re.compile(r"^#\s*([A-Za-z0-9_]+)\s*=\s*(.*?)\s*$")


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_spectrum_csv(path: str, spectrum: Spectrum, metadata: dict) -> None:
    """Write one spectrum with its acquisition metadata.

    metadata keys are free-form apart from the reserved schema_version,
    units and sidedness, which come from the spectrum itself.
    """
    lines = [
        f"# schema_version = {SCHEMA_VERSION}",
        f"# units = {spectrum.units}",
        f"# sidedness = {spectrum.sidedness}",
    ]
    for key in sorted(metadata):
        if key in ("schema_version", "units", "sidedness"):
            raise ValueError(f"metadata key {key!r} is reserved")
        value = metadata[key]
        rendered = format_float(value) if isinstance(value, float) else str(value)
        lines.append(f"# {key} = {rendered}")
    lines.append("frequency_Hz,psd_value")
    freq = spectrum.omega / TWO_PI
    for f, v in zip(freq, spectrum.values):
        lines.append(f"{format_float(f)},{format_float(v)}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_spectrum_csv(path: str) -> tuple[Spectrum, dict]:
    """Inverse of `write_spectrum_csv`; numeric metadata comes back as float."""
    metadata: dict = {}
    freqs: list[float] = []
    values: list[float] = []
    saw_header = False
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                match = _META_RE.match(line)
                if not match:
                    raise ValueError(f"{path}:{lineno}: malformed metadata line")
                key, value = match.groups()
                try:
                    metadata[key] = float(value)
                except ValueError:
                    metadata[key] = value
                continue
            if not saw_header:
                if line.strip() != "frequency_Hz,psd_value":
                    raise ValueError(f"{path}:{lineno}: unexpected column header {line!r}")
                saw_header = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            freqs.append(float(parts[0]))
            values.append(float(parts[1]))
    if not saw_header or not freqs:
        raise ValueError(f"{path}: no spectrum data found")
    version = metadata.get("schema_version")
    if version != float(SCHEMA_VERSION):
        raise ValueError(f"{path}: unsupported schema_version {version!r}")
    units = str(metadata.get("units", ""))
    sidedness = str(metadata.get("sidedness", "single"))
    spectrum = Spectrum(
        omega=TWO_PI * np.asarray(freqs),
        values=np.asarray(values),
        units=units,
        sidedness=sidedness,
    )
    return spectrum, metadata


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def write_table_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    """Small numeric summary tables; floats keep full precision."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        rendered = [
            format_float(cell) if isinstance(cell, float) else str(cell) for cell in row
        ]
        lines.append(",".join(rendered))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_calibration_record(path: str) -> CalibrationRecord:
    """Load a bench calibration record from JSON."""
    payload = read_json(path)
    try:
        return CalibrationRecord(**payload)
    except TypeError as err:
        raise ValueError(f"{path}: {err}") from err


def write_calibration_record(path: str, record: CalibrationRecord) -> None:
    write_json(path, asdict(record))
