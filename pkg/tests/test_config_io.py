import json
import math

import numpy as np
import pytest

from omcool.analysis import CalibrationRecord
from omcool.config import ConfigError, config_hash, load_config, parse_config
from omcool.core import kappa_e_from_contrast
from omcool.spectra import Spectrum
from omcool.specio import (
    format_float,
    read_calibration_record,
    read_json,
    read_spectrum_csv,
    write_calibration_record,
    write_json,
    write_spectrum_csv,
    write_table_csv,
)

from conftest import TWO_PI

BASE_SECTIONS = {
    "cavity": ["omega_o = 195 THz", "kappa = 500 MHz", "contrast = 0.25"],
    "mechanics": ["omega_m = 3.68 GHz", "gamma_i0 = 35 kHz", "mass = 330 fg"],
    "bath": ["t_bath = 17.6 K"],
    "coupling": ["g = 910 kHz"],
    "sweep": ["n_c = logspace(10, 2000, 4)"],
}


def config_text(extra=None, replace=None):
    sections = {k: list(v) for k, v in BASE_SECTIONS.items()}
    if replace:
        for sec, lines in replace.items():
            sections[sec] = list(lines)
    if extra:
        for sec, lines in extra.items():
            sections.setdefault(sec, [])
            sections[sec] += list(lines)
    out = []
    for sec, lines in sections.items():
        out.append(f"[{sec}]")
        out += lines
        out.append("")
    return "\n".join(out)


class TestConfigParsing:
    def test_reference_units(self):
        cfg = parse_config(config_text())
        assert cfg.system.cavity.omega_o == pytest.approx(TWO_PI * 195e12, rel=1e-15)
        assert cfg.system.cavity.kappa == pytest.approx(TWO_PI * 500e6, rel=1e-15)
        assert cfg.system.mech.omega_m == pytest.approx(TWO_PI * 3.68e9, rel=1e-15)
        assert cfg.system.mech.gamma_i0 == pytest.approx(TWO_PI * 35e3, rel=1e-15)
        assert cfg.system.mech.mass == pytest.approx(330e-18, rel=1e-15)
        assert cfg.system.g == pytest.approx(TWO_PI * 910e3, rel=1e-15)
        assert cfg.system.bath.t_bath == 17.6

    def test_contrast_resolves_to_kappa_e(self):
        cfg = parse_config(config_text())
        expect = kappa_e_from_contrast(TWO_PI * 500e6, 0.25)
        assert cfg.system.cavity.kappa_e == pytest.approx(expect, rel=1e-15)

    def test_explicit_kappa_e(self):
        text = config_text(
            replace={"cavity": ["omega_o = 195 THz", "kappa = 500 MHz", "kappa_e = 100 MHz"]}
        )
        cfg = parse_config(text)
        assert cfg.system.cavity.kappa_e == pytest.approx(TWO_PI * 100e6, rel=1e-15)

    def test_exactly_one_coupling_spec(self):
        both = config_text(extra={"cavity": ["kappa_e = 100 MHz"]})
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(both)
        neither = config_text(
            replace={"cavity": ["omega_o = 195 THz", "kappa = 500 MHz"]}
        )
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(neither)

    def test_defaults(self):
        cfg = parse_config(config_text())
        assert cfg.detector.volts_per_watt == 4.0e4
        assert cfg.detector.edfa_gain == 100.0
        assert cfg.detector.r_load == 50.0
        assert cfg.l_0 == pytest.approx(10.0 ** (-0.1), rel=1e-15)
        assert cfg.l_1 == pytest.approx(10.0 ** (-0.1), rel=1e-15)
        assert cfg.s_excess == 8.5e-5
        assert cfg.omega_li == pytest.approx(TWO_PI * 1.0e5, rel=1e-15)
        assert cfg.averages == 1000
        assert cfg.points == 4001
        assert cfg.seed == 12345
        assert cfg.span_linewidths == 20.0
        assert cfg.thermal_enabled is False
        assert cfg.output_dir == "runs"

    def test_loss_units(self):
        text = config_text(
            extra={"detection": ["l_0 = 1 dB", "l_1 = 50 %"]}
        )
        cfg = parse_config(text)
        assert cfg.l_0 == pytest.approx(10.0 ** (-0.1), rel=1e-15)
        assert cfg.l_1 == 0.5
        frac = config_text(extra={"detection": ["l_1 = 0.6 fraction"]})
        assert parse_config(frac).l_1 == 0.6

    def test_loss_domain(self):
        with pytest.raises(ConfigError, match="non-negative"):
            parse_config(config_text(extra={"detection": ["l_0 = -1 dB"]}))
        with pytest.raises(ConfigError, match="fraction"):
            parse_config(config_text(extra={"detection": ["l_0 = 1.5 fraction"]}))

    def test_sweep_forms(self):
        log = parse_config(config_text()).n_c_values
        assert log[0] == pytest.approx(10.0) and log[-1] == pytest.approx(2000.0)
        assert np.allclose(np.diff(np.log(log)), np.diff(np.log(log))[0])
        lin = parse_config(
            config_text(replace={"sweep": ["n_c = linspace(100, 400, 4)"]})
        ).n_c_values
        assert lin.tolist() == [100.0, 200.0, 300.0, 400.0]
        explicit = parse_config(
            config_text(replace={"sweep": ["n_c = 5.3, 53, 530"]})
        ).n_c_values
        assert explicit.tolist() == [5.3, 53.0, 530.0]

    def test_sweep_domain(self):
        with pytest.raises(ConfigError, match="positive"):
            parse_config(config_text(replace={"sweep": ["n_c = logspace(0, 2000, 4)"]}))
        with pytest.raises(ConfigError, match="positive"):
            parse_config(config_text(replace={"sweep": ["n_c = 10, -5"]}))
        with pytest.raises(ConfigError, match="at least 1"):
            parse_config(config_text(replace={"sweep": ["n_c = logspace(10, 20, 0)"]}))

    def test_error_line_numbers(self):
        text = config_text()
        bad = text + "[nonsense]\n"
        lineno = bad.count("\n")
        with pytest.raises(ConfigError, match=f"line {lineno}") as err:
            parse_config(bad)
        assert err.value.line == lineno

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'flux'"):
            parse_config(config_text(extra={"cavity": ["flux = 3"]}))

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(config_text(extra={"bath": ["t_bath = 4 K"]}))

    def test_structure_errors(self):
        with pytest.raises(ConfigError, match="outside any section"):
            parse_config("t_bath = 17.6 K\n")
        with pytest.raises(ConfigError, match="malformed section"):
            parse_config("[Cavity!]\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("[bath]\nt_bath 17.6\n")
        with pytest.raises(ConfigError, match="empty value"):
            parse_config("[bath]\nt_bath =\n")

    def test_value_errors(self):
        with pytest.raises(ConfigError, match="needs '<number> <unit>'"):
            parse_config(config_text(replace={"bath": ["t_bath = 17.6"]}))
        with pytest.raises(ConfigError, match="unknown frequency unit"):
            parse_config(config_text(extra={"detection": ["omega_li = 1 Mhz"]}))
        with pytest.raises(ConfigError, match="bad number"):
            parse_config(config_text(replace={"bath": ["t_bath = warm K"]}))

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing required key 't_bath'"):
            parse_config(config_text(replace={"bath": []}))

    def test_acquisition_domains(self):
        for line, msg in [
            ("averages = 0", "at least 1"),
            ("points = 8", "at least 16"),
            ("seed = -1", "non-negative"),
            ("span_linewidths = 0", "positive"),
        ]:
            with pytest.raises(ConfigError, match=msg):
                parse_config(config_text(extra={"acquisition": [line]}))

    def test_bool_values(self):
        for token, expect in [("true", True), ("yes", True), ("on", True),
                              ("false", False), ("no", False), ("off", False)]:
            cfg = parse_config(config_text(extra={"thermal": [f"enabled = {token}"]}))
            assert cfg.thermal_enabled is expect
        with pytest.raises(ConfigError, match="true/false"):
            parse_config(config_text(extra={"thermal": ["enabled = maybe"]}))

    def test_inconsistent_quality_factor(self):
        # declared q_m five percent away from omega_m / gamma_i0
        with pytest.raises(ConfigError, match="q_m"):
            parse_config(config_text(extra={"mechanics": ["q_m = 1.0e5"]}))

    def test_comments_stripped(self):
        text = config_text(
            replace={"bath": ["t_bath = 17.6 K  # cold finger"]}
        )
        assert parse_config(text).system.bath.t_bath == 17.6

    def test_hash_tracks_text(self):
        text = config_text()
        cfg = parse_config(text)
        assert cfg.sha256 == config_hash(text)
        assert cfg.sha256 != config_hash(text + "# trailing note\n")
        assert len(cfg.sha256) == 64

    def test_sweep_array_read_only(self):
        cfg = parse_config(config_text())
        with pytest.raises(ValueError):
            cfg.n_c_values[0] = 1.0

    def test_load_config(self, tmp_path):
        path = tmp_path / "dev.cfg"
        path.write_text(config_text())
        assert load_config(str(path)).system.bath.t_bath == 17.6


def sample_spectrum():
    omega = TWO_PI * np.linspace(3.679e9, 3.681e9, 64)
    values = 1.0 + 1.0 / (1.0 + ((omega - TWO_PI * 3.68e9) / (TWO_PI * 1e6)) ** 2)
    return Spectrum(omega=omega, values=values, units="V2_per_Hz")


class TestSpectrumCsv:
    META = {"n_c": 500.0, "seed": 7, "kind": "signal"}

    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "spec.csv"
        spec = sample_spectrum()
        write_spectrum_csv(str(path), spec, self.META)
        loaded, meta = read_spectrum_csv(str(path))
        assert np.array_equal(loaded.omega / TWO_PI, spec.omega / TWO_PI)
        assert np.array_equal(loaded.values, spec.values)
        assert loaded.units == "V2_per_Hz"
        assert meta["n_c"] == 500.0
        assert meta["seed"] == 7.0
        assert meta["kind"] == "signal"

    def test_rewrite_is_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        spec = sample_spectrum()
        write_spectrum_csv(str(a), spec, self.META)
        loaded, meta = read_spectrum_csv(str(a))
        meta = {k: v for k, v in meta.items() if k not in ("schema_version", "units", "sidedness")}
        write_spectrum_csv(str(b), loaded, meta)
        assert a.read_bytes() == b.read_bytes()

    def test_reserved_keys_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="reserved"):
            write_spectrum_csv(
                str(tmp_path / "x.csv"), sample_spectrum(), {"units": "apples"}
            )

    def test_read_errors(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# schema_version = 1\n#broken meta\nfrequency_Hz,psd_value\n1,2\n")
        with pytest.raises(ValueError, match="malformed metadata"):
            read_spectrum_csv(str(path))
        path.write_text("# schema_version = 1\nfreq,value\n1,2\n")
        with pytest.raises(ValueError, match="column header"):
            read_spectrum_csv(str(path))
        path.write_text("# schema_version = 1\nfrequency_Hz,psd_value\n1,2,3\n")
        with pytest.raises(ValueError, match="two columns"):
            read_spectrum_csv(str(path))
        path.write_text("# schema_version = 1\nfrequency_Hz,psd_value\n")
        with pytest.raises(ValueError, match="no spectrum data"):
            read_spectrum_csv(str(path))
        path.write_text("# schema_version = 9\nfrequency_Hz,psd_value\n1,2\n")
        with pytest.raises(ValueError, match="schema_version"):
            read_spectrum_csv(str(path))

    def test_format_float_is_lossless(self):
        rng = np.random.default_rng(0)
        for x in [1 / 3, 1e-300, 6.62607015e-34, math.pi] + list(rng.normal(size=20)):
            assert float(format_float(x)) == float(x)


class TestJsonAndTables:
    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "t.json"
        payload = {"b": 2.0, "a": [1, 2, 3], "c": {"nested": True}}
        write_json(str(path), payload)
        assert read_json(str(path)) == payload
        first = path.read_bytes()
        write_json(str(path), payload)
        assert path.read_bytes() == first
        assert first.startswith(b"{\n")

    def test_table_csv(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table_csv(str(path), ["n_c", "ok"], [(10.5, 1), (20.0, 0)])
        text = path.read_text()
        assert text.splitlines()[0] == "n_c,ok"
        assert text.splitlines()[1] == "10.5,1"
        with pytest.raises(ValueError, match="row length"):
            write_table_csv(str(path), ["a"], [(1, 2)])

    def test_calibration_round_trip(self, tmp_path):
        path = tmp_path / "cal.json"
        record = CalibrationRecord(
            p_launch_0=1.0e-3,
            p_launch_1=1.1e-3,
            dlambda_0=40.0e-12,
            dlambda_1=30.0e-12,
            l_taper=0.48,
            p_tone_bypass=1.0e-9,
            p_tone_amplified=1.0e-5,
            v_dc=0.2,
            p_dc=5.0e-6,
        )
        write_calibration_record(str(path), record)
        assert read_calibration_record(str(path)) == record

    def test_calibration_bad_payload(self, tmp_path):
        path = tmp_path / "cal.json"
        write_json(str(path), {"p_launch_0": 1.0, "bogus": 2.0})
        with pytest.raises(ValueError, match="cal.json"):
            read_calibration_record(str(path))
