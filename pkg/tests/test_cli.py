import csv
import io
import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpsr import cli, scenarios
from cpsr.analytic import transmission
from cpsr.configfile import format_config
from cpsr.errors import ConfigError, DomainError
from cpsr.params import derive_all


@pytest.fixture
def rb_cfg(tmp_path, rb):
    p = tmp_path / "rb.cfg"
    p.write_text(format_config(rb.cell, rb.beam))
    return p


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


SIG9 = re.compile(r"^-?(\d\.?\d*(e[+-]\d+)?|\d+\.?\d*(e[+-]\d+)?|nan|inf)$")


class TestParseConfig:
    TEXT = """# Rb cell
species = RbNatural
temperature_c = 154
length_cm = 1
area_cm2 = 1
gamma_opt_ghz = 2.6
wavelength_nm = 795
p_control_mw = 15.2
p_signal_mw = 0.020
delta_ghz = 89
p_pump_mw = 60
delta_pump_ghz = 45
omega_a_hz = 268   # Larmor
r_sd_hz = 98
"""

    def test_matches_builtin(self, rb):
        cell, beam = cli.parse_config(self.TEXT)
        assert beam == rb.beam
        assert cell.temperature_k == pytest.approx(rb.cell.temperature_k, rel=1e-15)
        assert derive_all(cell, beam).coupling == pytest.approx(rb.rates.coupling, rel=1e-12)

    def test_missing_key(self):
        text = "\n".join(l for l in self.TEXT.splitlines() if not l.startswith("delta_ghz"))
        with pytest.raises(ConfigError, match="missing key: delta_ghz"):
            cli.parse_config(text)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key: colour"):
            cli.parse_config(self.TEXT + "colour = 3\n")

    def test_malformed_number(self):
        with pytest.raises(ConfigError, match="line 4"):
            cli.parse_config(self.TEXT.replace("length_cm = 1", "length_cm = one"))

    def test_negative_temperature(self):
        with pytest.raises(DomainError):
            cli.parse_config(self.TEXT.replace("temperature_c = 154", "temperature_c = -300"))

    def test_wavelength_default(self, rb):
        cell, _ = cli.parse_config(self.TEXT.replace("wavelength_nm = 795\n", ""))
        assert cell.wavelength_nm == 795.0

    @given(st.floats(300.0, 600.0), st.floats(0.0, 200.0), st.floats(-500.0, 500.0),
           st.floats(1.0, 1000.0))
    def test_round_trip_bit_exact(self, t, p_pump, delta, w):
        from dataclasses import replace
        sc = scenarios.builtin("k_fig4")
        cell = replace(sc.cell, temperature_k=t)
        beam = replace(sc.beam, p_pump_mw=p_pump, delta_ghz=delta, omega_a_hz=w)
        assert cli.parse_config(format_config(cell, beam)) == (cell, beam)


class TestParams:
    def test_report_lists_every_field(self, capsys, rb_cfg):
        code, out, _ = run(capsys, "params", "--config", rb_cfg)
        assert code == 0
        for name in derive_all(*cli.parse_config(rb_cfg.read_text())).as_dict():
            assert re.search(rf"^{name} = ", out, re.M)
        assert "2*pi" in out.splitlines()[0]

    def test_report_reparses(self, capsys, rb_cfg):
        _, out, _ = run(capsys, "params", "--config", rb_cfg)
        cell, beam, reported = cli.parse_params_report(out)
        rates = derive_all(cell, beam)
        assert rates == derive_all(*cli.parse_config(rb_cfg.read_text()))
        assert reported == cli.report_values(rates)

    @given(st.floats(320.0, 580.0), st.floats(0.0, 100.0))
    def test_report_self_consistent(self, t, p_pump):
        from dataclasses import replace
        sc = scenarios.builtin("rb_fig2")
        cell, beam = replace(sc.cell, temperature_k=t), replace(sc.beam, p_pump_mw=p_pump)
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            text = cli.format_params_report(cell, beam)
            c2, b2, reported = cli.parse_params_report(text)
            assert derive_all(c2, b2) == derive_all(cell, beam)
            assert reported == cli.report_values(derive_all(cell, beam))


class TestSpectrum:
    def test_row_count_and_header(self, capsys, rb_cfg):
        code, out, _ = run(capsys, "spectrum", "--grid", -600, 600, 481, "--config", rb_cfg)
        table = rows(out)
        assert code == 0 and len(table) == 482
        assert table[0] == ["omega_hz", "re_t", "im_t", "abs_t", "phase_deg"]
        assert sum(1 for r in table if r[0] == "omega_hz") == 1

    def test_values_match_oracle(self, capsys, rb_cfg, rb_rates):
        _, out, _ = run(capsys, "spectrum", "--grid", -600, 600, 5, "--config", rb_cfg)
        for r in rows(out)[1:]:
            w = 2 * math.pi * float(r[0])
            t = transmission(w, rb_rates.coupling, rb_rates.omega_a, rb_rates.gamma)
            assert float(r[1]) == pytest.approx(t.real, rel=1e-8, abs=1e-9)
            assert float(r[3]) == pytest.approx(abs(t), rel=1e-8)
            assert float(r[4]) == pytest.approx(math.degrees(np.angle(t)), rel=1e-8, abs=1e-7)

    def test_nine_significant_digits(self, capsys, rb_cfg):
        _, out, _ = run(capsys, "spectrum", "--grid", -600, 600, 31, "--config", rb_cfg)
        for r in rows(out)[1:]:
            for cell in r:
                assert SIG9.match(cell)
                digits = re.sub(r"e.*$", "", cell).replace("-", "").replace(".", "").lstrip("0")
                assert len(digits) <= 9

    def test_output_file_deterministic(self, capsys, rb_cfg, tmp_path, monkeypatch):
        outs = []
        for i, threads in enumerate(("1", "3")):
            monkeypatch.setenv("CPSR_THREADS", threads)
            path = tmp_path / f"s{i}.csv"
            code, _, _ = run(capsys, "spectrum", "--grid", -400, 400, 9, "--config", rb_cfg,
                             "--model", "both", "-o", path)
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_bad_grid(self, capsys, rb_cfg):
        code, _, err = run(capsys, "spectrum", "--grid", 10, -10, 5, "--config", rb_cfg)
        assert code == 1 and "grid" in err
        code, _, _ = run(capsys, "spectrum", "--grid", -10, 10, 1, "--config", rb_cfg)
        assert code == 1

    def test_missing_config(self, capsys, tmp_path):
        code, out, err = run(capsys, "params", "--config", tmp_path / "nope.cfg")
        assert code == 1 and out == "" and "cannot read" in err

    def test_config_error_to_stderr(self, capsys, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("species = K\n")
        code, out, err = run(capsys, "params", "--config", p)
        assert code == 1 and out == "" and "missing key" in err


class TestScenario:
    def test_both_models(self, capsys):
        code, out, _ = run(capsys, "scenario", "rb_fig2", "--model", "both",
                           "--grid", -400, 400, 5)
        table = rows(out)
        assert code == 0
        assert "abs_t_analytic" in table[0] and "abs_t_detailed" in table[0]
        analytic = scenarios.builtin("rb_fig2").rates
        for r in table[1:]:
            w = 2 * math.pi * float(r[0])
            t = transmission(w, analytic.coupling, analytic.omega_a, analytic.gamma)
            a = float(r[table[0].index("abs_t_analytic")])
            d = float(r[table[0].index("abs_t_detailed")])
            assert a == pytest.approx(abs(t), rel=1e-8)
            assert d == pytest.approx(a, abs=0.1)

    def test_unknown(self, capsys):
        code, _, err = run(capsys, "scenario", "nope")
        assert code == 1 and "rb_fig2" in err

    def test_show_config(self, capsys, k):
        code, out, _ = run(capsys, "scenario", "k_fig4", "--show-config")
        assert code == 0 and cli.parse_config(out) == (k.cell, k.beam)

    def test_pump_sweep(self, capsys):
        code, out, err = run(capsys, "scenario", "rb_pump_sweep", "--values", 0, 30, 60)
        table = rows(out)
        assert code == 0 and len(table) == 4 and "maximum amplification" in err
        assert float(table[1][3]) == 0.0

    def test_serf_sweep(self, capsys):
        code, out, err = run(capsys, "scenario", "rb_serf_sweep", "--values", 100, 300, 500)
        assert code == 0 and len(rows(out)) == 4 and "omega_a^2" in err


class TestSweep:
    def test_one_row_per_value(self, capsys, rb_cfg):
        code, out, _ = run(capsys, "sweep", "--config", rb_cfg, "--param", "omega_a_hz",
                           "--values", 150, 250, 350)
        table = rows(out)
        assert code == 0 and len(table) == 4
        assert table[0][:3] == ["omega_a_hz", "analytic_center_hz", "analytic_fwhm_hz"]
        fwhm = [float(r[2]) for r in table[1:]]
        assert fwhm == sorted(fwhm)

    def test_bad_param(self, capsys, rb_cfg):
        code, _, err = run(capsys, "sweep", "--config", rb_cfg, "--param", "colour",
                           "--values", 1)
        assert code == 1 and "colour" in err


class TestFits:
    def test_fit_line_flat(self, capsys, tmp_path):
        p = tmp_path / "flat.csv"
        p.write_text("x,y\n" + "".join(f"{i},1\n" for i in range(20)))
        code, out, err = run(capsys, "fit-line", p)
        assert code == 2 and out == "" and "no extremum found" in err

    def test_fit_line_recovers(self, capsys, tmp_path):
        w = np.linspace(-600.0, 600.0, 601)
        g, wa = 40.0, 268.0
        t = transmission(w, 2 * g * math.hypot(wa, g) / wa, wa, g)
        p = tmp_path / "line.csv"
        p.write_text("omega_hz,abs_t\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(w, abs(t))))
        code, out, _ = run(capsys, "fit-line", p)
        fitted = {r[0]: (float(r[1]), float(r[2])) for r in rows(out)[1:]}
        assert code == 0
        assert fitted["gamma_hz"][0] == pytest.approx(g, rel=1e-3)
        assert fitted["omega_a_hz"][0] == pytest.approx(wa, rel=1e-3)
        assert fitted["contrast"][0] == pytest.approx(1.0, rel=1e-3)

    def test_fit_absorption(self, capsys, tmp_path):
        from cpsr.lineshape import bundled_line_list, one_photon_model
        nu = np.linspace(-30.0, 30.0, 121)
        power = np.exp(-one_photon_model(nu, 1.5, 2.6, bundled_line_list("RbNatural")))
        p = tmp_path / "abs.csv"
        p.write_text("".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(nu, power)))
        code, out, _ = run(capsys, "fit-absorption", p, "--species", "RbNatural")
        fitted = {r[0]: float(r[1]) for r in rows(out)[1:]}
        assert code == 0 and fitted["gamma_opt_ghz"] == pytest.approx(2.6, rel=1e-3)

    def test_fit_absorption_needs_lines(self, capsys, tmp_path):
        p = tmp_path / "abs.csv"
        p.write_text("1,1\n")
        code, _, _ = run(capsys, "fit-absorption", p)
        assert code == 1

    def test_malformed_csv(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n3,abc\n")
        code, _, err = run(capsys, "fit-line", p)
        assert code == 1 and "line 3" in err


def test_usage_error(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 1 and err


def test_run_config_invariants():
    with pytest.raises(cli.UsageError):
        cli.RunConfig("spectrum", grid=(1.0, 0.0, 5))
    with pytest.raises(cli.UsageError):
        cli.RunConfig("spectrum", grid=(0.0, 1.0, 1))
