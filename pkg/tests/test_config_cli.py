import math

import numpy as np
import pytest

import dampedwave as dw
from dampedwave import cli, config as cfgmod, reports
from dampedwave.errors import ConfigError

MINIMAL = """
geometry.shape = rectangle
damping.family = saturating
solver.h = 0.125
solver.horizon = 1.0
"""

BASELINE = """
geometry.shape = rectangle
geometry.x0 = -1 -1
geometry.eps = 0.25
geometry.omega = mgc
damping.family = saturating
solver.h = 0.0625
solver.horizon = 2.0
solver.record_stride = 2
solver.u0 = eigenmode 1 1 1.0
output.dir = out
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = cfgmod.parse_config(MINIMAL)
        assert cfg.values["geometry.omega"] == "mgc"
        assert cfg.values["solver.record_stride"] == 1
        assert cfg.values["disturbance.d_amplitude"] == 0.0
        assert cfg.resolved_dt == pytest.approx(0.9 * 0.125 / math.sqrt(2.0))

    def test_cfl_parse_error(self):
        text = "solver.h = 0.05\nsolver.dt = 0.1\n"
        with pytest.raises(ConfigError, match="CFL"):
            cfgmod.parse_config(text)

    def test_duplicate_key_names_both_lines(self):
        text = "solver.h = 0.125\nsolver.horizon = 1\nsolver.h = 0.25\n"
        with pytest.raises(ConfigError, match="lines 1 and 3"):
            cfgmod.parse_config(text)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            cfgmod.parse_config("solver.banana = 1\n")

    def test_type_mismatch_names_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            cfgmod.parse_config("solver.h = fast\n")

    def test_digest_stable_under_reordering(self):
        lines = [ln for ln in BASELINE.strip().splitlines()]
        reordered = "\n".join(reversed(lines))
        assert cfgmod.parse_config(BASELINE).digest == cfgmod.parse_config(reordered).digest

    def test_digest_changes_with_content(self):
        other = BASELINE.replace("eps = 0.25", "eps = 0.3")
        assert cfgmod.parse_config(BASELINE).digest != cfgmod.parse_config(other).digest

    def test_comments_and_blank_lines(self):
        text = "# heading\n\nsolver.h = 0.125  # trailing\n"
        cfg = cfgmod.parse_config(text)
        assert cfg.values["solver.h"] == 0.125

    def test_initial_rule_parse_error(self):
        with pytest.raises(ConfigError, match="solver.u0"):
            cfgmod.parse_config("solver.u0 = eigenmode one two\n")


class TestBuilders:
    def test_geometry_bundle(self):
        cfg = cfgmod.parse_config(BASELINE)
        bundle = cfgmod.build_geometry(cfg)
        assert bundle.grid.n_interior == 15 * 15
        assert bundle.localization.omega.any()
        assert bundle.cutoffs.radii == cfgmod.parse_config(BASELINE).radii

    def test_custom_law_expression(self):
        text = MINIMAL.replace(
            "damping.family = saturating",
            "damping.family = custom\ndamping.g = s*s\ndamping.g_prime = 2*s",
        )
        cfg = cfgmod.parse_config(text)
        law = cfgmod.build_law(cfg)
        assert float(law.fn(3.0)) == 9.0
        assert float(law.deriv(3.0)) == 6.0

    def test_law_overrides(self):
        text = MINIMAL + "damping.q = 3.5\ndamping.c_growth = 7.0\n"
        law = cfgmod.build_law(cfgmod.parse_config(text))
        assert law.q == 3.5 and law.c_growth == 7.0

    def test_sim_assembly(self):
        cfg = cfgmod.parse_config(BASELINE)
        bundle = cfgmod.build_geometry(cfg)
        law = cfgmod.build_law(cfg)
        spec = cfgmod.build_disturbance(cfg)
        sim = cfgmod.build_sim(cfg, bundle, law, spec)
        assert sim.horizon == 2.0
        assert sim.dt == cfg.resolved_dt


def run_cli(tmp_path, text, *args, name="exp.cfg"):
    cfg_path = tmp_path / name
    cfg_path.write_text(text)
    messages = []
    code = cli.main([*args[:1], str(cfg_path), *args[1:], "--out", str(tmp_path / "out")],
                    out=messages.append)
    return code, messages


class TestCmdRun:
    def test_baseline_exit_zero_and_csv(self, tmp_path):
        code, _ = run_cli(tmp_path, BASELINE, "run")
        assert code == 0
        trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
        assert trace[0] == reports.TRACE_HEADER
        ts = [float(row.split(",")[0]) for row in trace[1:]]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        report = (tmp_path / "out" / "report.txt").read_text()
        assert "budget.C1_d = " in report
        assert "fit.sigma_hat = " in report

    def test_mgc_violation_exits_two(self, tmp_path):
        text = BASELINE.replace("geometry.omega = mgc", "geometry.omega = none")
        text += "geometry.require_mgc = true\n"
        code, messages = run_cli(tmp_path, text, "run")
        assert code == 2
        assert any("coverage check FAILED" in m for m in messages)

    def test_bad_custom_law_exits_two(self, tmp_path):
        text = BASELINE + (
            "damping.require_h1 = true\n"
        )
        text = text.replace("damping.family = saturating",
                            "damping.family = custom\ndamping.g = s*s\ndamping.g_prime = 2*s")
        code, messages = run_cli(tmp_path, text, "run")
        assert code == 2
        assert any("hypothesis check FAILED" in m for m in messages)

    def test_parse_fault_exits_one(self, tmp_path):
        code, messages = run_cli(tmp_path, "solver.h = -1\n", "run")
        assert code == 1
        assert any("error:" in m for m in messages)

    def test_reproducible_trace_bytes(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(BASELINE)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["run", str(cfg_path), "--out", str(out1)], out=lambda m: None) == 0
        assert cli.main(["run", str(cfg_path), "--out", str(out2)], out=lambda m: None) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        rep1 = [l for l in (out1 / "report.txt").read_text().splitlines() if "wall_time" not in l]
        rep2 = [l for l in (out2 / "report.txt").read_text().splitlines() if "wall_time" not in l]
        assert rep1 == rep2

    def test_rasters_written(self, tmp_path):
        text = BASELINE + "output.rasters = true\n"
        code, _ = run_cli(tmp_path, text, "run")
        assert code == 0
        for name in ("a", "psi", "xi", "beta", "omega"):
            raster = tmp_path / "out" / f"raster_{name}.csv"
            assert raster.exists()
            assert raster.read_text().splitlines()[0] == "x,y,value"

    def test_multiplier_report_keys(self, tmp_path):
        text = BASELINE + "solver.snapshot_every = 2\nanalysis.multiplier_windows = 1 2\n"
        code, _ = run_cli(tmp_path, text, "run")
        assert code == 0
        report = (tmp_path / "out" / "report.txt").read_text()
        assert "multiplier_2.rho = " in report

    def test_snapshot_rasters(self, tmp_path):
        text = BASELINE + "solver.snapshot_every = 8\noutput.snapshot_rasters = true\n"
        code, _ = run_cli(tmp_path, text, "run")
        assert code == 0
        snaps = sorted((tmp_path / "out").glob("snapshot_u_*.csv"))
        assert snaps
        assert snaps[0].read_text().splitlines()[0] == "x,y,value"


SWEEP = BASELINE + """
disturbance.e_time = pulse
disturbance.e_t0 = 0.0
disturbance.e_t1 = 1.0
disturbance.e_space = gaussian
disturbance.e_center = 0.5 0.5
disturbance.e_width = 0.2
disturbance.e_amplitude = 1.0
disturbance.scales = 0 1 2
"""


class TestCmdSweep:
    def test_degenerate_single_scale(self, tmp_path):
        text = SWEEP.replace("disturbance.scales = 0 1 2", "disturbance.scales = 0")
        code, messages = run_cli(tmp_path, text, "sweep")
        assert code == 0
        assert (tmp_path / "out" / "trace_s0.csv").exists()

    def test_three_scale_gain_table(self, tmp_path):
        code, messages = run_cli(tmp_path, SWEEP, "sweep")
        assert code == 0
        report = (tmp_path / "out" / "report.txt").read_text()
        einf = [float(l.split("=")[1]) for l in report.splitlines() if l.startswith("iss.Einf_")]
        assert len(einf) == 3
        assert all(b >= a - 1e-12 for a, b in zip(einf, einf[1:]))
        for s in (0, 1, 2):
            assert (tmp_path / "out" / f"trace_s{s}.csv").exists()

    def test_missing_zero_scale_faults(self, tmp_path):
        text = SWEEP.replace("disturbance.scales = 0 1 2", "disturbance.scales = 1 2")
        code, messages = run_cli(tmp_path, text, "sweep")
        assert code == 1
        assert any("must include 0" in m for m in messages)


class TestCmdVerify:
    def test_gn_reference(self, capsys):
        messages = []
        code = cli.main(
            ["verify", "gn", "--N", "2", "--m", "1", "--q", "2", "--r", "2", "--p", "4"],
            out=messages.append,
        )
        assert code == 0
        assert messages == ["theta = 0.5"]

    def test_gronwall_on_csv(self, tmp_path):
        t = np.arange(0.0, 30.0, 0.05)
        E = np.exp(-t)
        path = tmp_path / "trace.csv"
        path.write_text("t,E\n" + "\n".join(f"{a:.17g},{b:.17g}" for a, b in zip(t, E)))
        messages = []
        code = cli.main(["verify", "gronwall", str(path), "--T", "1.0"], out=messages.append)
        assert code == 0
        assert messages[0] == "verdict = holds"

    def test_gronwall_malformed_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        code = cli.main(["verify", "gronwall", str(path), "--T", "1.0"], out=lambda m: None)
        assert code == 1

    def test_generalized_self_test(self):
        messages = []
        code = cli.main(
            ["verify", "generalized-gronwall", "--self-test", "10", "--seed", "3"],
            out=messages.append,
        )
        assert code == 0
        assert messages == ["10/10 bound holds"]

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0
        assert "dampedwave" in capsys.readouterr().out


def test_trace_csv_roundtrip(tmp_path):
    grid = dw.build_grid(dw.DomainSpec.rectangle(1, 1), 1.0 / 16.0)
    loc = dw.build_localization(grid.interior, 1.0, "constant", grid)
    cfg = dw.SimConfig(
        grid=grid, localization=loc, law=dw.saturating(),
        disturbance=dw.DisturbanceSpec.none(),
        dt=0.9 * grid.h / math.sqrt(2.0), horizon=0.5,
        u0=dw.InitialRule(dw.EigenmodeField(1, 1), 1.0),
    )
    rec = dw.run(cfg)
    path = tmp_path / "trace.csv"
    reports.write_trace_csv(path, rec)
    data = reports.read_trace_csv(path)
    assert np.array_equal(data["t"], rec.times)
    assert np.array_equal(data["E"], rec.E)
