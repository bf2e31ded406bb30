import json

import numpy as np
import pytest

from cconvex.cli import main
from cconvex.config import RunConfig, parse_config_text
from cconvex.errors import ConfigError
from cconvex.gridfn import GridFunction
from cconvex.report import from_json, summary_text, to_canonical_json


class TestConfig:
    def test_parse_basic(self):
        text = """
        # comment
        cost.name = power
        cost.p = 4
        seed = 7
        budget.loeper = 500
        """
        vals = parse_config_text(text)
        assert vals["cost.name"] == "power"
        assert vals["cost.p"] == 4.0
        assert vals["seed"] == 7

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("cost.nmae = power")
        assert "cost.nmae" in str(err.value)

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            parse_config_text("seed = seven")

    def test_defaults_valid_for_all_costs(self):
        for name in ("quadratic", "bilinear", "power", "log", "sqrt"):
            cfg = RunConfig(values={"cost.name": name})
            model = cfg.build_model()
            assert model.name == name

    def test_domain_override(self):
        cfg = RunConfig(values={"cost.name": "power", "domain.x_min": 0.0,
                                "domain.x_max": 1.0, "domain.y_min": 1.5,
                                "domain.y_max": 2.5})
        model = cfg.build_model()
        assert model.domain.separation > 0

    def test_power_overlapping_domains_rejected(self):
        cfg = RunConfig(values={"cost.name": "power", "domain.x_min": 0.0,
                                "domain.x_max": 1.0, "domain.y_min": 0.5,
                                "domain.y_max": 2.5})
        with pytest.raises(ConfigError):
            cfg.build_model()

    def test_budget_scale(self):
        cfg = RunConfig(values={"budget_scale": 0.5, "budget.loeper": 1000})
        assert cfg.budget("loeper") == 500


class TestReportSerialisation:
    def test_round_trip(self):
        report = {"a": [1.0, 2.5], "b": {"c": np.float64(0.1), "d": np.inf}}
        data = to_canonical_json(report)
        parsed = from_json(data)
        assert parsed["b"]["d"] == "unbounded"
        assert parsed["a"] == [1.0, 2.5]

    def test_canonical_float_digits(self):
        data = to_canonical_json({"x": 0.1 + 0.2})
        assert json.loads(data)["x"] == 0.1 + 0.2

    def test_summary_contains_verdicts(self):
        report = {"command": "analyze", "seed": 0,
                  "analyses": {"mtw": {"verdict": "nonneg", "min_value": 0.0},
                               "loeper": {"verdict": "none"}},
                  "artifacts": [], "wall_time_s": 0.5}
        text = summary_text(report)
        assert "mtw: verdict=nonneg" in text
        assert "loeper: verdict=none" in text


def run_cli(args):
    return main(args)


class TestCLI:
    def test_constants_run(self, tmp_path):
        code = run_cli(["constants", "--output", str(tmp_path), "--seed", "3"])
        assert code == 0
        report = from_json((tmp_path / "report.json").read_bytes())
        assert report["schema_version"] == 1
        assert "constants" in report["analyses"]
        consts = json.loads((tmp_path / "constants.json").read_text())
        assert set(consts) == {"lip_c", "alpha", "beta", "L", "omega_table"}

    def test_determinism_byte_identical(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = quadratic\nbudget.loeper = 200\n"
                           "budget.mtw = 100\nbudget.qqconv = 100\n"
                           "budget.chord_probe = 2\nlattice.y_nodes = 17\n")
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            code = run_cli(["analyze", "--config", str(cfgfile), "--output",
                            str(out), "--seed", "11"])
            assert code == 0
            outs.append((out / "report.json").read_bytes())
        assert outs[0] == outs[1]

    def test_chord_worked_example(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = quadratic\ndomain.x_min = -3\n"
                           "domain.x_max = 3\ndomain.y_min = -3\ndomain.y_max = 3\n"
                           "lattice.x_nodes = 33\nlattice.y_nodes = 33\n"
                           "chord.x0 = 0 0\nchord.x1 = 1 0\n")
        out = tmp_path / "out"
        code = run_cli(["chord", "--config", str(cfgfile), "--output", str(out)])
        assert code == 0
        report = from_json((out / "report.json").read_bytes())
        assert report["analyses"]["chord"]["midpoint_value"] == pytest.approx(0.125, abs=1e-4)
        surface = GridFunction.from_csv((out / "chord_surface.csv").read_text())
        assert surface.shape == (33, 33)

    def test_counterexample_quadratic_exit_2(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = quadratic\nbudget.counterexample = 150\n")
        out = tmp_path / "out"
        code = run_cli(["counterexample", "--config", str(cfgfile), "--output", str(out)])
        assert code == 2
        report = from_json((out / "report.json").read_bytes())
        assert report["analyses"]["counterexample"]["verdict"] is False
        assert "no_violation_found" in report["analyses"]["counterexample"]

    def test_envelope_demo(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = quadratic\nlattice.x_nodes = 21\n"
                           "lattice.y_nodes = 21\n")
        out = tmp_path / "out"
        code = run_cli(["envelope", "--config", str(cfgfile), "--output", str(out)])
        assert code == 0
        report = from_json((out / "report.json").read_bytes())
        assert report["analyses"]["envelope"]["is_c_convex"] is False
        env = GridFunction.from_csv((out / "envelope.csv").read_text())
        phi = GridFunction.from_csv((out / "input_phi.csv").read_text())
        assert np.all(env.values <= phi.values + 1e-12)

    def test_check_convexity(self, tmp_path):
        out = tmp_path / "out"
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = bilinear\nbudget.loeper = 200\n")
        code = run_cli(["check-convexity", "--config", str(cfgfile),
                        "--output", str(out)])
        assert code == 0
        report = from_json((out / "report.json").read_bytes())
        assert report["analyses"]["domain_c_convexity"]["holds"] is True

    def test_bad_config_exit_1(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.anme = power\n")
        assert run_cli(["analyze", "--config", str(cfgfile)]) == 1

    def test_budget_scale_flag(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("cost.name = quadratic\nbudget.constants = 2000\n")
        out = tmp_path / "out"
        code = run_cli(["constants", "--config", str(cfgfile), "--output", str(out),
                        "--budget-scale", "0.1"])
        assert code == 0
        report = from_json((out / "report.json").read_bytes())
        assert report["config"]["budget_scale"] == 0.1
