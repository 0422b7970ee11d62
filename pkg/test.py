import contextlib
import io
import json
import os
import re
import subprocess
import sys
import tempfile
import unittest
from unittest import mock

import jsonschema
from parameterized import parameterized

from rankcal.controller import api
from rankcal.controller.experiments import WORKED_LATENT, WORKED_OBSERVED
from rankcal.model.estimation import fit_structured
from rankcal.model.matrix_model import ComparisonMatrix, read_matrix, write_matrix

ROOT = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(ROOT, "schema", "report_schema.json"), "r", encoding="utf-8") as f:
    REPORT_SCHEMA = json.load(f)


class CommandLineTestCase(unittest.TestCase):
    def setUp(self):
        """Create a scratch directory holding the worked and consistent example matrices."""
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        self.observed = self.path("observed.csv")
        write_matrix(ComparisonMatrix.from_rows(WORKED_OBSERVED), self.observed)
        self.consistent = self.path("consistent.csv")
        write_matrix(ComparisonMatrix.from_differences(WORKED_LATENT), self.consistent)

    def path(self, name, content=None):
        path = os.path.join(self.directory.name, name)
        if content is not None:
            with open(path, "w", encoding="utf-8") as f:
                f.write(content if isinstance(content, str) else json.dumps(content))
        return path

    def run_command(self, *argv):
        """Run the app in-process and return the exit code, the report text and stderr."""
        output = self.path("report.out")
        if os.path.exists(output):
            os.remove(output)
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = api.Start([*argv, "--output", output])
        text = None
        if os.path.exists(output):
            with open(output, "r", encoding="utf-8") as f:
                text = f.read()
        return code, text, stderr.getvalue()

    def run_report(self, *argv, expected_code=0):
        code, text, stderr = self.run_command(*argv)
        self.assertEqual(code, expected_code, stderr)
        report = json.loads(text)
        jsonschema.validate(report, REPORT_SCHEMA)
        return report


class AnalyzeTestCase(CommandLineTestCase):
    def test_worked_example(self):
        report = self.run_report("analyze", self.observed, "--samples", "20000", "--seed", "3")
        self.assertEqual(report["status"], "ok")
        self.assertEqual(report["input"]["first_nonreciprocal_pair"], [1, 2])
        self.assertFalse(report["input"]["admissible"])
        self.assertEqual(report["input"]["cycle"], ["1>3", "3>2", "2>1"])
        self.assertEqual(report["ranking"]["central_ranking"], "3>2>1>4")
        self.assertEqual(len(report["structured"]["u_hat"]), 4)
        self.assertEqual(report["samples"], 20000)

    def test_consistent_matrix_has_no_uncertainty(self):
        report = self.run_report("analyze", self.consistent, "--samples", "1000")
        self.assertTrue(report["input"]["consistent"])
        self.assertTrue(report["structured"]["degenerate"])
        self.assertEqual(report["structured"]["sigma_hat"], 0.0)
        self.assertEqual(report["ranking"]["central_probability"], 1.0)
        self.assertEqual(report["ranking"]["central_ranking"], "1>2>3>4")
        self.assertEqual(report["setting"], "stable")

    def test_output_does_not_depend_on_threads(self):
        _, first, _ = self.run_command("analyze", self.observed, "--samples", "9000", "--threads", "1")
        _, second, _ = self.run_command("analyze", self.observed, "--samples", "9000", "--threads", "3")
        _, third, _ = self.run_command("analyze", self.observed, "--samples", "9000", "--threads", "1")
        self.assertEqual(first, second)
        self.assertEqual(first, third)

    def test_floats_round_trip_exactly(self):
        _, text, _ = self.run_command("analyze", self.observed, "--samples", "2000")
        fit = fit_structured(read_matrix(self.observed))
        self.assertEqual(json.loads(text)["structured"]["u_hat"], fit.u_hat.to_list())
        literals = []
        json.loads(text, parse_float=lambda literal: literals.append(literal) or float(literal))
        self.assertTrue(literals)
        for literal in literals:
            mantissa = re.split(r"[eE]", literal)[0].lstrip("-").replace(".", "").lstrip("0")
            self.assertLessEqual(len(mantissa), 17, literal)
            self.assertEqual(repr(float(literal)), literal)

    def test_tied_scores_write_a_partial_report(self):
        zeros = self.path("zeros.csv", "0,0,0\n0,0,0\n0,0,0\n")
        report = self.run_report("analyze", zeros, "--samples", "100", expected_code=4)
        self.assertEqual(report["status"], "error")
        self.assertIsNone(report["ranking"])
        self.assertIsNotNone(report["error"])

    @parameterized.expand(
        [
            ("ragged", "0,1,2\n-1,0\n-2,-1,0\n", 2),
            ("text", "0,a,2\n-1,0,1\n-2,-1,0\n", 2),
            ("diagonal", "1,1,2\n-1,0,1\n-2,-1,0\n", 2),
            ("too_small", "0,1\n-1,0\n", 3),
        ]
    )
    def test_bad_matrices(self, name, content, expected_code):
        code, text, stderr = self.run_command("analyze", self.path(f"{name}.csv", content))
        self.assertEqual(code, expected_code)
        self.assertIsNone(text)
        self.assertIn("rankcal analyze: error:", stderr)

    def test_missing_file(self):
        code, _, _ = self.run_command("analyze", self.path("absent.csv"))
        self.assertEqual(code, 2)

    def test_invalid_thresholds(self):
        code, _, _ = self.run_command("analyze", self.observed, "--gamma0", "0.9", "--gamma1", "0.5")
        self.assertEqual(code, 2)

    def test_invalid_thread_environment(self):
        with mock.patch.dict(os.environ, {"RANKCAL_THREADS": "many"}):
            code, _, stderr = self.run_command("analyze", self.observed, "--samples", "10")
        self.assertEqual(code, 2)
        self.assertIn("thread count", stderr)

    def test_text_format(self):
        code, text, _ = self.run_command("analyze", self.observed, "--samples", "5000", "--format", "text")
        self.assertEqual(code, 0)
        self.assertIn("status ok", text)
        self.assertIn("central ranking 3>2>1>4", text)

    def test_unknown_command(self):
        code, _, _ = self.run_command("rank", self.observed)
        self.assertEqual(code, 2)


class SimulateTestCase(CommandLineTestCase):
    scenario = {
        "n": 4,
        "sigma": 0.1,
        "rho": 0.0,
        "regime": "moderate",
        "c": 0.1,
        "replications": 5,
        "samples": 1000,
        "seed": 1,
    }

    def test_single_scenario(self):
        report = self.run_report("simulate", self.path("one.json", self.scenario))
        (scenario,) = report["scenarios"]
        self.assertEqual(scenario["config"]["regime"], "moderate")
        self.assertIsNone(report["tau_study"])

    def test_scenario_list(self):
        second = dict(self.scenario, regime="none", name="flat")
        report = self.run_report("simulate", self.path("two.json", {"scenarios": [self.scenario, second]}))
        self.assertEqual([s["config"]["name"] for s in report["scenarios"]], ["scenario-1", "flat"])

    def test_tau_study(self):
        config = {"tau_study": {"taus": [0.0, 0.5], "replications": 200, "samples": 500, "seed": 1}}
        report = self.run_report("simulate", self.path("tau.json", config))
        self.assertEqual(report["seed"], 1)
        self.assertEqual([row["mode"] for row in report["tau_study"]], ["monte_carlo"] * 2)

    @parameterized.expand(
        [
            ("empty_list", {"scenarios": []}, 2),
            ("missing_key", {k: v for k, v in scenario.items() if k != "seed"}, 2),
            ("extra_key", dict(scenario, colour="red"), 2),
            ("bad_regime", dict(scenario, regime="mild"), 2),
            ("regime_violation", dict(scenario, regime="none", s=[0.01, 0.0, 0.0, -0.01]), 3),
            ("uncentered_s", dict(scenario, s=[0.01, 0.0, 0.0, 0.0]), 2),
        ]
    )
    def test_invalid_configs(self, name, config, expected_code):
        code, text, _ = self.run_command("simulate", self.path(f"{name}.json", config))
        self.assertEqual(code, expected_code)
        self.assertIsNone(text)

    def test_missing_keys_are_named(self):
        config = {k: v for k, v in self.scenario.items() if k not in ("seed", "rho")}
        _, _, stderr = self.run_command("simulate", self.path("missing.json", config))
        self.assertIn("Missing keys: rho, seed", stderr)

    def test_not_json(self):
        code, _, _ = self.run_command("simulate", self.path("broken.json", "{"))
        self.assertEqual(code, 2)


class ReproduceTestCase(CommandLineTestCase):
    def test_worked_example(self):
        report = self.run_report("reproduce", "worked_example")
        self.assertEqual(report["status"], "ok")
        self.assertEqual(report["worked_example"]["ranking"], "3>2>1>4")
        self.assertEqual(report["summary"]["failed"], [])

    def test_tau_table(self):
        report = self.run_report("reproduce", "tau_table")
        self.assertEqual(report["summary"]["checks"], 18)
        self.assertAlmostEqual(report["tau_table"]["tau_critical"], 1.125, delta=1e-12)

    def test_mc_table(self):
        report = self.run_report("reproduce", "mc_table", "--threads", "4")
        self.assertEqual(report["summary"]["failed"], [])
        self.assertEqual(len(report["mc_table"]["rows"]), 4)

    def test_failed_checks_exit_with_one(self):
        with mock.patch.dict(
            "rankcal.controller.experiments.REFERENCE_TAU_TABLE", {0.5: (0.9,) * 6}, clear=True
        ):
            report = self.run_report("reproduce", "tau_table", expected_code=1)
        self.assertEqual(report["status"], "fail")
        self.assertEqual(len(report["summary"]["failed"]), 6)

    def test_invalid_replications(self):
        code, _, _ = self.run_command("reproduce", "mc_table", "--replications", "0")
        self.assertEqual(code, 2)


class EchoTestCase(CommandLineTestCase):
    def test_round_trip(self):
        code, text, _ = self.run_command("echo", self.observed)
        self.assertEqual(code, 0)
        copy = self.path("copy.csv", text)
        self.assertEqual(read_matrix(copy), read_matrix(self.observed))


class MainScriptTestCase(unittest.TestCase):
    def test_main_writes_the_report_to_stdout(self):
        result = subprocess.run(
            [sys.executable, os.path.join(ROOT, "main.py"), "reproduce", "worked_example"],
            cwd=ROOT,
            capture_output=True,
            text=True,
            env=dict(os.environ, RANKCAL_THREADS="2"),
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        report = json.loads(result.stdout)
        jsonschema.validate(report, REPORT_SCHEMA)
        self.assertEqual(report["command"], "reproduce")


if __name__ == "__main__":
    unittest.main()
