import importlib.util
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from cdsclear import BANNER, benchmark, metrics
from cdsclear.constants import EPS
from cdsclear.file_utils import file_path, load_file, store_file
from cdsclear.formats import format_recovery


def resource(name):
    return file_path(name, in_resources=True)


def load_cli():
    spec = importlib.util.spec_from_file_location("cli", file_path(os.path.join("scripts", "cli.py")))
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


class CommandTestCase(unittest.TestCase):

    def run_command(self, fn, *args, **kwargs):
        """ Runs the command and returns its exit code and the last report it printed. """
        with self.assertLogs("cdsclear.run", level="INFO") as logs:
            code = fn(*args, **kwargs)
        message = logs.records[-1].getMessage()
        try:
            report = json.loads(message)
        except json.JSONDecodeError:
            report = message
        return code, report

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def tmp_path(self, name):
        return os.path.join(self.tmp.name, name)


class ClearTestCase(CommandTestCase):

    def test_no_clearing_is_infeasible(self):
        code, report = self.run_command(benchmark.clear, resource("no_clearing.json"), method="patterns")
        self.assertEqual(code, metrics.EXIT_INFEASIBLE)
        self.assertEqual(report["status"], metrics.STATUS_INFEASIBLE)
        self.assertEqual(report["pattern_verdicts"]["counts"]["provably-infeasible"], 8)

    def test_no_clearing_iteration_gives_up(self):
        code, report = self.run_command(benchmark.clear, resource("no_clearing.json"), restarts=3)
        self.assertEqual(code, metrics.EXIT_NOT_FOUND)
        self.assertIsNone(report["r"])

    def test_input_gadget(self):
        code, report = self.run_command(benchmark.clear, resource("input_gadget.json"))
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report["r"], [1.0, 1.0])
        self.assertEqual(report["banks"], ["u", "x"])

    def test_approx_on_degenerate_network(self):
        code, _ = self.run_command(benchmark.clear, resource("no_clearing.json"), eps=0.1)
        self.assertEqual(code, metrics.EXIT_USAGE)

    def test_usage_errors(self):
        code, _ = self.run_command(benchmark.clear, resource("input_gadget.json"), method="approx")
        self.assertEqual(code, metrics.EXIT_USAGE)
        code, _ = self.run_command(benchmark.clear, resource("input_gadget.json"), method="newton")
        self.assertEqual(code, metrics.EXIT_USAGE)

    def test_parse_errors(self):
        broken = store_file('{"banks": [{"id": 3}]}', self.tmp_path("broken.json"))
        code, report = self.run_command(benchmark.clear, broken)
        self.assertEqual(code, metrics.EXIT_PARSE)
        self.assertIn("banks[0].id", report)
        code, _ = self.run_command(benchmark.clear, self.tmp_path("missing.json"))
        self.assertEqual(code, metrics.EXIT_PARSE)

    def test_reports_are_deterministic(self):
        _, first = self.run_command(benchmark.clear, resource("input_gadget.json"), eps=0.05, seed=3)
        _, second = self.run_command(benchmark.clear, resource("input_gadget.json"), eps=0.05, seed=3)
        self.assertEqual(first, second)


class VerifyTestCase(CommandTestCase):

    def test_clearing(self):
        code, report = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.37 0.37")
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertTrue(report["ok"])
        code, report = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.2 0.9")
        self.assertEqual(code, metrics.EXIT_CHECK_FAILED)
        self.assertAlmostEqual(report["residual"], 0.7)

    def test_approximate(self):
        code, _ = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.2 0.25", eps=0.1)
        self.assertEqual(code, metrics.EXIT_OK)
        code, report = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.2 0.25", eps=0.01)
        self.assertEqual(code, metrics.EXIT_CHECK_FAILED)
        self.assertEqual(len(report["violations"]), 2)

    def test_approximate_needs_approximation_setting(self):
        costly = store_file('{"alpha": 0.5, "banks": [{"id": "A", "external": 1}]}', self.tmp_path("costly.json"))
        code, report = self.run_command(benchmark.verify, costly, "1", eps=0.1)
        self.assertEqual(code, metrics.EXIT_USAGE)
        self.assertIn("error", report)
        code, _ = self.run_command(benchmark.verify, costly, "1")
        self.assertEqual(code, metrics.EXIT_OK)

    def test_approximate_needs_positive_eps(self):
        for eps in (0.0, -1.0):
            with self.subTest(eps=eps):
                code, _ = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.5 0.5", eps=eps)
                self.assertEqual(code, metrics.EXIT_USAGE)

    def test_recovery_from_file(self):
        path = store_file("0.5 0.5\n", self.tmp_path("r.txt"))
        code, _ = self.run_command(benchmark.verify, resource("input_gadget.json"), path)
        self.assertEqual(code, metrics.EXIT_OK)

    def test_wrong_length(self):
        code, _ = self.run_command(benchmark.verify, resource("input_gadget.json"), "0.5")
        self.assertEqual(code, metrics.EXIT_PARSE)


class CompileDecodeTestCase(CommandTestCase):

    def test_circuit_pipeline(self):
        out = self.tmp_path("selfloop.json")
        code, report = self.run_command(benchmark.compile_circuit, resource("nand_selfloop.json"), out)
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report["map"], self.tmp_path("selfloop.map.json"))
        self.assertTrue(os.path.exists(report["map"]))

        code, report = self.run_command(benchmark.clear, out, method="approx", eps=EPS)
        self.assertEqual(code, metrics.EXIT_OK)
        recovery = format_recovery(report["r"])

        code, report = self.run_command(benchmark.decode, out, recovery, self.tmp_path("selfloop.map.json"))
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report["assignment"], {"w": "bot"})
        self.assertTrue(report["satisfies"])

    def test_decode_refuses_non_clearing_vector(self):
        out = self.tmp_path("selfloop.json")
        self.run_command(benchmark.compile_circuit, resource("nand_selfloop.json"), out)
        code, _ = self.run_command(benchmark.decode, out, "0 1 1", self.tmp_path("selfloop.map.json"))
        self.assertEqual(code, metrics.EXIT_CHECK_FAILED)

    def test_compile_is_deterministic(self):
        first, second = self.tmp_path("a.json"), self.tmp_path("b.json")
        self.run_command(benchmark.compile_circuit, resource("nand_selfloop.json"), first)
        self.run_command(benchmark.compile_circuit, resource("nand_selfloop.json"), second)
        self.assertEqual(load_file(first), load_file(second))

    def test_compile_poly(self):
        out = self.tmp_path("poly.json")
        map_path = self.tmp_path("poly_map.json")
        code, _ = self.run_command(benchmark.compile_poly, resource("identity_poly.json"), "hasclearing", out,
                                   alpha=0.5, map_path=map_path)
        self.assertEqual(code, metrics.EXIT_OK)
        wire_map = json.loads(load_file(map_path))
        self.assertEqual(wire_map["kind"], "hasclearing")
        self.assertEqual(wire_map["squaring_depth"], 3)
        self.assertEqual(json.loads(load_file(out))["alpha"], 0.5)

        code, _ = self.run_command(benchmark.compile_poly, resource("identity_poly.json"), "cansurvive", out)
        self.assertEqual(code, metrics.EXIT_OK)
        code, _ = self.run_command(benchmark.compile_poly, resource("identity_poly.json"), "hasroot", out)
        self.assertEqual(code, metrics.EXIT_USAGE)

    def test_decode_needs_circuit_map(self):
        out = self.tmp_path("poly.json")
        self.run_command(benchmark.compile_poly, resource("identity_poly.json"), "cansurvive", out)
        net = json.loads(load_file(out))
        recovery = " ".join("1" for _ in net["banks"])
        code, _ = self.run_command(benchmark.decode, out, recovery, self.tmp_path("poly.map.json"))
        self.assertEqual(code, metrics.EXIT_USAGE)


class ToolCommandTestCase(CommandTestCase):

    def test_brute(self):
        code, report = self.run_command(benchmark.brute, resource("nand_selfloop.json"))
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report["assignment"], {"w": "bot"})
        code, _ = self.run_command(benchmark.brute, resource("nand_selfloop.json"), cap=0)
        self.assertEqual(code, metrics.EXIT_USAGE)

    def test_export_dot(self):
        code, dot = self.run_command(benchmark.export_dot, resource("no_clearing.json"))
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertIn("digraph network", dot)
        out = self.tmp_path("no_clearing.dot")
        code, report = self.run_command(benchmark.export_dot, resource("no_clearing.json"), out_path=out,
                                        hide_scaffolding=True)
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report, {"file": out, "banks": 5})
        self.assertNotIn("s -> t", load_file(out))

    def test_check_gadgets(self):
        code, summary = self.run_command(benchmark.check_gadgets, grid_points=3, alphas=(0.5,))
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(summary, "10 of 10 checks passed")

    def test_generate(self):
        code, report = self.run_command(benchmark.generate, "circuits", self.tmp.name, count=5)
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertEqual(report["instances"], 5)
        self.assertTrue(os.path.exists(report["file"]))


class CliTestCase(CommandTestCase):

    def test_main(self):
        cli = load_cli()
        args = cli.build_parser().parse_args(["verify", resource("input_gadget.json"), "0.37 0.37"])
        with self.assertLogs("cdsclear.run", level="INFO"):
            self.assertEqual(cli.main(args), metrics.EXIT_OK)

    def test_banner_goes_to_stderr(self):
        cli = load_cli()
        with mock.patch("sys.stderr", new_callable=io.StringIO) as stderr:
            with self.assertLogs("cdsclear.run", level="INFO") as logs:
                code = cli.run(["verify", resource("input_gadget.json"), "0.37 0.37"])
        self.assertEqual(code, metrics.EXIT_OK)
        self.assertIn(BANNER, stderr.getvalue())
        self.assertTrue(json.loads(logs.records[-1].getMessage())["ok"])

    def test_usage_error(self):
        cli = load_cli()
        with self.assertRaises(SystemExit) as context:
            cli.build_parser().parse_args(["clear"])
        self.assertEqual(context.exception.code, metrics.EXIT_USAGE)
        with self.assertRaises(SystemExit) as context:
            cli.build_parser().parse_args(["solve", "x.json"])
        self.assertEqual(context.exception.code, metrics.EXIT_USAGE)


if __name__ == '__main__':
    unittest.main()
