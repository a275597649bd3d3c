"""End-to-end runs of the fraclab executable.

Usage: test_cli.py <fraclab executable> <scratch directory>
"""

import csv
import json
import shutil
import subprocess
import sys
import unittest
from pathlib import Path

EXE = None
WORK = None


def run(sub, config_text, name, *extra):
    d = WORK / name
    if d.exists():
        shutil.rmtree(d)
    d.mkdir(parents=True)
    cfg = d / "config.toml"
    cfg.write_text(config_text)
    out = d / "out"
    proc = subprocess.run([str(EXE), sub, "--config", str(cfg), "--out", str(out), *extra],
                          capture_output=True, text=True, timeout=600)
    return proc, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class Cli(unittest.TestCase):
    def check_manifest_lists_everything(self, out):
        m = manifest(out)
        on_disk = sorted(p.name for p in out.iterdir())
        self.assertEqual(sorted(m["files"]), on_disk)
        return m

    def test_solve_torsion(self):
        proc, out = run("solve", 'p = 2\ns = 0.5\nn = 64\n', "solve")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        m = self.check_manifest_lists_everything(out)
        self.assertEqual(m["exit_code"], 0)
        self.assertTrue(all(a["passed"] for a in m["assertions"]))
        sol = rows(out / "solution.csv")
        self.assertEqual(len(sol), 64)
        mid = sol[32]
        x = float(mid["x"])
        self.assertAlmostEqual(float(mid["u"]), (1 - x * x) ** 0.5 / (2 * 3.141592653589793), delta=2e-3)
        energy = [float(r["energy"]) for r in rows(out / "energy.csv")]
        self.assertTrue(all(b <= a + 1e-14 * abs(a) for a, b in zip(energy, energy[1:])))

    def test_zero_source_is_reproducible(self):
        text = 'p = 3\ns = 0.4\nn = 32\nK = 0\n'
        proc1, out1 = run("solve", text, "zero1")
        proc2, out2 = run("solve", text, "zero2")
        self.assertEqual(proc1.returncode, 0, proc1.stderr)
        self.assertEqual(proc2.returncode, 0, proc2.stderr)
        self.assertTrue(all(float(r["u"]) == 0.0 for r in rows(out1 / "solution.csv")))
        for name in ("solution.csv", "energy.csv"):
            self.assertEqual((out1 / name).read_bytes(), (out2 / name).read_bytes())

    def test_rerun_replaces_previous_outputs(self):
        proc, out = run("solve", 'p = 2\ns = 0.5\nn = 16\n', "rerun")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        cfg = out.parent / "config.toml"
        cfg.write_text('p = 2\ns = 0.5\nfield = "bump"\npoints = [0.2]\n')
        proc = subprocess.run([str(EXE), "eval-op", "--config", str(cfg), "--out", str(out), "--quiet"],
                              capture_output=True, text=True, timeout=600)
        self.assertEqual(proc.returncode, 0, proc.stderr)
        self.assertFalse((out / "solution.csv").exists())
        self.check_manifest_lists_everything(out)

    def test_bad_config_exits_two(self):
        proc, out = run("solve", 'p = 0.5\ns = 0.5\n', "badp")
        self.assertEqual(proc.returncode, 2)
        self.assertIn("p must exceed 1", proc.stderr)
        m = manifest(out)
        self.assertEqual(m["failed_stage"], "config")
        self.assertEqual(m["exit_code"], 2)

    def test_singular_case_needs_the_override(self):
        text = 'p = 1.5\ns = 0.9\nfield = "bump"\npoints = [0.1]\n'
        proc, _ = run("eval-op", text, "singular")
        self.assertEqual(proc.returncode, 2)
        self.assertIn("override-singular-check", proc.stderr)
        proc, out = run("eval-op", text, "singular_override", "--override-singular-check")
        self.assertIn(proc.returncode, (0, 1), proc.stderr)
        self.check_manifest_lists_everything(out)

    def test_failed_assertion_exits_one(self):
        proc, out = run("solve", 'p = 3\ns = 0.5\nn = 64\nmax_iter = 1\n', "maxiter")
        self.assertEqual(proc.returncode, 1, proc.stderr)
        m = manifest(out)
        self.assertEqual(m["exit_code"], 1)
        self.assertGreater(m["failed_assertions"], 0)

    def test_eval_half_space(self):
        text = 'p = 3\ns = 0.5\nfield = "half_space"\npoints = [0.5, 2.0]\n'
        proc, out = run("eval-op", text, "halfspace")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        self.check_manifest_lists_everything(out)
        for r in rows(out / "eval.csv"):
            self.assertLessEqual(abs(float(r["value"])), max(1e-8, 10 * float(r["error_bar"])))
            self.assertEqual(r["series_converged"], "1")
        self.assertGreater(len(rows(out / "eps_series.csv")), 4)

    def test_eval_unattainable_expectation(self):
        text = 'p = 2\ns = 0.5\nfield = "ball"\npoints = [0.3]\nexpect = 1.0\nexpect_tol = 1e-6\n'
        proc, out = run("eval-op", text, "expect")
        self.assertEqual(proc.returncode, 1, proc.stderr)
        names = {a["name"]: a["passed"] for a in manifest(out)["assertions"]}
        self.assertFalse(any(v for k, v in names.items() if k.startswith("matches_expected")))

    def test_verify_checks(self):
        base = 'p = 3\ns = 0.5\nn = 64\n'
        configs = {
            "comparison": '',
            "apriori": 'K_list = [0.1, 1, 10]\n',
            "boundary": '',
            "oscillation": 'radii = [0.5, 0.25, 0.125]\n',
            "holder": '',
            "harnack": 'R = 0.5\n',
            "delta_s": 'points = [0.9, -0.95]\n',
        }
        for check, extra in configs.items():
            with self.subTest(check=check):
                proc, out = run("verify", base + f'check = "{check}"\n' + extra, "verify_" + check, "--quiet")
                self.assertEqual(proc.returncode, 0, proc.stderr)
                m = self.check_manifest_lists_everything(out)
                self.assertTrue(m["assertions"])

    def test_suite_subset(self):
        proc, out = run("suite", 'p = 2\ns = 0.5\ncriteria = ["A2", "A11"]\n', "suite", "--quiet")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        self.check_manifest_lists_everything(out)
        summary = rows(out / "summary.csv")
        self.assertEqual([r["id"] for r in summary], ["A2", "A11"])
        self.assertTrue(all(r["passed"] == "1" for r in summary))

    def test_version(self):
        proc = subprocess.run([str(EXE), "--version"], capture_output=True, text=True)
        self.assertEqual(proc.returncode, 0)
        self.assertTrue(proc.stdout.strip())


if __name__ == "__main__":
    EXE = Path(sys.argv[1]).resolve()
    WORK = Path(sys.argv[2]).resolve()
    WORK.mkdir(parents=True, exist_ok=True)
    unittest.main(argv=[sys.argv[0], "-v"])
