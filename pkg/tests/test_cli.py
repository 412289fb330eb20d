"""Command line front end: exit codes, manifests, file outputs."""

import json

import pytest

from envqueue.cli import EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def read_manifest(tmp_path):
    text = (tmp_path / "manifest.txt").read_text()
    return dict(line.split("=", 1) for line in text.strip().split("\n"))


BS = ("--catalog", "base_stock", "--lambda", "1", "--mu", "2", "--nu", "1", "--b", "2")
PER = ("--catalog", "perishable_o", "--lambda", "1", "--mu", "2", "--nu", "1", "--gamma", "1", "--b", "2")


class TestExitCodes:
    def test_validate_ok(self, tmp_path):
        assert run(tmp_path, "validate", *BS) == EXIT_OK

    def test_separability_positive(self, tmp_path):
        assert run(tmp_path, "separability", *BS) == EXIT_OK
        rec = json.loads((tmp_path / "separability.json").read_text())
        assert rec["separable"]
        assert rec["theta"] == pytest.approx([1 / 3] * 3, abs=1e-12)

    def test_separability_negative(self, tmp_path):
        assert run(tmp_path, "separability", *PER) == EXIT_NEGATIVE
        rec = json.loads((tmp_path / "separability.json").read_text())
        assert rec["reason"] == "NoCommonSolution"

    def test_certify_positive(self, tmp_path):
        assert run(tmp_path, "certify", *PER) == EXIT_OK
        rec = json.loads((tmp_path / "certificate.json").read_text())
        assert rec["epsilon"] > 0

    def test_certify_negative(self, tmp_path):
        code = run(tmp_path, "certify", "--catalog", "mm1_plain", "--lambda", "2", "--mu", "1")
        assert code == EXIT_NEGATIVE
        rec = json.loads((tmp_path / "certificate.json").read_text())
        assert rec == {"certified": False, "reason": "NecessaryFails", "detail": rec["detail"]}

    def test_missing_model_source_errors(self, tmp_path):
        assert run(tmp_path, "validate") == EXIT_ERROR

    def test_bad_params_error(self, tmp_path):
        code = run(tmp_path, "validate", "--catalog", "base_stock", "--lambda", "1", "--mu", "2", "--nu", "1", "--b", "0")
        assert code == EXIT_ERROR

    def test_missing_file_errors(self, tmp_path):
        assert run(tmp_path, "validate", "--model", "/no/such/file.yaml") == EXIT_ERROR


class TestSolveCommand:
    def test_solve_outputs(self, tmp_path):
        assert run(tmp_path, "solve", *BS, "--N", "120") == EXIT_OK
        rec = json.loads((tmp_path / "metrics.json").read_text())
        assert rec["throughput"] == pytest.approx(2 / 3, abs=1e-8)
        lines = (tmp_path / "stationary.csv").read_text().strip().split("\n")
        assert lines[0] == "n,k,pi"
        assert len(lines) == 1 + 121 * 3

    def test_auto_truncation_default(self, tmp_path):
        assert run(tmp_path, "solve", *PER) == EXIT_OK
        rec = json.loads((tmp_path / "metrics.json").read_text())
        assert rec["N"] >= 64


class TestSimulateCommand:
    def test_reproducible_csv(self, tmp_path):
        args = ("simulate", *BS, "--seed", "7", "--horizon", "300", "--replications", "3")
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main([*args, "--out", str(out_a)]) == EXIT_OK
        assert main([*args, "--out", str(out_b)]) == EXIT_OK
        assert (out_a / "simulation.csv").read_bytes() == (out_b / "simulation.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        base = ("simulate", *BS, "--horizon", "300", "--replications", "3")
        main([*base, "--seed", "1", "--out", str(out_a)])
        main([*base, "--seed", "2", "--out", str(out_b)])
        assert (out_a / "simulation.csv").read_bytes() != (out_b / "simulation.csv").read_bytes()


class TestBoundsCommands:
    def test_bounds(self, tmp_path):
        code = run(
            tmp_path, "bounds", "--catalog", "perishable_o",
            "--lambda", "1", "--mu", "1.5", "--nu", "1", "--gamma", "1.5", "--b", "2",
        )
        assert code == EXIT_OK
        rec = json.loads((tmp_path / "bounds.json").read_text())
        assert rec["TH_minus"] <= rec["TH_o_truncated"] <= rec["TH_plus"]
        header = (tmp_path / "bounds.csv").read_text().split("\n")[0]
        assert header == "gamma,TH_minus,TH_o,TH_plus"

    def test_sweep(self, tmp_path):
        code = run(
            tmp_path, "sweep", "--catalog", "perishable_o",
            "--lambda", "1", "--mu", "2", "--nu", "1", "--b", "2",
            "--gamma-min", "0.5", "--gamma-max", "1.0", "--gamma-steps", "2",
        )
        assert code == EXIT_OK
        lines = (tmp_path / "sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 3


class TestManifest:
    def test_written_with_hash_and_options(self, tmp_path):
        run(tmp_path, "separability", *BS)
        manifest = read_manifest(tmp_path)
        assert manifest["tool"] == "envqueue"
        assert manifest["command"] == "separability"
        assert len(manifest["model_hash"]) == 64
        assert manifest["model_source"] == "catalog:base_stock"
        assert manifest["b"] == "2"

    def test_hash_tracks_model(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        main(["separability", *BS, "--out", str(out_a)])
        main(["separability", "--catalog", "base_stock", "--lambda", "1", "--mu", "2",
              "--nu", "1.5", "--b", "2", "--out", str(out_b)])
        assert read_manifest(out_a)["model_hash"] != read_manifest(out_b)["model_hash"]


class TestModelFile:
    def test_yaml_model_loads(self, tmp_path):
        doc = """
rates:
  lambda_tail: [1.0]
  mu_tail: [2.0]
environment:
  labels: ["down", "up"]
  blocked: ["down"]
  V_tail:
    - [[-1.0, 1.0], [1.0, -1.0]]
  R_tail:
    - [[1.0, 0.0], [0.0, 1.0]]
"""
        path = tmp_path / "model.yaml"
        path.write_text(doc)
        code = main(["separability", "--model", str(path), "--out", str(tmp_path)])
        assert code == EXIT_OK
        rec = json.loads((tmp_path / "separability.json").read_text())
        assert rec["theta"] == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_yaml_catalog_shortcut(self, tmp_path):
        path = tmp_path / "model.yaml"
        path.write_text("catalog:\n  name: base_stock\n  params: {lam: 1, mu: 2, nu: 1, b: 2}\n")
        assert main(["validate", "--model", str(path), "--out", str(tmp_path)]) == EXIT_OK
