import json
import math

import pytest

from ergobound import cli, mc


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBoundCommand:
    def test_golden_json(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "100", "--eps", "0.5",
                           "--f-norm", "1", "--q-norm", "4")
        assert code == 0
        doc = json.loads(out)
        assert doc["valid"] is True
        assert doc["threshold"] == 16.0
        assert doc["exponent"] == pytest.approx(-3528 / 8181, rel=1e-14)
        assert doc["bound"] == pytest.approx(math.exp(-3528 / 8181), rel=1e-14)
        assert doc["theta_star"] == pytest.approx(168 / 8181, rel=1e-14)

    def test_below_threshold_exit_3(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "16", "--eps", "0.5",
                           "--f-norm", "1", "--q-norm", "4")
        assert code == 3
        doc = json.loads(out)
        assert doc["valid"] is False and doc["bound"] is None

    def test_bad_flags_exit_2(self, capsys):
        code, _, err = run(capsys, "bound", "--t", "-5", "--eps", "0.5",
                           "--f-norm", "1", "--q-norm", "4")
        assert code == 2 and "error" in err
        code, _, _ = run(capsys, "bound", "--t", "100")  # missing required
        assert code == 2

    def test_csv_format(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "100", "--eps", "0.5",
                           "--f-norm", "1", "--q-norm", "4", "--format", "csv")
        assert code == 0
        header, row = out.strip().splitlines()
        cols = dict(zip(header.split(","), row.split(",")))
        assert cols["valid"] == "true"
        assert float(cols["bound"]) == pytest.approx(math.exp(-3528 / 8181))


class TestSpecializedBounds:
    def test_jacobi_bound_from_b(self, capsys):
        code, out, _ = run(capsys, "jacobi-bound", "--t", "100", "--eps", "0.5",
                           "--b", "2", "--sigma2", "2")
        assert code == 0
        doc = json.loads(out)
        assert doc["t_av"] == pytest.approx(1.0, abs=1e-9)
        assert doc["exponent"] == pytest.approx(-4232 / 2525, rel=1e-9)

    def test_jacobi_bound_explicit_tav(self, capsys):
        code, out, _ = run(capsys, "jacobi-bound", "--t", "100", "--eps", "0.5",
                           "--t-av", "1.0")
        assert json.loads(out)["exponent"] == pytest.approx(-4232 / 2525,
                                                            rel=1e-12)
        assert code == 0

    def test_jacobi_bound_needs_tav_or_b(self, capsys):
        code, _, err = run(capsys, "jacobi-bound", "--t", "100", "--eps", "0.5")
        assert code == 2

    def test_tanou_bound(self, capsys):
        code, out, _ = run(capsys, "tanou-bound", "--t", "1000", "--eps", "0.5",
                           "--u", "1")
        assert code == 0
        doc = json.loads(out)
        assert doc["t_av"] == 2.0
        assert doc["f_norm"] == pytest.approx(math.exp(math.pi / 2))
        assert doc["centering_per_unit_time"] == pytest.approx(
            math.cosh(math.pi / 2) / 2, rel=1e-8)
        assert doc["paper_constant"] is False

    def test_tanou_bound_paper_constant(self, capsys):
        code, out, _ = run(capsys, "tanou-bound", "--t", "1000", "--eps", "0.5",
                           "--u", "1", "--paper-constant")
        doc = json.loads(out)
        assert doc["centering_per_unit_time"] == pytest.approx(
            2 * math.cosh(math.pi / 2) / 2, rel=1e-12)
        assert doc["paper_constant"] is True


class TestCheckAndTav:
    def test_check_jacobi(self, capsys):
        code, out, _ = run(capsys, "check", "--model", "jacobi",
                           "--a", "1", "--b", "2", "--sigma2", "2")
        assert code == 0
        doc = json.loads(out)
        assert doc["verdict"] == "uniformly_ergodic"
        assert doc["t_av"] == pytest.approx(1.0, abs=1e-8)

    def test_check_maoclass(self, capsys):
        code, out, _ = run(capsys, "check", "--model", "maoclass", "--gamma", "3")
        doc = json.loads(out)
        assert doc["verdict"] == "uniformly_ergodic"
        assert doc["integral_value"] == pytest.approx(0.5, rel=1e-6)

    def test_tav_tanou(self, capsys):
        code, out, _ = run(capsys, "tav", "--model", "tanou", "--rho", "0.5")
        assert code == 0
        doc = json.loads(out)
        assert doc["t_av"] == pytest.approx(2.0, abs=1e-9)
        assert doc["q_sharp_norm_bound"] == pytest.approx(4.0, abs=1e-8)

    def test_tav_needs_spectral_model(self, capsys):
        code, _, err = run(capsys, "tav", "--model", "maoclass")
        assert code == 2

    def test_pi_indicator(self, capsys):
        code, out, _ = run(capsys, "pi", "--model", "jacobi", "--f", "indicator",
                           "--lo", "0", "--hi", "0.5")
        assert code == 0
        assert json.loads(out)["pi_f"] == pytest.approx(0.5, abs=1e-8)


class TestSimulate:
    def test_small_run(self, capsys):
        code, out, _ = run(capsys, "simulate", "--model", "jacobi", "--t", "2",
                           "--dt", "0.01", "--n-paths", "16", "--f", "indicator",
                           "--seed", "123")
        assert code == 0
        doc = json.loads(out)
        assert doc["n_paths"] == 16 and doc["seed"] == 123
        assert 0.0 <= doc["mean"] <= 1.0

    def test_deterministic_across_jobs(self, capsys):
        outs = []
        for jobs in ("1", "3"):
            code, out, _ = run(capsys, "simulate", "--model", "tanou", "--t", "2",
                               "--dt", "0.01", "--n-paths", "24", "--f",
                               "identity", "--seed", "9", "--jobs", jobs)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1]

    def test_needs_model(self, capsys):
        code, _, err = run(capsys, "simulate", "--t", "2")
        assert code == 2


VERIFY_SMALL = ["verify", "--model", "jacobi", "--t-grid", "5", "20",
                "--eps-grid", "0.1", "0.3", "--n-paths", "200",
                "--dt", "0.01", "--seed", "42"]


class TestVerify:
    def test_small_grid_exit0_and_schema(self, capsys):
        code, out, _ = run(capsys, *VERIFY_SMALL)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "# schema_version=1 seed=42"
        assert lines[1] == "t,eps,threshold,bound,k,n,p_hat,ci_upper,dominated"
        assert len(lines) == 2 + 4  # 2 t values x 2 eps values
        for row in lines[2:]:
            cells = row.split(",")
            assert cells[-1] in ("true", "false")
            k, n = int(cells[4]), int(cells[5])
            assert 0 <= k <= n == 200

    def test_byte_identical_across_jobs(self, capsys):
        outs = []
        for jobs in ("1", "4"):
            code, out, _ = run(capsys, *VERIFY_SMALL, "--jobs", jobs)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1]

    def test_bound_scale_forces_exit4(self, capsys):
        code, out, _ = run(capsys, *VERIFY_SMALL, "--bound-scale", "1e-6")
        assert code == 4
        assert ",false" in out

    def test_simulation_failure_exit5(self, capsys, monkeypatch):
        def boom(*a, **kw):
            raise mc.SimulationError("injected failure")
        monkeypatch.setattr(mc, "run_ensemble", boom)
        code, _, err = run(capsys, *VERIFY_SMALL)
        assert code == 5
        assert "simulation failure" in err

    def test_unsupported_model(self, capsys):
        code, _, _ = run(capsys, "verify", "--model", "maoclass",
                         "--t-grid", "5", "--eps-grid", "0.1",
                         "--n-paths", "10", "--dt", "0.01")
        assert code == 2


class TestOutputsAndManifest:
    def test_out_file_and_manifest(self, capsys, tmp_path):
        out_path = tmp_path / "grid.csv"
        code, stdout, _ = run(capsys, *VERIFY_SMALL, "--out", str(out_path))
        assert code == 0
        assert stdout == ""
        text = out_path.read_text()
        assert text.startswith("# schema_version=1 seed=42\n")
        manifest = json.loads((tmp_path / "grid.csv.manifest.json").read_text())
        assert manifest["command"] == "verify"
        assert manifest["seed"] == 42
        assert manifest["outputs"] == [str(out_path)]
        assert manifest["flags"]["n_paths"] == 200
        assert "--model" in manifest["argv"]

    def test_manifest_reproduces_run(self, capsys, tmp_path):
        first = tmp_path / "a.csv"
        run(capsys, *VERIFY_SMALL, "--out", str(first))
        manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
        argv = list(manifest["argv"])
        second = tmp_path / "b.csv"
        argv[argv.index(str(first))] = str(second)
        code = cli.main(argv)
        assert code == 0
        assert first.read_text() == second.read_text()

    def test_json_out_file(self, capsys, tmp_path):
        p = tmp_path / "bound.json"
        code, stdout, _ = run(capsys, "bound", "--t", "100", "--eps", "0.5",
                              "--f-norm", "1", "--q-norm", "4",
                              "--out", str(p))
        assert code == 0 and stdout == ""
        assert json.loads(p.read_text())["valid"] is True
        assert (tmp_path / "bound.json.manifest.json").exists()
