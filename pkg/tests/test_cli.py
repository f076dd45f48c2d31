import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from gmdkit.cli import main
from gmdkit.io import write_matrix

from helpers import rand_spd


def _schema(name):
    ref = resources.files("gmdkit") / "schemas" / f"{name}.json"
    return json.loads(ref.read_text())


@pytest.fixture()
def dataset_files(tmp_path):
    rng = np.random.default_rng(0)
    n, p = 18, 6
    X = rng.standard_normal((n, p))
    H = rand_spd(rng, n)
    Q = rand_spd(rng, p)
    beta = np.zeros(p)
    beta[0] = 2.0
    y = X @ beta + 0.3 * rng.standard_normal(n)
    paths = {}
    for name, M in [("x", X), ("h", H), ("q", Q), ("y", y)]:
        f = tmp_path / f"{name}.csv"
        write_matrix(str(f), M)
        paths[name] = str(f)
    return paths


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestDecompose:
    def test_values_match_library(self, dataset_files, capsys):
        args = ["decompose", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"]]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("decompose"))
        from gmdkit import TwoWayDataset, gmd
        from gmdkit.io import load_matrix

        data = TwoWayDataset(
            X=load_matrix(dataset_files["x"]),
            H=load_matrix(dataset_files["h"]),
            Q=load_matrix(dataset_files["q"]),
        )
        assert np.allclose(payload["sigma"], gmd(data).s, atol=1e-10)

    def test_hand_worked_values(self, tmp_path, capsys):
        write_matrix(str(tmp_path / "x.csv"),
                     np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
        write_matrix(str(tmp_path / "h.csv"), np.diag([1.0, 2.0, 1.0]))
        write_matrix(str(tmp_path / "q.csv"), np.diag([2.0, 1.0]))
        code, out, _ = run_cli(
            ["decompose", "--x", str(tmp_path / "x.csv"),
             "--h", str(tmp_path / "h.csv"), "--q", str(tmp_path / "q.csv")],
            capsys,
        )
        assert code == 0
        sigma = json.loads(out)["sigma"]
        assert np.allclose(sigma, [np.sqrt(5.0), np.sqrt(2.0)], atol=1e-10)


class TestFit:
    def test_gmdr_payload_validates(self, dataset_files, capsys):
        args = ["fit", "gmdr", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"], "--y",
                dataset_files["y"]]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("fit"))
        assert payload["weight_kind"] == "index_set"
        assert payload["rmse"] is not None and payload["rmse"] >= 0

    def test_kpr_with_fixed_eta(self, dataset_files, capsys):
        args = ["fit", "kpr", "--eta", "1.5", "--x", dataset_files["x"],
                "--h", dataset_files["h"], "--q", dataset_files["q"],
                "--y", dataset_files["y"]]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("fit"))
        assert payload["weight_kind"] == "ridge"
        assert payload["eta"] == 1.5

    def test_bad_eta_is_data_error(self, dataset_files, capsys):
        args = ["fit", "kpr", "--eta", "soon", "--x", dataset_files["x"],
                "--h", dataset_files["h"], "--q", dataset_files["q"],
                "--y", dataset_files["y"]]
        code, _, err = run_cli(args, capsys)
        assert code == 1
        assert "eta" in json.loads(err)["error"]


class TestInfer:
    def test_payload_validates_and_fdr_fields(self, dataset_files, capsys):
        args = ["infer", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"], "--y",
                dataset_files["y"], "--fdr", "0.1"]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("infer"))
        p = np.asarray(payload["p_value"])
        q = np.asarray(payload["q_value"])
        assert np.all(q >= p - 1e-15)
        assert payload["discoveries"] == (q <= 0.1).astype(int).tolist()
        assert payload["significant"] == (p <= 0.05).astype(int).tolist()

    def test_robust_flag_records_blend_weight(self, dataset_files, capsys):
        args = ["infer", "--robust", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"], "--y",
                dataset_files["y"]]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["tau_hat"] is not None

    def test_byte_determinism(self, dataset_files, capsys):
        args = ["infer", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"], "--y",
                dataset_files["y"], "--seed", "2"]
        _, out1, _ = run_cli(args, capsys)
        _, out2, _ = run_cli(args, capsys)
        assert out1 == out2


class TestStructtest:
    def test_krv_from_data_matrix(self, dataset_files, capsys):
        args = ["structtest", "krv", "--structure", dataset_files["h"],
                "--x", dataset_files["x"], "--b", "99"]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("structtest"))
        assert 0 < payload["p_value"] <= 1

    def test_mirkat_needs_response(self, dataset_files, capsys):
        args = ["structtest", "mirkat", "--structure", dataset_files["h"],
                "--b", "49"]
        code, _, err = run_cli(args, capsys)
        assert code == 1
        assert "--y" in json.loads(err)["error"]

    def test_mirkat_runs(self, dataset_files, capsys):
        args = ["structtest", "mirkat", "--structure", dataset_files["h"],
                "--y", dataset_files["y"], "--b", "49", "--seed", "3"]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("structtest"))
        assert payload["n_permutations"] == 49


class TestRobustTau:
    def test_payload_validates(self, dataset_files, capsys):
        args = ["robust-tau", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"], "--y",
                dataset_files["y"]]
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, _schema("robust_tau"))
        assert 0.001 <= payload["tau_hat"] <= 0.999


class TestSimulate:
    def test_runs_and_writes_artifacts(self, tmp_path, capsys):
        out_json = tmp_path / "report.json"
        out_csv = tmp_path / "rows.csv"
        args = ["simulate", "--setting", "I", "--r2", "0.5", "--n", "30",
                "--p", "20", "--reps", "2", "--methods", "gmdi-d",
                "--b", "19", "--out", str(out_json), "--csv", str(out_csv)]
        code, _, _ = run_cli(args, capsys)
        assert code == 0
        payload = json.loads(out_json.read_text())
        jsonschema.validate(payload, _schema("simulate"))
        assert payload["schema_version"] == 1
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "method,metric,replicate,value"
        assert len(lines) == 1 + 2 * 2  # two metrics x two replicates


class TestErrorHandling:
    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, _ = run_cli(["decompose", "--bogus"], capsys)
        assert code == 2

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        args = ["decompose", "--x", str(tmp_path / "no.csv"), "--h",
                str(tmp_path / "no.csv"), "--q", str(tmp_path / "no.csv")]
        code, _, err = run_cli(args, capsys)
        assert code == 1
        assert "error" in json.loads(err)

    def test_malformed_matrix_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,nope\n")
        args = ["decompose", "--x", str(bad), "--h", str(bad), "--q",
                str(bad)]
        code, _, err = run_cli(args, capsys)
        assert code == 1
        assert "parse failure" in json.loads(err)["error"]

    def test_threads_env_must_be_integer(self, dataset_files, capsys,
                                         monkeypatch):
        monkeypatch.setenv("GMDKIT_THREADS", "many")
        args = ["decompose", "--x", dataset_files["x"], "--h",
                dataset_files["h"], "--q", dataset_files["q"]]
        code, _, err = run_cli(args, capsys)
        assert code == 1
        assert "GMDKIT_THREADS" in json.loads(err)["error"]
