import json

import pytest
from click.testing import CliRunner

from treefair.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def model_file(tmp_path, example_model_doc):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(example_model_doc))
    return str(path)


@pytest.fixture
def constant_model_file(tmp_path):
    doc = {
        "num_features": 2,
        "labels": ["a", "b"],
        "features": [
            {"id": 0, "name": "x0", "kind": "numeric", "group": None},
            {"id": 1, "name": "x1", "kind": "numeric", "group": None},
        ],
        "trees": [{"leaf": 0}],
    }
    path = tmp_path / "const.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestAnalyzeCommand:
    def test_writes_rectangle_array(self, runner, model_file, tmp_path):
        out = tmp_path / "u.json"
        result = runner.invoke(
            main, ["analyze", "--model", model_file, "--sensitive", "x0", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert isinstance(doc, list) and len(doc) == 2
        assert doc[0]["id"] == 0

    def test_constant_model_empty_array(self, runner, constant_model_file, tmp_path):
        out = tmp_path / "u.json"
        result = runner.invoke(
            main,
            ["analyze", "--model", constant_model_file, "--sensitive", "x0", "--out", str(out)],
        )
        assert result.exit_code == 0
        assert json.loads(out.read_text()) == []

    def test_bad_sensitive_name_exits_2(self, runner, model_file):
        result = runner.invoke(
            main, ["analyze", "--model", model_file, "--sensitive", "nope"]
        )
        assert result.exit_code == 2
        assert "unknown feature" in result.output

    def test_missing_model_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["analyze", "--model", str(tmp_path / "gone.json"), "--sensitive", "x0"]
        )
        assert result.exit_code == 2

    def test_class_limit_exits_3(self, runner, model_file):
        result = runner.invoke(
            main,
            ["analyze", "--model", model_file, "--sensitive", "x0", "--max-classes", "2"],
        )
        assert result.exit_code == 3


class TestSynthesizeCommand:
    def test_inf_converges(self, runner, model_file, tmp_path):
        out = tmp_path / "f.json"
        result = runner.invoke(
            main,
            [
                "synthesize", "--model", model_file, "--sensitive", "x0",
                "--max-iters", "inf", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["converged"] is True
        assert {"converged", "iterations", "formulas", "rendered",
                "per_iteration_counts", "warning", "elapsed_ms"} == set(doc)

    def test_reports_per_iteration_counts(self, runner, model_file):
        result = runner.invoke(
            main,
            ["synthesize", "--model", model_file, "--sensitive", "x0", "--max-iters", "inf"],
        )
        assert "iter 2: +2" in result.output

    def test_candidate_limit_exits_3_with_partial_output(self, runner, model_file, tmp_path):
        out = tmp_path / "f.json"
        result = runner.invoke(
            main,
            [
                "synthesize", "--model", model_file, "--sensitive", "x0,x1",
                "--max-candidates", "1", "--out", str(out),
            ],
        )
        assert result.exit_code == 3
        doc = json.loads(out.read_text())
        assert doc["converged"] is False and doc["warning"]

    def test_bad_max_iters_exits_2(self, runner, model_file):
        result = runner.invoke(
            main,
            ["synthesize", "--model", model_file, "--sensitive", "x0", "--max-iters", "zero"],
        )
        assert result.exit_code == 2

    def test_determinism_and_thread_independence(self, runner, model_file, tmp_path):
        outputs = []
        for i, threads in enumerate(("1", "1", "8")):
            out = tmp_path / f"f{i}.json"
            result = runner.invoke(
                main,
                [
                    "synthesize", "--model", model_file, "--sensitive", "x0",
                    "--max-iters", "inf", "--threads", threads, "--out", str(out),
                ],
            )
            assert result.exit_code == 0
            doc = json.loads(out.read_text())
            doc.pop("elapsed_ms")  # timing is the one permitted difference
            outputs.append(json.dumps(doc, sort_keys=False))
        assert outputs[0] == outputs[1] == outputs[2]


class TestEvaluateCommand:
    def test_constant_model_scores(self, runner, constant_model_file, tmp_path):
        form = tmp_path / "f.json"
        result = runner.invoke(
            main,
            ["synthesize", "--model", constant_model_file, "--sensitive", "x0",
             "--out", str(form)],
        )
        assert result.exit_code == 0
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            [
                "evaluate", "--model", constant_model_file, "--sensitive", "x0",
                "--formulas", str(form), "--random", "200", "--seed", "5",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        [report] = json.loads(out.read_text())["reports"]
        assert report["d"] == 0.0 and report["d_tilde"] == 0.0

    def test_converged_formulas_match_d(self, runner, model_file, tmp_path):
        form = tmp_path / "f.json"
        runner.invoke(
            main,
            ["synthesize", "--model", model_file, "--sensitive", "x0",
             "--max-iters", "inf", "--out", str(form)],
        )
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            [
                "evaluate", "--model", model_file, "--sensitive", "x0",
                "--formulas", str(form), "--random", "400", "--seed", "1",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0
        [report] = json.loads(out.read_text())["reports"]
        assert report["d"] == report["d_tilde"]

    def test_labeled_csv_gets_accuracy_field(self, runner, model_file, tmp_path):
        data = tmp_path / "test.csv"
        data.write_text("x0,x1,label\n10,6,0\n6,9,1\n0,0,1\n")
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["evaluate", "--model", model_file, "--dataset", str(data), "--out", str(out)],
        )
        assert result.exit_code == 0
        [report] = json.loads(out.read_text())["reports"]
        assert "accuracy" in report
        assert "d" not in report  # no rectangles and no sensitive set given

    def test_dimension_mismatch_exits_2(self, runner, model_file, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("x0\n1\n")
        result = runner.invoke(
            main, ["evaluate", "--model", model_file, "--dataset", str(data)]
        )
        assert result.exit_code == 2

    def test_requires_some_dataset(self, runner, model_file):
        result = runner.invoke(main, ["evaluate", "--model", model_file])
        assert result.exit_code == 2


class TestRankCommand:
    def test_table_output(self, runner, model_file, tmp_path):
        form = tmp_path / "f.json"
        runner.invoke(
            main,
            ["synthesize", "--model", model_file, "--sensitive", "x0",
             "--max-iters", "inf", "--out", str(form)],
        )
        train = tmp_path / "train.csv"
        train.write_text("x0,x1\n" + "1,1\n" * 6 + "9,9\n" * 3)
        out = tmp_path / "ranked.json"
        result = runner.invoke(
            main,
            [
                "rank", "--model", model_file, "--formulas", str(form),
                "--dataset", str(train), "--top-k", "5", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        lines = [l for l in result.output.splitlines() if "covered" in l]
        assert "6 covered" in lines[0] and "3 covered" in lines[1]
        ranked = json.loads(out.read_text())["ranked"]
        assert [r["covered"] for r in ranked] == [6, 3]

    def test_k_zero_exits_2(self, runner, model_file, tmp_path):
        result = runner.invoke(
            main,
            ["rank", "--model", model_file, "--formulas", "x", "--dataset", "y", "--top-k", "0"],
        )
        assert result.exit_code == 2

    def test_k_larger_than_formula_count_returns_all(self, runner, model_file, tmp_path):
        form = tmp_path / "f.json"
        runner.invoke(
            main,
            ["synthesize", "--model", model_file, "--sensitive", "x0",
             "--max-iters", "inf", "--out", str(form)],
        )
        train = tmp_path / "train.csv"
        train.write_text("x0,x1\n1,1\n9,9\n")
        out = tmp_path / "ranked.json"
        result = runner.invoke(
            main,
            [
                "rank", "--model", model_file, "--formulas", str(form),
                "--dataset", str(train), "--top-k", "99", "--out", str(out),
            ],
        )
        assert result.exit_code == 0
        assert len(json.loads(out.read_text())["ranked"]) == 2


class TestPredictCommand:
    def test_predictions(self, runner, model_file, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x0,x1\n10,6\n6,9\n8,6\n")
        out = tmp_path / "pred.json"
        result = runner.invoke(
            main,
            ["predict", "--model", model_file, "--dataset", str(data), "--out", str(out)],
        )
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert doc["labels"] == [0, 1, 0]
        assert doc["label_names"] == ["+1", "-1", "+1"]

    def test_label_column_ignored(self, runner, model_file, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x0,x1,label\n10,6,1\n")
        out = tmp_path / "pred.json"
        result = runner.invoke(
            main,
            ["predict", "--model", model_file, "--dataset", str(data), "--out", str(out)],
        )
        assert result.exit_code == 0
        assert json.loads(out.read_text())["labels"] == [0]
