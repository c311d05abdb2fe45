import csv
import io
import json

import pytest

import experiment
import walsh_hardness_cli as cli
from models import RunOutcome


def _fake_run(problem, algorithm, population_size, seed, **options):
    success = population_size >= 20
    return RunOutcome(
        problem=problem.spec,
        algorithm=algorithm,
        population_size=population_size,
        success=success,
        fitness_calls=population_size * problem.n + seed,
        generations_used=3,
        best_fitness=float(problem.n if success else problem.n - 1),
        seed=seed,
    )


def _never_run(problem, algorithm, population_size, seed, **options):
    return _fake_run(problem, algorithm, 0, seed)


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _write_config(tmp_path, body):
    path = tmp_path / "small.cfg"
    path.write_text(body)
    return str(path)


SMALL_CONFIG = """
families = [trap]
n_ecga = [6, 9]
k = [3]
initial_population = 8
required_successes = 2
seeds = [0, 1, 2]
estimator = exact
repetitions = 2
sample_size = 200
"""


def test_walsh_schema_prints_exact_mean(capsys):
    code = cli.main(["walsh", "--problem", "trap:3:3", "--schema", "***"])

    assert code == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "1"


def test_walsh_exports_one_order_as_csv(capsys):
    code = cli.main(["walsh", "--problem", "trap:3:3", "--order", "2"])

    rows = _csv_rows(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert [row["indices"] for row in rows] == ["0 1", "0 2", "1 2"]
    assert rows[0]["mask"] == "3"
    assert float(rows[0]["coefficient"]) == pytest.approx(0.5)


def test_walsh_exports_full_spectrum_to_file(tmp_path):
    out = tmp_path / "spectrum.csv"

    code = cli.main(
        ["walsh", "--problem", "trap:3:3", "--order", "all", "--out", str(out)]
    )

    assert code == cli.EXIT_OK
    assert len(_csv_rows(out.read_text())) == 8


@pytest.mark.parametrize(
    "argv",
    [
        ["walsh", "--problem", "trap:3:3", "--order", "all", "--method", "confusion"],
        ["walsh", "--problem", "trap:3:3", "--order", "two"],
        ["walsh", "--problem", "trap:10:3"],
        ["walsh", "--problem", "trap:3:3", "--schema", "1x*"],
        ["run-eda", "--problem", "trap:6:3", "--pop", "2"],
        ["bisect", "--problem", "trap:6:3", "--tol", "1.5"],
        ["bisect", "--problem", "trap:6:3", "--successes", "0"],
        ["bisect", "--problem", "trap:6:3", "--initial", "2"],
        ["metrics", "--problem", "trap:6:3", "--fraction", "0"],
    ],
)
def test_invalid_input_exits_with_configuration_code(argv, capsys):
    code = cli.main(argv)

    assert code == cli.EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error:")


def test_metrics_writes_one_row_per_problem(tmp_path):
    out = tmp_path / "metrics.csv"

    code = cli.main(
        [
            "metrics",
            "--problem",
            "trap:12:3",
            "--problem",
            "onemax:8",
            "--estimator",
            "exact",
            "--reps",
            "2",
            "--samples",
            "200",
            "--out",
            str(out),
        ]
    )

    rows = _csv_rows(out.read_text())
    assert code == cli.EXIT_OK
    assert list(rows[0]) == experiment.CLI_METRIC_COLUMNS
    assert float(rows[0]["m1"]) == pytest.approx(0.5 / 12)
    assert rows[1]["m1"] == "NA"
    assert rows[1]["reps"] == "2"


def test_run_eda_prints_outcome_json(capsys):
    code = cli.main(["run-eda", "--problem", "onemax:8", "--pop", "40"])

    payload = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert payload["problem"] == "onemax:8"
    assert payload["population_size"] == 40
    assert payload["algorithm"] == "ecga"


def test_bisect_uses_the_eda_runner(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_with_eda", _fake_run)

    code = cli.main(["bisect", "--problem", "trap:6:3", "--initial", "8"])

    payload = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert payload["population_size"] == 20


def test_bisect_unreachable_exits_with_code_three(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_with_eda", _never_run)

    code = cli.main(
        ["bisect", "--problem", "trap:6:3", "--initial", "8", "--max-pop", "32"]
    )

    assert code == cli.EXIT_UNREACHABLE
    assert "not reliable" in capsys.readouterr().err


def test_experiment_then_analyze(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(experiment, "run_with_eda", _fake_run)
    config = _write_config(tmp_path, SMALL_CONFIG)
    results = tmp_path / "results"

    code = cli.main(
        ["experiment", "--config", config, "--output-dir", str(results)]
    )

    summary = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert summary["cells"] == 2

    report_path = tmp_path / "analysis.json"
    scatter_path = tmp_path / "scatter.csv"
    code = cli.main(
        [
            "analyze",
            "--runs",
            str(results / "runs.csv"),
            "--metrics",
            str(results / "metrics.csv"),
            "--algorithm",
            "ecga",
            "--out",
            str(report_path),
            "--scatter",
            str(scatter_path),
        ]
    )

    report = json.loads(report_path.read_text())
    assert code == cli.EXIT_OK
    assert report["n_rows"] == 2
    assert report["algorithm"] == "ecga"
    header = scatter_path.read_text().splitlines()[0]
    assert header == "problem,n,k,metric,metric_value,log10_calls"


def test_experiment_with_every_cell_unreachable_exits_with_code_three(
    monkeypatch, tmp_path, capsys
):
    monkeypatch.setattr(experiment, "run_with_eda", _never_run)
    config = _write_config(tmp_path, SMALL_CONFIG + "max_population = 32\n")

    code = cli.main(
        ["experiment", "--config", config, "--output-dir", str(tmp_path / "out")]
    )

    assert code == cli.EXIT_UNREACHABLE
    assert len(json.loads(capsys.readouterr().out)["unreachable"]) == 2


def test_experiment_with_bad_config_exits_with_configuration_code(tmp_path, capsys):
    config = _write_config(tmp_path, "families = [trap\n")

    code = cli.main(["experiment", "--config", config])

    assert code == cli.EXIT_CONFIG


def test_analyze_missing_file_is_an_error(tmp_path, capsys):
    code = cli.main(
        [
            "analyze",
            "--runs",
            str(tmp_path / "none.csv"),
            "--metrics",
            str(tmp_path / "none.csv"),
        ]
    )

    assert code == cli.EXIT_ERROR
