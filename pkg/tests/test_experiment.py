import json
from pathlib import Path

import pytest

import experiment
from errors import (
    ConfigurationError,
    IngestionError,
    UnreachableReliabilityError,
)
from experiment import (
    expand_matrix,
    format_value,
    load_experiment_config,
    matrix_report,
    parse_config_text,
    read_metrics_csv,
    read_runs_csv,
    resolve_parallelism,
    run_cell,
    run_experiment,
    write_csv,
    write_runs_csv,
)
from fitness import parse_problem_spec
from metrics import metric_m1
from models import (
    Algorithm,
    ExperimentCell,
    ExperimentConfig,
    Family,
    MetricConfig,
    MetricReport,
    RunOutcome,
)
from stats import rank_by_m1, rank_families

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


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


def _small_config(**overrides):
    values = dict(
        families=["trap"],
        n_ecga=[6, 9],
        k=[3],
        initial_population=8,
        required_successes=2,
        seeds=[0, 1, 2],
        estimator="exact",
        repetitions=2,
        sample_size=200,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def test_parse_config_text_reads_scalars_lists_and_comments():
    text = """
    # comment line
    families = [trap, msp2]   # trailing comment
    n_ecga = [12, 15]
    tolerance = 0.1
    output_dir = "results/x"
    empty = []
    """

    values = parse_config_text(text)

    assert values == {
        "families": ["trap", "msp2"],
        "n_ecga": [12, 15],
        "tolerance": 0.1,
        "output_dir": "results/x",
        "empty": [],
    }


@pytest.mark.parametrize(
    "text",
    ["k = [3\n", "k = 3\nk = 5\n", "just words\n"],
)
def test_parse_config_text_rejects_malformed_lines(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_load_experiment_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("families = [trap]\nbogus = 1\n")

    with pytest.raises(ValueError):
        load_experiment_config(path)


def test_load_experiment_config_reports_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment_config(tmp_path / "missing.cfg")


def test_expand_matrix_skips_invalid_divisibility():
    config = ExperimentConfig(families=["trap"], n_ecga=[12, 15], k=[3, 5])

    cells = expand_matrix(config)
    report = matrix_report(config)

    assert [cell.problem for cell in cells] == ["trap:12:3", "trap:15:3", "trap:15:5"]
    assert [rejected.candidate for rejected in report.rejected] == ["trap:12:5"]


def test_expand_matrix_handles_onemax_and_msp3():
    config = ExperimentConfig(
        families=["onemax", "msp3"], n_ecga=[12, 15], problems=["trapi1:13:3"]
    )

    cells = expand_matrix(config)

    assert [cell.problem for cell in cells] == [
        "onemax:12",
        "onemax:15",
        "msp3:15:3:5:1",
        "trapi1:13:3",
    ]


def test_expand_matrix_rejects_empty_matrix():
    config = ExperimentConfig(families=["trapi1"], n_ecga=[12], k=[3])

    with pytest.raises(ConfigurationError):
        expand_matrix(config)


def test_desk_config_expands_to_eleven_cells():
    config = load_experiment_config(CONFIGS / "desk.cfg")

    cells = expand_matrix(config)

    assert len(cells) == 11
    assert {cell.algorithm for cell in cells} == {Algorithm.ECGA}


def test_full_config_reports_count_mismatch():
    config = load_experiment_config(CONFIGS / "full.cfg")

    report = matrix_report(config)

    assert report.counts == {"ecga": 19, "boa": 25}
    assert report.mismatches() == {"ecga": (19, 55), "boa": (25, 74)}


def test_resolve_parallelism_prefers_environment(monkeypatch):
    config = ExperimentConfig(parallelism=3)

    monkeypatch.delenv(experiment.THREADS_ENV, raising=False)
    assert resolve_parallelism(config) == 3
    monkeypatch.setenv(experiment.THREADS_ENV, "6")
    assert resolve_parallelism(config) == 6
    monkeypatch.setenv(experiment.THREADS_ENV, "zero")
    assert resolve_parallelism(config) == 3


def test_run_cell_sizes_then_runs_every_seed(monkeypatch):
    monkeypatch.setattr(experiment, "run_with_eda", _fake_run)
    cell = ExperimentCell(problem="trap:6:3", algorithm=Algorithm.ECGA)

    result = run_cell(cell, _small_config())

    assert result.unreachable is None
    assert result.bisection.population_size >= 20
    assert [run.seed for run in result.runs] == [0, 1, 2]
    assert all(run.success for run in result.runs)


def test_run_cell_records_unreachable_cells(monkeypatch):
    def unreachable(*args, **kwargs):
        raise UnreachableReliabilityError("not reliable", last_population=64)

    monkeypatch.setattr(experiment, "bisect_population", unreachable)
    cell = ExperimentCell(problem="trap:6:3", algorithm=Algorithm.ECGA)

    result = run_cell(cell, _small_config())

    assert result.unreachable == "not reliable"
    assert result.runs == []


def test_run_experiment_writes_every_artifact(monkeypatch, tmp_path):
    monkeypatch.setattr(experiment, "run_with_eda", _fake_run)

    summary = run_experiment(_small_config(), tmp_path, processes=1)

    assert summary.cells == 2
    assert summary.unreachable == []
    assert summary.analyzed_rows == {"ecga": 2}
    assert set(summary.artifacts) >= {
        "runs.csv",
        "metrics.csv",
        "analysis.json",
        "scatter.csv",
        "exclusions.txt",
        "matrix.json",
        "ranking.csv",
        "bisect/ecga__trap_6_3.json",
        "bisect/ecga__trap_9_3.json",
    }
    runs = read_runs_csv(tmp_path / "runs.csv")
    assert len(runs) == 6
    metrics = read_metrics_csv(tmp_path / "metrics.csv")
    assert [report.problem for report in metrics] == ["trap:6:3", "trap:9:3"]
    assert metrics[0].m1 == pytest.approx(0.5 / 6)
    analysis = json.loads((tmp_path / "analysis.json").read_text())
    assert analysis["ecga"]["n_rows"] == 2
    assert (tmp_path / "exclusions.txt").read_text() == ""


def test_run_experiment_is_deterministic(monkeypatch, tmp_path):
    monkeypatch.setattr(experiment, "run_with_eda", _fake_run)

    run_experiment(_small_config(), tmp_path / "a", processes=1)
    run_experiment(_small_config(), tmp_path / "b", processes=1)

    for name in ("runs.csv", "metrics.csv", "analysis.json", "ranking.csv"):
        assert (tmp_path / "a" / name).read_text() == (
            tmp_path / "b" / name
        ).read_text()


def test_run_experiment_lists_unreachable_cells(monkeypatch, tmp_path):
    def never(problem, algorithm, population_size, seed, **options):
        return _fake_run(problem, algorithm, 0, seed)

    monkeypatch.setattr(experiment, "run_with_eda", never)
    config = _small_config(n_ecga=[6], max_population=32)

    summary = run_experiment(config, tmp_path, processes=1)

    assert summary.unreachable == ["ecga__trap_6_3"]
    lines = (tmp_path / "exclusions.txt").read_text().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("ecga\ttrap:6:3\t")


def test_runs_csv_reads_back_written_outcomes(tmp_path):
    runs = [_fake_run(experiment.parse_problem_spec("trap:6:3"), "ecga", 32, 1)]
    path = tmp_path / "runs.csv"

    write_runs_csv(path, runs)

    assert read_runs_csv(path) == runs


def test_read_metrics_csv_recovers_family_and_missing_values(tmp_path):
    path = tmp_path / "metrics.csv"
    write_csv(
        path,
        ["problem", "n", "k", "alpha", "m1", "m2", "m3", "fdc"],
        [{"problem": "onemax:12", "n": 12, "k": 12, "alpha": 1.0, "fdc": -1.0}],
    )

    (report,) = read_metrics_csv(path)

    assert report.family.value == "onemax"
    assert report.m1 is None
    assert report.fdc == -1.0


def test_read_runs_csv_rejects_missing_columns(tmp_path):
    path = tmp_path / "runs.csv"
    path.write_text("problem,seed\ntrap:6:3,0\n")

    with pytest.raises(IngestionError):
        read_runs_csv(path)


def test_format_value():
    assert format_value(None) == "NA"
    assert format_value(True) == "true"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(7) == "7"


def _artifacts(directory):
    return {
        str(path.relative_to(directory)): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


def test_worker_pool_writes_the_same_artifacts_as_a_serial_run(tmp_path):
    config = _small_config(initial_population=16, required_successes=3)

    run_experiment(config, tmp_path / "serial", processes=1)
    run_experiment(config, tmp_path / "pool", processes=2)

    assert _artifacts(tmp_path / "serial") == _artifacts(tmp_path / "pool")


def test_m1_ranks_msp2_hardest_on_the_desk_matrix():
    config = load_experiment_config(CONFIGS / "desk.cfg")
    exact = MetricConfig(estimator="exact", repetitions=1)
    reports = []
    for spec in sorted({cell.problem for cell in expand_matrix(config)}):
        problem = parse_problem_spec(spec)
        reports.append(
            MetricReport(
                problem=spec,
                family=problem.family,
                n=problem.n,
                k=problem.k,
                m1=metric_m1(problem, exact),
            )
        )

    assert rank_families(reports)[0][0] == "msp2"
    assert rank_by_m1(reports)[0].family == Family.MSP2


@pytest.fixture(scope="module")
def desk_output(tmp_path_factory):
    config = load_experiment_config(CONFIGS / "desk.cfg")
    output = tmp_path_factory.mktemp("desk")
    run_experiment(config, output / "serial", processes=1)
    return config, output


@pytest.mark.slow
def test_desk_m1_correlates_negatively_with_fitness_calls(desk_output):
    _, output = desk_output

    analysis = json.loads((output / "serial" / "analysis.json").read_text())

    assert analysis["ecga"]["pearson"]["m1"] <= -0.4
    assert analysis["ecga"]["kendall"]["m1"] < 0


@pytest.mark.slow
def test_desk_artifacts_do_not_depend_on_worker_count(desk_output):
    config, output = desk_output

    run_experiment(config, output / "pool", processes=8)

    assert _artifacts(output / "serial") == _artifacts(output / "pool")
