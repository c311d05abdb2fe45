"""Experiment orchestration: matrix expansion, sizing, runs, metrics, analysis.

Artifacts written to the output directory:

- ``runs.csv``: one row per seeded run at the bisection population
- ``metrics.csv``: one row per distinct problem, ``NA`` for undefined values
- ``bisect/<algorithm>__<problem>.json``: full bisection record per cell
- ``analysis.json``: correlation and regression report per algorithm
- ``scatter.csv``: long-format plot data
- ``exclusions.txt``: cells left out of the analysis and why
- ``matrix.json``: expanded cells, rejected candidates and count checks
- ``ranking.csv``: problems ordered by M1, hardest first
"""
import csv
import json
import logging
import multiprocessing
import os
import re
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

from errors import ConfigurationError, IngestionError, UnreachableReliabilityError
from fitness import make_problem, parse_problem_spec
from metrics import compute_metrics
from models import (
    Algorithm,
    CellResult,
    ExperimentCell,
    ExperimentConfig,
    ExperimentSummary,
    Family,
    MatrixReport,
    MetricConfig,
    MetricReport,
    ProblemInstance,
    RejectedCell,
    RunOutcome,
)
from sizing import bisect_population, run_with_eda
from stats import analyze, build_analysis_table, rank_by_m1, scatter_rows

logger = logging.getLogger(__name__)

THREADS_ENV = "WALSH_HARDNESS_THREADS"

RUN_COLUMNS = [
    "algorithm",
    "problem",
    "seed",
    "population_size",
    "success",
    "fitness_calls",
    "generations_used",
    "best_fitness",
]
METRIC_COLUMNS = [
    "problem",
    "family",
    "n",
    "k",
    "alpha",
    "m1",
    "m2",
    "m3",
    "fdc",
    "m1_std",
    "m2_std",
    "m3_std",
    "fdc_std",
    "m3_discarded",
]
SCATTER_COLUMNS = [
    "algorithm",
    "problem",
    "n",
    "k",
    "metric",
    "metric_value",
    "log10_calls",
]
RANKING_COLUMNS = ["rank", "problem", "family", "m1"]
CLI_METRIC_COLUMNS = [
    "problem",
    "n",
    "k",
    "alpha",
    "m1",
    "m2",
    "m3",
    "fdc",
    "reps",
    "samples",
    "seed",
]

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


# Config files


def _scalar(text: str) -> Union[int, float, str]:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config_text(text: str) -> Dict[str, object]:
    """``key = value`` lines; ``[a, b]`` lists; ``#`` starts a comment."""
    values: Dict[str, object] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        match = _LINE.match(line)
        if match is None:
            raise ConfigurationError(f"line {number}: expected 'key = value'")
        key, value = match.groups()
        if key in values:
            raise ConfigurationError(f"line {number}: duplicate key '{key}'")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigurationError(f"line {number}: unterminated list")
            body = value[1:-1].strip()
            values[key] = [_scalar(item) for item in body.split(",")] if body else []
        else:
            values[key] = _scalar(value)
    return values


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    return ExperimentConfig(**parse_config_text(text))


# Matrix


def _candidates(
    config: ExperimentConfig, algorithm: Algorithm
) -> Iterable[Tuple[str, Optional[ProblemInstance], Optional[str]]]:
    """(label, problem or None, rejection reason) per cartesian candidate."""
    for family in config.families:
        for n in config.dims(algorithm):
            if family == Family.ONEMAX:
                params = [dict()]
            elif family == Family.MSP3:
                params = [dict(k=config.msp3_k[0], k2=config.msp3_k[1])]
            else:
                params = [dict(k=k) for k in config.k]
            for extra in params:
                label = ":".join(
                    [family.value, str(n)] + [str(v) for v in extra.values()]
                )
                try:
                    problem = make_problem(family, n, alpha=config.alpha, **extra)
                except ConfigurationError as e:
                    yield label, None, str(e)
                    continue
                yield label, problem, None

    for spec in config.problems:
        yield spec, parse_problem_spec(spec), None


def matrix_report(config: ExperimentConfig) -> MatrixReport:
    """Expand the matrix per algorithm and compare with the published counts."""
    report = MatrixReport()
    expected = {
        Algorithm.ECGA: config.expected_cells_ecga,
        Algorithm.BOA: config.expected_cells_boa,
    }
    for algorithm in config.algorithms:
        specs: List[str] = []
        for label, problem, reason in _candidates(config, algorithm):
            if problem is None:
                report.rejected.append(
                    RejectedCell(algorithm=algorithm, candidate=label, reason=reason)
                )
            elif problem.spec not in specs:
                specs.append(problem.spec)
        report.cells[algorithm.value] = specs
        report.counts[algorithm.value] = len(specs)
        report.expected[algorithm.value] = expected[algorithm]

    for algorithm, (found, published) in report.mismatches().items():
        logger.warning(
            "%s matrix has %d cells; the published experiment lists %d",
            algorithm,
            found,
            published,
        )
    return report


def expand_matrix(config: ExperimentConfig) -> List[ExperimentCell]:
    """Valid (problem, algorithm) cells in deterministic order."""
    report = matrix_report(config)
    cells = [
        ExperimentCell(problem=spec, algorithm=algorithm)
        for algorithm in config.algorithms
        for spec in report.cells[algorithm.value]
    ]
    if not cells:
        reasons = "; ".join(f"{r.candidate}: {r.reason}" for r in report.rejected)
        raise ConfigurationError(f"Experiment matrix is empty. {reasons}".strip())
    return cells


# Execution


def resolve_parallelism(config: ExperimentConfig) -> int:
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return config.parallelism
    try:
        threads = int(value)
        if threads < 1:
            raise ValueError(value)
    except ValueError:
        logger.warning("Ignoring invalid %s=%r", THREADS_ENV, value)
        return config.parallelism
    return threads


def run_cell(cell: ExperimentCell, config: ExperimentConfig) -> CellResult:
    """Size the population for one cell, then run every configured seed at it."""
    problem = parse_problem_spec(cell.problem)
    runner = partial(
        run_with_eda,
        max_generations=config.max_generations,
        max_parents=config.max_parents,
    )
    try:
        bisection = bisect_population(
            problem,
            cell.algorithm,
            initial_N=config.initial_population,
            required_successes=config.required_successes,
            tolerance=config.tolerance,
            seed=config.bisection_seed,
            max_population=config.max_population,
            runner=runner,
        )
    except UnreachableReliabilityError as e:
        logger.warning("%s: %s", cell.slug, e)
        return CellResult(cell=cell, unreachable=str(e))

    runs = [
        runner(problem, cell.algorithm, bisection.population_size, seed)
        for seed in config.seeds
    ]
    logger.info(
        "%s: N=%d, %d/%d runs solved",
        cell.slug,
        bisection.population_size,
        sum(run.success for run in runs),
        len(runs),
    )
    return CellResult(cell=cell, bisection=bisection, runs=runs)


def _cell_job(job: Tuple[ExperimentCell, ExperimentConfig]) -> CellResult:
    return run_cell(*job)


def _metric_job(job: Tuple[str, MetricConfig]) -> MetricReport:
    spec, metric_config = job
    return compute_metrics(parse_problem_spec(spec), metric_config)


def _map(function, jobs: List, processes: int) -> List:
    if processes <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with multiprocessing.Pool(processes=min(processes, len(jobs))) as pool:
        return pool.map(function, jobs)


# Artifacts


def format_value(value: object) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(
    target: Union[str, Path, TextIO],
    columns: List[str],
    rows: Iterable[Dict[str, object]],
) -> None:
    """Write rows to a path or an open text handle; floats keep 17 digits."""
    if hasattr(target, "write"):
        _write_rows(target, columns, rows)
        return
    with Path(target).open("w", newline="", encoding="utf-8") as handle:
        _write_rows(handle, columns, rows)


def _write_rows(
    handle: TextIO, columns: List[str], rows: Iterable[Dict[str, object]]
) -> None:
    writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: format_value(row.get(c)) for c in columns})


def write_json(path: Union[str, Path], payload: object) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_runs_csv(path: Union[str, Path], runs: Iterable[RunOutcome]) -> None:
    ordered = sorted(runs, key=lambda r: (r.algorithm.value, r.problem, r.seed))
    write_csv(path, RUN_COLUMNS, (run.model_dump(mode="json") for run in ordered))


def write_metrics_csv(path: Union[str, Path], reports: Iterable[MetricReport]):
    rows = []
    for report in sorted(reports, key=lambda r: r.problem):
        row = report.model_dump(
            mode="json", exclude={"config", "undefined", "per_repetition"}
        )
        for metric in ("m1", "m2", "m3", "fdc"):
            row[f"{metric}_std"] = report.std(metric)
        rows.append(row)
    write_csv(path, METRIC_COLUMNS, rows)


def _read_csv(path: Union[str, Path], columns: List[str]) -> List[Dict[str, str]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            missing = set(columns) - set(reader.fieldnames or [])
            if missing:
                raise IngestionError(f"{path}: missing columns {sorted(missing)}")
            return list(reader)
    except OSError as e:
        raise IngestionError(f"Cannot read {path}: {e}") from e


def read_runs_csv(path: Union[str, Path]) -> List[RunOutcome]:
    runs = []
    for line, row in enumerate(_read_csv(path, RUN_COLUMNS), start=2):
        try:
            runs.append(RunOutcome(**{c: row[c] for c in RUN_COLUMNS}))
        except ValueError as e:
            raise IngestionError(f"{path}:{line}: {e}") from e
    return runs


def read_metrics_csv(path: Union[str, Path]) -> List[MetricReport]:
    """Metric rows written by the experiment or by the metrics subcommand.

    A missing ``family`` column is recovered from the problem spec.
    """
    fields = ["problem", "n", "k", "alpha", "m1", "m2", "m3", "fdc"]
    reports = []
    for line, row in enumerate(_read_csv(path, fields), start=2):
        values = {c: (None if row[c] == "NA" else row[c]) for c in fields}
        values["family"] = row.get("family") or row["problem"].split(":", 1)[0]
        try:
            reports.append(MetricReport(**values))
        except ValueError as e:
            raise IngestionError(f"{path}:{line}: {e}") from e
    return reports


def run_experiment(
    config: ExperimentConfig,
    output_dir: Optional[Union[str, Path]] = None,
    processes: Optional[int] = None,
) -> ExperimentSummary:
    """Run the whole pipeline and write every artifact."""
    out = Path(output_dir or config.output_dir)
    (out / "bisect").mkdir(parents=True, exist_ok=True)
    processes = processes or resolve_parallelism(config)
    matrix = matrix_report(config)
    cells = expand_matrix(config)
    logger.info("Running %d cells with %d process(es)", len(cells), processes)

    results = _map(_cell_job, [(cell, config) for cell in cells], processes)
    results.sort(key=lambda result: result.cell.key)
    problems = sorted({cell.problem for cell in cells})
    metric_config = config.metric_config()
    reports = _map(_metric_job, [(spec, metric_config) for spec in problems], processes)
    by_problem = {report.problem: report for report in reports}

    runs = [run for result in results for run in result.runs]
    write_runs_csv(out / "runs.csv", runs)
    write_metrics_csv(out / "metrics.csv", reports)
    for result in results:
        if result.bisection is not None:
            write_json(
                out / "bisect" / f"{result.cell.slug}.json",
                result.bisection.model_dump(mode="json"),
            )

    summary = ExperimentSummary(output_dir=str(out), cells=len(cells))
    analyses: Dict[str, object] = {}
    scatter: List[Dict[str, object]] = []
    exclusions: List[str] = []
    for algorithm in config.algorithms:
        mine = [r for r in results if r.cell.algorithm == algorithm]
        for result in mine:
            if result.unreachable is not None:
                summary.unreachable.append(result.cell.slug)
                exclusions.append(
                    f"{algorithm.value}\t{result.cell.problem}\t{result.unreachable}"
                )
        table = build_analysis_table(
            [run for result in mine for run in result.runs],
            [
                by_problem[r.cell.problem]
                for r in mine
                if r.unreachable is None
            ],
        )
        for exclusion in table.exclusions:
            exclusions.append(
                f"{algorithm.value}\t{exclusion.problem}\t{exclusion.reason}"
            )
        report = analyze(table, algorithm=algorithm.value)
        analyses[algorithm.value] = report.model_dump(mode="json")
        summary.analyzed_rows[algorithm.value] = len(table.rows)
        scatter.extend(
            dict(row, algorithm=algorithm.value) for row in scatter_rows(table)
        )

    write_json(out / "analysis.json", analyses)
    write_csv(out / "scatter.csv", SCATTER_COLUMNS, scatter)
    (out / "exclusions.txt").write_text("".join(f"{e}\n" for e in exclusions))
    write_json(out / "matrix.json", matrix.model_dump(mode="json"))
    write_csv(
        out / "ranking.csv",
        RANKING_COLUMNS,
        (entry.model_dump(mode="json") for entry in rank_by_m1(reports)),
    )
    summary.artifacts = sorted(
        str(path.relative_to(out)) for path in out.rglob("*") if path.is_file()
    )
    logger.info(
        "Experiment finished: %d cells, %d unreachable",
        len(cells),
        len(summary.unreachable),
    )
    return summary
