#!/usr/bin/env python3
"""Command-line entry point: ``walsh-hardness <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration or input, 3 when every
outcome was an unreachable-reliability failure, 1 for any other error.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from eda import run_eda
from errors import (
    ArgumentError,
    ConfigurationError,
    DimensionError,
    SchemaParseError,
    UnreachableReliabilityError,
    WalshHardnessError,
)
from experiment import (
    CLI_METRIC_COLUMNS,
    SCATTER_COLUMNS,
    load_experiment_config,
    read_metrics_csv,
    read_runs_csv,
    run_experiment,
    write_csv,
)
from fitness import parse_problem_spec
from metrics import compute_metrics
from models import Algorithm, EdaConfig, EstimationMethod, MetricConfig
from settings import configure_logging, load_env_file
from sizing import bisect_population, run_with_eda
from stats import analyze, build_analysis_table, scatter_rows
from walsh import full_spectrum, order_coefficients, parse_schema, schema_average_exact

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3

WALSH_COLUMNS = ["mask", "indices", "coefficient", "abs_coefficient"]


def _emit_json(payload: object, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    else:
        print(text)


def _emit_csv(columns: List[str], rows: List[dict], out: Optional[str]) -> None:
    write_csv(out or sys.stdout, columns, rows)


def cmd_walsh(args: argparse.Namespace) -> int:
    problem = parse_problem_spec(args.problem)
    if args.schema:
        schema = parse_schema(args.schema, problem.n)
        print(format(schema_average_exact(full_spectrum(problem), schema), ".17g"))
        return EXIT_OK
    if args.order == "all":
        if EstimationMethod(args.method) != EstimationMethod.EXACT:
            raise ConfigurationError("--order all requires --method exact")
        spectrum = full_spectrum(problem)
        rows = [
            (tuple(i for i in range(problem.n) if mask >> i & 1), float(value))
            for mask, value in enumerate(spectrum.coeffs)
        ]
    else:
        try:
            order = int(args.order)
        except ValueError:
            raise ConfigurationError(f"Invalid order '{args.order}'") from None
        rows = order_coefficients(
            problem,
            order,
            args.method,
            trials=args.trials,
            sample_size=args.samples,
            seed=args.seed,
        )
    _emit_csv(
        WALSH_COLUMNS,
        [
            {
                "mask": sum(1 << i for i in subset),
                "indices": " ".join(str(i) for i in subset),
                "coefficient": value,
                "abs_coefficient": abs(value),
            }
            for subset, value in rows
        ],
        args.out,
    )
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    config = MetricConfig(
        sample_size=args.samples,
        selection_fraction=args.fraction,
        repetitions=args.reps,
        estimator=args.estimator,
        confusion_trials=args.trials,
        rng_seed=args.seed,
    )
    rows = []
    for spec in args.problem:
        report = compute_metrics(parse_problem_spec(spec), config)
        for metric, reason in sorted(report.undefined.items()):
            logger.warning("%s: %s undefined (%s)", report.problem, metric, reason)
        row = report.model_dump(mode="json", include={"problem", "n", "k", "alpha"})
        row.update(m1=report.m1, m2=report.m2, m3=report.m3, fdc=report.fdc)
        row.update(reps=config.repetitions, samples=config.sample_size, seed=args.seed)
        rows.append(row)
    _emit_csv(CLI_METRIC_COLUMNS, rows, args.out)
    return EXIT_OK


def cmd_run_eda(args: argparse.Namespace) -> int:
    config = EdaConfig(
        algorithm=args.algo,
        population_size=args.pop,
        rng_seed=args.seed,
        max_generations=args.max_gen,
        max_parents=args.max_parents,
    )
    outcome = run_eda(parse_problem_spec(args.problem), config)
    _emit_json(outcome.model_dump(mode="json"), args.out)
    return EXIT_OK


def cmd_bisect(args: argparse.Namespace) -> int:
    def runner(problem, algorithm, size, seed):
        return run_with_eda(
            problem, algorithm, size, seed, max_generations=args.max_gen
        )

    result = bisect_population(
        parse_problem_spec(args.problem),
        args.algo,
        initial_N=args.initial,
        required_successes=args.successes,
        tolerance=args.tol,
        seed=args.seed,
        max_population=args.max_pop,
        runner=runner,
    )
    _emit_json(result.model_dump(mode="json"), args.out)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    summary = run_experiment(config, args.output_dir, args.processes)
    print(json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True))
    if summary.unreachable and len(summary.unreachable) == summary.cells:
        return EXIT_UNREACHABLE
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    runs = read_runs_csv(args.runs)
    if args.algorithm:
        runs = [run for run in runs if run.algorithm == Algorithm(args.algorithm)]
    table = build_analysis_table(runs, read_metrics_csv(args.metrics))
    report = analyze(table, algorithm=args.algorithm)
    _emit_json(report.model_dump(mode="json"), args.out)
    if args.scatter:
        write_csv(args.scatter, SCATTER_COLUMNS[1:], scatter_rows(table))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walsh-hardness",
        description="Walsh-coefficient difficulty metrics for EDAs",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    algorithms = [a.value for a in Algorithm]
    methods = [m.value for m in EstimationMethod]

    walsh = sub.add_parser("walsh", help="export Walsh coefficients")
    walsh.add_argument("--problem", required=True)
    walsh.add_argument("--order", default="2", help="coefficient order or 'all'")
    walsh.add_argument("--method", choices=methods, default="exact")
    walsh.add_argument("--samples", type=int, default=5000)
    walsh.add_argument("--trials", type=int, default=64)
    walsh.add_argument("--seed", type=int, default=0)
    walsh.add_argument("--schema", help="print the exact mean fitness of a schema")
    walsh.add_argument("--out")
    walsh.set_defaults(handler=cmd_walsh)

    metrics = sub.add_parser("metrics", help="compute M1, M2, M3 and FDC")
    metrics.add_argument("--problem", required=True, action="append")
    metrics.add_argument("--samples", type=int, default=5000)
    metrics.add_argument("--fraction", type=float, default=0.5)
    metrics.add_argument("--reps", type=int, default=50)
    metrics.add_argument("--estimator", choices=methods, default="population")
    metrics.add_argument("--trials", type=int, default=64)
    metrics.add_argument("--seed", type=int, default=0)
    metrics.add_argument("--out")
    metrics.set_defaults(handler=cmd_metrics)

    run = sub.add_parser("run-eda", help="run ECGA or BOA once")
    run.add_argument("--problem", required=True)
    run.add_argument("--algo", choices=algorithms, default="ecga")
    run.add_argument("--pop", type=int, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-gen", type=int, default=200)
    run.add_argument("--max-parents", type=int, default=10)
    run.add_argument("--out")
    run.set_defaults(handler=cmd_run_eda)

    bisect = sub.add_parser("bisect", help="size the population by bisection")
    bisect.add_argument("--problem", required=True)
    bisect.add_argument("--algo", choices=algorithms, default="ecga")
    bisect.add_argument("--initial", type=int, default=1000)
    bisect.add_argument("--successes", type=int, default=10)
    bisect.add_argument("--tol", type=float, default=0.1)
    bisect.add_argument("--seed", type=int, default=0)
    bisect.add_argument("--max-gen", type=int, default=200)
    bisect.add_argument("--max-pop", type=int, default=1 << 20)
    bisect.add_argument("--out")
    bisect.set_defaults(handler=cmd_bisect)

    experiment = sub.add_parser("experiment", help="run a configured experiment")
    experiment.add_argument("--config", required=True)
    experiment.add_argument("--output-dir")
    experiment.add_argument("--processes", type=int)
    experiment.set_defaults(handler=cmd_experiment)

    analysis = sub.add_parser("analyze", help="correlate metrics with fitness calls")
    analysis.add_argument("--runs", required=True)
    analysis.add_argument("--metrics", required=True)
    analysis.add_argument("--algorithm", choices=algorithms)
    analysis.add_argument("--out")
    analysis.add_argument("--scatter")
    analysis.set_defaults(handler=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_env_file()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except UnreachableReliabilityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (
        ArgumentError,
        ConfigurationError,
        DimensionError,
        SchemaParseError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as e:
        print(f"error: invalid parameters\n{e}", file=sys.stderr)
        return EXIT_CONFIG
    except WalshHardnessError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
