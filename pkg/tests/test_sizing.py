import pytest

from errors import ArgumentError, UnreachableReliabilityError
from fitness import parse_problem_spec
from models import Algorithm, RunOutcome
from sizing import VERIFY_STREAM, bisect_population, probe_seeds, run_with_eda
from stats import kendall_tau

PROBLEM = parse_problem_spec("trap:12:3")


def _outcome(problem, algorithm, size, seed, success):
    return RunOutcome(
        problem=problem.spec,
        algorithm=algorithm,
        population_size=size,
        success=success,
        fitness_calls=size * 10,
        generations_used=10,
        best_fitness=12.0 if success else 11.0,
        seed=seed,
    )


def _threshold_runner(threshold, calls=None):
    def runner(problem, algorithm, size, seed):
        if calls is not None:
            calls.append(size)
        return _outcome(problem, algorithm, size, seed, size >= threshold)

    return runner


def test_bisection_on_threshold_runner():
    calls = []

    result = bisect_population(
        PROBLEM, "ecga", initial_N=8, runner=_threshold_runner(73, calls)
    )

    assert result.population_size == 76
    assert 73 <= result.population_size <= 81
    assert result.min_bound == 72
    assert result.failure_witness == 72
    assert [probe.population_size for probe in result.probes] == [
        8, 16, 32, 64, 128, 96, 80, 72, 76
    ]
    assert result.total_fitness_calls_at_N == 760.0
    assert len(result.verification) == 10


def test_unreliable_size_stops_after_first_failure():
    calls = []

    bisect_population(PROBLEM, initial_N=8, runner=_threshold_runner(73, calls))

    assert calls[:4] == [8, 16, 32, 64]


def test_reliable_initial_population_is_returned_unchanged():
    result = bisect_population(
        PROBLEM, Algorithm.BOA, initial_N=100, runner=_threshold_runner(0)
    )

    assert result.population_size == 100
    assert result.min_bound == 50
    assert result.failure_witness is None
    assert [probe.population_size for probe in result.probes] == [100]
    assert result.algorithm == "boa"


def test_unreachable_reliability_reports_last_population():
    with pytest.raises(UnreachableReliabilityError) as excinfo:
        bisect_population(
            PROBLEM,
            initial_N=8,
            max_population=64,
            runner=_threshold_runner(10_000),
        )

    assert excinfo.value.last_population == 64


def _flaky_runner(verify_failures=(), search_failures=()):
    # one failing seed per listed size, in the verification or search stream
    flaky = {
        size: probe_seeds(0, size, 10, VERIFY_STREAM)[0] for size in verify_failures
    }
    flaky.update({size: probe_seeds(0, size, 10)[0] for size in search_failures})

    def runner(problem, algorithm, size, seed):
        success = size >= 73 and flaky.get(size) != seed
        return _outcome(problem, algorithm, size, seed, success)

    return runner


def test_failed_verification_becomes_the_lower_bound():
    result = bisect_population(
        PROBLEM, initial_N=8, runner=_flaky_runner(verify_failures=(76, 83))
    )

    assert result.population_size == 91
    assert result.min_bound == 83
    assert result.max_bound == 91
    assert result.failure_witness == 83
    assert (result.max_bound - result.min_bound) / result.min_bound <= 0.1
    assert [probe.population_size for probe in result.probes][-3:] == [76, 83, 91]
    assert all(run.success for run in result.verification)


def test_unreliable_bump_after_failed_verification_doubles_and_bisects():
    runner = _flaky_runner(verify_failures=(76,), search_failures=(83,))

    result = bisect_population(PROBLEM, initial_N=8, runner=runner)

    assert [probe.population_size for probe in result.probes][-6:] == [
        83, 166, 124, 103, 93, 88
    ]
    assert result.population_size == 88
    assert result.min_bound == 83
    assert (result.max_bound - result.min_bound) / result.min_bound <= 0.1


@pytest.mark.parametrize(
    "options",
    [
        {"initial_N": 2},
        {"required_successes": 0},
        {"tolerance": 0.0},
        {"tolerance": 1.5},
    ],
)
def test_bisection_validates_arguments(options):
    with pytest.raises(ArgumentError):
        bisect_population(PROBLEM, runner=_threshold_runner(0), **options)


def test_probe_seeds_are_reproducible_and_stream_specific():
    first = probe_seeds(3, 100, 5)

    assert first == probe_seeds(3, 100, 5)
    assert len(set(first)) == 5
    assert first != probe_seeds(3, 100, 5, VERIFY_STREAM)
    assert first != probe_seeds(3, 101, 5)


def test_run_with_eda_forwards_options():
    outcome = run_with_eda(
        parse_problem_spec("onemax:8"), Algorithm.ECGA, 20, 3, max_generations=2
    )

    assert outcome.population_size == 20
    assert outcome.seed == 3
    assert outcome.generations_used <= 2


@pytest.mark.slow
def test_ecga_trap_population_is_reliable_and_calls_grow_with_n():
    results = {
        n: bisect_population(parse_problem_spec(f"trap:{n}:3"), "ecga", initial_N=64)
        for n in (12, 15, 21)
    }

    trap12 = results[12]
    runs = [
        run_with_eda(PROBLEM, Algorithm.ECGA, trap12.population_size, seed)
        for seed in range(10)
    ]
    assert all(run.success for run in runs)
    medians = [results[n].total_fitness_calls_at_N for n in (12, 15, 21)]
    assert medians == sorted(medians)
    assert kendall_tau([12, 15, 21], medians) == pytest.approx(1.0)
