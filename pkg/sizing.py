"""Bisection search for the smallest population an EDA solves reliably."""
import logging
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from eda import run_eda
from errors import ArgumentError, UnreachableReliabilityError
from models import (
    Algorithm,
    BisectionResult,
    EdaConfig,
    ProbeRecord,
    ProblemInstance,
    RunOutcome,
)

logger = logging.getLogger(__name__)

MAX_POPULATION = 1 << 20
VERIFY_STREAM = 1

# (problem, algorithm, population_size, seed) -> outcome
Runner = Callable[[ProblemInstance, Algorithm, int, int], RunOutcome]


def run_with_eda(
    problem: ProblemInstance,
    algorithm: Algorithm,
    population_size: int,
    seed: int,
    **options,
) -> RunOutcome:
    """Default runner: one ``run_eda`` call with the given EdaConfig options."""
    config = EdaConfig(
        algorithm=algorithm,
        population_size=population_size,
        rng_seed=seed,
        **options,
    )
    return run_eda(problem, config)


def probe_seeds(seed: int, population_size: int, count: int, *stream: int) -> List[int]:
    """Independent seeds for the runs of one probe at one population size."""
    sequence = np.random.SeedSequence([seed, population_size, *stream])
    return [int(s) for s in sequence.generate_state(count)]


def _run_probe(
    problem: ProblemInstance,
    algorithm: Algorithm,
    population_size: int,
    seeds: List[int],
    runner: Runner,
    stop_on_failure: bool = True,
) -> List[RunOutcome]:
    outcomes = []
    for seed in seeds:
        outcome = runner(problem, algorithm, population_size, seed)
        outcomes.append(outcome)
        if stop_on_failure and not outcome.success:
            break
    return outcomes


def bisect_population(
    problem: ProblemInstance,
    algorithm: Union[Algorithm, str] = Algorithm.ECGA,
    initial_N: int = 1000,
    required_successes: int = 10,
    tolerance: float = 0.1,
    seed: int = 0,
    *,
    max_population: int = MAX_POPULATION,
    runner: Optional[Runner] = None,
) -> BisectionResult:
    """Double N until reliable, then bisect between N/2 and N.

    A size is reliable when ``required_successes`` seeded runs all succeed.
    When ``initial_N`` is already reliable it is returned as is, with
    ``min_bound = initial_N // 2``.

    The result is re-run on an independent seed stream. A size that fails
    this verification becomes the lower bound and the search resumes above
    it, so the returned bounds always satisfy the tolerance.
    """
    algorithm = Algorithm(algorithm)
    if initial_N < 4:
        raise ArgumentError(f"initial_N must be at least 4, got {initial_N}")
    if required_successes < 1:
        raise ArgumentError("required_successes must be at least 1")
    if not 0.0 < tolerance < 1.0:
        raise ArgumentError(f"tolerance must be in (0, 1), got {tolerance}")
    runner = runner or run_with_eda
    probes: List[ProbeRecord] = []

    def reliable(size: int) -> bool:
        outcomes = _run_probe(
            problem,
            algorithm,
            size,
            probe_seeds(seed, size, required_successes),
            runner,
        )
        successes = sum(outcome.success for outcome in outcomes)
        record = ProbeRecord(
            population_size=size,
            successes=successes,
            runs=len(outcomes),
            reliable=successes == required_successes,
        )
        probes.append(record)
        logger.info(
            "%s %s N=%d: %d/%d successful",
            algorithm.value,
            problem,
            size,
            successes,
            len(outcomes),
        )
        return record.reliable

    def escalate(failed: int) -> Tuple[int, int]:
        # last failing size, first reliable size
        size = failed
        while True:
            if size * 2 > max_population:
                raise UnreachableReliabilityError(
                    f"{algorithm.value} on {problem} is not reliable up to "
                    f"N={size} (cap {max_population})",
                    last_population=size,
                )
            size *= 2
            if reliable(size):
                return size // 2, size

    failure_witness: Optional[int] = None
    if reliable(initial_N):
        low, high = initial_N // 2, initial_N
    else:
        low, high = escalate(initial_N)
        failure_witness = low

    while True:
        if failure_witness is not None:
            while (high - low) / low > tolerance:
                middle = (low + high) // 2
                if middle in (low, high):
                    break
                if reliable(middle):
                    high = middle
                else:
                    low = failure_witness = middle

        verification = _run_probe(
            problem,
            algorithm,
            high,
            probe_seeds(seed, high, required_successes, VERIFY_STREAM),
            runner,
            stop_on_failure=False,
        )
        if all(outcome.success for outcome in verification):
            break

        # the failed size is now the lower bound
        low = failure_witness = high
        bumped = high + max(1, int(high * tolerance))
        logger.warning(
            "%s %s: N=%d failed verification, retrying at N=%d",
            algorithm.value,
            problem,
            high,
            bumped,
        )
        if bumped > max_population:
            raise UnreachableReliabilityError(
                f"{algorithm.value} on {problem} failed verification at N={high}",
                last_population=high,
            )
        if reliable(bumped):
            high = bumped
        else:
            low, high = escalate(bumped)
            failure_witness = low

    return BisectionResult(
        problem=problem.spec,
        algorithm=algorithm.value,
        population_size=high,
        min_bound=low,
        max_bound=high,
        reliability_runs=required_successes,
        total_fitness_calls_at_N=float(
            np.median([outcome.fitness_calls for outcome in verification])
        ),
        failure_witness=failure_witness,
        seed=seed,
        probes=probes,
        verification=verification,
    )
