"""Difficulty metrics computed under the sample-select-repeat protocol.

Every repetition draws a fresh uniform sample from its own child seed of
``SeedSequence([rng_seed, stream])``. M1 and FDC are computed on the raw
sample; M2 and M3 on the survivors of one truncation-selection step.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import entropy

from errors import (
    ArgumentError,
    DegenerateDistributionError,
    DimensionError,
    NoIndependentPairError,
    UndefinedCorrelationError,
)
from fitness import canonical_pairs, evaluate_batch, f_max, hamming_to_optima
from models import EstimationMethod, MetricConfig, MetricReport, ProblemInstance
from stats import pearson
from walsh import estimate_coefficient

logger = logging.getLogger(__name__)

STREAM_M1 = 1
STREAM_SELECTION = 2
STREAM_FDC = 3


def repetition_rngs(config: MetricConfig, stream: int) -> List[np.random.Generator]:
    """One independent generator per repetition for a metric stream."""
    children = np.random.SeedSequence([config.rng_seed, stream]).spawn(
        config.repetitions
    )
    return [np.random.default_rng(child) for child in children]


def uniform_sample(
    problem: ProblemInstance, size: int, rng: np.random.Generator
) -> np.ndarray:
    return rng.integers(0, 2, size=(size, problem.n), dtype=np.uint8)


def truncation_select(
    population: np.ndarray, fitnesses: np.ndarray, fraction: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Keep the ceil(fraction * N) fittest rows, in input order.

    Ties are resolved in favour of earlier rows.
    """
    population = np.asarray(population)
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    if len(population) == 0:
        raise ArgumentError("Cannot select from an empty population")
    if not 0.0 < fraction <= 1.0:
        raise ArgumentError(f"Selection fraction must be in (0, 1], got {fraction}")
    if len(fitnesses) != len(population):
        raise DimensionError("One fitness value per individual is required")
    keep = math.ceil(round(fraction * len(population), 9))
    chosen = np.sort(np.argsort(-fitnesses, kind="stable")[:keep])
    return population[chosen], fitnesses[chosen]


def _as_samples(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.ndim != 2 or len(samples) == 0:
        raise ArgumentError("Entropy estimates need at least one sample")
    return samples.astype(np.int64, copy=False)


def marginal_entropy(samples: np.ndarray, i: int) -> float:
    samples = _as_samples(samples)
    return float(entropy(np.bincount(samples[:, i], minlength=2), base=2))


def joint_entropy(samples: np.ndarray, i: int, j: int) -> float:
    """Plug-in entropy of the (x_i, x_j) pair, in bits."""
    samples = _as_samples(samples)
    counts = np.bincount(2 * samples[:, i] + samples[:, j], minlength=4)
    return float(entropy(counts, base=2))


def mutual_information(samples: np.ndarray, i: int, j: int) -> float:
    value = (
        marginal_entropy(samples, i)
        + marginal_entropy(samples, j)
        - joint_entropy(samples, i, j)
    )
    # Plug-in mutual information is non-negative; drop rounding residue.
    return max(value, 0.0)


def _m1_values(problem: ProblemInstance, config: MetricConfig) -> List[float]:
    dependent, independent = canonical_pairs(problem)
    top = f_max(problem)

    if config.estimator == EstimationMethod.EXACT:
        value = (
            abs(estimate_coefficient(problem, dependent))
            - abs(estimate_coefficient(problem, independent))
        ) / top
        return [value] * config.repetitions

    values = []
    for rng in repetition_rngs(config, STREAM_M1):
        if config.estimator == EstimationMethod.POPULATION:
            samples = uniform_sample(problem, config.sample_size, rng)
            options = dict(samples=samples, fitnesses=evaluate_batch(problem, samples))
        else:
            options = dict(trials=config.confusion_trials, rng=rng)
        alpha_d = estimate_coefficient(problem, dependent, config.estimator, **options)
        alpha_i = estimate_coefficient(
            problem, independent, config.estimator, **options
        )
        values.append((abs(alpha_d) - abs(alpha_i)) / top)
    return values


def _selection_values(
    problem: ProblemInstance, config: MetricConfig
) -> Tuple[List[float], List[float], int]:
    """Per-repetition M2 and M3 values plus the count of discarded M3 draws."""
    (x, y), (_, z) = canonical_pairs(problem)
    m2_values: List[float] = []
    m3_values: List[float] = []
    discarded = 0
    for rng in repetition_rngs(config, STREAM_SELECTION):
        population = uniform_sample(problem, config.sample_size, rng)
        survivors, _ = truncation_select(
            population, evaluate_batch(problem, population), config.selection_fraction
        )
        m2_values.append(
            mutual_information(survivors, x, y) - mutual_information(survivors, x, z)
        )
        h_xz = joint_entropy(survivors, x, z)
        if h_xz <= 0.0:
            discarded += 1
            continue
        m3_values.append(1.0 - joint_entropy(survivors, x, y) / h_xz)
    if discarded:
        logger.warning(
            "%s: discarded %d of %d M3 repetitions with H(X,Z) = 0",
            problem.spec,
            discarded,
            config.repetitions,
        )
    return m2_values, m3_values, discarded


def _fdc_values(problem: ProblemInstance, config: MetricConfig) -> List[float]:
    values = []
    for rng in repetition_rngs(config, STREAM_FDC):
        population = uniform_sample(problem, config.sample_size, rng)
        values.append(
            pearson(
                evaluate_batch(problem, population),
                hamming_to_optima(problem, population),
            )
        )
    return values


def metric_m1(problem: ProblemInstance, config: Optional[MetricConfig] = None) -> float:
    """(|alpha_D| - |alpha_I|) / f_max, averaged over repetitions."""
    return float(np.mean(_m1_values(problem, config or MetricConfig())))


def metric_m2(problem: ProblemInstance, config: Optional[MetricConfig] = None) -> float:
    """I(X;Y) - I(X;Z) on selected survivors, averaged over repetitions."""
    m2_values, _, _ = _selection_values(problem, config or MetricConfig())
    return float(np.mean(m2_values))


def metric_m3(problem: ProblemInstance, config: Optional[MetricConfig] = None) -> float:
    """1 - H(X,Y)/H(X,Z) on selected survivors, averaged over usable repetitions."""
    config = config or MetricConfig()
    _, m3_values, _ = _selection_values(problem, config)
    if not m3_values:
        raise DegenerateDistributionError(
            f"H(X,Z) was zero in all {config.repetitions} repetitions"
        )
    return float(np.mean(m3_values))


def metric_fdc(
    problem: ProblemInstance, config: Optional[MetricConfig] = None
) -> float:
    """Correlation of fitness with distance to the nearest global optimum."""
    return float(np.mean(_fdc_values(problem, config or MetricConfig())))


def compute_metrics(
    problem: ProblemInstance, config: Optional[MetricConfig] = None
) -> MetricReport:
    """All four metrics; undefined ones are reported as None with a reason."""
    config = config or MetricConfig()
    report = MetricReport(
        problem=problem.spec,
        family=problem.family,
        n=problem.n,
        k=problem.k,
        alpha=problem.alpha,
        config=config,
    )

    try:
        values = _m1_values(problem, config)
        report.m1 = float(np.mean(values))
        report.per_repetition["m1"] = values
    except NoIndependentPairError as e:
        report.undefined["m1"] = str(e)

    try:
        m2_values, m3_values, discarded = _selection_values(problem, config)
        report.m2 = float(np.mean(m2_values))
        report.per_repetition["m2"] = m2_values
        report.m3_discarded = discarded
        if m3_values:
            report.m3 = float(np.mean(m3_values))
            report.per_repetition["m3"] = m3_values
        else:
            report.undefined["m3"] = "H(X,Z) was zero in every repetition"
    except NoIndependentPairError as e:
        report.undefined["m2"] = str(e)
        report.undefined["m3"] = str(e)

    try:
        values = _fdc_values(problem, config)
        report.fdc = float(np.mean(values))
        report.per_repetition["fdc"] = values
    except UndefinedCorrelationError as e:
        report.undefined["fdc"] = str(e)

    logger.info(
        "%s: m1=%s m2=%s m3=%s fdc=%s",
        problem.spec,
        report.m1,
        report.m2,
        report.m3,
        report.fdc,
    )
    return report
