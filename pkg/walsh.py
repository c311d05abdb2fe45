"""Walsh decomposition of pseudo-boolean functions.

Fitness tables are indexed by the bitmask of x with variable 0 as the least
significant bit, and the basis is W_M(x) = (-1)^|M & ones(x)|, so that

    alpha = H_n f / 2^n

with H_n the Sylvester Hadamard matrix. Under this convention schema averages,
the pairwise difference formula and the schema-based coefficient formula all
agree. Printed vectors that list f11 before f00 flip the sign of odd-order
coefficients; magnitudes are unaffected and every metric uses |alpha| only.
"""
import itertools
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import (
    ArgumentError,
    CapacityError,
    ConfigurationError,
    DimensionError,
    InsufficientCoverageError,
    SchemaParseError,
)
from fitness import (
    ENUMERATION_LIMIT,
    enumerate_bitstrings,
    evaluate_batch,
    fitness_table,
    iter_enumeration,
)
from models import (
    BitString,
    EstimationMethod,
    ProblemInstance,
    Schema,
    WalshSpectrum,
)

logger = logging.getLogger(__name__)

HADAMARD_LIMIT = 14
DEFAULT_CONFUSION_TRIALS = 64


def hadamard_matrix(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order 2^n, grown from the 2x2 base case.

    Stored as int8; at the limit of 14 the matrix takes 256 MiB.
    """
    if not 1 <= n <= HADAMARD_LIMIT:
        raise CapacityError(f"Dense Hadamard matrices need 1 <= n <= {HADAMARD_LIMIT}")
    matrix = np.array([[1, 1], [1, -1]], dtype=np.int8)
    for _ in range(n - 1):
        matrix = np.block([[matrix, matrix], [matrix, -matrix]])
    return matrix


def _table_order(table: np.ndarray) -> int:
    size = table.shape[0] if table.ndim == 1 else -1
    if size < 1 or size & (size - 1):
        raise DimensionError(
            f"Fitness table length must be a power of two, got {table.shape}"
        )
    return size.bit_length() - 1


def walsh_transform_naive(f_table: Sequence[float]) -> WalshSpectrum:
    """Dense-matrix transform; reference implementation for tests."""
    table = np.asarray(f_table, dtype=np.float64)
    n = _table_order(table)
    if n == 0:
        return WalshSpectrum(n=0, coeffs=table.copy())
    coeffs = hadamard_matrix(n).astype(np.float64) @ table / table.shape[0]
    return WalshSpectrum(n=n, coeffs=coeffs)


def _butterfly(values: np.ndarray) -> np.ndarray:
    data = np.array(values, dtype=np.float64)
    half = 1
    while half < data.shape[0]:
        view = data.reshape(-1, 2, half)
        upper = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = upper - view[:, 1, :]
        half *= 2
    return data


def walsh_transform_fast(f_table: Sequence[float]) -> WalshSpectrum:
    """In-place butterfly transform, O(N log N) for a table of N = 2^n entries."""
    table = np.asarray(f_table, dtype=np.float64)
    n = _table_order(table)
    return WalshSpectrum(n=n, coeffs=_butterfly(table) / table.shape[0])


def inverse_walsh_transform(spectrum: WalshSpectrum) -> np.ndarray:
    """Reconstruct the fitness table: f = H_n alpha."""
    return _butterfly(spectrum.coeffs)


def full_spectrum(problem: ProblemInstance) -> WalshSpectrum:
    return walsh_transform_fast(fitness_table(problem))


def parse_schema(text: Union[str, Schema], n: Optional[int] = None) -> Schema:
    if isinstance(text, Schema):
        schema = text
    else:
        symbols = text.strip()
        bad = sorted(set(symbols) - {"0", "1", "*"})
        if not symbols or bad:
            raise SchemaParseError(
                f"Schema '{text}' contains invalid symbols {bad or 'none'}"
            )
        schema = Schema(symbols=symbols)
    if n is not None and schema.n != n:
        raise DimensionError(f"Schema has length {schema.n}, expected {n}")
    return schema


def schema_average_exact(
    spectrum: WalshSpectrum, schema: Union[str, Schema]
) -> float:
    """Mean fitness of a schema from the coefficients of its determined subsets."""
    schema = parse_schema(schema, spectrum.n)
    determined = np.asarray(schema.determined, dtype=np.int64)
    is_one = np.asarray(
        [symbol == "1" for symbol in schema.symbols if symbol != "*"], dtype=np.int64
    )
    combos = np.arange(1 << len(determined), dtype=np.int64)
    bits = (combos[:, None] >> np.arange(len(determined), dtype=np.int64)) & 1
    masks = bits @ (np.int64(1) << determined)
    signs = 1 - 2 * ((bits @ is_one) & 1)
    return float(np.dot(spectrum.coeffs[masks], signs))


def schema_average_bruteforce(
    problem: ProblemInstance, schema: Union[str, Schema]
) -> float:
    """Mean fitness over every completion of the schema."""
    if problem.n > ENUMERATION_LIMIT:
        raise CapacityError(
            f"Brute-force schema averages are limited to n <= {ENUMERATION_LIMIT}"
        )
    schema = parse_schema(schema, problem.n)
    free = [i for i, symbol in enumerate(schema.symbols) if symbol == "*"]
    base = np.asarray(
        [1 if symbol == "1" else 0 for symbol in schema.symbols], dtype=np.uint8
    )
    total = 0.0
    for _, completions in iter_enumeration(len(free)):
        rows = np.tile(base, (len(completions), 1))
        rows[:, free] = completions
        total += float(evaluate_batch(problem, rows).sum())
    return total / (1 << len(free))


def _check_subset(problem: ProblemInstance, subset: Sequence[int]) -> Tuple[int, ...]:
    indices = tuple(sorted(set(int(i) for i in subset)))
    if not indices:
        raise ArgumentError("Coefficient subset must contain at least one variable")
    if indices[0] < 0 or indices[-1] >= problem.n:
        raise ArgumentError(f"Subset {indices} is outside 0..{problem.n - 1}")
    return indices


def _cell_index(rows: np.ndarray, subset: Tuple[int, ...]) -> np.ndarray:
    weights = np.int64(1) << np.arange(len(subset), dtype=np.int64)
    return rows[:, list(subset)].astype(np.int64) @ weights


def _cell_signs(order: int) -> np.ndarray:
    cells = np.arange(1 << order, dtype=np.int64)
    parity = ((cells[:, None] >> np.arange(order, dtype=np.int64)) & 1).sum(axis=1)
    return 1.0 - 2.0 * (parity & 1)


def _cell_bits(cell: int, order: int) -> Tuple[int, ...]:
    return tuple((cell >> t) & 1 for t in range(order))


def _combine_cells(cell_means: np.ndarray, order: int) -> float:
    return float(np.dot(_cell_signs(order), cell_means) / (1 << order))


def _exact_coefficient(problem: ProblemInstance, subset: Tuple[int, ...]) -> float:
    if problem.n > ENUMERATION_LIMIT:
        raise CapacityError(
            f"Exact coefficients are limited to n <= {ENUMERATION_LIMIT}; "
            "use the confusion or population estimator"
        )
    cells = 1 << len(subset)
    sums = np.zeros(cells)
    counts = np.zeros(cells)
    for _, rows in iter_enumeration(problem.n):
        index = _cell_index(rows, subset)
        values = evaluate_batch(problem, rows)
        sums += np.bincount(index, weights=values, minlength=cells)
        counts += np.bincount(index, minlength=cells)
    return _combine_cells(sums / counts, len(subset))


def _variants(contexts: np.ndarray, subset: Tuple[int, ...]) -> np.ndarray:
    """Every setting of the subset's bits applied to every context row."""
    cells = 1 << len(subset)
    rows = np.repeat(contexts, cells, axis=0)
    settings = enumerate_bitstrings(len(subset))
    rows[:, list(subset)] = np.tile(settings, (len(contexts), 1))
    return rows


def _confusion_coefficient(
    problem: ProblemInstance,
    subset: Tuple[int, ...],
    trials: int,
    rng: Optional[np.random.Generator],
    exhaustive: bool,
) -> float:
    if exhaustive:
        others = [i for i in range(problem.n) if i not in subset]
        if len(others) > ENUMERATION_LIMIT:
            raise CapacityError("Too many contexts to enumerate")
        contexts = np.zeros((1 << len(others), problem.n), dtype=np.uint8)
        contexts[:, others] = enumerate_bitstrings(len(others))
    else:
        if trials < 1:
            raise ArgumentError("The confusion method needs at least one trial")
        rng = rng if rng is not None else np.random.default_rng()
        contexts = rng.integers(0, 2, size=(trials, problem.n), dtype=np.uint8)
    values = evaluate_batch(problem, _variants(contexts, subset))
    per_context = values.reshape(len(contexts), 1 << len(subset))
    estimates = per_context @ _cell_signs(len(subset)) / (1 << len(subset))
    return float(estimates.mean())


def _population_coefficient(
    problem: ProblemInstance,
    subset: Tuple[int, ...],
    samples: Optional[np.ndarray],
    fitnesses: Optional[np.ndarray],
) -> float:
    if samples is None:
        raise ArgumentError("The population method needs a sample matrix")
    samples = np.asarray(samples, dtype=np.uint8)
    if fitnesses is None:
        fitnesses = evaluate_batch(problem, samples)
    cells = 1 << len(subset)
    index = _cell_index(samples, subset)
    counts = np.bincount(index, minlength=cells)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise InsufficientCoverageError(subset, _cell_bits(int(empty[0]), len(subset)))
    weights = np.asarray(fitnesses, dtype=float)
    sums = np.bincount(index, weights=weights, minlength=cells)
    return _combine_cells(sums / counts, len(subset))


def estimate_coefficient(
    problem: ProblemInstance,
    subset: Sequence[int],
    method: Union[EstimationMethod, str] = EstimationMethod.EXACT,
    *,
    trials: int = DEFAULT_CONFUSION_TRIALS,
    rng: Optional[np.random.Generator] = None,
    samples: Optional[np.ndarray] = None,
    fitnesses: Optional[np.ndarray] = None,
    exhaustive: bool = False,
) -> float:
    """Estimate alpha_M from schema-cell mean fitness.

    ``exact`` averages each cell over all of {0,1}^n, ``confusion`` flips the
    subset's bits around ``trials`` random contexts (or around every context
    when ``exhaustive`` is set), and ``population`` averages each cell over
    ``samples``.
    """
    subset = _check_subset(problem, subset)
    method = EstimationMethod(method)
    if method == EstimationMethod.EXACT:
        return _exact_coefficient(problem, subset)
    if method == EstimationMethod.CONFUSION:
        return _confusion_coefficient(problem, subset, trials, rng, exhaustive)
    return _population_coefficient(problem, subset, samples, fitnesses)


def linc_nonlinearity(
    problem: ProblemInstance,
    i: int,
    j: int,
    context: Union[BitString, np.ndarray],
) -> float:
    """|f00 + f11 - f01 - f10| for bits i and j around a fixed context."""
    if i == j:
        raise ArgumentError("Nonlinearity needs two distinct variables")
    base = context.to_array() if isinstance(context, BitString) else np.asarray(context)
    if base.shape != (problem.n,):
        raise DimensionError(f"Context must have length {problem.n}")
    rows = np.tile(base.astype(np.uint8), (4, 1))
    rows[:, [i, j]] = [[0, 0], [0, 1], [1, 0], [1, 1]]
    f00, f01, f10, f11 = evaluate_batch(problem, rows)
    return float(abs(f00 + f11 - f01 - f10))


def order_coefficients(
    problem: ProblemInstance,
    order: int,
    method: Union[EstimationMethod, str] = EstimationMethod.EXACT,
    *,
    trials: int = DEFAULT_CONFUSION_TRIALS,
    sample_size: int = 5000,
    seed: int = 0,
) -> List[Tuple[Tuple[int, ...], float]]:
    """All coefficients of one order, sorted by subset."""
    method = EstimationMethod(method)
    if not 1 <= order <= problem.n:
        raise ConfigurationError(f"Order must be between 1 and {problem.n}")
    subsets = list(itertools.combinations(range(problem.n), order))
    if method == EstimationMethod.EXACT:
        spectrum = full_spectrum(problem)
        return [(subset, spectrum.coefficient(subset)) for subset in subsets]

    rng = np.random.default_rng(seed)
    samples = fitnesses = None
    if method == EstimationMethod.POPULATION:
        samples = rng.integers(0, 2, size=(sample_size, problem.n), dtype=np.uint8)
        fitnesses = evaluate_batch(problem, samples)
    logger.info(
        "Estimating %d order-%d coefficients of %s with the %s method",
        len(subsets),
        order,
        problem.spec,
        method.value,
    )
    return [
        (
            subset,
            estimate_coefficient(
                problem,
                subset,
                method,
                trials=trials,
                rng=rng,
                samples=samples,
                fitnesses=fitnesses,
            ),
        )
        for subset in subsets
    ]


def spectrum_rows(
    spectrum: WalshSpectrum, order: Optional[int] = None
) -> List[Tuple[Tuple[int, ...], float]]:
    """(subset, coefficient) pairs, every mask or only those of one order."""
    rows = []
    for mask, value in enumerate(spectrum.coeffs):
        subset = tuple(i for i in range(spectrum.n) if mask >> i & 1)
        if order is None or len(subset) == order:
            rows.append((subset, float(value)))
    return rows
