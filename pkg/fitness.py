"""Benchmark pseudo-boolean fitness families.

Bit 0 is the leftmost bit and, for the mixed-trap and MSP1 families, the
control bit. Blocks are consecutive index ranges after any control bit.
Populations are ``(N, n)`` uint8 matrices; ``evaluate_batch`` is the single
vectorised evaluation path and ``evaluate`` is its one-genome wrapper.
"""
import math
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np

from errors import (
    CapacityError,
    ConfigurationError,
    DimensionError,
    NoIndependentPairError,
)
from models import BitString, Family, LinkageStructure, ProblemInstance

ENUMERATION_LIMIT = 24
ENUMERATION_CHUNK = 1 << 16

_CONTROLLED = (Family.TRAP_I1, Family.TRAP_I2, Family.MSP1)


def make_problem(
    family: Union[Family, str],
    n: int,
    k: Optional[int] = None,
    k2: Optional[int] = None,
    alpha: float = 1.0,
) -> ProblemInstance:
    """Build and validate a problem instance."""
    family = Family(family)
    if family == Family.ONEMAX:
        k = n if k is None else k
    if family == Family.MSP3 and k is not None and k2 is None:
        k2 = 5 if k != 5 else 3
    try:
        problem = ProblemInstance(family=family, n=n, k=k, k2=k2, alpha=alpha)
    except ValueError as e:
        raise ConfigurationError(f"Invalid problem parameters: {e}") from e
    validate_problem(problem)
    return problem


def validate_problem(problem: ProblemInstance) -> None:
    """Raise ConfigurationError unless the family's divisibility rules hold."""
    family, n, k = problem.family, problem.n, problem.k
    if family == Family.ONEMAX:
        return
    if k is None:
        raise ConfigurationError(f"{family.value} requires a block size k")
    if family in (Family.TRAP, Family.INVERSE_TRAP, Family.MSP2):
        if n % k:
            raise ConfigurationError(
                f"{family.value}: k={k} must divide n={n}"
            )
    elif family in _CONTROLLED:
        if n < 2 or (n - 1) % k:
            raise ConfigurationError(
                f"{family.value}: k={k} must divide n-1={n - 1}"
            )
    elif family == Family.MSP3:
        k2 = problem.k2
        if k2 is None:
            raise ConfigurationError("msp3 requires two block sizes k1 and k2")
        if k == k2:
            raise ConfigurationError("msp3 requires k1 != k2")
        if n % k or n % k2:
            raise ConfigurationError(
                f"msp3: n={n} must be a multiple of both k1={k} and k2={k2}"
            )


def parse_problem_spec(text: str) -> ProblemInstance:
    """Parse ``family:n:k[:k2][:alpha]``.

    ``k2`` is only read for msp3; ``onemax:n`` needs no block size.
    """
    parts = [part.strip() for part in text.strip().split(":")]
    if len(parts) < 2 or not parts[0]:
        raise ConfigurationError(f"Malformed problem spec '{text}'")
    try:
        family = Family(parts[0].lower())
    except ValueError:
        raise ConfigurationError(f"Unknown problem family '{parts[0]}'") from None

    try:
        n = int(parts[1])
        rest = parts[2:]
        k = k2 = None
        alpha = 1.0
        if family == Family.ONEMAX:
            if len(rest) > 1:
                raise ConfigurationError(f"Too many fields in '{text}'")
            k = int(rest[0]) if rest else None
        elif family == Family.MSP3:
            if not 1 <= len(rest) <= 3:
                raise ConfigurationError(f"msp3 spec '{text}' needs k1[:k2][:alpha]")
            k = int(rest[0])
            k2 = int(rest[1]) if len(rest) > 1 else None
            alpha = float(rest[2]) if len(rest) > 2 else 1.0
        else:
            if not 1 <= len(rest) <= 2:
                raise ConfigurationError(f"Spec '{text}' needs k[:alpha]")
            k = int(rest[0])
            alpha = float(rest[1]) if len(rest) > 1 else 1.0
    except ConfigurationError:
        raise
    except ValueError as e:
        raise ConfigurationError(f"Non-numeric field in '{text}'") from e

    return make_problem(family, n, k=k, k2=k2, alpha=alpha)


def trap_values(ones: np.ndarray, k: int) -> np.ndarray:
    """trap_k(l): k at l = k, otherwise k - l - 1."""
    return np.where(ones == k, k, k - ones - 1)


def inverse_trap_values(ones: np.ndarray, k: int) -> np.ndarray:
    """Inverse trap with its optimum at l = 0: k at l = 0, otherwise l - 1."""
    return np.where(ones == 0, k, ones - 1)


def _block_ones(bits: np.ndarray, k: int) -> np.ndarray:
    rows, width = bits.shape
    return bits.reshape(rows, width // k, k).sum(axis=2, dtype=np.int64)


def _trap(bits: np.ndarray, k: int) -> np.ndarray:
    return trap_values(_block_ones(bits, k), k).sum(axis=1)


def _inverse_trap(bits: np.ndarray, k: int) -> np.ndarray:
    return inverse_trap_values(_block_ones(bits, k), k).sum(axis=1)


def _shifted_trap(bits: np.ndarray, k: int) -> np.ndarray:
    # Blocks start ceil(k/2) positions in and the last one wraps around.
    shift = math.ceil(k / 2) % bits.shape[1]
    return _trap(np.roll(bits, -shift, axis=1), k)


def evaluate_batch(problem: ProblemInstance, population: np.ndarray) -> np.ndarray:
    """Fitness of every row of an ``(N, n)`` bit matrix, as float64."""
    validate_problem(problem)
    bits = np.asarray(population)
    if bits.ndim == 1:
        bits = bits.reshape(1, -1)
    if bits.ndim != 2 or bits.shape[1] != problem.n:
        raise DimensionError(
            f"Expected genomes of length {problem.n}, got shape {bits.shape}"
        )
    bits = bits.astype(np.int64, copy=False)
    n, k, alpha = problem.n, problem.k, problem.alpha
    family = problem.family

    if family == Family.ONEMAX:
        values = bits.sum(axis=1)
    elif family == Family.TRAP:
        values = _trap(bits, k)
    elif family == Family.INVERSE_TRAP:
        values = _inverse_trap(bits, k)
    elif family == Family.TRAP_I1:
        rest = bits[:, 1:]
        values = np.where(bits[:, 0] == 1, _trap(rest, k), _inverse_trap(rest, k))
    elif family == Family.TRAP_I2:
        rest = bits[:, 1:]
        values = np.where(
            bits[:, 0] == 1, _shifted_trap(rest, k), _inverse_trap(rest, k)
        )
    elif family == Family.MSP1:
        rest = bits[:, 1:]
        values = np.where(
            bits[:, 0] == 1, alpha + _trap(rest, k), n - 1 - rest.sum(axis=1)
        )
    elif family == Family.MSP2:
        values = np.maximum(alpha + _trap(bits, k), n - 1 - bits.sum(axis=1))
    elif family == Family.MSP3:
        values = np.maximum(alpha + _trap(bits, k), _trap(1 - bits, problem.k2))
    else:  # pragma: no cover - Family is closed
        raise ConfigurationError(f"Unsupported family {family}")
    return np.asarray(values, dtype=np.float64)


def evaluate(problem: ProblemInstance, x: Union[BitString, np.ndarray]) -> float:
    """Fitness of a single genome."""
    bits = x.to_array() if isinstance(x, BitString) else np.asarray(x)
    if bits.ndim != 1 or bits.shape[0] != problem.n:
        raise DimensionError(
            f"Expected a genome of length {problem.n}, got {bits.shape}"
        )
    return float(evaluate_batch(problem, bits.reshape(1, -1))[0])


def f_max(problem: ProblemInstance) -> float:
    """Analytic maximum of the family."""
    validate_problem(problem)
    n, alpha = problem.n, problem.alpha
    family = problem.family
    if family in (Family.ONEMAX, Family.TRAP, Family.INVERSE_TRAP):
        return float(n)
    if family in (Family.TRAP_I1, Family.TRAP_I2):
        return float(n - 1)
    if family == Family.MSP1:
        return float(max(alpha + n - 1, n - 1))
    if family == Family.MSP2:
        return float(max(alpha + n, n - 1))
    return float(max(alpha + n, n))


def global_optima(problem: ProblemInstance) -> List[BitString]:
    """All maximisers. Every family attains its maximum only at 0^n or 1^n."""
    best = f_max(problem)
    optima = []
    for candidate in (BitString.zeros(problem.n), BitString.ones_string(problem.n)):
        if evaluate(problem, candidate) == best:
            optima.append(candidate)
    return optima


def linkage_structure(problem: ProblemInstance) -> LinkageStructure:
    """Subfunction supports of the (first) model of the family.

    MSP3 reports its k1 blocks; TrapI2 reports the consecutive partition used
    when the control bit is 0.
    """
    validate_problem(problem)
    n, k = problem.n, problem.k
    if problem.family == Family.ONEMAX:
        return LinkageStructure(n=n, groups=[tuple(range(n))])
    start = 1 if problem.family in _CONTROLLED else 0
    groups = [tuple(range(i, i + k)) for i in range(start, n, k)]
    return LinkageStructure(
        n=n, groups=groups, control_bits=(0,) if start else ()
    )


def canonical_pairs(
    problem: ProblemInstance,
) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Dependent and independent variable pairs used by every metric.

    D is the two lowest indices of the first group, I pairs the lowest index of
    the first group with the lowest index of the second.
    """
    groups = [g for g in linkage_structure(problem).groups if len(g) >= 2]
    if len(groups) < 2:
        raise NoIndependentPairError(
            f"{problem.spec} has fewer than two linkage groups; "
            "no independent pair exists"
        )
    first, second = sorted(groups[0]), sorted(groups[1])
    return (first[0], first[1]), (first[0], second[0])


def enumerate_bitstrings(n: int, start: int = 0, stop: Optional[int] = None):
    """Rows ``start..stop`` of {0,1}^n in canonical order.

    Row i is the bitmask i with variable 0 as the least significant bit.
    """
    if n > ENUMERATION_LIMIT:
        raise CapacityError(
            f"Exhaustive enumeration is limited to n <= {ENUMERATION_LIMIT}"
        )
    stop = (1 << n) if stop is None else stop
    indices = np.arange(start, stop, dtype=np.int64)
    return ((indices[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def iter_enumeration(
    n: int, chunk: int = ENUMERATION_CHUNK
) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield ``(offset, rows)`` chunks covering {0,1}^n in canonical order."""
    total = 1 << n
    for offset in range(0, total, chunk):
        yield offset, enumerate_bitstrings(n, offset, min(offset + chunk, total))


def fitness_table(problem: ProblemInstance) -> np.ndarray:
    """Fitness of all 2^n genomes, indexed canonically."""
    if problem.n > ENUMERATION_LIMIT:
        raise CapacityError(
            f"Fitness tables are limited to n <= {ENUMERATION_LIMIT}"
        )
    table = np.empty(1 << problem.n, dtype=np.float64)
    for offset, rows in iter_enumeration(problem.n):
        table[offset : offset + len(rows)] = evaluate_batch(problem, rows)
    return table


def hamming_to_optima(problem: ProblemInstance, population: np.ndarray) -> np.ndarray:
    """Hamming distance from each row to its nearest global optimum."""
    optima = np.stack([opt.to_array() for opt in global_optima(problem)])
    population = np.asarray(population, dtype=np.uint8)
    distances = (population[:, None, :] != optima[None, :, :]).sum(axis=2)
    return distances.min(axis=1)
