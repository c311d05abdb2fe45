from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import ConfigurationError


class Family(str, Enum):
    """Benchmark fitness families."""

    ONEMAX = "onemax"
    TRAP = "trap"
    INVERSE_TRAP = "inversetrap"
    TRAP_I1 = "trapi1"
    TRAP_I2 = "trapi2"
    MSP1 = "msp1"
    MSP2 = "msp2"
    MSP3 = "msp3"


class Algorithm(str, Enum):
    ECGA = "ecga"
    BOA = "boa"


class EstimationMethod(str, Enum):
    """How a Walsh coefficient is obtained from the fitness function."""

    EXACT = "exact"
    CONFUSION = "confusion"
    POPULATION = "population"


class BitString(BaseModel):
    """Fixed-length binary genome. Index 0 is the leftmost bit."""

    model_config = ConfigDict(frozen=True)

    bits: Tuple[int, ...]

    @field_validator("bits")
    @classmethod
    def _check_binary(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("bit string must not be empty")
        if any(bit not in (0, 1) for bit in value):
            raise ValueError("every bit must be 0 or 1")
        return value

    @classmethod
    def from_string(cls, text: str) -> "BitString":
        symbols = text.strip()
        bad = sorted(set(symbols) - {"0", "1"})
        if not symbols or bad:
            raise ConfigurationError(
                f"Bit string '{text}' contains invalid symbols {bad or 'none'}"
            )
        return cls(bits=tuple(int(char) for char in symbols))

    @classmethod
    def from_array(cls, array: np.ndarray) -> "BitString":
        return cls(bits=tuple(int(bit) for bit in np.asarray(array).ravel()))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(bits=(0,) * n)

    @classmethod
    def ones_string(cls, n: int) -> "BitString":
        return cls(bits=(1,) * n)

    @property
    def n(self) -> int:
        return len(self.bits)

    def ones(self) -> int:
        """Ones-count u(x)."""
        return sum(self.bits)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(bit) for bit in self.bits)


class LinkageStructure(BaseModel):
    """Disjoint subfunction supports plus the control bits that switch them."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    groups: List[Tuple[int, ...]]
    control_bits: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_disjoint(self) -> "LinkageStructure":
        seen = set()
        for index in [i for group in self.groups for i in group] + list(
            self.control_bits
        ):
            if index in seen:
                raise ValueError(f"variable {index} appears in more than one group")
            if not 0 <= index < self.n:
                raise ValueError(f"variable {index} is outside 0..{self.n - 1}")
            seen.add(index)
        return self


class ProblemInstance(BaseModel):
    """A parameterised benchmark function.

    ``k`` is the block size (``k1`` for MSP3); ``k2`` is only used by MSP3.
    Family-specific divisibility rules are enforced by ``fitness.validate_problem``.
    """

    model_config = ConfigDict(frozen=True)

    family: Family
    n: int = Field(ge=1)
    k: Optional[int] = Field(default=None, ge=1)
    k2: Optional[int] = Field(default=None, ge=1)
    alpha: float = 1.0

    @property
    def spec(self) -> str:
        parts = [self.family.value, str(self.n)]
        if self.family != Family.ONEMAX and self.k is not None:
            parts.append(str(self.k))
        if self.family == Family.MSP3 and self.k2 is not None:
            parts.append(str(self.k2))
        if self.family in (Family.MSP1, Family.MSP2, Family.MSP3):
            parts.append(f"{self.alpha:g}")
        return ":".join(parts)

    def __str__(self) -> str:
        return self.spec


class Schema(BaseModel):
    """Hyperplane over {0, 1, *}; position i constrains variable i."""

    model_config = ConfigDict(frozen=True)

    symbols: str

    @field_validator("symbols")
    @classmethod
    def _check_symbols(cls, value: str) -> str:
        if not value or set(value) - {"0", "1", "*"}:
            raise ValueError("schema symbols must be 0, 1 or *")
        return value

    @property
    def n(self) -> int:
        return len(self.symbols)

    @property
    def determined(self) -> Tuple[int, ...]:
        return tuple(i for i, symbol in enumerate(self.symbols) if symbol != "*")

    @property
    def ones(self) -> Tuple[int, ...]:
        return tuple(i for i, symbol in enumerate(self.symbols) if symbol == "1")


class WalshSpectrum(BaseModel):
    """Coefficients indexed by subset bitmask (bit i set means variable i in M)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(ge=0)
    coeffs: np.ndarray

    @model_validator(mode="after")
    def _check_length(self) -> "WalshSpectrum":
        if self.coeffs.shape != (1 << self.n,):
            raise ValueError(
                f"expected {1 << self.n} coefficients, got {self.coeffs.shape}"
            )
        return self

    @staticmethod
    def mask(indices) -> int:
        mask = 0
        for index in indices:
            mask |= 1 << int(index)
        return mask

    def coefficient(self, indices) -> float:
        return float(self.coeffs[self.mask(indices)])


class MetricConfig(BaseModel):
    """Sampling-and-selection protocol shared by all four metrics."""

    sample_size: int = Field(default=5000, ge=1)
    selection_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    repetitions: int = Field(default=50, ge=1)
    estimator: EstimationMethod = EstimationMethod.POPULATION
    confusion_trials: int = Field(default=64, ge=1)
    rng_seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_survivors(self) -> "MetricConfig":
        if self.sample_size * self.selection_fraction < 2:
            raise ValueError("selection must keep at least two individuals")
        return self


class MetricReport(BaseModel):
    problem: str
    family: Family
    n: int
    k: Optional[int] = None
    alpha: float = 1.0
    m1: Optional[float] = None
    m2: Optional[float] = None
    m3: Optional[float] = None
    fdc: Optional[float] = None
    undefined: Dict[str, str] = Field(default_factory=dict)
    per_repetition: Dict[str, List[float]] = Field(default_factory=dict)
    m3_discarded: int = 0
    config: MetricConfig = Field(default_factory=MetricConfig)

    def std(self, metric: str) -> Optional[float]:
        """Population standard deviation of a metric across repetitions."""
        values = self.per_repetition.get(metric)
        if not values:
            return None
        return float(np.std(values))


class EdaConfig(BaseModel):
    algorithm: Algorithm = Algorithm.ECGA
    population_size: int = Field(ge=4)
    tournament_size: int = Field(default=4, ge=2)
    # When set, truncation selection replaces tournament selection.
    truncation_fraction: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    replacement_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    max_generations: int = Field(default=200, ge=1)
    max_parents: int = Field(default=10, ge=0)
    max_group_size: int = Field(default=12, ge=1)
    ecga_score: Literal["mdl", "bic"] = "mdl"
    pseudo_count: float = Field(default=1.0, ge=0.0)
    rng_seed: int = Field(default=0, ge=0)


class RunOutcome(BaseModel):
    problem: str
    algorithm: Algorithm
    population_size: int
    success: bool
    fitness_calls: int
    generations_used: int
    best_fitness: float
    seed: int


class EcgaModel(BaseModel):
    """Marginal product model: a partition plus joint counts per group."""

    n: int = Field(ge=1)
    partition: List[Tuple[int, ...]]
    counts: List[List[int]]
    pseudo_count: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _check_partition(self) -> "EcgaModel":
        covered = sorted(i for group in self.partition for i in group)
        if covered != list(range(self.n)):
            raise ValueError("partition must cover every variable exactly once")
        if len(self.counts) != len(self.partition):
            raise ValueError("one frequency table per group is required")
        totals = set()
        for group, table in zip(self.partition, self.counts):
            if len(table) != 1 << len(group):
                raise ValueError(f"table for group {group} has wrong size")
            totals.add(sum(table))
        if len(totals) > 1:
            raise ValueError("frequency tables disagree on the selected-set size")
        return self

    @property
    def sample_size(self) -> int:
        return sum(self.counts[0]) if self.counts else 0

    def probabilities(self, group_index: int) -> np.ndarray:
        table = np.asarray(self.counts[group_index], dtype=float) + self.pseudo_count
        return table / table.sum()


class BoaNetwork(BaseModel):
    """Bayesian network over binary variables.

    ``cpts[i][c]`` is P(x_i = 1 | parents of i take configuration c), where
    configuration bit t is the value of ``parents[i][t]``.
    """

    n: int = Field(ge=1)
    parents: List[Tuple[int, ...]]
    cpts: List[List[float]]
    max_parents: int = Field(default=10, ge=0)

    @model_validator(mode="after")
    def _check_network(self) -> "BoaNetwork":
        if len(self.parents) != self.n or len(self.cpts) != self.n:
            raise ValueError("one parent set and one CPT per node are required")
        for node, (parents, table) in enumerate(zip(self.parents, self.cpts)):
            if len(parents) > self.max_parents:
                raise ValueError(f"node {node} exceeds {self.max_parents} parents")
            if len(table) != 1 << len(parents):
                raise ValueError(f"CPT of node {node} has wrong size")
            if any(not 0.0 <= p <= 1.0 for p in table):
                raise ValueError(f"CPT of node {node} is not a distribution")
        if not nx.is_directed_acyclic_graph(self.graph()):
            raise ValueError("network contains a cycle")
        return self

    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(
            (parent, node)
            for node, parents in enumerate(self.parents)
            for parent in parents
        )
        return graph

    def edges(self) -> List[Tuple[int, int]]:
        return sorted(self.graph().edges())

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(self.graph()))


class ProbeRecord(BaseModel):
    population_size: int
    successes: int
    runs: int
    reliable: bool


class BisectionResult(BaseModel):
    problem: str
    algorithm: str
    population_size: int
    min_bound: int
    max_bound: int
    reliability_runs: int
    total_fitness_calls_at_N: float
    failure_witness: Optional[int] = None
    seed: int = 0
    probes: List[ProbeRecord] = Field(default_factory=list)
    verification: List[RunOutcome] = Field(default_factory=list)


class AnalysisRow(BaseModel):
    problem: str
    family: Family
    n: int
    k: Optional[int] = None
    m1: Optional[float] = None
    m2: Optional[float] = None
    m3: Optional[float] = None
    fdc: Optional[float] = None
    median_calls: float
    log10_calls: float
    group: int


class Exclusion(BaseModel):
    problem: str
    reason: str


class AnalysisTable(BaseModel):
    rows: List[AnalysisRow] = Field(default_factory=list)
    exclusions: List[Exclusion] = Field(default_factory=list)


class SkippedGroup(BaseModel):
    group: int
    reason: str


class GroupedKendall(BaseModel):
    metric: str
    per_group: Dict[int, float] = Field(default_factory=dict)
    mean: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    overall: Optional[float] = None
    skipped: List[SkippedGroup] = Field(default_factory=list)


class RegressionResult(BaseModel):
    columns: List[str]
    betas: Dict[str, float]
    r_squared: float
    f_statistic: Optional[float] = None
    p_value: float
    n_obs: int
    residuals: List[float] = Field(default_factory=list)


class RankEntry(BaseModel):
    rank: int
    problem: str
    family: Family
    m1: float


class AnalysisReport(BaseModel):
    algorithm: Optional[str] = None
    n_rows: int
    pearson: Dict[str, Optional[float]] = Field(default_factory=dict)
    kendall: Dict[str, Optional[float]] = Field(default_factory=dict)
    grouped_kendall: Dict[str, GroupedKendall] = Field(default_factory=dict)
    regression: Optional[RegressionResult] = None
    regression_error: Optional[str] = None
    ranking: List[RankEntry] = Field(default_factory=list)
    exclusions: List[Exclusion] = Field(default_factory=list)


class ExperimentCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    problem: str
    algorithm: Algorithm

    @property
    def key(self) -> Tuple[str, str]:
        return (self.algorithm.value, self.problem)

    @property
    def slug(self) -> str:
        return f"{self.algorithm.value}__{self.problem.replace(':', '_')}"


class ExperimentConfig(BaseModel):
    """Declarative experiment matrix; one attribute per config-file key."""

    model_config = ConfigDict(extra="forbid")

    families: List[Family] = Field(default_factory=list)
    problems: List[str] = Field(default_factory=list)
    algorithms: List[Algorithm] = Field(default_factory=lambda: [Algorithm.ECGA])
    n_ecga: List[int] = Field(default_factory=list)
    n_boa: List[int] = Field(default_factory=list)
    k: List[int] = Field(default_factory=lambda: [3])
    msp3_k: List[int] = Field(default_factory=lambda: [3, 5])
    alpha: float = 1.0
    initial_population: int = Field(default=1000, ge=4)
    required_successes: int = Field(default=10, ge=1)
    tolerance: float = Field(default=0.1, gt=0.0, lt=1.0)
    max_population: int = Field(default=1 << 20, ge=4)
    max_generations: int = Field(default=200, ge=1)
    max_parents: int = Field(default=10, ge=0)
    seeds: List[int] = Field(default_factory=lambda: list(range(10)))
    sample_size: int = Field(default=5000, ge=1)
    selection_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    repetitions: int = Field(default=50, ge=1)
    estimator: EstimationMethod = EstimationMethod.POPULATION
    confusion_trials: int = Field(default=64, ge=1)
    metric_seed: int = Field(default=0, ge=0)
    bisection_seed: int = Field(default=0, ge=0)
    output_dir: str = "results"
    parallelism: int = Field(default=1, ge=1)
    expected_cells_ecga: Optional[int] = None
    expected_cells_boa: Optional[int] = None

    @field_validator("msp3_k")
    @classmethod
    def _check_msp3_pair(cls, value: List[int]) -> List[int]:
        if len(value) != 2 or value[0] == value[1]:
            raise ValueError("msp3_k must hold two distinct block sizes")
        return value

    def dims(self, algorithm: Algorithm) -> List[int]:
        return self.n_ecga if algorithm == Algorithm.ECGA else self.n_boa

    def metric_config(self) -> MetricConfig:
        return MetricConfig(
            sample_size=self.sample_size,
            selection_fraction=self.selection_fraction,
            repetitions=self.repetitions,
            estimator=self.estimator,
            confusion_trials=self.confusion_trials,
            rng_seed=self.metric_seed,
        )


class RejectedCell(BaseModel):
    algorithm: Algorithm
    candidate: str
    reason: str


class MatrixReport(BaseModel):
    """Expanded cells per algorithm, compared with published counts when known."""

    cells: Dict[str, List[str]] = Field(default_factory=dict)
    counts: Dict[str, int] = Field(default_factory=dict)
    expected: Dict[str, Optional[int]] = Field(default_factory=dict)
    rejected: List[RejectedCell] = Field(default_factory=list)

    def mismatches(self) -> Dict[str, Tuple[int, int]]:
        return {
            algorithm: (self.counts.get(algorithm, 0), expected)
            for algorithm, expected in self.expected.items()
            if expected is not None and expected != self.counts.get(algorithm, 0)
        }


class CellResult(BaseModel):
    cell: ExperimentCell
    bisection: Optional[BisectionResult] = None
    runs: List[RunOutcome] = Field(default_factory=list)
    unreachable: Optional[str] = None


class ExperimentSummary(BaseModel):
    output_dir: str
    cells: int
    unreachable: List[str] = Field(default_factory=list)
    analyzed_rows: Dict[str, int] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
