"""ECGA and BOA optimizers with exact fitness-call accounting.

Both algorithms share one generational loop: evaluate, stop on the optimum,
select, learn a model from the selected set, sample offspring and let them
replace the worst part of the population.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.special import xlogy
from scipy.stats import entropy

from errors import ArgumentError, DimensionError
from fitness import evaluate_batch, f_max
from metrics import truncation_select
from models import (
    Algorithm,
    BoaNetwork,
    EcgaModel,
    EdaConfig,
    ProblemInstance,
    RunOutcome,
)

logger = logging.getLogger(__name__)

SUCCESS_TOLERANCE = 1e-9
SCORE_EPSILON = 1e-9


class FitnessCounter:
    """Evaluates populations and counts every genome it scores."""

    def __init__(self, problem: ProblemInstance):
        self.problem = problem
        self.calls = 0

    def __call__(self, population: np.ndarray) -> np.ndarray:
        values = evaluate_batch(self.problem, population)
        self.calls += len(values)
        return values


def _as_selected(selected: np.ndarray) -> np.ndarray:
    selected = np.asarray(selected)
    if selected.ndim != 2 or len(selected) == 0:
        raise ArgumentError("Model building needs a non-empty 2-D selected set")
    return selected.astype(np.int64, copy=False)


def _codes(selected: np.ndarray, variables: Sequence[int]) -> np.ndarray:
    """Configuration index per row; bit t holds the value of variables[t]."""
    if not variables:
        return np.zeros(len(selected), dtype=np.int64)
    weights = 1 << np.arange(len(variables), dtype=np.int64)
    return selected[:, list(variables)] @ weights


def tournament_select(
    fitnesses: np.ndarray, count: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Indices of ``count`` tournament winners.

    Each pass shuffles the population and splits it into disjoint tournaments,
    so no individual meets itself; passes repeat until enough winners exist.
    """
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    total = len(fitnesses)
    if total == 0:
        raise ArgumentError("Cannot select from an empty population")
    size = min(size, total)
    winners: List[int] = []
    while len(winners) < count:
        order = rng.permutation(total)
        rounds = order[: total - total % size].reshape(-1, size)
        best = rounds[np.arange(len(rounds)), np.argmax(fitnesses[rounds], axis=1)]
        winners.extend(best.tolist())
    return np.asarray(winners[:count], dtype=np.int64)


# ECGA


def group_counts(selected: np.ndarray, group: Sequence[int]) -> np.ndarray:
    selected = _as_selected(selected)
    return np.bincount(_codes(selected, group), minlength=1 << len(group))


def _mdl_penalty(size: int) -> float:
    return math.log2(size + 1)


def _bic_penalty(size: int) -> float:
    return math.log2(size) / 2.0


_PENALTIES: Dict[str, Callable[[int], float]] = {
    "mdl": _mdl_penalty,
    "bic": _bic_penalty,
}


def _group_cost(selected: np.ndarray, group: Sequence[int], penalty: float) -> float:
    counts = group_counts(selected, group)
    model_bits = penalty * ((1 << len(group)) - 1)
    return model_bits + len(selected) * float(entropy(counts, base=2))


def _partition_cost(
    selected: np.ndarray, partition: Sequence[Sequence[int]], score: str
) -> float:
    selected = _as_selected(selected)
    penalty = _PENALTIES[score](len(selected))
    return sum(_group_cost(selected, group, penalty) for group in partition)


def ecga_mdl_score(selected: np.ndarray, partition: Sequence[Sequence[int]]) -> float:
    """Combined complexity in bits: model size plus compressed population size."""
    return _partition_cost(selected, partition, "mdl")


def ecga_bic_score(selected: np.ndarray, partition: Sequence[Sequence[int]]) -> float:
    return _partition_cost(selected, partition, "bic")


def build_ecga_model(
    selected: np.ndarray,
    max_group_size: int = 12,
    score: str = "mdl",
    pseudo_count: float = 1.0,
) -> EcgaModel:
    """Greedy agglomeration of singleton groups into a marginal product model.

    Each step merges the pair of groups whose union lowers the score most;
    the search stops when no merge lowers it.
    """
    selected = _as_selected(selected)
    if score not in _PENALTIES:
        raise ArgumentError(f"Unknown ECGA score '{score}'")
    penalty = _PENALTIES[score](len(selected))
    groups: List[Tuple[int, ...]] = [(i,) for i in range(selected.shape[1])]
    costs = [_group_cost(selected, group, penalty) for group in groups]
    merged_costs: Dict[Tuple[int, ...], float] = {}

    while True:
        best: Optional[Tuple[int, int, float]] = None
        best_gain = SCORE_EPSILON
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                if len(groups[a]) + len(groups[b]) > max_group_size:
                    continue
                union = tuple(sorted(groups[a] + groups[b]))
                if union not in merged_costs:
                    merged_costs[union] = _group_cost(selected, union, penalty)
                gain = costs[a] + costs[b] - merged_costs[union]
                if gain > best_gain:
                    best, best_gain = (a, b, merged_costs[union]), gain
        if best is None:
            break
        a, b, cost = best
        union = tuple(sorted(groups[a] + groups[b]))
        groups = [g for i, g in enumerate(groups) if i not in (a, b)] + [union]
        costs = [c for i, c in enumerate(costs) if i not in (a, b)] + [cost]

    partition = sorted(groups)
    return EcgaModel(
        n=selected.shape[1],
        partition=partition,
        counts=[group_counts(selected, group).tolist() for group in partition],
        pseudo_count=pseudo_count,
    )


def sample_ecga(
    model: EcgaModel, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw each group's configuration independently from its smoothed table."""
    population = np.zeros((count, model.n), dtype=np.uint8)
    for index, group in enumerate(model.partition):
        probabilities = model.probabilities(index)
        codes = rng.choice(len(probabilities), size=count, p=probabilities)
        for position, variable in enumerate(group):
            population[:, variable] = (codes >> position) & 1
    return population


# BOA


def _node_counts(
    selected: np.ndarray, node: int, parents: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    codes = _codes(selected, parents)
    width = 1 << len(parents)
    totals = np.bincount(codes, minlength=width).astype(np.float64)
    ones = np.bincount(codes, weights=selected[:, node], minlength=width)
    return ones, totals


def boa_bic_score(selected: np.ndarray, node: int, parents: Sequence[int]) -> float:
    """Local BIC of one node: log-likelihood in bits minus (log2 N)/2 per parameter."""
    selected = _as_selected(selected)
    ones, totals = _node_counts(selected, node, parents)
    zeros = totals - ones
    loglik = (xlogy(ones, ones) + xlogy(zeros, zeros) - xlogy(totals, totals)).sum()
    penalty = math.log2(len(selected)) / 2.0 * (1 << len(parents))
    return float(loglik / math.log(2.0) - penalty)


def network_bic(selected: np.ndarray, parents: Sequence[Sequence[int]]) -> float:
    return sum(boa_bic_score(selected, node, ps) for node, ps in enumerate(parents))


def _cpt(
    selected: np.ndarray, node: int, parents: Sequence[int], pseudo_count: float
) -> List[float]:
    ones, totals = _node_counts(selected, node, parents)
    denominator = totals + 2.0 * pseudo_count
    safe = np.where(denominator > 0, denominator, 1.0)
    return np.where(denominator > 0, (ones + pseudo_count) / safe, 0.5).tolist()


def build_boa_network(
    selected: np.ndarray, max_parents: int = 10, pseudo_count: float = 1.0
) -> BoaNetwork:
    """Greedy BIC edge addition starting from the empty network."""
    selected = _as_selected(selected)
    n = selected.shape[1]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    parents: List[List[int]] = [[] for _ in range(n)]
    local = [boa_bic_score(selected, node, ()) for node in range(n)]
    gains: Dict[Tuple[int, int], float] = {}

    def refresh(node: int) -> None:
        for source in range(n):
            if source != node and source not in parents[node]:
                candidate = sorted(parents[node] + [source])
                gains[(source, node)] = (
                    boa_bic_score(selected, node, candidate) - local[node]
                )

    for node in range(n):
        if max_parents > 0:
            refresh(node)

    while True:
        best: Optional[Tuple[float, int, int]] = None
        for (source, node), gain in gains.items():
            if gain <= SCORE_EPSILON or len(parents[node]) >= max_parents:
                continue
            if best is not None and gain <= best[0]:
                continue
            if nx.has_path(graph, node, source):
                continue
            best = (gain, source, node)
        if best is None:
            break
        gain, source, node = best
        graph.add_edge(source, node)
        parents[node] = sorted(parents[node] + [source])
        local[node] = boa_bic_score(selected, node, parents[node])
        del gains[(source, node)]
        refresh(node)
        logger.debug("BOA edge %d -> %d (gain %.3f bits)", source, node, gain)

    return BoaNetwork(
        n=n,
        parents=[tuple(ps) for ps in parents],
        cpts=[
            _cpt(selected, node, ps, pseudo_count) for node, ps in enumerate(parents)
        ],
        max_parents=max_parents,
    )


def sample_boa(
    network: BoaNetwork, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Ancestral sampling in topological order."""
    population = np.zeros((count, network.n), dtype=np.uint8)
    for node in network.topological_order():
        codes = _codes(population.astype(np.int64), network.parents[node])
        probabilities = np.asarray(network.cpts[node], dtype=np.float64)[codes]
        population[:, node] = rng.random(count) < probabilities
    return population


def _offspring(
    selected: np.ndarray, count: int, config: EdaConfig, rng: np.random.Generator
) -> np.ndarray:
    if config.algorithm == Algorithm.ECGA:
        model = build_ecga_model(
            selected,
            max_group_size=config.max_group_size,
            score=config.ecga_score,
            pseudo_count=config.pseudo_count,
        )
        return sample_ecga(model, count, rng)
    network = build_boa_network(
        selected, max_parents=config.max_parents, pseudo_count=config.pseudo_count
    )
    return sample_boa(network, count, rng)


def run_eda(
    problem: ProblemInstance,
    config: EdaConfig,
    initial_population: Optional[np.ndarray] = None,
) -> RunOutcome:
    """Run one seeded EDA until the optimum, max_generations or convergence."""
    rng = np.random.default_rng(config.rng_seed)
    counter = FitnessCounter(problem)
    size = config.population_size
    target = f_max(problem) - SUCCESS_TOLERANCE

    if initial_population is None:
        population = rng.integers(0, 2, size=(size, problem.n), dtype=np.uint8)
    else:
        population = np.array(initial_population, dtype=np.uint8)
        if population.shape != (size, problem.n):
            raise DimensionError(
                f"Initial population must have shape {(size, problem.n)}, "
                f"got {population.shape}"
            )
    fitnesses = counter(population)
    replaced = min(size, max(1, round(config.replacement_fraction * size)))

    generation = 0
    success = bool(fitnesses.max() >= target)
    while not success and generation < config.max_generations:
        if (population == population[0]).all():
            logger.debug(
                "%s: population converged at generation %d", problem, generation
            )
            break
        generation += 1
        if config.truncation_fraction is not None:
            selected, _ = truncation_select(
                population, fitnesses, config.truncation_fraction
            )
        else:
            winners = tournament_select(fitnesses, size, config.tournament_size, rng)
            selected = population[winners]
        offspring = _offspring(selected, replaced, config, rng)
        worst = np.argsort(fitnesses, kind="stable")[:replaced]
        population[worst] = offspring
        fitnesses[worst] = counter(offspring)
        success = bool(fitnesses.max() >= target)

    outcome = RunOutcome(
        problem=problem.spec,
        algorithm=config.algorithm,
        population_size=size,
        success=success,
        fitness_calls=counter.calls,
        generations_used=generation,
        best_fitness=float(fitnesses.max()),
        seed=config.rng_seed,
    )
    logger.info(
        "%s %s N=%d seed=%d: success=%s calls=%d generations=%d",
        config.algorithm.value,
        problem,
        size,
        config.rng_seed,
        success,
        counter.calls,
        generation,
    )
    return outcome
