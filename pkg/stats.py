"""Correlating difficulty metrics with log10 fitness calls."""
import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.stats

from errors import (
    ArgumentError,
    CollinearityError,
    DimensionError,
    IngestionError,
    UndefinedCorrelationError,
)
from models import (
    AnalysisReport,
    AnalysisRow,
    AnalysisTable,
    Exclusion,
    GroupedKendall,
    MetricReport,
    RankEntry,
    RegressionResult,
    RunOutcome,
    SkippedGroup,
)

logger = logging.getLogger(__name__)

METRICS = ("m1", "m2", "m3", "fdc")
REGRESSORS = ("m1", "m2", "fdc")
CONDITION_LIMIT = 1e12


def _paired(xs: Sequence[float], ys: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError("Correlation inputs must be 1-D and of equal length")
    if len(x) < 2:
        raise ArgumentError("Correlation needs at least two observations")
    return x, y


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson r (population moments; the normalisation cancels)."""
    x, y = _paired(xs, ys)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("Pearson r is undefined for constant input")
    r = scipy.stats.pearsonr(x, y)[0]
    return float(np.clip(r, -1.0, 1.0))


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall tau-b, corrected for ties."""
    x, y = _paired(xs, ys)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("Kendall tau is undefined when all values tie")
    tau = scipy.stats.kendalltau(x, y, variant="b")[0]
    if math.isnan(tau):
        raise UndefinedCorrelationError("Kendall tau is undefined for this input")
    return float(tau)


def _metric_rows(table: AnalysisTable, metric: str) -> List[AnalysisRow]:
    if metric not in METRICS:
        raise ArgumentError(f"Unknown metric '{metric}'")
    return [row for row in table.rows if getattr(row, metric) is not None]


def grouped_kendall(table: AnalysisTable, metric: str) -> GroupedKendall:
    """Kendall tau within each dimension group, their mean and t-based 95% CI."""
    rows = _metric_rows(table, metric)
    result = GroupedKendall(metric=metric)

    for group in sorted({row.group for row in rows}):
        members = [row for row in rows if row.group == group]
        if len(members) < 2:
            result.skipped.append(
                SkippedGroup(group=group, reason="fewer than two solved problems")
            )
            continue
        try:
            result.per_group[group] = kendall_tau(
                [getattr(row, metric) for row in members],
                [row.log10_calls for row in members],
            )
        except UndefinedCorrelationError as e:
            result.skipped.append(SkippedGroup(group=group, reason=str(e)))

    for skipped in result.skipped:
        logger.warning(
            "Skipping group n=%d for %s: %s", skipped.group, metric, skipped.reason
        )

    taus = list(result.per_group.values())
    if taus:
        result.mean = float(np.mean(taus))
    if len(taus) >= 2:
        half_width = scipy.stats.t.ppf(0.975, len(taus) - 1) * (
            np.std(taus, ddof=1) / math.sqrt(len(taus))
        )
        result.ci_low = float(result.mean - half_width)
        result.ci_high = float(result.mean + half_width)

    try:
        result.overall = kendall_tau(
            [getattr(row, metric) for row in rows], [row.log10_calls for row in rows]
        )
    except (UndefinedCorrelationError, ArgumentError):
        result.overall = None
    return result


def ols_standardized(
    X: Union[Mapping[str, Sequence[float]], np.ndarray],
    y: Sequence[float],
    columns: Optional[Sequence[str]] = None,
) -> RegressionResult:
    """Least squares on z-scored regressors and response.

    Returns standardized coefficients, R^2 and the overall F-test p-value.
    """
    if isinstance(X, Mapping):
        columns = list(X)
        matrix = np.column_stack([np.asarray(X[c], dtype=np.float64) for c in columns])
    else:
        matrix = np.asarray(X, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionError("Regressors must form a 2-D matrix")
        columns = list(columns or [f"x{i}" for i in range(matrix.shape[1])])
    response = np.asarray(y, dtype=np.float64)
    rows, width = matrix.shape
    if response.shape != (rows,) or len(columns) != width:
        raise DimensionError("Regressor and response shapes do not match")
    if rows <= width + 1:
        raise ArgumentError(f"Need more than {width + 1} rows, got {rows}")

    spread = matrix.std(axis=0)
    constant = [name for name, s in zip(columns, spread) if s == 0]
    if constant:
        raise CollinearityError(constant)
    if response.std() == 0:
        raise UndefinedCorrelationError("Response is constant")

    z = (matrix - matrix.mean(axis=0)) / spread
    zy = (response - response.mean()) / response.std()
    gram = z.T @ z
    if np.linalg.cond(gram) > CONDITION_LIMIT:
        null_direction = np.linalg.svd(z)[2][-1]
        offending = [
            columns[i] for i in np.flatnonzero(np.abs(null_direction) > 1e-6)
        ]
        raise CollinearityError(offending)

    betas = np.linalg.solve(gram, z.T @ zy)
    residuals = zy - z @ betas
    r_squared = float(1.0 - residuals @ residuals / (zy @ zy))
    dfd = rows - width - 1
    if r_squared >= 1.0 - 1e-15:
        f_statistic, p_value = None, 0.0
    else:
        f_statistic = (r_squared / width) / ((1.0 - r_squared) / dfd)
        p_value = float(scipy.stats.f.sf(f_statistic, width, dfd))
    return RegressionResult(
        columns=columns,
        betas={name: float(b) for name, b in zip(columns, betas)},
        r_squared=r_squared,
        f_statistic=f_statistic,
        p_value=p_value,
        n_obs=rows,
        residuals=[float(r) for r in residuals],
    )


def build_analysis_table(
    runs: Iterable[RunOutcome], metrics: Iterable[MetricReport]
) -> AnalysisTable:
    """Join per-problem metrics with the median fitness calls of solved runs."""
    reports: Dict[str, MetricReport] = {}
    for report in metrics:
        if report.problem in reports:
            raise IngestionError(f"Duplicate metric record for {report.problem}")
        reports[report.problem] = report

    outcomes: Dict[str, List[RunOutcome]] = defaultdict(list)
    seen = set()
    algorithms = set()
    for run in runs:
        key = (run.problem, run.seed)
        if key in seen:
            raise IngestionError(f"Duplicate run for {run.problem} seed {run.seed}")
        seen.add(key)
        algorithms.add(run.algorithm)
        outcomes[run.problem].append(run)
    if len(algorithms) > 1:
        raise IngestionError("Runs mix algorithms; analyze one algorithm at a time")

    table = AnalysisTable()
    for problem in sorted(set(reports) | set(outcomes)):
        report = reports.get(problem)
        if report is None:
            table.exclusions.append(Exclusion(problem=problem, reason="no metrics"))
            continue
        problem_runs = outcomes.get(problem, [])
        if not problem_runs:
            table.exclusions.append(Exclusion(problem=problem, reason="no runs"))
            continue
        solved = [run.fitness_calls for run in problem_runs if run.success]
        if not solved:
            table.exclusions.append(
                Exclusion(
                    problem=problem,
                    reason=f"unsolved in all {len(problem_runs)} runs",
                )
            )
            continue
        median_calls = float(np.median(solved))
        table.rows.append(
            AnalysisRow(
                problem=problem,
                family=report.family,
                n=report.n,
                k=report.k,
                m1=report.m1,
                m2=report.m2,
                m3=report.m3,
                fdc=report.fdc,
                median_calls=median_calls,
                log10_calls=math.log10(median_calls),
                group=report.n,
            )
        )
    return table


def rank_by_m1(reports: Iterable[Union[MetricReport, AnalysisRow]]) -> List[RankEntry]:
    """Problems ordered from hardest (smallest M1) to easiest."""
    scored = sorted(
        (item for item in reports if item.m1 is not None),
        key=lambda item: (item.m1, item.problem),
    )
    return [
        RankEntry(rank=position, problem=item.problem, family=item.family, m1=item.m1)
        for position, item in enumerate(scored, start=1)
    ]


def rank_families(
    reports: Iterable[Union[MetricReport, AnalysisRow]]
) -> List[Tuple[str, float]]:
    """Families ordered by the M1 of their hardest member, hardest first."""
    by_family: Dict[str, List[float]] = defaultdict(list)
    for item in reports:
        if item.m1 is not None:
            by_family[item.family.value].append(item.m1)
    return sorted(
        ((family, float(min(values))) for family, values in by_family.items()),
        key=lambda pair: (pair[1], pair[0]),
    )


def analyze(table: AnalysisTable, algorithm: Optional[str] = None) -> AnalysisReport:
    report = AnalysisReport(
        algorithm=algorithm, n_rows=len(table.rows), exclusions=table.exclusions
    )
    for metric in METRICS:
        rows = _metric_rows(table, metric)
        values = [getattr(row, metric) for row in rows]
        calls = [row.log10_calls for row in rows]
        for name, correlate in (("pearson", pearson), ("kendall", kendall_tau)):
            try:
                getattr(report, name)[metric] = correlate(values, calls)
            except (UndefinedCorrelationError, ArgumentError) as e:
                logger.warning("%s(%s) undefined: %s", name, metric, e)
                getattr(report, name)[metric] = None
        report.grouped_kendall[metric] = grouped_kendall(table, metric)

    complete = [
        row
        for row in table.rows
        if all(getattr(row, m) is not None for m in REGRESSORS)
    ]
    try:
        report.regression = ols_standardized(
            {m: [getattr(row, m) for row in complete] for m in REGRESSORS},
            [row.log10_calls for row in complete],
        )
    except (CollinearityError, ArgumentError, UndefinedCorrelationError) as e:
        report.regression_error = str(e)

    report.ranking = rank_by_m1(table.rows)
    return report


def scatter_rows(table: AnalysisTable) -> List[Dict[str, object]]:
    """Long-format (problem, metric, value, log10 calls) rows for plotting."""
    rows = []
    for row in table.rows:
        for metric in METRICS:
            value = getattr(row, metric)
            if value is None:
                continue
            rows.append(
                {
                    "problem": row.problem,
                    "n": row.n,
                    "k": row.k,
                    "metric": metric,
                    "metric_value": value,
                    "log10_calls": row.log10_calls,
                }
            )
    return rows
