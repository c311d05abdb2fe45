import pytest

import walsh_hardness_mcp_server as server
from errors import ConfigurationError
from models import RunOutcome


def test_describe_problem_reports_optima_and_linkage():
    description = server.describe_problem("trapi1:7:3")

    assert description["f_max"] == 6.0
    assert sorted(description["global_optima"]) == ["0000000", "1111111"]
    assert description["groups"] == [[1, 2, 3], [4, 5, 6]]
    assert description["control_bits"] == [0]


def test_evaluate_bitstring_flags_the_optimum():
    result = server.evaluate_bitstring("trap:6:3", "111111")

    assert result["fitness"] == 6.0
    assert result["is_optimum"] is True
    assert server.evaluate_bitstring("trap:6:3", "110111")["is_optimum"] is False


def test_walsh_coefficients_skips_zero_terms_by_default():
    rows = server.walsh_coefficients("trap:6:3", order=2)

    assert [row["indices"] for row in rows] == [
        [0, 1],
        [0, 2],
        [1, 2],
        [3, 4],
        [3, 5],
        [4, 5],
    ]
    assert len(server.walsh_coefficients("trap:6:3", nonzero_only=False)) == 15


def test_difficulty_metrics_returns_report():
    report = server.difficulty_metrics(
        "trap:12:3", sample_size=200, repetitions=2, estimator="exact"
    )

    assert report.m1 == pytest.approx(0.5 / 12)


def test_run_eda_tool_returns_outcome():
    outcome = server.run_eda("onemax:8", population_size=40, seed=2)

    assert isinstance(outcome, RunOutcome)
    assert outcome.seed == 2


def test_bisect_population_tool_forwards_generation_limit(monkeypatch):
    seen = []

    def fake_run(problem, algorithm, size, seed, **options):
        seen.append(options)
        return RunOutcome(
            problem=problem.spec,
            algorithm=algorithm,
            population_size=size,
            success=True,
            fitness_calls=size,
            generations_used=1,
            best_fitness=6.0,
            seed=seed,
        )

    monkeypatch.setattr(server, "run_with_eda", fake_run)

    result = server.bisect_population(
        "trap:6:3", initial_population=16, required_successes=2, max_generations=7
    )

    assert result.population_size == 16
    assert all(options == {"max_generations": 7} for options in seen)


def test_tools_reject_malformed_problem_specs():
    with pytest.raises(ConfigurationError):
        server.describe_problem("trap:7:3")


@pytest.mark.parametrize("bits", ["10x011", "", "1 0"])
def test_evaluate_bitstring_rejects_non_binary_input(bits):
    with pytest.raises(ConfigurationError, match="Bit string"):
        server.evaluate_bitstring("trap:6:3", bits)
