#!/usr/bin/env python3
"""
Walsh Hardness MCP Server - exposes the difficulty toolkit as MCP tools.

Clients can evaluate benchmark functions, inspect Walsh coefficients, compute
difficulty metrics and run or size ECGA/BOA without touching the CLI.
"""

import contextlib
import logging
import os
from typing import Any, Dict, List, Optional

import uvicorn
from mcp.server import FastMCP
from starlette.applications import Starlette
from starlette.routing import Mount, Route

from eda import run_eda as _run_eda
from fitness import (
    evaluate,
    f_max,
    global_optima,
    linkage_structure,
    parse_problem_spec,
)
from metrics import compute_metrics
from models import (
    Algorithm,
    BisectionResult,
    BitString,
    EdaConfig,
    EstimationMethod,
    MetricConfig,
    MetricReport,
    RunOutcome,
)
from settings import configure_logging, load_env_file
from sizing import bisect_population as _bisect_population
from sizing import run_with_eda
from walsh import order_coefficients

load_env_file()
configure_logging()

MCP_MODE_ENV = os.environ.get("MCP_MODE")

if MCP_MODE_ENV is None:
    MCP_MODE = "stdio"
else:
    MCP_MODE = MCP_MODE_ENV.strip().lower()
    if MCP_MODE not in ("stdio", "remote"):
        logging.warning(
            "Invalid MCP_MODE value '%s'. Expected 'stdio' or 'remote'. "
            "Falling back to 'stdio'.",
            MCP_MODE_ENV,
        )
        MCP_MODE = "stdio"

if MCP_MODE == "remote":
    mcp = FastMCP("Walsh Hardness MCP Server", host="0.0.0.0")
else:
    mcp = FastMCP("Walsh Hardness MCP Server")


@mcp.tool()
def describe_problem(problem: str) -> Dict[str, Any]:
    """Describe a benchmark problem given as ``family:n:k[:k2][:alpha]``.

    Returns its maximum, global optima and linkage groups.
    """
    instance = parse_problem_spec(problem)
    structure = linkage_structure(instance)
    return {
        "problem": instance.spec,
        "family": instance.family.value,
        "n": instance.n,
        "k": instance.k,
        "k2": instance.k2,
        "alpha": instance.alpha,
        "f_max": f_max(instance),
        "global_optima": [str(optimum) for optimum in global_optima(instance)],
        "groups": [list(group) for group in structure.groups],
        "control_bits": list(structure.control_bits),
    }


@mcp.tool()
def evaluate_bitstring(problem: str, bits: str) -> Dict[str, Any]:
    """Evaluate a bit string such as ``"110011"`` on a benchmark problem."""
    instance = parse_problem_spec(problem)
    value = evaluate(instance, BitString.from_string(bits))
    return {
        "problem": instance.spec,
        "bits": bits,
        "fitness": value,
        "is_optimum": value == f_max(instance),
    }


@mcp.tool()
def walsh_coefficients(
    problem: str,
    order: int = 2,
    method: str = "exact",
    nonzero_only: bool = True,
    trials: int = 64,
    sample_size: int = 5000,
    seed: int = 0,
) -> List[Dict[str, Any]]:
    """Walsh coefficients of one order.

    ``method`` is ``exact``, ``confusion`` or ``population``.
    """
    instance = parse_problem_spec(problem)
    rows = order_coefficients(
        instance,
        order,
        EstimationMethod(method),
        trials=trials,
        sample_size=sample_size,
        seed=seed,
    )
    return [
        {"indices": list(subset), "coefficient": value}
        for subset, value in rows
        if not nonzero_only or abs(value) > 1e-12
    ]


@mcp.tool()
def difficulty_metrics(
    problem: str,
    sample_size: int = 5000,
    repetitions: int = 50,
    estimator: str = "population",
    selection_fraction: float = 0.5,
    seed: int = 0,
) -> MetricReport:
    """Compute M1, M2, M3 and FDC for a problem."""
    config = MetricConfig(
        sample_size=sample_size,
        repetitions=repetitions,
        estimator=EstimationMethod(estimator),
        selection_fraction=selection_fraction,
        rng_seed=seed,
    )
    return compute_metrics(parse_problem_spec(problem), config)


@mcp.tool()
def run_eda(
    problem: str,
    algorithm: str = "ecga",
    population_size: int = 1000,
    seed: int = 0,
    max_generations: int = 200,
    max_parents: int = 10,
) -> RunOutcome:
    """Run ECGA or BOA once and report success and fitness calls."""
    config = EdaConfig(
        algorithm=Algorithm(algorithm),
        population_size=population_size,
        rng_seed=seed,
        max_generations=max_generations,
        max_parents=max_parents,
    )
    return _run_eda(parse_problem_spec(problem), config)


@mcp.tool()
def bisect_population(
    problem: str,
    algorithm: str = "ecga",
    initial_population: int = 1000,
    required_successes: int = 10,
    tolerance: float = 0.1,
    seed: int = 0,
    max_generations: Optional[int] = None,
) -> BisectionResult:
    """Find the smallest population size that solves the problem reliably."""
    options = {} if max_generations is None else {"max_generations": max_generations}

    def runner(instance, algo, size, run_seed):
        return run_with_eda(instance, algo, size, run_seed, **options)

    return _bisect_population(
        parse_problem_spec(problem),
        algorithm,
        initial_N=initial_population,
        required_successes=required_successes,
        tolerance=tolerance,
        seed=seed,
        runner=runner,
    )


class _SlashlessMountEndpoint:
    """Forward an exact mount path request to the mounted app's root path."""

    def __init__(self, app: Starlette, root_path_suffix: str):
        self.app = app
        self.root_path_suffix = root_path_suffix

    async def __call__(self, scope, receive, send):
        forwarded_scope = dict(scope)
        forwarded_scope["path"] = "/"
        forwarded_scope["raw_path"] = b"/"
        forwarded_scope["root_path"] = (
            forwarded_scope.get("root_path", "") + self.root_path_suffix
        )
        await self.app(forwarded_scope, receive, send)


def _transport_routes(path: str, app: Starlette) -> List[Any]:
    app.router.redirect_slashes = False
    return [
        Route(path, endpoint=_SlashlessMountEndpoint(app, path), methods=None),
        Mount(path, app=app),
    ]


def _build_remote_app() -> Starlette:
    mcp.settings.streamable_http_path = "/"
    mcp.settings.sse_path = "/"

    @contextlib.asynccontextmanager
    async def lifespan(app: Starlette):
        async with mcp.session_manager.run():
            yield

    app = Starlette(
        routes=[
            *_transport_routes("/mcp", mcp.streamable_http_app()),
            *_transport_routes("/sse", mcp.sse_app()),
        ],
        lifespan=lifespan,
    )
    app.router.redirect_slashes = False
    return app


def main():
    """Main entry point for the Walsh Hardness MCP server."""
    if MCP_MODE == "remote":
        app = _build_remote_app()
        uvicorn.run(app, host=mcp.settings.host, port=mcp.settings.port)
    else:
        mcp.run()


if __name__ == "__main__":
    main()
