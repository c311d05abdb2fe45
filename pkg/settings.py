"""Environment-driven settings shared by the CLI and the MCP server."""
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

LOG_LEVEL_ENV = "WALSH_HARDNESS_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "WARNING"


def load_env_file(path: str = ".env") -> bool:
    """Load ``path`` into the environment if it exists."""
    env_file = Path(path)
    if not env_file.exists():
        return False
    print(f"Loading environment variables from {env_file}", file=sys.stderr)
    return load_dotenv(env_file, verbose=True)


def log_level(verbose: bool = False) -> int:
    if verbose:
        return logging.INFO
    name = os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL).strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logging.warning("Invalid %s value '%s'; using WARNING", LOG_LEVEL_ENV, name)
        return logging.WARNING
    return level


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=log_level(verbose),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
