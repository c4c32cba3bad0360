"""
Runtime configuration.

Values come from the environment (or a local .env file) so that runs can be
tuned without touching scenario files.
"""

import os

from dotenv import load_dotenv

load_dotenv()

CRITSET_THREADS = os.getenv("CRITSET_THREADS")
CRITSET_LOG_LEVEL = os.getenv("CRITSET_LOG_LEVEL", "WARNING")

DET_FLOOR = float(os.getenv("CRITSET_DET_FLOOR", "1e-300"))
ESCAPE_RADIUS = float(os.getenv("CRITSET_ESCAPE_RADIUS", "1e6"))


def resolve_threads(requested=None):
    """
    Resolve the worker count for a run.

    CRITSET_THREADS wins over the scenario value; "auto" (or None) means one
    worker per CPU.

    Args:
        requested: Integer, "auto" or None

    Returns:
        Positive integer number of workers
    """
    value = CRITSET_THREADS if CRITSET_THREADS else requested
    if value is None or str(value).lower() == "auto":
        return os.cpu_count() or 1
    count = int(value)
    if count < 1:
        raise ValueError(f"thread count must be positive, got {count}")
    return count
