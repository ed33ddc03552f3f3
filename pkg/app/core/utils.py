"""
Utility functions for logging, seeding, and small numerical helpers.
"""
import hashlib
import json
import logging
import time
import traceback
from datetime import datetime
from functools import wraps
from typing import Any, Dict, Iterable, Optional

import numpy as np

from app.core.config import settings


RNG_ALGORITHM = "philox4x64-10"

# Stream offsets XOR-ed into a trial seed so evaluation and Gram point sets
# never share a stream with the training samples.
EVAL_STREAM = 0x5EED_E7A1_0000_0001
GRAM_STREAM = 0x5EED_6A3D_0000_0002
POOL_STREAM = 0x5EED_9001_0000_0003
COEFF_STREAM = 0x5EED_C0EF_0000_0004
# Run-level streams, XOR-ed into the config seed.
VOLUME_STREAM = 0x5EED_70E0_0000_0005
SCHEDULE_STREAM = 0x5EED_5C4E_0000_0006

_SEED_MASK = (1 << 64) - 1


class JSONFormatter(logging.Formatter):
    """Formats records as one JSON object per line."""

    def format(self, record):
        log_data = {
            'timestamp': datetime.now().isoformat(),
            'level': record.levelname,
            'module': record.module,
            'function': record.funcName,
            'message': record.getMessage(),
        }

        if hasattr(record, 'extra_data'):
            log_data['data'] = record.extra_data

        if record.exc_info:
            log_data['exception'] = traceback.format_exception(*record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logging():
    """Setup structured JSON logging with file and console handlers."""
    console_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    app_logger = logging.getLogger("polyframe")
    app_logger.setLevel(getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
    app_logger.handlers.clear()
    app_logger.propagate = False

    if settings.LOG_TO_CONSOLE:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(console_formatter)
        app_logger.addHandler(console_handler)

    if settings.LOG_TO_FILE:
        logs_dir = settings.get_logs_dir()

        app_handler = logging.FileHandler(logs_dir / 'app.log')
        app_handler.setFormatter(JSONFormatter())
        app_logger.addHandler(app_handler)

        error_handler_ = logging.FileHandler(logs_dir / 'errors.log')
        error_handler_.setLevel(logging.ERROR)
        error_handler_.setFormatter(JSONFormatter())
        app_logger.addHandler(error_handler_)

    return app_logger


logger = setup_logging()


def log_event(event_type: str, data: Optional[Dict[str, Any]] = None, level: str = "INFO"):
    """
    Log a structured event.

    Args:
        event_type: Type of event (e.g., 'tsvd_solved')
        data: Additional data to log
        level: Log level (DEBUG, INFO, WARNING, ERROR)
    """
    logger.log(
        getattr(logging, level.upper(), logging.INFO),
        event_type,
        extra={'extra_data': data or {}},
    )


def error_handler(func):
    """Decorator for error handling and logging."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:
            logger.error(
                f"Error in {func.__name__}: {str(e)}",
                exc_info=True,
                extra={'extra_data': {'function': func.__name__, 'error': str(e)}}
            )
            raise
    return wrapper


class Stopwatch:
    """Context manager for timing operations."""

    def __init__(self, operation_name: str):
        self.operation_name = operation_name
        self.elapsed = 0.0
        self._start = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        logger.debug(f"Starting: {self.operation_name}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed = time.perf_counter() - self._start

        if exc_type is None:
            logger.debug(f"Completed: {self.operation_name} ({self.elapsed:.2f}s)")
        else:
            logger.error(f"Failed: {self.operation_name} ({self.elapsed:.2f}s)")

        return False


def make_generator(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox 4x64, 10 rounds) for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _SEED_MASK))


def split_seed(seed: int, index: int) -> int:
    """Derive a per-trial seed as seed XOR index."""
    return (int(seed) ^ int(index)) & _SEED_MASK


def lower_median(values: Iterable[float]) -> float:
    """Order-statistics median; the lower one for even counts."""
    ordered = sorted(float(v) for v in values)
    if not ordered:
        return float("nan")
    return ordered[(len(ordered) - 1) // 2]


def config_hash(payload: Dict[str, Any]) -> str:
    """Short stable hash of a JSON-serializable mapping."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
