"""
Utility helper functions for fraglab
"""

import json
import logging
import hashlib
import subprocess
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)


# =============================================================================
# DATETIME UTILITIES
# =============================================================================

def utc_now() -> datetime:
    """Get current UTC datetime"""
    return datetime.now(timezone.utc)


# =============================================================================
# JSON UTILITIES
# =============================================================================

def _json_default(value: Any) -> Any:
    """Fallback encoder for numpy scalars, fractions and paths"""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, Path):
        return str(value)
    return str(value)


def safe_json_dumps(data: Any, default: str = "{}") -> str:
    """
    Safely serialize data to JSON with sorted keys

    Args:
        data: Data to serialize
        default: Default value if serialization fails

    Returns:
        JSON string or default value
    """
    try:
        return json.dumps(data, ensure_ascii=False, default=_json_default, sort_keys=True, indent=2)
    except (TypeError, ValueError) as e:
        logger.warning(f"Failed to serialize JSON: {e}")
        return default


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write data as sorted, indented JSON and return the path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(safe_json_dumps(data) + "\n", encoding="utf-8")
    return path


def fraction_text(value: Fraction) -> str:
    """Exact rational as 'p/q'"""
    return f"{value.numerator}/{value.denominator}"


# =============================================================================
# HASHING UTILITIES
# =============================================================================

def generate_hash(text: Union[str, bytes], algorithm: str = "sha256") -> str:
    """
    Generate hash of text

    Args:
        text: Text or bytes to hash
        algorithm: Hash algorithm name understood by hashlib

    Returns:
        Hex digest string
    """
    if isinstance(text, str):
        text = text.encode("utf-8")
    hash_obj = hashlib.new(algorithm)
    hash_obj.update(text)
    return hash_obj.hexdigest()


# =============================================================================
# ENVIRONMENT UTILITIES
# =============================================================================

def git_describe(cwd: Optional[Union[str, Path]] = None) -> str:
    """Return `git describe` for the working tree, or "unknown" outside a repository"""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=cwd,
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else "unknown"


# =============================================================================
# LOGGING UTILITIES
# =============================================================================

def log_execution_time(func_name: str, start_time: float, level: int = logging.INFO) -> float:
    """
    Log the execution time of a function

    Args:
        func_name: Name of the function
        start_time: Start time from time.perf_counter()
        level: Logging level

    Returns:
        Elapsed seconds
    """
    execution_time = time.perf_counter() - start_time
    logger.log(level, f"{func_name} executed in {execution_time:.3f} seconds")
    return execution_time


def summarize_counts(counts: Dict[Any, int]) -> str:
    """Compact 'key=value' rendering for log lines"""
    return ", ".join(f"{key}={value}" for key, value in sorted(counts.items(), key=lambda kv: str(kv[0])))
