"""
Blockade-constrained configuration space of the padded chain
"""

import logging
import time
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..config import settings
from ..exceptions import CapacityError, ConstraintViolation
from ..models.lattice import BitConfig, BlockadedBasis
from ..models.schemas import ChainSpec
from ..utils.helpers import generate_hash, log_execution_time, write_json

logger = logging.getLogger(__name__)

PAD = "gg"


@lru_cache(maxsize=None)
def fibonacci(n: int) -> int:
    """F_1 = F_2 = 1"""
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def pad(raw: str) -> BitConfig:
    """Add the two g atoms on each side of a physical string"""
    if not raw:
        raise ConstraintViolation("empty configuration")
    if set(raw) - {"g", "r"}:
        raise ConstraintViolation(f"invalid symbol in '{raw}'")
    if len(raw) > 60:
        raise ConstraintViolation(f"chain of {len(raw)} atoms exceeds 60")
    return BitConfig.from_string(PAD + raw + PAD)


def parse_config(text: str, n_atoms: Optional[int] = None) -> BitConfig:
    """
    Accept a padded or a physical g/r string

    A string is taken as padded when its length matches ``n_atoms + 4`` (or, without
    ``n_atoms``, when it already starts and ends with the padding).
    """
    text = text.strip()
    if n_atoms is not None:
        if len(text) == n_atoms:
            return pad(text)
        if len(text) == n_atoms + 4:
            config = BitConfig.from_string(text)
            if not has_padding(config):
                raise ConstraintViolation(f"padding of '{text}' is not g")
            return config
        raise ConstraintViolation(f"'{text}' has length {len(text)}, expected {n_atoms} or {n_atoms + 4}")
    if len(text) >= 5 and text.startswith(PAD) and text.endswith(PAD):
        return BitConfig.from_string(text)
    return pad(text)


def has_padding(config: BitConfig) -> bool:
    n = config.n_padded
    return not any(config.occupied(i) for i in (1, 2, n - 1, n))


def is_blockaded(config: BitConfig) -> bool:
    return (config.bits & (config.bits >> 1)) == 0


def blockade_mask(states: np.ndarray) -> np.ndarray:
    """True where no two adjacent atoms are both excited"""
    return (states & (states >> 1)) == 0


def cluster_counts(states: np.ndarray, n_padded: int) -> np.ndarray:
    """N_c = 1 + sum_i Q_i P_{i+2}, valid on blockaded padded states"""
    counts = np.ones(len(states), dtype=np.int64)
    for i in range(1, n_padded - 1):
        q = (states >> (n_padded - i)) & 1
        p = 1 - ((states >> (n_padded - i - 2)) & 1)
        counts += q * p
    return counts


def enumerate_blockaded(spec: ChainSpec, max_states: Optional[int] = None) -> BlockadedBasis:
    """
    Enumerate all padded configurations without neighbouring excitations

    Args:
        spec: Chain specification
        max_states: Capacity guard, defaults to settings.max_basis_states

    Returns:
        Basis sorted lexicographically with g < r
    """
    limit = settings.max_basis_states if max_states is None else max_states
    expected = fibonacci(spec.n_atoms + 2)
    if expected > limit:
        raise CapacityError(f"Blockaded basis for N_a={spec.n_atoms} has {expected} states, limit is {limit}")

    start = time.perf_counter()
    # Strings grouped by last symbol, extended one atom at a time
    ends_g = np.zeros(1, dtype=np.int64)
    ends_r = np.ones(1, dtype=np.int64)
    for _ in range(spec.n_atoms - 1):
        ends_g, ends_r = np.concatenate([ends_g, ends_r]) << 1, (ends_g << 1) | 1
    states = np.sort(np.concatenate([ends_g, ends_r]) << 2)

    if states.shape[0] != expected:
        raise RuntimeError(f"enumerated {states.shape[0]} states, expected {expected}")
    log_execution_time(f"enumerate_blockaded(N_a={spec.n_atoms})", start, logging.DEBUG)
    logger.info(f"Enumerated {states.shape[0]} blockaded states for N_a={spec.n_atoms}")
    return BlockadedBasis(spec, states, blockaded=True)


def enumerate_full(spec: ChainSpec) -> BlockadedBasis:
    """All 2^N_a padded configurations, for unconstrained models"""
    if spec.n_atoms > settings.full_space_max_atoms:
        raise CapacityError(
            f"Full space for N_a={spec.n_atoms} exceeds the limit of {settings.full_space_max_atoms} atoms"
        )
    states = np.arange(1 << spec.n_atoms, dtype=np.int64) << 2
    logger.info(f"Enumerated {states.shape[0]} unconstrained states for N_a={spec.n_atoms}")
    return BlockadedBasis(spec, states, blockaded=False)


def index_of(basis: BlockadedBasis, config: BitConfig) -> int:
    """Ordinal of a configuration; NotFoundError when absent"""
    if config.n_padded != basis.n_padded:
        raise ConstraintViolation(f"configuration length {config.n_padded} does not match basis {basis.n_padded}")
    if basis.blockaded and not is_blockaded(config):
        raise ConstraintViolation(f"{config} violates the blockade")
    return int(basis.lookup([config.bits])[0])


def dump_basis(basis: BlockadedBasis, directory: Union[str, Path]) -> Tuple[Path, Path]:
    """Write one padded string per line plus a header carrying a checksum of the lines"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = "".join(line + "\n" for line in basis.strings())
    lines_path = directory / "basis.txt"
    lines_path.write_text(text, encoding="utf-8")
    header_path = write_json(directory / "basis_header.json", {
        "n_atoms": basis.spec.n_atoms,
        "count": len(basis),
        "blockaded": basis.blockaded,
        "checksum": generate_hash(text),
    })
    return lines_path, header_path
