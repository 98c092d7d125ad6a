"""
Krylov fragments of H_LGT: live discovery on a basis and closed-form census
"""

import itertools
import math
import logging
import time
from collections import deque
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..exceptions import AdmissibilityError, ConfigError
from ..models.lattice import BitConfig, BlockadedBasis, FragmentTable, SparseOperator
from ..models.schemas import LargestSector, SectorCensus, SliomPattern, SplitEntry
from ..utils.helpers import log_execution_time
from .basis import blockade_mask, fibonacci, index_of
from .lgtmap import decompose, sliom_pattern

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def binomial(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


# =============================================================================
# LIVE DISCOVERY
# =============================================================================

def lgt_moves(states: np.ndarray, n_padded: int, positions) -> np.ndarray:
    """All configurations reachable by one H_LGT flip from the given states"""
    def q(j):
        if j < 1 or j > n_padded:
            return np.zeros(states.shape[0], dtype=bool)
        return ((states >> (n_padded - j)) & 1).astype(bool)

    targets = []
    for i in positions:
        allowed = ~q(i - 1) & ~q(i + 1) & (q(i - 2) ^ q(i + 2))
        flipped = states[allowed] ^ (1 << (n_padded - i))
        targets.append(flipped[blockade_mask(flipped)])
    return np.concatenate(targets) if targets else np.zeros(0, dtype=np.int64)


def _label_fragments(basis: BlockadedBasis, labels: np.ndarray) -> FragmentTable:
    """Relabel components by their smallest member ordinal and attach SLIOM patterns"""
    n_components = int(labels.max()) + 1 if labels.size else 0
    first = np.full(n_components, len(basis), dtype=np.int64)
    np.minimum.at(first, labels, np.arange(len(basis), dtype=np.int64))
    fragment_ids = first[labels]
    order = np.argsort(fragment_ids, kind="stable")
    sorted_ids = fragment_ids[order]
    boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
    members: Dict[int, np.ndarray] = {}
    patterns: Dict[int, SliomPattern] = {}
    for chunk in np.split(order, boundaries):
        fid = int(fragment_ids[chunk[0]])
        members[fid] = np.sort(chunk)
        patterns[fid] = sliom_pattern(decompose(basis.config(fid)))
    return FragmentTable(basis, fragment_ids, members, patterns)


def find_fragments(basis: BlockadedBasis, h_lgt: SparseOperator) -> FragmentTable:
    """
    Connected components of the H_LGT adjacency graph

    Args:
        basis: Blockaded basis the operator is built on
        h_lgt: H_LGT on that basis

    Returns:
        FragmentTable whose ids are the smallest member ordinals
    """
    if h_lgt.dim != len(basis):
        raise ConfigError(f"operator dimension {h_lgt.dim} does not match basis {len(basis)}")
    start = time.perf_counter()
    n_components, labels = connected_components(h_lgt.matrix, directed=False)
    table = _label_fragments(basis, labels)
    log_execution_time(f"find_fragments(dim={len(basis)})", start, logging.DEBUG)
    logger.info(f"Found {n_components} fragments in a basis of {len(basis)} states")
    return table


def _frontier_component(basis: BlockadedBasis, seed: int, labels: np.ndarray, label: int) -> np.ndarray:
    positions = list(basis.spec.physical_positions)
    labels[seed] = label
    frontier = basis.states[[seed]]
    found = [seed]
    while frontier.size:
        reached = basis.lookup(np.unique(lgt_moves(frontier, basis.n_padded, positions)))
        fresh = reached[labels[reached] < 0]
        labels[fresh] = label
        found.extend(fresh.tolist())
        frontier = basis.states[fresh]
    return np.sort(np.asarray(found, dtype=np.int64))


def find_fragments_bfs(basis: BlockadedBasis) -> FragmentTable:
    """Same partition as find_fragments, by frontier expansion without a matrix"""
    start = time.perf_counter()
    labels = np.full(len(basis), -1, dtype=np.int64)
    label = 0
    for seed in range(len(basis)):
        if labels[seed] < 0:
            _frontier_component(basis, seed, labels, label)
            label += 1
    table = _label_fragments(basis, labels)
    log_execution_time(f"find_fragments_bfs(dim={len(basis)})", start, logging.DEBUG)
    return table


def fragment_of(basis: BlockadedBasis, config: BitConfig) -> np.ndarray:
    """Sorted ordinals of the fragment containing config"""
    seed = index_of(basis, config)
    members = deque([seed])
    seen = {seed}
    positions = list(basis.spec.physical_positions)
    while members:
        ordinal = members.popleft()
        neighbours = basis.lookup(lgt_moves(basis.states[[ordinal]], basis.n_padded, positions))
        for nb in neighbours.tolist():
            if nb not in seen:
                seen.add(nb)
                members.append(nb)
    return np.array(sorted(seen), dtype=np.int64)


# =============================================================================
# CLOSED-FORM CENSUS
# =============================================================================

def is_admissible(n_atoms: int, n_q: int, n_0: int) -> bool:
    rest = n_atoms + 5 - 3 * n_q - 4 * n_0
    return n_q >= 0 and n_0 >= 0 and n_q + n_0 >= 1 and rest >= 0 and rest % 2 == 0


def fragment_dim(n_atoms: int, n_q: int, n_0: int) -> int:
    """Dimension of any fragment with n_q charged and n_0 neutral clusters"""
    if n_q < 0 or n_0 < 0:
        raise AdmissibilityError(n_atoms, n_q, n_0, "negative cluster count")
    if n_q + n_0 < 1:
        raise AdmissibilityError(n_atoms, n_q, n_0, "no clusters")
    rest = n_atoms + 5 - 3 * n_q - 4 * n_0
    if rest < 0:
        raise AdmissibilityError(n_atoms, n_q, n_0, "clusters do not fit")
    if rest % 2:
        raise AdmissibilityError(n_atoms, n_q, n_0, "parity")
    return binomial((n_atoms + n_q + 1) // 2, rest // 2)


def admissible_splits(n_atoms: int) -> Iterator[Tuple[int, int, int]]:
    """(N_q, N_0, k) with 3 N_q + 4 N_0 + 2 k = N_a + 5"""
    total = n_atoms + 5
    for n_0 in range(total // 4 + 1):
        rest = total - 4 * n_0
        for n_q in range((n_atoms + 1) % 2, rest // 3 + 1, 2):
            if n_q + n_0 >= 1:
                yield n_q, n_0, (rest - 3 * n_q) // 2


def count_krylov(n_atoms: int) -> int:
    return sum(binomial(n_q + n_0, n_q) for n_q, n_0, _ in admissible_splits(n_atoms))


def total_dim(n_atoms: int) -> int:
    """Sum of all fragment dimensions; equals F_{N_a+2}"""
    return sum(binomial(n_q + n_0, n_q) * fragment_dim(n_atoms, n_q, n_0)
               for n_q, n_0, _ in admissible_splits(n_atoms))


def frozen_fraction(n_atoms: int) -> Fraction:
    """Share of fragments that are single states"""
    frozen = sum(binomial(n_q + n_0, n_q) for n_q, n_0, _ in admissible_splits(n_atoms)
                 if fragment_dim(n_atoms, n_q, n_0) == 1)
    return Fraction(frozen, count_krylov(n_atoms))


def sector_dimension(n_atoms: int, n_c: int) -> int:
    return sum(binomial(n_c, n_q) * fragment_dim(n_atoms, n_q, n_c - n_q)
               for n_q in range(n_c + 1) if is_admissible(n_atoms, n_q, n_c - n_q))


def sector_fragment_count(n_atoms: int, n_c: int) -> int:
    """Number of fragments with exactly n_c clusters (2^(n_c-1) away from the edges of the range)"""
    return sum(binomial(n_c, n_q) for n_q in range(n_c + 1) if is_admissible(n_atoms, n_q, n_c - n_q))


def sector_patterns(n_atoms: int, n_c: int) -> List[Tuple[int, ...]]:
    """All +/-1 patterns of length n_c realizable on the chain, in lexicographic order"""
    return [p for p in itertools.product((1, -1), repeat=n_c)
            if is_admissible(n_atoms, p.count(1), p.count(-1))]


def sector_range(n_atoms: int) -> range:
    return range(1, (n_atoms + 5) // 3 + 1)


def largest_sector(n_atoms: int) -> LargestSector:
    """Cluster number with the largest sector dimension (smallest n_c on ties)"""
    best_n_c, best_dim = 1, -1
    for n_c in sector_range(n_atoms):
        dim = sector_dimension(n_atoms, n_c)
        if dim > best_dim:
            best_n_c, best_dim = n_c, dim
    return LargestSector(n_atoms=n_atoms, n_c=best_n_c, dimension=best_dim, estimate=(n_atoms + 3) // 6)


def sector_census(n_atoms: int) -> SectorCensus:
    splits = [
        SplitEntry(n_q=n_q, n_0=n_0, k=k, dimension=fragment_dim(n_atoms, n_q, n_0),
                   patterns=binomial(n_q + n_0, n_q))
        for n_q, n_0, k in admissible_splits(n_atoms)
    ]
    n_krylov = sum(s.patterns for s in splits)
    d_total = sum(s.patterns * s.dimension for s in splits)
    d_max = max(s.dimension for s in splits)
    frozen = sum(s.patterns for s in splits if s.dimension == 1)
    sector_dims: Dict[int, int] = {}
    sector_frags: Dict[int, int] = {}
    for s in splits:
        n_c = s.n_q + s.n_0
        sector_dims[n_c] = sector_dims.get(n_c, 0) + s.patterns * s.dimension
        sector_frags[n_c] = sector_frags.get(n_c, 0) + s.patterns
    if d_total != fibonacci(n_atoms + 2):
        raise RuntimeError(f"census total {d_total} differs from F_{n_atoms + 2}")
    return SectorCensus(
        n_atoms=n_atoms,
        splits=splits,
        n_krylov=n_krylov,
        d_total=d_total,
        d_max=d_max,
        frozen_count=frozen,
        frozen_fraction=frozen / n_krylov,
        sector_dimensions=dict(sorted(sector_dims.items())),
        sector_fragments=dict(sorted(sector_frags.items())),
        largest_sector=largest_sector(n_atoms),
        strong_ratio=d_max / d_total,
    )


def growth_rate(n_atoms_list: List[int]) -> float:
    """Exponential base b of N_Krylov ~ b^N_a from a log-linear least-squares fit"""
    if len(n_atoms_list) < 2:
        raise ConfigError("growth fit needs at least two sizes")
    x = np.asarray(n_atoms_list, dtype=float)
    y = np.log([float(count_krylov(n)) for n in n_atoms_list])
    slope = np.polyfit(x, y, 1)[0]
    return float(np.exp(slope))
