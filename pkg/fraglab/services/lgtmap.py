"""
Map blockaded configurations onto the U(1) gauge theory picture

Matter site j sits between atoms j and j+1. A g-block of m >= 2 atoms starting at
atom i becomes a cluster on sites i..i+m-2; odd-length clusters carry charge,
even-length clusters are neutral. Single g atoms between excitations are vacuum.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from ..exceptions import ConstraintViolation
from ..models.lattice import BitConfig
from ..models.schemas import (
    BondDirection, Cluster, ClusterDecomposition, ClusterKind,
    ElectricStringConfig, SliomPattern, VacuumRun
)
from .basis import has_padding, is_blockaded

logger = logging.getLogger(__name__)


def default_k_max(n_sites: int) -> int:
    return (n_sites + 2) // 3


def cluster_spans(text: str) -> List[Tuple[int, int]]:
    """(left, right) site spans of every g-block of length >= 2 in a padded string"""
    spans = []
    n = len(text)
    i = 0
    while i < n:
        if text[i] != "g":
            i += 1
            continue
        j = i
        while j < n and text[j] == "g":
            j += 1
        if j - i >= 2:
            spans.append((i + 1, j - 1))
        i = j
    return spans


def _require_valid(config: BitConfig) -> None:
    if not has_padding(config):
        raise ConstraintViolation(f"{config} is not padded with g atoms")
    if not is_blockaded(config):
        raise ConstraintViolation(f"{config} violates the blockade")


def decompose(config: BitConfig) -> ClusterDecomposition:
    """Split a padded blockaded configuration into clusters and vacuum runs"""
    _require_valid(config)
    spans = cluster_spans(str(config))
    clusters = []
    for k, (left, right) in enumerate(spans, start=1):
        if (right - left + 1) % 2:
            clusters.append(Cluster(k=k, left=left, right=right, kind=ClusterKind.CHARGED,
                                    charge=-1 if left % 2 else 1))
        else:
            clusters.append(Cluster(k=k, left=left, right=right, kind=ClusterKind.NEUTRAL))
    runs = [VacuumRun(start=a.right + 1, length=b.left - a.right - 1) for a, b in zip(clusters, clusters[1:])]
    return ClusterDecomposition(n_sites=config.n_padded - 1, clusters=clusters, vacuum_runs=runs)


def reconstruct(decomp: ClusterDecomposition, n_padded: int) -> BitConfig:
    """Inverse of decompose: clusters become g-blocks, vacuum alternates r g ... r"""
    atoms = ["g"] * n_padded
    for a, b in zip(decomp.clusters, decomp.clusters[1:]):
        for atom in range(a.right + 2, b.left, 2):
            atoms[atom - 1] = "r"
    return BitConfig.from_string("".join(atoms))


def sliom_pattern(decomp: ClusterDecomposition, k_max: Optional[int] = None) -> SliomPattern:
    """Charged clusters map to +1, neutral to -1, trailing entries are 0"""
    if k_max is None:
        k_max = default_k_max(decomp.n_sites)
    if k_max < decomp.n_clusters:
        raise ConstraintViolation(f"k_max={k_max} is below the cluster count {decomp.n_clusters}")
    q = [1 if c.kind == ClusterKind.CHARGED else -1 for c in decomp.clusters]
    return SliomPattern(q=tuple(q + [0] * (k_max - len(q))))


def electric_strings(config: BitConfig) -> ElectricStringConfig:
    """Bond b is atom b; g points right on odd bonds and left on even bonds"""
    directions = []
    for b in range(1, config.n_padded + 1):
        excited = config.occupied(b)
        if b % 2:
            directions.append(BondDirection.LEFT if excited else BondDirection.RIGHT)
        else:
            directions.append(BondDirection.RIGHT if excited else BondDirection.LEFT)
    return ElectricStringConfig(directions=tuple(directions))


def site_charges(strings: ElectricStringConfig) -> List[int]:
    """rho_j = S^z_j - S^z_{j+1} for sites 1..N-1"""
    spins = strings.spins
    return [int(round(spins[j] - spins[j + 1])) for j in range(len(spins) - 1)]


def gauss_check(config: BitConfig) -> bool:
    """Odd sites allow charge {0, -1}, even sites {0, +1}"""
    charges = site_charges(electric_strings(config))
    for j, rho in enumerate(charges, start=1):
        if rho not in ((0, -1) if j % 2 else (0, 1)):
            return False
    return True


def invert(config: BitConfig) -> BitConfig:
    """Spatial inversion of the padded chain"""
    return BitConfig.from_string(str(config)[::-1])


def decomposition_record(config: BitConfig, k_max: Optional[int] = None) -> Dict[str, Any]:
    decomp = decompose(config)
    pattern = sliom_pattern(decomp, k_max)
    return {
        "config": str(config),
        "clusters": [
            {"k": c.k, "left": c.left, "right": c.right, "kind": c.kind.value, "charge": c.charge}
            for c in decomp.clusters
        ],
        "vacuum_runs": [{"start": v.start, "length": v.length} for v in decomp.vacuum_runs],
        "pattern": list(pattern.q),
        "label": pattern.label,
        "strings": electric_strings(config).arrows(),
    }
