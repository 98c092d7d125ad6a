"""
Containers for time evolution, measurement snapshots and cluster-position distributions
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .lattice import BitConfig, SparseOperator
from .schemas import EvolutionMethod, Sublattice, TemporalWindow

Number = Union[Fraction, float]


@dataclass
class EvolutionPlan:
    hamiltonian: SparseOperator
    initial: Union[int, np.ndarray]
    times: np.ndarray
    method: EvolutionMethod = EvolutionMethod.AUTO
    tolerance: Optional[float] = None
    omega: float = 1.0

    def initial_vector(self) -> np.ndarray:
        psi = np.zeros(self.hamiltonian.dim, dtype=np.complex128)
        if isinstance(self.initial, (int, np.integer)):
            psi[int(self.initial)] = 1.0
        else:
            psi[:] = np.asarray(self.initial, dtype=np.complex128)
        return psi

    def initial_config(self) -> Optional[BitConfig]:
        if isinstance(self.initial, (int, np.integer)):
            return self.hamiltonian.basis.config(int(self.initial))
        return None


@dataclass(frozen=True)
class Snapshot:
    time: float
    shot: int
    bits: BitConfig
    seed_lineage: Tuple[int, ...]


@dataclass
class SnapshotBatch:
    n_padded: int
    times: np.ndarray
    time_index: np.ndarray
    shots: np.ndarray
    bits: np.ndarray
    seed: int
    stream: int = 0

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def __iter__(self) -> Iterator[Snapshot]:
        for t, ti, shot, bits in zip(self.times, self.time_index, self.shots, self.bits):
            yield Snapshot(float(t), int(shot), BitConfig(int(bits), self.n_padded),
                           (self.seed, self.stream, int(ti)))

    @classmethod
    def concatenate(cls, batches: List["SnapshotBatch"]) -> "SnapshotBatch":
        """Join batches drawn for the same chain, seed and stream"""
        first = batches[0]
        return cls(first.n_padded,
                   np.concatenate([b.times for b in batches]),
                   np.concatenate([b.time_index for b in batches]),
                   np.concatenate([b.shots for b in batches]),
                   np.concatenate([b.bits for b in batches]),
                   first.seed, first.stream)

    def subset(self, mask: np.ndarray) -> "SnapshotBatch":
        return SnapshotBatch(self.n_padded, self.times[mask], self.time_index[mask], self.shots[mask],
                             self.bits[mask], self.seed, self.stream)

    def write_ndjson(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            for snap in self:
                handle.write(json.dumps({
                    "t": snap.time, "shot": snap.shot, "bits": str(snap.bits),
                    "seed_lineage": list(snap.seed_lineage),
                }, sort_keys=True) + "\n")
        return path


@dataclass
class EnsembleMember:
    pattern: Tuple[int, ...]
    dimension: int
    batch: SnapshotBatch


@dataclass
class TemporalEnsemble:
    n_atoms: int
    window: TemporalWindow
    members: Dict[Tuple[int, ...], EnsembleMember] = field(default_factory=dict)
    n_c: Optional[int] = None
    required: Optional[List[Tuple[int, ...]]] = None


@dataclass
class SliomDistribution:
    """Weights of the k-th cluster's doubled center position"""

    k: int
    weights: Dict[int, Number]
    n_sites: int

    @property
    def total(self) -> Number:
        return sum(self.weights.values(), Fraction(0))

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.array(sorted(self.weights), dtype=np.int64)
        ws = np.array([float(self.weights[x]) for x in xs], dtype=np.float64)
        return xs, ws

    def sublattice(self, which: Sublattice) -> Tuple[np.ndarray, np.ndarray]:
        """Positions in sites and weights restricted to integer or half-integer centers"""
        xs, ws = self.as_arrays()
        parity = 0 if which == Sublattice.INTEGER else 1
        keep = (xs % 2) == parity
        return xs[keep] / 2.0, ws[keep]

    def normalized(self) -> "SliomDistribution":
        total = self.total
        if total == 0:
            return self
        return SliomDistribution(self.k, {x: w / total for x, w in self.weights.items()}, self.n_sites)

    def mirrored(self, k: int) -> "SliomDistribution":
        """Image under chain inversion, relabelled as cluster k"""
        return SliomDistribution(k, {2 * (self.n_sites + 1) - x: w for x, w in self.weights.items()}, self.n_sites)
