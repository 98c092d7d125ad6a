"""
Numeric containers for configurations, bases and operators

Position i (1-based, padding included) of an N-site padded chain is stored at
bit N - i, so integer order equals lexicographic order with g < r.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .schemas import ChainSpec, SliomPattern
from ..exceptions import NotFoundError
from ..utils.helpers import write_json


@dataclass(frozen=True)
class BitConfig:
    bits: int
    n_padded: int

    @classmethod
    def from_string(cls, text: str) -> "BitConfig":
        if not text or set(text) - {"g", "r"}:
            raise ValueError(f"configuration '{text}' must be a non-empty g/r string")
        return cls(int(text.replace("g", "0").replace("r", "1"), 2), len(text))

    def __str__(self) -> str:
        return format(self.bits, f"0{self.n_padded}b").replace("0", "g").replace("1", "r")

    def occupied(self, position: int) -> bool:
        """Rydberg occupation Q at a 1-based padded position"""
        if position < 1 or position > self.n_padded:
            return False
        return bool((self.bits >> (self.n_padded - position)) & 1)

    @property
    def n_atoms(self) -> int:
        return self.n_padded - 4

    @property
    def physical(self) -> str:
        return str(self)[2:-2]


@dataclass(frozen=True)
class BlockadedBasis:
    """Sorted packed configurations; `blockaded=False` marks the full product space"""

    spec: ChainSpec
    states: np.ndarray
    blockaded: bool = True

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def n_padded(self) -> int:
        return self.spec.n_padded

    def config(self, ordinal: int) -> BitConfig:
        return BitConfig(int(self.states[ordinal]), self.n_padded)

    def strings(self) -> List[str]:
        return [str(BitConfig(int(bits), self.n_padded)) for bits in self.states]

    def lookup(self, bits: Union[np.ndarray, Sequence[int]], strict: bool = True) -> np.ndarray:
        """
        Ordinals of packed configurations

        Args:
            bits: Packed configurations
            strict: Raise on absent members instead of returning -1

        Returns:
            int64 array of ordinals
        """
        bits = np.asarray(bits, dtype=np.int64)
        idx = np.searchsorted(self.states, bits)
        clipped = np.minimum(idx, len(self) - 1)
        found = self.states[clipped] == bits
        if strict and not np.all(found):
            missing = BitConfig(int(bits[~found][0]), self.n_padded)
            raise NotFoundError(f"Configuration {missing} is not in the basis")
        return np.where(found, clipped, -1).astype(np.int64)

    def occupations(self, positions: Optional[Sequence[int]] = None) -> np.ndarray:
        """Q matrix of shape (dim, len(positions)), physical positions by default"""
        if positions is None:
            positions = self.spec.physical_positions
        columns = [(self.states >> (self.n_padded - i)) & 1 for i in positions]
        return np.stack(columns, axis=1).astype(np.int8)

    def restricted(self, ordinals: Sequence[int]) -> "BlockadedBasis":
        ordinals = np.unique(np.asarray(ordinals, dtype=np.int64))
        return BlockadedBasis(self.spec, self.states[ordinals], self.blockaded)


@dataclass(frozen=True)
class SparseOperator:
    matrix: sp.csr_matrix
    basis: BlockadedBasis
    label: str
    hermitian: bool = True
    harmonic: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def hermitian_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def restrict(self, ordinals: Sequence[int]) -> "SparseOperator":
        """Operator projected onto the span of the given basis ordinals"""
        ordinals = np.unique(np.asarray(ordinals, dtype=np.int64))
        sub = self.matrix[ordinals][:, ordinals].tocsr()
        return SparseOperator(sub, self.basis.restricted(ordinals), self.label, self.hermitian, self.harmonic)

    def export(self, directory: Union[str, Path]) -> Tuple[Path, Path]:
        """Write the nonzero entries as 'row col re im' lines plus a JSON header"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        data_path = directory / f"{self.label}.coo"
        with open(data_path, "w", encoding="utf-8") as handle:
            values = coo.data[order].astype(np.complex128)
            for r, c, v in zip(coo.row[order], coo.col[order], values):
                handle.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
        meta_path = write_json(directory / f"{self.label}.json", {
            "label": self.label,
            "columns": ["row", "col", "re", "im"],
            "dim": self.dim,
            "nnz": self.nnz,
            "n_atoms": self.basis.spec.n_atoms,
            "blockaded": self.basis.blockaded,
            "hermitian": self.hermitian,
            "harmonic": self.harmonic,
        })
        return data_path, meta_path


@dataclass(frozen=True)
class DisorderRealization:
    seed: int
    sigma_r: float
    displacements: np.ndarray
    couplings: np.ndarray = field(repr=False)

    @property
    def n_atoms(self) -> int:
        return int(self.displacements.shape[0])


@dataclass
class FragmentTable:
    basis: BlockadedBasis
    fragment_ids: np.ndarray
    members: Dict[int, np.ndarray]
    patterns: Dict[int, SliomPattern]

    def __len__(self) -> int:
        return len(self.members)

    def fragment_of(self, ordinal: int) -> int:
        return int(self.fragment_ids[ordinal])

    def sizes(self) -> Dict[int, int]:
        return {fid: int(m.shape[0]) for fid, m in self.members.items()}

    def sector(self, n_c: int) -> List[int]:
        return sorted(fid for fid, p in self.patterns.items() if p.n_c == n_c)
