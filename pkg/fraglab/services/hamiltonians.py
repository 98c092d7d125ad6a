"""
Sparse Hamiltonians on the blockaded (or full) basis

Built the way small exact-diagonalization codes do it: for every site, flip the bit
on all basis states at once, keep the flips allowed by the local projectors and
look the targets up by binary search.
"""

import logging
import time
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from ..exceptions import ConfigError
from ..models.lattice import BlockadedBasis, DisorderRealization, SparseOperator
from ..models.schemas import LadderScale, RydbergParams
from ..utils.helpers import log_execution_time
from .basis import blockade_mask, cluster_counts

logger = logging.getLogger(__name__)

Condition = Callable[[np.ndarray, int], np.ndarray]


class _Projectors:
    """Q (excited) and P (ground) projectors on packed states of one chain length"""

    def __init__(self, n_padded: int):
        self.n_padded = n_padded

    def q(self, states: np.ndarray, i: int) -> np.ndarray:
        if i < 1 or i > self.n_padded:
            return np.zeros(states.shape[0], dtype=bool)
        return ((states >> (self.n_padded - i)) & 1).astype(bool)

    def p(self, states: np.ndarray, i: int) -> np.ndarray:
        return ~self.q(states, i)


def _flip_operator(basis: BlockadedBasis, amplitude: float, condition: Condition, label: str,
                   hermitian: bool = True, harmonic: Optional[int] = None) -> SparseOperator:
    """
    Sum over physical sites of amplitude * |flip_i(s)><s| for states passing condition

    Args:
        basis: Basis the operator acts on
        amplitude: Matrix element of every allowed flip
        condition: (states, i) -> bool mask of source states allowed to flip at i
        label: Operator name

    Returns:
        SparseOperator in CSR form
    """
    n_padded = basis.n_padded
    rows, cols = [], []
    for i in basis.spec.physical_positions:
        mask = condition(basis.states, i)
        flipped = basis.states ^ (1 << (n_padded - i))
        if basis.blockaded:
            mask &= blockade_mask(flipped)
        src = np.flatnonzero(mask)
        if src.size == 0:
            continue
        dst = basis.lookup(flipped[src], strict=False)
        keep = dst >= 0
        rows.append(dst[keep])
        cols.append(src[keep])
    dim = len(basis)
    if rows:
        row = np.concatenate(rows)
        col = np.concatenate(cols)
    else:
        row = col = np.zeros(0, dtype=np.int64)
    data = np.full(row.shape[0], amplitude, dtype=np.float64)
    matrix = sp.csr_matrix((data, (row, col)), shape=(dim, dim))
    return SparseOperator(matrix, basis, label, hermitian, harmonic)


def _diagonal_operator(basis: BlockadedBasis, values: np.ndarray, label: str) -> SparseOperator:
    matrix = sp.diags(values.astype(np.float64), format="csr")
    return SparseOperator(matrix, basis, label)


def _pair_couplings(params: RydbergParams, displacements: np.ndarray, max_range: int) -> np.ndarray:
    """couplings[r-1, a] couples physical atoms a and a+r (0-based) at displaced positions"""
    n_atoms = displacements.shape[0]
    couplings = np.zeros((max_range, n_atoms))
    for r in range(1, max_range + 1):
        a = np.arange(n_atoms - r)
        dx = r * params.spacing + displacements[a + r, 0] - displacements[a, 0]
        dy = displacements[a + r, 1] - displacements[a, 1]
        couplings[r - 1, a] = params.coupling_at(np.hypot(dx, dy))
    return couplings


def _rydberg_matrix(basis: BlockadedBasis, omega: float, delta: float, couplings: np.ndarray,
                    label: str) -> SparseOperator:
    """(Omega/2) sum X_i - Delta sum Q_i + sum_pairs V_ij Q_i Q_j"""
    occ = basis.occupations().astype(np.float64)
    n_atoms = basis.spec.n_atoms
    energies = -delta * occ.sum(axis=1)
    for r in range(1, couplings.shape[0] + 1):
        for a in range(n_atoms - r):
            if couplings[r - 1, a] != 0.0:
                energies += couplings[r - 1, a] * occ[:, a] * occ[:, a + r]
    flips = _flip_operator(basis, omega / 2, lambda s, i: np.ones(s.shape[0], dtype=bool), label)
    matrix = (flips.matrix + sp.diags(energies, format="csr")).tocsr()
    return SparseOperator(matrix, basis, label)


def _check_range(max_range: int) -> None:
    if not 1 <= max_range <= 3:
        raise ConfigError(f"max_range must be 1, 2 or 3, got {max_range}")


def build_h_ryd(basis: BlockadedBasis, params: RydbergParams, max_range: int = 2,
                full_space: Optional[bool] = None) -> SparseOperator:
    """
    Rydberg chain Hamiltonian with van der Waals tails up to max_range neighbours

    The mode follows the basis: on enumerate_full states the V0 term and rr flips are
    kept, on the blockaded basis they are projected out. full_space, when given, must
    agree with the basis.
    """
    _check_range(max_range)
    if full_space is not None and full_space == basis.blockaded:
        kind = "blockaded" if basis.blockaded else "full"
        raise ConfigError(f"full_space={full_space} does not match the {kind} basis")
    start = time.perf_counter()
    couplings = _pair_couplings(params, np.zeros((basis.spec.n_atoms, 2)), max_range)
    op = _rydberg_matrix(basis, params.omega, params.detuning, couplings, "H_ryd")
    log_execution_time(f"build_h_ryd(dim={len(basis)})", start, logging.DEBUG)
    return op


def build_h_lgt(basis: BlockadedBasis, w: float) -> SparseOperator:
    """Flip i when both neighbours are g and exactly one of i-2, i+2 is r"""
    proj = _Projectors(basis.n_padded)

    def condition(s: np.ndarray, i: int) -> np.ndarray:
        side = proj.q(s, i - 2) ^ proj.q(s, i + 2)
        return proj.p(s, i - 1) & proj.p(s, i + 1) & side

    return _flip_operator(basis, w, condition, "H_LGT")


def build_h_pxq(basis: BlockadedBasis, omega: float) -> SparseOperator:
    """Flip i when exactly one nearest neighbour is excited"""
    proj = _Projectors(basis.n_padded)
    return _flip_operator(basis, omega / 2, lambda s, i: proj.q(s, i - 1) ^ proj.q(s, i + 1), "H_PXQ")


def build_h_pert(basis: BlockadedBasis, omega: float) -> SparseOperator:
    """(Omega/2) sum_i X_i over physical atoms, projected onto the basis"""
    return _flip_operator(basis, omega / 2, lambda s, i: np.ones(s.shape[0], dtype=bool), "H_pert")


def build_h0(basis: BlockadedBasis, v0: float) -> SparseOperator:
    """V0 sum_i Q_i Q_{i+1}"""
    occ = basis.occupations().astype(np.float64)
    return _diagonal_operator(basis, v0 * (occ[:, :-1] * occ[:, 1:]).sum(axis=1), "H0")


def build_h1(basis: BlockadedBasis, v1: float) -> SparseOperator:
    """-V1 sum_i Q_i P_{i+2}, equal to -V1 (N_c - 1) on blockaded states"""
    return _diagonal_operator(basis, -v1 * (cluster_counts(basis.states, basis.n_padded) - 1), "H1")


def build_nc_operator(basis: BlockadedBasis) -> SparseOperator:
    """Diagonal cluster-number operator 1 + sum_i Q_i P_{i+2}"""
    return _diagonal_operator(basis, cluster_counts(basis.states, basis.n_padded), "N_c")


def _ladder_conditions(n_padded: int, scale: LadderScale) -> Dict[int, Condition]:
    proj = _Projectors(n_padded)
    q, p = proj.q, proj.p

    if scale == LadderScale.V0:
        def one_excited_neighbour(s, i):
            return q(s, i - 1) ^ q(s, i + 1)

        return {
            -2: lambda s, i: q(s, i) & q(s, i - 1) & q(s, i + 1),
            -1: lambda s, i: q(s, i) & one_excited_neighbour(s, i),
            0: lambda s, i: p(s, i - 1) & p(s, i + 1),
            1: lambda s, i: p(s, i) & one_excited_neighbour(s, i),
            2: lambda s, i: p(s, i) & q(s, i - 1) & q(s, i + 1),
        }

    def free(s, i):
        return p(s, i - 1) & p(s, i + 1)

    return {
        # ggrgg -> ggggg and rgrgr -> rgggr raise the cluster number
        -1: lambda s, i: free(s, i) & ((p(s, i) & p(s, i - 2) & p(s, i + 2)) | (q(s, i) & q(s, i - 2) & q(s, i + 2))),
        0: lambda s, i: free(s, i) & (q(s, i - 2) ^ q(s, i + 2)),
        1: lambda s, i: free(s, i) & ((q(s, i) & p(s, i - 2) & p(s, i + 2)) | (p(s, i) & q(s, i - 2) & q(s, i + 2))),
    }


def build_ladder_ops(basis: BlockadedBasis, scale: LadderScale, omega: float) -> List[SparseOperator]:
    """
    Decompose the perturbation (Omega/2) sum X into eigenoperators of an unperturbed part

    For scale V0 (full space) the pieces T_m satisfy [H0, T_m] = m V0 T_m with
    m in -2..2. For scale V1 (blockaded space) they satisfy [H1, T_m] = m V1 T_m with
    m in -1..1 and T_0 equals H_LGT at w = Omega/2. The pieces sum to the projected
    perturbation.

    Args:
        basis: Full basis for V0, blockaded basis for V1
        scale: Which unperturbed energy scale to organize by
        omega: Rabi frequency

    Returns:
        Operators ordered by increasing m, each tagged with its harmonic
    """
    if scale == LadderScale.V0 and basis.blockaded:
        raise ConfigError("V0 ladder operators act on the unconstrained space")
    if scale == LadderScale.V1 and not basis.blockaded:
        raise ConfigError("V1 ladder operators act on the blockaded space")
    conditions = _ladder_conditions(basis.n_padded, scale)
    return [
        _flip_operator(basis, omega / 2, conditions[m], f"T[{scale.value},{m:+d}]", hermitian=(m == 0), harmonic=m)
        for m in sorted(conditions)
    ]


def build_h_eff2(basis: BlockadedBasis, omega: float, v1: float) -> SparseOperator:
    """
    Second-order correction within an N_c block, scale J = Omega^2 / (4 V1)

    Diagonal part: J sum_i P_{i-1} Z_i P_{i+1} (P_{i-2} P_{i+2} - Q_{i-2} Q_{i+2}) with Z = P - Q.
    Exchange part: -J moves an isolated excitation from i-1 to i+1 across an empty site
    when i-3 and i+3 agree (both r or both g). Each exchange is the product of two
    H_LGT bond flips, so the operator is block diagonal on the H_LGT fragments. Signs
    follow the ladder-operator commutator [T_{+1}, T_{-1}] / V1, of which this is the
    fragment-preserving part.

    Args:
        basis: Blockaded basis
        omega: Rabi frequency
        v1: Next-nearest-neighbour interaction

    Returns:
        Real symmetric SparseOperator
    """
    if v1 <= 0:
        raise ConfigError("V1 must be positive")
    if not basis.blockaded:
        raise ConfigError("the second-order correction acts on the blockaded space")
    scale = omega ** 2 / (4 * v1)
    proj = _Projectors(basis.n_padded)
    q, p = proj.q, proj.p
    states = basis.states

    diagonal = np.zeros(len(basis))
    for i in basis.spec.physical_positions:
        free = p(states, i - 1) & p(states, i + 1)
        z = np.where(q(states, i), -1.0, 1.0)
        outer = (p(states, i - 2) & p(states, i + 2)).astype(np.float64) - (q(states, i - 2) & q(states, i + 2))
        diagonal += free * z * outer

    rows, cols = [], []
    n_padded = basis.n_padded
    for i in range(4, n_padded - 2):
        mask = (p(states, i - 2) & q(states, i - 1) & p(states, i) & p(states, i + 1) & p(states, i + 2)
                & ((q(states, i - 3) & q(states, i + 3)) | (p(states, i - 3) & p(states, i + 3))))
        src = np.flatnonzero(mask)
        if src.size == 0:
            continue
        moved = states[src] ^ (1 << (n_padded - i + 1)) ^ (1 << (n_padded - i - 1))
        dst = basis.lookup(moved, strict=False)
        keep = dst >= 0
        rows.append(dst[keep])
        cols.append(src[keep])

    dim = len(basis)
    if rows:
        row = np.concatenate(rows)
        col = np.concatenate(cols)
    else:
        row = col = np.zeros(0, dtype=np.int64)
    hops = sp.csr_matrix((np.full(row.shape[0], -scale), (row, col)), shape=(dim, dim))
    matrix = (scale * sp.diags(diagonal, format="csr") + hops + hops.T).tocsr()
    matrix.eliminate_zeros()
    logger.debug(f"H_eff2 on dim={dim}: {row.shape[0]} exchange pairs, J={scale:.6g}")
    return SparseOperator(matrix, basis, "H_eff2")


def sample_disorder(params: RydbergParams, sigma_r: float, seed: int, n_atoms: int,
                    max_range: int = 3) -> DisorderRealization:
    """
    Draw in-plane position errors and the resulting pair couplings

    Each atom is displaced by an isotropic 2D Gaussian with per-axis width
    sigma_r / sqrt(2), so a chain separation fluctuates with width sigma_r.
    """
    if sigma_r < 0:
        raise ConfigError("sigma_r must be non-negative")
    _check_range(max_range)
    rng = np.random.default_rng(seed)
    displacements = rng.normal(0.0, sigma_r / np.sqrt(2.0), size=(n_atoms, 2))
    couplings = _pair_couplings(params, displacements, max_range)
    return DisorderRealization(seed=seed, sigma_r=sigma_r, displacements=displacements, couplings=couplings)


def build_h_disordered(basis: BlockadedBasis, params: RydbergParams, realization: DisorderRealization,
                       max_range: int = 2) -> SparseOperator:
    """H_ryd with the realization's couplings; identical to build_h_ryd at sigma_r = 0"""
    _check_range(max_range)
    if realization.n_atoms != basis.spec.n_atoms:
        raise ConfigError(f"realization has {realization.n_atoms} atoms, basis has {basis.spec.n_atoms}")
    if realization.couplings.shape[0] < max_range:
        raise ConfigError(f"realization covers range {realization.couplings.shape[0]}, requested {max_range}")
    couplings = realization.couplings[:max_range]
    return _rydberg_matrix(basis, params.omega, params.detuning, couplings, "H_disordered")
