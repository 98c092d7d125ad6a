"""
Quench dynamics, observables and simulated measurement snapshots
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config import settings
from ..exceptions import CapacityError, ConfigError, ConvergenceError, MissingFragmentError
from ..models.ensemble import (
    EnsembleMember, EvolutionPlan, SliomDistribution, SnapshotBatch, TemporalEnsemble
)
from ..models.lattice import BitConfig, BlockadedBasis, SparseOperator
from ..models.schemas import (
    EnsembleSeeding, EvolutionMethod, PostselectionReport, PostselectionSpec, RydbergParams, SpamModel,
    TemporalWindow
)
from ..utils.helpers import log_execution_time
from .basis import blockade_mask, cluster_counts, index_of
from .fragments import fragment_dim, fragment_of, sector_patterns
from .hamiltonians import build_h_disordered, sample_disorder
from .lgtmap import cluster_spans, decompose, sliom_pattern

logger = logging.getLogger(__name__)

BREAKDOWN = 1e-13


# =============================================================================
# PROPAGATION
# =============================================================================

def _lanczos(matrix, v0: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """
    Orthonormal Krylov basis of a Hermitian matrix with full reorthogonalization

    Returns:
        (V, alpha, beta, beta_next) with V of shape (j, n) for j <= m steps
    """
    n = v0.shape[0]
    m = max(1, min(m, n))
    V = np.zeros((m, n), dtype=np.complex128)
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    V[0] = v0
    w = matrix @ V[0]
    alpha[0] = np.vdot(V[0], w).real
    w = w - alpha[0] * V[0]
    for j in range(1, m):
        b = np.linalg.norm(w)
        if b < BREAKDOWN:
            return V[:j], alpha[:j], beta[: j - 1], 0.0
        beta[j - 1] = b
        V[j] = w / b
        w = matrix @ V[j] - b * V[j - 1]
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
    return V, alpha, beta, float(np.linalg.norm(w))


class Propagator:
    """
    exp(-i H t) acting on states, by full diagonalization or by Lanczos steps

    The dense path diagonalizes once and is reused for every time. The Krylov path
    advances in substeps whose a posteriori error estimate stays below the tolerance,
    halving the step on rejection.
    """

    def __init__(self, operator: SparseOperator, method: EvolutionMethod = EvolutionMethod.AUTO,
                 tolerance: Optional[float] = None, krylov_dim: Optional[int] = None,
                 max_halvings: Optional[int] = None):
        self.operator = operator
        self.tolerance = settings.krylov_tolerance if tolerance is None else tolerance
        self.krylov_dim = krylov_dim or settings.krylov_dim
        self.max_halvings = settings.krylov_max_halvings if max_halvings is None else max_halvings
        self.substeps = 0
        if method == EvolutionMethod.AUTO:
            method = EvolutionMethod.DENSE if operator.dim <= settings.dense_max_dim else EvolutionMethod.KRYLOV
        if method == EvolutionMethod.DENSE and operator.dim > settings.dense_max_dim:
            raise CapacityError(f"dense propagation of dimension {operator.dim} exceeds {settings.dense_max_dim}")
        self.method = method
        self._energies: Optional[np.ndarray] = None
        self._vectors: Optional[np.ndarray] = None
        if method == EvolutionMethod.DENSE:
            start = time.perf_counter()
            self._energies, self._vectors = scipy.linalg.eigh(operator.to_dense())
            log_execution_time(f"eigh(dim={operator.dim})", start, logging.DEBUG)

    def _krylov_step(self, psi: np.ndarray, dt: float) -> Tuple[np.ndarray, float]:
        norm = np.linalg.norm(psi)
        if norm == 0:
            return psi.copy(), 0.0
        V, alpha, beta, beta_next = _lanczos(self.operator.matrix, psi / norm, self.krylov_dim)
        if alpha.shape[0] == 1:
            evals, evecs = alpha, np.ones((1, 1))
        else:
            evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, beta)
        coeffs = evecs @ (np.exp(-1j * evals * dt) * evecs[0, :])
        error = norm * beta_next * abs(coeffs[-1])
        return norm * (V.T @ coeffs), float(error)

    def _krylov_propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        sign = 1.0 if t >= 0 else -1.0
        remaining = abs(t)
        step = remaining
        smallest = remaining / 2 ** self.max_halvings
        while remaining > 0:
            step = min(step, remaining)
            candidate, error = self._krylov_step(psi, sign * step)
            if error <= self.tolerance:
                psi = candidate
                remaining -= step
                self.substeps += 1
                continue
            step /= 2
            if step < smallest:
                raise ConvergenceError(
                    f"Krylov step error {error:.3e} above tolerance {self.tolerance:.1e} after "
                    f"{self.max_halvings} halvings"
                )
        return psi

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        psi = np.asarray(psi, dtype=np.complex128)
        if t == 0:
            return psi.copy()
        if self.method == EvolutionMethod.DENSE:
            coeffs = self._vectors.T @ psi
            return self._vectors @ (np.exp(-1j * self._energies * t) * coeffs)
        return self._krylov_propagate(psi, t)

    def evolve(self, psi0: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """States at each time, shape (len(times), dim)"""
        times = np.asarray(times, dtype=float)
        psi0 = np.asarray(psi0, dtype=np.complex128)
        out = np.empty((times.shape[0], psi0.shape[0]), dtype=np.complex128)
        if self.method == EvolutionMethod.DENSE:
            coeffs = self._vectors.T @ psi0
            phases = np.exp(-1j * np.outer(times, self._energies))
            out[:] = (phases * coeffs) @ self._vectors.T
            out[times == 0] = psi0
            return out
        current, previous = psi0, 0.0
        for idx, t in enumerate(times):
            current = self.propagate(current, t - previous)
            out[idx] = current
            previous = t
        return out


def _check_times(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ConfigError("times must be a non-empty 1-d sequence")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ConfigError("times must be non-negative and strictly increasing")
    return times


def propagate(hamiltonian: SparseOperator, psi: np.ndarray, t: float,
              method: EvolutionMethod = EvolutionMethod.AUTO) -> np.ndarray:
    """exp(-i H t) psi for a single (possibly negative) time"""
    return Propagator(hamiltonian, method).propagate(psi, t)


def evolve(plan: EvolutionPlan) -> np.ndarray:
    """
    Evolve the plan's initial state to every plan time

    Args:
        plan: Hamiltonian, initial state, times and method

    Returns:
        Complex array of shape (len(times), dim)
    """
    times = _check_times(plan.times)
    start = time.perf_counter()
    propagator = Propagator(plan.hamiltonian, plan.method, plan.tolerance)
    states = propagator.evolve(plan.initial_vector(), times)
    log_execution_time(f"evolve({plan.hamiltonian.label}, dim={plan.hamiltonian.dim}, "
                       f"{propagator.method.value})", start, logging.DEBUG)
    return states


def energy(operator: SparseOperator, psi: np.ndarray) -> float:
    return float(np.vdot(psi, operator.matrix @ psi).real)


# =============================================================================
# OBSERVABLES
# =============================================================================

def site_populations(plan: EvolutionPlan, states: Optional[np.ndarray] = None) -> np.ndarray:
    """<Q_i(t)> with shape (n_atoms, n_times); pass `states` to reuse an evolution"""
    probs = np.abs(evolve(plan) if states is None else states) ** 2
    occ = plan.hamiltonian.basis.occupations().astype(np.float64)
    return (probs @ occ).T


def z_autocorrelator(plan: EvolutionPlan, initial: Optional[BitConfig] = None,
                     states: Optional[np.ndarray] = None) -> np.ndarray:
    """<Z_i(t)> Z_i(0) for a product initial state, Z = 2Q - 1, shape (n_atoms, n_times)"""
    initial = initial or plan.initial_config()
    if initial is None:
        raise ConfigError("autocorrelator needs a product initial state")
    z0 = np.array([2 * int(initial.occupied(i)) - 1 for i in plan.hamiltonian.basis.spec.physical_positions])
    return (2.0 * site_populations(plan, states) - 1.0) * z0[:, None]


def nc_trace(plan: EvolutionPlan, states: Optional[np.ndarray] = None) -> np.ndarray:
    """<N_c>(t)"""
    basis = plan.hamiltonian.basis
    probs = np.abs(evolve(plan) if states is None else states) ** 2
    return probs @ cluster_counts(basis.states, basis.n_padded).astype(np.float64)


def fidelity_trace(plan_a: EvolutionPlan, plan_b: EvolutionPlan) -> np.ndarray:
    """|<psi_a(t)|psi_b(t)>|^2 for two evolutions over the same basis and times"""
    if plan_a.hamiltonian.dim != plan_b.hamiltonian.dim:
        raise ConfigError("fidelity needs both evolutions on the same basis")
    if not np.array_equal(np.asarray(plan_a.times), np.asarray(plan_b.times)):
        raise ConfigError("fidelity needs identical time grids")
    a, b = evolve(plan_a), evolve(plan_b)
    return np.abs(np.sum(a.conj() * b, axis=1)) ** 2


def _window_weights(times: np.ndarray, trapezoid: bool) -> np.ndarray:
    if times.size == 1 or not trapezoid:
        return np.full(times.size, 1.0 / times.size)
    dt = np.diff(times)
    weights = np.zeros(times.size)
    weights[:-1] += dt / 2
    weights[1:] += dt / 2
    return weights / weights.sum()


def microstate_projections(plan: EvolutionPlan, window: TemporalWindow, trapezoid: bool = False) -> np.ndarray:
    """Window-averaged |<k|psi(t)>|^2 over the basis (uniform or trapezoid average)"""
    times = np.asarray(window.times_us(plan.omega))
    propagator = Propagator(plan.hamiltonian, plan.method, plan.tolerance)
    probs = np.abs(propagator.evolve(plan.initial_vector(), times)) ** 2
    return _window_weights(times, trapezoid) @ probs


def in_fragment_spread(p_bar: np.ndarray, ordinals: Sequence[int]) -> float:
    """max / min of P-bar over fragment members (inf when a member is never visited)"""
    values = np.asarray(p_bar)[np.asarray(ordinals)]
    low = values.min()
    return float(values.max() / low) if low > 0 else float("inf")


def disorder_projections(basis: BlockadedBasis, params: RydbergParams, initial: BitConfig,
                         window: TemporalWindow, sigma_r: float, seeds: Sequence[int],
                         max_range: int = 2, trapezoid: bool = False,
                         method: EvolutionMethod = EvolutionMethod.AUTO) -> Tuple[np.ndarray, np.ndarray]:
    """
    Window-averaged projections for several position-disorder realizations

    Returns:
        (per-realization projections of shape (len(seeds), dim), their mean)
    """
    ordinal = index_of(basis, initial)
    times = np.asarray(window.times_us(params.omega))

    def run(seed: int) -> np.ndarray:
        realization = sample_disorder(params, sigma_r, seed, basis.spec.n_atoms)
        h = build_h_disordered(basis, params, realization, max_range)
        plan = EvolutionPlan(h, ordinal, times, method, omega=params.omega)
        return microstate_projections(plan, window, trapezoid)

    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        per_seed = np.array(list(pool.map(run, seeds)))
    return per_seed, per_seed.mean(axis=0)


# =============================================================================
# SNAPSHOTS
# =============================================================================

def _readout_noise(bits: np.ndarray, basis: BlockadedBasis, spam: SpamModel, rng: np.random.Generator) -> np.ndarray:
    """Flip physical atoms g->r with eps_g and r->g with eps_r; padding is untouched"""
    bits = bits.copy()
    for i in basis.spec.physical_positions:
        shift = basis.n_padded - i
        excited = ((bits >> shift) & 1) == 1
        u = rng.random(bits.shape[0])
        flip = np.where(excited, u < spam.eps_r, u < spam.eps_g)
        bits ^= flip.astype(np.int64) << shift
    return bits


def _prepared(initial: BitConfig, basis: BlockadedBasis, shots: int, p_flip: float,
              rng: np.random.Generator) -> np.ndarray:
    bits = np.full(shots, initial.bits, dtype=np.int64)
    for i in basis.spec.physical_positions:
        flip = rng.random(shots) < p_flip
        bits ^= flip.astype(np.int64) << (basis.n_padded - i)
    return bits


def sample_snapshots(plan: EvolutionPlan, window: TemporalWindow, shots_per_time: int,
                     spam: Optional[SpamModel] = None, seed: int = 0, stream: int = 0,
                     substream: Optional[int] = None, propagator: Optional[Propagator] = None) -> SnapshotBatch:
    """
    Draw projective measurements at every window time

    Each time point owns an RNG derived from (seed, stream[, substream], time index), so
    batches are reproducible regardless of execution order. With preparation errors every
    shot starts from an independently corrupted copy of the initial state; copies
    outside the operator's basis (blockade violations, or other fragments when the
    operator is restricted to one) are recorded without evolution.

    Args:
        plan: Operator, initial state and method; plan times are replaced by the window
        window: Measurement times in units of 1/Omega
        shots_per_time: Snapshots per window time
        spam: Readout and preparation error model, None for ideal measurements
        seed: Root seed
        stream: RNG stream, one per fragment in an ensemble
        substream: Extra RNG key, one per initial state within a stream
        propagator: Reuse a propagator built for plan.hamiltonian
    """
    if shots_per_time < 1:
        raise ConfigError("shots_per_time must be positive")
    basis = plan.hamiltonian.basis
    times = np.asarray(window.times_us(plan.omega))
    propagator = propagator or Propagator(plan.hamiltonian, plan.method, plan.tolerance)
    states = propagator.evolve(plan.initial_vector(), times)
    initial = plan.initial_config()
    prep_errors = spam is not None and spam.prep_flip > 0
    if prep_errors and initial is None:
        raise ConfigError("preparation errors need a product initial state")
    corrupted_cache: Dict[int, np.ndarray] = {}
    key = (stream,) if substream is None else (stream, substream)
    unevolved = 0

    all_bits = []
    for ti, psi in enumerate(states):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(*key, ti)))
        if prep_errors:
            bits = _prepared(initial, basis, shots_per_time, spam.prep_flip, rng)
            for start_bits in np.unique(bits):
                where = np.flatnonzero(bits == start_bits)
                ordinal = int(basis.lookup([start_bits], strict=False)[0])
                if ordinal < 0:
                    unevolved += where.size
                    continue
                if int(start_bits) not in corrupted_cache:
                    e = np.zeros(len(basis), dtype=np.complex128)
                    e[ordinal] = 1.0
                    corrupted_cache[int(start_bits)] = propagator.evolve(e, times)
                probs = np.abs(corrupted_cache[int(start_bits)][ti]) ** 2
                bits[where] = basis.states[rng.choice(len(basis), size=where.size, p=probs / probs.sum())]
        else:
            probs = np.abs(psi) ** 2
            bits = basis.states[rng.choice(len(basis), size=shots_per_time, p=probs / probs.sum())]
        if spam is not None:
            bits = _readout_noise(bits, basis, spam, rng)
        all_bits.append(bits)

    if unevolved:
        logger.debug(f"{unevolved} corrupted preparations outside the {len(basis)}-state basis "
                     f"recorded unevolved (stream {key})")
    n_times = times.shape[0]
    return SnapshotBatch(
        n_padded=basis.n_padded,
        times=np.repeat(times, shots_per_time),
        time_index=np.repeat(np.arange(n_times), shots_per_time),
        shots=np.tile(np.arange(shots_per_time), n_times),
        bits=np.concatenate(all_bits),
        seed=seed,
        stream=stream,
    )


def postselect(batch: SnapshotBatch, require_blockade: bool = True,
               require_nc: Optional[int] = None) -> Tuple[SnapshotBatch, PostselectionReport]:
    """Drop snapshots violating the blockade and/or outside a cluster-number sector"""
    keep = np.ones(len(batch), dtype=bool)
    dropped_blockade = below = above = 0
    if require_blockade:
        legal = blockade_mask(batch.bits)
        dropped_blockade = int((~legal).sum())
        keep &= legal
    if require_nc is not None:
        nc = cluster_counts(batch.bits, batch.n_padded)
        below = int((keep & (nc < require_nc)).sum())
        above = int((keep & (nc > require_nc)).sum())
        keep &= nc == require_nc
    report = PostselectionReport(total=len(batch), kept=int(keep.sum()), dropped_blockade=dropped_blockade,
                                 dropped_nc_below=below, dropped_nc_above=above)
    return batch.subset(keep), report


def empirical_projections(batch: SnapshotBatch, basis: BlockadedBasis) -> np.ndarray:
    """Snapshot frequencies over basis ordinals; snapshots outside the basis are ignored"""
    ordinals = basis.lookup(batch.bits, strict=False)
    ordinals = ordinals[ordinals >= 0]
    freq = np.bincount(ordinals, minlength=len(basis)).astype(np.float64)
    return freq / freq.sum() if freq.sum() else freq


# =============================================================================
# TEMPORAL ENSEMBLE
# =============================================================================

def collect_temporal_ensemble(hamiltonian: SparseOperator, initial_states: Sequence[BitConfig],
                              window: TemporalWindow, shots_per_time: int, seed: int,
                              omega: float, spam: Optional[SpamModel] = None,
                              postselection: Optional[PostselectionSpec] = None,
                              restrict_to_fragment: bool = True, n_c: Optional[int] = None,
                              method: EvolutionMethod = EvolutionMethod.AUTO,
                              seeding: EnsembleSeeding = EnsembleSeeding.REPRESENTATIVE
                              ) -> Tuple[TemporalEnsemble, Dict[Tuple[int, ...], PostselectionReport]]:
    """
    Snapshots of time-evolved states, one ensemble member per fragment

    Fragments are processed in pattern order and each gets its own RNG stream. With
    restrict_to_fragment the Hamiltonian is projected onto the fragment first, which
    is exact for fragment-preserving Hamiltonians (H_LGT, H_LGT + H_eff2); corrupted
    preparations that leave the fragment are then recorded unevolved.

    REPRESENTATIVE seeding evolves the given product state only. Its window average is
    not uniform over the fragment, so sector distributions keep a systematic offset.
    FRAGMENT seeding evolves every member of the fragment with ceil(shots_per_time / d)
    shots each; since |<k|U(t)|j>|^2 is doubly stochastic the pooled snapshots are
    uniform over the fragment at every time up to sampling noise.
    """
    basis = hamiltonian.basis
    n_atoms = basis.spec.n_atoms
    postselection = postselection or PostselectionSpec()
    entries = sorted(((sliom_pattern(decompose(c)).nonzero, c) for c in initial_states), key=lambda e: e[0])
    patterns = [p for p, _ in entries]
    if len(set(patterns)) != len(patterns):
        raise ConfigError("two initial states share a fragment pattern")
    times = np.asarray(window.times_us(omega))

    def run(stream: int) -> Tuple[EnsembleMember, PostselectionReport]:
        pattern, config = entries[stream]
        members = fragment_of(basis, config)
        operator = hamiltonian.restrict(members) if restrict_to_fragment else hamiltonian
        if seeding == EnsembleSeeding.FRAGMENT:
            propagator = Propagator(operator, method)
            quota = -(-shots_per_time // members.shape[0])
            batch = SnapshotBatch.concatenate([
                sample_snapshots(EvolutionPlan(operator, index_of(operator.basis, basis.config(int(ordinal))),
                                               times, method, omega=omega),
                                 window, quota, spam, seed, stream, substream=j, propagator=propagator)
                for j, ordinal in enumerate(members)
            ])
        else:
            plan = EvolutionPlan(operator, index_of(operator.basis, config), times, method, omega=omega)
            batch = sample_snapshots(plan, window, shots_per_time, spam, seed, stream)
        kept, report = postselect(batch, postselection.blockade, postselection.n_c)
        dim = fragment_dim(n_atoms, pattern.count(1), pattern.count(-1))
        logger.info(f"Fragment {''.join('c' if q == 1 else 'n' for q in pattern)}: "
                    f"kept {report.kept}/{report.total} snapshots")
        return EnsembleMember(pattern, dim, kept), report

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        results = list(pool.map(run, range(len(entries))))
    log_execution_time(f"collect_temporal_ensemble({len(entries)} fragments)", start)

    ensemble = TemporalEnsemble(
        n_atoms=n_atoms,
        window=window,
        members={m.pattern: m for m, _ in results},
        n_c=n_c,
        required=sector_patterns(n_atoms, n_c) if n_c is not None else None,
    )
    return ensemble, {m.pattern: r for m, r in results}


def _center_histogram(batch: SnapshotBatch, inverted: bool) -> Tuple[Dict[int, Dict[int, int]], int]:
    counts: Dict[int, Dict[int, int]] = {}
    used = 0
    values, multiplicity = np.unique(batch.bits, return_counts=True)
    for bits, times_seen in zip(values.tolist(), multiplicity.tolist()):
        config = BitConfig(int(bits), batch.n_padded)
        text = str(config)
        if bits & (bits >> 1) or text[:2] != "gg" or text[-2:] != "gg":
            continue
        if inverted:
            text = text[::-1]
        used += times_seen
        for k, (left, right) in enumerate(cluster_spans(text), start=1):
            bucket = counts.setdefault(k, {})
            bucket[left + right] = bucket.get(left + right, 0) + times_seen
    return counts, used


def ensemble_distribution(ensemble: TemporalEnsemble, require_complete: bool = True) -> Dict[int, SliomDistribution]:
    """
    Fragment-dimension weighted distribution of every cluster's doubled center

    Patterns without their own member are taken from the inverted member of the
    reversed pattern. Returns distributions normalized per cluster index.
    """
    required = ensemble.required or sorted(ensemble.members)
    sources, missing = [], []
    for pattern in required:
        if pattern in ensemble.members:
            sources.append((ensemble.members[pattern], False))
        elif tuple(reversed(pattern)) in ensemble.members:
            sources.append((ensemble.members[tuple(reversed(pattern))], True))
        else:
            missing.append(pattern)
    if missing and require_complete:
        raise MissingFragmentError(missing)

    accum: Dict[int, Dict[int, Fraction]] = {}
    for member, inverted in sources:
        counts, used = _center_histogram(member.batch, inverted)
        if used == 0:
            logger.warning(f"Fragment {member.pattern} has no usable snapshots")
            continue
        for k, bucket in counts.items():
            target = accum.setdefault(k, {})
            for x, c in bucket.items():
                target[x] = target.get(x, Fraction(0)) + Fraction(member.dimension * c, used)

    n_sites = ensemble.n_atoms + 3
    result = {}
    for k, bucket in sorted(accum.items()):
        total = sum(bucket.values(), Fraction(0))
        result[k] = SliomDistribution(k, {x: w / total for x, w in sorted(bucket.items())}, n_sites)
    return result
