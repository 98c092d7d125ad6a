"""
Statistics of strongly localized integrals of motion (SLIOMs)

Exact distributions of the k-th cluster's center over all blockaded states (or over
one cluster-number sector), their widths, and the finite-size scaling of those widths.

Counting works on an extended chain of sites 0..S+1 (S = N_a + 3 matter sites). A
cluster on sites [L, R] together with one vacuum site on each side forms a block of
R - L + 3 extended sites: 3 + 2m for a charged cluster, 4 + 2m for a neutral one.
Longer vacuum runs add pairs of sites between blocks. The number of ways to tile n
extended sites with c blocks and 2c slots for the extra pairs is

    sum_{N_q + N_0 = c} C(c, N_q) C(k + 2c - 1, k),    k = (n - 3 N_q - 4 N_0) / 2,

which counts both the part left of cluster k (c = k - 1 blocks) and the part right
of it (any number of blocks, or exactly N_c - k inside a sector).
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import linregress

from ..config import settings
from ..exceptions import ConfigError, InsufficientPointsError
from ..models.ensemble import SliomDistribution
from ..models.schemas import (
    ChainSpec, CollapseCurve, CollapseResult, DistributionPart, PeakRatioResult,
    ScalingKind, ScalingPoint, ScalingResult, Sublattice, SublatticeFit, WidthFit
)
from ..utils.helpers import log_execution_time
from .basis import enumerate_blockaded, fibonacci
from .fragments import binomial, largest_sector, sector_dimension
from .lgtmap import cluster_spans

logger = logging.getLogger(__name__)

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class ClusterCounter:
    """Memoized block-tiling counts for one chain length"""

    def __init__(self, n_atoms: int):
        self.n_atoms = n_atoms
        self.n_sites = n_atoms + 3
        self._blocks: Dict[Tuple[int, int], int] = {}
        self._any: Dict[int, int] = {}

    def blocks(self, n: int, c: int) -> int:
        """Tilings of n extended sites by exactly c blocks"""
        if c == 0:
            return 1 if n == 0 else 0
        key = (n, c)
        if key not in self._blocks:
            total = 0
            for n_q in range(c + 1):
                rest = n - 3 * n_q - 4 * (c - n_q)
                if rest < 0 or rest % 2:
                    continue
                k = rest // 2
                total += binomial(c, n_q) * binomial(k + 2 * c - 1, k)
            self._blocks[key] = total
        return self._blocks[key]

    def any_blocks(self, n: int) -> int:
        """Tilings of n extended sites by any number of blocks (the empty tiling for n = 0)"""
        if n == 0:
            return 1
        if n not in self._any:
            self._any[n] = sum(self.blocks(n, c) for c in range(1, n // 3 + 1))
        return self._any[n]

    def right(self, n: int, rest: Optional[int]) -> int:
        return self.any_blocks(n) if rest is None else self.blocks(n, rest)


def _normalizer(n_atoms: int, sector: Optional[int]) -> int:
    if sector is None:
        return fibonacci(n_atoms + 2)
    dim = sector_dimension(n_atoms, sector)
    if dim == 0:
        raise ConfigError(f"sector N_c={sector} is empty for N_a={n_atoms}")
    return dim


def _keep(part: DistributionPart, right: int, n_sites: int) -> bool:
    if part == DistributionPart.BULK:
        return right < n_sites
    if part == DistributionPart.RIGHTMOST:
        return right == n_sites
    return True


def _cluster_counts(counter: ClusterCounter, k: int, sector: Optional[int],
                    part: DistributionPart) -> Dict[int, int]:
    """Number of states whose k-th cluster has doubled center X, keyed by X"""
    s = counter.n_sites
    if k < 1 or (sector is not None and k > sector):
        return {}
    rest = None if sector is None else sector - k
    left = [counter.blocks(lo - 1, k - 1) for lo in range(1, s + 1)]
    right = [counter.right(s - hi, rest) for hi in range(1, s + 1)]
    counts: Dict[int, int] = {}
    for lo in range(1, s + 1):
        ways_left = left[lo - 1]
        if not ways_left:
            continue
        for hi in range(lo, s + 1):
            ways_right = right[hi - 1]
            if ways_right and _keep(part, hi, s):
                counts[lo + hi] = counts.get(lo + hi, 0) + ways_left * ways_right
    return counts


def _point_count(counter: ClusterCounter, k: int, x: int, sector: Optional[int],
                 part: DistributionPart) -> int:
    s = counter.n_sites
    if k < 1 or (sector is not None and k > sector):
        return 0
    rest = None if sector is None else sector - k
    total = 0
    for lo in range(max(1, x - s), x // 2 + 1):
        hi = x - lo
        if hi < lo or hi > s or not _keep(part, hi, s):
            continue
        total += counter.blocks(lo - 1, k - 1) * counter.right(s - hi, rest)
    return total


def analytic_q1(n_atoms: int, x: int, sector: Optional[int] = None) -> Fraction:
    """Probability that the first cluster has doubled center x"""
    counter = ClusterCounter(n_atoms)
    return Fraction(_point_count(counter, 1, x, sector, DistributionPart.ALL), _normalizer(n_atoms, sector))


def analytic_qk(n_atoms: int, k: int, x: int, sector: Optional[int] = None,
                part: DistributionPart = DistributionPart.ALL) -> Fraction:
    """
    Probability that the k-th cluster has doubled center x

    The rightmost part counts states where cluster k is the last one; the bulk part
    counts the rest. Both are normalized by the full state count.
    """
    counter = ClusterCounter(n_atoms)
    return Fraction(_point_count(counter, k, x, sector, part), _normalizer(n_atoms, sector))


def analytic_distribution(n_atoms: int, k: int, sector: Optional[int] = None,
                          part: DistributionPart = DistributionPart.ALL,
                          counter: Optional[ClusterCounter] = None) -> SliomDistribution:
    counter = counter or ClusterCounter(n_atoms)
    norm = _normalizer(n_atoms, sector)
    counts = _cluster_counts(counter, k, sector, part)
    weights = {x: Fraction(c, norm) for x, c in sorted(counts.items())}
    return SliomDistribution(k, weights, counter.n_sites)


def analytic_distributions(n_atoms: int, sector: Optional[int] = None,
                           part: DistributionPart = DistributionPart.ALL) -> Dict[int, SliomDistribution]:
    """Distributions of every cluster index that can occur"""
    start = time.perf_counter()
    counter = ClusterCounter(n_atoms)
    k_top = sector if sector is not None else (n_atoms + 5) // 3
    result = {k: analytic_distribution(n_atoms, k, sector, part, counter) for k in range(1, k_top + 1)}
    log_execution_time(f"analytic_distributions(N_a={n_atoms}, sector={sector})", start, logging.DEBUG)
    return result


def brute_force_distributions(n_atoms: int, sector: Optional[int] = None) -> Dict[int, SliomDistribution]:
    """Cluster-center histograms by enumerating every blockaded state"""
    basis = enumerate_blockaded(ChainSpec(n_atoms=n_atoms))
    counts: Dict[int, Dict[int, int]] = {}
    used = 0
    for text in basis.strings():
        spans = cluster_spans(text)
        if sector is not None and len(spans) != sector:
            continue
        used += 1
        for k, (left, right) in enumerate(spans, start=1):
            bucket = counts.setdefault(k, {})
            bucket[left + right] = bucket.get(left + right, 0) + 1
    if used == 0:
        raise ConfigError(f"sector N_c={sector} is empty for N_a={n_atoms}")
    n_sites = n_atoms + 3
    return {
        k: SliomDistribution(k, {x: Fraction(c, used) for x, c in sorted(bucket.items())}, n_sites)
        for k, bucket in sorted(counts.items())
    }


def total_variation(a: SliomDistribution, b: SliomDistribution) -> float:
    keys = set(a.weights) | set(b.weights)
    return 0.5 * sum(abs(float(a.weights.get(x, 0)) - float(b.weights.get(x, 0))) for x in keys)


# =============================================================================
# WIDTHS
# =============================================================================

def _gaussian(x, amplitude, center, sigma):
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def _half_max_width(x: np.ndarray, w: np.ndarray) -> float:
    """Width at half maximum by linear interpolation, zero beyond the grid"""
    xp = np.concatenate([[x[0] - 1.0], x, [x[-1] + 1.0]])
    wp = np.concatenate([[0.0], w, [0.0]])
    half = wp.max() / 2.0
    peak = int(np.argmax(wp))
    i = peak
    while wp[i - 1] >= half:
        i -= 1
    x_left = xp[i - 1] + (half - wp[i - 1]) / (wp[i] - wp[i - 1]) * (xp[i] - xp[i - 1])
    j = peak
    while wp[j + 1] >= half:
        j += 1
    x_right = xp[j] + (wp[j] - half) / (wp[j] - wp[j + 1]) * (xp[j + 1] - xp[j])
    return float(x_right - x_left)


def _fit_sublattice(dist: SliomDistribution, which: Sublattice) -> Tuple[Optional[SublatticeFit], float]:
    positions, weights = dist.sublattice(which)
    nonzero = weights > 0
    if not nonzero.any():
        return None, 0.0
    lo, hi = positions[nonzero].min(), positions[nonzero].max()
    x = np.arange(lo, hi + 0.5, 1.0)
    lookup = dict(zip(positions.tolist(), weights.tolist()))
    w = np.array([lookup.get(value, 0.0) for value in x.tolist()])
    weight = float(w.sum())
    mean = float((w * x).sum() / weight)

    if int(nonzero.sum()) == 1:
        return SublatticeFit(sublattice=which, method="delta", amplitude=float(w.max()), center=mean,
                             sigma0=0.0, fwhm=0.0, weight=weight, points=1), 0.0

    if x.size >= 4:
        sigma_guess = math.sqrt(max(float((w * (x - mean) ** 2).sum() / weight), 0.25))
        try:
            popt, _ = curve_fit(_gaussian, x, w, p0=[float(w.max()), mean, sigma_guess],
                                maxfev=20000, ftol=1e-12, xtol=1e-12)
            sigma = abs(float(popt[2]))
            residual = float(np.sum((w - _gaussian(x, *popt)) ** 2))
            return SublatticeFit(sublattice=which, method="gaussian", amplitude=float(popt[0]),
                                 center=float(popt[1]), sigma0=sigma, fwhm=FWHM_PER_SIGMA * sigma,
                                 weight=weight, points=int(x.size)), residual
        except (RuntimeError, ValueError) as e:
            logger.warning(f"Gaussian fit failed for cluster {dist.k} on {which.value} sublattice: {e}")

    width = _half_max_width(x, w)
    return SublatticeFit(sublattice=which, method="discrete", amplitude=float(w.max()), center=mean,
                         sigma0=width / FWHM_PER_SIGMA, fwhm=width, weight=weight, points=int(x.size)), 0.0


def fwhm(dist: SliomDistribution) -> WidthFit:
    """
    Full width at half maximum of a cluster-center distribution, in sites

    Each sublattice (integer and half-integer centers) gets its own Gaussian fit; the
    widths are averaged with the sublattice weights. Sublattices with fewer than four
    grid points use the discrete half-maximum width; a single point is a delta.
    """
    fits, residuals, points = [], 0.0, 0
    for which in (Sublattice.INTEGER, Sublattice.HALF_INTEGER):
        fit, residual = _fit_sublattice(dist, which)
        if fit is not None:
            fits.append(fit)
            residuals += residual
            points += fit.points
    if not fits:
        return WidthFit(fwhm=0.0, residual=0.0, degenerate=True)
    total = sum(f.weight for f in fits)
    width = sum(f.weight * f.fwhm for f in fits) / total
    degenerate = all(f.method == "delta" for f in fits)
    return WidthFit(fwhm=width, residual=math.sqrt(residuals / points), degenerate=degenerate, sublattices=fits)


def center_cluster(n_c: int) -> int:
    return (n_c + 1) // 2


def _bulk_width(n_atoms: int) -> float:
    total, weighted = 0.0, 0.0
    for k, dist in analytic_distributions(n_atoms, part=DistributionPart.BULK).items():
        if k < 2:
            continue
        weight = float(dist.total)
        if weight <= 0:
            continue
        fit = fwhm(dist)
        if fit.degenerate:
            continue
        total += weight
        weighted += weight * fit.fwhm
    return weighted / total if total else 0.0


def width_for(which: ScalingKind, n_atoms: int) -> ScalingPoint:
    """Width of one localization family at one chain length"""
    n_c = None
    if which == ScalingKind.BOUNDARY:
        width = fwhm(analytic_distribution(n_atoms, 1)).fwhm
    elif which == ScalingKind.BULK:
        width = _bulk_width(n_atoms)
    else:
        n_c = largest_sector(n_atoms).n_c
        width = fwhm(analytic_distribution(n_atoms, center_cluster(n_c), sector=n_c)).fwhm
    return ScalingPoint(n_atoms=n_atoms, width=width, width_over_n=width / n_atoms, n_c=n_c)


def _map_sizes(func: Callable, sizes: Sequence[int]) -> list:
    workers = max(1, settings.threads)
    if workers == 1 or len(sizes) < 2:
        return [func(n) for n in sizes]
    with ProcessPoolExecutor(max_workers=min(workers, len(sizes))) as pool:
        return list(pool.map(func, sizes))


def scaling_exponent(n_atoms_list: Sequence[int], which: ScalingKind) -> ScalingResult:
    """
    Fit width/N_a ~ N_a^(-alpha)

    Args:
        n_atoms_list: Chain lengths, at least three
        which: bulk, boundary or center family

    Returns:
        ScalingResult with alpha and its standard error
    """
    sizes = sorted(set(n_atoms_list))
    if len(sizes) < 3:
        raise InsufficientPointsError(f"scaling fit needs at least three sizes, got {len(sizes)}")
    start = time.perf_counter()
    points = _map_sizes(partial(width_for, which), sizes)
    if any(p.width <= 0 for p in points):
        raise InsufficientPointsError(f"zero width in {which.value} sweep")
    fit = linregress(np.log([p.n_atoms for p in points]), np.log([p.width_over_n for p in points]))
    log_execution_time(f"scaling_exponent({which.value}, {sizes[0]}..{sizes[-1]})", start)
    logger.info(f"Scaling {which.value}: alpha={-fit.slope:.4f} +/- {fit.stderr:.4f}")
    return ScalingResult(which=which, points=points, alpha=float(-fit.slope), stderr=float(fit.stderr),
                         intercept=float(fit.intercept))


def _collapse_curves(n_atoms: int) -> List[CollapseCurve]:
    n_c = largest_sector(n_atoms).n_c
    dist = analytic_distribution(n_atoms, center_cluster(n_c), sector=n_c).normalized()
    middle = (dist.n_sites + 1) / 2.0
    scale = math.sqrt(n_atoms)
    curves = []
    for which in (Sublattice.INTEGER, Sublattice.HALF_INTEGER):
        positions, weights = dist.sublattice(which)
        curves.append(CollapseCurve(n_atoms=n_atoms, n_c=n_c, sublattice=which,
                                    positions=((positions - middle) / scale).tolist(),
                                    heights=(weights * scale).tolist()))
    return curves


def scaling_collapse(n_atoms_list: Sequence[int], grid_points: int = 201) -> CollapseResult:
    """Center-cluster distributions rescaled by sqrt(N_a) about the chain middle"""
    sizes = sorted(set(n_atoms_list))
    if len(sizes) < 2:
        raise InsufficientPointsError("collapse needs at least two sizes")
    curves = [c for group in _map_sizes(_collapse_curves, sizes) for c in group]
    metric: Dict[str, float] = {}
    for which in (Sublattice.INTEGER, Sublattice.HALF_INTEGER):
        group = [c for c in curves if c.sublattice == which and len(c.positions) > 1]
        if len(group) < 2:
            metric[which.value] = 0.0
            continue
        lo = max(c.positions[0] for c in group)
        hi = min(c.positions[-1] for c in group)
        grid = np.linspace(lo, hi, grid_points)
        sampled = [np.interp(grid, c.positions, c.heights) for c in group]
        metric[which.value] = float(max(np.max(np.abs(a - b)) for i, a in enumerate(sampled) for b in sampled[i + 1:]))
    return CollapseResult(n_atoms_list=sizes, curves=curves, metric=metric)


def peak_ratio(n_atoms: int) -> PeakRatioResult:
    """Peak of the integer-center sublattice over the half-integer one for the center cluster"""
    n_c = largest_sector(n_atoms).n_c
    dist = analytic_distribution(n_atoms, center_cluster(n_c), sector=n_c)
    _, integer = dist.sublattice(Sublattice.INTEGER)
    _, half = dist.sublattice(Sublattice.HALF_INTEGER)
    if integer.size == 0 or half.size == 0 or half.max() == 0:
        raise InsufficientPointsError(f"center cluster of N_a={n_atoms} occupies a single sublattice")
    ratio = float(integer.max() / half.max())
    golden = fibonacci(n_atoms + 3) / fibonacci(n_atoms + 2)
    return PeakRatioResult(n_atoms=n_atoms, n_c=n_c, ratio=ratio, golden_ratio=golden, deviation=ratio - golden)
