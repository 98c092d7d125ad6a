"""
Long-running checks of the published numbers; run with FRAGLAB_ACCEPTANCE=1
"""

import numpy as np
import pytest

from fraglab.api.recipes import FIVE_CLUSTER_TABLE, Z3_STATE, Z5_STATE, five_cluster_initial_states
from fraglab.models.ensemble import EvolutionPlan
from fraglab.models.schemas import (
    ChainSpec, EnsembleSeeding, EvolutionMethod, LadderScale, PostselectionSpec, RydbergParams, ScalingKind,
    SpamModel, TemporalWindow
)
from fraglab.services.basis import enumerate_blockaded, enumerate_full, fibonacci, index_of, parse_config
from fraglab.services.dynamics import (
    collect_temporal_ensemble, ensemble_distribution, evolve, microstate_projections
)
from fraglab.services.fragments import (
    count_krylov, find_fragments, fragment_of, frozen_fraction, growth_rate, sector_census, total_dim
)
from fraglab.services.hamiltonians import build_h0, build_h1, build_h_lgt, build_h_ryd, build_ladder_ops
from fraglab.services.lgtmap import decompose, sliom_pattern
from fraglab.services.sliomstats import (
    analytic_distributions, brute_force_distributions, peak_ratio, scaling_exponent, total_variation
)

from .conftest import acceptance

pytestmark = acceptance

FIVE_CLUSTER_WINDOW = TemporalWindow()


def five_cluster_tv(basis, seed, seeding, spam=None):
    params = RydbergParams()
    h = build_h_lgt(basis, params.omega / 2)
    configs = [parse_config(text, 16) for text in five_cluster_initial_states()]
    ensemble, _ = collect_temporal_ensemble(h, configs, FIVE_CLUSTER_WINDOW, 3800, seed=seed, omega=params.omega,
                                            spam=spam, postselection=PostselectionSpec(n_c=5), n_c=5,
                                            seeding=seeding)
    measured = ensemble_distribution(ensemble)
    theory = analytic_distributions(16, sector=5)
    return [total_variation(measured[k], theory[k]) for k in range(1, 6)]


@pytest.mark.parametrize("spam,bound", [(None, 0.05), (SpamModel(), 0.10)])
def test_temporal_ensemble_matches_theory(basis16, spam, bound):
    assert max(five_cluster_tv(basis16, 20240901, EnsembleSeeding.FRAGMENT, spam)) <= bound


@pytest.mark.parametrize("spam", [None, SpamModel()])
def test_representative_seeding_floor(basis16, spam):
    # one product state per fragment does not dephase to the uniform fragment average;
    # the residual peaks at the middle cluster (about 0.16) and does not shrink with shots
    tv = five_cluster_tv(basis16, 7, EnsembleSeeding.REPRESENTATIVE, spam)
    assert max(tv) <= 0.20
    assert tv[2] == max(tv)


@pytest.mark.parametrize("which,expected,tolerance", [
    (ScalingKind.BULK, 0.48, 0.05),
    (ScalingKind.BOUNDARY, 1.00, 0.02),
])
def test_bulk_and_boundary_exponents(which, expected, tolerance):
    result = scaling_exponent(list(range(50, 201, 10)), which)
    assert result.alpha == pytest.approx(expected, abs=tolerance)


def test_center_exponent():
    result = scaling_exponent(list(range(90, 451, 30)), ScalingKind.CENTER)
    assert result.alpha == pytest.approx(0.49, abs=0.05)


def test_peak_ratio():
    result = peak_ratio(550)
    assert result.ratio == pytest.approx(1.61, abs=0.02)
    assert result.golden_ratio == pytest.approx(1.618, abs=1e-3)


def test_census_sweep():
    assert growth_rate(list(range(10, 41))) == pytest.approx(1.22, abs=0.01)
    assert 0.30 <= float(frozen_fraction(40)) <= 0.36
    census = sector_census(60)
    assert census.d_total == sum(census.sector_dimensions.values())


@pytest.mark.parametrize("n_atoms", range(13, 21))
def test_analytic_matches_enumeration(n_atoms):
    analytic = analytic_distributions(n_atoms)
    for k, dist in brute_force_distributions(n_atoms).items():
        assert {x: w for x, w in analytic[k].weights.items() if w} == dist.weights


@pytest.mark.parametrize("n_atoms", range(17, 25))
def test_fibonacci_counts(n_atoms):
    assert len(enumerate_blockaded(ChainSpec(n_atoms=n_atoms))) == fibonacci(n_atoms + 2)


@pytest.mark.parametrize("n_atoms", range(1, 15))
def test_block_structure_is_exhaustive(n_atoms):
    basis = enumerate_blockaded(ChainSpec(n_atoms=n_atoms))
    h = build_h_lgt(basis, 1.0)
    table = find_fragments(basis, h)
    coo = h.matrix.tocoo()
    assert np.array_equal(table.fragment_ids[coo.row], table.fragment_ids[coo.col])
    patterns = [table.patterns[f].nonzero for f in table.members]
    assert len(set(patterns)) == len(patterns) == count_krylov(n_atoms)
    for fid, members in table.members.items():
        for ordinal in members[:: max(1, len(members) // 7)]:
            assert sliom_pattern(decompose(basis.config(int(ordinal)))).nonzero == table.patterns[fid].nonzero


def test_ladder_algebra():
    for n_atoms in (6, 8, 10):
        full = enumerate_full(ChainSpec(n_atoms=n_atoms))
        h0 = build_h0(full, 1.0).matrix
        for op in build_ladder_ops(full, LadderScale.V0, 1.0):
            residual = (h0 @ op.matrix - op.matrix @ h0 - op.harmonic * op.matrix).toarray()
            assert np.abs(residual).max() < 1e-10
    for n_atoms in (10, 12):
        basis = enumerate_blockaded(ChainSpec(n_atoms=n_atoms))
        h1 = build_h1(basis, 1.0).matrix
        for op in build_ladder_ops(basis, LadderScale.V1, 1.0):
            residual = (h1 @ op.matrix - op.matrix @ h1 - op.harmonic * op.matrix).toarray()
            assert np.abs(residual).max() < 1e-10


def test_total_dimension_ratio():
    assert fibonacci(552) / fibonacci(551) == pytest.approx((1 + 5 ** 0.5) / 2, abs=1e-3)
    assert total_dim(300) == fibonacci(302)


class TestSixteenAtomDynamics:
    def plan(self, basis, h, text, times):
        return EvolutionPlan(h, index_of(basis, parse_config(text, 16)), np.asarray(times), EvolutionMethod.DENSE,
                             omega=RydbergParams().omega)

    def test_frozen_state_returns(self, basis16):
        h = build_h_lgt(basis16, RydbergParams().omega / 2)
        plan = self.plan(basis16, h, Z3_STATE, np.linspace(0, 5, 26))
        ordinal = plan.initial
        states = evolve(plan)
        assert np.abs(np.abs(states[:, ordinal]) ** 2 - 1).max() < 1e-10

    def test_fragment_confinement(self, basis16):
        h = build_h_lgt(basis16, RydbergParams().omega / 2)
        plan = self.plan(basis16, h, Z5_STATE, np.linspace(0, 5, 26))
        members = fragment_of(basis16, parse_config(Z5_STATE, 16))
        outside = np.setdiff1d(np.arange(len(basis16)), members)
        assert (np.abs(evolve(plan)[:, outside]) ** 2).max() < 1e-10

    def test_rydberg_projections_step(self, basis16):
        params = RydbergParams()
        h = build_h_ryd(basis16, params)
        state = FIVE_CLUSTER_TABLE[9].initial_state
        plan = self.plan(basis16, h, state, [0.0])
        p_bar = microstate_projections(plan, TemporalWindow())
        members = fragment_of(basis16, parse_config(state, 16))
        outside = np.setdiff1d(np.arange(len(basis16)), members)
        assert p_bar[members].min() > p_bar[outside].max()
