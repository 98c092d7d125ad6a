import logging
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from fraglab.api.recipes import FIVE_CLUSTER_TABLE
from fraglab.exceptions import ConfigError, MissingFragmentError
from fraglab.models.ensemble import EvolutionPlan
from fraglab.models.schemas import (
    ChainSpec, EnsembleSeeding, EvolutionMethod, PostselectionSpec, RydbergParams, SpamModel, TemporalWindow
)
from fraglab.services.basis import (
    cluster_counts, enumerate_blockaded, enumerate_full, has_padding, index_of, parse_config
)
from fraglab.services.dynamics import (
    collect_temporal_ensemble, disorder_projections, empirical_projections, energy, ensemble_distribution, evolve,
    fidelity_trace, in_fragment_spread, microstate_projections, nc_trace, postselect, propagate, sample_snapshots,
    site_populations, z_autocorrelator
)
from fraglab.services.fragments import fragment_of
from fraglab.services.hamiltonians import build_h_lgt, build_h_pxq, build_h_ryd

MOBILE = "rggggrgggg"
WINDOW = TemporalWindow(omega_t_start=0.5, omega_t_stop=2.0, n_steps=4)


def lgt_plan(basis, text, times, method=EvolutionMethod.AUTO):
    h = build_h_lgt(basis, 0.5)
    ordinal = index_of(basis, parse_config(text, basis.spec.n_atoms))
    return EvolutionPlan(h, ordinal, np.asarray(times, dtype=float), method, omega=1.0)


class TestPropagation:
    def test_zero_time_is_identity(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0, 1.0])
        states = evolve(plan)
        assert np.array_equal(states[0], plan.initial_vector())

    def test_dense_and_krylov_agree(self, basis10):
        times = [0.0, 0.7, 3.0]
        dense = evolve(lgt_plan(basis10, MOBILE, times, EvolutionMethod.DENSE))
        krylov = evolve(lgt_plan(basis10, MOBILE, times, EvolutionMethod.KRYLOV))
        assert np.allclose(dense, krylov, atol=1e-8)

    def test_norm_and_energy_conserved(self, basis10, params):
        h = build_h_ryd(basis10, params)
        psi0 = np.zeros(len(basis10), dtype=np.complex128)
        psi0[index_of(basis10, parse_config(MOBILE, 10))] = 1.0
        e0 = energy(h, psi0)
        for t in (0.1, 0.5):
            psi = propagate(h, psi0, t)
            assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
            assert energy(h, psi) == pytest.approx(e0, rel=1e-9, abs=1e-8)

    def test_backward_propagation_returns(self, basis10):
        h = build_h_lgt(basis10, 0.5)
        psi0 = lgt_plan(basis10, MOBILE, [0.0]).initial_vector()
        forward = propagate(h, psi0, 1.3, EvolutionMethod.KRYLOV)
        assert np.allclose(propagate(h, forward, -1.3, EvolutionMethod.KRYLOV), psi0, atol=1e-8)

    @pytest.mark.parametrize("times", [[], [1.0, 0.5], [-1.0, 2.0]])
    def test_bad_times(self, basis10, times):
        with pytest.raises(ConfigError):
            evolve(lgt_plan(basis10, MOBILE, times))


class TestObservables:
    def test_frozen_state_autocorrelator(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=7))
        plan = lgt_plan(basis, "rggrggr", [0.0, 1.0, 5.0])
        assert np.allclose(z_autocorrelator(plan), 1.0)

    def test_populations_shape_and_start(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0, 1.0])
        populations = site_populations(plan)
        assert populations.shape == (10, 2)
        assert populations[:, 0].tolist() == [1.0 if ch == "r" else 0.0 for ch in MOBILE]

    def test_cluster_number_is_conserved(self, basis10):
        plan = lgt_plan(basis10, MOBILE, np.linspace(0, 4, 9))
        trace = nc_trace(plan)
        assert np.allclose(trace, trace[0])

    def test_reused_states_match(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0, 2.0])
        states = evolve(plan)
        assert np.allclose(nc_trace(plan, states), nc_trace(plan))

    def test_self_fidelity(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0, 1.0, 2.0])
        assert np.allclose(fidelity_trace(plan, plan), 1.0)

    def test_projections_stay_in_fragment(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        p_bar = microstate_projections(plan, WINDOW)
        members = fragment_of(basis10, parse_config(MOBILE, 10))
        outside = np.setdiff1d(np.arange(len(basis10)), members)
        assert p_bar.sum() == pytest.approx(1.0)
        assert np.allclose(p_bar[outside], 0.0)
        assert in_fragment_spread(p_bar, members) >= 1.0

    def test_trapezoid_weights_also_normalize(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        assert microstate_projections(plan, WINDOW, trapezoid=True).sum() == pytest.approx(1.0)

    def test_unconstrained_flip_model_relaxes_but_gauge_model_remembers(self):
        spec = ChainSpec(n_atoms=12)
        text = "rggggrggggrg"
        times = np.linspace(20.0, 40.0, 41)
        blockaded = enumerate_blockaded(spec)
        gauge = z_autocorrelator(lgt_plan(blockaded, text, times)).mean()

        full = enumerate_full(spec)
        pxq = EvolutionPlan(build_h_pxq(full, 1.0), index_of(full, parse_config(text, 12)), times,
                            EvolutionMethod.KRYLOV, omega=1.0)
        relaxed = z_autocorrelator(pxq).mean()
        assert gauge > 0.3
        assert abs(relaxed) < 0.15
        assert gauge - relaxed > 0.25

    def test_disorder_free_realizations_reproduce_clean_chain(self, basis8):
        params = RydbergParams()
        initial = parse_config("rggggrgg", 8)
        clean_plan = EvolutionPlan(build_h_ryd(basis8, params), index_of(basis8, initial), np.zeros(1),
                                   omega=params.omega)
        clean = microstate_projections(clean_plan, WINDOW)
        per_seed, mean = disorder_projections(basis8, params, initial, WINDOW, 0.0, [1, 2])
        assert per_seed.shape == (2, len(basis8))
        assert np.allclose(mean, clean, atol=1e-10)

        per_seed, mean = disorder_projections(basis8, params, initial, WINDOW, 0.3, [1, 2, 3])
        assert np.allclose(per_seed.sum(axis=1), 1.0)
        assert not np.allclose(per_seed[0], per_seed[1], atol=1e-6)
        assert np.abs(mean - clean).max() > 1e-6


class TestSnapshots:
    def test_seeded_batches_are_reproducible(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        a = sample_snapshots(plan, WINDOW, 50, seed=11)
        b = sample_snapshots(plan, WINDOW, 50, seed=11)
        assert np.array_equal(a.bits, b.bits)
        assert len(a) == 200
        assert list(a)[0].seed_lineage == (11, 0, 0)

    def test_readout_noise_keeps_padding(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        spam = SpamModel(eps_g=0.3, eps_r=0.3)
        batch = sample_snapshots(plan, WINDOW, 40, spam=spam, seed=2)
        assert all(has_padding(snap.bits) for snap in batch)

    def test_preparation_errors_outside_basis(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=6))
        plan = lgt_plan(basis, "gggggg", [0.0])
        spam = SpamModel(eps_g=0.0, eps_r=0.0, prep_flip=1.0)
        batch = sample_snapshots(plan, WINDOW, 5, spam=spam, seed=3)
        assert {str(snap.bits) for snap in batch} == {"ggrrrrrrgg"}
        kept, report = postselect(batch)
        assert len(kept) == 0
        assert report.dropped_blockade == report.total == 20

    def test_unevolved_preparations_are_logged(self, caplog):
        basis = enumerate_blockaded(ChainSpec(n_atoms=6))
        plan = lgt_plan(basis, "gggggg", [0.0])
        spam = SpamModel(eps_g=0.0, eps_r=0.0, prep_flip=1.0)
        with caplog.at_level(logging.DEBUG, logger="fraglab.services.dynamics"):
            sample_snapshots(plan, WINDOW, 5, spam=spam, seed=3, stream=2)
        assert "20 corrupted preparations outside the 21-state basis" in caplog.text

    def test_postselect_on_cluster_number(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        batch = sample_snapshots(plan, WINDOW, 30, spam=SpamModel(eps_g=0.05, eps_r=0.05), seed=5)
        kept, report = postselect(batch, require_nc=2)
        assert report.kept == len(kept)
        assert report.kept + report.dropped_blockade + report.dropped_nc_below + report.dropped_nc_above == report.total

    def test_readout_flip_rates(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=7))
        initial = parse_config("rggrggr", 7)
        batch = sample_snapshots(lgt_plan(basis, "rggrggr", [0.0]), WINDOW, 5000, spam=SpamModel(), seed=21)
        g_to_r = r_to_g = g_total = r_total = 0
        for i in basis.spec.physical_positions:
            read = (batch.bits >> (basis.n_padded - i)) & 1
            if initial.occupied(i):
                r_to_g += int((read == 0).sum())
                r_total += read.size
            else:
                g_to_r += int((read == 1).sum())
                g_total += read.size
        assert g_to_r / g_total == pytest.approx(0.01, abs=0.002)
        assert r_to_g / r_total == pytest.approx(0.05, abs=0.005)

    def test_snapshot_histogram_follows_projections(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        batch = sample_snapshots(plan, WINDOW, 3000, seed=17)
        counts = np.bincount(basis10.lookup(batch.bits), minlength=len(basis10)).astype(float)
        expected = microstate_projections(plan, WINDOW) * len(batch)
        reached = expected > 1e-9
        assert counts[~reached].sum() == 0
        counts, expected = counts[reached], expected[reached]
        small = expected < 5
        if small.any():
            counts = np.append(counts[~small], counts[small].sum())
            expected = np.append(expected[~small], expected[small].sum())
        assert chisquare(counts, expected * counts.sum() / expected.sum()).pvalue > 1e-3

    def test_postselection_removes_readout_bias(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=7))
        batch = sample_snapshots(lgt_plan(basis, "rggrggr", [0.0]), WINDOW, 5000, spam=SpamModel(), seed=8)
        legal, _ = postselect(batch)
        assert cluster_counts(legal.bits, legal.n_padded).mean() < 4
        kept, report = postselect(batch, require_nc=4)
        assert report.dropped_nc_below > 5 * max(report.dropped_nc_above, 1)
        assert np.all(cluster_counts(kept.bits, kept.n_padded) == 4)

    def test_empirical_projections_normalize(self, basis10):
        plan = lgt_plan(basis10, MOBILE, [0.0])
        freq = empirical_projections(sample_snapshots(plan, WINDOW, 25, seed=9), basis10)
        assert freq.sum() == pytest.approx(1.0)

    def test_bad_shot_count(self, basis10):
        with pytest.raises(ConfigError):
            sample_snapshots(lgt_plan(basis10, MOBILE, [0.0]), WINDOW, 0)


class TestTemporalEnsemble:
    @pytest.fixture(scope="class")
    def h16(self, basis16):
        return build_h_lgt(basis16, 0.5)

    def states(self, labels=None):
        return [parse_config(row.initial_state, 16) for row in FIVE_CLUSTER_TABLE
                if row.initial_state and (labels is None or row.label in labels)]

    def test_distribution_covers_every_cluster(self, h16):
        window = TemporalWindow(omega_t_start=1.0, omega_t_stop=3.0, n_steps=2)
        ensemble, reports = collect_temporal_ensemble(h16, self.states(), window, 10, seed=4, omega=1.0,
                                                      postselection=PostselectionSpec(n_c=5), n_c=5)
        assert len(ensemble.members) == 10
        assert all(r.kept == r.total for r in reports.values())
        distributions = ensemble_distribution(ensemble)
        assert sorted(distributions) == [1, 2, 3, 4, 5]
        for dist in distributions.values():
            assert dist.total == Fraction(1)

    def test_missing_fragments(self, h16):
        window = TemporalWindow(omega_t_start=1.0, omega_t_stop=2.0, n_steps=2)
        ensemble, _ = collect_temporal_ensemble(h16, self.states({"K6"}), window, 5, seed=1, omega=1.0, n_c=5)
        with pytest.raises(MissingFragmentError):
            ensemble_distribution(ensemble)
        partial = ensemble_distribution(ensemble, require_complete=False)
        assert sorted(partial) == [1, 2, 3, 4, 5]

    def test_fragment_seeding_is_uniform(self, basis10):
        h = build_h_lgt(basis10, 0.5)
        config = parse_config(MOBILE, 10)
        members = fragment_of(basis10, config)
        d = members.shape[0]
        ensemble, reports = collect_temporal_ensemble(h, [config], WINDOW, 500, seed=6, omega=1.0,
                                                      seeding=EnsembleSeeding.FRAGMENT)
        (member,) = ensemble.members.values()
        quota = -(-500 // d)
        assert len(member.batch) == WINDOW.n_steps * d * quota
        assert all(r.kept == r.total for r in reports.values())
        counts = np.bincount(basis10.lookup(member.batch.bits), minlength=len(basis10))
        assert counts.sum() == counts[members].sum()
        assert chisquare(counts[members]).pvalue > 1e-3

    def test_duplicate_patterns_rejected(self, h16):
        config = parse_config(FIVE_CLUSTER_TABLE[0].initial_state, 16)
        with pytest.raises(ConfigError):
            collect_temporal_ensemble(h16, [config, config], WINDOW, 5, seed=1, omega=1.0)
