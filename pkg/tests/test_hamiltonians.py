import json

import numpy as np
import pytest
import scipy.sparse as sp

from fraglab.exceptions import ConfigError
from fraglab.models.schemas import ChainSpec, LadderScale, RydbergParams
from fraglab.services.basis import enumerate_blockaded, index_of, parse_config
from fraglab.services.fragments import find_fragments
from fraglab.services.hamiltonians import (
    build_h0, build_h1, build_h_disordered, build_h_eff2, build_h_lgt, build_h_pert, build_h_pxq, build_h_ryd,
    build_ladder_ops, build_nc_operator, sample_disorder
)


def commutator_residual(a, b, scale):
    diff = (a @ b - b @ a - scale * b).toarray()
    return float(np.abs(diff).max()) if diff.size else 0.0


class TestRydberg:
    def test_defaults(self, params):
        assert params.detuning == params.v[1]
        assert params.v[0] == pytest.approx(64 * params.v[1])
        assert params.v[1] == pytest.approx(2 * np.pi * 9.2)

    def test_hermitian(self, basis10, params):
        h = build_h_ryd(basis10, params)
        assert h.hermitian_residual() == 0.0

    def test_diagonal_of_separated_excitations(self, params):
        basis = enumerate_blockaded(ChainSpec(n_atoms=6))
        ordinal = index_of(basis, parse_config("rggrgg", 6))
        h2 = build_h_ryd(basis, params, max_range=2)
        h3 = build_h_ryd(basis, params, max_range=3)
        assert h2.diagonal()[ordinal] == pytest.approx(-2 * params.detuning)
        assert h3.diagonal()[ordinal] == pytest.approx(-2 * params.detuning + params.v[2])

    def test_bad_range(self, basis8, params):
        with pytest.raises(ConfigError):
            build_h_ryd(basis8, params, max_range=4)

    def test_explicit_space_must_match_basis(self, basis8, full6, params):
        assert build_h_ryd(basis8, params, full_space=False).dim == len(basis8)
        assert build_h_ryd(full6, params, full_space=True).dim == 64
        with pytest.raises(ConfigError):
            build_h_ryd(basis8, params, full_space=True)
        with pytest.raises(ConfigError):
            build_h_ryd(full6, params, full_space=False)

    def test_position_jitter_spreads_v1(self, params):
        assert params.v1_spread(0.083) / (2 * np.pi) == pytest.approx(0.68, abs=0.01)
        v1 = np.concatenate([sample_disorder(params, 0.083, seed=s, n_atoms=12).couplings[1, :10]
                             for s in range(200)])
        assert v1.mean() == pytest.approx(params.v[1], rel=0.02)
        assert v1.std() / (2 * np.pi) == pytest.approx(0.68, rel=0.1)

    def test_zero_disorder_is_bit_exact(self, basis10, params):
        realization = sample_disorder(params, 0.0, seed=7, n_atoms=10)
        clean = build_h_ryd(basis10, params)
        disordered = build_h_disordered(basis10, params, realization)
        assert np.array_equal(clean.to_dense(), disordered.to_dense())

    def test_disorder_is_seeded(self, params):
        a = sample_disorder(params, 0.083, seed=3, n_atoms=10)
        b = sample_disorder(params, 0.083, seed=3, n_atoms=10)
        c = sample_disorder(params, 0.083, seed=4, n_atoms=10)
        assert np.array_equal(a.couplings, b.couplings)
        assert not np.array_equal(a.couplings, c.couplings)

    def test_disorder_atom_mismatch(self, basis8, params):
        realization = sample_disorder(params, 0.083, seed=1, n_atoms=10)
        with pytest.raises(ConfigError):
            build_h_disordered(basis8, params, realization)


class TestGaugeModels:
    def test_lgt_is_real_symmetric(self, basis10):
        h = build_h_lgt(basis10, 0.5)
        assert h.hermitian_residual() == 0.0
        assert np.all(h.diagonal() == 0)

    def test_z5_edge_clusters_can_move(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=16))
        h = build_h_lgt(basis, 1.0)
        ordinal = index_of(basis, parse_config("rggggrggggrggggr", 16))
        assert h.matrix[:, ordinal].nnz > 0

    def test_frozen_state_has_no_moves(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=7))
        h = build_h_lgt(basis, 1.0)
        ordinal = index_of(basis, parse_config("rggrggr", 7))
        assert h.matrix[:, ordinal].nnz == 0

    def test_lgt_preserves_cluster_number(self, basis10):
        h = build_h_lgt(basis10, 1.0).matrix.tocoo()
        nc = build_nc_operator(basis10).diagonal()
        assert np.array_equal(nc[h.row], nc[h.col])

    def test_pxq_on_full_space(self, full6):
        h = build_h_pxq(full6, 2.0)
        assert h.hermitian_residual() == 0.0
        assert set(np.unique(h.matrix.data)) == {1.0}


class TestLadderOperators:
    def test_v1_harmonics(self, basis10):
        h1 = build_h1(basis10, 1.0).matrix
        for op in build_ladder_ops(basis10, LadderScale.V1, 1.3):
            assert commutator_residual(h1, op.matrix, op.harmonic) < 1e-10

    def test_v0_harmonics(self, full6):
        h0 = build_h0(full6, 1.0).matrix
        ops = build_ladder_ops(full6, LadderScale.V0, 0.7)
        assert [op.harmonic for op in ops] == [-2, -1, 0, 1, 2]
        for op in ops:
            assert commutator_residual(h0, op.matrix, op.harmonic) < 1e-10

    @pytest.mark.parametrize("scale", [LadderScale.V0, LadderScale.V1])
    def test_pieces_sum_to_perturbation(self, scale, full6, basis10):
        basis = full6 if scale == LadderScale.V0 else basis10
        total = sum(op.matrix for op in build_ladder_ops(basis, scale, 1.1))
        assert np.array_equal(total.toarray(), build_h_pert(basis, 1.1).to_dense())

    def test_t0_is_lgt(self, basis10):
        t0 = next(op for op in build_ladder_ops(basis10, LadderScale.V1, 2.0) if op.harmonic == 0)
        assert np.array_equal(t0.to_dense(), build_h_lgt(basis10, 1.0).to_dense())

    def test_raising_is_lowering_transpose(self, basis10):
        ops = {op.harmonic: op.matrix for op in build_ladder_ops(basis10, LadderScale.V1, 1.0)}
        assert np.array_equal(ops[1].toarray(), ops[-1].T.toarray())

    def test_wrong_basis(self, basis8, full6):
        with pytest.raises(ConfigError):
            build_ladder_ops(basis8, LadderScale.V0, 1.0)
        with pytest.raises(ConfigError):
            build_ladder_ops(full6, LadderScale.V1, 1.0)


class TestSecondOrder:
    def test_hermitian_and_cluster_number_preserving(self, basis10):
        params = RydbergParams()
        h = build_h_eff2(basis10, params.omega, params.v[1])
        assert h.hermitian_residual() < 1e-12
        nc = build_nc_operator(basis10).diagonal()
        coo = h.matrix.tocoo()
        assert np.array_equal(nc[coo.row], nc[coo.col])

    @pytest.mark.parametrize("n_atoms", [8, 10, 12])
    def test_block_diagonal_on_fragments(self, n_atoms):
        basis = enumerate_blockaded(ChainSpec(n_atoms=n_atoms))
        params = RydbergParams()
        coo = build_h_eff2(basis, params.omega, params.v[1]).matrix.tocoo()
        table = find_fragments(basis, build_h_lgt(basis, params.omega / 2))
        assert np.array_equal(table.fragment_ids[coo.row], table.fragment_ids[coo.col])

    def test_exchange_is_two_bond_flips(self, basis10):
        omega, v1 = 2.0, 1.0
        h = build_h_eff2(basis10, omega, v1).matrix
        lgt = build_h_lgt(basis10, omega / 2).matrix
        a = index_of(basis10, parse_config("rggrgggggg", 10))
        mid = index_of(basis10, parse_config("rggrgrgggg", 10))
        b = index_of(basis10, parse_config("rggggrgggg", 10))
        assert lgt[mid, a] * lgt[b, mid] == pytest.approx(omega ** 2 / 4)
        assert h[b, a] == pytest.approx(-omega ** 2 / (4 * v1))
        assert h[a, b] == h[b, a]

    def test_no_nearest_neighbour_hop(self, basis10):
        h = build_h_eff2(basis10, 2.0, 1.0).matrix
        a = index_of(basis10, parse_config("rggrggggrg", 10))
        b = index_of(basis10, parse_config("rgggrgggrg", 10))
        assert h[b, a] == 0

    def test_fragment_part_of_ladder_commutator(self, basis10):
        omega, v1 = 1.3, 0.9
        ops = {op.harmonic: op.matrix for op in build_ladder_ops(basis10, LadderScale.V1, omega)}
        commutator = ((ops[1] @ ops[-1] - ops[-1] @ ops[1]) / v1).tocoo()
        moved = basis10.states[commutator.row] ^ basis10.states[commutator.col]
        keep = (moved & (moved >> 1)) == 0
        expected = np.zeros((len(basis10), len(basis10)))
        np.add.at(expected, (commutator.row[keep], commutator.col[keep]), commutator.data[keep])
        assert np.allclose(build_h_eff2(basis10, omega, v1).to_dense(), expected, atol=1e-12)

    def test_diagonal_shift(self):
        basis = enumerate_blockaded(ChainSpec(n_atoms=5))
        h = build_h_eff2(basis, 2.0, 1.0)
        # every atom free with g on both sides at distance two
        assert h.diagonal()[index_of(basis, parse_config("ggggg", 5))] == pytest.approx(5.0)
        # centre atom: Z = -1 with r at distance two on both sides
        assert h.diagonal()[index_of(basis, parse_config("rgrgr", 5))] == pytest.approx(1.0)

    def test_default_scale(self, basis10, params):
        h = build_h_eff2(basis10, params.omega, params.v[1])
        off = h.matrix - sp.diags(h.diagonal())
        assert abs(off).max() / (2 * np.pi) == pytest.approx(0.053, abs=1e-3)

    def test_rejects_non_positive_v1(self, basis8):
        with pytest.raises(ConfigError):
            build_h_eff2(basis8, 1.0, 0.0)

    def test_rejects_full_space(self, full6):
        with pytest.raises(ConfigError):
            build_h_eff2(full6, 1.0, 1.0)


def test_export(tmp_path, basis8):
    h = build_h_lgt(basis8, 0.5)
    data_path, meta_path = h.export(tmp_path)
    lines = data_path.read_text().splitlines()
    assert len(lines) == h.nnz
    row, col, re, im = lines[0].split()
    assert h.matrix[int(row), int(col)] == float(re)
    assert float(im) == 0.0
    meta = json.loads(meta_path.read_text())
    assert meta["dim"] == len(basis8)
    assert meta["columns"] == ["row", "col", "re", "im"]
