import pytest

from fraglab.api.recipes import FIVE_CLUSTER_TABLE
from fraglab.exceptions import ConstraintViolation
from fraglab.models.lattice import BitConfig
from fraglab.models.schemas import ClusterKind
from fraglab.services.basis import parse_config
from fraglab.services.lgtmap import (
    cluster_spans, decompose, decomposition_record, electric_strings, gauss_check, invert, reconstruct,
    site_charges, sliom_pattern
)

from .conftest import Z3, Z5


class TestDecompose:
    def test_z5_clusters(self):
        config = parse_config(Z5, 16)
        decomp = decompose(config)
        assert [(c.left, c.right) for c in decomp.clusters] == [(1, 1), (4, 6), (9, 11), (14, 16), (19, 19)]
        assert all(c.kind == ClusterKind.CHARGED for c in decomp.clusters)
        assert [c.charge for c in decomp.clusters] == [-1, 1, -1, 1, -1]
        assert decomp.n_sites == 19

    def test_z5_pattern_is_padded_with_zeros(self):
        pattern = sliom_pattern(decompose(parse_config(Z5, 16)))
        assert pattern.q == (1, 1, 1, 1, 1, 0, 0)
        assert pattern.n_c == 5
        assert pattern.braces() == "{1,1,1,1,1,0,0}"

    def test_z3_is_all_single_site_clusters(self):
        decomp = decompose(parse_config(Z3, 16))
        assert decomp.n_clusters == 7
        assert all(c.length == 1 for c in decomp.clusters)

    def test_neutral_cluster(self):
        decomp = decompose(BitConfig.from_string("gggrgg"))
        assert [c.kind for c in decomp.clusters] == [ClusterKind.NEUTRAL, ClusterKind.CHARGED]
        assert decomp.clusters[0].charge == 0

    @pytest.mark.parametrize("row", FIVE_CLUSTER_TABLE, ids=lambda r: r.label)
    def test_five_cluster_initial_states(self, row):
        if row.initial_state is None:
            pytest.skip("no initial state for this fragment")
        pattern = sliom_pattern(decompose(parse_config(row.initial_state, 16)))
        assert pattern.nonzero == row.pattern

    def test_rejects_blockade_violation(self):
        with pytest.raises(ConstraintViolation):
            decompose(BitConfig.from_string("ggrrgg"))

    def test_rejects_small_k_max(self):
        with pytest.raises(ConstraintViolation):
            sliom_pattern(decompose(parse_config(Z5, 16)), k_max=4)

    def test_reconstruct_inverts_decompose(self, basis10):
        for ordinal in range(len(basis10)):
            config = basis10.config(ordinal)
            assert reconstruct(decompose(config), config.n_padded) == config


class TestGaugeFields:
    def test_small_chain_strings(self):
        config = BitConfig.from_string("ggrgg")
        assert electric_strings(config).arrows() == "><<<>"
        assert site_charges(electric_strings(config)) == [-1, 0, 0, 1]

    def test_gauss_law_on_whole_basis(self, basis10):
        assert all(gauss_check(basis10.config(o)) for o in range(len(basis10)))

    def test_cluster_charge_matches_site_charges(self, basis10):
        for ordinal in range(len(basis10)):
            config = basis10.config(ordinal)
            charges = site_charges(electric_strings(config))
            decomp = decompose(config)
            for cluster in decomp.clusters:
                assert sum(charges[cluster.left - 1:cluster.right]) == cluster.charge
            for run in decomp.vacuum_runs:
                assert not any(charges[run.start - 1:run.start - 1 + run.length])


class TestInversion:
    def test_involution(self, basis8):
        for ordinal in range(len(basis8)):
            config = basis8.config(ordinal)
            assert invert(invert(config)) == config

    def test_reverses_pattern(self):
        config = parse_config("grgggrggggrggggr", 16)
        assert sliom_pattern(decompose(invert(config))).nonzero == (1, 1, 1, -1, -1)

    def test_palindrome(self):
        config = parse_config(Z5, 16)
        assert invert(config) == config


def test_spans_and_record():
    assert cluster_spans("ggrgg") == [(1, 1), (4, 4)]
    record = decomposition_record(parse_config("rgggggrggrgggggr", 16))
    assert record["label"] == "c n c n c"
    assert record["pattern"][:5] == [1, -1, 1, -1, 1]
