import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccs import (
    BlockDistribution,
    Model,
    Partition,
    SampleTrace,
    empirical_block_distribution,
    log_cardinality,
    pips,
    restrict,
)

from conftest import random_trace


class TestModel:
    def test_round_trip(self):
        m = Model.from_bits([1, 0, 0, 1, 1])
        assert m.bits == (1, 0, 0, 1, 1)
        assert len(m) == 5
        assert m.count() == 3
        assert str(m) == "10011"

    def test_equality_and_hash_on_packed_form(self):
        a = Model.from_bits([1, 0, 1])
        b = Model.from_bits(np.array([1, 0, 1], dtype=np.uint8))
        assert a == b and hash(a) == hash(b)
        assert a != Model.from_bits([1, 0, 0])

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            Model.from_bits([0, 2, 1])

    def test_rejects_dirty_padding(self):
        with pytest.raises(ValueError):
            Model(packed=b"\xff", n_bits=3)

    def test_rejects_wrong_packed_length(self):
        with pytest.raises(ValueError):
            Model(packed=b"\x01\x00", n_bits=3)


class TestRestrict:
    def test_projection(self):
        m = Model.from_bits([1, 0, 0, 1, 1])
        assert restrict(m, {0, 1}).bits == (1, 0)
        assert restrict(m, {3, 4}).bits == (1, 1)

    def test_zero_model(self):
        m = Model.from_bits([0] * 6)
        assert restrict(m, (1, 3, 5)).bits == (0, 0, 0)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            restrict(Model.from_bits([1, 0]), (0, 2))

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_blockwise_restriction_reassembles(self, data):
        p = data.draw(st.integers(2, 12))
        bits = data.draw(st.lists(st.integers(0, 1), min_size=p, max_size=p))
        n_blocks = data.draw(st.integers(1, p))
        assignment = data.draw(
            st.lists(st.integers(0, n_blocks - 1), min_size=p, max_size=p)
        )
        blocks = [
            tuple(i for i, b in enumerate(assignment) if b == k)
            for k in range(n_blocks)
        ]
        blocks = [b for b in blocks if b]
        model = Model.from_bits(bits)
        rebuilt = [None] * p
        for block in blocks:
            sub = restrict(model, block)
            for idx, bit in zip(block, sub.bits):
                rebuilt[idx] = bit
        assert tuple(rebuilt) == model.bits

    def test_reassembly_exhaustive_small_p(self):
        p = 6
        partition = Partition(((0, 3), (1, 2, 5), (4,)))
        for code in range(2**p):
            bits = [(code >> i) & 1 for i in range(p)]
            model = Model.from_bits(bits)
            rebuilt = [None] * p
            for block in partition.blocks:
                for idx, bit in zip(block, restrict(model, block).bits):
                    rebuilt[idx] = bit
            assert tuple(rebuilt) == model.bits


class TestSampleTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            SampleTrace([[0, 2]], ["a", "b"])
        with pytest.raises(ValueError):
            SampleTrace([[0, 1]], ["a", "a"])
        with pytest.raises(ValueError):
            SampleTrace(np.empty((0, 2)), ["a", "b"])

    def test_matrix_read_only(self):
        trace = SampleTrace([[0, 1]], ["a", "b"])
        with pytest.raises(ValueError):
            trace.matrix[0, 0] = 1

    def test_restrict_columns_keeps_order_and_labels(self):
        trace = SampleTrace([[0, 1, 1], [1, 0, 1]], ["a", "b", "c"])
        reduced = trace.restrict_columns([0, 2])
        assert reduced.labels == ("a", "c")
        assert np.array_equal(reduced.matrix, [[0, 1], [1, 1]])


class TestPartition:
    def test_sorts_block_indices(self):
        part = Partition(((3, 1), (0, 2)))
        assert part.blocks == ((1, 3), (0, 2))

    def test_rejects_overlap_and_empty(self):
        with pytest.raises(ValueError):
            Partition(((0, 1), (1, 2)))
        with pytest.raises(ValueError):
            Partition(((0,), ()))

    def test_merge(self):
        part = Partition(((0,), (1,), (2,)))
        merged = part.merge(0, 2)
        assert merged.blocks == ((0, 2), (1,))

    def test_relabel(self):
        part = Partition(((0, 1), (2,)))
        assert part.relabel([5, 7, 9]).blocks == ((5, 7), (9,))


class TestEmpiricalBlockDistribution:
    def test_counting(self):
        trace = SampleTrace([[0, 1], [0, 1], [1, 0], [1, 1]], ["a", "b"])
        dist = empirical_block_distribution(trace, (0, 1))
        expected = {
            Model.from_bits([0, 1]): Fraction(1, 2),
            Model.from_bits([1, 0]): Fraction(1, 4),
            Model.from_bits([1, 1]): Fraction(1, 4),
        }
        assert dict(dist.mass) == expected

    def test_degenerate_single_support_point(self):
        trace = SampleTrace([[1, 0]] * 7, ["a", "b"])
        dist = empirical_block_distribution(trace, (0, 1))
        assert dict(dist.mass) == {Model.from_bits([1, 0]): Fraction(1)}

    def test_empty_block_rejected(self):
        trace = SampleTrace([[0, 1]], ["a", "b"])
        with pytest.raises(ValueError):
            empirical_block_distribution(trace, ())

    def test_matches_product_bernoulli_within_3_se(self):
        # oracle: exact product probabilities for two independent Bern(0.3)
        rng = np.random.default_rng(11)
        n = 10_000
        matrix = (rng.random((n, 2)) < 0.3).astype(np.uint8)
        dist = empirical_block_distribution(SampleTrace(matrix, ["a", "b"]), (0, 1))
        exact = {(0, 0): 0.49, (0, 1): 0.21, (1, 0): 0.21, (1, 1): 0.09}
        for bits, prob in exact.items():
            se = math.sqrt(prob * (1 - prob) / n)
            observed = float(dist.probability(Model.from_bits(bits)))
            assert abs(observed - prob) < 3 * se

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 40))
    def test_masses_sum_to_one(self, seed, width, n):
        rng = np.random.default_rng(seed)
        trace = random_trace(rng, n, width)
        dist = empirical_block_distribution(trace, tuple(range(width)))
        assert sum(dist.mass.values()) == 1
        assert dist.n_support <= min(n, 2**width)

    def test_singleton_block_reproduces_pip(self, gm_trace):
        pv = pips(gm_trace)
        for i in (0, 5, 9):
            dist = empirical_block_distribution(gm_trace, (i,))
            assert float(dist.probability(Model.from_bits([1]))) == pytest.approx(
                pv[i], abs=1e-15
            )


class TestBlockDistribution:
    def test_from_mapping_drops_zeros(self):
        dist = BlockDistribution.from_mapping(
            (0, 1), {"00": 0, "01": Fraction(1, 2), "10": Fraction(1, 2)}
        )
        assert Model.from_bits([0, 0]) not in dist.mass
        assert dist.n_support == 2

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            BlockDistribution.from_mapping((0,), {"0": Fraction(1, 2)})

    def test_rejects_wrong_width(self):
        with pytest.raises(ValueError):
            BlockDistribution((0, 1), {Model.from_bits([1]): Fraction(1)})


class TestLogCardinality:
    def test_gm_set_size(self):
        # blocks of sizes 2, 2, 2 and 3 describe 24 distinct models
        assert log_cardinality([2, 2, 2, 3]) == pytest.approx(math.log(24))

    def test_singletons(self):
        assert log_cardinality([["m"], ["m"], ["m"]]) == 0.0

    def test_one_large_set(self):
        p = 9
        assert log_cardinality([2**p, 1, 1]) == pytest.approx(p * math.log(2))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            log_cardinality([2, 0, 3])
