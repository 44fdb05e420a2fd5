import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recombkin import (
    AlphabetSpec,
    Distribution,
    SubsetMask,
    ValidationError,
    all_subset_masks,
    decode,
    encode,
    interval_masks,
    l1_distance,
    marginalize,
    neg_entropy,
    product_measure,
    relative_entropy,
    splice,
    total_variation,
)

import oracles


def test_encode_examples(binary2):
    assert encode([0, 0], binary2) == 0  # "AA"
    assert encode([1, 0], binary2) == 2  # "BA"
    spec = AlphabetSpec(4, 3)
    assert encode([3, 0, 2], spec) == 3 * 16 + 0 * 4 + 2


def test_encode_rejects_out_of_range(binary2):
    with pytest.raises(ValidationError):
        encode([0, 2], binary2)
    with pytest.raises(ValidationError):
        encode([0], binary2)


@pytest.mark.parametrize("k,n", [(2, 10), (3, 6), (5, 4), (17, 2)])
def test_decode_encode_identity_exhaustive(k, n):
    spec = AlphabetSpec(k, n)
    for idx in range(spec.size):
        assert encode(decode(idx, spec), spec) == idx


def test_decode_out_of_range(binary2):
    with pytest.raises(ValidationError):
        decode(4, binary2)
    with pytest.raises(ValidationError):
        decode(-1, binary2)


def test_spec_validation():
    with pytest.raises(ValidationError):
        AlphabetSpec(1, 3)
    with pytest.raises(ValidationError):
        AlphabetSpec(2, 0)
    with pytest.raises(ValidationError):
        AlphabetSpec(2, 3, symbols=("A", "A"))
    with pytest.raises(ValidationError):
        AlphabetSpec(2, 200)  # exceeds platform index range


def test_genome_formatting(binary3):
    assert binary3.format_genome(0b101) == "BAB"
    assert binary3.parse_genome("BAB") == 5
    with pytest.raises(ValidationError):
        binary3.parse_genome("BAX")


def test_splice_examples(binary2):
    x = encode([1, 0], binary2)  # BA
    y = encode([0, 1], binary2)  # AB
    one = SubsetMask.from_positions([1], 2)
    assert splice(x, y, one, binary2) == encode([1, 1], binary2)  # BB
    assert splice(x, y, SubsetMask.empty(2), binary2) == x
    assert splice(x, y, SubsetMask.full(2), binary2) == y


def test_splice_complement_symmetry(binary3):
    for bits in range(8):
        mask = SubsetMask(bits, 3)
        for x in range(binary3.size):
            for y in range(binary3.size):
                assert splice(x, y, mask, binary3) == splice(
                    y, x, mask.complement, binary3
                )


def test_mask_invariants():
    mask = SubsetMask.from_positions([0, 2], 3)
    assert mask.positions == (0, 2)
    assert mask.size == 2
    comp = mask.complement
    assert mask.bits | comp.bits == 0b111
    assert mask.bits & comp.bits == 0
    with pytest.raises(ValidationError):
        SubsetMask(0b1000, 3)
    with pytest.raises(ValidationError):
        SubsetMask.from_positions([3], 3)


def test_mask_families():
    ivs = interval_masks(3, 1, 3)
    assert len(ivs) == 6  # 3 singles, 2 pairs, 1 triple
    assert all_subset_masks(3) == [SubsetMask(b, 3) for b in range(1, 8)]
    assert len(all_subset_masks(3, include_empty=True)) == 8
    with pytest.raises(ValidationError):
        all_subset_masks(13)
    with pytest.raises(ValidationError):
        interval_masks(3, 2, 1)


def test_marginalize_examples(binary2):
    uniform = Distribution.uniform(binary2)
    first = marginalize(uniform, SubsetMask.from_positions([0], 2))
    assert np.allclose(first.probs, [0.5, 0.5])

    point = Distribution.point_mass(binary2, encode([0, 1], binary2))  # AB
    second = marginalize(point, SubsetMask.from_positions([1], 2))
    assert np.allclose(second.probs, [0.0, 1.0])

    mu = Distribution(binary2, [0.1, 0.2, 0.3, 0.4])
    first = marginalize(mu, SubsetMask.from_positions([0], 2))
    assert np.allclose(first.probs, [0.3, 0.7], atol=1e-15)


def test_marginalize_empty_mask_rejected(binary2):
    with pytest.raises(ValidationError):
        marginalize(Distribution.uniform(binary2), SubsetMask.empty(2))


def test_product_measure_examples():
    k2 = AlphabetSpec(2, 1)
    uniform = Distribution.uniform(k2)
    prod = product_measure([uniform, uniform])
    assert np.allclose(prod.probs, 0.25)

    a = Distribution(k2, [1.0, 0.0])
    b = Distribution(k2, [0.0, 1.0])
    prod = product_measure([a, b])
    assert np.allclose(prod.probs, [0.0, 1.0, 0.0, 0.0])  # point mass on AB

    thirds = Distribution(k2, [1 / 3, 2 / 3])
    halves = Distribution(k2, [0.5, 0.5])
    prod = product_measure([thirds, halves])
    assert np.allclose(prod.probs, [1 / 6, 1 / 6, 1 / 3, 1 / 3], atol=1e-15)


def test_product_measure_validation(binary2):
    with pytest.raises(ValidationError):
        product_measure([])
    with pytest.raises(ValidationError):
        product_measure([Distribution.uniform(binary2)])


def test_marginal_of_product_recovers_site_laws(rng):
    k2 = AlphabetSpec(3, 1)
    laws = [
        Distribution(k2, rng.dirichlet(np.ones(3)))
        for _ in range(4)
    ]
    prod = product_measure(laws)
    for i, law in enumerate(laws):
        marg = marginalize(prod, SubsetMask.from_positions([i], 4))
        assert np.abs(marg.probs - law.probs).max() < 1e-14


def test_neg_entropy_examples():
    four = AlphabetSpec(4, 1)
    assert math.isclose(neg_entropy(Distribution.uniform(four)), -math.log(4), rel_tol=1e-12)
    assert neg_entropy(Distribution.point_mass(four, 2)) == 0.0
    two = AlphabetSpec(2, 1)
    val = neg_entropy(Distribution(two, [0.75, 0.25]))
    assert math.isclose(val, 0.75 * math.log(0.75) + 0.25 * math.log(0.25), rel_tol=1e-12)
    assert math.isclose(val, -0.5623351, abs_tol=1e-7)


def test_relative_entropy_examples():
    two = AlphabetSpec(2, 1)
    q = Distribution(two, [0.5, 0.5])
    assert relative_entropy(q, q) == 0.0
    assert math.isclose(relative_entropy(Distribution(two, [1.0, 0.0]), q), math.log(2), rel_tol=1e-12)
    val = relative_entropy(Distribution(two, [0.75, 0.25]), q)
    assert math.isclose(val, 0.75 * math.log(1.5) + 0.25 * math.log(0.5), rel_tol=1e-12)
    assert math.isclose(val, 0.1308123, abs_tol=1e-6)


def test_relative_entropy_zero_reference_rejected():
    two = AlphabetSpec(2, 1)
    with pytest.raises(ValidationError):
        relative_entropy(Distribution(two, [0.5, 0.5]), Distribution(two, [1.0, 0.0]))


def test_l1_examples(binary2):
    mu = Distribution.uniform(binary2)
    assert l1_distance(mu, mu) == 0.0
    a = Distribution.point_mass(binary2, 0)
    b = Distribution.point_mass(binary2, 3)
    assert l1_distance(a, b) == 2.0
    assert total_variation(a, b) == 1.0
    two = AlphabetSpec(2, 1)
    assert math.isclose(
        l1_distance(Distribution(two, [0.6, 0.4]), Distribution(two, [0.5, 0.5])), 0.2
    )


def test_l1_space_mismatch(binary2, binary3):
    with pytest.raises(ValidationError):
        l1_distance(Distribution.uniform(binary2), Distribution.uniform(binary3))


def test_distribution_validation(binary2):
    with pytest.raises(ValidationError):
        Distribution(binary2, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValidationError):
        Distribution(binary2, [0.5, 0.5, 0.5, 0.5])  # sums to 2
    with pytest.raises(ValidationError):
        Distribution(binary2, [0.25, 0.25])  # wrong size
    # small drift gets renormalized
    drifted = Distribution(binary2, np.full(4, 0.25 * (1 + 1e-9)))
    assert math.isclose(drifted.probs.sum(), 1.0, abs_tol=1e-15)


def test_distribution_immutable(binary2):
    mu = Distribution.uniform(binary2)
    with pytest.raises(ValueError):
        mu.probs[0] = 1.0
    with pytest.raises(AttributeError):
        mu.probs = np.zeros(4)


@st.composite
def small_distribution(draw):
    size = draw(st.sampled_from([2, 3, 4, 8]))
    weights = draw(
        st.lists(st.floats(1e-6, 1.0), min_size=size, max_size=size)
    )
    spec = AlphabetSpec(size, 1) if size != 8 else AlphabetSpec(2, 3)
    return Distribution.from_weights(spec, np.array(weights))


@settings(max_examples=60, deadline=None)
@given(small_distribution(), small_distribution())
def test_relative_entropy_nonnegative(mu, q):
    if mu.spec != q.spec:
        return
    d = relative_entropy(mu, q)
    assert d >= 0.0
    if l1_distance(mu, q) < 1e-12:
        assert d < 1e-10


@settings(max_examples=40, deadline=None)
@given(small_distribution())
def test_entropy_bounds(mu):
    h = neg_entropy(mu)
    assert -math.log(mu.spec.size) - 1e-12 <= h <= 1e-15
    assert math.isclose(h, oracles.literal_neg_entropy(mu.probs), abs_tol=1e-12)
