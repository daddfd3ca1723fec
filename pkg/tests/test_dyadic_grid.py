from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwlab.dyadic_grid import (
    DyadicError,
    DyadicInterval,
    RealInterval,
    SparseCollection,
    annulus,
    dilate,
    dyadic_family,
    generate_sparse,
    verify_sparse,
)

F = Fraction


def test_dilate_examples():
    Q = DyadicInterval(0, 0)
    assert dilate(Q, 1) == RealInterval(F(0), F(1))
    assert dilate(Q, 3) == RealInterval(F(-2), F(3))
    assert dilate(DyadicInterval(2, 2), 2) == RealInterval(F(1, 4), F(1))


@given(st.integers(0, 12), st.integers(0, 4095), st.fractions(min_value=1, max_value=20))
def test_dilate_contains_and_length(level, index, lam):
    Q = DyadicInterval(level, index % 2**level)
    D = dilate(Q, lam)
    assert D.left <= Q.left and Q.right <= D.right
    assert D.length == (2 * lam - 1) * Q.length


def test_dilate_rejects_small_factor():
    with pytest.raises(DyadicError):
        dilate(DyadicInterval(0, 0), F(1, 2))


def test_annulus_examples():
    Q = DyadicInterval(0, 0)
    assert annulus(Q, 0) == [RealInterval(F(-1), F(2))]
    assert annulus(Q, 1) == [RealInterval(F(-3), F(-1)), RealInterval(F(2), F(4))]


@given(st.integers(0, 6), st.integers(0, 63), st.integers(0, 8))
def test_annuli_partition_outer_dilate(level, index, K):
    Q = DyadicInterval(level, index % 2**level)
    pieces = sorted(p for k in range(K + 1) for p in annulus(Q, k))
    outer = dilate(Q, 2 ** (K + 1))
    assert pieces[0].left == outer.left and pieces[-1].right == outer.right
    assert all(a.right == b.left for a, b in zip(pieces, pieces[1:]))
    # Q itself sits inside the k = 0 piece
    assert sum(p.length for p in pieces) == outer.length


def test_partition_is_one_sparse():
    cert = verify_sparse([DyadicInterval(3, m) for m in range(8)], 1)
    assert cert.ok
    assert all(v == F(1, 8) for v in cert.packing().values())


def test_chain_half_sparse_uses_right_halves():
    n = 6
    chain = [DyadicInterval(k, 0) for k in range(n + 1)]
    cert = verify_sparse(chain, F(1, 2))
    assert cert.ok
    for Q in chain:
        (piece,) = cert.sets[Q]
        assert piece == RealInterval(Q.left + Q.length / 2, Q.right)


def test_full_tree_fails_beyond_counting_bound():
    n = 4
    tree = dyadic_family(n)
    assert not verify_sparse(tree, F(1, n + 1) + F(1, 1000)).ok
    assert verify_sparse(tree, F(1, n + 1)).ok


def test_sets_are_disjoint_and_inside():
    S = generate_sparse(7, 0.3, seed=11)
    cert = verify_sparse(S, 0.3)
    pieces = sorted(p for ps in cert.sets.values() for p in ps)
    assert all(a.right <= b.left for a, b in zip(pieces, pieces[1:]))
    for Q, ps in cert.sets.items():
        assert all(Q.left <= p.left and p.right <= Q.right for p in ps)


def test_generate_depth_zero():
    assert generate_sparse(0, 0.5, seed=3).intervals == (DyadicInterval(0, 0),)


def test_generate_deterministic_and_verified():
    a = generate_sparse(8, 0.5, seed=42)
    b = generate_sparse(8, 0.5, seed=42)
    assert a == b
    assert verify_sparse(a, 0.5).ok
    assert verify_sparse(generate_sparse(4, 0.9, seed=1), 0.9).ok


def test_generate_families_nest_in_depth():
    small, big = generate_sparse(5, 0.25, seed=9), generate_sparse(9, 0.25, seed=9)
    assert set(small.intervals) == {q for q in big.intervals if q.level <= 5}


def test_generate_never_fails_verification():
    for seed in range(1000):
        eps = 0.1 + 0.8 * (seed % 9) / 8
        assert verify_sparse(generate_sparse(6, eps, seed=seed), eps).ok


@given(st.integers(0, 10_000), st.data())
def test_subfamilies_stay_sparse(seed, data):
    S = generate_sparse(6, 0.4, seed=seed)
    keep = data.draw(st.lists(st.sampled_from(S.intervals), unique=True))
    assert verify_sparse(keep, 0.4).ok


def test_epsilon_validation():
    with pytest.raises(DyadicError):
        verify_sparse([DyadicInterval(0, 0)], 0)
    with pytest.raises(DyadicError):
        generate_sparse(3, 1.0)


def test_collection_json_roundtrip(tmp_path):
    S = generate_sparse(6, 0.25, seed=2)
    path = tmp_path / "s.json"
    S.save(path)
    assert SparseCollection.load(path) == S


def test_malformed_collection():
    with pytest.raises(DyadicError):
        SparseCollection.from_json({"intervals": [[0]], "epsilon": 0.5})
