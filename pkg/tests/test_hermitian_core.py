import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pd
from mwlab.hermitian_core import (
    MatrixError,
    PDMatrix,
    appendix_pair,
    converse_pair,
    cordes_check,
    cordes_gap,
    fractional_power,
    power_stack,
    spectral_norm,
    spectral_norm_stack,
)


def test_diagonal_square_root():
    out = fractional_power(np.diag([1.0, 4.0]), 0.5).entries
    assert np.allclose(out, np.diag([1.0, 2.0]), atol=1e-14)


def test_zero_exponent_gives_identity(rng):
    A = random_pd(rng, 3)
    assert np.array_equal(fractional_power(A, 0).entries, np.eye(3))


def test_cube_root_recomposes(rng):
    A = random_pd(rng, 3)
    back = fractional_power(fractional_power(A, 1 / 3), 3).entries
    assert np.allclose(back, A, rtol=1e-9, atol=1e-9 * np.abs(A).max())


@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 4))
def test_power_law_additive(seed, a, b, d):
    A = random_pd(np.random.default_rng(seed), d)
    lhs = fractional_power(A, a).entries @ fractional_power(A, b).entries
    rhs = fractional_power(A, a + b).entries
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.abs(rhs).max())


def test_rejects_non_hermitian():
    with pytest.raises(MatrixError, match="not Hermitian"):
        PDMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_rejects_indefinite():
    with pytest.raises(MatrixError, match="positive definite"):
        PDMatrix(np.diag([1.0, -1.0]))


def test_rejects_dimension_above_cap():
    with pytest.raises(MatrixError, match="dimension"):
        PDMatrix(np.eye(9))


def test_tiny_asymmetry_is_symmetrized():
    a = np.array([[2.0, 1.0], [1.0 + 1e-15, 2.0]])
    m = PDMatrix(a)
    assert np.array_equal(m.entries, m.entries.conj().T)


def test_spectral_norm_examples():
    assert spectral_norm(np.diag([1.0, 7.0])) == pytest.approx(7.0)
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0)


def test_spectral_norm_two_by_two_characteristic_polynomial(rng):
    for _ in range(50):
        A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        G = A.conj().T @ A
        tr = G[0, 0].real + G[1, 1].real
        det = (G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]).real
        top = math.sqrt((tr + math.sqrt(max(tr * tr - 4 * det, 0.0))) / 2)
        assert spectral_norm(A) == pytest.approx(top, rel=1e-10)
        assert spectral_norm_stack(A[None])[0] == pytest.approx(top, rel=1e-10)


def test_spectral_norm_of_pd_matrix_is_top_eigenvalue(rng):
    A = PDMatrix(random_pd(rng, 4))
    assert spectral_norm(A) == pytest.approx(A.eigvalsh()[-1], rel=1e-12)


def test_stack_norm_matches_svd(rng):
    for shape in [(5, 1, 1), (5, 2, 2), (5, 3, 3)]:
        S = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        ref = np.linalg.svd(S, compute_uv=False)[..., 0]
        assert np.allclose(spectral_norm_stack(S), ref, rtol=1e-12)


def test_cordes_commuting_equality():
    A, B = np.diag([1.0, 3.0]), np.diag([2.0, 5.0])
    for a in (0.0, 0.3, 0.7, 1.0):
        rec = cordes_check(A, B, a)
        assert rec.lhs == pytest.approx(rec.rhs, rel=1e-12)


def test_cordes_at_one_is_equality(rng):
    rec = cordes_check(random_pd(rng, 3), random_pd(rng, 3), 1.0)
    assert rec.lhs == pytest.approx(rec.rhs, rel=1e-12)


def test_cordes_half_holds_on_random_pairs(rng):
    for _ in range(500):
        d = int(rng.integers(2, 4))
        assert cordes_check(random_pd(rng, d, 1.5), random_pd(rng, d, 1.5), 0.5).holds


def test_cordes_rejects_exponent_outside_unit_interval(rng):
    with pytest.raises(MatrixError, match=r"\[0, 1\]"):
        cordes_check(np.eye(2), np.eye(2), 1.5)


@pytest.mark.parametrize("n", [1.0, 3.0, 17.5, 1e3, 1e6])
def test_family_one_traces(n):
    C, D = converse_pair(n, "one")
    assert np.trace(C.entries @ D.entries).real == pytest.approx(2.0, abs=1e-12)
    inv = np.linalg.inv(C.entries) @ np.linalg.inv(D.entries)
    assert np.trace(inv).real == pytest.approx(8.0 / 3.0, rel=1e-12)


def test_family_one_at_one_is_identity():
    C, _ = converse_pair(1, "one")
    assert np.array_equal(C.entries, np.eye(2))


def test_contract_alias():
    assert appendix_pair is converse_pair


def test_family_two_accepts_real_index_and_rejects_small():
    C, D = converse_pair(2.5, "two")
    assert C.entries[1, 1].real == pytest.approx(2.5 * (1 + math.log(2.5)))
    with pytest.raises(MatrixError):
        converse_pair(0.5, "two")
    with pytest.raises(MatrixError):
        converse_pair(4, "three")


def test_gap_family_one_grows_like_power():
    ratios = [cordes_gap(n, 2.0) / n for n in (10, 100, 1000)]
    assert max(ratios) / min(ratios) <= 10


@pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
def test_gap_family_one_lower_bound_constant(a):
    ns = np.logspace(0.5, 6, 12)
    c = min(cordes_gap(n, a) / n ** (a - 1) for n in ns)
    assert c > 0.2


def test_gap_family_two_small_index_positive():
    v = cordes_gap(1.0, 0.4, "two")
    assert math.isfinite(v) and v > 0


def test_family_two_product_trace_grows_logarithmically():
    def tr(n):
        C, D = converse_pair(n, "two")
        return np.trace(C.entries @ D.entries).real

    ratio = tr(math.e**4) / tr(math.e**2)
    assert ratio == pytest.approx(5 / 3, rel=0.2)


def test_gap_regime_validation():
    with pytest.raises(MatrixError):
        cordes_gap(10, 0.5, "one")
    with pytest.raises(MatrixError):
        cordes_gap(10, 1.5, "two")


def test_power_stack_rejects_infinite_exponent():
    with pytest.raises(MatrixError):
        power_stack(np.eye(2)[None], math.inf)
