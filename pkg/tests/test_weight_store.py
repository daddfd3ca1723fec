import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwlab.hermitian_core import converse_pair, power_stack
from mwlab.weight_store import (
    Domain,
    PiecewiseWeight,
    WeightError,
    cellwise_power,
    counterexample_blocks,
    counterexample_weight,
    extend_to_line,
    random_weight,
    scalar_weight,
)


def _value_at(W, x):
    return W.values[W.cell_at(x)]


def test_cellwise_power_examples():
    W = PiecewiseWeight.constant(np.diag([1.0, 4.0]), level=2)
    assert cellwise_power(W, 1) is W
    half = cellwise_power(W, 0.5)
    assert np.allclose(half.values, np.diag([1.0, 2.0]))


@given(st.integers(0, 10_000), st.floats(0.2, 3.0))
def test_cellwise_power_roundtrip(seed, s):
    W = random_weight(2, 3, 1.0, seed)
    back = cellwise_power(cellwise_power(W, s), 1 / s)
    assert np.allclose(back.values, W.values, rtol=1e-9, atol=1e-9)


def test_counterexample_cells():
    W = counterexample_weight(2.0, 2.0, 3)
    assert np.allclose(_value_at(W, 0.6), np.eye(2))
    _, D1 = converse_pair(1, "one")
    assert np.allclose(_value_at(W, 0.8), D1.entries)  # q1/2 = 1
    _, D2 = converse_pair(2, "one")
    assert np.allclose(_value_at(W, 0.4), D2.entries)
    A4, _ = counterexample_blocks(2.0, 4)
    assert np.allclose(_value_at(W, 0.01), A4.entries)


def test_counterexample_general_q():
    W = counterexample_weight(1.5, 3.0, 2)
    _, D2 = converse_pair(2, "one")
    assert np.allclose(_value_at(W, 0.4), power_stack(D2.entries, 1.5))


def test_counterexample_independent_of_p1():
    a = counterexample_weight(1.5, 3.0, 5)
    b = counterexample_weight(2.5, 3.0, 5)
    assert np.array_equal(a.values, b.values)


def test_counterexample_validation():
    with pytest.raises(WeightError):
        counterexample_weight(3.0, 2.0, 4)
    with pytest.raises(WeightError):
        counterexample_weight(2.0, 2.0, 41)


def test_extend_to_line():
    w = random_weight(2, 3, 1.0, seed=5)
    L = extend_to_line(w, 2)
    assert L.domain.bounds == (-4.0, 4.0)
    for j in range(8):
        x = (j + 0.5) / 8
        assert np.array_equal(_value_at(L, x), _value_at(w, x))
        assert np.array_equal(_value_at(L, 1 + x), _value_at(w, 1 - x))
        assert np.array_equal(_value_at(L, 2 + x), _value_at(w, x))
        # reflection symmetry x -> 2 - x on [0, 2)
        assert np.array_equal(_value_at(L, x), _value_at(L, 2 - x))


def test_random_weight_identity_and_determinism():
    assert np.array_equal(random_weight(2, 3, 0.0, seed=1).values, PiecewiseWeight.identity(2, 3).values)
    a, b = random_weight(3, 4, 1.0, seed=7), random_weight(3, 4, 1.0, seed=7)
    assert np.array_equal(a.values, b.values)
    assert np.all(np.linalg.eigvalsh(a.values) > 0)
    with pytest.raises(WeightError):
        random_weight(2, 3, -1.0)


def test_save_load_bitwise(tmp_path):
    for W in (random_weight(2, 4, 1.3, seed=3), counterexample_weight(2, 2, 10)):
        path = tmp_path / "w.json"
        W.save(path)
        V = PiecewiseWeight.load(path)
        assert np.array_equal(V.values, W.values)
        assert np.array_equal(V.levels, W.levels) and np.array_equal(V.indices, W.indices)


def test_line_weight_roundtrip():
    L = extend_to_line(counterexample_weight(2, 2, 3), 1)
    V = PiecewiseWeight.from_json(json.loads(json.dumps(L.to_json())))
    assert np.array_equal(V.values, L.values) and V.domain == L.domain


def test_malformed_entry_count_names_cell():
    obj = random_weight(2, 2, 1.0).to_json()
    obj["cells"][2]["matrix"] = obj["cells"][2]["matrix"][:3]
    with pytest.raises(WeightError, match="cell 2"):
        PiecewiseWeight.from_json(obj)


def test_gap_in_cells_rejected():
    with pytest.raises(WeightError, match="tile"):
        PiecewiseWeight(Domain(), np.array([1]), np.array([0]), np.eye(2)[None])


def test_scalar_weight_and_average():
    w = scalar_weight([1.0, 3.0])
    assert w.average(0.0, 1.0)[0, 0].real == pytest.approx(2.0)
    assert w.average(0.25, 0.75)[0, 0].real == pytest.approx(2.0)
    with pytest.raises(WeightError):
        scalar_weight([1.0, 2.0, 3.0])


def test_refine_preserves_values():
    W = counterexample_weight(2, 2, 3)
    R = W.refine(6)
    for x in np.linspace(0.001, 0.999, 37):
        assert np.array_equal(_value_at(R, x), _value_at(W, x))
