import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vamgrid import tensor as T
from vamgrid.tensor import ContractError, NumericError, ShapeError, Tensor, no_grad


def t(x, grad=False):
    return Tensor(np.asarray(x, dtype=float), requires_grad=grad)


# -- hand examples --------------------------------------------------------
def test_matmul_identity():
    m = np.array([[1.0, 2], [3, 4]])
    np.testing.assert_array_equal(T.matmul(t(np.eye(2)), t(m)).data, m)


def test_matmul_hand_arithmetic():
    assert T.matmul(t([[1, 2]]), t([[3], [4]])).data.tolist() == [[11.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(t(np.ones((2, 3))), t(np.ones((2, 3))))


def test_softmax_uniform():
    np.testing.assert_allclose(T.softmax(t([0, 0, 0])).data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_softmax_stable_for_large_logits():
    out = T.softmax(t([1000, 0])).data
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-300)


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        T.softmax(t([0.0, np.nan]))
    with pytest.raises(NumericError):
        T.log_softmax(t([np.inf, 0.0]))


def test_cross_entropy_uniform_is_log4():
    assert T.cross_entropy(t(np.zeros((1, 4))), [2]).item() == pytest.approx(math.log(4), abs=1e-12)
    assert math.log(4) == pytest.approx(1.3863, abs=1e-4)


def test_cross_entropy_saturates():
    logits = np.zeros((1, 4))
    logits[0, 1] = 50.0
    assert T.cross_entropy(t(logits), [1]).item() < 1e-20


def test_cross_entropy_target_out_of_range():
    with pytest.raises(IndexError):
        T.cross_entropy(t(np.zeros((2, 3))), [0, 3])
    with pytest.raises(IndexError):
        T.cross_entropy(t(np.zeros((2, 3))), [-1, 0])


def test_layer_norm_constant_row_is_zero():
    np.testing.assert_array_equal(T.layer_norm(t([[5, 5, 5, 5]])).data, np.zeros((1, 4)))


def test_layer_norm_symmetric_row():
    out = T.layer_norm(t([[1, -1]])).data
    np.testing.assert_allclose(out, [[1 / math.sqrt(1 + T.LN_EPS), -1 / math.sqrt(1 + T.LN_EPS)]],
                               rtol=1e-14)


def test_attention_single_key_returns_value(rng):
    q = t(rng.normal(size=(3, 4)))
    v = rng.normal(size=(1, 4))
    out = T.attention(q, t(rng.normal(size=(1, 4))), t(v)).data
    np.testing.assert_allclose(out, np.repeat(v, 3, axis=0), rtol=1e-14)


def test_attention_identical_keys_average_values(rng):
    k = np.tile(rng.normal(size=(1, 4)), (5, 1))
    v = rng.normal(size=(5, 4))
    out = T.attention(t(rng.normal(size=(2, 4))), t(k), t(v)).data
    np.testing.assert_allclose(out, np.tile(v.mean(axis=0), (2, 1)), rtol=1e-12)


def test_attention_width_mismatch():
    with pytest.raises(ShapeError):
        T.attention(t(np.ones((2, 3))), t(np.ones((2, 4))), t(np.ones((2, 4))))


# -- backward semantics ---------------------------------------------------
def test_backward_requires_scalar():
    x = t([1.0, 2.0], grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_shared_subexpression_accumulates():
    """5-node DAG: a -> b=a*a, c=b*a, d=b+c, e=sum(d*b); compare with per-path chain rule."""
    a0 = np.array([0.7, -1.3, 2.0])
    a = t(a0, grad=True)
    b = a * a
    c = b * a
    d = b + c
    e = (d * b).sum()
    e.backward()
    # e = (a^2 + a^3) * a^2 = a^4 + a^5, summed over paths: a->b (x2 via d and the outer b), a->c
    # path de/db (outer) * db/da  +  de/dd * dd/db * db/da  +  de/dd * dd/dc * (dc/db db/da + dc/da)
    db_da = 2 * a0
    de_db_outer = a0**2 + a0**3
    de_dd = a0**2
    via_outer = de_db_outer * db_da
    via_d_b = de_dd * 1 * db_da
    via_c = de_dd * 1 * (a0 * db_da + a0**2)
    np.testing.assert_allclose(a.grad, via_outer + via_d_b + via_c, rtol=1e-14)
    np.testing.assert_allclose(a.grad, 4 * a0**3 + 5 * a0**4, rtol=1e-14)


def test_leaf_gradients_accumulate_until_zeroed():
    x = t([1.0, 2.0], grad=True)
    (x * x).sum().backward()
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * 2 * x.data)
    x.zero_grad()
    assert x.grad is None or not np.any(x.grad)


def test_no_grad_builds_no_graph():
    x = t([1.0], grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad


def test_broadcast_gradients_unbroadcast(rng):
    a = t(rng.normal(size=(3, 4)), grad=True)
    b = t(rng.normal(size=(4,)), grad=True)
    (a * b).sum().backward()
    np.testing.assert_allclose(b.grad, a.data.sum(axis=0))
    np.testing.assert_allclose(a.grad, np.broadcast_to(b.data, (3, 4)))


def test_identical_runs_are_bitwise_equal(rng):
    x0 = rng.normal(size=(4, 5))
    w0 = rng.normal(size=(5, 3))

    def run():
        x, w = t(x0), t(w0, grad=True)
        T.cross_entropy(T.gelu(x @ w), [0, 1, 2, 0]).backward()
        return w.grad.tobytes()

    assert run() == run()


# -- properties -----------------------------------------------------------
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=finite))
def test_softmax_is_a_distribution(x):
    p = T.softmax(t(x), axis=-1).data
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 6)), elements=finite))
def test_log_softmax_matches_log_of_softmax(x):
    a = T.log_softmax(t(x)).data
    p = T.softmax(t(x)).data
    ok = p > 1e-300
    np.testing.assert_allclose(a[ok], np.log(p[ok]), rtol=1e-9, atol=1e-9)
