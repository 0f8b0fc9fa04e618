import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pigat import nn
from pigat.errors import DomainError, ShapeError, UsageError

# Hand-derived expected values. softmax(ln 2, 0) exponentiates to (2, 1)
# and normalizes by 3; the masked case exponentiates the live pair
# (ln 3, ln 1) to (3, 1) and normalizes by 4.
SOFTMAX_LN2 = (2.0 / 3.0, 1.0 / 3.0)
MASKED_LN3 = (0.75, 0.0, 0.25)
SIGMOID_LN3 = 0.75


def test_affine_example():
    w = np.array([[1.0, 1.0], [0.0, 1.0]])
    x = np.array([1.0, 2.0])
    b = np.array([1.0, 0.0])
    np.testing.assert_allclose(nn.affine_forward(w, x, b), [4.0, 2.0], rtol=0, atol=0)


def test_affine_batched_matches_loop():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 5))
    b = rng.normal(size=3)
    xs = rng.normal(size=(7, 5))
    out = nn.affine_forward(w, xs, b)
    for i in range(7):
        np.testing.assert_allclose(out[i], w @ xs[i] + b, rtol=1e-12, atol=1e-14)


def test_affine_shape_mismatch_names_shapes():
    with pytest.raises(ShapeError) as exc:
        nn.affine_forward(np.zeros((2, 3)), np.zeros(4), np.zeros(2))
    assert "(2, 3)" in str(exc.value) and "(4,)" in str(exc.value)


def test_leaky_relu_values():
    assert nn.leaky_relu(np.array(3.0)) == 3.0
    assert nn.leaky_relu(np.array(-5.0), slope=0.2) == -1.0
    assert nn.leaky_relu(np.array(0.0)) == 0.0


def test_leaky_relu_slope_domain():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            nn.leaky_relu(np.ones(2), slope=bad)


def test_softmax_example():
    out = nn.softmax(np.array([np.log(2.0), 0.0]))
    np.testing.assert_allclose(out, SOFTMAX_LN2, rtol=1e-15)


def test_softmax_empty_domain_error():
    with pytest.raises(DomainError):
        nn.softmax(np.zeros(0))


@given(
    st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=8),
    st.floats(min_value=-30, max_value=30),
)
def test_softmax_shift_invariant_and_normalized(zs, shift):
    z = np.array(zs)
    a = nn.softmax(z)
    b = nn.softmax(z + shift)
    assert abs(a.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_masked_softmax_example():
    z = np.array([np.log(3.0), 0.0, np.log(1.0)])
    mask = np.array([True, False, True])
    np.testing.assert_allclose(nn.masked_softmax(z, mask), MASKED_LN3, rtol=1e-15)


def test_masked_softmax_all_dead_is_zero_vector():
    out = nn.masked_softmax(np.array([5.0, -2.0]), np.array([False, False]))
    np.testing.assert_array_equal(out, np.zeros(2))


def test_masked_softmax_shape_mismatch():
    with pytest.raises(ShapeError):
        nn.masked_softmax(np.zeros(3), np.zeros(2, dtype=bool))


@given(
    st.lists(st.floats(min_value=-40, max_value=40), min_size=1, max_size=7),
    st.data(),
)
def test_masked_softmax_matches_softmax_on_live_subset(zs, data):
    z = np.array(zs)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(zs), max_size=len(zs))))
    out = nn.masked_softmax(z, mask)
    assert np.all(out[~mask] == 0.0)
    if mask.any():
        np.testing.assert_allclose(out[mask], nn.softmax(z[mask]), atol=1e-12)


def test_masked_softmax_batched_rows_independent():
    z = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    mask = np.array([[True, True, False], [False, False, False]])
    out = nn.masked_softmax(z, mask)
    np.testing.assert_allclose(out[0], nn.masked_softmax(z[0], mask[0]))
    np.testing.assert_array_equal(out[1], np.zeros(3))


def test_sigmoid_values():
    assert nn.sigmoid(0.0) == 0.5
    assert abs(nn.sigmoid(np.log(3.0)) - SIGMOID_LN3) < 1e-15
    # No overflow at extreme logits, and the limits are exact.
    assert nn.sigmoid(1000.0) == 1.0
    assert nn.sigmoid(-1000.0) == 0.0


@given(st.floats(min_value=-100, max_value=100))
def test_sigmoid_symmetry(x):
    assert abs(nn.sigmoid(x) + nn.sigmoid(-x) - 1.0) < 1e-12


def test_dropout_mask_zero_ratio_is_identity():
    rng = np.random.default_rng(1)
    np.testing.assert_array_equal(nn.dropout_mask(10, 0.0, rng), np.ones(10))


def test_dropout_mask_scales_kept_units():
    rng = np.random.default_rng(7)
    m = nn.dropout_mask(1000, 0.5, rng)
    kept = m[m > 0]
    assert np.all(kept == 2.0)
    # Same seed, same mask.
    m2 = nn.dropout_mask(1000, 0.5, np.random.default_rng(7))
    np.testing.assert_array_equal(m, m2)


def test_dropout_mask_ratio_domain():
    rng = np.random.default_rng(0)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            nn.dropout_mask(4, bad, rng)


def test_glorot_bound():
    rng = np.random.default_rng(3)
    w = nn.glorot_uniform(rng, 30, 50)
    bound = np.sqrt(6.0 / 80.0)
    assert w.shape == (30, 50)
    assert np.all(np.abs(w) <= bound)
    assert np.abs(w).max() > 0.5 * bound


def test_finite_difference_on_square():
    grad = nn.finite_difference_gradient(lambda x: float(x[0] ** 2), np.array([3.0]))
    assert abs(grad[0] - 6.0) < 1e-8


def test_finite_difference_multivariate():
    f = lambda x: float(np.sin(x[0]) + x[1] ** 3)
    grad = nn.finite_difference_gradient(f, np.array([0.3, 1.2]))
    np.testing.assert_allclose(grad, [np.cos(0.3), 3 * 1.2**2], rtol=1e-8)


def _ffn_case(seed, dims):
    rng = np.random.default_rng(seed)
    params = nn.ffn_init(rng, dims, slope=0.1)
    for w in params.weights:
        w += 0.05 * np.sign(w)  # push pre-activations away from the kink
    x = rng.normal(size=(4, dims[0]))
    coef = rng.normal(size=(4, dims[-1]))
    return params, x, coef


@pytest.mark.parametrize("dims", [[3, 1], [4, 5, 1], [4, 6, 3, 2]])
def test_ffn_backward_matches_finite_differences(dims):
    params, x, coef = _ffn_case(11, dims)
    out, cache = nn.ffn_forward(params, x)
    d_in, d_ws, d_bs = nn.ffn_backward(params, cache, coef)

    def loss_with(arr, setter):
        def f(v):
            old = arr.copy()
            arr[...] = v.reshape(arr.shape)
            y, _ = nn.ffn_forward(params, setter())
            arr[...] = old
            return float(np.sum(y * coef))

        return f

    for i, w in enumerate(params.weights):
        fd = nn.finite_difference_gradient(loss_with(w, lambda: x), w.ravel(), h=1e-6)
        np.testing.assert_allclose(d_ws[i].ravel(), fd, rtol=1e-5, atol=1e-8)
    for i, b in enumerate(params.biases):
        fd = nn.finite_difference_gradient(loss_with(b, lambda: x), b.ravel(), h=1e-6)
        np.testing.assert_allclose(d_bs[i].ravel(), fd, rtol=1e-5, atol=1e-8)

    def loss_x(v):
        y, _ = nn.ffn_forward(params, v.reshape(x.shape))
        return float(np.sum(y * coef))

    fd_x = nn.finite_difference_gradient(loss_x, x.ravel(), h=1e-6)
    np.testing.assert_allclose(d_in.ravel(), fd_x, rtol=1e-5, atol=1e-8)


def test_ffn_single_layer_is_affine():
    rng = np.random.default_rng(2)
    params = nn.ffn_init(rng, [4, 2])
    x = rng.normal(size=4)
    out, _ = nn.ffn_forward(params, x)
    np.testing.assert_allclose(out, nn.affine_forward(params.weights[0], x, params.biases[0]))


def test_ffn_backward_rejects_stale_cache():
    rng = np.random.default_rng(5)
    params = nn.ffn_init(rng, [3, 2])
    other = nn.ffn_init(rng, [3, 4, 2])
    _, cache = nn.ffn_forward(params, rng.normal(size=3))
    with pytest.raises(UsageError):
        nn.ffn_backward(other, cache, np.zeros(2))


def test_adam_first_step_moves_by_learning_rate():
    state = nn.AdamState(learning_rate=1e-3)
    p = {"w": np.array([0.0])}
    nn.adam_step(state, p, {"w": np.array([1.0])})
    # Bias correction makes the first step -lr regardless of gradient scale,
    # up to the eps denominator shift.
    assert abs(p["w"][0] + 1e-3) < 1e-10
    assert state.t == 1


def test_adam_step_counter_and_l2():
    state = nn.AdamState(learning_rate=0.1, l2=0.5)
    p = {"w": np.array([2.0])}
    nn.adam_step(state, p, {"w": np.array([0.0])})
    nn.adam_step(state, p, {"w": np.array([0.0])})
    assert state.t == 2
    # Zero gradient still decays the weight through the coupled L2 term.
    assert p["w"][0] < 2.0


def test_adam_converges_on_quadratic():
    state = nn.AdamState(learning_rate=0.05)
    p = {"w": np.array([4.0])}
    for _ in range(400):
        nn.adam_step(state, p, {"w": 2.0 * p["w"]})
    assert abs(p["w"][0]) < 1e-3


@settings(max_examples=25)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_masked_softmax_sums_to_one_or_zero(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=6) * 5
    mask = rng.random(6) < 0.5
    s = nn.masked_softmax(z, mask).sum()
    expected = 1.0 if mask.any() else 0.0
    assert abs(s - expected) < 1e-12
