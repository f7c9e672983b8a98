import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmloco import numerics as nx
from mmloco.numerics import Tape, Tensor, backward, finite_difference_check


def test_matmul_identity():
    v = np.array([1.0, -2.0, 3.5])
    out = nx.matmul(Tensor(np.eye(3)), Tensor(v))
    np.testing.assert_array_equal(out.data, v)


def test_tanh_zero():
    assert nx.tanh(Tensor(0.0)).item() == 0.0


def test_max_reduce_per_feature():
    x = Tensor([[1.0, 5.0], [3.0, 2.0]])
    np.testing.assert_array_equal(nx.max_(x, axis=0).data, [3.0, 5.0])


def test_max_reduce_ties_lowest_index():
    x = Tensor([[2.0], [2.0], [1.0]], requires_grad=True)
    with Tape() as tape:
        loss = nx.sum_(nx.max_(x, axis=0))
    (g,) = backward(tape, loss, [x])
    np.testing.assert_array_equal(g[:, 0], [1.0, 0.0, 0.0])


def test_shape_mismatch_raises():
    with pytest.raises(nx.ShapeError):
        nx.add(Tensor(np.ones((2, 3))), Tensor(np.ones(2)))
    with pytest.raises(nx.ShapeError):
        nx.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_raises():
    with pytest.raises(nx.NonFiniteError):
        nx.exp(Tensor([1000.0]))
    with pytest.raises(nx.NonFiniteError):
        nx.div(Tensor([1.0]), Tensor([0.0]))


def test_grad_square_and_tanh():
    x = Tensor(3.0, requires_grad=True)
    with Tape() as tape:
        loss = nx.square(x)
    assert backward(tape, loss, [x])[0] == 6.0
    x = Tensor(0.0, requires_grad=True)
    with Tape() as tape:
        loss = nx.tanh(x)
    assert backward(tape, loss, [x])[0] == 1.0


def test_non_scalar_loss_raises():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = nx.mul(x, 2.0)
    with pytest.raises(nx.ShapeError):
        backward(tape, y, [x])


def test_unreachable_leaf_gets_zero():
    x = Tensor(np.ones(3), requires_grad=True)
    w = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        loss = nx.sum_(nx.square(x))
    gx, gw = backward(tape, loss, [x, w])
    np.testing.assert_array_equal(gw, np.zeros(2))
    np.testing.assert_array_equal(gx, 2 * np.ones(3))


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with nx.no_grad():
            nx.sum_(nx.square(x))
    assert len(tape) == 0


def _two_layer(rng):
    l1 = nx.Linear(5, 7, rng)
    l2 = nx.Linear(7, 1, rng)
    x = Tensor(rng.normal(size=(4, 5)))
    return l1, l2, x


def test_two_layer_mlp_fd():
    rng = np.random.default_rng(0)
    l1, l2, x = _two_layer(rng)
    params = l1.parameters() + l2.parameters()

    def f(*ps):
        return nx.mean(nx.square(l2(nx.tanh(l1(x)))))

    assert finite_difference_check(f, params) < 1e-4


def test_fd_oracle_self_tests():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=6))
    assert finite_difference_check(lambda t: nx.sum_(t), x) < 1e-9
    assert finite_difference_check(lambda t: nx.sum_(nx.square(t)), x) < 1e-6


ELEMENTWISE = {
    "tanh": nx.tanh, "sigmoid": nx.sigmoid, "softplus": nx.softplus, "exp": nx.exp,
    "elu": nx.elu, "square": nx.square,
}


@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_elementwise_grads(name):
    op = ELEMENTWISE[name]
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.normal(size=(3, 4)) + 0.05)  # keep ELU off its kink
        assert finite_difference_check(lambda t: nx.sum_(nx.mul(op(t), t)), x) < 1e-4


def test_composite_op_grads():
    rng = np.random.default_rng(3)
    a = Tensor(rng.normal(size=(2, 3, 4)))
    b = Tensor(rng.normal(size=(4, 5)))
    g = Tensor(rng.normal(size=4) + 1.0)
    c = Tensor(rng.normal(size=4))

    def f(a, b, g, c):
        h = nx.layer_norm(a, g, c)
        m = nx.matmul(h, b)
        v = nx.var(m, axis=-1, keepdims=True)
        y = nx.concat([nx.max_(m, axis=1), nx.mean(m, axis=1)], axis=-1)
        z = nx.log(nx.add(nx.sqrt(nx.add(v, 1.0)), 0.5))
        return nx.add(nx.sum_(nx.square(y)), nx.sum_(z))

    assert finite_difference_check(f, [a, b, g, c]) < 1e-4


def test_fused_ops_match_composites():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(2, 3, 4)))
    w = Tensor(rng.normal(size=(4, 5)))
    b = Tensor(rng.normal(size=5))
    g = Tensor(rng.normal(size=4) + 1.0)
    c = Tensor(rng.normal(size=4))
    np.testing.assert_allclose(nx.affine(x, w, b).data, nx.add(nx.matmul(x, w), b).data, atol=1e-12)
    mu = nx.mean(x, axis=-1, keepdims=True)
    inv = nx.div(1.0, nx.sqrt(nx.add(nx.var(x, axis=-1, keepdims=True), 1e-5)))
    ref = nx.add(nx.mul(nx.mul(nx.sub(x, mu), inv), g), c)
    np.testing.assert_allclose(nx.layer_norm(x, g, c).data, ref.data, atol=1e-12)
    assert finite_difference_check(lambda x, w, b: nx.sum_(nx.square(nx.affine(x, w, b))), [x, w, b]) < 1e-4
    with pytest.raises(nx.ShapeError):
        nx.affine(x, w, Tensor(np.zeros(4)))


def test_transpose_reshape_take_grads():
    rng = np.random.default_rng(4)
    a = Tensor(rng.normal(size=(3, 4)))

    def f(a):
        t = nx.reshape(nx.transpose(a), (2, 6))
        return nx.sum_(nx.square(nx.take(t, (slice(None), slice(1, 4)))))

    assert finite_difference_check(f, a) < 1e-6


def test_backward_deterministic():
    rng = np.random.default_rng(5)
    l1, l2, x = _two_layer(rng)
    params = l1.parameters() + l2.parameters()
    out = []
    for _ in range(2):
        with Tape() as tape:
            loss = nx.mean(nx.square(l2(nx.elu(l1(x)))))
        out.append(backward(tape, loss, params))
    for g1, g2 in zip(*out):
        assert np.array_equal(g1, g2)


def test_adam_zero_gradient_noop():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st_ = nx.AdamState.for_params([p], lr=0.1)
    nx.adam_step([p], [np.zeros(2)], st_)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert st_.step_count == 1


def test_adam_first_step_magnitude():
    p = Tensor(np.zeros(3), requires_grad=True)
    st_ = nx.AdamState.for_params([p], lr=0.01)
    g = np.array([0.5, -3.0, 1e-3])
    nx.adam_step([p], [g], st_)
    # m_hat / sqrt(v_hat) = g / |g|; eps only perturbs the tiniest entry
    np.testing.assert_allclose(p.data, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_monotone_trace():
    p = Tensor(np.array([0.0]), requires_grad=True)
    st_ = nx.AdamState.for_params([p], lr=0.05)
    trace = []
    for _ in range(10):
        nx.adam_step([p], [np.array([2.0])], st_)
        trace.append(p.data[0])
    assert all(b < a for a, b in zip([0.0] + trace, trace))


def test_adam_shape_mismatch():
    p = Tensor(np.zeros(3), requires_grad=True)
    st_ = nx.AdamState.for_params([p])
    with pytest.raises(nx.ShapeError):
        nx.adam_step([p], [np.zeros(2)], st_)


def test_clip_grad_norm():
    grads, norm = nx.clip_grad_norm([np.array([3.0]), np.array([4.0])], 1.0)
    assert norm == 5.0
    assert abs(np.sqrt(sum(float(g @ g) for g in grads)) - 1.0) < 1e-9


def test_waq1_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    named = {"param/a": rng.normal(size=(2, 3)), "adam.m/a": rng.normal(size=(2, 3)),
             "scalar": np.array(1.5), "v": rng.normal(size=7)}
    path = tmp_path / "x.waq"
    nx.save_parameters(path, named)
    raw = path.read_bytes()
    assert raw[:4] == b"WAQ1"
    back = nx.load_parameters(path)
    assert list(back) == list(named)
    for k in named:
        assert back[k].shape == named[k].shape
        assert np.array_equal(back[k], named[k])


def test_waq1_record_layout(tmp_path):
    path = tmp_path / "y.waq"
    nx.save_parameters(path, {"w": np.array([[1.0, 2.0]])})
    raw = path.read_bytes()
    import struct
    assert struct.unpack_from("<I", raw, 4)[0] == 1
    assert raw[8:9] == b"w"
    assert struct.unpack_from("<I", raw, 9)[0] == 2
    assert struct.unpack_from("<2Q", raw, 13) == (1, 2)
    assert struct.unpack_from("<2d", raw, 29) == (1.0, 2.0)
    assert len(raw) == 45


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_broadcast_add_mul_grads(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=4))
    c = Tensor(rng.normal(size=(3, 1)))
    f = lambda a, b, c: nx.sum_(nx.mul(nx.add(a, b), nx.sub(a, c)))
    assert finite_difference_check(f, [a, b, c]) < 1e-4
