import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmtraj import nn
from gradcheck import check

TOL = 1e-4


def _weighted(out, seed):
    """Scalar loss sum(out * R) with a fixed random R so every output entry matters."""
    r = np.random.default_rng(seed + 1000).normal(size=out.shape)
    return nn.tensor_sum(nn.mul(out, nn.Tensor(r)))


def _shape(rng, ndim, lo=1, hi=5):
    return tuple(int(v) for v in rng.integers(lo, hi, size=ndim))


def _away_from_zero(rng, shape, margin=0.1):
    u = rng.normal(size=shape)
    return np.sign(u) * (np.abs(u) + margin)


SEEDS = range(24)


@pytest.mark.parametrize("seed", SEEDS)
def test_elementwise_binary_ops_with_broadcasting(seed):
    rng = np.random.default_rng(seed)
    shape = _shape(rng, int(rng.integers(1, 4)))
    # b broadcasts along a random subset of axes
    bshape = tuple(1 if rng.random() < 0.4 else s for s in shape)
    a, b = rng.normal(size=shape), rng.normal(size=bshape)
    for op in (nn.add, nn.sub, nn.mul):
        err = check(lambda t, op=op: _weighted(op(t[0], t[1]), seed), [a, b])
        assert err < TOL, (op.__name__, shape, bshape, err)


@pytest.mark.parametrize("seed", SEEDS)
def test_matmul_gradient(seed):
    rng = np.random.default_rng(seed)
    n, k, m = _shape(rng, 3)
    a, b = rng.normal(size=(n, k)), rng.normal(size=(k, m))
    assert check(lambda t: _weighted(nn.matmul(t[0], t[1]), seed), [a, b]) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_unary_nonlinearities(seed):
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, _shape(rng, int(rng.integers(1, 4))))
    for op in (nn.tanh, nn.sigmoid, nn.relu):
        err = check(lambda t, op=op: _weighted(op(t[0]), seed), [x])
        assert err < TOL, (op.__name__, x.shape, err)
    c = float(rng.normal())
    assert check(lambda t: _weighted(nn.scale(t[0], c), seed), [x]) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_structural_ops(seed):
    rng = np.random.default_rng(seed)
    ndim = int(rng.integers(2, 4))
    shape = _shape(rng, ndim, 2, 5)
    axis = int(rng.integers(0, ndim))
    other = list(shape)
    other[axis] = int(rng.integers(1, 4))
    a, b = rng.normal(size=shape), rng.normal(size=tuple(other))
    assert check(lambda t: _weighted(nn.concat([t[0], t[1]], axis=axis), seed), [a, b]) < TOL
    sl = tuple(slice(0, int(rng.integers(1, s + 1))) for s in shape)
    assert check(lambda t: _weighted(nn.take(t[0], sl), seed), [a]) < TOL
    assert check(lambda t: _weighted(nn.reshape(t[0], (-1,)), seed), [a]) < TOL
    assert check(lambda t: _weighted(nn.flatten(t[0]), seed), [a]) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_reductions(seed):
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, _shape(rng, int(rng.integers(1, 4)), 2, 5))
    assert check(lambda t: nn.tensor_sum(t[0]), [x]) < TOL
    assert check(lambda t: nn.sum_of_squares(t[0]), [x]) < TOL
    assert check(lambda t: _weighted(nn.norm(t[0], axis=-1), seed), [x]) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_avg_pool(seed):
    rng = np.random.default_rng(seed)
    n, c = _shape(rng, 2, 1, 3)
    h, w = (2 * int(v) for v in rng.integers(1, 4, size=2))
    x = rng.normal(size=(n, c, h, w))
    assert check(lambda t: _weighted(nn.avg_pool_2d(t[0]), seed), [x]) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_2d(seed):
    rng = np.random.default_rng(seed)
    n, cin, cout = _shape(rng, 3, 1, 3)
    k = int(rng.choice([1, 3]))
    h, w = (int(v) for v in rng.integers(k, k + 4, size=2))
    padding = "same" if seed % 2 == 0 else "valid"
    x = rng.normal(size=(n, cin, h, w))
    wt = rng.normal(size=(cout, cin, k, k))
    b = rng.normal(size=cout)
    err = check(lambda t: _weighted(nn.conv_2d(t[0], t[1], t[2], padding=padding), seed), [x, wt, b])
    assert err < TOL, (x.shape, wt.shape, padding, err)


def test_composite_graph_with_shared_nodes():
    # a node used by two consumers must receive both contributions
    rng = np.random.default_rng(7)
    x, w = rng.normal(size=(3, 4)), rng.normal(size=(4, 4))

    def build(t):
        h = nn.tanh(nn.matmul(t[0], t[1]))
        return nn.tensor_sum(nn.mul(h, nn.sigmoid(h))) + nn.sum_of_squares(nn.matmul(h, t[1]))

    assert check(build, [x, w]) < TOL


# -- forward examples -------------------------------------------------------


def test_relu_example():
    assert nn.relu(nn.Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]


def test_valid_conv_of_ones_is_nine():
    out = nn.conv_2d(nn.Tensor(np.ones((1, 1, 3, 3))), nn.Tensor(np.ones((1, 1, 3, 3))), padding="valid")
    assert out.shape == (1, 1, 1, 1)
    assert out.data.item() == 9.0


def test_same_conv_keeps_spatial_size():
    out = nn.conv_2d(nn.Tensor(np.ones((2, 1, 5, 7))), nn.Tensor(np.ones((4, 1, 3, 3))))
    assert out.shape == (2, 4, 5, 7)
    assert out.data[0, 0, 2, 3] == 9.0 and out.data[0, 0, 0, 0] == 4.0


def test_conv_matches_direct_loop():
    rng = np.random.default_rng(3)
    x, w, b = rng.normal(size=(2, 3, 5, 6)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4)
    got = nn.conv_2d(nn.Tensor(x), nn.Tensor(w), nn.Tensor(b)).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 4, 5, 6))
    for n in range(2):
        for o in range(4):
            for i in range(5):
                for j in range(6):
                    ref[n, o, i, j] = np.sum(xp[n, :, i:i + 3, j:j + 3] * w[o]) + b[o]
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_identity_matmul():
    a = np.random.default_rng(0).normal(size=(4, 3))
    assert np.array_equal(nn.matmul(nn.Tensor(np.eye(4)), nn.Tensor(a)).data, a)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_avg_pool_then_duplicate_preserves_mean(c, h2, w2, seed):
    x = np.random.default_rng(seed).normal(size=(1, c, 2 * h2, 2 * w2))
    pooled = nn.avg_pool_2d(nn.Tensor(x)).data
    up = pooled.repeat(2, axis=2).repeat(2, axis=3)
    assert np.isclose(up.mean(), x.mean(), rtol=0, atol=1e-12)


# -- backward contract -------------------------------------------------------


def test_sum_of_squares_gradient_example():
    w = nn.Tensor([3.0], requires_grad=True)
    (g,) = nn.grad(nn.sum_of_squares(w), [w])
    assert g.tolist() == [6.0]


def test_unreached_parameter_gets_zero_gradient():
    w = nn.Tensor(np.ones(3), requires_grad=True)
    unused = nn.Tensor(np.ones((2, 2)), requires_grad=True)
    g_w, g_u = nn.grad(nn.sum_of_squares(w), [w, unused])
    assert np.array_equal(g_u, np.zeros((2, 2)))
    assert np.array_equal(g_w, 2 * np.ones(3))


def test_non_scalar_loss_rejected():
    with pytest.raises(nn.ShapeError):
        nn.backward(nn.Tensor(np.ones(3), requires_grad=True) * 2.0)


def test_tape_visits_each_node_once():
    x = nn.Tensor(np.ones(2), requires_grad=True)
    y = x * 2.0
    z = nn.add(y, y)  # diamond
    loss = nn.tensor_sum(nn.add(z, y))
    tape = nn.backward(loss)
    ids = [id(n) for n in tape.nodes]
    assert len(ids) == len(set(ids))
    assert x.grad.tolist() == [6.0, 6.0]


@pytest.mark.parametrize(
    "op, a, b",
    [
        (nn.matmul, (2, 3), (4, 2)),
        (nn.add, (2, 3), (3, 2)),
        (nn.mul, (4,), (3,)),
    ],
)
def test_shape_mismatch_names_op_and_shapes(op, a, b):
    with pytest.raises(nn.ShapeError) as info:
        op(nn.Tensor(np.zeros(a)), nn.Tensor(np.zeros(b)))
    msg = str(info.value)
    assert op.__name__ in msg and str(a) in msg and str(b) in msg


def test_conv_channel_mismatch():
    with pytest.raises(nn.ShapeError):
        nn.conv_2d(nn.Tensor(np.zeros((1, 2, 4, 4))), nn.Tensor(np.zeros((3, 1, 3, 3))))


def test_forward_is_bitwise_deterministic():
    rng = np.random.default_rng(11)
    x, w = rng.normal(size=(2, 1, 8, 8)), rng.normal(size=(3, 1, 3, 3))
    a = nn.avg_pool_2d(nn.relu(nn.conv_2d(nn.Tensor(x), nn.Tensor(w)))).data
    b = nn.avg_pool_2d(nn.relu(nn.conv_2d(nn.Tensor(x), nn.Tensor(w)))).data
    assert a.tobytes() == b.tobytes()
