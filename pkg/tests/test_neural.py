import numpy as np
import pytest

from gradcheck import fd_grad, rel_err
from regdgm.errors import InvalidInput, NumericalError
from regdgm.neural import (
    ACTIVATIONS,
    Layer,
    Network,
    OptimizerState,
    backward,
    forward,
    optimizer_step,
    read_weights,
    write_weights,
)


def random_net(seed, max_layers=3, max_units=32):
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, max_layers + 1))
    dims = [int(d) for d in rng.integers(1, max_units + 1, size=n_layers + 1)]
    acts = [str(a) for a in rng.choice(ACTIVATIONS, size=n_layers)]
    return Network.init(dims, acts, rng), rng


class TestForward:
    def test_identity(self):
        net = Network([Layer(np.eye(3), np.zeros(3))])
        x = np.array([1.0, -2.0, 3.5])
        assert np.array_equal(forward(net, x)[0], x)

    def test_relu(self):
        net = Network([Layer(np.eye(2), np.zeros(2), "relu")])
        assert np.array_equal(forward(net, [-1.0, 2.0])[0], [0.0, 2.0])

    def test_tanh_zero_weights(self):
        net = Network([Layer(np.zeros((4, 2)), np.zeros(4), "tanh")])
        assert np.array_equal(forward(net, [3.0, -7.0])[0], np.zeros(4))

    def test_leaky(self):
        net = Network([Layer(np.eye(2), np.zeros(2), "leaky_relu")])
        assert forward(net, [-1.0, 2.0])[0] == pytest.approx([-0.2, 2.0])

    def test_batch_matches_rows(self):
        net, rng = random_net(3)
        X = rng.normal(size=(5, net.dims[0]))
        out = forward(net, X)[0]
        for i in range(5):
            assert np.allclose(out[i], forward(net, X[i])[0], rtol=1e-14, atol=1e-15)

    def test_dim_mismatch(self):
        net = Network([Layer(np.eye(2), np.zeros(2))])
        with pytest.raises(InvalidInput):
            forward(net, [1.0, 2.0, 3.0])

    def test_bad_chain(self):
        with pytest.raises(InvalidInput):
            Network([Layer(np.eye(2), np.zeros(2)), Layer(np.eye(3), np.zeros(3))])


class TestBackward:
    def test_linear_adjoint(self):
        W = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        net = Network([Layer(W, np.zeros(3))])
        _, tape = forward(net, [0.3, -0.1])
        g = np.array([1.0, -1.0, 2.0])
        _, gx = backward(net, tape, g)
        assert np.allclose(gx, W.T @ g)

    def test_relu_negative_preactivation(self):
        net = Network([Layer(np.eye(2), np.zeros(2), "relu")])
        _, tape = forward(net, [-1.0, 2.0])
        (gW, gb), gx = backward(net, tape, [5.0, 7.0])
        assert gx[0] == 0.0 and gb[0] == 0.0 and np.all(gW[0] == 0.0)

    def test_stale_tape(self):
        net, rng = random_net(1)
        _, tape = forward(net, rng.normal(size=net.dims[0]))
        net.set_params([p + 0.1 for p in net.params()])
        with pytest.raises(InvalidInput):
            backward(net, tape, np.ones(net.dims[-1]))

    def test_tape_from_other_net(self):
        net, rng = random_net(1)
        _, tape = forward(net.copy(), rng.normal(size=net.dims[0]))
        with pytest.raises(InvalidInput):
            backward(net, tape, np.ones(net.dims[-1]))

    @pytest.mark.parametrize("seed", range(25))
    def test_finite_differences(self, seed):
        net, rng = random_net(seed)
        X = rng.normal(size=(3, net.dims[0]))
        G = rng.normal(size=(3, net.dims[-1]))
        loss = lambda: float(np.sum(G * forward(net, X)[0]))
        _, tape = forward(net, X)
        grads, gx = backward(net, tape, G)
        for p, g in zip(net.params(), grads):
            assert rel_err(g, fd_grad(loss, p)) < 1e-5
        assert rel_err(gx, fd_grad(loss, X)) < 1e-5

    def test_truncated_is_prefix(self):
        net, rng = random_net(7, max_layers=3)
        net = Network.init([2, 5, 4, 3], "tanh", rng)
        sub = net.truncated(1)
        x = rng.normal(size=2)
        h = np.tanh(net.layers[0].W @ x + net.layers[0].b)
        assert np.allclose(sub(x), net.layers[1].W @ h + net.layers[1].b)


class TestOptimizer:
    def test_zero_gradient(self):
        p = [np.array([1.0, -2.0])]
        s = OptimizerState.for_params(p, lr=0.1)
        assert np.array_equal(optimizer_step(s, p, [np.zeros(2)])[0], p[0])

    def test_first_step_magnitude(self):
        p = [np.array([0.0, 0.0])]
        s = OptimizerState.for_params(p, lr=0.01)
        new = optimizer_step(s, p, [np.array([3.0, -0.5])])[0]
        assert new == pytest.approx([-0.01, 0.01], rel=1e-6)

    def test_quadratic_bowl(self):
        w = [np.array([1.0])]
        s = OptimizerState.for_params(w, lr=0.1)
        for _ in range(500):
            w = optimizer_step(s, w, [2.0 * w[0]])
        assert abs(w[0][0]) < 1e-3

    def test_nonfinite(self):
        p = [np.zeros(2)]
        s = OptimizerState.for_params(p)
        optimizer_step(s, p, [np.ones(2)])
        with pytest.raises(NumericalError) as exc:
            optimizer_step(s, p, [np.array([np.nan, 0.0])])
        assert exc.value.step == 2

    def test_deterministic(self):
        def run():
            net, rng = random_net(11)
            s = OptimizerState.for_params(net.params(), lr=1e-2)
            X = rng.normal(size=(4, net.dims[0]))
            for _ in range(20):
                out, tape = forward(net, X)
                grads, _ = backward(net, tape, out)
                net.set_params(optimizer_step(s, net.params(), grads))
            return np.concatenate([p.ravel() for p in net.params()])

        assert run().tobytes() == run().tobytes()


def test_weight_file_roundtrip(tmp_path):
    net, _ = random_net(5)
    path = tmp_path / "w.txt"
    write_weights(path, net, extra={"norm_mean": [0.5, -1.0]})
    back, extra = read_weights(path)
    assert back.dims == net.dims and back.activations == net.activations
    for a, b in zip(net.params(), back.params()):
        assert a.tobytes() == b.tobytes()
    assert np.array_equal(extra["norm_mean"], [0.5, -1.0])


def test_weight_file_rejects_garbage(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("hello\n")
    with pytest.raises(InvalidInput):
        read_weights(path)
