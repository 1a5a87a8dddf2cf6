import math

import numpy as np
import pytest

from slcrec.errors import (
    EmptyInputError,
    NonDeterministicClosureError,
    NonFiniteGradientError,
    ShapeMismatchError,
    UnknownIdError,
)
from slcrec.nn import (
    AdamState,
    DenseLayer,
    LstmCell,
    adam_step,
    dense_forward,
    grad_check,
    init_dense,
    init_embedding,
    init_lstm,
    load_params,
    lr_at,
    lstm_step,
    mse_loss,
    save_params,
)
from slcrec.nn.layers import sigmoid


class TestDenseForward:
    def test_identity_layer(self):
        layer = DenseLayer(W=np.eye(3), b=np.zeros(3), activation="identity")
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(dense_forward(layer, x), x)

    def test_zero_sigmoid_layer_gives_half(self):
        layer = DenseLayer(W=np.zeros((4, 3)), b=np.zeros(4), activation="sigmoid")
        out = dense_forward(layer, np.array([9.0, -3.0, 2.0]))
        np.testing.assert_array_equal(out, np.full(4, 0.5))

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        layer = init_dense(0, "d", 3, 4, "tanh")
        for _ in range(10):
            x = rng.normal(size=3)
            expected = np.empty(4)
            for i in range(4):  # naive oracle
                acc = layer.b[i]
                for j in range(3):
                    acc += layer.W[i, j] * x[j]
                expected[i] = math.tanh(acc)
            np.testing.assert_allclose(dense_forward(layer, x), expected, atol=1e-12)

    def test_shape_mismatch(self):
        layer = init_dense(0, "d", 3, 4)
        with pytest.raises(ShapeMismatchError):
            dense_forward(layer, np.zeros(5))


class TestLstmStep:
    def _zero_cell(self, d, h):
        zeros = lambda *s: np.zeros(s)
        return LstmCell(
            W_i=zeros(h, d + h), W_f=zeros(h, d + h), W_o=zeros(h, d + h), W_g=zeros(h, d + h),
            b_i=zeros(h), b_f=zeros(h), b_o=zeros(h), b_g=zeros(h),
        )

    def test_all_zero_gives_zero_hidden(self):
        cell = self._zero_cell(2, 3)
        h, c = lstm_step(cell, np.zeros(2), np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(h, np.zeros(3))
        np.testing.assert_array_equal(c, np.zeros(3))

    def test_forget_gate_saturation_preserves_cell(self):
        cell = self._zero_cell(2, 3)
        cell.b_f[:] = 50.0  # forget gate ~ 1
        cell.b_i[:] = -50.0  # input gate ~ 0
        c_prev = np.array([0.3, -1.2, 4.0])
        _, c = lstm_step(cell, np.ones(2), np.zeros(3), c_prev)
        np.testing.assert_allclose(c, c_prev, atol=1e-12)

    def test_matches_scalar_oracle(self):
        cell = init_lstm(3, "c", 2, 2)
        rng = np.random.default_rng(5)
        x, h_prev, c_prev = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
        h, c = lstm_step(cell, x, h_prev, c_prev)

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        z = [*x, *h_prev]
        for k in range(2):  # per-coordinate scalar re-derivation
            gi = sig(sum(cell.W_i[k][j] * z[j] for j in range(4)) + cell.b_i[k])
            gf = sig(sum(cell.W_f[k][j] * z[j] for j in range(4)) + cell.b_f[k])
            go = sig(sum(cell.W_o[k][j] * z[j] for j in range(4)) + cell.b_o[k])
            gg = math.tanh(sum(cell.W_g[k][j] * z[j] for j in range(4)) + cell.b_g[k])
            ck = gf * c_prev[k] + gi * gg
            hk = go * math.tanh(ck)
            assert abs(c[k] - ck) < 1e-10
            assert abs(h[k] - hk) < 1e-10

    def test_hidden_state_bounded(self):
        cell = init_lstm(1, "c", 3, 4)
        rng = np.random.default_rng(2)
        h, c = np.zeros(4), np.zeros(4)
        for _ in range(20):
            h, c = lstm_step(cell, rng.normal(size=3) * 5, h, c)
            assert np.all(np.abs(h) < 1.0)

    def test_shape_mismatch(self):
        cell = init_lstm(0, "c", 2, 3)
        with pytest.raises(ShapeMismatchError):
            lstm_step(cell, np.zeros(4), np.zeros(3), np.zeros(3))


class TestMseLoss:
    def test_identity_is_zero(self):
        x = np.array([1.0, 2.0, 3.0])
        assert mse_loss(x, x) == 0.0

    def test_hand_computed(self):
        assert mse_loss(np.zeros(2), np.ones(2)) == 1.0

    def test_matches_scalar_accumulation_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = rng.normal(size=17), rng.normal(size=17)
            acc = 0.0
            for x, y in zip(a, b):
                acc += (x - y) ** 2
            assert abs(mse_loss(a, b) - acc / 17) < 1e-12

    def test_errors(self):
        with pytest.raises(ShapeMismatchError):
            mse_loss(np.zeros(2), np.zeros(3))
        with pytest.raises(EmptyInputError):
            mse_loss(np.zeros(0), np.zeros(0))


class TestLrSchedule:
    def test_endpoints(self):
        state = AdamState.create({"x": np.zeros(1)}, total_steps=500)
        assert lr_at(state, 0) == 0.01
        assert lr_at(state, 500) == pytest.approx(0.001)

    def test_non_increasing_over_grid(self):
        state = AdamState.create({"x": np.zeros(1)}, total_steps=500)
        lrs = [lr_at(state, t) for t in range(501)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert all(0.001 <= lr <= 0.01 for lr in lrs)

    def test_no_decay_without_total_steps(self):
        state = AdamState.create({"x": np.zeros(1)}, total_steps=0, base_lr=0.05)
        assert lr_at(state, 10_000) == 0.05


class TestAdamStep:
    def test_zero_gradient_fixed_point(self):
        p = {"w": np.array([1.0, -2.0])}
        state = AdamState.create(p)
        adam_step(state, p, {"w": np.zeros(2)})
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])
        assert state.t == 1

    def test_first_step_moves_by_lr(self):
        # Bias correction makes m_hat = v_hat = g on step one, so the update
        # is -lr * g / (|g| + eps) = -lr for g = 1.
        p = {"w": np.array([0.0])}
        state = AdamState.create(p, base_lr=0.01)
        adam_step(state, p, {"w": np.array([1.0])})
        assert p["w"][0] == pytest.approx(-0.01, rel=1e-6)

    def test_quadratic_bowl_convergence(self):
        # Adam travels about lr per step while far from the optimum, so a
        # constant 0.05 covers the distance from 5.0 well inside 500 steps.
        p = {"w": np.array([5.0])}
        state = AdamState.create(p, base_lr=0.05, floor_lr=0.05)
        for _ in range(500):
            adam_step(state, p, {"w": 2.0 * p["w"]})
        assert abs(p["w"][0]) < 0.1

    def test_loss_monotone_after_warmup(self):
        p = {"w": np.array([5.0])}
        state = AdamState.create(p, total_steps=400)
        losses = []
        for _ in range(400):
            losses.append(float(p["w"][0] ** 2))
            adam_step(state, p, {"w": 2.0 * p["w"]})
        tail = losses[40:]  # skip bias-correction warm-up
        assert all(a >= b - 1e-12 for a, b in zip(tail, tail[1:]))

    def test_non_finite_gradient_aborts(self):
        p = {"w": np.array([1.0]), "b": np.array([1.0])}
        state = AdamState.create(p)
        with pytest.raises(NonFiniteGradientError) as exc:
            adam_step(state, p, {"w": np.array([np.nan]), "b": np.zeros(1)})
        assert exc.value.param_name == "w"
        np.testing.assert_array_equal(p["w"], [1.0])  # step aborted


class TestGradCheck:
    def test_quadratic(self):
        params = {"t": np.array([3.0])}

        def fn(p):
            return float(p["t"][0] ** 2), {"t": 2.0 * p["t"]}

        assert grad_check(fn, params, eps=1e-4) < 1e-6

    def test_dense_sigmoid_mse_micro_net(self):
        rng = np.random.default_rng(8)
        l1 = init_dense(8, "l1", 3, 2, "sigmoid")
        l2 = init_dense(8, "l2", 2, 1, "sigmoid")
        x = rng.normal(size=(5, 3))
        t = rng.uniform(size=(5, 1))
        params = {"l1.W": l1.W, "l1.b": l1.b, "l2.W": l2.W, "l2.b": l2.b}

        def fn(p):
            h, c1 = l1.forward_cache(x)
            y, c2 = l2.forward_cache(h)
            loss = mse_loss(y, t)
            dy = 2.0 * (y - t) / y.size
            dh, dW2, db2 = l2.backward(c2, dy)
            _, dW1, db1 = l1.backward(c1, dh)
            return loss, {"l1.W": dW1, "l1.b": db1, "l2.W": dW2, "l2.b": db2}

        assert grad_check(fn, params, eps=1e-4) < 1e-4

    def test_nondeterministic_closure_rejected(self):
        state = {"n": 0}

        def fn(p):
            state["n"] += 1
            return float(state["n"]), {"t": np.zeros(1)}

        with pytest.raises(NonDeterministicClosureError):
            grad_check(fn, {"t": np.zeros(1)})

    def test_coordinate_sampling_caps_work(self):
        params = {"t": np.arange(100, dtype=np.float64)}

        def fn(p):
            return float((p["t"] ** 2).sum()), {"t": 2.0 * p["t"]}

        assert grad_check(fn, params, eps=1e-4, max_coords=10) < 1e-6


class TestInitialization:
    def test_same_seed_identical(self):
        a = init_dense(4, "layer", 6, 5, "relu")
        b = init_dense(4, "layer", 6, 5, "relu")
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.b, b.b)

    def test_name_separates_streams(self):
        a = init_dense(4, "layer_a", 6, 5)
        b = init_dense(4, "layer_b", 6, 5)
        assert not np.array_equal(a.W, b.W)

    def test_uniform_bound_respected(self):
        layer = init_dense(0, "d", 16, 8)
        assert np.all(np.abs(layer.W) <= 1 / 4)

    def test_embedding_lookup_rejects_unknown(self):
        table = init_embedding(0, "e", ["a", "b"], 4)
        assert table.lookup("a").shape == (4,)
        with pytest.raises(UnknownIdError):
            table.lookup("zzz")


class TestParamContainer:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        params = {
            "w": rng.normal(size=(3, 4)),
            "b": rng.normal(size=7),
            "scalar": np.array(3.25),
        }
        header = {"kind": "test", "n": 2}
        path = tmp_path / "m.model"
        save_params(path, header, params)
        h2, p2 = load_params(path)
        assert h2 == header
        assert set(p2) == set(params)
        for k in params:
            assert params[k].tobytes() == p2[k].tobytes()

    def test_rewrite_is_byte_identical(self, tmp_path):
        params = {"w": np.linspace(0, 1, 12).reshape(3, 4)}
        a, b = tmp_path / "a", tmp_path / "b"
        save_params(a, {"v": 1}, params)
        save_params(b, {"v": 1}, params)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError):
            load_params(path)


class TestSigmoidStability:
    def test_extreme_inputs_do_not_overflow(self):
        out = sigmoid(np.array([-1e6, -50.0, 0.0, 50.0, 1e6]))
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0 and out[-1] == 1.0
        assert out[2] == 0.5
