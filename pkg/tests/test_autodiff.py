import numpy as np
import pytest

from kgtyperr import autodiff as ad
from kgtyperr.checkpoint import load_checkpoint, restore_into, save_checkpoint
from kgtyperr.optim import AdamState, NonFiniteGradientError, adam_step


def test_quadratic_gradient():
    store = ad.ParamStore()
    w = store.add("w", [1.0, 2.0, 3.0])
    loss = ad.sum_all(ad.mul(w, w))
    grads = ad.grad(loss, store)
    np.testing.assert_allclose(grads["w"], [2.0, 4.0, 6.0])


def test_constant_loss_gives_zero_gradients():
    store = ad.ParamStore()
    store.add("w", [1.0, 2.0])
    loss = ad.constant(3.5)
    grads = ad.grad(loss, store)
    np.testing.assert_array_equal(grads["w"], [0.0, 0.0])


def test_backward_rejects_non_scalar():
    t = ad.parameter([1.0, 2.0])
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(t)


def test_nan_forward_names_the_node():
    a = ad.constant([1.0, 0.0])
    with np.errstate(invalid="ignore"), pytest.raises(ad.NonFiniteError, match="div"):
        ad.div(a, a)


def test_linear_loss_finite_difference_is_exact():
    store = ad.ParamStore()
    w = store.add("w", [0.3, -0.7, 1.1])
    c = np.array([2.0, -1.0, 0.5])

    def loss_fn():
        return ad.sum_all(ad.mul(ad.constant(c), store["w"]))

    assert ad.finite_diff_check(loss_fn, store, step=1e-5) < 1e-8


def test_sigmoid_bce_head_matches_finite_differences():
    rng = np.random.default_rng(3)
    store = ad.ParamStore()
    store.add("W", rng.normal(size=(4, 2)))
    store.add("b", rng.normal(size=2))
    x = rng.normal(size=(6, 4))
    t = (rng.random((6, 2)) < 0.5).astype(float)

    def loss_fn():
        z = ad.sigmoid(ad.add(ad.matmul(ad.constant(x), store["W"]), store["b"]))
        bce = ad.neg(
            ad.add(
                ad.mul(ad.constant(t), ad.log(z)),
                ad.mul(ad.constant(1 - t), ad.log(ad.add(1.0, ad.neg(z)))),
            )
        )
        return ad.mean_all(bce)

    assert ad.finite_diff_check(loss_fn, store, step=1e-5) < 1e-4


def test_two_layer_network_matches_finite_differences():
    rng = np.random.default_rng(11)
    store = ad.ParamStore()
    store.add("W1", rng.normal(size=(5, 4)))
    store.add("b1", rng.normal(size=4))
    store.add("W2", rng.normal(size=(4, 3)))
    store.add("b2", rng.normal(size=3))
    x = rng.normal(size=(7, 5))

    def loss_fn():
        h = ad.tanh(ad.add(ad.matmul(ad.constant(x), store["W1"]), store["b1"]))
        o = ad.relu(ad.add(ad.matmul(h, store["W2"]), store["b2"]))
        return ad.mean_all(ad.mul(o, o))

    assert ad.finite_diff_check(loss_fn, store, step=1e-5) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_elementwise_ops_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    store.add("a", rng.uniform(0.2, 2.0, size=(3, 4)))
    store.add("b", rng.uniform(0.2, 2.0, size=4))

    def loss_fn():
        a, b = store["a"], store["b"]
        mix = ad.mul(ad.sigmoid(a), ad.add(ad.tanh(b), 1.5))
        mix = ad.add(mix, ad.sqrt(ad.add(ad.mul(a, a), 0.1)))
        mix = ad.div(mix, ad.add(ad.exp(ad.mul(-0.5, b)), 1.0))
        mix = ad.add(mix, ad.logsigmoid(a))
        return ad.mean_all(ad.mul(mix, ad.log(ad.add(mix, 3.0))))

    assert ad.finite_diff_check(loss_fn, store, step=1e-6) < 1e-4


def test_gather_rows_accumulates_duplicate_indices():
    store = ad.ParamStore()
    table = store.add("t", np.arange(6.0).reshape(3, 2))
    picked = ad.gather_rows(table, [1, 1, 2])
    loss = ad.sum_all(picked)
    grads = ad.grad(loss, store)
    np.testing.assert_array_equal(grads["t"], [[0, 0], [2, 2], [1, 1]])


def test_concat_splits_gradient():
    store = ad.ParamStore()
    a = store.add("a", [[1.0, 2.0]])
    b = store.add("b", [[3.0]])
    out = ad.concat([a, b], axis=1)
    loss = ad.sum_all(ad.mul(out, ad.constant([[1.0, 2.0, 3.0]])))
    grads = ad.grad(loss, store)
    np.testing.assert_array_equal(grads["a"], [[1.0, 2.0]])
    np.testing.assert_array_equal(grads["b"], [[3.0]])


def test_forward_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 4))
    a = ad.constant(x)
    r1 = ad.sigmoid(ad.matmul(a, a)).data
    r2 = ad.sigmoid(ad.matmul(ad.constant(x), ad.constant(x))).data
    np.testing.assert_array_equal(r1, r2)


class TestAdam:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        store = ad.ParamStore()
        store.add("w", [1.0, -2.0])
        before = store["w"].data.copy()
        adam_step(store, {"w": np.zeros(2)}, AdamState(), lr=1e-3)
        np.testing.assert_array_equal(store["w"].data, before)

    def test_first_step_moves_by_lr(self):
        # bias correction makes the very first update -lr * g/|g|
        store = ad.ParamStore()
        store.add("p", 0.0)
        adam_step(store, {"p": np.array(1.0)}, AdamState(), lr=1e-3)
        assert store["p"].data == pytest.approx(-1e-3, rel=1e-6)

    def test_quadratic_loss_decreases_monotonically(self):
        store = ad.ParamStore()
        w = store.add("w", [5.0])
        state = AdamState()
        losses = []
        for _ in range(3):
            loss = ad.sum_all(ad.mul(w, w))
            losses.append(loss.item())
            adam_step(store, ad.grad(loss, store), state, lr=0.1)
        assert losses[0] > losses[1] or ad.sum_all(ad.mul(w, w)).item() < losses[1]
        final = ad.sum_all(ad.mul(w, w)).item()
        assert final < losses[0]

    def test_lr_zero_is_identity(self):
        rng = np.random.default_rng(5)
        store = ad.ParamStore()
        store.add("w", rng.normal(size=(3, 3)))
        before = store.snapshot()
        adam_step(store, {"w": rng.normal(size=(3, 3))}, AdamState(), lr=0.0)
        np.testing.assert_array_equal(store["w"].data, before["w"])

    def test_non_finite_gradient_aborts_step(self):
        store = ad.ParamStore()
        store.add("w", [1.0])
        store.add("v", [2.0])
        before = store.snapshot()
        with pytest.raises(NonFiniteGradientError, match="w"):
            adam_step(store, {"w": np.array([np.nan]), "v": np.array([1.0])}, AdamState(), lr=1e-3)
        np.testing.assert_array_equal(store["v"].data, before["v"])


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        store = ad.ParamStore()
        store.add("alpha", rng.normal(size=(4, 3)))
        store.add("beta", rng.normal(size=7))
        store.add("scalar", 0.1 + 0.2)  # not exactly representable; must survive
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, store, seed=42, hyper={"lr": 1e-3})
        values, header = load_checkpoint(path)
        assert header["seed"] == 42
        assert header["hyper"]["lr"] == 1e-3
        for name, p in store.items():
            assert values[name].tobytes() == p.data.tobytes()

    def test_restore_into_checks_names(self, tmp_path):
        store = ad.ParamStore()
        store.add("a", [1.0])
        path = tmp_path / "one.ckpt"
        save_checkpoint(path, store)
        other = ad.ParamStore()
        other.add("b", [1.0])
        with pytest.raises(Exception, match="names"):
            restore_into(other, path)

    def test_restore_replaces_values(self, tmp_path):
        store = ad.ParamStore()
        store.add("a", [1.0, 2.0])
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, store)
        store["a"].data[:] = 0.0
        restore_into(store, path)
        np.testing.assert_array_equal(store["a"].data, [1.0, 2.0])
