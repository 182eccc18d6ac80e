"""Adam and the plateau learning-rate schedule."""

import numpy as np

from pfgnn.nn.optim import Adam, PlateauScheduler
from pfgnn.nn.params import ParamStore


def scalar_store(value=1.0):
    store = ParamStore()
    store.add("p", np.array(value))
    return store


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        store = scalar_store(0.7)
        opt = Adam(store, lr=0.1)
        opt.step({"p": np.array(0.0)})
        assert store["p"].data == 0.7

    def test_missing_gradient_keeps_params(self):
        store = scalar_store(0.7)
        Adam(store, lr=0.1).step({})
        assert store["p"].data == 0.7

    def test_first_step_unit_scale(self):
        # with constant gradient g, the bias-corrected first step is
        # -lr * g / (|g| + eps) which is within eps of -lr regardless of g
        store = scalar_store(0.0)
        opt = Adam(store, lr=0.1)
        opt.step({"p": np.array(1.0)})
        assert abs(float(store["p"].data) + 0.1) < 1e-8

    def test_two_step_closed_form(self):
        lr, b1, b2, eps, g = 0.05, 0.9, 0.999, 1e-8, 3.0
        store = scalar_store(2.0)
        opt = Adam(store, lr=lr, beta1=b1, beta2=b2, eps=eps)

        p, m, v = 2.0, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
            opt.step({"p": np.array(g)})

        assert abs(float(store["p"].data) - p) < 1e-12

    def test_per_parameter_state(self):
        store = ParamStore()
        store.add("a", np.zeros(2))
        store.add("b", np.zeros(3))
        opt = Adam(store, lr=0.1)
        opt.step({"a": np.array([1.0, -1.0]), "b": np.zeros(3)})
        assert np.allclose(store["a"].data, [-0.1, 0.1], atol=1e-8)
        assert np.all(store["b"].data == 0)


class TestPlateauScheduler:
    def test_halves_after_patience(self):
        opt = Adam(scalar_store(), lr=1.0)
        sched = PlateauScheduler(opt, factor=0.5, patience=3)
        assert not sched.update(1.0)
        for _ in range(3):
            assert not sched.update(1.0)
        assert sched.update(1.0)
        assert opt.lr == 0.5

    def test_improvement_resets_patience(self):
        opt = Adam(scalar_store(), lr=1.0)
        sched = PlateauScheduler(opt, factor=0.5, patience=2)
        sched.update(1.0)
        sched.update(1.0)
        sched.update(0.5)
        sched.update(0.5)
        sched.update(0.5)
        assert opt.lr == 1.0

    def test_respects_floor(self):
        opt = Adam(scalar_store(), lr=2e-6)
        sched = PlateauScheduler(opt, factor=0.5, patience=0, min_lr=1e-6)
        sched.update(1.0)
        sched.update(1.0)
        sched.update(1.0)
        assert opt.lr >= 1e-6
