import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_architectures, finite_difference_check
from tactile_insertion.nn import AdamState, Mlp, ShapeError, adam_step, backward, forward, soft_update


def small_net(seed=0, output="identity", bound=None):
    return Mlp([5, 7, 6, 3], output, bound, rng=np.random.default_rng(seed), final_scale=1.0)


def test_param_count():
    net = Mlp([4, 8, 2])
    assert net.n_params == 4 * 8 + 8 + 8 * 2 + 2 == net.params.size


def test_zero_net_outputs_zero():
    net = Mlp([6, 10, 3])
    assert np.array_equal(forward(net, np.arange(6.0)), np.zeros(3))


def test_tanh_head_range():
    net = Mlp([3, 16, 3], "tanh", 4.0, rng=np.random.default_rng(0), final_scale=50.0)
    out = forward(net, np.random.default_rng(1).normal(0, 100, (500, 3)))
    assert np.all(np.abs(out) <= 4.0)
    assert np.abs(out).max() > 3.9


def test_identity_weights_pass_through():
    net = Mlp([3, 3])
    net.layers[0][0][...] = np.eye(3)
    x = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(forward(net, x), x)


def test_input_length_checked():
    with pytest.raises(ShapeError):
        forward(Mlp([3, 2]), np.zeros(4))
    with pytest.raises(ShapeError):
        backward(Mlp([3, 2]), np.zeros(3), np.zeros(5))


@pytest.mark.parametrize("output", ["identity", "tanh"])
def test_finite_difference_small(output):
    net = small_net(output=output, bound=[1.0, 2.0, 4.0])
    errs = finite_difference_check(net, np.random.default_rng(0), probes=net.n_params)
    assert errs.max() < 1e-4


@pytest.mark.parametrize("name", sorted(all_architectures()))
def test_finite_difference_package_networks(name):
    net = all_architectures()[name]
    # Full-scale output layer so gradients are not uniformly tiny.
    net.init_he(np.random.default_rng(1), final_scale=1.0)
    errs = finite_difference_check(net, np.random.default_rng(2), probes=30)
    assert errs.max() < 1e-4


def test_input_gradient_matches_finite_difference():
    net = small_net(3, "tanh", 2.0)
    rng = np.random.default_rng(4)
    x = rng.normal(size=5)
    g = rng.normal(size=3)
    _, cache = net.forward_cache(x)
    _, gx = net.backward_cache(cache, g)
    h = 1e-6
    num = np.array([(forward(net, x + h * e) @ g - forward(net, x - h * e) @ g) / (2 * h) for e in np.eye(5)])
    assert np.allclose(gx, num, rtol=1e-5, atol=1e-9)


def test_zero_output_gradient_gives_zero():
    net = small_net()
    assert not backward(net, np.ones(5), np.zeros(3)).any()


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-10, 10, allow_nan=False), seed=st.integers(0, 1000))
def test_backward_linear_in_output_gradient(c, seed):
    net = small_net(seed)
    rng = np.random.default_rng(seed)
    x, g = rng.normal(size=(4, 5)), rng.normal(size=(4, 3))
    assert np.allclose(backward(net, x, c * g), c * backward(net, x, g), atol=1e-10)


def test_adam_zero_gradient_noop():
    p = np.arange(5.0)
    st_ = AdamState.for_params(p)
    adam_step(p, np.zeros(5), st_)
    assert np.array_equal(p, np.arange(5.0))


def test_adam_first_step_is_signed_lr():
    p = np.zeros(4)
    g = np.array([0.3, -2.0, 1e-3, -5e2])
    adam_step(p, g, AdamState.for_params(p, lr=0.01))
    assert np.allclose(p, -0.01 * np.sign(g), atol=1e-6)


def test_adam_quadratic_bowl():
    x = np.array([1.0, -1.0, 0.5])
    st_ = AdamState.for_params(x, lr=1e-2)
    for _ in range(500):
        adam_step(x, 2 * x, st_)
    assert np.linalg.norm(x) < 1e-3


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step(np.zeros(3), np.zeros(4), AdamState.for_params(np.zeros(3)))


def test_soft_update_limits():
    a, b = small_net(0), small_net(1)
    t = a.copy()
    soft_update(t, b, 0.0)
    assert np.array_equal(t.params, a.params)
    soft_update(t, b, 1.0)
    assert np.array_equal(t.params, b.params)
    t = a.copy()
    soft_update(t, b, 0.25)
    assert np.allclose(t.params, 0.75 * a.params + 0.25 * b.params)


def test_soft_update_architecture_mismatch():
    with pytest.raises(ShapeError):
        soft_update(Mlp([2, 3]), Mlp([2, 4]))


def test_serialization_round_trip_exact():
    net = small_net(5, "tanh", [1.0, 2.0, 4.0])
    doc = json.loads(json.dumps(net.to_dict()))
    back = Mlp.from_dict(doc)
    assert np.array_equal(back.params, net.params)
    assert back.architecture() == net.architecture()
    x = np.random.default_rng(0).normal(size=(3, 5))
    assert np.array_equal(forward(back, x), forward(net, x))


def test_serialization_rejects_bad_documents():
    d = small_net().to_dict()
    with pytest.raises(ValueError):
        Mlp.from_dict({**d, "version": 99})
    with pytest.raises(ValueError):
        Mlp.from_dict({**d, "params": d["params"][:-1]})


def test_params_stay_finite_under_training():
    net = small_net(7)
    st_ = AdamState.for_params(net.params, lr=1e-2)
    rng = np.random.default_rng(0)
    for _ in range(300):
        x = rng.normal(size=(16, 5))
        y = np.sin(x[:, :3])
        out, cache = net.forward_cache(x)
        grad, _ = net.backward_cache(cache, 2 * (out - y) / len(x))
        adam_step(net.params, grad, st_)
    assert np.isfinite(net.params).all()
    out = forward(net, rng.normal(size=(64, 5)))
    assert np.isfinite(out).all()
