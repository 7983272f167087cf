import numpy as np
import pytest

import oracles
from seed_embed.errors import ConfigError, DataError
from seed_embed.gradcheck import check_model, random_model, relative_error
from seed_embed.network import (
    block_forward,
    fit_standardizer,
    init_params,
    model_backward,
    model_forward,
    sinusoidal_timestep_embedding,
)


def test_timestep_embedding_at_zero():
    np.testing.assert_array_equal(sinusoidal_timestep_embedding(0, 8), [0, 1, 0, 1, 0, 1, 0, 1])


@pytest.mark.parametrize("t", [0, 1, 50, 999, 123456])
def test_timestep_embedding_range(t):
    v = sinusoidal_timestep_embedding(t, 64)
    assert np.all(np.abs(v) <= 1)


def test_timestep_embedding_matches_closed_form():
    np.testing.assert_allclose(sinusoidal_timestep_embedding(50, 8),
                               oracles.timestep_embedding(50, 8), rtol=0, atol=1e-15)


def test_timestep_embedding_batched():
    out = sinusoidal_timestep_embedding(np.array([0, 50]), 4)
    assert out.shape == (2, 4)
    np.testing.assert_array_equal(out[1], sinusoidal_timestep_embedding(50, 4))


def test_timestep_embedding_odd_size():
    with pytest.raises(ConfigError):
        sinusoidal_timestep_embedding(3, 5)


# --------------------------------------------------------------------------
# block / model forward
# --------------------------------------------------------------------------

def test_block_with_zero_output_layer_is_identity(rng):
    m = init_params(4, 4, 1, seed=0, dtype=np.float64)
    x, temb = rng.normal(size=4), rng.normal(size=4)
    np.testing.assert_array_equal(block_forward(m.blocks[0], x, temb), x)


def test_block_ignores_temb_when_projection_is_zero(rng):
    m = random_model(4, 4, 1, seed=3)
    p = m.blocks[0]
    p.temb_linear.weight[...] = 0
    x = rng.normal(size=4)
    a = block_forward(p, x, rng.normal(size=4))
    b = block_forward(p, x, rng.normal(size=4))
    np.testing.assert_array_equal(a, b)


def test_block_matches_scalar_oracle(rng):
    p = random_model(4, 4, 1, seed=5).blocks[0]
    x, temb = rng.normal(size=4), rng.normal(size=4)
    np.testing.assert_allclose(block_forward(p, x, temb), oracles.block(p, x.tolist(), temb.tolist()),
                               rtol=1e-12, atol=1e-12)


def test_model_matches_scalar_oracle(rng):
    m = random_model(8, 8, 3, seed=7)
    e = rng.normal(size=8)
    np.testing.assert_allclose(model_forward(m, e, 50), oracles.model(m, e.tolist(), 50),
                               rtol=1e-11, atol=1e-12)


def test_zero_output_layers_give_exact_identity_with_standardizer(rng):
    m = init_params(8, 8, 3, seed=0, dtype=np.float64)
    m.mean[...] = 0.5
    m.scale[...] = 2.0
    e = rng.integers(-1000, 1000, size=(10, 8)) / 64.0  # dyadic, so every step is exact
    np.testing.assert_array_equal(model_forward(m, e, 50), e)


@pytest.mark.parametrize("D", [192, 256, 512])
def test_shape_closure_at_extractor_dims(D, rng):
    m = init_params(D, seed=0)
    e = rng.normal(size=(3, D)).astype(np.float32)
    assert model_forward(m, e, 50).shape == (3, D)
    assert model_forward(m, e[0], 50).shape == (D,)


def test_dimension_mismatch_rejected():
    m = init_params(8, seed=0)
    with pytest.raises(DataError):
        model_forward(m, np.zeros(6), 10)


def test_forward_is_deterministic(rng):
    m = random_model(8, 4, 2, seed=1)
    e = rng.normal(size=(5, 8))
    a = model_forward(m, e, np.array([1, 2, 3, 4, 5]))
    b = model_forward(m, e.copy(), np.array([1, 2, 3, 4, 5]))
    assert a.tobytes() == b.tobytes()


# --------------------------------------------------------------------------
# init
# --------------------------------------------------------------------------

def test_fresh_model_is_identity(rng):
    m = init_params(16, seed=3)
    e = rng.normal(size=(50, 16)).astype(np.float32)
    t = rng.integers(1, 1001, size=50)
    assert np.max(np.abs(model_forward(m, e, t) - e)) == 0


def test_init_is_seed_deterministic():
    a, b, c = init_params(8, seed=1), init_params(8, seed=1), init_params(8, seed=2)
    for (na, xa), (_, xb) in zip(a.named_parameters(), b.named_parameters()):
        assert xa.tobytes() == xb.tobytes(), na
    assert not np.array_equal(a.blocks[0].in_linear.weight, c.blocks[0].in_linear.weight)


def test_init_shapes_and_ranges():
    D, E = 6, 4
    m = init_params(D, E, n_blocks=2, seed=0)
    b = m.blocks[0]
    assert b.in_linear.weight.shape == (D, 2 * D)
    assert b.temb_linear.weight.shape == (E, 2 * D)
    assert b.out_linear.weight.shape == (2 * D, D)
    assert np.all(np.abs(b.in_linear.weight) <= 1 / np.sqrt(D))
    assert np.all(b.out_linear.weight == 0) and np.all(m.final_linear.weight == 0)
    assert np.all(b.in_norm.gain == 1) and np.all(b.in_norm.bias == 0)
    assert m.dtype == np.float32


@pytest.mark.parametrize("kwargs", [dict(D=0), dict(D=4, E=3), dict(D=4, n_blocks=0)])
def test_init_rejects_bad_hyperparameters(kwargs):
    with pytest.raises(ConfigError):
        init_params(**kwargs)


def test_fit_standardizer(rng):
    m = init_params(4, seed=0)
    data = rng.normal(3.0, 2.0, size=(500, 4))
    fit_standardizer(m, data)
    np.testing.assert_allclose(m.mean, data.mean(0), rtol=1e-6)
    np.testing.assert_allclose(m.scale, data.std(0), rtol=1e-6)


# --------------------------------------------------------------------------
# backward
# --------------------------------------------------------------------------

def test_zero_out_grad_gives_zero_gradients(rng):
    m = random_model(6, 4, 2, seed=0)
    grads = model_backward(m, rng.normal(size=6), 10, np.zeros(6))
    assert all(np.all(g == 0) for g in grads.values())


def test_backward_is_linear_in_out_grad(rng):
    m = random_model(6, 4, 2, seed=0)
    e = rng.normal(size=6)
    g1, g2 = rng.normal(size=6), rng.normal(size=6)
    a, b = model_backward(m, e, 10, g1), model_backward(m, e, 10, g2)
    s = model_backward(m, e, 10, g1 + g2)
    for k in s:
        np.testing.assert_allclose(s[k], a[k] + b[k], rtol=1e-12, atol=1e-13)


def test_batch_gradient_is_sum_of_rows(rng):
    m = random_model(6, 4, 1, seed=2)
    e, g = rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
    t = np.array([5, 50, 500])
    total = model_backward(m, e, t, g)
    parts = [model_backward(m, e[i], t[i], g[i]) for i in range(3)]
    for k in total:
        np.testing.assert_allclose(total[k], sum(p[k] for p in parts), rtol=1e-12, atol=1e-13)


def test_gradient_keys_follow_traversal_order():
    m = init_params(4, seed=0)
    grads = model_backward(m, np.zeros(4, np.float32) + 1, 3, np.ones(4))
    assert list(grads) == [n for n, _ in m.named_parameters()]
    assert "mean" not in grads and "scale" not in grads


@pytest.mark.parametrize("n_blocks", [1, 2, 3])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(n_blocks, seed):
    m = random_model(6, 4, n_blocks, seed)
    r = np.random.default_rng(seed)
    for t in (1, 50, 999):
        res = check_model(m, r.normal(size=6), t, r.normal(size=6))
        assert res.max_rel_error <= 1e-5, (t, res)


def test_relative_error_definition():
    assert relative_error(np.array([1.0, 1e-6]), np.array([1.0, 2e-6])) == pytest.approx(1e-6)
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
