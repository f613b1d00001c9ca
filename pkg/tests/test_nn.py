import math

import numpy as np
import pytest

from uprop import nn
from uprop.errors import ShapeError
from uprop.tensor import Var, value_of


def make_cell(input_size, hidden_size, rng=None):
    if rng is None:
        zeros_m = lambda r, c: np.zeros((r, c))
        zeros_v = lambda: np.zeros(hidden_size)
        return nn.GruCellParams(
            input_size=input_size, hidden_size=hidden_size,
            W_r=zeros_m(hidden_size, input_size), W_z=zeros_m(hidden_size, input_size),
            W_n=zeros_m(hidden_size, input_size), U_r=zeros_m(hidden_size, hidden_size),
            U_z=zeros_m(hidden_size, hidden_size), U_n=zeros_m(hidden_size, hidden_size),
            b_r=zeros_v(), b_z=zeros_v(), b_in=zeros_v(), b_hn=zeros_v())
    return nn.freeze_cell(nn.init_gru_cell(input_size, hidden_size, rng))


def scalar_cell_oracle(cell, x, h):
    """Step-by-step scalar re-implementation of the cell equations."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    hs = cell.hidden_size
    out = []
    for i in range(hs):
        wr = sum(cell.W_r[i][j] * x[j] for j in range(cell.input_size))
        ur = sum(cell.U_r[i][j] * h[j] for j in range(hs))
        r = sig(wr + ur + cell.b_r[i])
        wz = sum(cell.W_z[i][j] * x[j] for j in range(cell.input_size))
        uz = sum(cell.U_z[i][j] * h[j] for j in range(hs))
        z = sig(wz + uz + cell.b_z[i])
        wn = sum(cell.W_n[i][j] * x[j] for j in range(cell.input_size))
        un = sum(cell.U_n[i][j] * h[j] for j in range(hs))
        n = math.tanh(wn + cell.b_in[i] + r * (un + cell.b_hn[i]))
        out.append((1.0 - z) * n + z * h[i])
    return np.array(out)


def test_zero_params_halve_hidden_state():
    cell = make_cell(3, 4)
    v = np.array([0.2, -0.4, 0.6, 0.8])
    h_next = nn.gru_cell_forward(cell, np.array([1.0, 2.0, 3.0]), v)
    np.testing.assert_allclose(h_next, 0.5 * v)


def test_zero_params_zero_hidden_fixed_point():
    cell = make_cell(2, 3)
    h_next = nn.gru_cell_forward(cell, np.array([5.0, -5.0]), np.zeros(3))
    np.testing.assert_allclose(h_next, np.zeros(3))


def test_cell_matches_scalar_oracle():
    rng = np.random.default_rng(11)
    cell = make_cell(4, 6, rng)
    for _ in range(5):
        x = rng.normal(size=4)
        h = rng.normal(size=6) * 0.5
        got = nn.gru_cell_forward(cell, x, h)
        want = scalar_cell_oracle(cell, x, h)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_fused_cell_matches_plain_cell():
    rng = np.random.default_rng(12)
    cell = make_cell(3, 5, rng)
    fused = nn.fuse_cell(cell)
    x, h = rng.normal(size=3), rng.normal(size=5) * 0.3
    np.testing.assert_allclose(nn.fused_cell_forward(fused, x, h),
                               nn.gru_cell_forward(cell, x, h), atol=1e-12)


def test_cell_shape_errors():
    cell = make_cell(3, 4)
    with pytest.raises(ShapeError):
        nn.gru_cell_forward(cell, np.zeros(2), np.zeros(4))
    with pytest.raises(ShapeError):
        nn.gru_cell_forward(cell, np.zeros(3), np.zeros(5))


def test_hidden_state_stays_bounded():
    rng = np.random.default_rng(13)
    stack = nn.freeze_stack(nn.init_gru_stack(2, 8, 2, 0.0, rng))
    x_seq = rng.normal(size=(200, 2)) * 5.0
    outputs, h = nn.gru_stack_forward(stack, x_seq)
    assert np.all(np.abs(outputs) < 1.0)
    for layer_h in h:
        assert np.all(np.abs(value_of(layer_h)) < 1.0)


def test_stack_of_one_equals_repeated_cell():
    rng = np.random.default_rng(14)
    stack = nn.freeze_stack(nn.init_gru_stack(3, 5, 1, 0.0, rng))
    x_seq = rng.normal(size=(10, 3))
    outputs, _ = nn.gru_stack_forward(stack, x_seq)
    h = np.zeros(5)
    for t, x in enumerate(x_seq):
        h = nn.gru_cell_forward(stack.layers[0], x, h)
        np.testing.assert_array_equal(outputs[t], h)


def test_stack_forward_deterministic():
    rng = np.random.default_rng(15)
    stack = nn.freeze_stack(nn.init_gru_stack(2, 4, 3, 0.0, rng))
    x_seq = rng.normal(size=(20, 2))
    out1, _ = nn.gru_stack_forward(stack, x_seq, dropout_on=False)
    out2, _ = nn.gru_stack_forward(stack, x_seq, dropout_on=False)
    np.testing.assert_array_equal(out1, out2)


def test_zero_rate_dropout_is_noop():
    rng = np.random.default_rng(16)
    stack = nn.freeze_stack(nn.init_gru_stack(2, 4, 2, 0.0, rng))
    x_seq = rng.normal(size=(15, 2))
    off, _ = nn.gru_stack_forward(stack, x_seq, dropout_on=False)
    on, _ = nn.gru_stack_forward(stack, x_seq, dropout_on=True,
                                 rng=np.random.default_rng(0))
    np.testing.assert_array_equal(off, on)


def test_dropout_mask_unbiased():
    # inverted scaling: E[mask * a] = a, checked over many seeds
    rate = 0.2
    a = 1.7
    n = 10_000
    draws = np.array([
        (nn.dropout_mask(1, rate, np.random.default_rng(s))[0]) * a
        for s in range(n)
    ])
    se = draws.std() / math.sqrt(n)
    assert abs(draws.mean() - a) < 3 * se


def test_adam_first_step_delta():
    p = Var(np.array([1.0]))
    state = nn.adam_init([p], learning_rate=0.001)
    nn.adam_step(state, [p], grads=[np.array([1.0])])
    delta = p.value[0] - 1.0
    assert abs(delta + 0.001) < 1e-6
    assert state.step_count == 1


def test_adam_zero_gradient_keeps_parameters():
    p = Var(np.array([2.0, -3.0]))
    state = nn.adam_init([p])
    nn.adam_step(state, [p], grads=[np.zeros(2)])
    np.testing.assert_array_equal(p.value, [2.0, -3.0])


def test_adam_first_step_descends_every_coordinate():
    rng = np.random.default_rng(17)
    p = Var(rng.normal(size=10))
    before = p.value.copy()
    g = rng.normal(size=10)
    g[g == 0.0] = 1.0
    state = nn.adam_init([p])
    nn.adam_step(state, [p], grads=[g])
    np.testing.assert_array_equal(np.sign(p.value - before), -np.sign(g))


def test_adam_shape_mismatch():
    p = Var(np.zeros(3))
    state = nn.adam_init([p])
    with pytest.raises(ShapeError):
        nn.adam_step(state, [p], grads=[np.zeros(4)])


def test_adam_matches_reference_trajectory():
    # minimize f(w) = 0.5 w^2 for a few steps against a hand-rolled loop
    p = Var(np.array([1.0]))
    state = nn.adam_init([p], learning_rate=0.1)
    w_ref, m, v = 1.0, 0.0, 0.0
    for t in range(1, 6):
        g = p.value.copy()
        nn.adam_step(state, [p], grads=[g])
        g_ref = w_ref
        m = 0.9 * m + 0.1 * g_ref
        v = 0.999 * v + 0.001 * g_ref ** 2
        m_hat = m / (1 - 0.9 ** t)
        v_hat = v / (1 - 0.999 ** t)
        w_ref -= 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert p.value[0] == pytest.approx(w_ref, rel=1e-12)
