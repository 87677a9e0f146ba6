import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustae.baselines import factored_objective
from robustae.errors import ConfigError, DivergenceError, NonFiniteError, ShapeError
from robustae.linalg import norms
from robustae.network import Adam, activation, build_network, dense
from robustae.synthetic import manifold_points
from robustae.trainer import (TRACE_COLUMNS, RobustConfig, n_step, objective_terms, objective_value, score,
                              theta_step, trace_csv, train_autoencoder, train_rcae)

from oracles import prox_grid


def linear_ae(d, k, rng=None):
    return build_network([dense(d, k, bias=False), dense(k, d, bias=False)], rng or np.random.default_rng(0))


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("kwargs", [dict(lam=-1), dict(mu=-0.1), dict(objective_tol=0), dict(batch_size=0),
                                    dict(max_alternations=0), dict(learning_rate=-1), dict(mu=math.inf)])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        RobustConfig(**kwargs)


def test_config_accepts_infinite_lambda():
    assert RobustConfig(lam=math.inf).lam == math.inf


# ---------------------------------------------------------------- objective

def test_objective_perfect_reconstruction_is_zero():
    net = build_network([dense(3, 3, bias=False)])
    net.layers[0].params["W"][...] = np.eye(3)
    x = np.random.default_rng(0).random((4, 3))
    # Omega = ||I||^2 = 3 would enter with mu > 0
    assert objective_value(x, net, np.zeros_like(x), 1.0, 0.0) == pytest.approx(0.0, abs=1e-24)


def test_objective_zero_network_is_frobenius():
    net = build_network([dense(3, 3, bias=False)])
    net.layers[0].params["W"][...] = 0.0
    x = np.random.default_rng(1).random((4, 3))
    assert objective_value(x, net, np.zeros_like(x), 1.0, 0.0) == pytest.approx(np.sum(x * x), rel=1e-15)


def test_objective_matches_norm_composition():
    rng = np.random.default_rng(2)
    net = build_network([dense(5, 3), activation("elu"), dense(3, 5)], rng)
    x = rng.random((7, 5))
    noise = rng.standard_normal((7, 5)) * (rng.random((7, 5)) < 0.3)
    lam, mu = 0.7, 0.2
    r = x - net.predict(x) - noise
    omega = sum(norms(w).frobenius ** 2 for w in net.weight_arrays())
    expect = norms(r).frobenius ** 2 + 0.5 * mu * omega + lam * norms(noise).l1
    assert objective_value(x, net, noise, lam, mu) == pytest.approx(expect, rel=1e-12)


def test_objective_excludes_biases_and_batchnorm():
    from robustae.network import batchnorm
    net = build_network([dense(3, 3), batchnorm()], np.random.default_rng(3))
    net.layers[0].params["b"][...] = 100.0
    net.layers[1].params["gamma"][...] = 100.0
    assert net.weight_penalty() == pytest.approx(np.sum(net.layers[0].params["W"] ** 2))


def test_objective_shape_mismatch():
    net = build_network([dense(3, 3)])
    with pytest.raises(ShapeError):
        objective_value(np.ones((2, 3)), net, np.zeros((3, 3)), 1.0, 0.0)


def test_rcae_objective_equals_factored_form_for_linear_net():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n, d, k = rng.integers(3, 9), rng.integers(2, 7), rng.integers(1, 4)
        net = linear_ae(d, k, rng)
        u, v = net.layers[0].params["W"], net.layers[1].params["W"]
        u[...] = rng.standard_normal(u.shape)
        v[...] = rng.standard_normal(v.shape)
        x = rng.standard_normal((n, d))
        noise = rng.standard_normal((n, d)) * (rng.random((n, d)) < 0.4)
        lam, mu = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
        w = x @ u
        expect = factored_objective(x, w, v, noise, lam, 0.0) + 0.5 * mu * (np.sum(u * u) + np.sum(v * v))
        assert objective_value(x, net, noise, lam, mu) == pytest.approx(expect, rel=1e-12)


# ---------------------------------------------------------------- n_step

def test_n_step_large_lambda_is_zero():
    rng = np.random.default_rng(5)
    x, xh = rng.random((4, 4)), rng.random((4, 4))
    lam = 2 * np.abs(x - xh).max() + 1e-9
    assert not n_step(x, xh, lam).any()


def test_n_step_zero_lambda_is_residual():
    rng = np.random.default_rng(6)
    x, xh = rng.random((4, 4)), rng.random((4, 4))
    assert np.array_equal(n_step(x, xh, 0.0), x - xh)


def test_n_step_infinite_lambda_is_zero():
    assert not n_step(np.ones((2, 2)), np.zeros((2, 2)), math.inf).any()


def test_n_step_rejects_negative_lambda_and_shape():
    with pytest.raises(ValueError):
        n_step(np.ones((2, 2)), np.zeros((2, 2)), -1.0)
    with pytest.raises(ShapeError):
        n_step(np.ones((2, 2)), np.zeros((2, 3)), 1.0)


def _n_objective(r, n, lam):
    return float(np.sum((r - n) ** 2) + lam * np.abs(n).sum())


def test_n_step_beats_random_perturbations_and_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        shape = tuple(rng.integers(2, 6, size=2))
        x, xh = rng.random(shape), rng.random(shape)
        lam = 1.0
        n = n_step(x, xh, lam)
        r = x - xh
        best = _n_objective(r, n, lam)
        for _ in range(1000):
            scale = 10.0 ** rng.uniform(-4, 0)
            cand = n + scale * rng.standard_normal(shape) * (rng.random(shape) < 0.5)
            assert best <= _n_objective(r, cand, lam) + 1e-12
        for idx in np.ndindex(shape):
            assert abs(n[idx] - prox_grid(r[idx], lam / 2)) <= 1e-4


def test_noise_entries_follow_residual_rule():
    rng = np.random.default_rng(8)
    x, xh = rng.random((6, 5)), rng.random((6, 5))
    lam = 0.4
    n = n_step(x, xh, lam)
    r = x - xh
    nz = n != 0
    np.testing.assert_allclose(np.abs(n[nz]), np.abs(r[nz]) - lam / 2, atol=1e-15)
    assert np.all(np.sign(n[nz]) == np.sign(r[nz]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 3), st.floats(0, 3))
def test_n_step_lambda_monotone(seed, a, b):
    lo, hi = sorted((a, b))
    rng = np.random.default_rng(seed)
    x, xh = rng.random((5, 5)), rng.random((5, 5))
    n_lo, n_hi = n_step(x, xh, lo), n_step(x, xh, hi)
    assert np.count_nonzero(n_hi) <= np.count_nonzero(n_lo)
    assert np.abs(n_hi).sum() <= np.abs(n_lo).sum() + 1e-12


# ---------------------------------------------------------------- theta step / autoencoder training

def test_theta_step_zero_lr_unchanged():
    rng = np.random.default_rng(9)
    net = build_network([dense(4, 2), activation("sigmoid"), dense(2, 4)], rng)
    before = [p.copy() for p in net.param_arrays()]
    cfg = RobustConfig(learning_rate=0.0, epochs_per_theta_step=5)
    theta_step(net, rng.random((6, 4)), cfg, Adam(net.param_arrays(), lr=0.0), rng)
    assert all(np.array_equal(a, b) for a, b in zip(before, net.param_arrays()))


def test_theta_step_small_lr_decreases_loss():
    rng = np.random.default_rng(10)
    net = build_network([dense(4, 4)], rng)
    x = rng.random((8, 4))
    before = np.sum((net.predict(x) - x) ** 2)
    cfg = RobustConfig(learning_rate=1e-3, epochs_per_theta_step=1, batch_size=8, mu=0)
    theta_step(net, x, cfg, Adam(net.param_arrays(), lr=1e-3), rng)
    assert np.sum((net.predict(x) - x) ** 2) <= before


def test_tiny_autoencoder_regression_anchor():
    rng = np.random.default_rng(0)
    x = rng.random((8, 4))
    net = build_network([dense(4, 2), activation("sigmoid"), dense(2, 4)], rng)
    hist = train_autoencoder(net, x, 200, 4, 0.0, Adam(net.param_arrays(), lr=2e-2), rng)
    ratio = hist[-1] / hist[0]
    assert ratio < 0.1
    # observed value, frozen
    assert ratio == pytest.approx(0.06461767900865979, rel=1e-6)


def test_training_deterministic_bitwise():
    def run():
        rng = np.random.default_rng(3)
        net = build_network([dense(5, 3), activation("elu"), dense(3, 5)], rng)
        train_autoencoder(net, np.random.default_rng(1).random((9, 5)), 20, 4, 0.1,
                          Adam(net.param_arrays(), lr=1e-2), rng)
        return b"".join(p.tobytes() for p in net.param_arrays())
    assert run() == run()


@pytest.mark.filterwarnings("ignore:overflow")
def test_non_finite_loss_reports_epoch_and_batch():
    net = build_network([dense(2, 2)], np.random.default_rng(0))
    x = np.array([[1e200, 1e200], [1.0, 1.0]])
    with pytest.raises(NonFiniteError, match="epoch 0, batch 0"):
        train_autoencoder(net, x, 1, 1, 0.0, Adam(net.param_arrays()), np.random.default_rng(0))


# ---------------------------------------------------------------- train_rcae

def _manifold(seed, n=55):
    rng = np.random.default_rng(seed)
    return manifold_points(rng.random(n), rng.random(n), 20) + 0.01 * rng.standard_normal((n, 20)), rng


def robust_ae_specs(d, h):
    return [dense(d, h), activation("sigmoid"), dense(h, d)]


def test_infinite_lambda_equals_plain_autoencoder():
    x, _ = _manifold(1, 30)
    cfg = RobustConfig(lam=math.inf, epochs_per_theta_step=5, max_alternations=3, learning_rate=1e-2, seed=4)
    model = train_rcae(x, robust_ae_specs(20, 3), cfg)
    assert not model.noise.any()
    # same seed, same batches: a plain run of the same total epochs (all steps accepted)
    rng = np.random.default_rng(4)
    net = build_network(robust_ae_specs(20, 3), rng)
    adam = Adam(net.param_arrays(), lr=1e-2)
    accepted = sum(row.accepted for row in model.trace[1:])
    assert accepted == len(model.trace) - 1
    train_autoencoder(net, x, 5 * accepted, 32, cfg.mu, adam, rng)
    assert all(np.array_equal(a, b) for a, b in zip(net.param_arrays(), model.network.param_arrays()))


def test_representable_data_objective_improves():
    rng = np.random.default_rng(2)
    x = rng.random((20, 2)) @ rng.random((2, 6))
    cfg = RobustConfig(lam=0.5, epochs_per_theta_step=20, max_alternations=10, learning_rate=1e-2, seed=0)
    model = train_rcae(x, [dense(6, 2, bias=False), dense(2, 6, bias=False)], cfg)
    assert model.objective_trace[-1] < model.objective_trace[0]


def test_objective_trace_non_increasing_and_noise_shape():
    x, _ = _manifold(3)
    cfg = RobustConfig(lam=0.5, epochs_per_theta_step=20, max_alternations=15, learning_rate=1e-2, seed=1)
    model = train_rcae(x, robust_ae_specs(20, 3), cfg)
    tr = model.objective_trace
    assert all(b <= a for a, b in zip(tr, tr[1:]))
    assert model.noise.shape == x.shape
    assert model.trace[0].alternation == 0 and model.trace[0].nnz == 0


def _planted(seed):
    x, rng = _manifold(seed)
    bad = rng.choice(55, 5, replace=False)
    hit = rng.random((5, 20)) < 0.3
    # push a third of the coordinates of each planted row to the far end of [0, 1]
    x[bad] = np.where(hit, np.where(x[bad] > 0.5, 0.0, 1.0), x[bad])
    return x, set(bad.tolist())


def _planted_top(seed):
    x, bad = _planted(seed)
    cfg = RobustConfig(lam=0.5, epochs_per_theta_step=100, max_alternations=30, learning_rate=1e-2, seed=seed)
    model = train_rcae(x, robust_ae_specs(20, 3), cfg)
    mass = np.abs(model.noise).sum(axis=1)
    return set(np.argsort(-mass, kind="stable")[:5].tolist()), bad


def test_planted_rows_carry_largest_noise_mass():
    top, bad = _planted_top(0)
    assert top == bad


@pytest.mark.slow
def test_planted_rows_mostly_recovered_across_seeds():
    for seed in range(5):
        top, bad = _planted_top(seed)
        assert len(top & bad) >= 4, seed


def test_divergence_aborts_with_trace():
    x, _ = _manifold(5, 20)
    net = build_network(robust_ae_specs(20, 3), np.random.default_rng(0))
    for p in net.param_arrays():
        p[...] = 0.0
    # a huge N-step forces the objective far above its minimum
    import robustae.trainer as tr
    original = tr.n_step
    tr.n_step = lambda a, b, lam: np.full_like(a, 1e3)
    try:
        with pytest.raises(DivergenceError) as info:
            train_rcae(x, None, RobustConfig(lam=1.0, epochs_per_theta_step=1, max_alternations=3), network=net)
        assert len(info.value.trace) >= 2
    finally:
        tr.n_step = original


def test_train_rcae_shape_checks():
    with pytest.raises(ShapeError):
        train_rcae(np.ones((4, 5)), robust_ae_specs(6, 2), RobustConfig(max_alternations=1))


def test_trace_csv_columns():
    x, _ = _manifold(6, 20)
    model = train_rcae(x, robust_ae_specs(20, 2), RobustConfig(epochs_per_theta_step=2, max_alternations=2))
    lines = trace_csv(model.trace).strip().splitlines()
    assert lines[0].split(",") == list(TRACE_COLUMNS)
    assert len(lines) == len(model.trace) + 1


def test_trace_terms_sum_to_objective():
    x, _ = _manifold(7, 20)
    model = train_rcae(x, robust_ae_specs(20, 2), RobustConfig(epochs_per_theta_step=3, max_alternations=3))
    for row in model.trace:
        assert row.objective == pytest.approx(row.data_term + row.l1_term + row.omega_term, rel=1e-12)
    terms = objective_terms(x, model.network, model.noise, model.config.lam, model.config.mu)
    assert terms.total == pytest.approx(model.trace[-1].objective, rel=1e-12)


# ---------------------------------------------------------------- score

def test_score_identity_network_zero():
    net = build_network([dense(3, 3, bias=False)])
    net.layers[0].params["W"][...] = np.eye(3)
    assert not score(net, np.random.default_rng(0).random((4, 3))).any()


def test_score_matches_independent_loop_and_ignores_noise():
    x, _ = _manifold(8, 25)
    model = train_rcae(x, robust_ae_specs(20, 3), RobustConfig(lam=0.3, epochs_per_theta_step=5,
                                                                 max_alternations=3, learning_rate=1e-2))
    s = model.score(x)
    xh = model.reconstruct(x)
    for i in range(x.shape[0]):
        total = 0.0
        for j in range(x.shape[1]):
            total += (x[i, j] - xh[i, j]) ** 2
        assert s[i] == pytest.approx(total, rel=1e-12)
    model.noise[...] = 123.0
    assert np.array_equal(model.score(x), s)


def test_score_shape_mismatch():
    with pytest.raises(ShapeError):
        score(build_network([dense(3, 3)]), np.ones((2, 4)))
