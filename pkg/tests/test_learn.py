import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnff.baseline import dense_nll, dense_posterior
from rnff.errors import DivergedLoss
from rnff.features import basis_matrix
from rnff.learn import (
    LearnedSpectralDensity,
    LearningProblem,
    ModelParams,
    SpectralNet,
    build_cache,
    build_learned_features,
    build_learned_spectral,
    eval_spectral_net,
    gradient,
    init_spectral_net,
    initial_params,
    load_model,
    lowrank_logdet,
    model_from_dict,
    model_to_dict,
    negative_log_marginal,
    nll_and_gradient,
    posterior_predict,
    save_model,
    train,
)
from rnff.optim import TrainConfig
from rnff.spectral import FrequencyGrid

GRID = FrequencyGrid(10.0, 31, symmetric=True)


def make_params(seed, r=2, hidden=(16, 16), complex_f=False, log_gamma2=0.0, log_s2=-3.0):
    net = init_spectral_net(r, seed, hidden, complex_f, input_scale=0.1)
    rng = np.random.default_rng(seed + 100)
    net.biases[-1] = 0.3 * rng.standard_normal(net.biases[-1].shape)
    return ModelParams(net, log_gamma2, log_s2)


def make_data(seed, n=30):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(-3, 3, n))
    z = np.sin(xs) + 0.1 * rng.standard_normal(n)
    return xs, z


def zero_net(r=2, hidden=(4,)):
    net = init_spectral_net(r, 0, hidden)
    return SpectralNet([0 * W for W in net.weights], [0 * b for b in net.biases])


def test_zero_weights_zero_output():
    np.testing.assert_array_equal(eval_spectral_net(zero_net(), 1.7), np.zeros(2))


def test_forward_deterministic_and_matches_reimplementation():
    net = init_spectral_net(3, 4, (8, 5))
    assert np.array_equal(eval_spectral_net(net, 0.0), eval_spectral_net(net, 0.0))
    w = 0.37
    h = np.array([w])
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.tanh(W @ h + b)
    ref = net.weights[-1] @ h + net.biases[-1]
    np.testing.assert_allclose(eval_spectral_net(net, w), ref, atol=1e-12)


def test_layer_sizes_and_rank():
    net = init_spectral_net(8, 0)
    assert net.layer_sizes == [1, 128, 128, 8]
    assert net.rank == 8
    cnet = init_spectral_net(8, 0, complex_output=True)
    assert cnet.layer_sizes[-1] == 16 and cnet.rank == 8
    assert np.iscomplexobj(eval_spectral_net(cnet, 0.5))


def test_spectral_all_ones():
    net = SpectralNet([np.zeros((1, 1))], [np.ones(1)])
    F, Fm = build_learned_spectral(ModelParams(net, 0.0), GRID)
    np.testing.assert_array_equal(F, np.ones((31, 1)))
    np.testing.assert_array_equal(Fm, np.ones((31, 1)))


def test_spectral_needs_symmetric_grid():
    with pytest.raises(ValueError):
        build_learned_spectral(make_params(0), FrequencyGrid(5.0, 20))


@pytest.mark.parametrize("complex_f", [False, True])
def test_induced_density_symmetries(complex_f):
    dens = LearnedSpectralDensity(make_params(1, complex_f=complex_f))
    rng = np.random.default_rng(0)
    w, wp = rng.uniform(-10, 10, (2, 100))
    s = dens.density(w, wp)
    np.testing.assert_allclose(s, np.conj(dens.density(wp, w)), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(s, np.conj(dens.density(-w, -wp)), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("complex_f", [False, True])
def test_features_identity(complex_f):
    params = make_params(2, complex_f=complex_f, log_gamma2=0.4)
    xs = np.linspace(-3, 3, 17)
    L = build_learned_features(params, GRID, xs)
    F, Fm = build_learned_spectral(params, GRID)
    C = GRID.delta_omega * np.concatenate([F, Fm], axis=1)
    M = basis_matrix(xs, GRID, "real_hermitian") @ C
    np.testing.assert_allclose(L @ L.T, 2 * (M @ M.conj().T).real, atol=1e-12)
    assert L.shape == (17, 4 * params.net.rank)


def test_features_column_count_default_rank():
    params = ModelParams(init_spectral_net(8, 0), 0.0)
    assert build_learned_features(params, FrequencyGrid(10.0, 255, True), [0.0, 1.0]).shape == (2, 32)


def test_zero_net_zero_kernel():
    L = build_learned_features(ModelParams(zero_net(), 0.0), GRID, [0.0, 1.0])
    assert np.all(L == 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**20), complex_f=st.booleans())
def test_learned_kernel_psd(seed, complex_f):
    params = make_params(seed, complex_f=complex_f)
    xs = np.random.default_rng(seed).uniform(-4, 4, 40)
    L = build_learned_features(params, GRID, xs)
    K = L @ L.T
    assert np.linalg.eigvalsh(K).min() >= -1e-10 * np.trace(K) / 40


def test_nll_zero_kernel():
    xs, z = make_data(0)
    params = ModelParams(zero_net(), 0.0, 0.0)
    expected = 0.5 * z @ z + 0.5 * z.size * math.log(2 * math.pi)
    assert negative_log_marginal(params, xs, z, GRID) == pytest.approx(expected, rel=1e-14)
    quad = lambda s: negative_log_marginal(params, xs, s * z, GRID) - 0.5 * z.size * math.log(2 * math.pi)
    assert quad(2.0) == pytest.approx(4 * quad(1.0), rel=1e-14)


@pytest.mark.parametrize("n", [1, 30, 100, 200])
def test_nll_matches_dense(n):
    xs, z = make_data(n, n)
    params = make_params(3)
    L = build_learned_features(params, GRID, xs)
    dense = dense_nll(L @ L.T, z, params.sigma_noise2)
    assert negative_log_marginal(params, xs, z, GRID) == pytest.approx(dense, rel=1e-8)


def test_problem_validation():
    with pytest.raises(ValueError):
        LearningProblem([0.0, 1.0], [1.0], GRID)
    with pytest.raises(ValueError):
        LearningProblem([], [], GRID)
    with pytest.raises(ValueError):
        LearningProblem([0.0], [1.0], FrequencyGrid(5.0, 20))


def _fd_check(params, prob, seed=0, h=1e-5):
    """Worst per-group relative error of central differences, 3 entries per tensor."""
    theta = params.pack()
    g = nll_and_gradient(params, prob)[1].pack()
    rng = np.random.default_rng(seed)
    sizes = [a.size for a in [*params.net.weights, *params.net.biases]] + [1, 1]
    worst, pos = 0.0, 0
    for size in sizes:
        idx = pos + rng.choice(size, min(size, 3), replace=False)
        pos += size
        fd = []
        for i in idx:
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            fd.append((negative_log_marginal(params.unpack(tp), prob)
                       - negative_log_marginal(params.unpack(tm), prob)) / (2 * h))
        worst = max(worst, np.linalg.norm(np.array(fd) - g[idx]) / np.linalg.norm(g[idx]))
    return worst


@pytest.mark.parametrize("complex_f", [False, True])
def test_gradient_finite_differences(complex_f):
    xs, z = make_data(5)
    prob = LearningProblem(xs, z, GRID)
    for seed in range(3):
        params = make_params(seed, complex_f=complex_f, hidden=(128, 128))
        assert _fd_check(params, prob, seed=seed) <= 1e-4


def test_gradient_log_sigma_closed_form():
    xs, z = make_data(6)
    s2 = 0.7
    params = ModelParams(zero_net(), 0.0, math.log(s2))
    g = gradient(params, xs, z, GRID)
    assert g.log_sigma_noise2 == pytest.approx(-0.5 * z @ z / s2 + z.size / 2, rel=1e-12)
    assert g.log_gamma2 == 0.0


def test_gradient_zero_data_is_logdet_gradient():
    xs, _ = make_data(7)
    z = np.zeros_like(xs)
    params = make_params(4)
    prob = LearningProblem(xs, z, GRID)
    g = gradient(params, prob).pack()
    theta = params.pack()
    h = 1e-5
    for i in (0, 50, theta.size - 2, theta.size - 1):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        ld = lambda t: 0.5 * lowrank_logdet(build_learned_features(params.unpack(t), GRID, xs),
                                            params.unpack(t).sigma_noise2)
        fd = (ld(tp) - ld(tm)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_pack_unpack_round_trip():
    params = make_params(8, complex_f=True)
    back = params.unpack(params.pack())
    assert np.array_equal(back.pack(), params.pack())
    with pytest.raises(ValueError):
        params.unpack(params.pack()[:-1])


def test_posterior_matches_dense():
    xs, z = make_data(9, 40)
    params = make_params(9)
    prob = LearningProblem(xs, z, GRID)
    cache = build_cache(params, prob)
    xt = np.linspace(-4, 4, 25)
    mean, cov = posterior_predict(cache, xt)
    L = build_learned_features(params, GRID, xs)
    Lt = build_learned_features(params, GRID, xt)
    m_ref, c_ref = dense_posterior(L @ L.T, Lt @ L.T, Lt @ Lt.T, z, params.sigma_noise2)
    np.testing.assert_allclose(mean, m_ref, atol=1e-6)
    np.testing.assert_allclose(cov, c_ref, atol=1e-6)
    assert np.array_equal(cache.Q, cache.Q.T)
    assert np.linalg.eigvalsh(cache.Q).min() >= -1e-8


def test_cache_q_matches_definition():
    xs, z = make_data(10, 20)
    params = make_params(10)
    cache = build_cache(params, LearningProblem(xs, z, GRID))
    L = build_learned_features(params, GRID, xs)
    Sinv = np.linalg.inv(L @ L.T + params.sigma_noise2 * np.eye(20))
    np.testing.assert_allclose(cache.Q, np.eye(L.shape[1]) - L.T @ Sinv @ L, atol=1e-8)
    np.testing.assert_allclose(cache.beta, L.T @ Sinv @ z, atol=1e-8)


def test_posterior_interpolates_with_tiny_noise():
    xs, z = make_data(11, 3)
    params = make_params(11, log_s2=math.log(1e-10), log_gamma2=2.0)
    cache = build_cache(params, LearningProblem(xs, z, GRID))
    mean, cov = posterior_predict(cache, xs)
    # real f gives rank 2r = 4 > n = 3, so the kernel can interpolate the data
    np.testing.assert_allclose(mean, z, atol=1e-4)
    assert np.abs(np.diag(cov)).max() < 1e-6


def test_posterior_empty():
    xs, z = make_data(12, 5)
    cache = build_cache(make_params(12), LearningProblem(xs, z, GRID))
    mean, cov = posterior_predict(cache, [])
    assert mean.shape == (0,) and cov.shape == (0, 0)


def test_initial_params_match_variance():
    xs, z = make_data(13, 50)
    prob = LearningProblem(xs, z, GRID)
    p = initial_params(prob, 8, 0)
    L0 = build_learned_features(p, GRID, [0.0])
    assert float(L0[0] @ L0[0]) == pytest.approx(np.var(z), rel=1e-12)
    assert p.sigma_noise2 == pytest.approx(0.01 * np.var(z), rel=1e-12)
    assert p.net.input_scale == pytest.approx(1 / GRID.omega_max)


def test_train_zero_iterations_returns_init():
    xs, z = make_data(14)
    res = train(xs, z, GRID, 2, TrainConfig(iterations=0), hidden=(8, 8))
    assert np.array_equal(res.params.pack(), res.initial_params.pack())
    assert res.history.shape == (1,)


def test_train_deterministic_and_improves():
    xs, z = make_data(15)
    cfg = TrainConfig(iterations=60, seed=3)
    a = train(xs, z, GRID, 2, cfg, hidden=(16, 16))
    b = train(xs, z, GRID, 2, cfg, hidden=(16, 16))
    assert a.history[-1] == b.history[-1]
    assert np.array_equal(a.params.pack(), b.params.pack())
    assert a.history[-1] < a.history[0]


def test_train_diverges():
    xs, z = make_data(16)
    bad = make_params(16, log_s2=800.0)
    with pytest.raises(DivergedLoss) as exc:
        train(xs, z, GRID, 2, TrainConfig(iterations=5), init=bad)
    assert exc.value.iteration == 0


def test_model_json_round_trip(tmp_path):
    xs, z = make_data(17)
    params = make_params(17, complex_f=True)
    cache = build_cache(params, LearningProblem(xs, z, GRID))
    path = tmp_path / "model.json"
    save_model(path, params, GRID, cache)
    p2, g2, c2 = load_model(path)
    assert g2 == GRID
    assert np.array_equal(p2.pack(), params.pack())
    assert p2.net.input_scale == params.net.input_scale
    assert np.array_equal(c2.beta, cache.beta) and np.array_equal(c2.Q, cache.Q)
    d = model_to_dict(params, GRID)
    d["format_version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(d)
