"""Kernel learning with a factorized spectral density.

The density is ``s(w, w') = gamma^2 (f(w)^H f(w') + f(-w')^H f(-w))`` with
``f`` a small tanh network. On a symmetric grid this gives the factor
``C = gamma dw (F  F_minus)`` with ``F_kj = conj(f_j(w_k))`` and
``F_minus_kj = f_j(-w_k)``, and the real feature matrix
``L = sqrt(2) (Re(Phi C)  Im(Phi C))`` of rank at most ``4r``. The marginal
likelihood and its gradient go through the ``4r x 4r`` inner system only.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import DivergedLoss
from .features import basis_matrix
from .linalg import hermitize, lowrank_logdet, woodbury_solve
from .optim import AMSGradState, TrainConfig, amsgrad_step
from .simulate import box_muller, make_rng
from .spectral import FrequencyGrid

FORMAT_VERSION = 1
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(eq=False)
class SpectralNet:
    """Fully connected network R -> R^d with tanh hidden layers."""

    weights: list
    biases: list
    complex_output: bool = False
    input_scale: float = 1.0

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def rank(self):
        d = self.weights[-1].shape[0]
        return d // 2 if self.complex_output else d

    def forward(self, omega):
        """Return the raw outputs (k x d) and the hidden activations."""
        h = self.input_scale * np.asarray(omega, dtype=float).reshape(-1, 1)
        acts = [h]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W.T + b)
            acts.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def backward(self, acts, grad_out):
        gW = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            gW[k] = g.T @ acts[k]
            gb[k] = g.sum(axis=0)
            if k:
                g = (g @ self.weights[k]) * (1.0 - acts[k] ** 2)
        return gW, gb


def eval_spectral_net(net, omega):
    """``f(omega)`` for scalar or array input; complex when the net has 2r outputs."""
    scalar = np.ndim(omega) == 0
    out, _ = net.forward(omega)
    if net.complex_output:
        r = net.rank
        out = out[:, :r] + 1j * out[:, r:]
    return out[0] if scalar else out


def init_spectral_net(r, seed, hidden=(128, 128), complex_output=False, input_scale=1.0):
    """Seeded initialization; weights ~ N(0, 1/fan_in), hidden biases ~ N(0, 1)."""
    sizes = [1, *hidden, 2 * r if complex_output else r]
    rng = make_rng([int(seed), 1])
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        W = box_muller(rng, fan_in * fan_out).reshape(fan_out, fan_in) / math.sqrt(fan_in)
        last = k == len(sizes) - 2
        b = np.zeros(fan_out) if last else box_muller(rng, fan_out)
        weights.append(W)
        biases.append(b)
    return SpectralNet(weights, biases, complex_output, input_scale)


@dataclass(eq=False)
class ModelParams:
    net: SpectralNet
    log_gamma2: float = 0.0
    log_sigma_noise2: float = math.log(1e-4)

    @property
    def gamma2(self):
        return math.exp(self.log_gamma2)

    @property
    def sigma_noise2(self):
        return math.exp(self.log_sigma_noise2)

    def pack(self):
        parts = [W.ravel() for W in self.net.weights] + [b for b in self.net.biases]
        parts.append(np.array([self.log_gamma2, self.log_sigma_noise2]))
        return np.concatenate(parts)

    def unpack(self, theta):
        """New params of the same shape with values taken from ``theta``."""
        theta = np.asarray(theta, dtype=float)
        pos = 0
        weights, biases = [], []
        for W in self.net.weights:
            weights.append(theta[pos : pos + W.size].reshape(W.shape).copy())
            pos += W.size
        for b in self.net.biases:
            biases.append(theta[pos : pos + b.size].copy())
            pos += b.size
        if theta.size != pos + 2:
            raise ValueError(f"expected {pos + 2} parameters, got {theta.size}")
        net = SpectralNet(weights, biases, self.net.complex_output, self.net.input_scale)
        return ModelParams(net, float(theta[pos]), float(theta[pos + 1]))


def _spectral_columns(params, grid):
    w = grid.frequencies
    m = w.size
    out, acts = params.net.forward(np.concatenate([w, -w]))
    if params.net.complex_output:
        r = params.net.rank
        f = out[:, :r] + 1j * out[:, r:]
        F, F_minus = f[:m].conj(), f[m:]
    else:
        F, F_minus = out[:m], out[m:]
    return F, F_minus, acts


def build_learned_spectral(params, grid):
    """``(gamma F, gamma F_minus)``, each m x r."""
    if not grid.symmetric:
        raise ValueError("learned spectral densities need a symmetric grid")
    F, F_minus, _ = _spectral_columns(params, grid)
    g = math.sqrt(params.gamma2)
    return g * F, g * F_minus


class LearnedSpectralDensity:
    """Evaluates the induced density ``s(w, w')`` of a parameter set."""

    real_kernel = True
    real_weights = False

    def __init__(self, params):
        self.params = params

    def _f(self, omega):
        out, _ = self.params.net.forward(omega)
        if self.params.net.complex_output:
            r = self.params.net.rank
            return out[:, :r] + 1j * out[:, r:]
        return out.astype(complex)

    def density(self, omega, omega_prime):
        omega, omega_prime = np.broadcast_arrays(
            np.asarray(omega, dtype=float), np.asarray(omega_prime, dtype=float)
        )
        shape = omega.shape
        a = self._f(omega.ravel())
        b = self._f(omega_prime.ravel())
        a_neg = self._f(-omega.ravel())
        b_neg = self._f(-omega_prime.ravel())
        val = np.sum(a.conj() * b, axis=1) + np.sum(b_neg.conj() * a_neg, axis=1)
        return (self.params.gamma2 * val).reshape(shape)


def _features(params, Phi, grid):
    F, F_minus, acts = _spectral_columns(params, grid)
    scale = math.sqrt(params.gamma2) * grid.delta_omega
    C = scale * np.concatenate([F, F_minus], axis=1)
    M = Phi @ C
    L = math.sqrt(2.0) * np.concatenate([M.real, M.imag], axis=1)
    return L, C, acts


def build_learned_features(params, grid, xs):
    """Real feature matrix L (n x 4r) with ``K ~= L L^T``."""
    if not grid.symmetric:
        raise ValueError("learned features need a symmetric grid")
    Phi = basis_matrix(xs, grid, "real_hermitian")
    L, _, _ = _features(params, Phi, grid)
    return L


@dataclass(eq=False)
class LearningProblem:
    """Training data with the fixed basis matrix precomputed."""

    xs: np.ndarray
    z: np.ndarray
    grid: FrequencyGrid
    Phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float).ravel()
        self.z = np.asarray(self.z, dtype=float).ravel()
        if self.xs.size != self.z.size:
            raise ValueError("xs and z differ in length")
        if self.xs.size < 1:
            raise ValueError("need at least one observation")
        if not self.grid.symmetric:
            raise ValueError("kernel learning needs a symmetric grid")
        self.Phi = basis_matrix(self.xs, self.grid, "real_hermitian")


def _nll_from_L(L, sigma2, z):
    n = z.size
    alpha = woodbury_solve(L, sigma2, z)
    return 0.5 * float(z @ alpha) + 0.5 * lowrank_logdet(L, sigma2) + 0.5 * n * LOG_2PI


def negative_log_marginal(params, xs, z=None, grid=None):
    """Negative log marginal likelihood through Woodbury and the determinant lemma.

    ``xs`` may also be a prepared :class:`LearningProblem`, in which case
    ``z`` and ``grid`` are ignored.
    """
    prob = xs if isinstance(xs, LearningProblem) else LearningProblem(xs, z, grid)
    L, _, _ = _features(params, prob.Phi, prob.grid)
    return _nll_from_L(L, params.sigma_noise2, prob.z)


def nll_and_gradient(params, problem):
    """NLL and its exact gradient as a ModelParams-shaped collection."""
    z = problem.z
    n = z.size
    sigma2 = params.sigma_noise2
    L, C, acts = _features(params, problem.Phi, problem.grid)
    p = L.shape[1]

    inner = L.T @ L + sigma2 * np.eye(p)
    cho = sla.cho_factor(inner, lower=True)
    alpha = (z - L @ sla.cho_solve(cho, L.T @ z)) / sigma2
    logdet = (n - p) * math.log(sigma2) + 2.0 * np.sum(np.log(np.diag(cho[0])))
    nll = 0.5 * float(z @ alpha) + 0.5 * logdet + 0.5 * n * LOG_2PI

    # dNLL/dL = Sigma^-1 L - alpha alpha^T L, with Sigma^-1 L = L inner^-1
    inner_inv = sla.cho_solve(cho, np.eye(p))
    G_L = L @ inner_inv - np.outer(alpha, alpha @ L)
    trace_sigma_inv = (n - np.sum(inner_inv * (L.T @ L))) / sigma2
    g_log_sigma2 = sigma2 * 0.5 * (trace_sigma_inv - float(alpha @ alpha))

    two_r = C.shape[1]
    G_A = math.sqrt(2.0) * G_L[:, :two_r]
    G_B = math.sqrt(2.0) * G_L[:, two_r:]
    Phr, Phi_ = problem.Phi.real, problem.Phi.imag
    G_Cr = Phr.T @ G_A + Phi_.T @ G_B
    G_Ci = -Phi_.T @ G_A + Phr.T @ G_B
    g_log_gamma2 = 0.5 * float(np.sum(G_Cr * C.real) + np.sum(G_Ci * C.imag))

    scale = math.sqrt(params.gamma2) * problem.grid.delta_omega
    m = problem.grid.m
    r = two_r // 2
    net = params.net
    if net.complex_output:
        grad_out = np.empty((2 * m, 2 * r))
        grad_out[:m, :r] = scale * G_Cr[:, :r]
        grad_out[:m, r:] = -scale * G_Ci[:, :r]
        grad_out[m:, :r] = scale * G_Cr[:, r:]
        grad_out[m:, r:] = scale * G_Ci[:, r:]
    else:
        grad_out = scale * np.concatenate([G_Cr[:, :r], G_Cr[:, r:]], axis=0)
    gW, gb = net.backward(acts, grad_out)
    grad = ModelParams(SpectralNet(gW, gb, net.complex_output, net.input_scale), g_log_gamma2, g_log_sigma2)
    return nll, grad


def gradient(params, xs, z=None, grid=None):
    prob = xs if isinstance(xs, LearningProblem) else LearningProblem(xs, z, grid)
    return nll_and_gradient(params, prob)[1]


@dataclass(eq=False)
class PosteriorCache:
    """``beta = L^T Sigma^-1 z`` and ``Q = I - L^T Sigma^-1 L`` at the trained params."""

    beta: np.ndarray
    Q: np.ndarray
    params: ModelParams
    grid: FrequencyGrid


def build_cache(params, problem):
    L = build_learned_features(params, problem.grid, problem.xs)
    sigma2 = params.sigma_noise2
    p = L.shape[1]
    cho = sla.cho_factor(L.T @ L + sigma2 * np.eye(p), lower=True)
    # push-through: L^T Sigma^-1 = inner^-1 L^T, so Q = sigma2 inner^-1
    beta = sla.cho_solve(cho, L.T @ problem.z)
    Q = hermitize(sigma2 * sla.cho_solve(cho, np.eye(p)))
    return PosteriorCache(beta, Q, params, problem.grid)


def posterior_predict(cache, xs_test):
    """Posterior mean and covariance of the latent function at ``xs_test``."""
    xs_test = np.asarray(xs_test, dtype=float).ravel()
    if xs_test.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    L_star = build_learned_features(cache.params, cache.grid, xs_test)
    mean = L_star @ cache.beta
    cov = L_star @ cache.Q @ L_star.T
    return mean, 0.5 * (cov + cov.T)


def initial_params(problem, r, seed, hidden=(128, 128), complex_f=False, input_scale=None):
    """Seeded network; gamma^2 matched to the data variance at x = 0.

    The network sees ``omega * input_scale``; the default ``1 / omega_max``
    maps the grid onto [-1, 1] so the first tanh layer is not saturated.
    """
    if input_scale is None:
        input_scale = 1.0 / problem.grid.omega_max
    net = init_spectral_net(r, seed, hidden, complex_f, input_scale)
    var = float(np.var(problem.z))
    if not var > 0:
        var = 1.0
    probe = ModelParams(net, 0.0, math.log(0.01 * var))
    L0 = build_learned_features(probe, problem.grid, [0.0])
    k00 = float(L0[0] @ L0[0])
    log_gamma2 = math.log(var / k00) if k00 > 0 else 0.0
    return ModelParams(net, log_gamma2, math.log(0.01 * var))


@dataclass(eq=False)
class TrainResult:
    params: ModelParams
    cache: PosteriorCache
    history: np.ndarray
    initial_params: ModelParams


def train(xs, z, grid, r, config=TrainConfig(), hidden=(128, 128), complex_f=False,
          init=None, callback=None, input_scale=None):
    """Full-batch AMSGrad on the negative log marginal likelihood.

    ``history`` holds the NLL before each step followed by the final NLL,
    so it has ``iterations + 1`` entries.
    """
    problem = LearningProblem(xs, z, grid)
    params0 = init if init is not None else initial_params(
        problem, r, config.seed, hidden, complex_f, input_scale
    )
    state = AMSGradState.init(params0.pack())
    history = np.empty(config.iterations + 1)
    params = params0
    for it in range(config.iterations):
        try:
            nll, grad = nll_and_gradient(params, problem)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            raise DivergedLoss(it, math.nan) from exc
        if not np.isfinite(nll):
            raise DivergedLoss(it, nll)
        history[it] = nll
        g = grad.pack()
        if not np.all(np.isfinite(g)):
            raise DivergedLoss(it, nll)
        state = amsgrad_step(state, g, config)
        params = params0.unpack(state.theta)
        if callback is not None:
            callback(it, nll)
    try:
        final = negative_log_marginal(params, problem)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise DivergedLoss(config.iterations, math.nan) from exc
    if not np.isfinite(final):
        raise DivergedLoss(config.iterations, final)
    history[-1] = final
    return TrainResult(params, build_cache(params, problem), history, params0)


def model_to_dict(params, grid, cache=None):
    d = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": params.net.layer_sizes,
        "complex_f": params.net.complex_output,
        "input_scale": params.net.input_scale,
        "rank": params.net.rank,
        "weights": [W.ravel().tolist() for W in params.net.weights],
        "biases": [b.tolist() for b in params.net.biases],
        "log_gamma2": params.log_gamma2,
        "log_sigma_noise2": params.log_sigma_noise2,
        "grid": grid.to_dict(),
    }
    if cache is not None:
        d["cache"] = {"beta": cache.beta.tolist(), "Q": cache.Q.tolist()}
    return d


def model_from_dict(d):
    """Returns ``(params, grid, cache_or_None)``."""
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {d.get('format_version')!r}")
    sizes = d["layer_sizes"]
    weights = [
        np.asarray(w, dtype=float).reshape(fan_out, fan_in)
        for w, fan_in, fan_out in zip(d["weights"], sizes[:-1], sizes[1:])
    ]
    biases = [np.asarray(b, dtype=float) for b in d["biases"]]
    net = SpectralNet(weights, biases, bool(d.get("complex_f", False)),
                      float(d.get("input_scale", 1.0)))
    if net.rank != d["rank"]:
        raise ValueError("rank does not match the output layer")
    params = ModelParams(net, float(d["log_gamma2"]), float(d["log_sigma_noise2"]))
    grid = FrequencyGrid.from_dict(d["grid"])
    cache = None
    if "cache" in d:
        cache = PosteriorCache(
            np.asarray(d["cache"]["beta"], dtype=float),
            np.asarray(d["cache"]["Q"], dtype=float),
            params,
            grid,
        )
    return params, grid, cache


def save_model(path, params, grid, cache=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(params, grid, cache), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
