"""Dense GP utilities and the stationary RBF baseline."""

import math

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from .kernels import RBF, gram


def dense_posterior(K_nn, K_tn, K_tt, z, sigma2):
    """Posterior mean and covariance with ``Sigma = K_nn + sigma2 I``."""
    n = K_nn.shape[0]
    cho = sla.cho_factor(K_nn + sigma2 * np.eye(n), lower=True)
    mean = K_tn @ sla.cho_solve(cho, z)
    cov = K_tt - K_tn @ sla.cho_solve(cho, K_tn.T)
    return mean, 0.5 * (cov + cov.T)


def dense_nll(K_nn, z, sigma2):
    n = K_nn.shape[0]
    cho = sla.cho_factor(K_nn + sigma2 * np.eye(n), lower=True)
    alpha = sla.cho_solve(cho, z)
    logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
    return 0.5 * float(z @ alpha) + 0.5 * logdet + 0.5 * n * math.log(2 * math.pi)


def _rbf_nll_grad(theta, xs, z):
    log_ell, log_var, log_noise = theta
    ell2 = math.exp(2 * log_ell)
    var = math.exp(log_var)
    noise = math.exp(log_noise)
    d2 = (xs[:, None] - xs[None, :]) ** 2
    K = var * np.exp(-0.5 * d2 / ell2)
    n = xs.size
    Sigma = K + noise * np.eye(n)
    try:
        cho = sla.cho_factor(Sigma, lower=True)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros(3)
    alpha = sla.cho_solve(cho, z)
    nll = 0.5 * z @ alpha + np.sum(np.log(np.diag(cho[0]))) + 0.5 * n * math.log(2 * math.pi)
    W = sla.cho_solve(cho, np.eye(n)) - np.outer(alpha, alpha)
    grads = [K * d2 / ell2, K, noise * np.eye(n)]
    return float(nll), np.array([0.5 * np.sum(W * dK) for dK in grads])


def fit_rbf(xs, z, lengthscales=(0.3, 1.0, 3.0)):
    """Type-II maximum likelihood RBF fit with a few deterministic restarts.

    Returns ``(RBF, noise_variance)``.
    """
    xs = np.asarray(xs, dtype=float)
    z = np.asarray(z, dtype=float)
    var = max(float(np.var(z)), 1e-12)
    best = None
    for ell in lengthscales:
        x0 = np.array([math.log(ell), math.log(var), math.log(0.01 * var)])
        res = minimize(
            _rbf_nll_grad, x0, args=(xs, z), jac=True, method="L-BFGS-B",
            bounds=[(-7, 7), (-20, 10), (-25, 5)],
        )
        if best is None or res.fun < best.fun:
            best = res
    log_ell, log_var, log_noise = best.x
    return RBF(math.exp(log_ell), math.exp(log_var)), math.exp(log_noise)


def rbf_posterior(xs, z, xs_test, kernel, noise):
    return dense_posterior(
        gram(kernel, xs), gram(kernel, xs_test, xs), gram(kernel, xs_test), z, noise
    )
