"""Reproducible experiment drivers shared by the CLI and the acceptance suite."""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baseline import dense_posterior, fit_rbf, rbf_posterior
from .errors import AliasingViolation
from .features import approximation_errors, build_feature_factor, build_feature_matrix
from .kernels import gram
from .learn import TrainConfig, posterior_predict, train
from .linalg import hermitian_psd_factor
from .simulate import box_muller, make_rng
from .spectral import FrequencyGrid, LocallyStationary


def locations(n, dx, centered=False):
    """``x_i = i dx`` for ``i = 0..n-1``, or ``i = -(n-1)/2..(n-1)/2`` when centered."""
    i = np.arange(n, dtype=float)
    if centered:
        i -= (n - 1) / 2.0
    return i * dx


def default_grid(model, m, omega_max):
    """Nonnegative grid for real-weight densities, symmetric otherwise."""
    return FrequencyGrid(omega_max, m, symmetric=not getattr(model, "real_weights", False))


def default_mode(model, grid):
    if grid.symmetric:
        return "complex"
    return "real_cosine" if getattr(model, "real_weights", False) else "real_hermitian"


def approximate(model, grid, xs, mode=None, jitter=0.0, strict=False):
    """Low-rank kernel for ``model`` at ``xs``; returns ``(factor, lowrank)``."""
    mode = mode or default_mode(model, grid)
    factor = build_feature_factor(grid, model, mode, jitter)
    return factor, build_feature_matrix(xs, factor, strict)


def _threads():
    try:
        return max(1, int(os.environ.get("RNFF_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


def _ablation_point(a, n, dx, m, omega_max):
    model = LocallyStationary(a)
    grid = FrequencyGrid(omega_max, m)
    xs = locations(n, dx)
    with warnings.catch_warnings():
        # the sweeps cross the aliasing boundary on purpose
        warnings.simplefilter("ignore", AliasingViolation)
        _, lr = approximate(model, grid, xs, "real_cosine")
    return approximation_errors(lr, model)[1]


def ablation(ms=(20, 40, 80, 160, 320), omega_maxes=(4, 5, 6, 8, 10, 12),
             ns=(1000, 2000), fixed_omega_max=5.0, fixed_m=100, a=1.0, dx=1e-3,
             threads=None):
    """Relative RSSE sweeps over m and omega_max on the locally stationary kernel.

    Returns rows ``(sweep_var, n, value, rel_rsse)`` in sweep order.
    """
    jobs = []
    for n in ns:
        for m in ms:
            jobs.append(("m", n, m, (a, n, dx, int(m), float(fixed_omega_max))))
    for n in ns:
        for wm in omega_maxes:
            jobs.append(("omega_max", n, wm, (a, n, dx, int(fixed_m), float(wm))))
    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(lambda j: _ablation_point(*j[3]), jobs))
    else:
        errs = [_ablation_point(*j[3]) for j in jobs]
    return [(var, n, value, err) for (var, n, value, _), err in zip(jobs, errs)]


@dataclass
class SyntheticData:
    xs: np.ndarray
    z: np.ndarray
    f: np.ndarray
    a: float
    noise_std: float


def synthetic_dataset(seed, a=0.5, n=50, noise_std=1e-2, x_range=(-5.0, 5.0)):
    """Noisy draw from the locally stationary GP at uniform random locations."""
    rng = make_rng([int(seed), 0])
    lo, hi = x_range
    xs = np.sort(lo + (hi - lo) * rng.random(n))
    K = gram(LocallyStationary(a), xs)
    C = hermitian_psd_factor(K)
    f = C @ box_muller(rng, C.shape[1])
    z = f + noise_std * box_muller(rng, n)
    return SyntheticData(xs, z, f, a, noise_std)


def exact_posterior(data, xs_test):
    model = LocallyStationary(data.a)
    return dense_posterior(
        gram(model, data.xs), gram(model, xs_test, data.xs), gram(model, xs_test),
        data.z, data.noise_std**2,
    )


def mean_relative_error(mean, reference):
    return float(np.linalg.norm(mean - reference) / np.linalg.norm(reference))


def learning_run(seed, iterations=4000, r=8, m=255, omega_max=10.0, lr=1e-2,
                 hidden=(128, 128), t=100, test_range=(-10.0, 10.0), a=0.5, n=50,
                 noise_std=1e-2, input_scale=None):
    """One seed of the synthetic kernel-learning comparison against RBF."""
    data = synthetic_dataset(seed, a, n, noise_std)
    xs_test = np.linspace(*test_range, t)
    mu_true, cov_true = exact_posterior(data, xs_test)

    grid = FrequencyGrid(omega_max, m, symmetric=True)
    config = TrainConfig(learning_rate=lr, iterations=iterations, seed=seed)
    result = train(data.xs, data.z, grid, r, config, hidden=hidden, input_scale=input_scale)
    mu_learned, cov_learned = posterior_predict(result.cache, xs_test)

    kernel, noise = fit_rbf(data.xs, data.z)
    mu_rbf, cov_rbf = rbf_posterior(data.xs, data.z, xs_test, kernel, noise)
    return {
        "seed": seed,
        "data": data,
        "xs_test": xs_test,
        "result": result,
        "true": (mu_true, cov_true),
        "learned": (mu_learned, cov_learned),
        "rbf": (mu_rbf, cov_rbf),
        "rbf_params": (kernel, noise),
        "rel_error_learned": mean_relative_error(mu_learned, mu_true),
        "rel_error_rbf": mean_relative_error(mu_rbf, mu_true),
        "nll_initial": float(result.history[0]),
        "nll_final": float(result.history[-1]),
    }

