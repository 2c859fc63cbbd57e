"""Sample paths of the approximated process from a feature factor.

Randomness comes from numpy's Philox4x32-10 counter-based generator seeded
with the user seed. Its ``random()`` doubles feed a Box-Muller transform
implemented here, so normal draws do not depend on numpy's own normal
sampler: for uniform pairs ``(u1, u2)``,
``r = sqrt(-2 log(1 - u1))`` and the normals are ``r cos(2 pi u2)`` and
``r sin(2 pi u2)``, emitted in that order.
"""

import math

import numpy as np

from .features import basis_matrix, check_aliasing


def make_rng(seed):
    """Philox generator; ``seed`` is an int or a sequence of ints."""
    return np.random.Generator(np.random.Philox(seed))


def box_muller(rng, count):
    """``count`` standard normals from ``ceil(count / 2)`` uniform pairs."""
    pairs = (count + 1) // 2
    u = rng.random((pairs, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * math.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return z.ravel()[:count]


def sample_circular_gaussian(p, seed, size=None):
    """Circular complex normals with variance 1/2 in each component.

    Returns shape ``(p,)`` or ``(size, p)``; consecutive normals from the
    stream give the real and imaginary parts of each entry.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    rows = 1 if size is None else size
    z = box_muller(make_rng(seed), 2 * rows * p).reshape(rows, p, 2)
    E = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
    return E[0] if size is None else E


def simulate_paths(factor, xs, n_paths, seed, strict=False):
    """Draw ``n_paths`` sample paths at ``xs``; returns an ``(n_paths, n)`` array.

    Complex mode uses ``Z = alpha C E`` with circular ``E``. The real modes use
    real standard normal ``e`` so that ``W = C e`` keeps its pseudo-covariance;
    ``Z = 2 Re[alpha~ C] e``.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    check_aliasing(xs, factor.grid, strict)
    p = factor.rank
    if n_paths == 0 or p == 0:
        dtype = complex if factor.mode == "complex" else float
        return np.zeros((n_paths, xs.size), dtype=dtype)
    Phi = basis_matrix(xs, factor.grid, factor.mode) @ factor.C
    if factor.mode == "complex":
        E = sample_circular_gaussian(p, seed, size=n_paths)
        return E @ Phi.T
    e = box_muller(make_rng(seed), n_paths * p).reshape(n_paths, p)
    return e @ (2.0 * Phi.real).T


def simulate_path(factor, xs, seed, strict=False):
    return simulate_paths(factor, xs, 1, seed, strict)[0]
