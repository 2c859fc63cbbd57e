"""Regular Fourier feature maps and the low-rank kernels they induce.

A grid of frequencies ``w_k`` and a factor ``C`` with ``C C^H = S dw^2``
give the feature map ``phi(x) = alpha(x) C``. Three modes are supported:

``complex``
    ``alpha_k(x) = exp(i w_k x)`` and ``K = L L^H``. Used with the symmetric
    grid, this is the full Riemann sum of the spectral representation and
    handles complex-valued densities.
``real_hermitian``
    Real process on the nonnegative grid, ``Z(x) = 2 Re[alpha~(x) W]`` with
    ``alpha~`` halved at the origin. The weights ``W = C e`` carry both the
    covariance ``S dw^2`` and the pseudo-covariance ``P dw^2``,
    ``P_jk = s(w_j, -w_k)``, so
    ``K = 2 Re[L L^H] + 2 Re[L L^T] = 4 Re(L) Re(L)^T``. For circular
    weights (``P = 0``) the second term vanishes.
``real_cosine``
    Real weights (``s(w, w') = s(w, -w')``): ``alpha~_k = cos(w_k x)``
    halved at the origin and ``K = 4 L L^T``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AliasingViolation, NonRealKernel, ZeroReference
from .kernels import gram
from .linalg import hermitian_psd_factor
from .spectral import build_pseudo_matrix, build_spectral_matrix, validate_aliasing

MODES = ("complex", "real_hermitian", "real_cosine")
REAL_RESIDUE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class FeatureFactor:
    C: np.ndarray
    grid: object
    mode: str = "complex"
    real_kernel: bool = False
    jitter: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.C.shape[0] != self.grid.m:
            raise ValueError(f"factor has {self.C.shape[0]} rows, grid has {self.grid.m}")

    @property
    def rank(self):
        return self.C.shape[1]


@dataclass(frozen=True, eq=False)
class LowRankKernel:
    L: np.ndarray
    locations: np.ndarray
    mode: str
    real_kernel: bool = False

    @property
    def n(self):
        return self.L.shape[0]


def _check_real_grid(grid, mode):
    if grid.symmetric:
        raise ValueError(f"mode {mode!r} expects the nonnegative frequency grid")


def build_feature_factor(grid, model, mode="complex", jitter=0.0):
    """Factor the spectral matrix of ``model`` on ``grid`` for the given mode."""
    dw2 = grid.delta_omega**2
    S = build_spectral_matrix(grid, model)
    if mode == "complex":
        C = hermitian_psd_factor(S * dw2, jitter)
    elif mode == "real_cosine":
        _check_real_grid(grid, mode)
        S = np.asarray(S)
        if np.iscomplexobj(S):
            if np.abs(S.imag).max() > 1e-12 * np.abs(S).max():
                raise ValueError("real_cosine mode needs a real spectral matrix")
            S = S.real
        C = hermitian_psd_factor(S * dw2, jitter)
    elif mode == "real_hermitian":
        _check_real_grid(grid, mode)
        P = build_pseudo_matrix(grid, model)
        S = np.asarray(S, dtype=complex)
        P = np.asarray(P, dtype=complex)
        # joint covariance of (Re W, Im W)
        R = 0.5 * dw2 * np.block(
            [
                [S.real + P.real, P.imag - S.imag],
                [P.imag + S.imag, S.real - P.real],
            ]
        )
        R = 0.5 * (R + R.T)
        G = hermitian_psd_factor(R, 0.5 * jitter)
        m = grid.m
        C = G[:m] + 1j * G[m:]
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return FeatureFactor(C, grid, mode, bool(getattr(model, "real_kernel", False)), jitter)


def basis_matrix(xs, grid, mode="complex"):
    """Rows ``alpha(x_i)`` for every location (n x m)."""
    xs = np.asarray(xs, dtype=float).ravel()
    w = grid.frequencies
    phase = np.outer(xs, w)
    if mode == "real_cosine":
        out = np.cos(phase)
    else:
        out = np.exp(1j * phase)
    if mode != "complex":
        out[:, w == 0.0] = 0.5
    return out


def fourier_basis(x, grid, mode="complex"):
    return basis_matrix([x], grid, mode)[0]


def check_aliasing(xs, grid, strict=False):
    xs = np.asarray(xs, dtype=float)
    x_max = float(np.abs(xs).max()) if xs.size else 0.0
    if validate_aliasing(grid, x_max):
        return True
    msg = (
        f"max |x| = {x_max:g} is not below pi/delta_omega = "
        f"{math.pi / grid.delta_omega:g}; the approximation is periodic in "
        f"{grid.period:g}"
    )
    if strict:
        raise AliasingViolation(msg)
    warnings.warn(msg, AliasingViolation, stacklevel=3)
    return False


def build_feature_matrix(xs, factor, strict=False):
    xs = np.asarray(xs, dtype=float).ravel()
    check_aliasing(xs, factor.grid, strict)
    L = basis_matrix(xs, factor.grid, factor.mode) @ factor.C
    return LowRankKernel(L, xs, factor.mode, factor.real_kernel)


def cross_kernel(a, b):
    """Low-rank kernel between the locations of ``a`` (rows) and ``b`` (columns)."""
    if a.mode != b.mode:
        raise ValueError("feature matrices use different modes")
    if a.mode == "real_cosine":
        return 4.0 * a.L @ b.L.T
    if a.mode == "real_hermitian":
        return 4.0 * a.L.real @ b.L.real.T
    G = a.L @ b.L.conj().T
    scale = float(np.abs(G).max(initial=0.0))
    resid = float(np.abs(G.imag).max(initial=0.0))
    if resid <= REAL_RESIDUE_RTOL * scale:
        return G.real
    if a.real_kernel:
        raise NonRealKernel(
            f"imaginary residue {resid:.3e} exceeds {REAL_RESIDUE_RTOL:g} x {scale:.3e}"
        )
    return G


def kernel_matrix(lr):
    """Gram matrix of a low-rank kernel, PSD by construction."""
    K = cross_kernel(lr, lr)
    if np.iscomplexobj(K):
        return 0.5 * (K + K.conj().T)
    return 0.5 * (K + K.T)


def riemann_kernel_oracle(xs, grid, model, mirror=None):
    """Brute-force double Riemann sum of the spectral representation.

    Sums ``exp(i (w_j x - w_k x')) s(w_j, w_k) dw^2`` over every frequency
    pair without any factorization. Nonnegative grids are mirrored to the
    Hermitian-symmetric extension, which is the sum the real modes represent.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if mirror is None:
        mirror = not grid.symmetric
    w = grid.mirrored_frequencies() if mirror else grid.frequencies
    S = model.density(w[:, None], w[None, :]) * grid.delta_omega**2
    E = np.exp(1j * np.outer(xs, w))
    K = np.einsum("aj,jk,bk->ab", E, S, E.conj())
    scale = float(np.abs(K).max(initial=0.0))
    if np.abs(K.imag).max(initial=0.0) <= REAL_RESIDUE_RTOL * max(scale, 1e-300):
        return K.real
    return K


class GridDensitySampler:
    """Draws frequency pairs from a real, nonnegative density by inverse CDF.

    The density is tabulated on a ``resolution x resolution`` grid over
    ``[-omega_max, omega_max]^2``; a cell is picked by inverse CDF and the
    pair is placed uniformly inside it.
    """

    def __init__(self, model, omega_max, resolution=401, sigma2=None):
        self.omega_max = float(omega_max)
        self.edges = np.linspace(-omega_max, omega_max, resolution + 1)
        self.h = self.edges[1] - self.edges[0]
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        dens = np.asarray(model.density(centers[:, None], centers[None, :]))
        if np.iscomplexobj(dens):
            if np.abs(dens.imag).max() > 1e-12 * np.abs(dens).max():
                raise ValueError("naive Monte Carlo needs a real density")
            dens = dens.real
        if dens.min() < 0:
            raise ValueError("naive Monte Carlo needs a nonnegative density")
        mass = dens.ravel() * self.h**2
        self.cdf = np.cumsum(mass)
        self.resolution = resolution
        self.sigma2 = float(self.cdf[-1]) if sigma2 is None else float(sigma2)

    def sample(self, size, rng):
        u = rng.random((size, 3))
        idx = np.searchsorted(self.cdf, u[:, 0] * self.cdf[-1], side="right")
        idx = np.minimum(idx, self.cdf.size - 1)
        i, j = np.divmod(idx, self.resolution)
        omega = self.edges[i] + u[:, 1] * self.h
        omega_prime = self.edges[j] + u[:, 2] * self.h
        return omega, omega_prime


def naive_mc_kernel(xs, sampler, m_samples, seed):
    """Monte Carlo estimate with independent (w, w') pairs; not PSD in general."""
    xs = np.asarray(xs, dtype=float).ravel()
    rng = np.random.Generator(np.random.Philox(seed))
    omega, omega_prime = sampler.sample(m_samples, rng)
    A = np.exp(1j * np.outer(xs, omega))
    B = np.exp(1j * np.outer(xs, omega_prime))
    return sampler.sigma2 / m_samples * (A @ B.conj().T)


def relative_error(K_hat, K_exact):
    """Relative root sum of squared errors (Frobenius)."""
    K_hat = np.asarray(K_hat)
    K_exact = np.asarray(K_exact)
    if K_hat.shape != K_exact.shape:
        raise ValueError(f"shape mismatch {K_hat.shape} vs {K_exact.shape}")
    ref = np.linalg.norm(K_exact)
    if ref == 0:
        raise ZeroReference("reference kernel has zero Frobenius norm")
    return float(np.linalg.norm(K_hat - K_exact) / ref)


def approximation_errors(lr, params, chunk=1024):
    """``(max_abs_error, rel_rsse)`` of ``lr`` against the exact kernel.

    Processes row blocks so n x n matrices are never held in full.
    """
    xs = lr.locations
    n = xs.size
    max_abs = 0.0
    sq_err = 0.0
    sq_ref = 0.0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = LowRankKernel(lr.L[start:stop], xs[start:stop], lr.mode, lr.real_kernel)
        K_hat = cross_kernel(block, lr)
        K = gram(params, xs[start:stop], xs)
        diff = np.abs(K_hat - K)
        max_abs = max(max_abs, float(diff.max(initial=0.0)))
        sq_err += float(np.sum(diff**2))
        sq_ref += float(np.sum(np.abs(K) ** 2))
    if sq_ref == 0:
        raise ZeroReference("reference kernel has zero Frobenius norm")
    return max_abs, math.sqrt(sq_err / sq_ref)
