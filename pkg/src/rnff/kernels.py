"""Closed-form reference kernels: locally stationary, harmonizable mixture, RBF."""

from dataclasses import dataclass

import numpy as np

from .errors import NonRealKernel
from .spectral import HarmonizableMixture, LocallyStationary

HMK_IMAG_TOL = 1e-12


def k_ls(a, x, x_prime):
    """Silverman kernel exp(-2a xbar^2) exp(-a/2 xlag^2)."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    mid = 0.5 * (x + x_prime)
    lag = x - x_prime
    return np.exp(-2.0 * a * mid**2) * np.exp(-0.5 * a * lag**2)


def k_hmk(params, x, x_prime):
    """Single-component harmonizable mixture kernel (no input scaling).

    The imaginary residue is stripped; it must stay below ``HMK_IMAG_TOL``
    relative to the largest magnitude, otherwise the configuration does not
    describe a real kernel.
    """
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    mod = np.zeros(np.broadcast(x, x_prime).shape, dtype=complex)
    for i, ei in enumerate(params.etas):
        for j, ej in enumerate(params.etas):
            mod += params.amplitude[i, j] * np.exp(1j * (ei * x - ej * x_prime))
    out = k_ls(params.a, x, x_prime) * mod
    scale = max(float(np.abs(out).max(initial=0.0)), 1.0)
    resid = float(np.abs(out.imag).max(initial=0.0))
    if resid > HMK_IMAG_TOL * scale:
        raise NonRealKernel(f"imaginary residue {resid:.3e} in harmonizable mixture kernel")
    return out.real


def k_rbf(lengthscale, variance, x, x_prime):
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    return variance * np.exp(-0.5 * (x - x_prime) ** 2 / lengthscale**2)


@dataclass(frozen=True)
class RBF:
    lengthscale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if not (self.lengthscale > 0 and self.variance > 0):
            raise ValueError("RBF parameters must be positive")


def kernel_value(params, x, x_prime):
    if isinstance(params, LocallyStationary):
        return k_ls(params.a, x, x_prime)
    if isinstance(params, HarmonizableMixture):
        return k_hmk(params, x, x_prime)
    if isinstance(params, RBF):
        return k_rbf(params.lengthscale, params.variance, x, x_prime)
    raise TypeError(f"no closed-form kernel for {type(params).__name__}")


def gram(params, xs, ys=None):
    """Kernel matrix between ``xs`` and ``ys`` (defaults to ``xs``)."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = xs if ys is None else np.asarray(ys, dtype=float).ravel()
    K = kernel_value(params, xs[:, None], ys[None, :])
    if ys is xs:
        K = 0.5 * (K + K.T)
    return K
