"""Frequency grids and closed-form spectral densities s(w, w')."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitize

__all__ = [
    "FrequencyGrid",
    "LocallyStationary",
    "HarmonizableMixture",
    "eval_ls",
    "eval_hmk",
    "default_hmk",
    "build_spectral_matrix",
    "build_pseudo_matrix",
    "validate_aliasing",
    "density_from_dict",
    "density_to_dict",
    "load_density",
    "save_density",
]


@dataclass(frozen=True)
class FrequencyGrid:
    """Equispaced frequency grid.

    The nonnegative grid is ``{0, dw, ..., (m-1) dw}`` with ``dw = omega_max / m``.
    The symmetric grid is ``linspace(-omega_max, omega_max, m)``, so
    ``dw = 2 omega_max / (m - 1)``; it contains zero when ``m`` is odd and
    is offset by ``dw / 2`` when ``m`` is even.
    """

    omega_max: float
    m: int
    symmetric: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if self.symmetric and self.m < 2:
            raise ValueError("a symmetric grid needs m >= 2")

    @property
    def delta_omega(self):
        if self.symmetric:
            return 2.0 * self.omega_max / (self.m - 1)
        return self.omega_max / self.m

    @property
    def frequencies(self):
        dw = self.delta_omega
        if self.symmetric:
            return (np.arange(self.m) - (self.m - 1) / 2.0) * dw
        return np.arange(self.m) * dw

    @property
    def period(self):
        return 2.0 * math.pi / self.delta_omega

    @property
    def has_zero(self):
        return not self.symmetric or self.m % 2 == 1

    def mirrored_frequencies(self):
        """All frequencies of the Hermitian-symmetric extension of the grid."""
        w = self.frequencies
        if self.symmetric:
            return w
        return np.concatenate([-w[:0:-1], w])

    def to_dict(self):
        return {"omega_max": self.omega_max, "m": self.m, "symmetric": self.symmetric}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["omega_max"]), int(d["m"]), bool(d["symmetric"]))


def eval_ls(a, omega, omega_prime):
    """Spectral density of the locally stationary (Silverman) kernel."""
    omega = np.asarray(omega, dtype=float)
    omega_prime = np.asarray(omega_prime, dtype=float)
    mid = 0.5 * (omega + omega_prime)
    lag = omega - omega_prime
    return np.exp(-mid**2 / (2.0 * a) - lag**2 / (8.0 * a)) / (4.0 * math.pi * a)


@dataclass(frozen=True)
class LocallyStationary:
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")

    real_kernel = True
    # s(w, w') = s(w, -w'): spectral weights are real
    real_weights = True

    def density(self, omega, omega_prime):
        return eval_ls(self.a, omega, omega_prime)


@dataclass(frozen=True, eq=False)
class HarmonizableMixture:
    """Single-component harmonizable mixture: shifted LS densities weighted by B."""

    a: float
    etas: np.ndarray
    amplitude: np.ndarray = field(repr=False)

    def __post_init__(self):
        etas = np.atleast_1d(np.asarray(self.etas, dtype=float))
        B = np.atleast_2d(np.asarray(self.amplitude, dtype=complex))
        if not self.a > 0:
            raise ValueError("a must be positive")
        if B.shape != (etas.size, etas.size):
            raise ValueError(f"amplitude must be {etas.size}x{etas.size}, got {B.shape}")
        if np.abs(B - B.conj().T).max() > 1e-12 * max(np.abs(B).max(), 1.0):
            raise ValueError("amplitude matrix must be Hermitian")
        if np.linalg.eigvalsh(hermitize(B))[0] < -1e-10 * max(np.abs(B).max(), 1.0):
            raise ValueError("amplitude matrix must be positive semi-definite")
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "amplitude", hermitize(B))

    real_weights = False

    @property
    def real_kernel(self):
        # needs a pairing eta_pi(i) = -eta_i with conj(B) = B[pi][:, pi]
        perm = []
        for eta in self.etas:
            hit = np.flatnonzero(np.abs(self.etas + eta) <= 1e-12 * max(1.0, abs(eta)))
            if hit.size == 0:
                return False
            perm.append(hit[0])
        perm = np.array(perm)
        B = self.amplitude
        return bool(np.allclose(B.conj(), B[np.ix_(perm, perm)], rtol=0, atol=1e-12))

    def density(self, omega, omega_prime):
        omega = np.asarray(omega, dtype=float)
        omega_prime = np.asarray(omega_prime, dtype=float)
        out = np.zeros(np.broadcast(omega, omega_prime).shape, dtype=complex)
        for i, ei in enumerate(self.etas):
            for j, ej in enumerate(self.etas):
                out += self.amplitude[i, j] * eval_ls(self.a, omega - ei, omega_prime - ej)
        return out


def eval_hmk(params, omega, omega_prime):
    return params.density(omega, omega_prime)


def default_hmk(a=1.0):
    """Two conjugate components at +-2 pi with B = [[2, i/2], [-i/2, 2]]."""
    B = np.array([[2.0, 0.5j], [-0.5j, 2.0]])
    return HarmonizableMixture(a, np.array([2 * math.pi, -2 * math.pi]), B)


def build_spectral_matrix(grid, model):
    """``[S]_ij = s(w_i, w_j)`` on the grid, symmetrized to be exactly Hermitian."""
    w = grid.frequencies
    return hermitize(model.density(w[:, None], w[None, :]))


def build_pseudo_matrix(grid, model):
    """``[P]_ij = s(w_i, -w_j)``, the pseudo-covariance of real-process weights."""
    w = grid.frequencies
    P = np.asarray(model.density(w[:, None], -w[None, :]))
    return 0.5 * (P + P.T)


def validate_aliasing(grid, x_max):
    if x_max < 0:
        raise ValueError("x_max must be nonnegative")
    return bool(x_max < math.pi / grid.delta_omega)


def density_to_dict(model):
    if isinstance(model, LocallyStationary):
        return {"model": "ls", "a": model.a, "etas": [], "B_re": [], "B_im": []}
    if isinstance(model, HarmonizableMixture):
        return {
            "model": "hmk",
            "a": model.a,
            "etas": model.etas.tolist(),
            "B_re": model.amplitude.real.tolist(),
            "B_im": model.amplitude.imag.tolist(),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def density_from_dict(d):
    kind = d.get("model")
    if kind == "ls":
        return LocallyStationary(float(d["a"]))
    if kind == "hmk":
        B = np.asarray(d["B_re"], dtype=float) + 1j * np.asarray(d.get("B_im") or 0.0)
        return HarmonizableMixture(float(d["a"]), np.asarray(d["etas"], dtype=float), B)
    raise ValueError(f"unknown spectral model {kind!r}")


def save_density(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(density_to_dict(model), fh, indent=2)


def load_density(path):
    with open(path, encoding="utf-8") as fh:
        return density_from_dict(json.load(fh))
