"""Dense linear algebra helpers: PSD factorization and low-rank Gaussian solves."""

import numpy as np
from scipy import linalg as sla

from .errors import IndefiniteInput, NonHermitianInput, SingularInnerSystem

HERMITIAN_RTOL = 1e-12
INDEFINITE_RTOL = 1e-6
RANK_RTOL = 1e-12
COND_MAX = 1e14


def hermitian_defect(S):
    """Relative Frobenius size of the anti-Hermitian part of ``S``."""
    S = np.asarray(S)
    scale = np.linalg.norm(S)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(S - S.conj().T) / scale)


def hermitize(S):
    S = np.asarray(S)
    return 0.5 * (S + S.conj().T)


def _fix_phase(V):
    # first non-negligible component of every eigenvector is made real positive
    out = V.copy()
    mags = np.abs(out)
    for j in range(out.shape[1]):
        col = mags[:, j]
        idx = int(np.argmax(col > 1e-8 * col.max())) if col.max() > 0 else 0
        c = out[idx, j]
        if c != 0:
            out[:, j] *= np.conj(c) / abs(c)
    return out


def hermitian_psd_factor(S, jitter=0.0):
    """Return a thin factor ``C`` with ``C @ C.conj().T ~= S + jitter * I``.

    Uses an eigendecomposition with clipping rather than Cholesky because
    spectral matrices are routinely rank deficient. Eigenpairs below
    ``RANK_RTOL * lambda_max`` are dropped, so ``C`` has ``p <= dim``
    columns, ordered by descending eigenvalue.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    if hermitian_defect(S) > HERMITIAN_RTOL:
        raise NonHermitianInput(
            f"symmetry defect {hermitian_defect(S):.3e} exceeds {HERMITIAN_RTOL:g}"
        )
    dim = S.shape[0]
    complex_input = np.iscomplexobj(S)
    A = hermitize(S)
    if jitter:
        A = A + jitter * np.eye(dim)
    if dim == 0:
        return np.zeros((0, 0), dtype=A.dtype)

    evals, evecs = np.linalg.eigh(A)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]

    scale = max(float(np.real(np.trace(A))) / dim, 0.0)
    if evals[-1] < -INDEFINITE_RTOL * scale or (scale == 0.0 and evals[-1] < 0):
        raise IndefiniteInput(
            f"most negative eigenvalue {evals[-1]:.3e} below "
            f"-{INDEFINITE_RTOL:g} * trace/dim = {-INDEFINITE_RTOL * scale:.3e}"
        )
    lmax = evals[0]
    if lmax <= 0:
        return np.zeros((dim, 0), dtype=A.dtype)
    keep = evals >= RANK_RTOL * lmax
    V = _fix_phase(evecs[:, keep])
    if not complex_input:
        V = V.real
    return V * np.sqrt(evals[keep])


def _inner_cholesky(L, sigma2):
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    p = L.shape[1]
    inner = L.T @ L + sigma2 * np.eye(p)
    if p:
        w = np.linalg.eigvalsh(inner)
        if w[0] <= 0 or w[-1] / w[0] > COND_MAX:
            raise SingularInnerSystem(
                f"inner {p}x{p} system has condition estimate "
                f"{(w[-1] / w[0]) if w[0] > 0 else np.inf:.3e}"
            )
    return sla.cho_factor(inner, lower=True), inner


def woodbury_solve(L, sigma2, z):
    """Solve ``(L L^T + sigma2 I) x = z`` through the p x p inner system.

    ``z`` may be a vector or an n x k block of right-hand sides.
    """
    L = np.asarray(L, dtype=float)
    z = np.asarray(z, dtype=float)
    if L.shape[1] == 0:
        return z / sigma2
    cho, _ = _inner_cholesky(L, sigma2)
    return (z - L @ sla.cho_solve(cho, L.T @ z)) / sigma2


def lowrank_logdet(L, sigma2):
    """``log det(L L^T + sigma2 I)`` via the matrix determinant lemma."""
    L = np.asarray(L, dtype=float)
    n, p = L.shape
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if p == 0:
        return n * np.log(sigma2)
    cho, _ = _inner_cholesky(L, sigma2)
    return (n - p) * np.log(sigma2) + 2.0 * np.sum(np.log(np.diag(cho[0])))
