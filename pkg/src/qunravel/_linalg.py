"""Dense linear-algebra helpers shared across the package.

Every superoperator in this package acts on column-stacked (Fortran-order)
vectorized operators; ``vec``/``unvec`` pin that convention in one place so
no other module has to think about it.  All helpers broadcast over leading
batch axes.
"""
from __future__ import annotations

import numpy as np


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack the last two axes of ``x``."""
    x = np.asarray(x)
    return np.swapaxes(x, -1, -2).reshape(*x.shape[:-2], -1)


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`vec` for n*n matrices."""
    v = np.asarray(v)
    return np.swapaxes(v.reshape(*v.shape[:-1], n, n), -1, -2)


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose on the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def outer(psi: np.ndarray) -> np.ndarray:
    """Rank-one projector(s) psi psi^dag, batched over leading axes."""
    psi = np.asarray(psi)
    return psi[..., :, None] * np.conj(psi[..., None, :])


def expect(op: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """State expectation <psi| op |psi>, batched over leading axes."""
    return np.einsum("...i,...ij,...j->...", np.conj(psi), op, psi)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def herm_defect(a: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity."""
    return float(np.abs(a - dag(a)).max())


def norm(psi: np.ndarray) -> np.ndarray:
    return np.linalg.norm(psi, axis=-1)


def normalized(psi: np.ndarray) -> np.ndarray:
    return psi / norm(psi)[..., None]


def check_state(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Validate and return a normalized pure state vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state must be a vector, got shape {psi.shape}")
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > tol:
        raise ValueError(f"state norm {n} deviates from 1 beyond {tol}")
    return psi


def haar_state(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random pure state(s): normalized complex Gaussian vectors."""
    shape = (dim,) if size is None else (size, dim)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return normalized(z)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return hermitize(a)


def complement_basis(psi: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the subspace orthogonal to ``psi``.

    Returns an (N, N-1) matrix whose columns complete ``psi`` to an
    orthonormal basis.
    """
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0]
    q, _ = np.linalg.qr(np.column_stack([psi, np.eye(n)]))
    # First QR column spans psi (input column 0 is a unit vector).
    return q[:, 1:]


def spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a), ord=2))
