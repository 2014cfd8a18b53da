"""Correlated complex Gaussian noise increments.

A diffusive unraveling is driven by a zero-mean complex increment dchi with

    E[dchi dchi^dag] = W dt        (fixed by the generator),
    E[dchi dchi^T]   = S dt        (free),

where S is any complex symmetric matrix keeping the total correlation
block matrix of (dchi, conj(dchi)),

    [[W, S], [conj(S), conj(W)]],

positive semidefinite (for Hermitian W and symmetric S the lower blocks
are S^dag and W^T; for real W the corner is just W).  S = 0 is quantum
state diffusion; every other admissible S is an equally valid unraveling
of the same master equation.

Sampling goes through the real embedding dchi = u + i v with

    E[u u^T] = Re(W + S) dt / 2,
    E[v v^T] = Re(W - S) dt / 2,
    E[u v^T] = (Im S - Im W) dt / 2,

a 2N x 2N real covariance that is factored by eigendecomposition with a
small floor for rounding.  Increments are projected onto the complement of
the generating state, which leaves the moments untouched (W and any valid
S annihilate the state) and suppresses rounding leakage along it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linalg as la

#: Eigenvalues of the sampling covariance above this (negative) floor are
#: treated as zero; anything lower is a hard error.
COV_FLOOR = 1e-10


@dataclass(frozen=True)
class NoiseSpec:
    """Self-correlation matrix S plus a tag recording where it came from.

    ``origin`` is one of ``"qsd_zero"`` (S = 0), ``"explicit"`` or
    ``"from_s"`` (built from an s-matrix in a rate-operator eigenframe).
    """

    S: np.ndarray
    origin: str

    def __post_init__(self):
        s = np.asarray(self.S, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"S must be square, got shape {s.shape}")
        scale = max(1.0, float(np.abs(s).max()))
        if np.abs(s - s.T).max() > 1e-12 * scale:
            raise ValueError("S must be symmetric (S = S^T)")
        s.setflags(write=False)
        object.__setattr__(self, "S", s)


@dataclass(frozen=True)
class Increment:
    """One sampled noise increment dchi over a time step dt."""

    dchi: np.ndarray
    dt: float


def qsd_spec(dim: int) -> NoiseSpec:
    """The quantum-state-diffusion choice S = 0."""
    return NoiseSpec(np.zeros((dim, dim), dtype=complex), "qsd_zero")


def explicit_spec(s_matrix) -> NoiseSpec:
    return NoiseSpec(np.asarray(s_matrix, dtype=complex), "explicit")


def validate_noise_spec(w_op: np.ndarray, s_matrix: np.ndarray, tol: float = COV_FLOOR) -> bool:
    """True iff an increment with these correlations exists.

    Checks positive semidefiniteness (within ``tol``) of the total
    correlation block matrix [[W, S], [conj(S), conj(W)]] of the augmented
    vector (dchi, conj(dchi)); the lower blocks are S^dag and W^T for
    Hermitian W and symmetric S.
    """
    w_op = np.asarray(w_op, dtype=complex)
    s = np.asarray(s_matrix, dtype=complex)
    if s.shape != w_op.shape:
        raise ValueError(f"S shape {s.shape} does not match W shape {w_op.shape}")
    scale = max(1.0, float(np.abs(s).max()))
    if np.abs(s - s.T).max() > 1e-12 * scale:
        raise ValueError("S must be symmetric (S = S^T)")
    block = np.block([[w_op, s], [np.conj(s), np.conj(w_op)]])
    lo = float(np.linalg.eigvalsh(la.hermitize(block))[0])
    return lo >= -tol * max(1.0, float(np.abs(block).max()))


def build_S_from_s(phi_perp, s_matrix) -> NoiseSpec:
    """Self-correlation from an s-matrix in a rate-operator eigenframe.

    ``phi_perp`` are the (not necessarily normalized) vectors of a
    decomposition ``W = sum_a phi_a phi_a^dag``, mutually orthogonal and
    orthogonal to the generating state.  ``s_matrix`` is the symmetric
    self-correlation of the standard noises in that frame; its spectral
    norm may not exceed 1.  The increment is ``dchi = sum_a phi_a dxi_a*``,
    which is why the conjugate of s enters:

        S = sum_ab conj(s_ab) phi_a phi_b^T.
    """
    phi = np.atleast_2d(np.asarray(phi_perp, dtype=complex))
    s = np.asarray(s_matrix, dtype=complex)
    m = phi.shape[0]
    if s.shape != (m, m):
        raise ValueError(f"s shape {s.shape} does not match {m} frame vectors")
    if np.abs(s - s.T).max() > 1e-12 * max(1.0, float(np.abs(s).max())):
        raise ValueError("s must be symmetric")
    if la.spectral_norm(s) > 1.0 + 1e-12:
        raise ValueError(f"spectral norm of s is {la.spectral_norm(s):.6f} > 1")
    norms = np.linalg.norm(phi, axis=1)
    gram = phi.conj() @ phi.T
    off = np.abs(gram - np.diag(np.diag(gram))).max() if m > 1 else 0.0
    if off > 1e-10 * max(1.0, float((norms.max() if m else 0.0) ** 2)):
        raise ValueError("frame vectors are not mutually orthogonal")
    return NoiseSpec(phi.T @ np.conj(s) @ phi, "from_s")


def real_embedding_covariance(w_op: np.ndarray, s_matrix: np.ndarray, dt: float) -> np.ndarray:
    """Real 2N x 2N covariance of (Re dchi, Im dchi), batched on leading axes."""
    w_op = np.asarray(w_op, dtype=complex)
    s = np.asarray(s_matrix, dtype=complex)
    a = 0.5 * (w_op.real + s.real) * dt
    b = 0.5 * (w_op.real - s.real) * dt
    c = 0.5 * (s.imag - w_op.imag) * dt
    top = np.concatenate([a, c], axis=-1)
    bottom = np.concatenate([np.swapaxes(c, -1, -2), b], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def factor_psd(sigma: np.ndarray, floor: float = COV_FLOOR) -> np.ndarray:
    """Factor B of a (nearly) PSD real symmetric matrix with B B^T = sigma.

    Eigenvalues in [-floor, 0] are clipped to zero; anything below raises,
    which in this package signals non-positive dynamics at the generating
    state or an invalid self-correlation matrix.
    """
    vals, vecs = np.linalg.eigh(sigma)
    lo = float(vals.min())
    if lo < -floor:
        raise ValueError(
            f"noise covariance has eigenvalue {lo:.3e} < -{floor:.1e}; "
            "non-positive dynamics at this state or invalid S"
        )
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)[..., None, :]


def _project_out(dchi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    # removes rounding leakage along psi; exact moments are unchanged
    return dchi - np.einsum("...i,i->...", dchi, np.conj(psi))[..., None] * psi


def sample_increments(w_op: np.ndarray, spec: NoiseSpec, psi: np.ndarray, dt: float,
                      rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent increments; returns a (size, N) array."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    psi = la.check_state(psi)
    n = psi.shape[0]
    sigma = real_embedding_covariance(w_op, spec.S, dt)
    b = factor_psd(sigma)
    z = rng.standard_normal((size, 2 * n))
    xy = z @ b.T
    dchi = xy[:, :n] + 1j * xy[:, n:]
    return _project_out(dchi, psi)


def sample_increment(w_op: np.ndarray, spec: NoiseSpec, psi: np.ndarray, dt: float,
                     rng: np.random.Generator) -> Increment:
    """Draw one increment dchi with E[dchi dchi^dag] = W dt, E[dchi dchi^T] = S dt."""
    dchi = sample_increments(w_op, spec, psi, dt, rng, size=1)[0]
    return Increment(dchi=dchi, dt=float(dt))
