"""Invariant rate objects of a generator at a pure state.

For a generator L and a normalized state psi, write ``L = L(psi psi^dag)``
for the local action.  The package revolves around three derived objects:

* the transition rate operator ``W = L - {L, P} + <L> P`` with
  ``P = psi psi^dag``, which annihilates psi from both sides, is Hermitian,
  and is positive semidefinite exactly when the dynamics preserves
  positivity;
* the total transition rate ``w = Tr W = -<L>``;
* the frictional drift ``(L - <L>) psi``, the norm-conserving deterministic
  velocity of the state.  Only this action is defined, so the drift vector
  is stored rather than any operator extension.

These reassemble the local master-equation action exactly:
``drift psi^dag + psi drift^dag + W - w P = L``, which is the identity
:func:`reconstruct_rhs` checks and every unraveling in this package is
built on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linalg as la


@dataclass(frozen=True)
class RateStructure:
    """Rate objects at one state: local action L, rate operator W, total
    rate w and the frictional drift vector (all rates in units 1/time)."""

    L: np.ndarray
    W: np.ndarray
    w: float
    drift: np.ndarray


def compute_L(lv, psi: np.ndarray) -> np.ndarray:
    """Local action of the generator on the projector of ``psi``.

    Hermitian and traceless for any trace- and Hermiticity-preserving
    generator.
    """
    psi = la.check_state(psi)
    return lv.apply(la.outer(psi))


def compute_rate_structure(lv, psi: np.ndarray) -> RateStructure:
    """Transition rate operator, total rate and frictional drift at psi."""
    psi = la.check_state(psi)
    p = la.outer(psi)
    loc = lv.apply(p)
    exp_l = float(la.expect(loc, psi).real)
    w_op = loc - loc @ p - p @ loc + exp_l * p
    drift = loc @ psi - exp_l * psi
    return RateStructure(L=loc, W=w_op, w=float(np.trace(w_op).real), drift=drift)


def reconstruct_rhs(rs: RateStructure, psi: np.ndarray) -> np.ndarray:
    """Reassemble the local master-equation action from the rate objects.

    Must equal :func:`compute_L` at the same state; the identity is exact
    and holds for every trace- and Hermiticity-preserving generator,
    positive or not.
    """
    psi = la.check_state(psi)
    cross = np.outer(rs.drift, np.conj(psi))
    return cross + cross.conj().T + rs.W - rs.w * la.outer(psi)


def kossakowski_pair_check(lv, psi: np.ndarray, psi_perp: np.ndarray,
                           tol: float = 1e-10) -> tuple[float, float]:
    """Diagonal quadratic forms of the local action on an orthogonal pair.

    Returns ``(<psi|L|psi>, <psi_perp|L|psi_perp>)``.  Positivity of the
    dynamics requires the first to be <= 0 and the second >= 0 for every
    orthogonal pair of pure states; this is equivalent to positive
    semidefiniteness of the transition rate operator.
    """
    psi = la.check_state(psi)
    psi_perp = la.check_state(psi_perp)
    overlap = abs(np.vdot(psi, psi_perp))
    if overlap > tol:
        raise ValueError(f"states are not orthogonal: |<psi|psi_perp>| = {overlap:.3e}")
    loc = lv.apply(la.outer(psi))
    return (float(la.expect(loc, psi).real), float(la.expect(loc, psi_perp).real))


def min_transverse_rate(lv, psi: np.ndarray) -> float:
    """Least eigenvalue of the rate operator on the complement of psi.

    Negative values (beyond rounding) certify that the dynamics does not
    preserve positivity.
    """
    rs = compute_rate_structure(lv, psi)
    basis = la.complement_basis(psi)
    restricted = la.hermitize(basis.conj().T @ rs.W @ basis)
    if restricted.shape == (0, 0):
        return 0.0
    return float(np.linalg.eigvalsh(restricted)[0])
