"""Catalog of ready-made generators spanning the positivity taxonomy.

These are mathematical test fixtures, not physical models: a completely
positive channel (amplitude damping), a dephasing channel, the Pauli
family whose coefficient signs steer it across the CP / positive-not-CP /
not-positive boundary, and seeded random generators for property tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .generators import Liouvillian, build_kossakowski, build_lindblad

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|


@dataclass(frozen=True)
class ModelDescriptor:
    """Catalog entry: constructor name, default parameters, the class the
    classifier is expected to report for those defaults."""

    name: str
    parameters: dict[str, float] = field(default_factory=dict)
    expected_class: str | None = None
    notes: str = ""


def amplitude_damping(gamma: float = 1.0) -> Liouvillian:
    """Decay |1> -> |0> at rate gamma, zero Hamiltonian; completely positive."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return build_lindblad(np.zeros((2, 2)), [np.sqrt(gamma) * SIGMA_MINUS])


def dephasing(gamma: float = 1.0) -> Liouvillian:
    """Pure dephasing along z at rate gamma; completely positive."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return build_lindblad(np.zeros((2, 2)), [np.sqrt(gamma) * SIGMA_Z])


def pauli(g1: float, g2: float, g3: float) -> Liouvillian:
    """Pauli-basis generator with coefficient matrix diag(g1, g2, g3).

    All signs are allowed.  Completely positive iff every g_i >= 0;
    positive iff every pairwise sum g_i + g_j >= 0 (the classifier
    confirms this at runtime rather than trusting the formula).
    """
    return build_kossakowski(
        np.zeros((2, 2)), [SIGMA_X, SIGMA_Y, SIGMA_Z], np.diag([g1, g2, g3]).astype(complex)
    )


def random_lindblad(dim: int, n_ops: int, seed: int) -> Liouvillian:
    """Seeded random jump-operator generator; always completely positive."""
    if not (2 <= dim <= 16):
        raise ValueError("dim must be in 2..16")
    rng = np.random.default_rng(seed)
    h = la.random_hermitian(dim, rng)
    scale = 1.0 / np.sqrt(dim)
    ops = [scale * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
           for _ in range(n_ops)]
    return build_lindblad(h, ops)


def _traceless_orthonormal_basis(dim: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random Hermitian traceless basis, orthonormal under Tr(A B)."""
    m = dim * dim - 1
    basis: list[np.ndarray] = []
    while len(basis) < m:
        g = la.random_hermitian(dim, rng)
        g -= np.trace(g) / dim * np.eye(dim)
        for b in basis:
            g -= np.trace(b @ g).real * b
        nrm = np.sqrt(np.trace(g @ g).real)
        if nrm < 1e-6:
            continue
        basis.append(g / nrm)
    return basis


def random_gks(dim: int, seed: int, neg_weight: float = 0.3) -> Liouvillian:
    """Seeded random generator with controlled negative coefficient weight.

    ``neg_weight = 0`` gives a completely positive generator; larger values
    push one coefficient eigenvalue negative, producing positive-not-CP or
    non-positive dynamics depending on the draw.  The class is decided at
    runtime by the classifier, never assumed.
    """
    if not (2 <= dim <= 16):
        raise ValueError("dim must be in 2..16")
    if neg_weight < 0:
        raise ValueError("neg_weight must be non-negative")
    rng = np.random.default_rng(seed)
    basis = _traceless_orthonormal_basis(dim, rng)
    m = len(basis)
    lam = rng.uniform(0.2, 1.0, size=m)
    lam[0] = -neg_weight * lam[0]
    z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    u, _ = np.linalg.qr(z)
    k = la.hermitize(u @ np.diag(lam) @ u.conj().T)
    h = la.random_hermitian(dim, rng)
    return build_kossakowski(h, basis, k)


CATALOG: tuple[ModelDescriptor, ...] = (
    ModelDescriptor("amplitude_damping", {"gamma": 1.0}, "cp",
                    "two-level decay; closed-form populations"),
    ModelDescriptor("dephasing", {"gamma": 1.0}, "cp",
                    "two-level phase damping"),
    ModelDescriptor("pauli", {"g1": 1.0, "g2": 1.0, "g3": -0.4}, "positive_not_cp",
                    "positive dynamics with no jump-operator representation"),
    ModelDescriptor("random_lindblad", {"dim": 3, "n_ops": 2, "seed": 0}, "cp",
                    "seeded random jump-operator generator"),
    ModelDescriptor("random_gks", {"dim": 2, "seed": 0, "neg_weight": 0.3}, None,
                    "seeded random indefinite-coefficient generator"),
)

_BUILDERS = {
    "amplitude_damping": amplitude_damping,
    "dephasing": dephasing,
    "pauli": pauli,
    "random_lindblad": random_lindblad,
    "random_gks": random_gks,
}


def build_model(name: str, params: dict | None = None) -> Liouvillian:
    """Construct a catalog model by name with keyword parameters."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown model {name!r}; known: {sorted(_BUILDERS)}")
    params = dict(params or {})
    for key in ("dim", "n_ops", "seed"):
        if key in params:
            params[key] = int(params[key])
    return _BUILDERS[name](**params)
