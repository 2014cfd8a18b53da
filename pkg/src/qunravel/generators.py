"""Construction and classification of Markovian generators.

A generator is stored as a dense complex matrix acting on column-stacked
vectorized operators (the ``Liouvillian`` class).  It can be built three
ways: from jump-operator (Lindblad) data, from a general
basis-plus-coefficient-matrix form whose coefficient matrix may be
indefinite, or from a raw matrix.  Construction always verifies that the
map is trace-preserving and Hermiticity-preserving.

Classification answers two separate questions:

* :func:`is_cp_generator` decides complete positivity exactly through the
  Choi matrix restricted to the complement of the maximally entangled
  vector.
* :func:`check_positivity` probes positivity of the dynamics by sampling
  the transition rate operator over Haar-random pure states.  A negative
  eigenvalue is a proof of non-positivity (the sampled state is returned
  as a witness); absence of violations is evidence only, so the verdict
  is one-sided by design.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _linalg as la

#: Largest supported Hilbert space dimension (dense N^2 x N^2 matrices).
MAX_DIM = 16

#: Tolerance for structural identities (trace / Hermiticity preservation).
STRUCT_TOL = 1e-10

#: Threshold below which a rate-operator eigenvalue counts as a violation.
EIG_TOL = 1e-8


@dataclass(frozen=True)
class LindbladData:
    """Jump-operator representation: H plus a tuple of jump operators."""

    hamiltonian: np.ndarray
    ops: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class KossakowskiData:
    """General dissipator data: H, operator basis and coefficient matrix."""

    hamiltonian: np.ndarray
    basis: tuple[np.ndarray, ...]
    coefficients: np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class Liouvillian:
    """Immutable dense generator of a Markovian master equation.

    Parameters
    ----------
    matrix:
        Complex (N^2, N^2) matrix acting on column-stacked operators.
    dim:
        Hilbert space dimension N.
    provenance:
        Optional :class:`LindbladData` or :class:`KossakowskiData`
        describing how the matrix was built; ``None`` means raw.
    """

    def __init__(self, matrix, dim: int, provenance=None, validate: bool = True):
        if not (1 <= dim <= MAX_DIM):
            raise ValueError(f"dimension {dim} outside supported range 1..{MAX_DIM}")
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (dim * dim, dim * dim):
            raise ValueError(f"matrix shape {matrix.shape} incompatible with dim {dim}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix contains non-finite entries")
        self.matrix = _frozen(matrix)
        self.dim = dim
        self.provenance = provenance
        if validate:
            self._validate_structure()

    def _validate_structure(self) -> None:
        n = self.dim
        scale = max(1.0, float(np.abs(self.matrix).max()))
        tol = STRUCT_TOL * scale
        # Trace preservation: the trace functional annihilates the range.
        trace_row = la.vec(np.eye(n)) @ self.matrix
        if np.abs(trace_row).max() > tol:
            raise ValueError("generator is not trace-preserving")
        # Hermiticity preservation: T L T = conj(L) with T the transpose
        # permutation on vectorized operators.
        idx = np.arange(n * n).reshape(n, n)
        q = idx.T.reshape(-1)  # vec index of X -> vec index of X^T
        if np.abs(self.matrix[np.ix_(q, q)] - np.conj(self.matrix)).max() > tol:
            raise ValueError("generator is not Hermiticity-preserving")

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Action on an operator (or batch of operators with leading axes)."""
        x = np.asarray(x, dtype=complex)
        if x.shape[-2:] != (self.dim, self.dim):
            raise ValueError(f"operand shape {x.shape} incompatible with dim {self.dim}")
        return la.unvec(la.vec(x) @ self.matrix.T, self.dim)

    def __repr__(self) -> str:  # pragma: no cover
        kind = type(self.provenance).__name__ if self.provenance is not None else "raw"
        return f"Liouvillian(dim={self.dim}, provenance={kind})"


def _check_hermitian(a: np.ndarray, name: str, tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if la.herm_defect(a) > tol * scale:
        raise ValueError(f"{name} is not Hermitian within {tol}")
    return a


def _dissipator_matrix(coeffs: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of rho -> sum_ij K_ij (G_i rho G_j^dag - (1/2){G_j^dag G_i, rho}).

    ``left`` stacks the G_i, ``right`` stacks the G_j, ``coeffs`` is K.
    """
    n = left.shape[-1]
    eye = np.eye(n)
    # sum_ij K_ij conj(G_j) (x) G_i, assembled without explicit krons
    t = np.einsum("ij,jab,icd->acbd", coeffs, np.conj(right), left)
    mat = t.reshape(n * n, n * n)
    # anticommutator part uses A = sum_ij K_ij G_j^dag G_i
    a = np.einsum("ij,jza,izb->ab", coeffs, np.conj(right), left)
    mat -= 0.5 * (np.kron(eye, a) + np.kron(a.T, eye))
    return mat


def _hamiltonian_matrix(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def build_lindblad(hamiltonian, ops) -> Liouvillian:
    """Generator in jump-operator form.

    ``rho -> -i[H, rho] + sum_a (F_a rho F_a^dag - (1/2){F_a^dag F_a, rho})``.
    """
    h = _check_hermitian(hamiltonian, "hamiltonian")
    n = h.shape[0]
    ops = tuple(np.asarray(f, dtype=complex) for f in ops)
    for f in ops:
        if f.shape != (n, n):
            raise ValueError(f"jump operator shape {f.shape} incompatible with H shape {h.shape}")
    mat = _hamiltonian_matrix(h)
    if ops:
        stack = np.stack(ops)
        mat = mat + _dissipator_matrix(np.eye(len(ops)), stack, stack)
    return Liouvillian(mat, n, LindbladData(_frozen(h), tuple(map(_frozen, ops))))


def build_kossakowski(hamiltonian, basis, coefficients) -> Liouvillian:
    """Generator in basis/coefficient form, allowing an indefinite matrix.

    ``rho -> -i[H, rho] + sum_ij K_ij (G_i rho G_j^dag - (1/2){G_j^dag G_i, rho})``.
    With ``K = I`` this coincides with :func:`build_lindblad` on the same
    operators.  An indefinite K hosts generators with no completely
    positive representation.
    """
    h = _check_hermitian(hamiltonian, "hamiltonian")
    n = h.shape[0]
    basis = tuple(np.asarray(g, dtype=complex) for g in basis)
    for g in basis:
        if g.shape != (n, n):
            raise ValueError(f"basis operator shape {g.shape} incompatible with H shape {h.shape}")
    k = _check_hermitian(coefficients, "coefficient matrix")
    if k.shape != (len(basis), len(basis)):
        raise ValueError(f"coefficient matrix shape {k.shape} does not match basis size {len(basis)}")
    mat = _hamiltonian_matrix(h)
    if basis:
        stack = np.stack(basis)
        mat = mat + _dissipator_matrix(k, stack, stack)
    return Liouvillian(mat, n, KossakowskiData(_frozen(h), tuple(map(_frozen, basis)), _frozen(k)))


def choi_matrix(lv: Liouvillian) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) L(|i><j|) of the generator."""
    n = lv.dim
    c = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            # L(E_ij) is column i + n*j of the matrix, un-vectorized.
            block = la.unvec(lv.matrix[:, i + n * j], n)
            c[i * n : (i + 1) * n, j * n : (j + 1) * n] = block
    return c


def is_cp_generator(lv: Liouvillian, tol: float = 1e-10) -> bool:
    """Exact test for complete positivity of the generated semigroup.

    True iff the Choi matrix, compressed to the orthogonal complement of
    the maximally entangled vector, is positive semidefinite within
    ``tol``.
    """
    n = lv.dim
    c = choi_matrix(lv)
    omega = la.vec(np.eye(n)) / np.sqrt(n)
    proj = np.eye(n * n) - np.outer(omega, np.conj(omega))
    compressed = la.hermitize(proj @ c @ proj)
    lo = float(np.linalg.eigvalsh(compressed)[0])
    return lo >= -tol * max(1.0, float(np.abs(c).max()))


@dataclass(frozen=True)
class GeneratorClass:
    """Classification verdict for a generator.

    ``tag`` is one of ``"cp"``, ``"positive_not_cp"``, ``"not_positive"``
    or ``"undetermined"``.  ``witness`` is a pure state at which the
    transition rate operator has a negative eigenvalue (present only for
    ``"not_positive"``); ``min_eigenvalue`` is the least transverse rate
    eigenvalue found during sampling/refinement.  ``cp`` records the exact
    Choi verdict.
    """

    tag: str
    min_eigenvalue: float
    witness: np.ndarray | None
    cp: bool


def _min_transverse_eig(lv: Liouvillian, psi: np.ndarray) -> float:
    # Local import keeps the module import graph acyclic.
    from .rate_structures import min_transverse_rate

    return min_transverse_rate(lv, psi)


def _refine_witness(lv: Liouvillian, psi0: np.ndarray) -> tuple[np.ndarray, float]:
    """Locally minimize the least transverse rate eigenvalue from psi0."""
    from scipy.optimize import minimize

    n = lv.dim

    def objective(x: np.ndarray) -> float:
        z = x[:n] + 1j * x[n:]
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            return 0.0
        return _min_transverse_eig(lv, z / nz)

    x0 = np.concatenate([psi0.real, psi0.imag])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxiter": 600, "xatol": 1e-10, "fatol": 1e-14})
    z = res.x[:n] + 1j * res.x[n:]
    z /= np.linalg.norm(z)
    return z, float(res.fun)


def check_positivity(lv: Liouvillian, n_samples: int = 1000, refine: bool = False,
                     seed: int | None = None, tol: float = EIG_TOL) -> GeneratorClass:
    """Sample-based positivity probe combined with the exact CP test.

    Haar-random pure states are drawn and the least eigenvalue of the
    transition rate operator on the orthogonal complement of each state is
    computed.  Any eigenvalue below ``-tol`` proves the dynamics is not
    positive and the offending state is returned as a witness.  With
    ``refine=True`` the worst sample seeds a local minimization before the
    verdict.  No violation is evidence, not proof: with fewer than 100
    samples and a failed CP test the verdict stays ``"undetermined"``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    cp = is_cp_generator(lv)
    rng = np.random.default_rng(seed)
    states = la.haar_state(lv.dim, rng, size=n_samples)
    worst_val = np.inf
    worst_psi = states[0]
    for psi in states:
        val = _min_transverse_eig(lv, psi)
        if val < worst_val:
            worst_val = val
            worst_psi = psi
    if refine:
        refined_psi, refined_val = _refine_witness(lv, worst_psi)
        if refined_val < worst_val:
            worst_val, worst_psi = refined_val, refined_psi
    if worst_val < -tol:
        return GeneratorClass("not_positive", worst_val, worst_psi, cp)
    if cp:
        return GeneratorClass("cp", worst_val, None, cp)
    if n_samples >= 100:
        return GeneratorClass("positive_not_cp", worst_val, None, cp)
    return GeneratorClass("undetermined", worst_val, None, cp)


# ---------------------------------------------------------------------------
# Generator description files
# ---------------------------------------------------------------------------
#
# JSON schema (all matrices are row-major lists of [re, im] pairs):
#   {
#     "dim": N,
#     "hamiltonian": [[re, im], ... N*N pairs ...],
#     "lindblad_ops": [ <matrix>, ... ]            # jump-operator form
#   }
# or
#   {
#     "dim": N,
#     "hamiltonian": <matrix>,
#     "basis": [ <matrix>, ... ],                  # m operators
#     "kossakowski": <matrix of m*m pairs>
#   }


def matrix_to_pairs(a: np.ndarray) -> list[list[float]]:
    """Row-major [re, im] pair encoding used by description files."""
    flat = np.asarray(a, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def matrix_from_pairs(pairs, rows: int, cols: int) -> np.ndarray:
    flat = np.asarray(pairs, dtype=float)
    if flat.shape != (rows * cols, 2):
        raise ValueError(f"expected {rows * cols} [re, im] pairs, got shape {flat.shape}")
    return (flat[:, 0] + 1j * flat[:, 1]).reshape(rows, cols)


def load_generator(path) -> Liouvillian:
    """Read a generator description file (JSON, schema documented above)."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        n = int(data["dim"])
        h = matrix_from_pairs(data["hamiltonian"], n, n)
        if "lindblad_ops" in data:
            ops = [matrix_from_pairs(p, n, n) for p in data["lindblad_ops"]]
            return build_lindblad(h, ops)
        if "basis" in data:
            basis = [matrix_from_pairs(p, n, n) for p in data["basis"]]
            m = len(basis)
            k = matrix_from_pairs(data["kossakowski"], m, m)
            return build_kossakowski(h, basis, k)
    except KeyError as exc:
        raise ValueError(f"generator file {path} is missing key {exc}") from exc
    raise ValueError(f"generator file {path} must contain 'lindblad_ops' or 'basis'+'kossakowski'")


def save_generator(path, lv: Liouvillian) -> None:
    """Write a description file for a generator with known provenance."""
    if isinstance(lv.provenance, LindbladData):
        data = {
            "dim": lv.dim,
            "hamiltonian": matrix_to_pairs(lv.provenance.hamiltonian),
            "lindblad_ops": [matrix_to_pairs(f) for f in lv.provenance.ops],
        }
    elif isinstance(lv.provenance, KossakowskiData):
        data = {
            "dim": lv.dim,
            "hamiltonian": matrix_to_pairs(lv.provenance.hamiltonian),
            "basis": [matrix_to_pairs(g) for g in lv.provenance.basis],
            "kossakowski": matrix_to_pairs(lv.provenance.coefficients),
        }
    else:
        raise ValueError("raw generators carry no serializable description")
    Path(path).write_text(json.dumps(data, indent=1))
