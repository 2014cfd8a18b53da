"""Independent oracles used by the test suite.

Everything here is deliberately written without the package's vectorized
superoperator machinery: plain matrix formulas, explicit loops and grid
searches, so that agreement is a genuine cross-check rather than the same
code evaluated twice.
"""
import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
E0 = np.array([1, 0], dtype=complex)
E1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def direct_lindblad_action(h, ops, x):
    """Jump-operator master-equation right-hand side, straight formula."""
    out = -1j * (h @ x - x @ h)
    for f in ops:
        fd = f.conj().T
        out += f @ x @ fd - 0.5 * (fd @ f @ x + x @ fd @ f)
    return out


def direct_gks_action(h, basis, k, x):
    """Coefficient-matrix master-equation right-hand side, double loop."""
    out = -1j * (h @ x - x @ h)
    for i, gi in enumerate(basis):
        for j, gj in enumerate(basis):
            gjd = gj.conj().T
            out += k[i, j] * (gi @ x @ gjd - 0.5 * (gjd @ gi @ x + x @ gjd @ gi))
    return out


def bloch_state(r):
    """Pure qubit state with the given unit Bloch vector."""
    r = np.asarray(r, dtype=float)
    r = r / np.linalg.norm(r)
    theta = np.arccos(np.clip(r[2], -1.0, 1.0))
    phi = np.arctan2(r[1], r[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def bloch_vector(rho):
    return np.array([
        2.0 * rho[0, 1].real,
        -2.0 * rho[0, 1].imag,
        (rho[0, 0] - rho[1, 1]).real,
    ])


def min_transverse_rate_direct(apply_fn, psi):
    """Least transverse rate eigenvalue computed from first principles.

    Uses only the generator action: builds the local operator, restricts it
    to an explicitly constructed orthogonal complement (Gram-Schmidt on
    coordinate vectors) and diagonalizes.  Equivalent to restricting the
    rate operator, since the projector terms vanish on the complement.
    """
    n = psi.shape[0]
    loc = apply_fn(np.outer(psi, psi.conj()))
    cols = []
    for k in range(n):
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        v = v - np.vdot(psi, v) * psi
        for c in cols:
            v = v - np.vdot(c, v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
        if len(cols) == n - 1:
            break
    b = np.column_stack(cols)
    restricted = b.conj().T @ loc @ b
    restricted = 0.5 * (restricted + restricted.conj().T)
    return float(np.linalg.eigvalsh(restricted)[0])


def qubit_grid_min_rate(apply_fn, n_theta=48, n_phi=48):
    """Grid search over the Bloch sphere for the worst transverse rate."""
    worst = np.inf
    for theta in np.linspace(0.0, np.pi, n_theta):
        for phi in np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False):
            psi = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
            worst = min(worst, min_transverse_rate_direct(apply_fn, psi))
    return worst
