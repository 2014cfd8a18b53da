import numpy as np
import pytest

import qunravel._linalg as la
from qunravel import (
    build_S_from_s,
    compute_rate_structure,
    explicit_spec,
    qsd_spec,
    sample_increment,
    sample_increments,
    validate_noise_spec,
)
from qunravel import models
from qunravel.noise import factor_psd, real_embedding_covariance

from oracles import E0, E1

P0 = np.outer(E0, E0.conj())


def moment_check(samples, expected, exact_zero_tol=1e-12, n_sigma=5.0):
    """Entrywise comparison of an empirical second moment with its target.

    ``samples`` has shape (K, N, N): per-draw products.  Real and imaginary
    parts are tested separately against ``n_sigma`` empirical standard
    errors; entries with (numerically) zero variance must match exactly.
    """
    k = samples.shape[0]
    for part in (np.real, np.imag):
        vals = part(samples)
        mean = vals.mean(axis=0)
        se = vals.std(axis=0) / np.sqrt(k)
        target = part(expected)
        for idx in np.ndindex(mean.shape):
            if se[idx] < exact_zero_tol:
                assert abs(mean[idx] - target[idx]) < 1e-10
            else:
                assert abs(mean[idx] - target[idx]) <= n_sigma * se[idx]


def products(dchi):
    herm = np.einsum("ki,kj->kij", dchi, dchi.conj())
    sym = np.einsum("ki,kj->kij", dchi, dchi)
    return herm, sym


class TestValidateNoiseSpec:
    def test_zero_s_always_valid(self):
        w = np.diag([1.0, 0.5, 0.0]).astype(complex)
        assert validate_noise_spec(w, np.zeros((3, 3)))

    def test_s_equal_to_real_w_valid(self):
        w = np.diag([1.0, 0.5]).astype(complex)
        assert validate_noise_spec(w, w.real.astype(complex))

    def test_oversized_s_invalid(self):
        assert not validate_noise_spec(P0.astype(complex), 2.0 * P0)

    def test_asymmetric_s_rejected(self):
        w = np.eye(2, dtype=complex)
        with pytest.raises(ValueError, match="symmetric"):
            validate_noise_spec(w, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_spec_symmetry_enforced(self):
        with pytest.raises(ValueError, match="symmetric"):
            explicit_spec(np.array([[0, 1], [0, 0]]))


class TestBuildSFromS:
    def test_zero_s_gives_qsd(self):
        phi = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)[:1]
        spec = build_S_from_s(phi, np.zeros((1, 1)))
        assert np.abs(spec.S).max() == 0.0
        assert spec.origin == "from_s"

    def test_identity_s_real_frame(self):
        phi = np.array([[1.0, 0.0, 0.0], [0.0, np.sqrt(0.5), 0.0]], dtype=complex)
        spec = build_S_from_s(phi, np.eye(2))
        expected = sum(np.outer(p, p) for p in phi)
        np.testing.assert_allclose(spec.S, expected, atol=1e-14)
        w = sum(np.outer(p, p.conj()) for p in phi)
        assert validate_noise_spec(w, spec.S)

    def test_conjugation_convention(self):
        phi = np.array([[1j, 0.0]], dtype=complex)
        s = np.array([[0.5j]])
        spec = build_S_from_s(phi, s)
        # S = conj(s) phi phi^T = (-0.5j) * (1j)^2 |0><0|^T = 0.5j |0)(0|
        np.testing.assert_allclose(spec.S, np.array([[0.5j, 0], [0, 0]]), atol=1e-14)

    def test_overnormed_s_rejected(self):
        phi = np.eye(2, dtype=complex)
        with pytest.raises(ValueError, match="spectral norm"):
            build_S_from_s(phi, 1.5 * np.eye(2))

    def test_asymmetric_s_rejected(self):
        phi = np.eye(2, dtype=complex)
        with pytest.raises(ValueError, match="symmetric"):
            build_S_from_s(phi, np.array([[0.0, 0.3], [-0.3, 0.0]]))

    def test_non_orthogonal_frame_rejected(self):
        phi = np.array([[1.0, 0.0], [1.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError, match="orthogonal"):
            build_S_from_s(phi, np.zeros((2, 2)))


class TestRealEmbedding:
    def test_covariance_blocks(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        w = z @ z.conj().T
        s = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        s = s + s.T
        dt = 0.25
        sig = real_embedding_covariance(w, s, dt)
        np.testing.assert_allclose(sig[:3, :3], 0.5 * (w.real + s.real) * dt, atol=1e-14)
        np.testing.assert_allclose(sig[3:, 3:], 0.5 * (w.real - s.real) * dt, atol=1e-14)
        np.testing.assert_allclose(sig[:3, 3:], 0.5 * (s.imag - w.imag) * dt, atol=1e-14)
        np.testing.assert_allclose(sig, sig.T, atol=1e-14)

    def test_factor_reproduces_matrix(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((4, 4))
        sig = a @ a.T
        b = factor_psd(sig)
        np.testing.assert_allclose(b @ b.T, sig, atol=1e-12)

    def test_factor_rejects_indefinite(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            factor_psd(np.diag([1.0, -1e-6]))

    def test_factor_floors_rounding(self):
        b = factor_psd(np.diag([1.0, -1e-12]))
        np.testing.assert_allclose(b @ b.T, np.diag([1.0, 0.0]), atol=1e-11)


class TestSampling:
    def test_zero_rate_gives_zero(self):
        rng = np.random.default_rng(2)
        w = np.zeros((2, 2), dtype=complex)
        inc = sample_increment(w, qsd_spec(2), E0, 0.1, rng)
        assert np.abs(inc.dchi).max() == 0.0

    def test_qsd_moments(self):
        rng = np.random.default_rng(3)
        w = P0.astype(complex)
        dchi = sample_increments(w, qsd_spec(2), E1, 1.0, rng, 100_000)
        herm, sym = products(dchi)
        moment_check(herm, w)
        moment_check(sym, np.zeros((2, 2)))

    def test_real_s_kills_imaginary_part(self):
        rng = np.random.default_rng(4)
        w = P0.astype(complex)
        dchi = sample_increments(w, explicit_spec(P0), E1, 1.0, rng, 20_000)
        assert np.abs(dchi.imag).max() < 1e-12
        herm, sym = products(dchi)
        moment_check(herm, w)
        moment_check(sym, P0)

    def test_complex_case_moments(self):
        # complex-valued W and S from a genuine rate structure
        lv = models.random_lindblad(3, 2, 12)
        rng = np.random.default_rng(5)
        psi = la.haar_state(3, rng)
        rs = compute_rate_structure(lv, psi)
        vals, vecs = np.linalg.eigh(rs.W)
        phi = (vecs[:, 1:] * np.sqrt(np.clip(vals[1:], 0, None))).T
        s = np.array([[0.3, 0.4j], [0.4j, -0.2]])
        spec = build_S_from_s(phi, s)
        assert validate_noise_spec(rs.W, spec.S)
        dt = 0.5
        dchi = sample_increments(rs.W, spec, psi, dt, rng, 100_000)
        herm, sym = products(dchi)
        moment_check(herm, rs.W * dt)
        moment_check(sym, spec.S * dt)
        assert np.abs(dchi @ psi.conj()).max() <= 1e-10

    def test_null_direction(self):
        lv = models.pauli(1.0, 1.0, -0.4)
        rng = np.random.default_rng(6)
        for _ in range(5):
            psi = la.haar_state(2, rng)
            rs = compute_rate_structure(lv, psi)
            dchi = sample_increments(rs.W, qsd_spec(2), psi, 1e-3, rng, 1000)
            assert np.abs(dchi @ psi.conj()).max() <= 1e-10

    def test_invalid_s_raises_at_sampling(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError, match="covariance"):
            sample_increments(P0.astype(complex), explicit_spec(2.0 * P0), E1, 1.0, rng, 10)

    def test_rejects_nonpositive_dt(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ValueError, match="dt"):
            sample_increment(P0.astype(complex), qsd_spec(2), E1, 0.0, rng)

    def test_frame_sampling_equivalence(self):
        # sampling through the S matrix and sampling frame noises directly
        # (correlated standard noises, then rotating into the frame) agree
        lv = models.random_lindblad(3, 2, 30)
        rng = np.random.default_rng(9)
        psi = la.haar_state(3, rng)
        rs = compute_rate_structure(lv, psi)
        vals, vecs = np.linalg.eigh(rs.W)
        phi = (vecs[:, 1:] * np.sqrt(np.clip(vals[1:], 0, None))).T
        s = np.array([[0.6, 0.2], [0.2, -0.5]])
        spec = build_S_from_s(phi, s)
        dt = 0.2
        n = 100_000
        dchi_a = sample_increments(rs.W, spec, psi, dt, rng, n)

        # independent route: zeta with E[zz*] = I, E[zz] = s via its own
        # real embedding, then dchi = sum_a phi_a conj(zeta_a) sqrt(dt)
        m = phi.shape[0]
        sig = real_embedding_covariance(np.eye(m, dtype=complex), s, 1.0)
        b = factor_psd(sig)
        xy = rng.standard_normal((n, 2 * m)) @ b.T
        zeta = xy[:, :m] + 1j * xy[:, m:]
        dchi_b = np.sqrt(dt) * (np.conj(zeta) @ phi)

        ha, sa = products(dchi_a)
        hb, sb = products(dchi_b)
        for pa, pb in ((ha, hb), (sa, sb)):
            diff = pa.mean(axis=0) - pb.mean(axis=0)
            se = (pa.std(axis=0) + pb.std(axis=0)) / np.sqrt(n) + 1e-12
            assert (np.abs(diff.real) <= 6 * se).all()
            assert (np.abs(diff.imag) <= 6 * se).all()
