import json

import numpy as np
import pytest

import qunravel._linalg as la
from qunravel import (
    Liouvillian,
    build_kossakowski,
    build_lindblad,
    check_positivity,
    is_cp_generator,
    load_generator,
    min_transverse_rate,
    save_generator,
)
from qunravel import models

from oracles import (
    E0,
    E1,
    MINUS,
    PLUS,
    SX,
    SY,
    SZ,
    direct_gks_action,
    direct_lindblad_action,
    qubit_grid_min_rate,
)

H0 = np.zeros((2, 2))


def random_generator(seed):
    """Mixed stream of jump-operator and indefinite-coefficient generators."""
    dims = [2, 3, 4, 5]
    dim = dims[seed % 4]
    if seed % 2 == 0:
        return models.random_lindblad(dim, 1 + seed % 3, seed)
    return models.random_gks(dim, seed, neg_weight=0.2 + 0.1 * (seed % 4))


class TestBuildLindblad:
    def test_amplitude_damping_action(self):
        lv = models.amplitude_damping(1.0)
        got = lv.apply(np.outer(E1, E1.conj()))
        expected = np.diag([1.0, -1.0]).astype(complex)
        np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_unitary_only(self):
        rng = np.random.default_rng(3)
        h = la.random_hermitian(3, rng)
        lv = build_lindblad(h, [])
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        np.testing.assert_allclose(lv.apply(x), -1j * (h @ x - x @ h), atol=1e-13)
        assert abs(np.trace(lv.apply(x))) < 1e-12

    def test_unitary_commuting_state(self):
        rng = np.random.default_rng(4)
        h = la.random_hermitian(3, rng)
        lv = build_lindblad(h, [])
        vals, vecs = np.linalg.eigh(h)
        rho = vecs @ np.diag([0.5, 0.3, 0.2]) @ vecs.conj().T
        assert np.abs(lv.apply(rho)).max() < 1e-12

    def test_dephasing_plus_state(self):
        lv = models.dephasing(1.0)
        got = lv.apply(np.outer(PLUS, PLUS.conj()))
        expected = np.outer(MINUS, MINUS.conj()) - np.outer(PLUS, PLUS.conj())
        np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(11)
        for dim in (2, 3, 5):
            h = la.random_hermitian(dim, rng)
            ops = [rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                   for _ in range(2)]
            lv = build_lindblad(h, ops)
            x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            np.testing.assert_allclose(
                lv.apply(x), direct_lindblad_action(h, ops, x), atol=1e-12
            )

    def test_rejects_non_hermitian_h(self):
        with pytest.raises(ValueError, match="Hermitian"):
            build_lindblad(np.array([[0, 1], [0, 0]], dtype=complex), [])

    def test_rejects_mismatched_ops(self):
        with pytest.raises(ValueError, match="incompatible"):
            build_lindblad(H0, [np.eye(3)])


class TestBuildKossakowski:
    def test_identity_coefficients_equal_lindblad(self):
        rng = np.random.default_rng(5)
        h = la.random_hermitian(2, rng)
        ops = [SX, SY]
        a = build_lindblad(h, ops)
        b = build_kossakowski(h, ops, np.eye(2))
        np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-12)

    def test_single_channel_matches_lindblad(self):
        gamma = 0.7
        a = build_lindblad(H0, [np.sqrt(gamma) * SX])
        b = build_kossakowski(H0, [SX, SY, SZ], np.diag([gamma, 0.0, 0.0]))
        np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-12)

    def test_zero_coefficients_unitary(self):
        rng = np.random.default_rng(6)
        h = la.random_hermitian(2, rng)
        lv = build_kossakowski(h, [SX, SY, SZ], np.zeros((3, 3)))
        x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        np.testing.assert_allclose(lv.apply(x), -1j * (h @ x - x @ h), atol=1e-13)

    def test_indefinite_coefficients_against_direct_formula(self):
        rng = np.random.default_rng(7)
        k = np.diag([1.0, 1.0, -0.4])
        lv = build_kossakowski(H0, [SX, SY, SZ], k)
        x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        np.testing.assert_allclose(
            lv.apply(x), direct_gks_action(H0, [SX, SY, SZ], k, x), atol=1e-12
        )

    def test_rejects_non_hermitian_coefficients(self):
        with pytest.raises(ValueError, match="Hermitian"):
            build_kossakowski(H0, [SX, SY], np.array([[1, 1j], [1j, 1]]))

    def test_rejects_wrong_coefficient_size(self):
        with pytest.raises(ValueError, match="does not match"):
            build_kossakowski(H0, [SX, SY], np.eye(3))


class TestStructuralInvariants:
    @pytest.mark.parametrize("seed", range(8))
    def test_trace_and_hermiticity_preserving(self, seed):
        lv = random_generator(seed)
        n = lv.dim
        for i in range(n):
            for j in range(n):
                e = np.zeros((n, n), dtype=complex)
                e[i, j] = 1.0
                out = lv.apply(e)
                assert abs(np.trace(out)) < 1e-10 * max(1, np.abs(lv.matrix).max())
                np.testing.assert_allclose(lv.apply(e.conj().T), out.conj().T, atol=1e-10)

    def test_apply_linearity(self):
        rng = np.random.default_rng(8)
        lv = random_generator(3)
        n = lv.dim
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a, b = 0.3 - 0.2j, 1.7 + 0.4j
        np.testing.assert_allclose(
            lv.apply(a * x + b * y), a * lv.apply(x) + b * lv.apply(y), atol=1e-12
        )

    def test_apply_zero(self):
        lv = models.amplitude_damping(1.0)
        assert np.abs(lv.apply(np.zeros((2, 2)))).max() == 0.0

    def test_apply_dimension_mismatch(self):
        lv = models.amplitude_damping(1.0)
        with pytest.raises(ValueError, match="incompatible"):
            lv.apply(np.eye(3))

    def test_raw_matrix_validation(self):
        bad = np.eye(4)  # maps identity to identity: not trace-annihilating
        with pytest.raises(ValueError, match="trace"):
            Liouvillian(bad, 2)

    def test_dimension_limit(self):
        with pytest.raises(ValueError, match="supported range"):
            Liouvillian(np.zeros((17**2, 17**2)), 17)

    def test_matrix_is_frozen(self):
        lv = models.amplitude_damping(1.0)
        with pytest.raises(ValueError):
            lv.matrix[0, 0] = 1.0


class TestCpTest:
    def test_amplitude_damping_is_cp(self):
        assert is_cp_generator(models.amplitude_damping(1.0))

    def test_unitary_only_is_cp(self):
        rng = np.random.default_rng(9)
        assert is_cp_generator(build_lindblad(la.random_hermitian(3, rng), []))

    def test_indefinite_pauli_is_not_cp(self):
        assert not is_cp_generator(models.pauli(1.0, 1.0, -0.4))

    @pytest.mark.parametrize("seed", range(10))
    def test_every_lindblad_is_cp(self, seed):
        assert is_cp_generator(models.random_lindblad(2 + seed % 4, 1 + seed % 3, seed))


class TestCheckPositivity:
    def test_amplitude_damping_cp(self):
        verdict = check_positivity(models.amplitude_damping(1.0), 400, seed=0)
        assert verdict.tag == "cp"
        assert verdict.witness is None
        assert verdict.min_eigenvalue > -1e-10

    def test_pauli_positive_not_cp_agrees_with_grid(self):
        lv = models.pauli(1.0, 1.0, -0.4)
        verdict = check_positivity(lv, 600, seed=1)
        assert verdict.tag == "positive_not_cp"
        assert not verdict.cp
        assert qubit_grid_min_rate(lv.apply) > -1e-9

    def test_pauli_not_positive_with_witness(self):
        lv = models.pauli(1.0, 1.0, -1.2)
        verdict = check_positivity(lv, 600, refine=True, seed=2)
        assert verdict.tag == "not_positive"
        assert verdict.witness is not None
        assert min_transverse_rate(lv, verdict.witness) < -1e-8
        # grid oracle agrees this family crosses the boundary
        assert qubit_grid_min_rate(lv.apply) < -0.1
        # refinement reaches the analytic minimum -0.2
        assert verdict.min_eigenvalue == pytest.approx(-0.2, abs=1e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_lindblad_never_not_positive(self, seed):
        lv = models.random_lindblad(3, 2, seed)
        verdict = check_positivity(lv, 200, seed=seed)
        assert verdict.tag == "cp"

    def test_small_sample_undetermined(self):
        verdict = check_positivity(models.pauli(1.0, 1.0, -0.4), 5, seed=3)
        assert verdict.tag == "undetermined"

    def test_invalid_sample_count(self):
        with pytest.raises(ValueError):
            check_positivity(models.amplitude_damping(1.0), 0)


class TestDescriptionFiles:
    def test_lindblad_roundtrip(self, tmp_path):
        lv = models.amplitude_damping(0.8)
        path = tmp_path / "gen.json"
        save_generator(path, lv)
        loaded = load_generator(path)
        np.testing.assert_allclose(loaded.matrix, lv.matrix, atol=1e-12)

    def test_kossakowski_roundtrip(self, tmp_path):
        lv = models.pauli(1.0, 0.5, -0.3)
        path = tmp_path / "gen.json"
        save_generator(path, lv)
        loaded = load_generator(path)
        np.testing.assert_allclose(loaded.matrix, lv.matrix, atol=1e-12)

    def test_missing_sections_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"dim": 2, "hamiltonian": [[0, 0]] * 4}))
        with pytest.raises(ValueError, match="lindblad_ops"):
            load_generator(path)

    def test_raw_not_serializable(self, tmp_path):
        lv = Liouvillian(np.zeros((4, 4)), 2)
        with pytest.raises(ValueError, match="raw"):
            save_generator(tmp_path / "raw.json", lv)
