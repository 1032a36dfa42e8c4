"""State, operator, and observable construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import catgrin as cg
from catgrin.hilbert import pi_l, pi_r, sigma_r

Z = cg.BlochAxis.z()
I2 = np.eye(2)


def unitary_from_first_column(col):
    """2x2 unitary [[a, -conj(b)], [b, conj(a)]] with given unit first column."""
    a, b = col
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


class TestPureState:
    def test_symmetric_splitter_no_rotation(self):
        s = cg.make_preparation(1 / math.sqrt(2), 1 / math.sqrt(2), I2, I2)
        np.testing.assert_allclose(
            s.amplitudes, np.array([1, 0, 1, 0]) / math.sqrt(2), atol=1e-15
        )

    def test_fully_reflecting_splitter(self):
        s = cg.make_preparation(1.0, 0.0, I2, I2)
        np.testing.assert_allclose(s.amplitudes, [1, 0, 0, 0], atol=1e-15)

    def test_splitter_reaches_anomalous_fixture_state(self):
        # Target amplitudes (2, 2, 3, -2); solve the splitter parameters and
        # check by direct matrix multiplication against the raw construction.
        target = np.array([2, 2, 3, -2], dtype=complex)
        left, right = target[:2], target[2:]
        r1 = np.linalg.norm(left) / np.linalg.norm(target)
        t1 = np.linalg.norm(right) / np.linalg.norm(target)
        v1 = unitary_from_first_column(left / np.linalg.norm(left))
        v2 = unitary_from_first_column(right / np.linalg.norm(right))
        direct = np.concatenate([v1 @ [r1, 0], v2 @ [t1, 0]])
        s = cg.make_preparation(r1, t1, v1, v2)
        np.testing.assert_allclose(s.amplitudes, direct, atol=1e-14)
        np.testing.assert_allclose(
            s.amplitudes, target / np.linalg.norm(target), atol=1e-14
        )

    def test_postselection_trivial_cases(self):
        s = cg.make_postselection(1.0, 0.0, I2, I2)
        np.testing.assert_allclose(s.amplitudes, [1, 0, 0, 0], atol=1e-15)
        s = cg.make_postselection(1 / math.sqrt(2), 1 / math.sqrt(2), I2, I2)
        np.testing.assert_allclose(
            s.amplitudes, np.array([1, 0, 1, 0]) / math.sqrt(2), atol=1e-15
        )

    def test_postselection_reaches_uniform_state(self):
        # V3, V4 built so that V3^dag r2* |H> = (1, 1)/2 per arm.
        h = 1 / math.sqrt(2)
        v3 = unitary_from_first_column([h, h]).conj().T
        s = cg.make_postselection(h, h, v3, v3)
        np.testing.assert_allclose(s.amplitudes, [0.5, 0.5, 0.5, 0.5], atol=1e-14)

    def test_zero_vector_rejected(self):
        with pytest.raises(cg.ValidationError):
            cg.PureState([0, 0, 0, 0])

    def test_degenerate_splitter_rejected(self):
        with pytest.raises(cg.ValidationError):
            cg.make_preparation(0.5, 0.5, I2, I2)  # |r|^2 + |t|^2 != 1

    def test_non_unitary_rotation_rejected(self):
        with pytest.raises(cg.ValidationError):
            cg.make_preparation(1.0, 0.0, 2 * I2, I2)

    @settings(max_examples=30, deadline=None)
    @given(
        angle=st.floats(0, 2 * math.pi),
        rphase=st.floats(0, 2 * math.pi),
        tphase=st.floats(0, 2 * math.pi),
    )
    def test_preparation_always_unit_norm(self, angle, rphase, tphase):
        r1 = math.cos(angle) * np.exp(1j * rphase)
        t1 = math.sin(angle) * np.exp(1j * tphase)
        v = unitary_from_first_column([0.6, 0.8j])
        if abs(abs(r1) ** 2 + abs(t1) ** 2 - 1) > 1e-12 or (
            abs(r1) < 1e-9 and abs(t1) < 1e-9
        ):
            return
        s = cg.make_preparation(r1, t1, v, I2)
        assert abs(np.sum(np.abs(s.amplitudes) ** 2) - 1.0) < 1e-12


class TestObservables:
    def test_sigma_r_along_z(self):
        np.testing.assert_array_equal(
            sigma_r(Z).entries, np.diag([0, 0, 1, -1]).astype(complex)
        )

    @pytest.mark.parametrize("theta,phi", [(0, 0), (1.1, 0.3), (math.pi / 2, 2.0)])
    def test_sigma_r_squares_to_right_projector(self, theta, phi):
        s = sigma_r(cg.BlochAxis.from_angles(theta, phi)).entries
        np.testing.assert_allclose(s @ s, pi_r().entries, atol=1e-12)
        np.testing.assert_allclose(s, s.conj().T, atol=1e-15)
        assert abs(np.trace(s)) < 1e-15

    def test_left_projector_annihilates_sigma_r(self):
        prod = pi_l().entries @ sigma_r(Z).entries
        np.testing.assert_array_equal(prod, np.zeros((4, 4)))

    def test_projectors_complete(self):
        np.testing.assert_array_equal(pi_l().entries + pi_r().entries, np.eye(4))

    def test_axis_rotation_diagonalizes_pauli(self, rng):
        v = rng.standard_normal(3)
        axis = cg.BlochAxis(v / np.linalg.norm(v))
        nx, ny, nz = axis.n
        pauli = np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])
        rot = axis.polarization_rotation()
        np.testing.assert_allclose(
            rot.conj().T @ pauli @ rot, np.diag([1, -1]), atol=1e-12
        )

    def test_bad_axis_rejected(self):
        with pytest.raises(cg.ValidationError):
            cg.BlochAxis(np.array([1.0, 1.0, 0.0]))


class TestComplement:
    def test_pure_postselection_complement_trace(self, rng):
        from conftest import rand_pure

        e = rand_pure(rng).density()
        comp = cg.complement(e)
        assert abs(comp.trace() - 3.0) < 1e-12
        assert cg.validate(comp, "povm").ok

    def test_identity_complement_is_zero(self):
        comp = cg.complement(cg.identity_op())
        np.testing.assert_array_equal(comp.entries, np.zeros((4, 4)))
        assert not cg.validate(comp, "povm").ok  # zero trace: unusable

    def test_involution(self, rng):
        from conftest import rand_povm

        e = rand_povm(rng)
        back = cg.complement(cg.complement(e))
        np.testing.assert_allclose(back.entries, e.entries, atol=1e-15)

    def test_invalid_input_rejected(self):
        bad = cg.SystemOperator(np.diag([1.2, 0, 0, 0]).astype(complex))
        with pytest.raises(cg.ValidationError):
            cg.complement(bad)


class TestValidate:
    def test_maximally_mixed_passes_density(self):
        rep = cg.validate(cg.SystemOperator(np.eye(4) / 4), "density")
        assert rep.ok

    def test_negative_eigenvalue_fails(self):
        rep = cg.validate(
            cg.SystemOperator(np.diag([1.01, 0.0, 0.0, -0.01])), "density"
        )
        assert not rep.ok
        assert rep.residuals["min_eigenvalue"] > 0

    def test_povm_eigenvalue_above_one_fails(self):
        rep = cg.validate(cg.SystemOperator(np.diag([1.2, 0.5, 0.1, 0.0])), "povm")
        assert not rep.ok
        assert rep.residuals["max_eigenvalue_excess"] > 0.1

    def test_povm_identity_passes(self):
        assert cg.validate(cg.identity_op(), "povm").ok
