"""Grid oracle: construction contracts, Born-rule conservation, engine checks."""

import numpy as np
import pytest

import catgrin as cg
from conftest import (
    orthogonal_pure_pair,
    rand_density,
    rand_experiment,
    rand_pure_pair,
)

Z = cg.BlochAxis.z()


def gridded_pair(exp, spacing=1 / 16):
    return (
        cg.GriddedMeter.from_gaussian(exp.meter_x, spacing=spacing),
        cg.GriddedMeter.from_gaussian(exp.meter_y, spacing=spacing),
    )


def engine_joint_on_grid(exp, gj):
    p = cg.postselection_probability(exp)
    return p * cg.joint_density(exp, gj.nodes_x[:, None], gj.nodes_y[None, :])


class TestGriddedMeter:
    def test_gaussian_construction(self):
        gm = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(1.0, 2.0))
        assert gm.spacing == pytest.approx(1 / 16)
        assert gm.nodes[0] == -gm.nodes[-1]
        diag = gm.kernel.diagonal().real
        assert float(np.sum(diag)) * gm.spacing == pytest.approx(1.0, abs=1e-12)

    def test_positive_semidefinite(self):
        gm = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(1.5, 2.5), spacing=1 / 4)
        assert gm.min_eigenvalue() >= -1e-8

    def test_incommensurate_spacing_rejected(self):
        with pytest.raises(cg.ValidationError):
            cg.GriddedMeter.from_gaussian(cg.GaussianMeter(1, 1), spacing=0.3)

    def test_bad_trace_rejected(self):
        nodes = np.linspace(-4, 4, 129)
        with pytest.raises(cg.ValidationError):
            cg.GriddedMeter(nodes=nodes, kernel=np.eye(129))

    def test_insufficient_coverage_rejected(self):
        # Narrow grid: unit-shifted support of the meter falls off the edge.
        m = cg.GaussianMeter(1.0, 1.0)
        nodes = np.arange(-32, 33) * (1 / 16.0)
        kernel = cg.meter_density(m, nodes[:, None], nodes[None, :])
        kernel = kernel / (np.sum(kernel.diagonal()) * (1 / 16.0))
        gm = cg.GriddedMeter(nodes=nodes, kernel=kernel)
        rho = cg.PureState([1, 0, 0, 0]).density()
        with pytest.raises(cg.ValidationError, match="cover"):
            cg.brute_force_joint(rho, cg.identity_op(), Z, gm, gm)


class TestBruteForce:
    def test_matches_engine_random(self, rng):
        for _ in range(3):
            exp = rand_experiment(rng, eps_range=(0.5, 2.0))
            gx, gy = gridded_pair(exp)
            gj = cg.brute_force_joint(exp.rho_i, exp.e_f, Z, gx, gy)
            residual = np.max(np.abs(engine_joint_on_grid(exp, gj) - gj.selected))
            assert residual <= 1e-6

    def test_conservation(self, rng):
        for _ in range(20):
            exp = rand_experiment(rng, eps_range=(0.5, 2.5))
            gx, gy = gridded_pair(exp)
            gj = cg.brute_force_joint(exp.rho_i, exp.e_f, Z, gx, gy)
            assert gj.mass("selected") + gj.mass("complement") == pytest.approx(
                1.0, abs=1e-6
            )
            assert gj.mass("selected") == pytest.approx(
                cg.postselection_probability(exp), abs=1e-8
            )

    def test_identity_postselection_branch_masses(self, rng):
        rho = rand_density(rng)
        m = cg.GaussianMeter(1.0, 1.5)
        gm = cg.GriddedMeter.from_gaussian(m)
        gj = cg.brute_force_joint(rho, cg.identity_op(), Z, gm, gm)
        assert gj.mass("selected") == pytest.approx(1.0, abs=1e-8)
        assert gj.mass("complement") == pytest.approx(0.0, abs=1e-12)

    def test_strong_grin_kills_interference(self, rng):
        # An incoherent y kernel (coherence length << spacing) must reproduce
        # the factorized no-interference law: the joint is then a product of
        # the x-marginal mixture and the y shifted-peak mixture.
        psi, phi = rand_pure_pair(rng)
        exp = cg.Experiment(
            rho_i=psi.density(),
            e_f=phi.density(),
            axis=Z,
            meter_x=cg.GaussianMeter(1.0, 1.0),
            meter_y=cg.GaussianMeter(1.0, 400.0),
        )
        gx, gy = gridded_pair(exp)
        assert np.max(np.abs(gy.kernel - np.diag(gy.kernel.diagonal()))) < 1e-30
        gj = cg.brute_force_joint(exp.rho_i, exp.e_f, Z, gx, gy)
        wv = exp.weak_values
        t = exp.family.trace
        ex = ey = 1.0
        xs, ys = gj.nodes_x[:, None], gj.nodes_y[None, :]
        gauss = lambda u, mu, e: (e / np.sqrt(2 * np.pi)) * np.exp(
            -0.5 * e ** 2 * (u - mu) ** 2
        )
        want = t * (
            wv.L_2w * gauss(xs, 1, ex) * gauss(ys, 0, ey)
            + (wv.R_2w + wv.Sigma_2w + 2 * wv.N_w.real) / 4 * gauss(xs, 0, ex) * gauss(ys, 1, ey)
            + (wv.R_2w + wv.Sigma_2w - 2 * wv.N_w.real) / 4 * gauss(xs, 0, ex) * gauss(ys, -1, ey)
        )
        np.testing.assert_allclose(gj.selected, want, atol=1e-10)

    def test_moments_match_engine(self, rng):
        exp = rand_experiment(rng, eps_range=(0.8, 1.2))
        gx, gy = gridded_pair(exp)
        gj = cg.brute_force_joint(exp.rho_i, exp.e_f, Z, gx, gy)
        om = cg.oracle_moments(gj)
        m = cg.moments(exp)
        assert om.mean_x == pytest.approx(m.mean_x, abs=1e-6)
        assert om.mean_y == pytest.approx(m.mean_y, abs=1e-6)
        assert om.cross_xy == pytest.approx(m.cross_xy, abs=1e-6)
        assert om.cross_xy2 == pytest.approx(m.cross_xy2, abs=1e-6)
        assert om.p_postselect == pytest.approx(m.p_postselect, abs=1e-8)

    def test_moments_anomalous_asymptotics(self):
        rho = cg.PureState([2, 2, 3, -2]).density()
        ef = cg.PureState([1, 1, 1, 1]).density()
        # A spread-0.05 peak needs a finer grid than 1/16 to carry unit
        # trace; the broad weak meter tolerates a coarser one.
        mx = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(20, 20), spacing=1 / 32)
        my = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(0.05, 0.05), spacing=1 / 8)
        gj = cg.brute_force_joint(rho, ef, Z, mx, my)
        om = cg.oracle_moments(gj)
        assert om.mean_x == pytest.approx(16 / 17, abs=1e-2)
        assert om.mean_y == pytest.approx(5 / 17, abs=1e-2)

    def test_single_gaussian_case(self):
        rho = cg.PureState([1, 0, 0, 0]).density()
        m = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(1, 1))
        gj = cg.brute_force_joint(rho, cg.identity_op(), Z, m, m)
        om = cg.oracle_moments(gj)
        assert om.mean_x == pytest.approx(1.0, abs=1e-10)
        assert om.mean_y == pytest.approx(0.0, abs=1e-12)
        assert om.cross_xy == pytest.approx(0.0, abs=1e-12)


class TestShiftEvolutionCheck:
    def test_reproduces_six_term_structure(self, rng):
        # The literal unitary evolution (conditional index shifts on a pure
        # wavefunction grid) must match the six-term expansion; this pins
        # every coefficient and conjugation independently.
        for _ in range(3):
            psi, phi = rand_pure_pair(rng)
            mx, my = cg.GaussianMeter(1.1, 1.1), cg.GaussianMeter(0.8, 0.8)
            sj = cg.unitary_shift_joint(psi, phi, mx, my)
            gj = cg.brute_force_joint(
                psi.density(),
                phi.density(),
                Z,
                cg.GriddedMeter.from_gaussian(mx),
                cg.GriddedMeter.from_gaussian(my),
            )
            np.testing.assert_allclose(sj.selected, gj.selected, atol=1e-12)
            np.testing.assert_allclose(sj.complement, gj.complement, atol=1e-12)

    def test_requires_pure_meters(self, rng):
        psi, phi = rand_pure_pair(rng)
        with pytest.raises(cg.ValidationError):
            cg.unitary_shift_joint(psi, phi, cg.GaussianMeter(1, 2), cg.GaussianMeter(1, 1))


class TestOrthogonalSignAdjudication:
    def test_density_nonnegative_and_matches_engine(self, rng):
        # At an exactly orthogonal pure pair the one-unit-shifted y terms
        # carry weight +|l_w -+ sigma_w|^2/4; the oracle (and positivity)
        # confirm the positive sign.
        psi, phi = orthogonal_pure_pair(rng)
        exp = cg.Experiment(
            rho_i=psi.density(),
            e_f=phi.density(),
            axis=Z,
            meter_x=cg.GaussianMeter(1.0, 1.2),
            meter_y=cg.GaussianMeter(0.9, 1.1),
        )
        gx, gy = gridded_pair(exp)
        gj = cg.brute_force_joint(exp.rho_i, exp.e_f, Z, gx, gy)
        assert float(np.min(gj.selected)) >= -1e-12
        residual = np.max(np.abs(engine_joint_on_grid(exp, gj) - gj.selected))
        assert residual <= 1e-10
        # The y-shifted components alone carry mass |l -+ sigma|^2/4 each:
        # flipping their sign would make the branch mass negative.
        me = cg.matrix_elements(psi, phi, Z)
        wv_mass = (
            abs(me.l_w) ** 2
            + 0.25 * abs(me.l_w - me.sigma_w) ** 2
            + 0.25 * abs(me.l_w + me.sigma_w) ** 2
        )
        w = exp.w_x * exp.w_y
        expected = wv_mass - 2 * w * abs(me.l_w) ** 2 + (
            exp.w_y ** 4 / 2
        ) * (abs(me.l_w) ** 2 - abs(me.sigma_w) ** 2)
        assert gj.mass("selected") == pytest.approx(expected, abs=1e-10)


class TestCsvExport:
    def test_grid_csv(self, tmp_path):
        rho = cg.PureState([1, 0, 0, 0]).density()
        m = cg.GriddedMeter.from_gaussian(cg.GaussianMeter(2, 2), spacing=1 / 4)
        gj = cg.brute_force_joint(rho, cg.identity_op(), Z, m, m)
        path = tmp_path / "grid.csv"
        cg.joint_to_csv(gj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,branch,probability"
        assert len(lines) == 1 + 2 * m.nodes.size ** 2
