"""Shared generators and independent numeric oracles for the test suite."""

import numpy as np
import pytest

import catgrin as cg


def rand_pure(rng) -> cg.PureState:
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return cg.PureState(v)


def rand_pure_pair(rng, min_overlap=0.2):
    """Pure pair with a not-too-small overlap (keeps weak values moderate)."""
    while True:
        psi, phi = rand_pure(rng), rand_pure(rng)
        if abs(phi.inner(psi)) >= min_overlap:
            return psi, phi


def rand_density(rng) -> cg.SystemOperator:
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = g @ g.conj().T
    return cg.SystemOperator(rho / np.trace(rho).real)


def rand_unitary(rng) -> np.ndarray:
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_povm(rng, lo=0.05, hi=0.95) -> cg.SystemOperator:
    u = rand_unitary(rng)
    eigs = rng.uniform(lo, hi, size=4)
    return cg.SystemOperator(u @ np.diag(eigs).astype(complex) @ u.conj().T)


def rand_meter(rng, eps_range=(0.4, 3.0), ratio_range=(1.0, 3.0)) -> cg.GaussianMeter:
    eps = float(rng.uniform(*eps_range))
    return cg.GaussianMeter(eps, eps * float(rng.uniform(*ratio_range)))


def rand_experiment(rng, pure=False, **meter_kw) -> cg.Experiment:
    axis = cg.BlochAxis.z()
    for _ in range(100):
        if pure:
            psi, phi = rand_pure_pair(rng)
            rho, ef = psi.density(), phi.density()
        else:
            rho, ef = rand_density(rng), rand_povm(rng)
        try:
            return cg.Experiment(
                rho_i=rho,
                e_f=ef,
                axis=axis,
                meter_x=rand_meter(rng, **meter_kw),
                meter_y=rand_meter(rng, **meter_kw),
            )
        except cg.CatgrinError:
            continue
    raise RuntimeError("could not draw a valid experiment")


def orthogonal_pure_pair(rng):
    """Pure pair with <Phi|Psi> = 0 (to machine precision) and nonzero l_w."""
    while True:
        psi = rand_pure(rng)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v -= np.vdot(psi.amplitudes, v) * psi.amplitudes
        if np.linalg.norm(v) < 1e-6:
            continue
        phi = cg.PureState(v)
        me = cg.matrix_elements(psi, phi, cg.BlochAxis.z())
        if abs(me.l_w) > 0.1 and abs(me.sigma_w) > 0.1:
            return psi, phi


def gauss_legendre_2d(exp: cg.Experiment, n=256):
    """Tensor Gauss-Legendre nodes/weights covering the readout support.

    Per-axis interval [-8 max(1/eps, 1) - 1, +8 max(1/eps, 1) + 1]; the
    truncated tail mass is far below the quadrature tolerance.
    """
    grids = []
    for meter in (exp.meter_x, exp.meter_y):
        half = 8.0 * max(meter.spread, 1.0) + 1.0
        x, w = np.polynomial.legendre.leggauss(n)
        grids.append((x * half, w * half))
    return grids


def density_mass(exp: cg.Experiment, n=256) -> float:
    """Independent quadrature of the conditional density over the plane."""
    (xs, wx), (ys, wy) = gauss_legendre_2d(exp, n)
    dens = cg.joint_density(exp, xs[:, None], ys[None, :])
    return float(wx @ dens @ wy)


def quadrature_char(exp: cg.Experiment, chi: float, eta: float, n=256) -> complex:
    """Fourier transform of the density by quadrature (oracle for Z)."""
    (xs, wx), (ys, wy) = gauss_legendre_2d(exp, n)
    dens = cg.joint_density(exp, xs[:, None], ys[None, :])
    phase = np.exp(1j * (chi * xs[:, None] + eta * ys[None, :]))
    return complex(wx @ (dens * phase) @ wy)


def fd_moments(exp: cg.Experiment, h=1e-4):
    """<x>, <y>, <xy> from central finite differences of Z at the origin."""
    z = cg.char_function
    dzx = (z(exp, h, 0.0) - z(exp, -h, 0.0)) / (2 * h)
    dzy = (z(exp, 0.0, h) - z(exp, 0.0, -h)) / (2 * h)
    dzxy = (
        z(exp, h, h) - z(exp, h, -h) - z(exp, -h, h) + z(exp, -h, -h)
    ) / (4 * h * h)
    return dzx.imag, dzy.imag, -dzxy.real


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
