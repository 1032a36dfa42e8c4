"""Brute-force verification of the readout statistics on a position grid.

This module never touches the engine's Gaussian closed forms.  It
evaluates the pre-Gaussian six-term Born-rule structure of the joint law
directly, with arbitrary (gridded) meter kernels: the coupling unitary
splits the system into the left arm and the two right-arm polarization
eigenstates, each dragging its meter by a unit shift, so

    P{E_f, x, y} = sum_{a,b} Tr[E_f P_a rho_i P_b]
                            <x, y| D_a (rho_X o rho_Y) D_b^dag |x, y>

with P_a in {Pi_L, |R,+><R,+|, |R,-><R,->} and D_a the unit pointer
shift branch a imposes (x+1 for the left arm, y+-1 for the polarization
eigenstates).  On the grid those matrix elements are kernel entries at
index offsets, which requires the spacing to divide 1 exactly.

A secondary check (pure states, pure meters) applies the coupling
unitary literally as conditional index shifts on a wavefunction grid and
must reproduce the same law; it pins down every coefficient and
conjugation of the six-term structure independently.

Note on the almost-orthogonal reduction: the one-unit-shifted y
components enter the conditional law with weight +|l_w -+ sigma_w|^2 / 4
(positive).  The grid oracle at an exactly orthogonal pure pair confirms
the positive sign; a negative weight would drive the density negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hilbert import BlochAxis, PureState, SystemOperator, require_valid
from .meters import GaussianMeter, meter_density
from .statistics import MomentReport
from .weakvalues import ORTHOGONALITY_TOL

DEFAULT_SPACING = 1.0 / 16.0
COVERAGE_TOL = 1e-10


def _unit_shift_steps(spacing: float) -> int:
    steps = 1.0 / spacing
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise ValidationError(
            f"grid spacing {spacing} must divide the unit pointer shift exactly"
        )
    return int(round(steps))


@dataclass(frozen=True, eq=False)
class GriddedMeter:
    """A meter state sampled on a uniform position grid.

    kernel[i, j] = rho(nodes[i], nodes[j]).  Hermitian, unit trace
    (diagonal sum times spacing), positive semidefinite.
    """

    nodes: np.ndarray
    kernel: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        kernel = np.asarray(self.kernel)
        # Real kernels stay float64: the dense outer products downstream run
        # twice as fast, and Gaussian meters are always real.
        if kernel.dtype != np.complex128:
            kernel = kernel.astype(np.float64)
        n = nodes.shape[0]
        if nodes.ndim != 1 or n < 3:
            raise ValidationError("gridded meter: need a 1-D grid of >= 3 nodes")
        steps = np.diff(nodes)
        if np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ValidationError("gridded meter: grid must be uniform")
        if kernel.shape != (n, n):
            raise ValidationError(
                f"gridded meter: kernel shape {kernel.shape} does not match grid ({n})"
            )
        herm = np.max(np.abs(kernel - kernel.conj().T))
        scale = max(float(np.max(np.abs(kernel))), 1e-300)
        if herm > 1e-10 * scale:
            raise ValidationError(f"gridded meter: kernel not Hermitian ({herm:.3g})")
        tr = float(np.sum(kernel.diagonal().real)) * float(steps[0])
        if abs(tr - 1.0) > 1e-10:
            raise ValidationError(
                f"gridded meter: trace {tr!r} is not 1 within 1e-10 "
                "(grid too coarse for this meter's spread?)"
            )
        nodes = nodes.copy()
        nodes.flags.writeable = False
        kernel = kernel.copy()
        kernel.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "kernel", kernel)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @classmethod
    def from_gaussian(
        cls, m: GaussianMeter, spacing: float = DEFAULT_SPACING, pad: float = 2.0
    ) -> "GriddedMeter":
        """Sample a Gaussian meter on +-(8/epsilon + pad), tails below 1e-14."""
        steps = _unit_shift_steps(spacing)
        half = int(math.ceil((8.0 / m.epsilon + pad) / spacing))
        half = max(half, 2 * steps)
        nodes = np.arange(-half, half + 1, dtype=float) * spacing
        kernel = meter_density(m, nodes[:, None], nodes[None, :])
        return cls(nodes=nodes, kernel=kernel)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the (trace-normalized) kernel operator.

        O(n^3); intended for validation on moderate grids.  The kernel is
        positive semidefinite for a physical meter state (>= -1e-8 after
        normalization by the largest eigenvalue).
        """
        eigs = np.linalg.eigvalsh(self.kernel)
        return float(eigs[0] / max(eigs[-1], 1e-300))


@dataclass(frozen=True, eq=False)
class GriddedJoint:
    """Joint law P{branch, x_i, y_j} on the grid, for both branches.

    selected is the E_f branch, complement the (1 - E_f) branch.  Values
    are probability densities at the nodes; branch masses are the
    densities summed times the cell area.
    """

    nodes_x: np.ndarray
    nodes_y: np.ndarray
    selected: np.ndarray
    complement: np.ndarray
    trace_ef_rho: float

    def __post_init__(self):
        peak = max(
            float(np.max(self.selected)), float(np.max(self.complement)), 1e-300
        )
        low = min(float(np.min(self.selected)), float(np.min(self.complement)))
        if low < -1e-10 * max(peak, 1.0):
            raise ValidationError(
                f"gridded joint: negative density {low:.3g} exceeds tolerance"
            )
        total = self.mass("selected") + self.mass("complement")
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(
                f"gridded joint: branch masses sum to {total!r}, not 1 within 1e-6"
            )

    @property
    def cell_area(self) -> float:
        return float(
            (self.nodes_x[1] - self.nodes_x[0]) * (self.nodes_y[1] - self.nodes_y[0])
        )

    def branch(self, which: str) -> np.ndarray:
        if which == "selected":
            return self.selected
        if which == "complement":
            return self.complement
        raise ValidationError(f"unknown branch {which!r}")

    def mass(self, which: str = "selected") -> float:
        return float(np.sum(self.branch(which))) * self.cell_area


def _coverage_check(meter: GriddedMeter, shifts: tuple[int, ...], label: str) -> None:
    diag = meter.kernel.diagonal().real
    h = meter.spacing
    n = diag.shape[0]
    for d in shifts:
        lo, hi = max(0, -d), min(n, n - d)
        mass = float(np.sum(diag[lo + d : hi + d])) * h if d else float(np.sum(diag)) * h
        if 1.0 - mass > COVERAGE_TOL:
            raise ValidationError(
                f"{label}: grid does not cover the shifted meter support "
                f"(missing mass {1.0 - mass:.3g})"
            )


def _shifted_diag(kernel: np.ndarray, d_row: int, d_col: int) -> np.ndarray:
    """v[i] = kernel[i + d_row, i + d_col], zero-filled outside the grid."""
    n = kernel.shape[0]
    lo = max(0, -d_row, -d_col)
    hi = min(n, n - d_row, n - d_col)
    out = np.zeros(n, dtype=kernel.dtype)
    idx = np.arange(lo, hi)
    out[lo:hi] = kernel[idx + d_row, idx + d_col]
    return out


def _projector_traces(rho: np.ndarray, ef: np.ndarray) -> dict[str, complex]:
    """Tr[E_f P_a rho_i P_b] for the three coupling branches.

    P_L spans rows/cols (0, 1); |R,+> is index 2 and |R,-> index 3 of the
    storage basis.  Computed directly from sub-blocks, independently of
    the weak-value module's trace family.
    """
    # Tr[E_f P_a rho P_b] = sum_{i in b, j in a} E_f[i, j] rho[j, i].
    idx_l = (0, 1)

    def trace_ab(a_idx, b_idx) -> complex:
        total = 0.0 + 0.0j
        for i in b_idx:
            for j in a_idx:
                total += ef[i, j] * rho[j, i]
        return total

    return {
        "LL": trace_ab(idx_l, idx_l),
        "pp": trace_ab((2,), (2,)),
        "mm": trace_ab((3,), (3,)),
        "Lp": trace_ab(idx_l, (2,)),
        "Lm": trace_ab(idx_l, (3,)),
        "pm": trace_ab((2,), (3,)),
    }


def _branch_density(
    rho: np.ndarray,
    ef: np.ndarray,
    meter_x: GriddedMeter,
    meter_y: GriddedMeter,
) -> np.ndarray:
    t = _projector_traces(rho, ef)
    sx = _unit_shift_steps(meter_x.spacing)
    sy = _unit_shift_steps(meter_y.spacing)
    kx, ky = meter_x.kernel, meter_y.kernel

    d_x0 = _shifted_diag(kx, 0, 0)          # rho_X(x, x)
    d_x1 = _shifted_diag(kx, -sx, -sx)      # rho_X(x-1, x-1)
    b_x = _shifted_diag(kx, -sx, 0)         # rho_X(x-1, x)
    d_y0 = _shifted_diag(ky, 0, 0)          # rho_Y(y, y)
    d_yp = _shifted_diag(ky, -sy, -sy)      # rho_Y(y-1, y-1)
    d_ym = _shifted_diag(ky, sy, sy)        # rho_Y(y+1, y+1)
    b_yp = _shifted_diag(ky, 0, -sy)        # rho_Y(y, y-1)
    b_ym = _shifted_diag(ky, 0, sy)         # rho_Y(y, y+1)
    b_y2 = _shifted_diag(ky, -sy, sy)       # rho_Y(y-1, y+1)

    if kx.dtype != np.complex128 and ky.dtype != np.complex128:
        # Real kernels: 2 Re(t K) = 2 Re(t) K, all-float arithmetic.
        return (
            t["LL"].real * np.outer(d_x1, d_y0)
            + t["pp"].real * np.outer(d_x0, d_yp)
            + t["mm"].real * np.outer(d_x0, d_ym)
            + 2.0 * t["Lp"].real * np.outer(b_x, b_yp)
            + 2.0 * t["Lm"].real * np.outer(b_x, b_ym)
            + 2.0 * t["pm"].real * np.outer(d_x0, b_y2)
        )
    return (
        t["LL"].real * np.outer(d_x1, d_y0).real
        + t["pp"].real * np.outer(d_x0, d_yp).real
        + t["mm"].real * np.outer(d_x0, d_ym).real
        + 2.0 * (t["Lp"] * np.outer(b_x, b_yp)).real
        + 2.0 * (t["Lm"] * np.outer(b_x, b_ym)).real
        + 2.0 * (t["pm"] * np.outer(d_x0, b_y2)).real
    )


def brute_force_joint(
    rho_i: SystemOperator,
    e_f: SystemOperator,
    axis: BlochAxis,
    meter_x: GriddedMeter,
    meter_y: GriddedMeter,
) -> GriddedJoint:
    """Joint readout law for both post-selection branches, from first principles."""
    del axis  # operators are stored in the axis eigenbasis already
    require_valid(rho_i, "density", "rho_i")
    require_valid(e_f, "povm", "E_f")
    _coverage_check(meter_x, (0, -_unit_shift_steps(meter_x.spacing)), "x meter")
    sy = _unit_shift_steps(meter_y.spacing)
    _coverage_check(meter_y, (0, -sy, sy), "y meter")

    rho = rho_i.entries
    ef = e_f.entries
    ef_c = np.eye(4, dtype=np.complex128) - ef
    selected = _branch_density(rho, ef, meter_x, meter_y)
    comp = _branch_density(rho, ef_c, meter_x, meter_y)
    return GriddedJoint(
        nodes_x=meter_x.nodes,
        nodes_y=meter_y.nodes,
        selected=selected,
        complement=comp,
        trace_ef_rho=float(np.trace(ef @ rho).real),
    )


def oracle_moments(gj: GriddedJoint, which: str = "selected") -> MomentReport:
    """Moments of one branch by weighted sums over the grid."""
    vals = gj.branch(which)
    mass = gj.mass(which)
    if mass <= 1e-14:
        raise ValidationError(f"oracle_moments: branch {which!r} has zero mass")
    xs = gj.nodes_x[:, None]
    ys = gj.nodes_y[None, :]
    area = gj.cell_area
    mean_x = float(np.sum(xs * vals)) * area / mass
    mean_y = float(np.sum(ys * vals)) * area / mass
    cross = float(np.sum(xs * ys * vals)) * area / mass
    cross2 = float(np.sum(xs * ys ** 2 * vals)) * area / mass
    norm_n = (
        mass / gj.trace_ef_rho
        if abs(gj.trace_ef_rho) > ORTHOGONALITY_TOL
        else math.inf
    )
    return MomentReport(
        mean_x=mean_x,
        mean_y=mean_y,
        cross_xy=cross,
        cross_xy2=cross2,
        norm_N=norm_n,
        p_postselect=mass,
    )


def gaussian_wavefunction(m: GaussianMeter, nodes: np.ndarray) -> np.ndarray:
    """Wavefunction of a pure Gaussian meter (epsilon = epsilon_tilde)."""
    if not m.is_pure(tol=1e-9):
        raise ValidationError("wavefunction exists only for a pure meter state")
    e2 = m.epsilon ** 2
    return (e2 / (2.0 * math.pi)) ** 0.25 * np.exp(-e2 * nodes ** 2 / 4.0)


def unitary_shift_joint(
    psi: PureState,
    phi: PureState,
    meter_x: GaussianMeter,
    meter_y: GaussianMeter,
    spacing: float = DEFAULT_SPACING,
    pad: float = 2.0,
) -> GriddedJoint:
    """Joint law via the coupling unitary applied as literal index shifts.

    Pure preparation, pure meters.  The left-arm components drag the x
    pointer one unit; the right-arm polarization eigencomponents drag the
    y pointer one unit up or down.  Projecting on the post-selected state
    gives the selected branch; the complement is total minus selected.
    Independent of the six-term expansion, so it adjudicates its
    coefficients.
    """
    steps = _unit_shift_steps(spacing)
    halfx = int(math.ceil((8.0 / meter_x.epsilon + pad) / spacing))
    halfy = int(math.ceil((8.0 / meter_y.epsilon + pad) / spacing))
    nx = np.arange(-halfx, halfx + 1, dtype=float) * spacing
    ny = np.arange(-halfy, halfy + 1, dtype=float) * spacing
    wx = gaussian_wavefunction(meter_x, nx)
    wy = gaussian_wavefunction(meter_y, ny)

    def shift(vec: np.ndarray, d: int) -> np.ndarray:
        out = np.zeros_like(vec)
        if d >= 0:
            out[d:] = vec[: vec.size - d] if d else vec
        else:
            out[:d] = vec[-d:]
        return out

    # Meter wavefunctions after the conditional unit shifts: the left arm
    # drags the x pointer to +1, the polarization eigenstates drag y to +-1.
    wx_l = shift(wx, steps)
    wy_p = shift(wy, steps)
    wy_m = shift(wy, -steps)

    a = psi.amplitudes
    b = phi.amplitudes.conj()
    # Post-selected amplitude on the grid: sum over the four system components.
    amp = (
        (b[0] * a[0] + b[1] * a[1]) * np.outer(wx_l, wy)
        + (b[2] * a[2]) * np.outer(wx, wy_p)
        + (b[3] * a[3]) * np.outer(wx, wy_m)
    )
    selected = np.abs(amp) ** 2
    # Readout law over every outcome: trace over the (orthogonal) system
    # components; no cross terms survive.
    total = (
        (abs(a[0]) ** 2 + abs(a[1]) ** 2) * np.outer(wx_l ** 2, wy ** 2)
        + abs(a[2]) ** 2 * np.outer(wx ** 2, wy_p ** 2)
        + abs(a[3]) ** 2 * np.outer(wx ** 2, wy_m ** 2)
    )
    comp = total - selected
    return GriddedJoint(
        nodes_x=nx,
        nodes_y=ny,
        selected=selected,
        complement=comp,
        trace_ef_rho=abs(complex(np.vdot(phi.amplitudes, psi.amplitudes))) ** 2,
    )


def joint_to_csv(gj: GriddedJoint, path) -> None:
    """Dump both branches as CSV rows (x, y, branch, probability density)."""
    xs = np.repeat(gj.nodes_x, gj.nodes_y.size)
    ys = np.tile(gj.nodes_y, gj.nodes_x.size)
    rows = []
    for name, flag in (("selected", 1), ("complement", 0)):
        vals = gj.branch(name).reshape(-1)
        rows.append(
            np.column_stack([xs, ys, np.full(vals.size, float(flag)), vals])
        )
    data = np.vstack(rows)
    np.savetxt(
        path,
        data,
        delimiter=",",
        header="x,y,branch,probability",
        comments="",
        fmt=["%.6f", "%.6f", "%d", "%.17g"],
    )
