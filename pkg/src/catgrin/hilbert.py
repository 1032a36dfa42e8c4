"""Linear algebra on the 4-dimensional path (x) polarization Hilbert space.

Basis order is fixed as (L,+), (L,-), (R,+), (R,-), where L/R label the
interferometer arm and +/- are the polarization eigenstates along the
chosen Bloch axis n.  All states and operators handled by the analytic
modules are expressed in this basis; inputs given in the lab H/V frame
(splitter amplitudes and local rotations) are converted at construction
time via the axis rotation.

In this basis the path projectors are constant matrices and the
polarization observable on the right arm is diag(0, 0, 1, -1) for every
axis; the axis only enters when converting H/V-frame data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Relative tolerance for Hermiticity / positivity / normalization checks,
# measured against the operator's max absolute entry.
OPERATOR_TOL = 1e-10

# Below this norm an input vector is treated as the zero vector.
ZERO_NORM_TOL = 1e-12

DIM = 4


def _as_complex_matrix(entries, shape, what: str) -> np.ndarray:
    arr = np.asarray(entries, dtype=np.complex128)
    if arr.shape != shape:
        raise ValidationError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ValidationError(f"{what}: entries must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BlochAxis:
    """Unit 3-vector selecting the polarization eigenbasis |+>, |->."""

    n: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.n, dtype=float)
        if vec.shape != (3,):
            raise ValidationError(f"axis: expected a 3-vector, got shape {vec.shape}")
        if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise ValidationError(
                f"axis: norm must be 1 within 1e-12, got {np.linalg.norm(vec)!r}"
            )
        vec = vec.copy()
        vec.flags.writeable = False
        object.__setattr__(self, "n", vec)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "BlochAxis":
        """Axis from spherical angles (theta from +z, phi in the x-y plane)."""
        return cls(np.array([
            math.sin(theta) * math.cos(phi),
            math.sin(theta) * math.sin(phi),
            math.cos(theta),
        ]))

    @classmethod
    def z(cls) -> "BlochAxis":
        return cls(np.array([0.0, 0.0, 1.0]))

    def polarization_rotation(self) -> np.ndarray:
        """2x2 unitary whose columns are |+_n>, |-_n> in the H/V frame.

        H/V is identified with the sigma_z eigenbasis.  Multiplying a
        polarization vector in the n-eigenbasis by this matrix returns its
        H/V components; the adjoint performs the H/V -> n conversion.
        """
        nx, ny, nz = self.n
        theta = math.acos(min(1.0, max(-1.0, nz)))
        phi = math.atan2(ny, nx)
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        return np.array([
            [c, -s * np.exp(-1j * phi)],
            [s * np.exp(1j * phi), c],
        ])


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized 4-vector of amplitudes ordered (L,+), (L,-), (R,+), (R,-)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if vec.shape != (DIM,):
            raise ValidationError(f"state: expected 4 amplitudes, got shape {vec.shape}")
        if not (np.all(np.isfinite(vec.real)) and np.all(np.isfinite(vec.imag))):
            raise ValidationError("state: amplitudes must be finite")
        norm = np.linalg.norm(vec)
        if norm < ZERO_NORM_TOL:
            raise ValidationError("state: zero vector cannot be normalized")
        vec = vec / norm
        vec.flags.writeable = False
        object.__setattr__(self, "amplitudes", vec)

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "SystemOperator":
        """Rank-1 projector |psi><psi|."""
        return SystemOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class SystemOperator:
    """A 4x4 complex matrix on the path (x) polarization space."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "entries", _as_complex_matrix(self.entries, (DIM, DIM), "operator")
        )

    @property
    def matrix(self) -> np.ndarray:
        return self.entries

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def scale(self) -> float:
        """Max absolute entry; reference for relative tolerances."""
        return float(np.max(np.abs(self.entries)))


@dataclass(frozen=True)
class ValidationReport:
    """Per-invariant residuals for a density-matrix or POVM-element check."""

    role: str
    ok: bool
    residuals: dict = field(default_factory=dict)

    def __str__(self):
        parts = ", ".join(f"{k}={v:.3g}" for k, v in self.residuals.items())
        return f"{self.role}: {'pass' if self.ok else 'FAIL'} ({parts})"


def identity_op() -> SystemOperator:
    return SystemOperator(np.eye(DIM, dtype=np.complex128))


def pi_l() -> SystemOperator:
    """Projector on the left arm (acts as identity on polarization there)."""
    return SystemOperator(np.diag([1.0, 1.0, 0.0, 0.0]).astype(np.complex128))


def pi_r() -> SystemOperator:
    """Projector on the right arm."""
    return SystemOperator(np.diag([0.0, 0.0, 1.0, 1.0]).astype(np.complex128))


def sigma_r(axis: BlochAxis) -> SystemOperator:
    """Polarization observable measured on the right arm: |R,+><R,+| - |R,-><R,-|.

    Expressed in the storage basis, which is the eigenbasis this axis
    defines, so the matrix is diag(0, 0, 1, -1) for every valid axis.
    Vanishes on the left arm; squares to the right-arm projector.
    """
    if not isinstance(axis, BlochAxis):
        axis = BlochAxis(np.asarray(axis, dtype=float))
    return SystemOperator(np.diag([0.0, 0.0, 1.0, -1.0]).astype(np.complex128))


def _check_unitary(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (2, 2):
        raise ValidationError(f"{name}: expected a 2x2 matrix, got shape {v.shape}")
    dev = np.max(np.abs(v.conj().T @ v - np.eye(2)))
    if dev > 1e-10:
        raise ValidationError(f"{name}: not unitary (residual {dev:.3g})")
    return v


def _splitter_state(
    left_amp: complex,
    right_amp: complex,
    v_left: np.ndarray,
    v_right: np.ndarray,
    axis: BlochAxis,
) -> PureState:
    if abs(abs(left_amp) ** 2 + abs(right_amp) ** 2 - 1.0) > 1e-10:
        raise ValidationError(
            "splitter amplitudes: |r|^2 + |t|^2 must equal 1 within 1e-10"
        )
    h = np.array([1.0, 0.0], dtype=np.complex128)
    left = v_left @ (left_amp * h)
    right = v_right @ (right_amp * h)
    # Rotate each arm's polarization from the H/V frame to the n-eigenbasis.
    rot = axis.polarization_rotation().conj().T
    return PureState(np.concatenate([rot @ left, rot @ right]))


def make_preparation(r1, t1, v1, v2, axis: BlochAxis | None = None) -> PureState:
    """State leaving the input splitter: V1 r1 |L,H> + V2 t1 |R,H>.

    r1, t1 are the splitter's reflection/transmission amplitudes
    (|r1|^2 + |t1|^2 = 1); V1, V2 are the local 2x2 polarization
    unitaries applied in each arm.  The result is returned in the
    axis eigenbasis (default: z, where H/V coincide with +/-).
    """
    axis = axis or BlochAxis.z()
    v1 = _check_unitary(v1, "V1")
    v2 = _check_unitary(v2, "V2")
    return _splitter_state(complex(r1), complex(t1), v1, v2, axis)


def make_postselection(r2, t2, v3, v4, axis: BlochAxis | None = None) -> PureState:
    """Post-selected state seen from the output side: V3† r2* |L,H> + V4† t2* |R,H>.

    Mirrors make_preparation with conjugated splitter amplitudes and
    adjoint local rotations, per the time-reversed view of the output
    splitter and detector.
    """
    axis = axis or BlochAxis.z()
    v3 = _check_unitary(v3, "V3")
    v4 = _check_unitary(v4, "V4")
    return _splitter_state(
        complex(r2).conjugate(),
        complex(t2).conjugate(),
        v3.conj().T,
        v4.conj().T,
        axis,
    )


def complement(e_f: SystemOperator) -> SystemOperator:
    """Complementary post-selection element 1 - E_f.

    The input must be a valid POVM element.  The result is again a valid
    POVM element, except that complement(identity) has zero trace and is
    unusable as a post-selection.
    """
    report = validate(e_f, "povm")
    if not report.ok:
        raise ValidationError(f"complement: input is not a POVM element ({report})")
    return SystemOperator(np.eye(DIM, dtype=np.complex128) - e_f.entries)


def validate(op: SystemOperator, role: str) -> ValidationReport:
    """Check density-matrix or POVM-element invariants; reports, never raises.

    role='density': Hermitian, positive semidefinite, unit trace.
    role='povm': Hermitian, eigenvalues in [0, 1], trace in (0, 4].
    Residuals are relative to the operator's max absolute entry (an
    all-zero operator uses scale 1).
    """
    if role not in ("density", "povm"):
        raise ValidationError(f"validate: unknown role {role!r}")
    m = op.entries
    scale = max(op.scale(), 1e-300)
    res: dict[str, float] = {}
    res["hermiticity"] = float(np.max(np.abs(m - m.conj().T))) / scale
    herm = 0.5 * (m + m.conj().T)
    eigs = np.linalg.eigvalsh(herm)
    res["min_eigenvalue"] = float(max(0.0, -eigs[0])) / scale
    tr = float(np.trace(m).real)
    if role == "density":
        res["trace_deviation"] = abs(tr - 1.0)
        ok = all(v <= OPERATOR_TOL for v in res.values())
    else:
        res["max_eigenvalue_excess"] = float(max(0.0, eigs[-1] - 1.0))
        ok = all(v <= OPERATOR_TOL for v in res.values())
        res["trace"] = tr
        ok = ok and (0.0 < tr <= DIM + OPERATOR_TOL)
    return ValidationReport(role=role, ok=ok, residuals=res)


def require_valid(op: SystemOperator, role: str, what: str) -> None:
    """Raise ValidationError if ``op`` fails its role invariants."""
    report = validate(op, role)
    if not report.ok:
        raise ValidationError(f"{what}: {report}")
