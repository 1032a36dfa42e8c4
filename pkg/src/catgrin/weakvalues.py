"""Weak values for pure and mixed preparation / post-selection.

The normalized weak value of an observable A is Tr[E_f A rho_i] / Tr[E_f rho_i]
(for pure states, <Phi|A|Psi>/<Phi|Psi>).  The full family needed by the
readout statistics consists of five independent quantities - L_w, Sigma_w,
L_2w, Sigma_2w, M_w - plus four redundant ones (R_w, R_2w, Q_w, N_w) that
are filled in through exact identities so they hold by construction:

    R_w  = 1 - L_w
    R_2w = 1 - 2 Re(L_w) + L_2w
    Q_w  = L_w - L_2w
    N_w  = Sigma_w - M_w

Near-orthogonal pairs make every normalized weak value blow up; the raw
matrix elements l_w = <Phi|Pi_L|Psi> and sigma_w = <Phi|sigma_R|Psi> stay
finite and parametrize that limit instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrthogonalStatesError
from .hilbert import (
    BlochAxis,
    PureState,
    SystemOperator,
    pi_l,
    sigma_r,
)

# |Tr(E_f rho_i)| below this times the operators' entry scale is treated
# as an orthogonal pair.
ORTHOGONALITY_TOL = 1e-14


@dataclass(frozen=True)
class WeakValueSet:
    """The weak-value family of one (rho_i, E_f, axis) triple.

    trace is Tr[E_f rho_i], kept so post-selection probabilities can be
    reconstructed without re-deriving it from the operators.
    """

    L_w: complex
    R_w: complex
    Sigma_w: complex
    M_w: complex
    N_w: complex
    Q_w: complex
    L_2w: float
    R_2w: float
    Sigma_2w: float
    trace: float


@dataclass(frozen=True)
class MatrixElements:
    """Raw (unnormalized) matrix elements of a pure pair.

    l_w = <Phi|Pi_L|Psi>, sigma_w = <Phi|sigma_R|Psi>, overlap = <Phi|Psi>.
    Whenever overlap != 0, l_w = overlap * L_w and sigma_w = overlap * Sigma_w.
    """

    l_w: complex
    sigma_w: complex
    overlap: complex


@dataclass(frozen=True)
class TraceFamily:
    """Unnormalized (trace-weighted) weak-value family.

    Every field is ``trace`` times its WeakValueSet counterpart:
    L = Tr[E_f Pi_L rho_i], L2 = Tr[E_f Pi_L rho_i Pi_L], and so on.
    These stay finite for exactly orthogonal pairs, where the normalized
    values diverge, so the statistics engine works with this form.
    """

    trace: float
    L: complex
    Sigma: complex
    L2: float
    Sigma2: float
    M: complex

    @property
    def R(self) -> complex:
        return self.trace - self.L

    @property
    def R2(self) -> float:
        return self.trace - 2.0 * self.L.real + self.L2

    @property
    def Q(self) -> complex:
        return self.L - self.L2

    @property
    def N(self) -> complex:
        return self.Sigma - self.M

    def normalized(self) -> WeakValueSet:
        t = self.trace
        if t == 0.0:
            raise OrthogonalStatesError(
                "cannot normalize a trace family with Tr(E_f rho_i) = 0"
            )
        return WeakValueSet(
            L_w=self.L / t,
            R_w=1.0 - self.L / t,
            Sigma_w=self.Sigma / t,
            M_w=self.M / t,
            N_w=(self.Sigma - self.M) / t,
            Q_w=(self.L - self.L2) / t,
            L_2w=self.L2 / t,
            R_2w=(self.trace - 2.0 * self.L.real + self.L2) / t,
            Sigma_2w=self.Sigma2 / t,
            trace=t,
        )


def _real_trace(m: np.ndarray, what: str) -> float:
    tr = complex(np.trace(m))
    if abs(tr.imag) > 1e-10 * max(1.0, abs(tr.real)):
        raise ValueError(f"{what}: trace has a non-negligible imaginary part ({tr})")
    return tr.real


def trace_family(
    rho_i: SystemOperator, e_f: SystemOperator, axis: BlochAxis
) -> TraceFamily:
    """Trace-weighted weak-value family of a general mixed pair."""
    rho = rho_i.entries
    ef = e_f.entries
    proj_l = pi_l().entries
    sig = sigma_r(axis).entries
    return TraceFamily(
        trace=_real_trace(ef @ rho, "Tr[E_f rho_i]"),
        L=complex(np.trace(ef @ proj_l @ rho)),
        Sigma=complex(np.trace(ef @ sig @ rho)),
        L2=_real_trace(ef @ proj_l @ rho @ proj_l, "Tr[E_f Pi_L rho_i Pi_L]"),
        Sigma2=_real_trace(ef @ sig @ rho @ sig, "Tr[E_f sigma_R rho_i sigma_R]"),
        M=complex(np.trace(ef @ sig @ rho @ proj_l)),
    )


def _orthogonality_scale(rho_i: SystemOperator, e_f: SystemOperator) -> float:
    return max(rho_i.scale() * e_f.scale(), 1e-300)


def weak_values_general(
    rho_i: SystemOperator, e_f: SystemOperator, axis: BlochAxis
) -> WeakValueSet:
    """Weak-value family for mixed preparation rho_i and post-selection E_f.

    Raises OrthogonalStatesError when |Tr(E_f rho_i)| is below
    ORTHOGONALITY_TOL relative to the operators' entry scale; use
    matrix_elements / the almost-orthogonal formulas there.
    """
    fam = trace_family(rho_i, e_f, axis)
    if abs(fam.trace) < ORTHOGONALITY_TOL * _orthogonality_scale(rho_i, e_f):
        raise OrthogonalStatesError(
            f"Tr(E_f rho_i) = {fam.trace:.3g} is numerically zero; weak values "
            "diverge - use the matrix-element (almost-orthogonal) path"
        )
    return fam.normalized()


def weak_values_pure(
    psi: PureState, phi: PureState, axis: BlochAxis
) -> WeakValueSet:
    """Weak-value family of a pure pair, via inner products.

    Equals weak_values_general on the corresponding rank-1 operators; the
    second-order values reduce to L_2w = |L_w|^2, Sigma_2w = |Sigma_w|^2,
    M_w = conj(L_w) Sigma_w.
    """
    me = matrix_elements(psi, phi, axis)
    if abs(me.overlap) ** 2 < ORTHOGONALITY_TOL:
        raise OrthogonalStatesError(
            f"<Phi|Psi> = {me.overlap:.3g} is numerically zero; weak values "
            "diverge - use the matrix-element (almost-orthogonal) path"
        )
    l_w = me.l_w / me.overlap
    s_w = me.sigma_w / me.overlap
    return WeakValueSet(
        L_w=l_w,
        R_w=1.0 - l_w,
        Sigma_w=s_w,
        M_w=l_w.conjugate() * s_w,
        N_w=s_w - l_w.conjugate() * s_w,
        Q_w=l_w - abs(l_w) ** 2,
        L_2w=abs(l_w) ** 2,
        R_2w=1.0 - 2.0 * l_w.real + abs(l_w) ** 2,
        Sigma_2w=abs(s_w) ** 2,
        trace=abs(me.overlap) ** 2,
    )


def matrix_elements(
    psi: PureState, phi: PureState, axis: BlochAxis
) -> MatrixElements:
    """Raw matrix elements of a pure pair; well defined even at orthogonality."""
    del axis  # the storage basis already diagonalizes sigma_R
    a = psi.amplitudes
    b = phi.amplitudes
    overlap = complex(np.vdot(b, a))
    l_w = complex(b[0].conjugate() * a[0] + b[1].conjugate() * a[1])
    s_w = complex(b[2].conjugate() * a[2] - b[3].conjugate() * a[3])
    return MatrixElements(l_w=l_w, sigma_w=s_w, overlap=overlap)
