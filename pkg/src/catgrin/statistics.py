"""Exact readout statistics of the post-selected double measurement.

The conditional law of the two normalized readouts (x for the path
meter, y for the polarization meter), given a successful post-selection,
is a signed mixture of six 2-D Gaussian components with a common
diagonal covariance diag(1/eps_X^2, 1/eps_Y^2):

    center (1, 0)          weight L_2w
    center (0, +1)         weight (R_2w + Sigma_2w + 2 Re N_w) / 4
    center (0, -1)         weight (R_2w + Sigma_2w - 2 Re N_w) / 4
    center (1/2, +1/2)     weight w_X w_Y Re(Q_w + M_w)
    center (1/2, -1/2)     weight w_X w_Y Re(Q_w - M_w)
    center (0, 0)          weight (w_Y^4 / 2) (R_2w - Sigma_2w)

The half-shifted components carry the path/polarization interference;
the centered one the interference between the two polarization outputs.
The weights sum to the normalization N, and Tr[E_f rho_i] * N is the
post-selection probability.

Internally everything is evaluated in the trace-weighted form (weights
multiplied through by Tr[E_f rho_i]), which stays finite for exactly
orthogonal pure pairs; conditional quantities divide by the
post-selection probability at the end.  This is algebraically identical
to the normalized formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Union

import numpy as np

from .errors import (
    OrthogonalStatesError,
    ValidationError,
    WeakLimitDivergenceError,
    ZeroPostSelectionError,
)
from .hilbert import BlochAxis, SystemOperator, PureState, complement, require_valid
from .meters import GaussianMeter
from .weakvalues import (
    MatrixElements,
    TraceFamily,
    WeakValueSet,
    ORTHOGONALITY_TOL,
    matrix_elements,
    trace_family,
)

# N (or its trace-weighted counterpart) below this relative level means
# the post-selection never succeeds.
ZERO_POSTSELECTION_TOL = 1e-12

LIMIT_REGIMES = ("strong", "strong-cat-weak-grin", "weak-coherent", "almost-orthogonal")


@dataclass(frozen=True)
class MixtureTerm:
    """One Gaussian component of the readout law (trace-weighted weight)."""

    weight: float
    mu_x: float
    mu_y: float


@dataclass(frozen=True)
class MomentReport:
    """First moments of the conditional readout law, plus its normalization.

    cross_xy2 is <x y^2>; it needs the y-meter spread and is None in
    limit reports, which carry no meter scale.  norm_N is +inf for an
    exactly orthogonal pair (the post-selection probability stays finite
    but the overlap-normalized N does not).
    """

    mean_x: float
    mean_y: float
    cross_xy: float
    norm_N: float
    p_postselect: float
    cross_xy2: float | None = None


@dataclass(frozen=True)
class LimitCheck:
    """Residuals of the exact engine against a regime's closed forms."""

    regime: str
    residuals: tuple
    final: float
    monotone: bool


@dataclass(frozen=True, eq=False)
class Experiment:
    """One fully specified run: states, axis, and the two meters.

    Construction validates the operator roles and rejects experiments
    whose post-selection can never succeed.
    """

    rho_i: SystemOperator
    e_f: SystemOperator
    axis: BlochAxis
    meter_x: GaussianMeter
    meter_y: GaussianMeter

    def __post_init__(self):
        require_valid(self.rho_i, "density", "rho_i")
        require_valid(self.e_f, "povm", "E_f")
        fam = self.family
        p = sum(t.weight for t in self._terms())
        if p <= ZERO_POSTSELECTION_TOL * _family_scale(fam):
            raise ZeroPostSelectionError(
                f"post-selection probability {p:.3g} is numerically zero"
            )

    @cached_property
    def family(self) -> TraceFamily:
        return trace_family(self.rho_i, self.e_f, self.axis)

    @cached_property
    def weak_values(self) -> WeakValueSet:
        """Normalized weak values; raises OrthogonalStatesError at overlap 0."""
        fam = self.family
        scale = max(self.rho_i.scale() * self.e_f.scale(), 1e-300)
        if abs(fam.trace) < ORTHOGONALITY_TOL * scale:
            raise OrthogonalStatesError(
                "preparation and post-selection are numerically orthogonal"
            )
        return fam.normalized()

    @property
    def w_x(self) -> float:
        return self.meter_x.w

    @property
    def w_y(self) -> float:
        return self.meter_y.w

    def _terms(self) -> tuple[MixtureTerm, ...]:
        return joint_terms(self.family, self.w_x, self.w_y)


def _family_scale(fam: TraceFamily) -> float:
    return max(
        abs(fam.trace), fam.L2, fam.Sigma2, abs(fam.L), abs(fam.Sigma), 1e-300
    )


def joint_terms(fam: TraceFamily, w_x: float, w_y: float) -> tuple[MixtureTerm, ...]:
    """The six Gaussian components, with trace-weighted signed weights.

    Their weights sum to the post-selection probability Tr[E_f rho_i] * N.
    """
    r2, s2 = fam.R2, fam.Sigma2
    re_n = fam.N.real
    wxy = w_x * w_y
    return (
        MixtureTerm(fam.L2, 1.0, 0.0),
        MixtureTerm((r2 + s2 + 2.0 * re_n) / 4.0, 0.0, 1.0),
        MixtureTerm((r2 + s2 - 2.0 * re_n) / 4.0, 0.0, -1.0),
        MixtureTerm(wxy * (fam.Q + fam.M).real, 0.5, 0.5),
        MixtureTerm(wxy * (fam.Q - fam.M).real, 0.5, -0.5),
        MixtureTerm((w_y ** 4 / 2.0) * (r2 - s2), 0.0, 0.0),
    )


def _check_w(w: float, name: str) -> float:
    w = float(w)
    if not (0.0 <= w <= 1.0):
        raise ValidationError(f"{name}: coherence weight must lie in [0, 1], got {w}")
    return w


def normalization(wv: WeakValueSet, w_x: float, w_y: float) -> float:
    """Normalization N of the conditional law.

    N = 1 - (1 - w_Y^4)(R_2w - Sigma_2w)/2 - 2 (1 - w_X w_Y) Re(Q_w).
    w = 0 is accepted as the exact strong/incoherent boundary.
    """
    w_x = _check_w(w_x, "w_x")
    w_y = _check_w(w_y, "w_y")
    n = (
        1.0
        - 0.5 * (1.0 - w_y ** 4) * (wv.R_2w - wv.Sigma_2w)
        - 2.0 * (1.0 - w_x * w_y) * wv.Q_w.real
    )
    if n <= ZERO_POSTSELECTION_TOL:
        raise ZeroPostSelectionError(f"normalization N = {n:.3g} is not positive")
    return n


def postselection_probability(exp: Experiment) -> float:
    """P{E_f} = Tr[E_f rho_i] N, the chance the post-selection succeeds."""
    p = sum(t.weight for t in exp._terms())
    if p <= ZERO_POSTSELECTION_TOL * _family_scale(exp.family):
        raise ZeroPostSelectionError(
            f"post-selection probability {p:.3g} is numerically zero"
        )
    return p


def joint_density(exp: Experiment, x, y):
    """Conditional density P{x, y | E_f} of the two readouts.

    Accepts scalars or broadcasting arrays; nonnegative and normalized
    to unit mass over the plane.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    terms = exp._terms()
    p = sum(t.weight for t in terms)
    ex, ey = exp.meter_x.epsilon, exp.meter_y.epsilon
    acc = 0.0
    for t in terms:
        acc = acc + t.weight * np.exp(
            -0.5 * (ex * (x - t.mu_x)) ** 2 - 0.5 * (ey * (y - t.mu_y)) ** 2
        )
    out = (ex * ey / (2.0 * math.pi * p)) * acc
    return out if np.ndim(out) else float(out)


def char_function(exp: Experiment, chi, eta):
    """Characteristic function Z(chi, eta) of the conditional law.

    Z(0, 0) = 1 and Z(-chi, -eta) = conj(Z(chi, eta)).  Derivatives at
    the origin generate the readout moments.
    """
    chi = np.asarray(chi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    terms = exp._terms()
    p = sum(t.weight for t in terms)
    ex, ey = exp.meter_x.epsilon, exp.meter_y.epsilon
    z0 = np.exp(-0.5 * ((chi / ex) ** 2 + (eta / ey) ** 2))
    acc = 0.0 + 0.0j
    for t in terms:
        acc = acc + t.weight * np.exp(1j * (chi * t.mu_x + eta * t.mu_y))
    # Divide componentwise: complex division would cost an ulp and break
    # the exact Z(0, 0) = 1 contract.
    out = z0 * (np.real(acc) / p + 1j * (np.imag(acc) / p))
    return out if np.ndim(out) else complex(out)


def moments(exp: Experiment) -> MomentReport:
    """First moments of the conditional law, from the closed forms.

    <x>    = N^-1 [w_X w_Y Re(L_w) + (1 - w_X w_Y) L_2w]
    <y>    = N^-1 [Re(Sigma_w) - (1 - w_X w_Y) Re(M_w)]
    <xy>   = N^-1 (w_X w_Y / 2) Re(M_w)
    <xy^2> = <x> Delta_y^2 + (w_X w_Y / 4N) Re(Q_w)

    evaluated in trace-weighted form (divide by P{E_f} instead of N).
    """
    fam = exp.family
    wxy = exp.w_x * exp.w_y
    p = postselection_probability(exp)
    mean_x = (wxy * fam.L.real + (1.0 - wxy) * fam.L2) / p
    mean_y = (fam.Sigma.real - (1.0 - wxy) * fam.M.real) / p
    cross_xy = 0.5 * wxy * fam.M.real / p
    dy2 = exp.meter_y.spread ** 2
    cross_xy2 = mean_x * dy2 + 0.25 * wxy * fam.Q.real / p
    scale = max(exp.rho_i.scale() * exp.e_f.scale(), 1e-300)
    norm_n = p / fam.trace if abs(fam.trace) >= ORTHOGONALITY_TOL * scale else math.inf
    return MomentReport(
        mean_x=mean_x,
        mean_y=mean_y,
        cross_xy=cross_xy,
        cross_xy2=cross_xy2,
        norm_N=norm_n,
        p_postselect=p,
    )


def limit_moments(
    regime: str,
    wv: Union[WeakValueSet, MatrixElements],
    w_x: float | None = None,
    w_y: float | None = None,
) -> MomentReport:
    """Closed-form moments in a limiting measurement regime.

    'strong' (w_X = w_Y = 0), 'strong-cat-weak-grin' (w_X = 0, w_Y = 1)
    and 'weak-coherent' (w_X = w_Y = 1) take a WeakValueSet and ignore
    w_x/w_y.  'almost-orthogonal' takes MatrixElements plus the actual
    coherence weights; those formulas are exact for any (w_X, w_Y) when
    the overlap is exactly zero.
    """
    if regime not in LIMIT_REGIMES:
        raise ValidationError(f"limit_moments: unknown regime {regime!r}")

    if regime == "almost-orthogonal":
        if not isinstance(wv, MatrixElements):
            raise ValidationError(
                "limit_moments: the almost-orthogonal regime needs MatrixElements"
            )
        if w_x is None or w_y is None:
            raise ValidationError(
                "limit_moments: the almost-orthogonal regime needs w_x and w_y"
            )
        w_x = _check_w(w_x, "w_x")
        w_y = _check_w(w_y, "w_y")
        l2 = abs(wv.l_w) ** 2
        s2 = abs(wv.sigma_w) ** 2
        re_ls = (wv.l_w.conjugate() * wv.sigma_w).real
        wxy = w_x * w_y
        p = 2.0 * (1.0 - wxy) * l2 - 0.5 * (1.0 - w_y ** 4) * (l2 - s2)
        if p <= ZERO_POSTSELECTION_TOL * max(l2, s2, 1e-300):
            detail = (
                "the cross-average grows as 1/r^2 in the residual overlap r"
                if re_ls != 0.0
                else "the limit depends on the approach path"
            )
            raise WeakLimitDivergenceError(
                f"no finite weak-coupling value at w_X w_Y = {wxy:.6g}: {detail}"
            )
        return MomentReport(
            mean_x=(1.0 - wxy) * l2 / p,
            mean_y=-(1.0 - wxy) * re_ls / p,
            cross_xy=0.5 * wxy * re_ls / p,
            norm_N=math.inf,
            p_postselect=p,
        )

    if not isinstance(wv, WeakValueSet):
        raise ValidationError(f"limit_moments: regime {regime!r} needs a WeakValueSet")

    if regime == "strong":
        n = 1.0 - 0.5 * (wv.R_2w - wv.Sigma_2w) - 2.0 * wv.Q_w.real
        mean_x, mean_y, cross = wv.L_2w / n, wv.N_w.real / n, 0.0
    elif regime == "strong-cat-weak-grin":
        n = 1.0 - 2.0 * wv.Q_w.real
        mean_x, mean_y, cross = wv.L_2w / n, wv.N_w.real / n, 0.0
    else:  # weak-coherent
        n = 1.0
        mean_x, mean_y = wv.L_w.real, wv.Sigma_w.real
        cross = 0.5 * wv.M_w.real
    if n <= ZERO_POSTSELECTION_TOL:
        raise ZeroPostSelectionError(f"limit normalization N = {n:.3g} is not positive")
    return MomentReport(
        mean_x=mean_x,
        mean_y=mean_y,
        cross_xy=cross,
        norm_N=n,
        p_postselect=wv.trace * n,
    )


# Meter sequences used to approach each regime, tightest setting last.
_APPROACH = {
    "strong": tuple((GaussianMeter(s, s), GaussianMeter(s, s)) for s in (2, 4, 8, 16)),
    "weak-coherent": tuple(
        (GaussianMeter(t, t), GaussianMeter(t, t)) for t in (0.4, 0.2, 0.1, 0.05)
    ),
    "strong-cat-weak-grin": tuple(
        (GaussianMeter(s, s), GaussianMeter(t, t))
        for s, t in zip((2, 4, 8, 16), (0.4, 0.2, 0.1, 0.05))
    ),
    "almost-orthogonal": tuple(
        (GaussianMeter(t, t), GaussianMeter(t, t)) for t in (1.6, 0.8, 0.4, 0.2)
    ),
}


def _pure_from_rank1(op: SystemOperator, what: str) -> PureState:
    eigs, vecs = np.linalg.eigh(op.entries)
    if eigs[-2] > 1e-10 * max(eigs[-1], 1e-300):
        raise ValidationError(f"{what}: not rank-1, cannot extract a pure state")
    return PureState(vecs[:, -1])


def limit_consistency(exp: Experiment, regime: str) -> LimitCheck:
    """Drive the meters toward a regime and compare engine vs closed forms.

    Returns the max componentwise deviation of (<x>, <y>, <xy>) at each
    of four meter settings approaching the limit; for a genuine limit the
    residuals shrink monotonically.  For 'almost-orthogonal' the closed
    forms are evaluated at each setting's own (w_X, w_Y) - they are exact
    for an orthogonal pair at any coupling - and the experiment's states
    must be rank-1.
    """
    if regime not in LIMIT_REGIMES:
        raise ValidationError(f"limit_consistency: unknown regime {regime!r}")
    if regime == "almost-orthogonal":
        psi = _pure_from_rank1(exp.rho_i, "rho_i")
        phi = _pure_from_rank1(exp.e_f, "E_f")
        me = matrix_elements(psi, phi, exp.axis)
        wv = None
    else:
        me = None
        wv = exp.weak_values

    residuals = []
    for mx, my in _APPROACH[regime]:
        probe = replace(exp, meter_x=mx, meter_y=my)
        got = moments(probe)
        if regime == "almost-orthogonal":
            want = limit_moments(regime, me, probe.w_x, probe.w_y)
        else:
            want = limit_moments(regime, wv)
        residuals.append(
            max(
                abs(got.mean_x - want.mean_x),
                abs(got.mean_y - want.mean_y),
                abs(got.cross_xy - want.cross_xy),
            )
        )
    diffs = np.diff(residuals)
    return LimitCheck(
        regime=regime,
        residuals=tuple(residuals),
        final=residuals[-1],
        monotone=bool(np.all(diffs <= 1e-12)),
    )


def complement_experiment(exp: Experiment) -> Experiment:
    """The same run post-selected on the complementary element 1 - E_f."""
    return replace(exp, e_f=complement(exp.e_f))
